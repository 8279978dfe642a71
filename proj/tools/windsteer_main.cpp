// windsteer: wind-farm yaw-control toolkit.
//
// Pipeline commands (all deterministic given --seed and the config):
//   gen-turbulence  write the turbulence box library + manifest
//   gen-expert      roll expert demonstration datasets
//   pretrain        behavior-clone actor and critics from a dataset
//   train           pretrain + online fine-tuning with snapshots
//   evaluate        run the condition grid for snapshots and baselines
//   sweep           the full experiment end to end (resumable)
//   report          rebuild the summary heatmap from evaluation reports
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <string>

#include <CLI11.hpp>

#include "windsteer/commands.hpp"

namespace {

struct CliOptions {
    std::string profile = "desk";
    std::string config_path;
    std::string size;
    std::string out_dir;
    std::string target = "all";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int workers = 0;
};

windsteer::RunConfig build_config(const CliOptions& opt) {
    windsteer::RunConfig cfg = windsteer::default_config(opt.profile);
    if (!opt.config_path.empty()) {
        std::ifstream in(opt.config_path);
        if (!in) throw std::runtime_error("cannot open config file " + opt.config_path);
        cfg.apply_json(nlohmann::json::parse(in));
    }
    if (opt.seed_set) cfg.master_seed = opt.seed;
    if (!opt.size.empty()) cfg.size = opt.size;
    if (!opt.out_dir.empty()) cfg.out_dir = opt.out_dir;
    if (opt.workers > 0) cfg.workers = opt.workers;
    cfg.validate();
    return cfg;
}

std::vector<std::string> selected_sizes(const CliOptions& opt) {
    if (opt.size.empty()) return windsteer::all_dataset_sizes();
    windsteer::dataset_size_from_name(opt.size);
    return {opt.size};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"wind-farm yaw-control toolkit"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may appear after the subcommand name

    CliOptions opt;
    app.add_option("--profile", opt.profile, "configuration profile")
        ->check(CLI::IsMember({"desk", "paper"}));
    app.add_option("--config", opt.config_path, "JSON config overriding the profile defaults")
        ->check(CLI::ExistingFile);
    app.add_option("--seed", opt.seed, "master seed");
    app.add_option("--size", opt.size, "dataset size (none|small|medium|large)")
        ->check(CLI::IsMember({"none", "small", "medium", "large"}));
    app.add_option("--out", opt.out_dir, "output directory");
    app.add_option("--workers", opt.workers, "worker threads")->check(CLI::PositiveNumber);

    CLI::App* gen_turb = app.add_subcommand("gen-turbulence", "generate the turbulence library");
    CLI::App* gen_expert = app.add_subcommand("gen-expert", "generate expert datasets");
    CLI::App* pretrain = app.add_subcommand("pretrain", "pretrain agents from demonstrations");
    CLI::App* train = app.add_subcommand("train", "pretrain + online training with snapshots");
    CLI::App* evaluate = app.add_subcommand("evaluate", "evaluate snapshots and baselines");
    evaluate
        ->add_option("target", opt.target, "what to evaluate: a size name, greedy, lut, or all")
        ->check(CLI::IsMember({"all", "greedy", "lut", "none", "small", "medium", "large"}));
    CLI::App* sweep = app.add_subcommand("sweep", "run the full experiment");
    CLI::App* report = app.add_subcommand("report", "rebuild the summary from reports");

    try {
        app.parse(argc, argv);
        opt.seed_set = app.count("--seed") > 0;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        const windsteer::CommandContext ctx = windsteer::make_context(build_config(opt));
        if (gen_turb->parsed()) {
            windsteer::cmd_gen_turbulence(ctx);
        } else if (gen_expert->parsed()) {
            for (const std::string& size : selected_sizes(opt)) windsteer::cmd_gen_expert(ctx, size);
        } else if (pretrain->parsed()) {
            for (const std::string& size : selected_sizes(opt))
                for (std::uint64_t seed : ctx.cfg.train.seeds)
                    windsteer::cmd_pretrain(ctx, size, seed);
        } else if (train->parsed()) {
            for (const std::string& size : selected_sizes(opt))
                for (std::uint64_t seed : ctx.cfg.train.seeds)
                    windsteer::cmd_train(ctx, size, seed);
        } else if (evaluate->parsed()) {
            windsteer::cmd_evaluate(ctx, opt.target);
        } else if (sweep->parsed()) {
            windsteer::cmd_sweep(ctx);
        } else if (report->parsed()) {
            windsteer::cmd_report(ctx);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
