#pragma once

// Command layer: the artifact pipeline behind each CLI subcommand. Every
// command is deterministic given the master seed, embeds the config hash in
// its outputs, and skips work whose up-to-date outputs already exist (which
// makes the full sweep resumable). An artifact carrying a different config
// hash is treated as stale and reported as an error rather than overwritten.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "windsteer/config.hpp"
#include "windsteer/env.hpp"
#include "windsteer/eval.hpp"
#include "windsteer/pretrain.hpp"
#include "windsteer/sac.hpp"
#include "windsteer/turbulence.hpp"
#include "windsteer/yaw_optimizer.hpp"

namespace windsteer {

inline const std::vector<std::string>& all_dataset_sizes() {
    static const std::vector<std::string> sizes = {"none", "small", "medium", "large"};
    return sizes;
}

struct CommandContext {
    RunConfig cfg;
    FarmLayout layout;
    std::string hash;
    bool verbose = true;

    size_t n_turbines() const { return layout.size(); }

    std::filesystem::path out() const { return cfg.out_dir; }
    std::filesystem::path boxes_dir() const { return out() / "boxes"; }
    std::filesystem::path manifest_path() const { return boxes_dir() / "manifest.json"; }
    std::filesystem::path box_path(const std::string& role, int idx) const {
        return boxes_dir() / (role + "_" + std::to_string(idx) + ".json");
    }
    std::filesystem::path dataset_path(const std::string& size) const {
        return out() / "datasets" / (size + ".json");
    }
    std::filesystem::path lut_path() const { return out() / "lut.json"; }
    std::filesystem::path run_dir(const std::string& size, uint64_t seed) const {
        return out() / size / std::to_string(seed);
    }
    std::filesystem::path pretrained_path(const std::string& size, uint64_t seed) const {
        return run_dir(size, seed) / "pretrained.snap";
    }
    std::filesystem::path snapshot_path(const std::string& size, uint64_t seed, long step) const {
        return run_dir(size, seed) / (std::to_string(step) + ".snap");
    }
    std::filesystem::path train_log_path(const std::string& size, uint64_t seed) const {
        return run_dir(size, seed) / "train_log.csv";
    }
    std::filesystem::path eval_dir(const std::string& target, uint64_t seed) const {
        return out() / "eval" / target / ("seed_" + std::to_string(seed));
    }
    std::filesystem::path summary_dir() const { return out() / "summary"; }

    void log(const std::string& msg) const {
        if (verbose) {
            std::printf("[windsteer] %s\n", msg.c_str());
            std::fflush(stdout);
        }
    }
};

inline CommandContext make_context(RunConfig cfg, bool verbose = true) {
    cfg.validate();
    CommandContext ctx;
    ctx.layout = layout_from_config(cfg);
    ctx.hash = config_hash(cfg);
    ctx.cfg = std::move(cfg);
    ctx.verbose = verbose;
    return ctx;
}

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return nlohmann::json::parse(in);
}

// Envelope for CLI-owned JSON artifacts: {"config_hash": ..., <kind>: payload}.
inline void save_artifact(const std::filesystem::path& path, const std::string& hash,
                          const std::string& kind, nlohmann::json payload) {
    write_text_file(path, nlohmann::json{{"config_hash", hash}, {kind, std::move(payload)}}.dump());
}

inline nlohmann::json load_artifact(const std::filesystem::path& path, const std::string& hash,
                                    const std::string& kind) {
    nlohmann::json j = read_json_file(path);
    if (!j.is_object() || !j.contains("config_hash") || !j.contains(kind) || j.size() != 2)
        throw std::runtime_error(path.string() + ": not a " + kind + " artifact");
    if (j["config_hash"].get<std::string>() != hash)
        throw std::runtime_error("stale artifact " + path.string() +
                                 " (config hash mismatch; clean the output directory)");
    return std::move(j[kind]);
}

inline bool artifact_up_to_date(const std::filesystem::path& path, const std::string& hash) {
    if (!std::filesystem::exists(path)) return false;
    nlohmann::json j = read_json_file(path);
    if (!j.is_object() || !j.contains("config_hash"))
        throw std::runtime_error(path.string() + ": missing config hash");
    if (j["config_hash"].get<std::string>() != hash)
        throw std::runtime_error("stale artifact " + path.string() +
                                 " (config hash mismatch; clean the output directory)");
    return true;
}

inline nlohmann::json history_to_json(const PretrainHistory& h) {
    return {{"initial_val_loss", h.initial_val_loss},
            {"restored_val_loss", h.restored_val_loss},
            {"best_epoch", h.best_epoch},
            {"epochs_run", h.epochs_run},
            {"train_losses", h.train_losses},
            {"val_losses", h.val_losses}};
}

}  // namespace detail

// --- turbulence library -------------------------------------------------------

inline bool cmd_gen_turbulence(const CommandContext& ctx) {
    const auto& tcfg = ctx.cfg.turbulence;
    if (std::filesystem::exists(ctx.manifest_path()) &&
        detail::artifact_up_to_date(ctx.manifest_path(), ctx.hash)) {
        bool complete = true;
        for (int i = 0; i < tcfg.n_train_boxes && complete; ++i)
            complete = std::filesystem::exists(ctx.box_path("train", i));
        for (int i = 0; i < tcfg.n_eval_boxes && complete; ++i)
            complete = std::filesystem::exists(ctx.box_path("eval", i));
        if (complete) {
            ctx.log("gen-turbulence: up to date");
            return false;
        }
    }

    const InflowCondition ref{10.0, 270.0, 0.05};
    nlohmann::json entries = nlohmann::json::array();
    auto emit = [&](const std::string& role, int count, const char* tag) {
        for (int i = 0; i < count; ++i) {
            uint64_t seed = derive_seed(ctx.cfg.master_seed, tag, static_cast<size_t>(i));
            TurbulenceBox box =
                generate_turbulence_box(ref, static_cast<int>(ctx.n_turbines()),
                                        tcfg.duration_s, ctx.cfg.env.dt_sim_s, seed);
            box.config_hash = ctx.hash;
            box.save(ctx.box_path(role, i).string());
            entries.push_back({{"file", ctx.box_path(role, i).filename().string()},
                               {"seed", seed},
                               {"role", role}});
        }
    };
    std::filesystem::create_directories(ctx.boxes_dir());
    emit("train", tcfg.n_train_boxes, "box.train");
    emit("eval", tcfg.n_eval_boxes, "box.eval");
    detail::save_artifact(ctx.manifest_path(), ctx.hash, "boxes", std::move(entries));
    ctx.log("gen-turbulence: wrote " +
            std::to_string(tcfg.n_train_boxes + tcfg.n_eval_boxes) + " boxes");
    return true;
}

inline std::vector<TurbulenceBox> load_box_library(const CommandContext& ctx,
                                                   const std::string& role) {
    nlohmann::json entries = detail::load_artifact(ctx.manifest_path(), ctx.hash, "boxes");
    std::vector<TurbulenceBox> lib;
    for (const auto& e : entries) {
        if (e.at("role").get<std::string>() != role) continue;
        TurbulenceBox box =
            TurbulenceBox::load((ctx.boxes_dir() / e.at("file").get<std::string>()).string());
        if (box.config_hash != ctx.hash)
            throw std::runtime_error("stale turbulence box " + e.at("file").get<std::string>());
        if (box.seed != e.at("seed").get<uint64_t>())
            throw std::runtime_error("manifest/box seed mismatch for " +
                                     e.at("file").get<std::string>());
        lib.push_back(std::move(box));
    }
    if (lib.empty()) throw std::runtime_error("no '" + role + "' boxes in the manifest");
    return lib;
}

// --- expert datasets ----------------------------------------------------------

inline bool cmd_gen_expert(const CommandContext& ctx, const std::string& size) {
    const std::filesystem::path path = ctx.dataset_path(size);
    if (detail::artifact_up_to_date(path, ctx.hash)) {
        ctx.log("gen-expert " + size + ": up to date");
        return false;
    }
    const int n_episodes = dataset_size_from_name(size);
    std::vector<TurbulenceBox> lib;
    if (n_episodes > 0) lib = load_box_library(ctx, "train");
    ExpertDataset ds = generate_expert_dataset(
        ctx.layout, ctx.cfg.env, lib, n_episodes,
        derive_seed(ctx.cfg.master_seed, "expert." + size, 0), ctx.cfg.sampling,
        ctx.cfg.workers, ctx.cfg.refine);
    detail::save_artifact(path, ctx.hash, "dataset", ds.to_json());
    ctx.log("gen-expert " + size + ": " + std::to_string(n_episodes) + " episodes, " +
            std::to_string(ds.n_pairs()) + " pairs");
    return true;
}

inline ExpertDataset load_dataset(const CommandContext& ctx, const std::string& size) {
    ExpertDataset ds =
        ExpertDataset::from_json(detail::load_artifact(ctx.dataset_path(size), ctx.hash, "dataset"));
    const std::string expected = env_fingerprint(ctx.layout, ctx.cfg.env);
    if (!ds.trajectories.empty() && ds.env_config_hash != expected)
        throw std::runtime_error("dataset " + size + " was generated for a different environment");
    return ds;
}

// --- lookup table ---------------------------------------------------------------

inline bool cmd_build_lut(const CommandContext& ctx) {
    if (detail::artifact_up_to_date(ctx.lut_path(), ctx.hash)) {
        ctx.log("build-lut: up to date");
        return false;
    }
    YawLut lut = build_lut(ctx.layout, ctx.cfg.lut.wd_axis, ctx.cfg.lut.ws_axis, ctx.cfg.eval.ti,
                           ctx.cfg.refine, ctx.cfg.env.wake, ctx.cfg.workers);
    detail::save_artifact(ctx.lut_path(), ctx.hash, "lut", lut.to_json());
    ctx.log("build-lut: " + std::to_string(ctx.cfg.lut.wd_axis.size()) + "x" +
            std::to_string(ctx.cfg.lut.ws_axis.size()) + " nodes");
    return true;
}

inline YawLut load_lut(const CommandContext& ctx) {
    return YawLut::from_json(detail::load_artifact(ctx.lut_path(), ctx.hash, "lut"));
}

// --- pretraining ----------------------------------------------------------------

inline SacAgent make_agent(const CommandContext& ctx, uint64_t seed) {
    const int n = static_cast<int>(ctx.n_turbines());
    return SacAgent(obs_dim(ctx.n_turbines()), n, ctx.cfg.sac, seed);
}

// Pretrains a fresh agent for (size, seed) and writes pretrained.snap. The
// same per-seed initialization is shared across sizes, so size comparisons
// isolate the effect of the demonstration data.
inline bool cmd_pretrain(const CommandContext& ctx, const std::string& size, uint64_t seed) {
    const std::filesystem::path path = ctx.pretrained_path(size, seed);
    if (detail::artifact_up_to_date(path, ctx.hash)) {
        ctx.log("pretrain " + size + "/" + std::to_string(seed) + ": up to date");
        return false;
    }
    SacAgent agent = make_agent(ctx, seed);
    ExpertDataset ds = load_dataset(ctx, size);
    nlohmann::json payload{{"size", size}, {"seed", seed}, {"pretrained", ds.n_pairs() >= 2}};
    if (ds.n_pairs() >= 2) {
        PretrainReport report = pretrain_agent(agent, ds, ctx.cfg.pretrain, seed);
        payload["report"] = {{"actor", detail::history_to_json(report.actor)},
                             {"critic1", detail::history_to_json(report.critic1)},
                             {"critic2", detail::history_to_json(report.critic2)},
                             {"n_train", report.n_train},
                             {"n_val", report.n_val}};
    }
    payload["agent"] = agent.to_json();
    detail::save_artifact(path, ctx.hash, "pretrain", std::move(payload));
    ctx.log("pretrain " + size + "/" + std::to_string(seed) + ": done");
    return true;
}

// --- training -------------------------------------------------------------------

inline bool cmd_train(const CommandContext& ctx, const std::string& size, uint64_t seed) {
    const std::vector<long> steps =
        snapshot_steps(ctx.cfg.train.total_steps, ctx.cfg.train.snapshot_every);
    bool complete = std::filesystem::exists(ctx.train_log_path(size, seed));
    for (long s : steps)
        complete = complete && std::filesystem::exists(ctx.snapshot_path(size, seed, s));
    if (complete) {
        // the cheap staleness probe: any snapshot carries the hash
        detail::artifact_up_to_date(ctx.snapshot_path(size, seed, steps.front()), ctx.hash);
        ctx.log("train " + size + "/" + std::to_string(seed) + ": up to date");
        return false;
    }

    cmd_pretrain(ctx, size, seed);
    SacAgent agent = make_agent(ctx, seed);
    agent.load_parameters(
        detail::load_artifact(ctx.pretrained_path(size, seed), ctx.hash, "pretrain")["agent"]);

    std::vector<TurbulenceBox> lib = load_box_library(ctx, "train");
    WindFarmEnv env(ctx.layout, ctx.cfg.env, &lib);
    TrainResult result =
        train_online(env, agent, seed, ctx.cfg.sampling, ctx.cfg.train.total_steps,
                     ctx.cfg.train.snapshot_every, ctx.cfg.train.log_every);

    for (const AgentSnapshot& snap : result.snapshots)
        detail::save_artifact(ctx.snapshot_path(size, seed, snap.step), ctx.hash, "snapshot",
                              {{"size", size}, {"seed", seed}, {"step", snap.step},
                               {"agent", snap.state}});
    detail::write_text_file(ctx.train_log_path(size, seed),
                            "# config_hash=" + ctx.hash + "\n" + train_log_csv(result.log));
    ctx.log("train " + size + "/" + std::to_string(seed) + ": " +
            std::to_string(ctx.cfg.train.total_steps) + " steps, " +
            std::to_string(result.episodes_completed) + " episodes");
    return true;
}

// --- evaluation -----------------------------------------------------------------

namespace detail {

inline MlpParams load_snapshot_actor(const CommandContext& ctx, const std::string& size,
                                     uint64_t seed, long step) {
    nlohmann::json snap =
        load_artifact(ctx.snapshot_path(size, seed, step), ctx.hash, "snapshot");
    return MlpParams::from_json(snap.at("agent").at("actor"));
}

inline bool run_eval_unit(const CommandContext& ctx, const std::string& target, size_t seed_index,
                          const std::function<EvalUnit(const std::vector<EvalCase>&)>& evaluate) {
    const uint64_t seed = ctx.cfg.train.seeds[seed_index];
    const std::filesystem::path dir = ctx.eval_dir(target, seed);
    if (artifact_up_to_date(dir / "aggregate.json", ctx.hash)) {
        ctx.log("evaluate " + target + "/" + std::to_string(seed) + ": up to date");
        return false;
    }
    EvalReport report;
    report.units.push_back(evaluate(eval_cases_for_seed(ctx.cfg, seed_index)));
    emit_report(report, dir.string(), ctx.hash);
    ctx.log("evaluate " + target + "/" + std::to_string(seed) + ": " +
            std::to_string(report.units.front().grid.cases.size()) + " cases");
    return true;
}

}  // namespace detail

// Evaluates every snapshot of one pretrain size, one report per seed with one
// unit per snapshot step. The policy runs in its stochastic training-time
// form; per-case controller seeds derive from the case seeds.
inline bool cmd_evaluate_size(const CommandContext& ctx, const std::string& size) {
    const std::vector<long> steps =
        snapshot_steps(ctx.cfg.train.total_steps, ctx.cfg.train.snapshot_every);
    std::vector<TurbulenceBox> lib = load_box_library(ctx, "eval");
    RunCaseOptions opt;
    opt.t_eval_s = ctx.cfg.eval.duration_s;
    const SquashConfig squash = SquashConfig::unit(static_cast<int>(ctx.n_turbines()));

    bool ran = false;
    for (size_t k = 0; k < ctx.cfg.train.seeds.size(); ++k) {
        const uint64_t seed = ctx.cfg.train.seeds[k];
        const std::filesystem::path dir = ctx.eval_dir(size, seed);
        if (detail::artifact_up_to_date(dir / "aggregate.json", ctx.hash)) {
            ctx.log("evaluate " + size + "/" + std::to_string(seed) + ": up to date");
            continue;
        }
        EvalReport report;
        for (long step : steps) {
            MlpParams actor = detail::load_snapshot_actor(ctx, size, seed, step);
            ControllerFactory factory = [&actor, &squash](const EvalCase& c) {
                return std::make_unique<SacPolicyController>(
                    actor, squash, /*deterministic=*/false, derive_seed(c.seed, "eval.policy", 0));
            };
            report.units.push_back({size, step,
                                    run_grid(ctx.layout, ctx.cfg.env, lib, factory,
                                             eval_cases_for_seed(ctx.cfg, k), ctx.cfg.workers,
                                             opt)});
        }
        emit_report(report, dir.string(), ctx.hash);
        ctx.log("evaluate " + size + "/" + std::to_string(seed) + ": " +
                std::to_string(steps.size()) + " snapshots");
        ran = true;
    }
    return ran;
}

inline bool cmd_evaluate_baseline(const CommandContext& ctx, const std::string& name) {
    std::vector<TurbulenceBox> lib = load_box_library(ctx, "eval");
    RunCaseOptions opt;
    opt.t_eval_s = ctx.cfg.eval.duration_s;

    std::optional<YawLut> lut;
    if (name == "lut") {
        cmd_build_lut(ctx);  // no-op when the table is already on disk
        lut = load_lut(ctx);
    } else if (name != "greedy") {
        throw std::invalid_argument("unknown baseline '" + name + "'");
    }

    ControllerFactory factory = [&](const EvalCase&) -> std::unique_ptr<Controller> {
        if (lut) return std::make_unique<LutController>(ctx.layout, *lut, ctx.cfg.env);
        return std::make_unique<GreedyController>(ctx.n_turbines(), ctx.cfg.env);
    };

    bool ran = false;
    for (size_t k = 0; k < ctx.cfg.train.seeds.size(); ++k)
        ran = detail::run_eval_unit(ctx, name, k, [&](const std::vector<EvalCase>& cases) {
                  return EvalUnit{name, -1,
                                  run_grid(ctx.layout, ctx.cfg.env, lib, factory, cases,
                                           ctx.cfg.workers, opt)};
              }) ||
              ran;
    return ran;
}

// target: a size name, "greedy", "lut", or "all".
inline bool cmd_evaluate(const CommandContext& ctx, const std::string& target) {
    if (target == "greedy" || target == "lut") return cmd_evaluate_baseline(ctx, target);
    if (target != "all") {
        dataset_size_from_name(target);  // validates the name
        return cmd_evaluate_size(ctx, target);
    }
    bool ran = false;
    for (const std::string& size : all_dataset_sizes()) ran = cmd_evaluate_size(ctx, size) || ran;
    ran = cmd_evaluate_baseline(ctx, "greedy") || ran;
    ran = cmd_evaluate_baseline(ctx, "lut") || ran;
    return ran;
}

// --- summary --------------------------------------------------------------------

// Rebuilds the sweep summary from the per-seed evaluation reports: a heatmap
// of mean gain (pretrain sizes x snapshot steps, averaged over seeds) plus the
// baseline scalars.
inline bool cmd_report(const CommandContext& ctx) {
    const std::vector<long> steps =
        snapshot_steps(ctx.cfg.train.total_steps, ctx.cfg.train.snapshot_every);

    auto unit_gains = [&](const std::string& target) {
        // target -> per-unit mean over seeds, keyed by snapshot step
        std::map<long, std::pair<double, int>> acc;
        for (uint64_t seed : ctx.cfg.train.seeds) {
            const std::filesystem::path path = ctx.eval_dir(target, seed) / "aggregate.json";
            if (!std::filesystem::exists(path))
                throw std::runtime_error("missing evaluation report " + path.string() +
                                         " (run evaluate first)");
            nlohmann::json agg = detail::read_json_file(path);
            if (agg.at("config_hash").get<std::string>() != ctx.hash)
                throw std::runtime_error("stale evaluation report " + path.string());
            for (const auto& unit : agg.at("units")) {
                auto& slot = acc[unit.at("step").get<long>()];
                slot.first += unit.at("aggregate").at("overall_gain_pct").get<double>();
                slot.second++;
            }
        }
        std::map<long, double> out;
        for (const auto& [step, s] : acc) out[step] = s.first / s.second;
        return out;
    };

    char buf[64];
    auto full = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };

    std::string heatmap = "# config_hash=" + ctx.hash + "\nsize";
    for (long s : steps) heatmap += ",step_" + std::to_string(s);
    heatmap += "\n";
    nlohmann::json summary{{"config_hash", ctx.hash},
                           {"n_seeds", ctx.cfg.train.seeds.size()},
                           {"heatmap", nlohmann::json::object()},
                           {"baselines", nlohmann::json::object()}};
    for (const std::string& size : all_dataset_sizes()) {
        std::map<long, double> gains = unit_gains(size);
        heatmap += size;
        for (long s : steps) {
            heatmap += ",";
            if (gains.count(s)) heatmap += full(gains.at(s));
        }
        heatmap += "\n";
        for (const auto& [step, g] : gains)
            summary["heatmap"][size][std::to_string(step)] = g;
    }
    for (const std::string& name : {"greedy", "lut"}) {
        std::map<long, double> gains = unit_gains(name);
        summary["baselines"][name] = gains.at(-1);
    }

    detail::write_text_file(ctx.summary_dir() / "heatmap.csv", heatmap);
    detail::write_text_file(ctx.summary_dir() / "summary.json", summary.dump(2) + "\n");
    ctx.log("report: wrote summary for " + std::to_string(all_dataset_sizes().size()) +
            " sizes x " + std::to_string(steps.size()) + " snapshots");
    return true;
}

// --- sweep ----------------------------------------------------------------------

struct SweepStats {
    int executed = 0;
    int skipped = 0;

    void count(bool ran) { (ran ? executed : skipped)++; }
};

// The full experiment: turbulence library, expert datasets, LUT, training for
// every size x seed, evaluation of every snapshot and baseline, and the
// summary. Idempotent: stages with up-to-date outputs are skipped.
inline SweepStats cmd_sweep(const CommandContext& ctx) {
    SweepStats stats;
    stats.count(cmd_gen_turbulence(ctx));
    for (const std::string& size : all_dataset_sizes()) stats.count(cmd_gen_expert(ctx, size));
    stats.count(cmd_build_lut(ctx));
    for (const std::string& size : all_dataset_sizes())
        for (uint64_t seed : ctx.cfg.train.seeds) stats.count(cmd_train(ctx, size, seed));
    for (const std::string& size : all_dataset_sizes()) stats.count(cmd_evaluate_size(ctx, size));
    stats.count(cmd_evaluate_baseline(ctx, "greedy"));
    stats.count(cmd_evaluate_baseline(ctx, "lut"));
    cmd_report(ctx);
    ctx.log("sweep: " + std::to_string(stats.executed) + " stages executed, " +
            std::to_string(stats.skipped) + " up to date");
    return stats;
}

}  // namespace windsteer
