#pragma once

// Run configuration: one JSON document with a section per module, two
// built-in profiles (desk-scale defaults and full paper-scale numbers), and a
// content hash embedded in every artifact the commands write.

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "windsteer/common.hpp"
#include "windsteer/env.hpp"
#include "windsteer/eval.hpp"
#include "windsteer/pretrain.hpp"
#include "windsteer/sac.hpp"
#include "windsteer/yaw_optimizer.hpp"

namespace windsteer {

struct TurbulenceSection {
    int n_train_boxes = 10;
    int n_eval_boxes = 6;
    double duration_s = 4500.0;

    void validate() const {
        if (n_train_boxes < 1 || n_eval_boxes < 1)
            throw std::invalid_argument("turbulence: box counts must be >= 1");
        if (!(duration_s > 0.0)) throw std::invalid_argument("turbulence: duration_s must be > 0");
    }

    nlohmann::json to_json() const {
        return {{"n_train_boxes", n_train_boxes},
                {"n_eval_boxes", n_eval_boxes},
                {"duration_s", duration_s}};
    }

    static TurbulenceSection from_json(const nlohmann::json& j) {
        return from_json(j, TurbulenceSection{});
    }

    static TurbulenceSection from_json(const nlohmann::json& j, TurbulenceSection base) {
        for (const auto& [key, val] : j.items()) {
            if (key == "n_train_boxes") base.n_train_boxes = val.get<int>();
            else if (key == "n_eval_boxes") base.n_eval_boxes = val.get<int>();
            else if (key == "duration_s") base.duration_s = val.get<double>();
            else throw std::invalid_argument("turbulence: unknown key '" + key + "'");
        }
        return base;
    }
};

struct TrainSection {
    long total_steps = 50000;
    long snapshot_every = 12500;
    long log_every = 500;
    std::vector<uint64_t> seeds = {1, 2, 3};

    void validate() const {
        if (total_steps < 0) throw std::invalid_argument("train: total_steps must be >= 0");
        if (snapshot_every < 0) throw std::invalid_argument("train: snapshot_every must be >= 0");
        if (log_every < 1) throw std::invalid_argument("train: log_every must be >= 1");
        if (seeds.empty()) throw std::invalid_argument("train: seeds must be non-empty");
    }

    nlohmann::json to_json() const {
        return {{"total_steps", total_steps},
                {"snapshot_every", snapshot_every},
                {"log_every", log_every},
                {"seeds", seeds}};
    }

    static TrainSection from_json(const nlohmann::json& j) { return from_json(j, TrainSection{}); }

    static TrainSection from_json(const nlohmann::json& j, TrainSection base) {
        for (const auto& [key, val] : j.items()) {
            if (key == "total_steps") base.total_steps = val.get<long>();
            else if (key == "snapshot_every") base.snapshot_every = val.get<long>();
            else if (key == "log_every") base.log_every = val.get<long>();
            else if (key == "seeds") base.seeds = val.get<std::vector<uint64_t>>();
            else throw std::invalid_argument("train: unknown key '" + key + "'");
        }
        return base;
    }
};

struct EvalSection {
    std::vector<double> directions = {265, 270, 275};
    std::vector<double> speeds = {8, 10};
    int n_boxes = 2;  // held-out boxes used per replicate, ids 0..n_boxes-1
    double ti = 0.05;
    double duration_s = 3600.0;

    void validate() const {
        if (directions.empty() || speeds.empty())
            throw std::invalid_argument("eval: directions and speeds must be non-empty");
        if (n_boxes < 1) throw std::invalid_argument("eval: n_boxes must be >= 1");
        if (ti < 0.0) throw std::invalid_argument("eval: ti must be >= 0");
        if (!(duration_s > 0.0)) throw std::invalid_argument("eval: duration_s must be > 0");
    }

    nlohmann::json to_json() const {
        return {{"directions", directions},
                {"speeds", speeds},
                {"n_boxes", n_boxes},
                {"ti", ti},
                {"duration_s", duration_s}};
    }

    static EvalSection from_json(const nlohmann::json& j) { return from_json(j, EvalSection{}); }

    static EvalSection from_json(const nlohmann::json& j, EvalSection base) {
        for (const auto& [key, val] : j.items()) {
            if (key == "directions") base.directions = val.get<std::vector<double>>();
            else if (key == "speeds") base.speeds = val.get<std::vector<double>>();
            else if (key == "n_boxes") base.n_boxes = val.get<int>();
            else if (key == "ti") base.ti = val.get<double>();
            else if (key == "duration_s") base.duration_s = val.get<double>();
            else throw std::invalid_argument("eval: unknown key '" + key + "'");
        }
        return base;
    }
};

struct LutSection {
    std::vector<double> wd_axis = {255, 260, 265, 270, 275, 280, 285};
    std::vector<double> ws_axis = {8, 10, 12, 13};

    void validate() const {
        if (wd_axis.empty() || ws_axis.empty())
            throw std::invalid_argument("lut: axes must be non-empty");
    }

    nlohmann::json to_json() const { return {{"wd_axis", wd_axis}, {"ws_axis", ws_axis}}; }

    static LutSection from_json(const nlohmann::json& j) { return from_json(j, LutSection{}); }

    static LutSection from_json(const nlohmann::json& j, LutSection base) {
        for (const auto& [key, val] : j.items()) {
            if (key == "wd_axis") base.wd_axis = val.get<std::vector<double>>();
            else if (key == "ws_axis") base.ws_axis = val.get<std::vector<double>>();
            else throw std::invalid_argument("lut: unknown key '" + key + "'");
        }
        return base;
    }
};

struct RunConfig {
    std::string profile = "desk";
    std::string layout_path;  // empty: default 2x2 grid at 5D spacing
    std::string size = "medium";
    std::string out_dir = "out";
    uint64_t master_seed = 0;
    int workers = 1;

    EnvConfig env;
    SacConfig sac;
    PretrainConfig pretrain;
    EpisodeSampling sampling;
    SerialRefineConfig refine;
    TurbulenceSection turbulence;
    TrainSection train;
    EvalSection eval;
    LutSection lut;

    void validate() const {
        dataset_size_from_name(size);  // throws on unknown name
        if (out_dir.empty()) throw std::invalid_argument("RunConfig: out_dir must be non-empty");
        if (workers < 1) throw std::invalid_argument("RunConfig: workers must be >= 1");
        env.validate();
        sac.validate();
        pretrain.validate();
        turbulence.validate();
        train.validate();
        eval.validate();
        lut.validate();
        if (eval.n_boxes > turbulence.n_eval_boxes)
            throw std::invalid_argument("RunConfig: eval.n_boxes exceeds held-out box count");
    }

    nlohmann::json to_json() const {
        return {{"profile", profile},
                {"layout_path", layout_path},
                {"size", size},
                {"out_dir", out_dir},
                {"master_seed", master_seed},
                {"workers", workers},
                {"env", env.to_json()},
                {"sac", sac.to_json()},
                {"pretrain", pretrain.to_json()},
                {"sampling", sampling.to_json()},
                {"refine", refine.to_json()},
                {"turbulence", turbulence.to_json()},
                {"train", train.to_json()},
                {"eval", eval.to_json()},
                {"lut", lut.to_json()}};
    }

    // Applies a JSON document on top of this config. Section objects update
    // field-by-field where the section supports it; module configs are
    // replaced wholesale (module defaults + the provided keys).
    void apply_json(const nlohmann::json& j) {
        for (const auto& [key, val] : j.items()) {
            if (key == "profile")
                throw std::invalid_argument("RunConfig: profile is a command-line flag, not a config key");
            else if (key == "layout_path") layout_path = val.get<std::string>();
            else if (key == "size") size = val.get<std::string>();
            else if (key == "out_dir") out_dir = val.get<std::string>();
            else if (key == "master_seed") master_seed = val.get<uint64_t>();
            else if (key == "workers") workers = val.get<int>();
            else if (key == "env") env = EnvConfig::from_json(val);
            else if (key == "sac") sac = SacConfig::from_json(val);
            else if (key == "pretrain") pretrain = PretrainConfig::from_json(val);
            else if (key == "sampling") sampling = EpisodeSampling::from_json(val);
            else if (key == "refine") refine = SerialRefineConfig::from_json(val);
            else if (key == "turbulence") turbulence = TurbulenceSection::from_json(val, turbulence);
            else if (key == "train") train = TrainSection::from_json(val, train);
            else if (key == "eval") eval = EvalSection::from_json(val, eval);
            else if (key == "lut") lut = LutSection::from_json(val, lut);
            else throw std::invalid_argument("RunConfig: unknown key '" + key + "'");
        }
        validate();
    }
};

// Built-in profiles. Desk scale keeps the pipeline minutes-to-hours on one
// core; paper scale restores the full experiment sizes.
inline RunConfig default_config(const std::string& profile) {
    RunConfig cfg;
    cfg.profile = profile;
    if (profile == "desk") {
        cfg.train.total_steps = 50000;
        cfg.train.snapshot_every = 12500;
        cfg.train.seeds = {1, 2, 3};
        cfg.eval.directions = {265, 270, 275};
        cfg.eval.speeds = {8, 10};
        cfg.eval.n_boxes = 2;
    } else if (profile == "paper") {
        cfg.train.total_steps = 1000000;
        cfg.train.snapshot_every = 250000;
        cfg.train.seeds = {1, 2, 3, 4, 5};
        cfg.eval.directions = {255, 260, 265, 270, 275, 280, 285};
        cfg.eval.speeds = {8, 10, 12, 13};
        cfg.eval.n_boxes = 6;
    } else {
        throw std::invalid_argument("unknown profile '" + profile + "' (expected desk or paper)");
    }
    cfg.validate();
    return cfg;
}

inline std::string config_hash(const RunConfig& cfg) {
    return hash_hex(fnv1a64(cfg.to_json().dump()));
}

inline FarmLayout layout_from_config(const RunConfig& cfg) {
    if (cfg.layout_path.empty()) return FarmLayout::grid(2, 2, 5.0);
    std::ifstream in(cfg.layout_path);
    if (!in) throw std::runtime_error("cannot open layout file " + cfg.layout_path);
    nlohmann::json j;
    in >> j;
    return FarmLayout::from_json(j);
}

// Snapshot step schedule; mirrors the cadence train_online uses.
inline std::vector<long> snapshot_steps(long total_steps, long snapshot_every) {
    std::vector<long> steps = {0};
    if (snapshot_every > 0)
        for (long s = snapshot_every; s <= total_steps; s += snapshot_every) steps.push_back(s);
    if (total_steps > 0 && steps.back() != total_steps) steps.push_back(total_steps);
    return steps;
}

// The evaluation grid for the k-th seed in the seeds list: same conditions for
// every controller (paired comparisons), fresh stochastic replicate per seed.
inline std::vector<EvalCase> eval_cases_for_seed(const RunConfig& cfg, size_t seed_index) {
    return make_eval_cases(cfg.eval.directions, cfg.eval.speeds, cfg.eval.n_boxes, cfg.eval.ti,
                           derive_seed(cfg.master_seed, "eval.replicate", seed_index));
}

}  // namespace windsteer
