#pragma once

// Evaluation harness: baseline controllers (greedy, Polyak-filtered LUT),
// policy-snapshot controllers, the wind-condition grid, aggregate gain
// metrics, and report emission.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "windsteer/common.hpp"
#include "windsteer/env.hpp"
#include "windsteer/policy.hpp"
#include "windsteer/sac.hpp"
#include "windsteer/yaw_optimizer.hpp"

namespace windsteer {

// Exponential moving average x' = (1-rho)x + rho*measurement.
inline double polyak_filter(double prev, double measurement, double rho) {
    if (!(rho > 0.0 && rho <= 1.0))
        throw std::invalid_argument("polyak_filter: rho must be in (0,1]");
    return (1.0 - rho) * prev + rho * measurement;
}

// Circular (unit-vector) variant for direction channels, degrees in [0,360).
inline double polyak_filter_deg(double prev_deg, double measurement_deg, double rho) {
    if (!(rho > 0.0 && rho <= 1.0))
        throw std::invalid_argument("polyak_filter_deg: rho must be in (0,1]");
    const double p = deg2rad(prev_deg), m = deg2rad(measurement_deg);
    const double c = (1.0 - rho) * std::cos(p) + rho * std::cos(m);
    const double s = (1.0 - rho) * std::sin(p) + rho * std::sin(m);
    return wrap_deg(rad2deg(std::atan2(s, c)));
}

// A controller maps the environment observation to an action; it may carry
// state across steps (filters, rng) which reset() clears between episodes.
class Controller {
  public:
    virtual ~Controller() = default;
    virtual void reset() {}
    virtual Eigen::VectorXd act(const Eigen::VectorXd& obs) = 0;
};

// Rate-limited steering toward zero misalignment: a_i = clamp(-yaw_i/step, ±1).
class GreedyController : public Controller {
  public:
    GreedyController(size_t n_turbines, const EnvConfig& cfg)
        : n_(n_turbines), bounds_(cfg.obs), step_deg_(cfg.yaw_step_deg()) {}

    Eigen::VectorXd act(const Eigen::VectorXd& obs) override {
        const std::vector<double> raw = denormalize_obs(obs, bounds_);
        Eigen::VectorXd a(static_cast<Eigen::Index>(n_));
        for (size_t i = 0; i < n_; ++i)
            a(static_cast<Eigen::Index>(i)) = std::clamp(-raw[6 * i + 2] / step_deg_, -1.0, 1.0);
        return a;
    }

  private:
    size_t n_;
    ObsBounds bounds_;
    double step_deg_;
};

// LUT controller: Polyak-filters the inflow estimate measured at the most
// upstream turbine (re-resolved from the filtered direction each step, since
// upstreamness changes over the direction range), looks up target yaws, and
// tracks them at the yaw-rate limit.
class LutController : public Controller {
  public:
    LutController(FarmLayout layout, YawLut lut, const EnvConfig& cfg, double rho = 0.05)
        : layout_(std::move(layout)),
          lut_(std::move(lut)),
          bounds_(cfg.obs),
          step_deg_(cfg.yaw_step_deg()),
          rho_(rho) {
        lut_.validate();
        if (!(rho > 0.0 && rho <= 1.0))
            throw std::invalid_argument("LutController: rho must be in (0,1]");
    }

    void reset() override { initialized_ = false; }

    double filtered_ws() const { return ws_hat_; }
    double filtered_wd() const { return wd_hat_; }

    Eigen::VectorXd act(const Eigen::VectorXd& obs) override {
        const size_t n = layout_.size();
        const std::vector<double> raw = denormalize_obs(obs, bounds_);
        if (!initialized_) {
            // No direction estimate yet: locate the upstream turbine from the
            // farm-wide circular-mean direction, then seed the filter with its
            // local measurement.
            std::vector<double> wds(n);
            for (size_t i = 0; i < n; ++i) wds[i] = raw[6 * i + 1];
            const size_t up = upstream_turbine(circular_mean_deg(wds));
            ws_hat_ = raw[6 * up + 0];
            wd_hat_ = raw[6 * up + 1];
            initialized_ = true;
        } else {
            const size_t up = upstream_turbine(wd_hat_);
            ws_hat_ = polyak_filter(ws_hat_, raw[6 * up + 0], rho_);
            wd_hat_ = polyak_filter_deg(wd_hat_, raw[6 * up + 1], rho_);
        }

        const std::vector<double> targets = lut_lookup(lut_, wd_hat_, ws_hat_);
        Eigen::VectorXd a(static_cast<Eigen::Index>(n));
        for (size_t i = 0; i < n; ++i)
            a(static_cast<Eigen::Index>(i)) =
                std::clamp((targets[i] - raw[6 * i + 2]) / step_deg_, -1.0, 1.0);
        return a;
    }

  private:
    size_t upstream_turbine(double wd_deg) const {
        return downstream_order(rotate_to_wind_frame(layout_.positions, wd_deg)).front();
    }

    FarmLayout layout_;
    YawLut lut_;
    ObsBounds bounds_;
    double step_deg_;
    double rho_;
    bool initialized_ = false;
    double ws_hat_ = 0.0;
    double wd_hat_ = 0.0;
};

// Runs a saved policy head; stochastic by default (the training-time policy),
// deterministic uses the squashed mean.
class SacPolicyController : public Controller {
  public:
    SacPolicyController(MlpParams actor, SquashConfig squash, bool deterministic, uint64_t seed)
        : actor_(std::move(actor)),
          squash_(std::move(squash)),
          deterministic_(deterministic),
          seed_(seed),
          rng_(seed) {}

    void reset() override { rng_ = Rng(seed_); }

    Eigen::VectorXd act(const Eigen::VectorXd& obs) override {
        const GaussianPolicyOutput out = split_policy_output(mlp_forward(actor_, obs));
        if (deterministic_) return deterministic_action(out.mu.col(0), squash_);
        return sample_squashed(out, squash_, rng_).actions.col(0);
    }

  private:
    MlpParams actor_;
    SquashConfig squash_;
    bool deterministic_;
    uint64_t seed_;
    Rng rng_;
};

struct EvalCase {
    double wind_direction_deg = 270.0;
    double wind_speed = 10.0;
    double ti = 0.05;
    int box_id = 0;
    uint64_t seed = 0;

    std::string id() const {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "wd%g_ws%g_box%d_seed%llu", wind_direction_deg,
                      wind_speed, box_id, static_cast<unsigned long long>(seed));
        return buf;
    }
};

// Paper-profile evaluation grid: 7 directions x 4 speeds x 6 boxes = 168.
inline std::vector<EvalCase> make_eval_cases(const std::vector<double>& directions,
                                             const std::vector<double>& speeds, int n_boxes,
                                             double ti, uint64_t seed) {
    std::vector<EvalCase> cases;
    for (double wd : directions)
        for (double ws : speeds)
            for (int b = 0; b < n_boxes; ++b) {
                EvalCase c;
                c.wind_direction_deg = wd;
                c.wind_speed = ws;
                c.ti = ti;
                c.box_id = b;
                c.seed = derive_seed(seed, "eval.case", cases.size());
                cases.push_back(c);
            }
    return cases;
}

inline std::vector<EvalCase> make_eval_cases(uint64_t seed = 0) {
    return make_eval_cases({255, 260, 265, 270, 275, 280, 285}, {8, 10, 12, 13}, 6, 0.05, seed);
}

struct CaseResult {
    EvalCase c;
    double gain_pct = 0.0;
    double mean_agent_power = 0.0;     // W
    double mean_baseline_power = 0.0;  // W
    std::vector<double> agent_power_series;     // optional, W per agent step
    std::vector<double> baseline_power_series;  // optional
};

struct RunCaseOptions {
    double t_eval_s = 3600.0;  // 360 agent steps at dt_agent = 10 s
    bool record_series = false;
};

// One evaluation episode: fixed inflow, zero initial yaws, controller vs the
// environment's lock-step greedy reference.
inline CaseResult run_case(const FarmLayout& layout, EnvConfig cfg,
                           const std::vector<TurbulenceBox>& library, Controller& controller,
                           const EvalCase& c, const RunCaseOptions& opt = {}) {
    cfg.episode_duration_s = opt.t_eval_s;
    WindFarmEnv env(layout, cfg, &library);

    EpisodeSpec spec;
    spec.inflow = InflowCondition{c.wind_speed, c.wind_direction_deg, c.ti};
    spec.initial_yaws.assign(layout.size(), 0.0);
    spec.turbulence_box_id = c.box_id;
    spec.rng_seed = derive_seed(c.seed, "eval.episode", 0);

    controller.reset();
    Eigen::VectorXd obs = env.reset(spec);
    double sum_agent = 0.0, sum_base = 0.0;
    CaseResult res;
    res.c = c;
    while (!env.done()) {
        const StepResult r = env.step(controller.act(obs));
        sum_agent += r.info.mean_power_agent;
        sum_base += r.info.mean_power_baseline;
        if (opt.record_series) {
            res.agent_power_series.push_back(r.info.mean_power_agent);
            res.baseline_power_series.push_back(r.info.mean_power_baseline);
        }
        obs = r.obs;
    }
    const double steps = static_cast<double>(env.episode_steps());
    res.mean_agent_power = sum_agent / steps;
    res.mean_baseline_power = sum_base / steps;
    res.gain_pct = (sum_agent / sum_base - 1.0) * 100.0;
    return res;
}

using ControllerFactory = std::function<std::unique_ptr<Controller>(const EvalCase&)>;

struct GridResult {
    std::vector<CaseResult> cases;       // successful cases, input order preserved
    std::vector<std::string> failures;   // "case_id: error"
};

// Embarrassingly parallel over cases; every case owns its env and controller,
// so results are independent of execution order and worker count.
inline GridResult run_grid(const FarmLayout& layout, const EnvConfig& cfg,
                           const std::vector<TurbulenceBox>& library,
                           const ControllerFactory& make_controller,
                           const std::vector<EvalCase>& cases, int workers = 1,
                           const RunCaseOptions& opt = {}) {
    std::vector<CaseResult> slots(cases.size());
    std::vector<std::string> errors(cases.size());
    parallel_for(cases.size(), std::max(1, workers), [&](size_t i) {
        try {
            auto controller = make_controller(cases[i]);
            slots[i] = run_case(layout, cfg, library, *controller, cases[i], opt);
        } catch (const std::exception& e) {
            errors[i] = cases[i].id() + ": " + e.what();
        }
    });
    GridResult out;
    for (size_t i = 0; i < cases.size(); ++i) {
        if (errors[i].empty()) out.cases.push_back(std::move(slots[i]));
        else out.failures.push_back(std::move(errors[i]));
    }
    return out;
}

struct Aggregate {
    double overall_gain_pct = 0.0;        // primary: unweighted mean of per-case gains
    double ratio_of_means_gain_pct = 0.0; // secondary: mean-power ratio across cases
    std::map<double, double> by_speed;     // ws -> mean gain
    std::map<double, double> by_direction; // wd -> mean gain
    int n_cases = 0;
};

inline Aggregate aggregate_mean_gain(const std::vector<CaseResult>& cases) {
    if (cases.empty()) throw std::invalid_argument("aggregate_mean_gain: no cases");
    Aggregate agg;
    agg.n_cases = static_cast<int>(cases.size());
    std::map<double, std::pair<double, int>> speed, dir;
    double sum_gain = 0.0, sum_agent = 0.0, sum_base = 0.0;
    for (const CaseResult& r : cases) {
        sum_gain += r.gain_pct;
        sum_agent += r.mean_agent_power;
        sum_base += r.mean_baseline_power;
        auto& s = speed[r.c.wind_speed];
        s.first += r.gain_pct;
        s.second++;
        auto& d = dir[r.c.wind_direction_deg];
        d.first += r.gain_pct;
        d.second++;
    }
    agg.overall_gain_pct = sum_gain / agg.n_cases;
    agg.ratio_of_means_gain_pct = (sum_agent / sum_base - 1.0) * 100.0;
    for (const auto& [k, v] : speed) agg.by_speed[k] = v.first / v.second;
    for (const auto& [k, v] : dir) agg.by_direction[k] = v.first / v.second;
    return agg;
}

// One evaluated unit: a controller identity (pretrain size name or baseline
// name, plus snapshot step for policies) and its grid results.
struct EvalUnit {
    std::string size_label;  // "none"|"small"|"medium"|"large"|"greedy"|"lut"
    long snapshot_step = -1; // -1 for baselines
    GridResult grid;
};

struct EvalReport {
    std::vector<EvalUnit> units;
};

namespace detail {

inline std::string fmt_full(double v) {
    char b[64];
    std::snprintf(b, sizeof(b), "%.17g", v);
    return b;
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("emit_report: cannot write " + path);
    out << content;
}

}  // namespace detail

inline nlohmann::json aggregate_to_json(const Aggregate& a) {
    nlohmann::json js{{"overall_gain_pct", a.overall_gain_pct},
                      {"ratio_of_means_gain_pct", a.ratio_of_means_gain_pct},
                      {"n_cases", a.n_cases},
                      {"by_speed", nlohmann::json::object()},
                      {"by_direction", nlohmann::json::object()}};
    for (const auto& [k, v] : a.by_speed) js["by_speed"][detail::fmt_full(k)] = v;
    for (const auto& [k, v] : a.by_direction) js["by_direction"][detail::fmt_full(k)] = v;
    return js;
}

// Emits: cases.csv (one row per case), aggregate.json (per-unit and
// by-snapshot aggregates), heatmap.csv (rows = pretrain size, cols = snapshot
// step), by_speed.csv / by_direction.csv distributions. All floats full
// precision. A non-empty config_hash is embedded in every artifact.
inline void emit_report(const EvalReport& report, const std::string& out_dir,
                        const std::string& config_hash = "") {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const std::string d = out_dir + "/";
    const std::string tag = config_hash.empty() ? "" : "# config_hash=" + config_hash + "\n";

    std::string cases = tag + "size,step,case_id,wd_deg,ws_ms,box,seed,gain_pct,"
                        "mean_agent_power_w,mean_baseline_power_w\n";
    std::string by_speed = tag + "size,step,ws_ms,gain_pct\n";
    std::string by_dir = tag + "size,step,wd_deg,gain_pct\n";
    nlohmann::json agg_json;
    if (!config_hash.empty()) agg_json["config_hash"] = config_hash;
    agg_json["units"] = nlohmann::json::array();
    std::map<long, std::pair<double, int>> by_snapshot;

    std::vector<std::string> sizes;                      // row order of first appearance
    std::map<std::string, std::map<long, double>> heat;  // size -> step -> gain
    std::vector<long> steps;

    for (const EvalUnit& u : report.units) {
        for (const CaseResult& r : u.grid.cases) {
            cases += u.size_label + "," + std::to_string(u.snapshot_step) + "," + r.c.id() + "," +
                     detail::fmt_full(r.c.wind_direction_deg) + "," +
                     detail::fmt_full(r.c.wind_speed) + "," + std::to_string(r.c.box_id) + "," +
                     std::to_string(r.c.seed) + "," + detail::fmt_full(r.gain_pct) + "," +
                     detail::fmt_full(r.mean_agent_power) + "," +
                     detail::fmt_full(r.mean_baseline_power) + "\n";
            by_speed += u.size_label + "," + std::to_string(u.snapshot_step) + "," +
                        detail::fmt_full(r.c.wind_speed) + "," + detail::fmt_full(r.gain_pct) + "\n";
            by_dir += u.size_label + "," + std::to_string(u.snapshot_step) + "," +
                      detail::fmt_full(r.c.wind_direction_deg) + "," +
                      detail::fmt_full(r.gain_pct) + "\n";
        }
        nlohmann::json uj{{"size", u.size_label},
                          {"step", u.snapshot_step},
                          {"failures", u.grid.failures}};
        if (!u.grid.cases.empty()) {
            const Aggregate a = aggregate_mean_gain(u.grid.cases);
            uj["aggregate"] = aggregate_to_json(a);
            if (u.snapshot_step >= 0) {
                if (heat.find(u.size_label) == heat.end()) sizes.push_back(u.size_label);
                heat[u.size_label][u.snapshot_step] = a.overall_gain_pct;
                if (std::find(steps.begin(), steps.end(), u.snapshot_step) == steps.end())
                    steps.push_back(u.snapshot_step);
                auto& s = by_snapshot[u.snapshot_step];
                s.first += a.overall_gain_pct;
                s.second++;
            }
        }
        agg_json["units"].push_back(std::move(uj));
    }
    agg_json["by_snapshot"] = nlohmann::json::object();
    for (const auto& [step, acc] : by_snapshot)
        agg_json["by_snapshot"][std::to_string(step)] = acc.first / acc.second;

    std::sort(steps.begin(), steps.end());
    std::string heatmap = tag + "size";
    for (long s : steps) heatmap += ",step_" + std::to_string(s);
    heatmap += "\n";
    for (const std::string& size : sizes) {
        heatmap += size;
        for (long s : steps) {
            heatmap += ",";
            const auto it = heat[size].find(s);
            if (it != heat[size].end()) heatmap += detail::fmt_full(it->second);
        }
        heatmap += "\n";
    }

    detail::write_file(d + "cases.csv", cases);
    detail::write_file(d + "by_speed.csv", by_speed);
    detail::write_file(d + "by_direction.csv", by_dir);
    detail::write_file(d + "heatmap.csv", heatmap);
    detail::write_file(d + "aggregate.json", agg_json.dump(2) + "\n");
}

// Optional gridded flow-field snapshot for visualization.
inline void write_flow_field_csv(const std::string& path, const FlowField& field) {
    std::string out = "x_m,y_m,wind_speed_ms\n";
    for (size_t iy = 0; iy < field.ys.size(); ++iy)
        for (size_t ix = 0; ix < field.xs.size(); ++ix)
            out += detail::fmt_full(field.xs[ix]) + "," + detail::fmt_full(field.ys[iy]) + "," +
                   detail::fmt_full(field.u[iy][ix]) + "\n";
    detail::write_file(path, out);
}

}  // namespace windsteer
