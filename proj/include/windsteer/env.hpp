#pragma once

// Quasi-dynamic wind-farm MDP.
//
// Dynamics surrogate: steady Gaussian deficits evaluated with time-lagged
// emitter states (yaw, Ct as they were x/U_inf seconds ago, kept in ring
// buffers) plus stochastic meander offsets and local speed/direction
// perturbations from a pre-generated turbulence box. A shadow greedy
// baseline advances in lockstep from the same initial state and turbulence;
// the reward is the relative power of the agent rollout against it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "windsteer/common.hpp"
#include "windsteer/rng.hpp"
#include "windsteer/turbulence.hpp"
#include "windsteer/wake.hpp"

namespace windsteer {

using Observation = Eigen::VectorXd;
using Action = Eigen::VectorXd;

struct ObsBounds {
    double ws_lo = 0.0, ws_hi = 30.0;       // m/s
    double wd_lo = 240.0, wd_hi = 300.0;    // deg
    double yaw_lo = -40.0, yaw_hi = 40.0;   // deg

    void validate() const {
        if (!(ws_lo < ws_hi) || !(wd_lo < wd_hi) || !(yaw_lo < yaw_hi))
            throw std::invalid_argument("ObsBounds: each range must be increasing");
    }

    nlohmann::json to_json() const {
        return {{"ws_lo", ws_lo}, {"ws_hi", ws_hi}, {"wd_lo", wd_lo},
                {"wd_hi", wd_hi}, {"yaw_lo", yaw_lo}, {"yaw_hi", yaw_hi}};
    }

    static ObsBounds from_json(const nlohmann::json& j) {
        ObsBounds b;
        for (const auto& [key, val] : j.items()) {
            if (key == "ws_lo") b.ws_lo = val.get<double>();
            else if (key == "ws_hi") b.ws_hi = val.get<double>();
            else if (key == "wd_lo") b.wd_lo = val.get<double>();
            else if (key == "wd_hi") b.wd_hi = val.get<double>();
            else if (key == "yaw_lo") b.yaw_lo = val.get<double>();
            else if (key == "yaw_hi") b.yaw_hi = val.get<double>();
            else throw std::invalid_argument("ObsBounds: unknown key '" + key + "'");
        }
        b.validate();
        return b;
    }
};

struct EnvConfig {
    double dt_sim_s = 5.0;
    double dt_agent_s = 10.0;
    int flow_throughs = 20;
    double yaw_rate_max_deg_s = 0.5;
    int avg_window = 25;             // agent steps
    double domain_margin_d = 2.0;    // rotor diameters, each of upstream/downstream
    double episode_duration_s = 0.0; // > 0 overrides the flow-through formula (evaluation)
    ObsBounds obs;
    WakeModelConfig wake;

    // yaw hard bounds track the observation normalization range
    double yaw_bound_lo() const { return obs.yaw_lo; }
    double yaw_bound_hi() const { return obs.yaw_hi; }
    double yaw_step_deg() const { return yaw_rate_max_deg_s * dt_agent_s; }
    int substeps_per_action() const { return static_cast<int>(std::lround(dt_agent_s / dt_sim_s)); }

    void validate() const {
        if (!(dt_sim_s > 0.0)) throw std::invalid_argument("EnvConfig: dt_sim_s must be > 0");
        double ratio = dt_agent_s / dt_sim_s;
        if (std::abs(ratio - std::lround(ratio)) > 1e-9 || std::lround(ratio) < 1)
            throw std::invalid_argument("EnvConfig: dt_agent_s must be an integer multiple of dt_sim_s");
        if (flow_throughs < 1) throw std::invalid_argument("EnvConfig: flow_throughs must be >= 1");
        if (!(yaw_rate_max_deg_s > 0.0)) throw std::invalid_argument("EnvConfig: yaw_rate_max must be > 0");
        if (avg_window < 1) throw std::invalid_argument("EnvConfig: avg_window must be >= 1");
        if (domain_margin_d < 0.0) throw std::invalid_argument("EnvConfig: domain_margin_d must be >= 0");
        if (episode_duration_s < 0.0) throw std::invalid_argument("EnvConfig: episode_duration_s must be >= 0");
        obs.validate();
        wake.validate();
    }

    nlohmann::json to_json() const {
        return {{"dt_sim_s", dt_sim_s},
                {"dt_agent_s", dt_agent_s},
                {"flow_throughs", flow_throughs},
                {"yaw_rate_max_deg_s", yaw_rate_max_deg_s},
                {"avg_window", avg_window},
                {"domain_margin_d", domain_margin_d},
                {"episode_duration_s", episode_duration_s},
                {"obs", obs.to_json()},
                {"wake", wake.to_json()}};
    }

    static EnvConfig from_json(const nlohmann::json& j) {
        EnvConfig c;
        for (const auto& [key, val] : j.items()) {
            if (key == "dt_sim_s") c.dt_sim_s = val.get<double>();
            else if (key == "dt_agent_s") c.dt_agent_s = val.get<double>();
            else if (key == "flow_throughs") c.flow_throughs = val.get<int>();
            else if (key == "yaw_rate_max_deg_s") c.yaw_rate_max_deg_s = val.get<double>();
            else if (key == "avg_window") c.avg_window = val.get<int>();
            else if (key == "domain_margin_d") c.domain_margin_d = val.get<double>();
            else if (key == "episode_duration_s") c.episode_duration_s = val.get<double>();
            else if (key == "obs") c.obs = ObsBounds::from_json(val);
            else if (key == "wake") c.wake = WakeModelConfig::from_json(val);
            else throw std::invalid_argument("EnvConfig: unknown key '" + key + "'");
        }
        c.validate();
        return c;
    }
};

struct EpisodeSpec {
    InflowCondition inflow;
    std::vector<double> initial_yaws;  // deg, misalignment w.r.t. free stream
    int turbulence_box_id = 0;
    uint64_t rng_seed = 0;  // deterministic offset into the turbulence box

    nlohmann::json to_json() const {
        return {{"inflow", inflow.to_json()},
                {"initial_yaws", initial_yaws},
                {"turbulence_box_id", turbulence_box_id},
                {"rng_seed", rng_seed}};
    }

    static EpisodeSpec from_json(const nlohmann::json& j) {
        EpisodeSpec s;
        for (const auto& [key, val] : j.items()) {
            if (key == "inflow") s.inflow = InflowCondition::from_json(val);
            else if (key == "initial_yaws") s.initial_yaws = val.get<std::vector<double>>();
            else if (key == "turbulence_box_id") s.turbulence_box_id = val.get<int>();
            else if (key == "rng_seed") s.rng_seed = val.get<uint64_t>();
            else throw std::invalid_argument("EpisodeSpec: unknown key '" + key + "'");
        }
        return s;
    }
};

struct EpisodeSampling {
    double ws_lo = 8.0, ws_hi = 15.0;     // m/s
    double wd_lo = 255.0, wd_hi = 285.0;  // deg
    double yaw_lo = -15.0, yaw_hi = 15.0; // deg
    double ti = 0.05;

    nlohmann::json to_json() const {
        return {{"ws_lo", ws_lo}, {"ws_hi", ws_hi}, {"wd_lo", wd_lo},
                {"wd_hi", wd_hi}, {"yaw_lo", yaw_lo}, {"yaw_hi", yaw_hi}, {"ti", ti}};
    }

    static EpisodeSampling from_json(const nlohmann::json& j) {
        EpisodeSampling s;
        for (const auto& [key, val] : j.items()) {
            if (key == "ws_lo") s.ws_lo = val.get<double>();
            else if (key == "ws_hi") s.ws_hi = val.get<double>();
            else if (key == "wd_lo") s.wd_lo = val.get<double>();
            else if (key == "wd_hi") s.wd_hi = val.get<double>();
            else if (key == "yaw_lo") s.yaw_lo = val.get<double>();
            else if (key == "yaw_hi") s.yaw_hi = val.get<double>();
            else if (key == "ti") s.ti = val.get<double>();
            else throw std::invalid_argument("EpisodeSampling: unknown key '" + key + "'");
        }
        return s;
    }
};

inline EpisodeSpec sample_episode(Rng& rng, size_t n_turbines, size_t n_boxes,
                                  const EpisodeSampling& ranges = {}) {
    if (n_boxes == 0) throw std::invalid_argument("sample_episode: empty turbulence library");
    EpisodeSpec spec;
    spec.inflow.wind_speed = rng.uniform(ranges.ws_lo, ranges.ws_hi);
    spec.inflow.wind_direction_deg = rng.uniform(ranges.wd_lo, ranges.wd_hi);
    spec.inflow.turbulence_intensity = ranges.ti;
    spec.initial_yaws.resize(n_turbines);
    for (auto& y : spec.initial_yaws) y = rng.uniform(ranges.yaw_lo, ranges.yaw_hi);
    spec.turbulence_box_id = static_cast<int>(rng.integer(n_boxes));
    spec.rng_seed = rng.engine()();
    return spec;
}

// Raw feature block per turbine: [ws, wd, yaw, ws_avg, wd_avg, yaw_avg].
inline int obs_dim(size_t n_turbines) { return static_cast<int>(6 * n_turbines); }

inline Observation normalize_obs(const std::vector<double>& raw, const ObsBounds& b) {
    if (raw.size() % 6 != 0) throw std::invalid_argument("normalize_obs: raw size must be 6 per turbine");
    Observation out(static_cast<Eigen::Index>(raw.size()));
    for (size_t i = 0; i < raw.size(); ++i) {
        int f = static_cast<int>(i % 6);
        double lo, hi;
        if (f == 0 || f == 3) { lo = b.ws_lo; hi = b.ws_hi; }
        else if (f == 1 || f == 4) { lo = b.wd_lo; hi = b.wd_hi; }
        else { lo = b.yaw_lo; hi = b.yaw_hi; }
        out[static_cast<Eigen::Index>(i)] = normalize_feature(raw[i], lo, hi);
    }
    return out;
}

inline std::vector<double> denormalize_obs(const Observation& obs, const ObsBounds& b) {
    if (obs.size() % 6 != 0) throw std::invalid_argument("denormalize_obs: size must be 6 per turbine");
    std::vector<double> out(static_cast<size_t>(obs.size()));
    for (Eigen::Index i = 0; i < obs.size(); ++i) {
        int f = static_cast<int>(i % 6);
        double lo, hi;
        if (f == 0 || f == 3) { lo = b.ws_lo; hi = b.ws_hi; }
        else if (f == 1 || f == 4) { lo = b.wd_lo; hi = b.wd_hi; }
        else { lo = b.yaw_lo; hi = b.yaw_hi; }
        out[static_cast<size_t>(i)] = denormalize_feature(obs[i], lo, hi);
    }
    return out;
}

struct TurbineState {
    double local_ws = 0.0;      // m/s
    double local_wd_deg = 0.0;  // deg
    double power_w = 0.0;       // W
};

struct StepInfo {
    double mean_power_agent = 0.0;     // W, averaged over the agent step
    double mean_power_baseline = 0.0;  // W
    bool action_clipped = false;
    double time_s = 0.0;
};

struct StepResult {
    Observation obs;
    double reward = 0.0;
    bool done = false;
    StepInfo info;
};

class WindFarmEnv {
public:
    WindFarmEnv(FarmLayout layout, EnvConfig cfg, const std::vector<TurbulenceBox>* library)
        : layout_(std::move(layout)), cfg_(std::move(cfg)), library_(library) {
        layout_.validate();
        cfg_.validate();
        if (!library_ || library_->empty())
            throw std::invalid_argument("WindFarmEnv: turbulence library required");
        n_ = layout_.size();
    }

    size_t n_turbines() const { return n_; }
    size_t library_size() const { return library_->size(); }
    const EnvConfig& config() const { return cfg_; }
    const FarmLayout& layout() const { return layout_; }

    // Streamwise domain length: wind-frame farm extent plus margins.
    double domain_length_m() const {
        if (!active_) throw std::logic_error("WindFarmEnv: reset first");
        return domain_length_;
    }
    double episode_length_s() const {
        if (!active_) throw std::logic_error("WindFarmEnv: reset first");
        return t_episode_;
    }
    int episode_steps() const {
        if (!active_) throw std::logic_error("WindFarmEnv: reset first");
        return n_steps_;
    }
    int steps_taken() const { return step_count_; }
    bool done() const { return step_count_ >= n_steps_; }
    const EpisodeSpec& episode() const { return spec_; }

    Observation reset(const EpisodeSpec& spec) {
        spec.inflow.validate();
        if (spec.initial_yaws.size() != n_)
            throw std::invalid_argument("WindFarmEnv: initial_yaws size mismatch");
        if (spec.turbulence_box_id < 0 ||
            static_cast<size_t>(spec.turbulence_box_id) >= library_->size())
            throw std::out_of_range("WindFarmEnv: unknown turbulence_box_id");
        const TurbulenceBox& box = (*library_)[static_cast<size_t>(spec.turbulence_box_id)];
        if (static_cast<size_t>(box.n_turbines) != n_)
            throw std::invalid_argument("WindFarmEnv: turbulence box turbine count mismatch");
        spec_ = spec;
        box_ = &box;
        box_offset_ = box.length() ? static_cast<size_t>(spec.rng_seed % box.length()) : 0;

        // wind-frame geometry, fixed for the episode
        wf_ = rotate_to_wind_frame(layout_.positions, spec.inflow.wind_direction_deg);
        order_ = downstream_order(wf_);
        double dmin = wf_[order_.front()][0], dmax = wf_[order_.back()][0];
        domain_length_ = (dmax - dmin) + 2.0 * cfg_.domain_margin_d * layout_.turbine.rotor_diameter;
        double u = spec.inflow.wind_speed;
        t_episode_ = cfg_.episode_duration_s > 0.0 ? cfg_.episode_duration_s
                                                   : cfg_.flow_throughs * domain_length_ / u;
        n_steps_ = static_cast<int>(std::ceil(t_episode_ / cfg_.dt_agent_s - 1e-12));

        // per-ordered-pair advection lags, in sim substeps (ceil: a change
        // never arrives downstream earlier than x/U)
        lag_.assign(n_, std::vector<int>(n_, 0));
        int max_lag = 1;
        for (size_t a = 0; a < n_; ++a)
            for (size_t b = 0; b < n_; ++b) {
                double x = wf_[b][0] - wf_[a][0];
                if (x <= 0.0) continue;
                int l = static_cast<int>(std::ceil(x / (u * cfg_.dt_sim_s) - 1e-12));
                lag_[a][b] = std::max(1, l);
                max_lag = std::max(max_lag, lag_[a][b]);
            }
        hist_len_ = static_cast<size_t>(max_lag + 1);

        // steady operating point at the unperturbed inflow seeds the buffers
        auto steady = effective_wind_speeds(layout_, spec.inflow, spec.initial_yaws, cfg_.wake);
        for (auto& sim : sims_) {
            sim.yaws = spec.initial_yaws;
            sim.emit_yaw.assign(n_, std::vector<double>(hist_len_, 0.0));
            sim.emit_ct.assign(n_, std::vector<double>(hist_len_, 0.0));
            for (size_t i = 0; i < n_; ++i) {
                double ct = layout_.turbine.ct(steady.effective_ws[i]);
                std::fill(sim.emit_yaw[i].begin(), sim.emit_yaw[i].end(), spec.initial_yaws[i]);
                std::fill(sim.emit_ct[i].begin(), sim.emit_ct[i].end(), ct);
            }
            sim.state.assign(n_, TurbineState{});
        }

        k_ = 0;
        step_count_ = 0;
        advance_substep(sims_[0], 0);
        advance_substep(sims_[1], 0);

        windows_ws_.assign(n_, {});
        windows_wd_.assign(n_, {});
        windows_yaw_.assign(n_, {});
        push_windows();
        active_ = true;
        return observe();
    }

    StepResult step(const Action& action) {
        if (!active_) throw std::logic_error("WindFarmEnv: reset first");
        if (done()) throw std::logic_error("WindFarmEnv: step after episode end");
        if (action.size() != static_cast<Eigen::Index>(n_))
            throw std::invalid_argument("WindFarmEnv: action size mismatch");

        StepResult res;
        double step_deg = cfg_.yaw_step_deg();
        for (size_t i = 0; i < n_; ++i) {
            double a = action[static_cast<Eigen::Index>(i)];
            if (a < -1.0 || a > 1.0) {
                res.info.action_clipped = true;
                a = std::clamp(a, -1.0, 1.0);
            }
            sims_[0].yaws[i] = std::clamp(sims_[0].yaws[i] + a * step_deg,
                                          cfg_.yaw_bound_lo(), cfg_.yaw_bound_hi());
            // shadow baseline tracks zero misalignment at the same rate limit
            double g = sims_[1].yaws[i];
            sims_[1].yaws[i] = g - std::copysign(std::min(std::abs(g), step_deg), g);
        }

        int sps = cfg_.substeps_per_action();
        double sum_agent = 0.0, sum_base = 0.0;
        for (int s = 0; s < sps; ++s) {
            ++k_;
            sum_agent += advance_substep(sims_[0], k_);
            sum_base += advance_substep(sims_[1], k_);
        }
        push_windows();
        ++step_count_;

        res.reward = sum_agent / sum_base - 1.0;
        res.info.mean_power_agent = sum_agent / sps;
        res.info.mean_power_baseline = sum_base / sps;
        res.info.time_s = k_ * cfg_.dt_sim_s;
        res.done = done();
        res.obs = observe();
        return res;
    }

    // Agent-side per-turbine state at the most recent substep.
    const std::vector<TurbineState>& instantaneous_farm_state() const {
        if (!active_) throw std::logic_error("WindFarmEnv: reset first");
        return sims_[0].state;
    }

    const std::vector<double>& agent_yaws() const { return sims_[0].yaws; }
    const std::vector<double>& baseline_yaws() const { return sims_[1].yaws; }

    // Plant-frame flow-field snapshot of the agent simulator's current
    // operating point (steady model at the current yaws/inflow).
    FlowField flow_field(int nx, int ny) const {
        if (!active_) throw std::logic_error("WindFarmEnv: reset first");
        return steady_flow_field(layout_, spec_.inflow, sims_[0].yaws, nx, ny,
                                 cfg_.domain_margin_d, cfg_.wake);
    }

private:
    struct Sim {
        std::vector<double> yaws;
        std::vector<std::vector<double>> emit_yaw;  // [turbine][k mod hist_len]
        std::vector<std::vector<double>> emit_ct;
        std::vector<TurbineState> state;
    };

    // Compute all local states at substep k from strictly older emission
    // states, then record this substep's emissions. Returns total farm power.
    double advance_substep(Sim& sim, size_t k) {
        const InflowCondition& inflow = spec_.inflow;
        size_t kb = box_offset_ + k;
        double total = 0.0;
        std::vector<double> new_ct(n_);
        for (size_t j = 0; j < n_; ++j) {
            double du = box_->speed_perturbation(inflow, static_cast<int>(j), kb);
            double dwd = box_->direction_perturbation_deg(inflow, static_cast<int>(j), kb);
            double sum_sq = 0.0;
            for (size_t i = 0; i < n_; ++i) {
                double x = wf_[j][0] - wf_[i][0];
                if (x <= 0.0) continue;
                size_t ke = (k >= static_cast<size_t>(lag_[i][j])) ? k - static_cast<size_t>(lag_[i][j]) : 0;
                // pre-seeded buffers make "before the episode" the initial steady state
                size_t slot = ke % hist_len_;
                double ey = sim.emit_yaw[i][slot];
                double ect = sim.emit_ct[i][slot];
                double meander = box_->meander_offset_m(inflow, layout_.turbine.rotor_diameter,
                                                        static_cast<int>(i), static_cast<int>(j), kb);
                double r = (wf_[j][1] - wf_[i][1]) - wake_deflection(x, ect, ey) - meander;
                double d = wake_deficit(x, r, ect, inflow.turbulence_intensity, layout_.turbine,
                                        cfg_.wake).value;
                sum_sq += d * d;
            }
            double u_free = inflow.wind_speed + du;
            double u_eff = std::max(0.0, u_free * (1.0 - std::min(1.0, std::sqrt(sum_sq))));
            sim.state[j].local_ws = u_eff;
            sim.state[j].local_wd_deg = wrap_deg(inflow.wind_direction_deg + dwd);
            sim.state[j].power_w = turbine_power(u_eff, sim.yaws[j] - dwd, layout_.turbine);
            new_ct[j] = layout_.turbine.ct(u_eff);
            total += sim.state[j].power_w;
        }
        size_t slot = k % hist_len_;
        for (size_t j = 0; j < n_; ++j) {
            sim.emit_yaw[j][slot] = sim.yaws[j];
            sim.emit_ct[j][slot] = new_ct[j];
        }
        return total;
    }

    void push_windows() {
        size_t w = static_cast<size_t>(cfg_.avg_window);
        for (size_t i = 0; i < n_; ++i) {
            windows_ws_[i].push_back(sims_[0].state[i].local_ws);
            windows_wd_[i].push_back(sims_[0].state[i].local_wd_deg);
            windows_yaw_[i].push_back(sims_[0].yaws[i]);
            while (windows_ws_[i].size() > w) {
                windows_ws_[i].pop_front();
                windows_wd_[i].pop_front();
                windows_yaw_[i].pop_front();
            }
        }
    }

    Observation observe() const {
        std::vector<double> raw(6 * n_);
        for (size_t i = 0; i < n_; ++i) {
            double ws_avg = 0.0, yaw_avg = 0.0;
            for (double v : windows_ws_[i]) ws_avg += v;
            for (double v : windows_yaw_[i]) yaw_avg += v;
            ws_avg /= static_cast<double>(windows_ws_[i].size());
            yaw_avg /= static_cast<double>(windows_yaw_[i].size());
            std::vector<double> wds(windows_wd_[i].begin(), windows_wd_[i].end());
            double wd_avg = circular_mean_deg(wds);
            raw[6 * i + 0] = sims_[0].state[i].local_ws;
            raw[6 * i + 1] = sims_[0].state[i].local_wd_deg;
            raw[6 * i + 2] = sims_[0].yaws[i];
            raw[6 * i + 3] = ws_avg;
            raw[6 * i + 4] = wd_avg;
            raw[6 * i + 5] = yaw_avg;
        }
        return normalize_obs(raw, cfg_.obs);
    }

    FarmLayout layout_;
    EnvConfig cfg_;
    const std::vector<TurbulenceBox>* library_ = nullptr;
    size_t n_ = 0;

    EpisodeSpec spec_;
    const TurbulenceBox* box_ = nullptr;
    size_t box_offset_ = 0;
    std::vector<std::array<double, 2>> wf_;
    std::vector<size_t> order_;
    std::vector<std::vector<int>> lag_;
    size_t hist_len_ = 2;
    double domain_length_ = 0.0;
    double t_episode_ = 0.0;
    int n_steps_ = 0;
    size_t k_ = 0;
    int step_count_ = 0;
    bool active_ = false;

    Sim sims_[2];  // [0] agent, [1] shadow baseline
    std::vector<std::deque<double>> windows_ws_, windows_wd_, windows_yaw_;
};

}  // namespace windsteer
