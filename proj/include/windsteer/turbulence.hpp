#pragma once

// Pre-generated turbulence boxes: Ornstein-Uhlenbeck perturbation series for
// per-turbine wind speed and direction plus a lateral meander offset per
// inter-turbine wake path.
//
// Series are stored with zero mean and unit variance (exactly, enforced after
// generation) and scaled at use so one library serves any episode inflow:
//   speed     -> I * U            (m/s)
//   direction -> wd_std * I/I_ref (deg)
//   meander   -> m_std*D * I/I_ref (m)
// Every channel scales with I, so I = 0 recovers a fully deterministic flow.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "windsteer/common.hpp"
#include "windsteer/rng.hpp"
#include "windsteer/wake.hpp"

namespace windsteer {

struct TurbulenceConfig {
    double correlation_time_s = 60.0;
    double wd_std_deg = 3.0;      // direction std at reference_ti
    double meander_std_d = 0.25;  // meander std in rotor diameters at reference_ti
    double reference_ti = 0.05;

    void validate() const {
        if (!(correlation_time_s > 0.0))
            throw std::invalid_argument("TurbulenceConfig: correlation_time_s must be > 0");
        if (wd_std_deg < 0.0) throw std::invalid_argument("TurbulenceConfig: wd_std_deg must be >= 0");
        if (meander_std_d < 0.0) throw std::invalid_argument("TurbulenceConfig: meander_std_d must be >= 0");
        if (!(reference_ti > 0.0)) throw std::invalid_argument("TurbulenceConfig: reference_ti must be > 0");
    }

    nlohmann::json to_json() const {
        return {{"correlation_time_s", correlation_time_s},
                {"wd_std_deg", wd_std_deg},
                {"meander_std_d", meander_std_d},
                {"reference_ti", reference_ti}};
    }

    static TurbulenceConfig from_json(const nlohmann::json& j) {
        TurbulenceConfig c;
        for (const auto& [key, val] : j.items()) {
            if (key == "correlation_time_s") c.correlation_time_s = val.get<double>();
            else if (key == "wd_std_deg") c.wd_std_deg = val.get<double>();
            else if (key == "meander_std_d") c.meander_std_d = val.get<double>();
            else if (key == "reference_ti") c.reference_ti = val.get<double>();
            else throw std::invalid_argument("TurbulenceConfig: unknown key '" + key + "'");
        }
        c.validate();
        return c;
    }
};

struct TurbulenceBox {
    uint64_t seed = 0;
    int n_turbines = 0;
    double dt_s = 5.0;
    TurbulenceConfig config;
    InflowCondition ref_inflow;   // inflow the box was generated for
    std::string config_hash;      // environment fingerprint, attached by the caller

    // unit-variance, zero-mean shapes
    std::vector<std::vector<double>> u_unit;        // [turbine][k]
    std::vector<std::vector<double>> wd_unit;       // [turbine][k]
    std::vector<std::vector<double>> meander_unit;  // [emitter*n+receiver][k]

    size_t length() const { return u_unit.empty() ? 0 : u_unit[0].size(); }

    double speed_perturbation(const InflowCondition& inflow, int turbine, size_t k) const {
        const auto& s = u_unit[static_cast<size_t>(turbine)];
        return inflow.turbulence_intensity * inflow.wind_speed * s[k % s.size()];
    }

    double direction_perturbation_deg(const InflowCondition& inflow, int turbine, size_t k) const {
        const auto& s = wd_unit[static_cast<size_t>(turbine)];
        double std_deg = config.wd_std_deg * inflow.turbulence_intensity / config.reference_ti;
        return std_deg * s[k % s.size()];
    }

    double meander_offset_m(const InflowCondition& inflow, double rotor_diameter, int emitter,
                            int receiver, size_t k) const {
        const auto& s = meander_unit[static_cast<size_t>(emitter * n_turbines + receiver)];
        double std_m =
            config.meander_std_d * rotor_diameter * inflow.turbulence_intensity / config.reference_ti;
        return std_m * s[k % s.size()];
    }

    void validate() const {
        if (n_turbines < 1) throw std::invalid_argument("TurbulenceBox: n_turbines must be >= 1");
        if (!(dt_s > 0.0)) throw std::invalid_argument("TurbulenceBox: dt_s must be > 0");
        size_t n = static_cast<size_t>(n_turbines);
        if (u_unit.size() != n || wd_unit.size() != n || meander_unit.size() != n * n)
            throw std::invalid_argument("TurbulenceBox: series count mismatch");
        size_t len = length();
        if (len < 2) throw std::invalid_argument("TurbulenceBox: series too short");
        auto check_len = [len](const std::vector<std::vector<double>>& v) {
            for (const auto& s : v)
                if (s.size() != len) throw std::invalid_argument("TurbulenceBox: ragged series");
        };
        check_len(u_unit);
        check_len(wd_unit);
        check_len(meander_unit);
        config.validate();
    }

    nlohmann::json to_json() const {
        return {{"seed", seed},
                {"n_turbines", n_turbines},
                {"dt_s", dt_s},
                {"config", config.to_json()},
                {"ref_inflow", ref_inflow.to_json()},
                {"config_hash", config_hash},
                {"u_unit", u_unit},
                {"wd_unit", wd_unit},
                {"meander_unit", meander_unit}};
    }

    static TurbulenceBox from_json(const nlohmann::json& j) {
        TurbulenceBox b;
        for (const auto& [key, val] : j.items()) {
            if (key == "seed") b.seed = val.get<uint64_t>();
            else if (key == "n_turbines") b.n_turbines = val.get<int>();
            else if (key == "dt_s") b.dt_s = val.get<double>();
            else if (key == "config") b.config = TurbulenceConfig::from_json(val);
            else if (key == "ref_inflow") b.ref_inflow = InflowCondition::from_json(val);
            else if (key == "config_hash") b.config_hash = val.get<std::string>();
            else if (key == "u_unit") b.u_unit = val.get<std::vector<std::vector<double>>>();
            else if (key == "wd_unit") b.wd_unit = val.get<std::vector<std::vector<double>>>();
            else if (key == "meander_unit") b.meander_unit = val.get<std::vector<std::vector<double>>>();
            else throw std::invalid_argument("TurbulenceBox: unknown key '" + key + "'");
        }
        b.validate();
        return b;
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("TurbulenceBox: cannot write " + path);
        out << to_json().dump() << "\n";
    }

    static TurbulenceBox load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("TurbulenceBox: cannot open " + path);
        nlohmann::json j;
        in >> j;
        return from_json(j);
    }
};

namespace detail {

// Stationary OU series with unit variance, exactly re-centered and rescaled
// so the empirical mean is 0 and the empirical (population) std is 1.
inline std::vector<double> ou_unit_series(size_t len, double dt, double tau, Rng& rng) {
    std::vector<double> x(len);
    double a = std::exp(-dt / tau);
    double b = std::sqrt(1.0 - a * a);
    x[0] = rng.normal();
    for (size_t k = 1; k < len; ++k) x[k] = a * x[k - 1] + b * rng.normal();

    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(len);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(len);
    double inv_std = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
    for (double& v : x) v = (v - mean) * inv_std;
    return x;
}

}  // namespace detail

inline TurbulenceBox generate_turbulence_box(const InflowCondition& inflow, int n_turbines,
                                             double duration_s, double dt_s, uint64_t seed,
                                             const TurbulenceConfig& cfg = {}) {
    if (!(duration_s > 0.0)) throw std::invalid_argument("generate_turbulence_box: duration must be > 0");
    if (!(dt_s > 0.0)) throw std::invalid_argument("generate_turbulence_box: dt must be > 0");
    if (n_turbines < 1) throw std::invalid_argument("generate_turbulence_box: need >= 1 turbine");
    cfg.validate();
    inflow.validate();

    size_t len = static_cast<size_t>(std::ceil(duration_s / dt_s)) + 1;
    if (len < 2) len = 2;

    TurbulenceBox box;
    box.seed = seed;
    box.n_turbines = n_turbines;
    box.dt_s = dt_s;
    box.config = cfg;
    box.ref_inflow = inflow;

    size_t n = static_cast<size_t>(n_turbines);
    box.u_unit.resize(n);
    box.wd_unit.resize(n);
    box.meander_unit.resize(n * n);
    double tau = cfg.correlation_time_s;
    for (size_t i = 0; i < n; ++i) {
        Rng ru(derive_seed(seed, "box.u", i));
        box.u_unit[i] = detail::ou_unit_series(len, dt_s, tau, ru);
        Rng rw(derive_seed(seed, "box.wd", i));
        box.wd_unit[i] = detail::ou_unit_series(len, dt_s, tau, rw);
    }
    for (size_t p = 0; p < n * n; ++p) {
        Rng rm(derive_seed(seed, "box.meander", p));
        box.meander_unit[p] = detail::ou_unit_series(len, dt_s, tau, rm);
    }
    return box;
}

}  // namespace windsteer
