#pragma once

// Steady-state Gaussian wake model.
//
// Single wake at downstream distance x and radial offset r from the wake
// centerline:
//   sigma(x)/D = k*x/D + eps
//   C0 = 1 - sqrt(1 - Ct / (8 (sigma/D)^2))   (centerline deficit fraction)
//   deficit(x, r) = C0 * exp(-r^2 / (2 sigma^2))
// Yaw deflects the centerline laterally:
//   delta(x) = x * 0.5 * Ct * sin(gamma) * cos(gamma)^2
// Multiple wakes combine by root-sum-square of deficit fractions applied to
// the free-stream speed. Receivers sample the deficit at their hub point.

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "windsteer/common.hpp"
#include "windsteer/turbine.hpp"

namespace windsteer {

struct WakeModelConfig {
    double expansion_rate = 0.05;   // k, per unit x/D
    double initial_sigma_d = 0.25;  // eps, sigma/D at the rotor plane

    void validate() const {
        if (!(expansion_rate > 0.0)) throw std::invalid_argument("WakeModelConfig: expansion_rate must be > 0");
        if (!(initial_sigma_d > 0.0)) throw std::invalid_argument("WakeModelConfig: initial_sigma_d must be > 0");
    }

    nlohmann::json to_json() const {
        return {{"expansion_rate", expansion_rate}, {"initial_sigma_d", initial_sigma_d}};
    }

    static WakeModelConfig from_json(const nlohmann::json& j) {
        WakeModelConfig c;
        for (const auto& [key, val] : j.items()) {
            if (key == "expansion_rate") c.expansion_rate = val.get<double>();
            else if (key == "initial_sigma_d") c.initial_sigma_d = val.get<double>();
            else throw std::invalid_argument("WakeModelConfig: unknown key '" + key + "'");
        }
        c.validate();
        return c;
    }
};

struct InflowCondition {
    double wind_speed = 8.0;            // m/s, free stream at hub height
    double wind_direction_deg = 270.0;  // meteorological: 270 blows along +x
    double turbulence_intensity = 0.05;

    void validate() const {
        if (!(wind_speed > 0.0)) throw std::invalid_argument("InflowCondition: wind_speed must be > 0");
        if (wind_direction_deg < 0.0 || wind_direction_deg >= 360.0)
            throw std::invalid_argument("InflowCondition: wind_direction_deg must be in [0, 360)");
        if (turbulence_intensity < 0.0)
            throw std::invalid_argument("InflowCondition: turbulence_intensity must be >= 0");
    }

    nlohmann::json to_json() const {
        return {{"wind_speed", wind_speed},
                {"wind_direction_deg", wind_direction_deg},
                {"turbulence_intensity", turbulence_intensity}};
    }

    static InflowCondition from_json(const nlohmann::json& j) {
        InflowCondition c;
        for (const auto& [key, val] : j.items()) {
            if (key == "wind_speed") c.wind_speed = val.get<double>();
            else if (key == "wind_direction_deg") c.wind_direction_deg = val.get<double>();
            else if (key == "turbulence_intensity") c.turbulence_intensity = val.get<double>();
            else throw std::invalid_argument("InflowCondition: unknown key '" + key + "'");
        }
        c.validate();
        return c;
    }
};

struct FarmLayout {
    std::vector<std::array<double, 2>> positions;  // (x, y) in meters
    TurbineSpec turbine;

    size_t size() const { return positions.size(); }

    void validate() const {
        turbine.validate();
        if (positions.empty()) throw std::invalid_argument("FarmLayout: no turbines");
        double min_sep = 1e-6;
        for (size_t i = 0; i < positions.size(); ++i)
            for (size_t j = i + 1; j < positions.size(); ++j) {
                double dx = positions[i][0] - positions[j][0];
                double dy = positions[i][1] - positions[j][1];
                if (std::hypot(dx, dy) < min_sep)
                    throw std::invalid_argument("FarmLayout: coincident turbines");
            }
    }

    // Regular grid: `cols` columns along +x spaced spacing_d diameters apart,
    // `rows` rows along +y.
    static FarmLayout grid(int rows, int cols, double spacing_d, TurbineSpec spec = {}) {
        if (rows < 1 || cols < 1) throw std::invalid_argument("FarmLayout::grid: rows/cols must be >= 1");
        FarmLayout f;
        f.turbine = spec;
        double s = spacing_d * spec.rotor_diameter;
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                f.positions.push_back({c * s, r * s});
        f.validate();
        return f;
    }

    nlohmann::json to_json() const {
        return {{"positions", positions}, {"turbine", turbine.to_json()}};
    }

    static FarmLayout from_json(const nlohmann::json& j) {
        FarmLayout f;
        for (const auto& [key, val] : j.items()) {
            if (key == "positions") f.positions = val.get<std::vector<std::array<double, 2>>>();
            else if (key == "turbine") f.turbine = TurbineSpec::from_json(val);
            else throw std::invalid_argument("FarmLayout: unknown key '" + key + "'");
        }
        f.validate();
        return f;
    }
};

// Rotate plant coordinates into the wind frame. Downwind axis points the
// direction the wind blows toward; cross axis completes a right-handed frame.
// With meteorological direction theta (degrees the wind comes FROM, 270 ==
// westerly == blowing along +x):
//   down  = -x*sin(theta) - y*cos(theta)
//   cross =  x*cos(theta) - y*sin(theta)
inline std::vector<std::array<double, 2>> rotate_to_wind_frame(
    const std::vector<std::array<double, 2>>& positions, double wind_direction_deg) {
    double t = deg2rad(wind_direction_deg);
    double st = std::sin(t), ct = std::cos(t);
    std::vector<std::array<double, 2>> out(positions.size());
    for (size_t i = 0; i < positions.size(); ++i) {
        double x = positions[i][0], y = positions[i][1];
        out[i] = {-x * st - y * ct, x * ct - y * st};
    }
    return out;
}

// Indices sorted by downwind coordinate, ties broken by index.
inline std::vector<size_t> downstream_order(const std::vector<std::array<double, 2>>& wind_frame) {
    std::vector<size_t> order(wind_frame.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return wind_frame[a][0] < wind_frame[b][0]; });
    return order;
}

struct DeficitResult {
    double value = 0.0;      // fraction of free stream removed at the sample point
    bool near_wake = false;  // Ct/(8 (sigma/D)^2) clamped at 1
};

// Deficit fraction of a single wake at downstream distance x > 0 and radial
// offset r from its (deflected) centerline. ti is accepted for interface
// stability; the fixed-expansion model does not use it.
inline DeficitResult wake_deficit(double x, double r, double ct, double ti, const TurbineSpec& spec,
                                  const WakeModelConfig& cfg = {}) {
    (void)ti;
    DeficitResult res;
    if (x <= 0.0) return res;
    double d = spec.rotor_diameter;
    double sigma_d = cfg.expansion_rate * x / d + cfg.initial_sigma_d;
    double arg = ct / (8.0 * sigma_d * sigma_d);
    if (arg >= 1.0) {
        arg = 1.0;
        res.near_wake = true;
    }
    double c0 = 1.0 - std::sqrt(1.0 - arg);
    double sigma = sigma_d * d;
    res.value = c0 * std::exp(-r * r / (2.0 * sigma * sigma));
    return res;
}

// Lateral displacement of the wake centerline (in the +cross direction) at
// downstream distance x for a rotor yawed gamma degrees.
inline double wake_deflection(double x, double ct, double yaw_deg) {
    if (x <= 0.0) return 0.0;
    double g = deg2rad(yaw_deg);
    double c = std::cos(g);
    return x * 0.5 * ct * std::sin(g) * c * c;
}

struct SteadyFlowResult {
    std::vector<double> effective_ws;  // m/s per turbine
    std::vector<double> power;         // W per turbine
    double total_power = 0.0;          // W
    bool near_wake = false;            // any deficit clamped
};

// Effective hub wind speeds with wakes chained in downstream order. yaws are
// nacelle misalignments w.r.t. the free-stream direction (deg).
inline SteadyFlowResult effective_wind_speeds(const FarmLayout& layout, const InflowCondition& inflow,
                                              const std::vector<double>& yaws,
                                              const WakeModelConfig& cfg = {}) {
    size_t n = layout.size();
    if (yaws.size() != n) throw std::invalid_argument("effective_wind_speeds: yaws size mismatch");
    auto wf = rotate_to_wind_frame(layout.positions, inflow.wind_direction_deg);
    auto order = downstream_order(wf);

    SteadyFlowResult res;
    res.effective_ws.assign(n, inflow.wind_speed);
    res.power.assign(n, 0.0);
    std::vector<double> cts(n, 0.0);

    for (size_t oi = 0; oi < n; ++oi) {
        size_t j = order[oi];
        double sum_sq = 0.0;
        for (size_t ok = 0; ok < oi; ++ok) {
            size_t i = order[ok];
            double x = wf[j][0] - wf[i][0];
            if (x <= 0.0) continue;
            double r = (wf[j][1] - wf[i][1]) - wake_deflection(x, cts[i], yaws[i]);
            auto d = wake_deficit(x, r, cts[i], inflow.turbulence_intensity, layout.turbine, cfg);
            if (d.near_wake) res.near_wake = true;
            sum_sq += d.value * d.value;
        }
        double total_deficit = std::min(1.0, std::sqrt(sum_sq));
        double u = inflow.wind_speed * (1.0 - total_deficit);
        res.effective_ws[j] = u;
        cts[j] = layout.turbine.ct(u);
        res.power[j] = turbine_power(u, yaws[j], layout.turbine);
    }
    res.total_power = std::accumulate(res.power.begin(), res.power.end(), 0.0);
    return res;
}

inline SteadyFlowResult farm_power(const FarmLayout& layout, const InflowCondition& inflow,
                                   const std::vector<double>& yaws, const WakeModelConfig& cfg = {}) {
    return effective_wind_speeds(layout, inflow, yaws, cfg);
}

struct FlowField {
    std::vector<double> xs, ys;      // plant-frame sample axes (m)
    std::vector<std::vector<double>> u;  // u[iy][ix], m/s
};

// Hub-height speed field on a regular plant-frame grid, same physics as
// effective_wind_speeds (turbine operating points resolved first).
inline FlowField steady_flow_field(const FarmLayout& layout, const InflowCondition& inflow,
                                   const std::vector<double>& yaws, int nx, int ny,
                                   double margin_d = 2.0, const WakeModelConfig& cfg = {}) {
    if (nx < 2 || ny < 2) throw std::invalid_argument("steady_flow_field: grid must be >= 2x2");
    auto flow = effective_wind_speeds(layout, inflow, yaws, cfg);
    auto wf = rotate_to_wind_frame(layout.positions, inflow.wind_direction_deg);
    std::vector<double> cts(layout.size());
    for (size_t i = 0; i < layout.size(); ++i) cts[i] = layout.turbine.ct(flow.effective_ws[i]);

    double xmin = layout.positions[0][0], xmax = xmin, ymin = layout.positions[0][1], ymax = ymin;
    for (const auto& p : layout.positions) {
        xmin = std::min(xmin, p[0]); xmax = std::max(xmax, p[0]);
        ymin = std::min(ymin, p[1]); ymax = std::max(ymax, p[1]);
    }
    double m = margin_d * layout.turbine.rotor_diameter;
    FlowField field;
    field.xs = linspace(xmin - m, xmax + m, nx);
    field.ys = linspace(ymin - m, ymax + m, ny);
    field.u.assign(static_cast<size_t>(ny), std::vector<double>(static_cast<size_t>(nx), 0.0));

    double t = deg2rad(inflow.wind_direction_deg);
    double st = std::sin(t), ct = std::cos(t);
    for (int iy = 0; iy < ny; ++iy) {
        for (int ix = 0; ix < nx; ++ix) {
            double px = field.xs[static_cast<size_t>(ix)], py = field.ys[static_cast<size_t>(iy)];
            double down = -px * st - py * ct;
            double cross = px * ct - py * st;
            double sum_sq = 0.0;
            for (size_t i = 0; i < layout.size(); ++i) {
                double x = down - wf[i][0];
                if (x <= 0.0) continue;
                double r = (cross - wf[i][1]) - wake_deflection(x, cts[i], yaws[i]);
                auto d = wake_deficit(x, r, cts[i], inflow.turbulence_intensity, layout.turbine, cfg);
                sum_sq += d.value * d.value;
            }
            field.u[static_cast<size_t>(iy)][static_cast<size_t>(ix)] =
                inflow.wind_speed * (1.0 - std::min(1.0, std::sqrt(sum_sq)));
        }
    }
    return field;
}

}  // namespace windsteer
