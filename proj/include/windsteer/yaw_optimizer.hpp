#pragma once

// Steady-state yaw optimization: coordinate-descent with a shrinking yaw
// grid (serial refine), expert targets, and the (wd, ws) -> yaws lookup
// table used by the filtered-LUT baseline controller.

#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "windsteer/common.hpp"
#include "windsteer/wake.hpp"

namespace windsteer {

struct SerialRefineConfig {
    double yaw_lo = -30.0;  // deg
    double yaw_hi = 30.0;   // deg
    int coarse_points = 13; // 5 deg spacing over the default bounds
    int passes = 4;         // span halves each pass

    void validate() const {
        if (!(yaw_lo < yaw_hi)) throw std::invalid_argument("SerialRefineConfig: yaw_lo must be < yaw_hi");
        if (coarse_points < 3) throw std::invalid_argument("SerialRefineConfig: coarse_points must be >= 3");
        if (passes < 1) throw std::invalid_argument("SerialRefineConfig: passes must be >= 1");
    }

    // Grid spacing of the final refinement pass.
    double final_spacing() const {
        double span = yaw_hi - yaw_lo;
        for (int p = 1; p < passes; ++p) span *= 0.5;
        return span / (coarse_points - 1);
    }

    nlohmann::json to_json() const {
        return {{"yaw_lo", yaw_lo}, {"yaw_hi", yaw_hi},
                {"coarse_points", coarse_points}, {"passes", passes}};
    }

    static SerialRefineConfig from_json(const nlohmann::json& j) {
        SerialRefineConfig c;
        for (const auto& [key, val] : j.items()) {
            if (key == "yaw_lo") c.yaw_lo = val.get<double>();
            else if (key == "yaw_hi") c.yaw_hi = val.get<double>();
            else if (key == "coarse_points") c.coarse_points = val.get<int>();
            else if (key == "passes") c.passes = val.get<int>();
            else throw std::invalid_argument("SerialRefineConfig: unknown key '" + key + "'");
        }
        c.validate();
        return c;
    }
};

struct YawSolution {
    std::vector<double> yaws;   // deg
    double total_power = 0.0;   // W
    int passes_used = 0;
};

// Coordinate descent over turbines in downstream order. Each pass scans a
// uniform yaw grid per turbine (others held fixed) and keeps the argmax of
// total farm power; each subsequent pass halves the span, centered on the
// incumbent and clipped to the bounds.
inline YawSolution serial_refine(const FarmLayout& layout, const InflowCondition& inflow,
                                 const SerialRefineConfig& cfg = {},
                                 const WakeModelConfig& wake_cfg = {}) {
    cfg.validate();
    size_t n = layout.size();
    auto wf = rotate_to_wind_frame(layout.positions, inflow.wind_direction_deg);
    auto order = downstream_order(wf);

    std::vector<double> yaws(n, 0.0);
    double best_power = farm_power(layout, inflow, yaws, wake_cfg).total_power;

    double span = cfg.yaw_hi - cfg.yaw_lo;
    YawSolution sol;
    for (int pass = 0; pass < cfg.passes; ++pass) {
        for (size_t oi = 0; oi < n; ++oi) {
            size_t t = order[oi];
            double lo = std::max(cfg.yaw_lo, yaws[t] - 0.5 * span);
            double hi = std::min(cfg.yaw_hi, yaws[t] + 0.5 * span);
            double best_yaw = yaws[t];
            for (int p = 0; p < cfg.coarse_points; ++p) {
                double cand = lo + (hi - lo) * static_cast<double>(p) / (cfg.coarse_points - 1);
                yaws[t] = cand;
                double pw = farm_power(layout, inflow, yaws, wake_cfg).total_power;
                if (pw > best_power) {
                    best_power = pw;
                    best_yaw = cand;
                }
            }
            yaws[t] = best_yaw;
        }
        span *= 0.5;
        sol.passes_used = pass + 1;
    }
    sol.yaws = yaws;
    sol.total_power = best_power;
    return sol;
}

// Expert yaw targets: serial refine with default settings.
inline std::vector<double> expert_yaw_targets(const FarmLayout& layout, const InflowCondition& inflow,
                                              const SerialRefineConfig& cfg = {},
                                              const WakeModelConfig& wake_cfg = {}) {
    return serial_refine(layout, inflow, cfg, wake_cfg).yaws;
}

struct YawLut {
    std::vector<double> wd_axis;  // deg, strictly increasing
    std::vector<double> ws_axis;  // m/s, strictly increasing
    // yaws[i][j] = per-turbine setpoints at (wd_axis[i], ws_axis[j])
    std::vector<std::vector<std::vector<double>>> yaws;

    void validate() const {
        if (wd_axis.empty() || ws_axis.empty()) throw std::invalid_argument("YawLut: empty axis");
        for (size_t i = 1; i < wd_axis.size(); ++i)
            if (wd_axis[i] <= wd_axis[i - 1]) throw std::invalid_argument("YawLut: wd_axis not increasing");
        for (size_t j = 1; j < ws_axis.size(); ++j)
            if (ws_axis[j] <= ws_axis[j - 1]) throw std::invalid_argument("YawLut: ws_axis not increasing");
        if (yaws.size() != wd_axis.size()) throw std::invalid_argument("YawLut: table/axis mismatch");
        size_t nt = 0;
        for (const auto& row : yaws) {
            if (row.size() != ws_axis.size()) throw std::invalid_argument("YawLut: table/axis mismatch");
            for (const auto& cell : row) {
                if (nt == 0) nt = cell.size();
                if (cell.empty() || cell.size() != nt)
                    throw std::invalid_argument("YawLut: inconsistent turbine count");
            }
        }
    }

    nlohmann::json to_json() const {
        return {{"wd_axis", wd_axis}, {"ws_axis", ws_axis}, {"yaws", yaws}};
    }

    static YawLut from_json(const nlohmann::json& j) {
        YawLut lut;
        for (const auto& [key, val] : j.items()) {
            if (key == "wd_axis") lut.wd_axis = val.get<std::vector<double>>();
            else if (key == "ws_axis") lut.ws_axis = val.get<std::vector<double>>();
            else if (key == "yaws") lut.yaws = val.get<std::vector<std::vector<std::vector<double>>>>();
            else throw std::invalid_argument("YawLut: unknown key '" + key + "'");
        }
        lut.validate();
        return lut;
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("YawLut: cannot write " + path);
        out << to_json().dump(2) << "\n";
    }

    static YawLut load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("YawLut: cannot open " + path);
        nlohmann::json j;
        in >> j;
        return from_json(j);
    }
};

namespace detail {
// Index i and fraction t such that axis[i] + t*(axis[i+1]-axis[i]) == q,
// clamped to the axis range.
inline std::pair<size_t, double> axis_locate(const std::vector<double>& axis, double q) {
    if (axis.size() == 1 || q <= axis.front()) return {0, 0.0};
    if (q >= axis.back()) return {axis.size() - 2, 1.0};
    size_t i = static_cast<size_t>(std::upper_bound(axis.begin(), axis.end(), q) - axis.begin()) - 1;
    double t = (q - axis[i]) / (axis[i + 1] - axis[i]);
    return {i, t};
}
}  // namespace detail

// Bilinear interpolation over (wd, ws), per-turbine independently; queries
// outside the axes clamp to the boundary.
inline std::vector<double> lut_lookup(const YawLut& lut, double wd_deg, double ws) {
    auto [i, tx] = detail::axis_locate(lut.wd_axis, wd_deg);
    auto [j, ty] = detail::axis_locate(lut.ws_axis, ws);
    size_t i1 = lut.wd_axis.size() == 1 ? i : i + 1;
    size_t j1 = lut.ws_axis.size() == 1 ? j : j + 1;
    const auto& y00 = lut.yaws[i][j];
    const auto& y10 = lut.yaws[i1][j];
    const auto& y01 = lut.yaws[i][j1];
    const auto& y11 = lut.yaws[i1][j1];
    std::vector<double> out(y00.size());
    for (size_t t = 0; t < out.size(); ++t) {
        double a = y00[t] + tx * (y10[t] - y00[t]);
        double b = y01[t] + tx * (y11[t] - y01[t]);
        out[t] = a + ty * (b - a);
    }
    return out;
}

// Optimize every (wd, ws) grid node; nodes are independent so they may be
// evaluated in parallel.
inline YawLut build_lut(const FarmLayout& layout, const std::vector<double>& wd_axis,
                        const std::vector<double>& ws_axis, double ti = 0.05,
                        const SerialRefineConfig& cfg = {}, const WakeModelConfig& wake_cfg = {},
                        int workers = 1) {
    YawLut lut;
    lut.wd_axis = wd_axis;
    lut.ws_axis = ws_axis;
    lut.yaws.assign(wd_axis.size(), std::vector<std::vector<double>>(ws_axis.size()));

    size_t total = wd_axis.size() * ws_axis.size();
    parallel_for(total, workers, [&](size_t node) {
        size_t i = node / ws_axis.size();
        size_t j = node % ws_axis.size();
        InflowCondition inflow{ws_axis[j], wd_axis[i], ti};
        lut.yaws[i][j] = expert_yaw_targets(layout, inflow, cfg, wake_cfg);
    });
    lut.validate();
    return lut;
}

}  // namespace windsteer
