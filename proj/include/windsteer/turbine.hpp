#pragma once

// Turbine description: rotor geometry, rated power, Cp/Ct curves and the
// yawed power law P = min(0.5*rho*A*Cp(u)*u^3*cos(gamma)^p, P_rated).

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "windsteer/common.hpp"

namespace windsteer {

inline constexpr double kAirDensity = 1.225;  // kg/m^3
inline constexpr double kBetzLimit = 16.0 / 27.0;

// Piecewise-linear curve over wind speed, clamped at both ends.
struct SpeedCurve {
    std::vector<std::array<double, 2>> points;  // (ws, value), ws ascending

    bool empty() const { return points.empty(); }

    double operator()(double ws) const {
        if (points.empty()) throw std::logic_error("SpeedCurve: empty");
        if (ws <= points.front()[0]) return points.front()[1];
        if (ws >= points.back()[0]) return points.back()[1];
        auto it = std::upper_bound(points.begin(), points.end(), ws,
                                   [](double v, const std::array<double, 2>& p) { return v < p[0]; });
        const auto& hi = *it;
        const auto& lo = *(it - 1);
        double t = (ws - lo[0]) / (hi[0] - lo[0]);
        return lo[1] + t * (hi[1] - lo[1]);
    }

    void validate(const char* name, double vmin, double vmax) const {
        for (size_t i = 0; i < points.size(); ++i) {
            if (i > 0 && points[i][0] <= points[i - 1][0])
                throw std::invalid_argument(std::string(name) + ": wind speeds must be strictly increasing");
            if (points[i][1] < vmin || points[i][1] > vmax)
                throw std::invalid_argument(std::string(name) + ": value out of range");
        }
    }
};

struct TurbineSpec {
    double rotor_diameter = 178.3;  // m
    double hub_height = 119.0;      // m
    double rated_power = 10.0e6;    // W
    double power_yaw_exponent = 1.88;
    SpeedCurve cp_curve;  // empty -> built-in constant 0.48
    SpeedCurve ct_curve;  // empty -> built-in thrust rolloff above 11.4 m/s

    double rotor_area() const {
        double r = 0.5 * rotor_diameter;
        return kPi * r * r;
    }

    double cp(double ws) const {
        if (!cp_curve.empty()) return cp_curve(ws);
        (void)ws;
        return 0.48;
    }

    double ct(double ws) const {
        if (!ct_curve.empty()) return std::min(ct_curve(ws), 0.999);
        if (ws < 11.4) return 0.8;
        double ratio = 11.4 / ws;
        return 0.8 * ratio * ratio;
    }

    void validate() const {
        if (!(rotor_diameter > 0.0)) throw std::invalid_argument("TurbineSpec: rotor_diameter must be > 0");
        if (!(hub_height > 0.0)) throw std::invalid_argument("TurbineSpec: hub_height must be > 0");
        if (!(rated_power > 0.0)) throw std::invalid_argument("TurbineSpec: rated_power must be > 0");
        if (!(power_yaw_exponent > 0.0)) throw std::invalid_argument("TurbineSpec: power_yaw_exponent must be > 0");
        cp_curve.validate("cp_table", 0.0, kBetzLimit);
        ct_curve.validate("ct_table", 0.0, 1.0);
        for (const auto& p : ct_curve.points)
            if (p[1] >= 1.0) throw std::invalid_argument("ct_table: Ct must be < 1");
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["rotor_diameter"] = rotor_diameter;
        j["hub_height"] = hub_height;
        j["rated_power"] = rated_power;
        j["power_yaw_exponent"] = power_yaw_exponent;
        if (!cp_curve.empty()) j["cp_table"] = cp_curve.points;
        if (!ct_curve.empty()) j["ct_table"] = ct_curve.points;
        return j;
    }

    static TurbineSpec from_json(const nlohmann::json& j) {
        TurbineSpec t;
        for (const auto& [key, val] : j.items()) {
            if (key == "rotor_diameter") t.rotor_diameter = val.get<double>();
            else if (key == "hub_height") t.hub_height = val.get<double>();
            else if (key == "rated_power") t.rated_power = val.get<double>();
            else if (key == "power_yaw_exponent") t.power_yaw_exponent = val.get<double>();
            else if (key == "cp_table") t.cp_curve.points = val.get<std::vector<std::array<double, 2>>>();
            else if (key == "ct_table") t.ct_curve.points = val.get<std::vector<std::array<double, 2>>>();
            else throw std::invalid_argument("TurbineSpec: unknown key '" + key + "'");
        }
        t.validate();
        return t;
    }

    static TurbineSpec load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("TurbineSpec: cannot open " + path);
        nlohmann::json j;
        in >> j;
        return from_json(j);
    }
};

// Power of a single rotor at effective hub wind speed u (m/s) and
// misalignment gamma (deg) between nacelle and local flow.
inline double turbine_power(double u, double misalign_deg, const TurbineSpec& spec) {
    if (u <= 0.0) return 0.0;
    double c = std::cos(deg2rad(misalign_deg));
    if (c <= 0.0) return 0.0;
    double p = 0.5 * kAirDensity * spec.rotor_area() * spec.cp(u) * u * u * u *
               std::pow(c, spec.power_yaw_exponent);
    return std::min(p, spec.rated_power);
}

}  // namespace windsteer
