#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "windsteer/eval.hpp"

using namespace windsteer;
using Catch::Approx;

namespace {

std::vector<TurbulenceBox> make_library(int n_turbines, int count = 1, double duration = 4500.0) {
    std::vector<TurbulenceBox> lib;
    for (int b = 0; b < count; ++b)
        lib.push_back(generate_turbulence_box(InflowCondition{10.0, 270.0, 0.05}, n_turbines,
                                              duration, 5.0, 100 + static_cast<uint64_t>(b)));
    return lib;
}

// Normalized observation with per-turbine raw features [ws, wd, yaw, avgs...].
Observation obs_from(const std::vector<std::array<double, 3>>& turbines, const ObsBounds& b) {
    std::vector<double> raw;
    for (const auto& t : turbines)
        for (int rep = 0; rep < 2; ++rep) raw.insert(raw.end(), {t[0], t[1], t[2]});
    return normalize_obs(raw, b);
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        size_t start = 0;
        while (true) {  // keep trailing empty cells, unlike getline(ss, c, ',')
            size_t pos = line.find(',', start);
            if (pos == std::string::npos) {
                cells.push_back(line.substr(start));
                break;
            }
            cells.push_back(line.substr(start, pos - start));
            start = pos + 1;
        }
        rows.push_back(cells);
    }
    return rows;
}

}  // namespace

TEST_CASE("polyak filter arithmetic and limits", "[eval]") {
    SECTION("worked example and fixed point") {
        CHECK(polyak_filter(10.0, 12.0, 0.05) == Approx(10.1).margin(1e-12));
        CHECK(polyak_filter(7.3, 7.3, 0.05) == Approx(7.3).margin(1e-12));
        CHECK(polyak_filter(0.0, 8.0, 1.0) == 8.0);
    }
    SECTION("geometric approach to a constant measurement") {
        double x = 0.0, rho = 0.05, m = 8.0;
        for (int n = 1; n <= 40; ++n) {
            x = polyak_filter(x, m, rho);
            CHECK(x == Approx(m * (1.0 - std::pow(1.0 - rho, n))).margin(1e-12));
        }
    }
    SECTION("invalid rho") {
        CHECK_THROWS_AS(polyak_filter(1.0, 2.0, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(polyak_filter(1.0, 2.0, 1.5), std::invalid_argument);
        CHECK_THROWS_AS(polyak_filter_deg(1.0, 2.0, -0.1), std::invalid_argument);
    }
    SECTION("circular variant blends across the wrap") {
        double out = polyak_filter_deg(359.0, 1.0, 0.5);
        CHECK(std::abs(angle_diff_deg(out, 0.0)) < 1e-9);
        // moves the short way round (the long way would land near 333)
        CHECK(std::abs(angle_diff_deg(polyak_filter_deg(350.0, 10.0, 0.05), 351.0)) < 0.1);
    }
    SECTION("circular variant matches linear blending away from the wrap") {
        CHECK(polyak_filter_deg(270.0, 272.0, 0.05) == Approx(270.1).margin(1e-3));
        CHECK(polyak_filter_deg(270.0, 270.0, 0.05) == Approx(270.0).margin(1e-9));
    }
}

TEST_CASE("greedy controller steers every turbine toward zero misalignment", "[eval]") {
    EnvConfig cfg;  // yaw_step = 5 deg
    GreedyController greedy(2, cfg);

    SECTION("worked per-turbine examples") {
        Eigen::VectorXd a = greedy.act(obs_from({{10, 270, 0}, {9, 270, 12}}, cfg.obs));
        REQUIRE(a.size() == 2);
        CHECK(a(0) == Approx(0.0).margin(1e-12));   // aligned: hold
        CHECK(a(1) == Approx(-1.0).margin(1e-12));  // 12 deg: saturated step down
    }
    SECTION("unsaturated case is a fixed fraction of the rate limit") {
        Eigen::VectorXd a = greedy.act(obs_from({{10, 270, 2}, {10, 270, -7}}, cfg.obs));
        CHECK(a(0) == Approx(-0.4).margin(1e-9));  // -2/5
        CHECK(a(1) == Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("lut controller filters the upstream measurement and tracks targets", "[eval]") {
    FarmLayout farm = FarmLayout::grid(1, 2, 5.0);
    YawLut lut = build_lut(farm, {265, 270, 275}, {8, 10, 12});
    EnvConfig cfg;

    SECTION("first call seeds the filter from the upstream turbine") {
        LutController ctl(farm, lut, cfg);
        // wind ~270: turbine 0 (smaller x) is upstream
        ctl.act(obs_from({{9.7, 268, 0}, {6.0, 280, 0}}, cfg.obs));
        CHECK(ctl.filtered_ws() == Approx(9.7).margin(1e-9));
        CHECK(ctl.filtered_wd() == Approx(268.0).margin(1e-9));

        SECTION("subsequent calls apply the Polyak update") {
            ctl.act(obs_from({{10.7, 268, 0}, {6.0, 280, 0}}, cfg.obs));
            CHECK(ctl.filtered_ws() == Approx(0.95 * 9.7 + 0.05 * 10.7).margin(1e-9));
            CHECK(ctl.filtered_wd() == Approx(268.0).margin(1e-6));
        }
        SECTION("reset clears the filter state") {
            ctl.reset();
            ctl.act(obs_from({{12.0, 272, 0}, {6.0, 280, 0}}, cfg.obs));
            CHECK(ctl.filtered_ws() == Approx(12.0).margin(1e-9));
        }
    }

    SECTION("actions rate-limit toward the lookup targets") {
        LutController ctl(farm, lut, cfg);
        std::vector<double> tgt = lut_lookup(lut, 270.0, 10.0);
        REQUIRE(std::abs(tgt[0]) > 6.0);  // upstream steers hard when aligned
        Eigen::VectorXd a = ctl.act(obs_from({{10, 270, 0}, {8, 270, 0}}, cfg.obs));
        CHECK(a(0) == Approx(std::clamp(tgt[0] / 5.0, -1.0, 1.0)).margin(1e-9));
        CHECK(a(1) == Approx(std::clamp(tgt[1] / 5.0, -1.0, 1.0)).margin(1e-9));
    }

    SECTION("calm grid-node episode converges to the node targets exactly") {
        auto lib = make_library(2);
        cfg.episode_duration_s = 600.0;
        WindFarmEnv env(farm, cfg, &lib);
        EpisodeSpec spec;
        spec.inflow = InflowCondition{10.0, 270.0, 0.0};
        spec.initial_yaws = {0.0, 0.0};
        LutController ctl(farm, lut, cfg);
        ctl.reset();
        Observation obs = env.reset(spec);
        while (!env.done()) obs = env.step(ctl.act(obs)).obs;

        // zero turbulence: the upstream measurement is the nominal inflow, so
        // the filter holds the grid node and the lookup is interpolation-free
        CHECK(ctl.filtered_ws() == Approx(10.0).margin(1e-9));
        CHECK(ctl.filtered_wd() == Approx(270.0).margin(1e-9));
        std::vector<double> tgt = lut_lookup(lut, 270.0, 10.0);
        CHECK(env.agent_yaws()[0] == Approx(tgt[0]).margin(1e-6));
        CHECK(env.agent_yaws()[1] == Approx(tgt[1]).margin(1e-6));
    }
}

TEST_CASE("policy controller wraps a saved actor head", "[eval]") {
    Rng rng(11);
    MlpParams actor = make_mlp({12, 8, 4}, rng, 1e-2);
    SquashConfig squash = SquashConfig::unit(2);
    Observation obs = Observation::LinSpaced(12, -0.5, 0.5);

    SECTION("deterministic mode returns the squashed mean") {
        SacPolicyController ctl(actor, squash, true, 3);
        GaussianPolicyOutput out = split_policy_output(mlp_forward(actor, obs));
        CHECK(ctl.act(obs).isApprox(deterministic_action(out.mu.col(0), squash), 0.0));
        CHECK(ctl.act(obs).isApprox(ctl.act(obs), 0.0));
    }
    SECTION("stochastic mode is reproducible through reset") {
        SacPolicyController ctl(actor, squash, false, 3);
        Eigen::VectorXd a1 = ctl.act(obs), a2 = ctl.act(obs);
        CHECK_FALSE(a1.isApprox(a2, 0.0));  // fresh noise each call
        ctl.reset();
        CHECK(ctl.act(obs).isApprox(a1, 0.0));
        CHECK(ctl.act(obs).isApprox(a2, 0.0));
    }
}

TEST_CASE("greedy evaluated against the built-in baseline gains exactly zero", "[eval]") {
    FarmLayout farm = FarmLayout::grid(1, 2, 5.0);
    auto lib = make_library(2);
    EnvConfig cfg;
    GreedyController greedy(2, cfg);
    EvalCase c;
    c.wind_direction_deg = 267.0;
    c.wind_speed = 9.0;
    c.box_id = 0;
    c.seed = 42;

    RunCaseOptions opt;
    opt.record_series = true;
    CaseResult res = run_case(farm, cfg, lib, greedy, c, opt);

    CHECK(res.gain_pct == 0.0);  // agent replicates the baseline bit for bit
    CHECK(res.mean_agent_power == res.mean_baseline_power);
    CHECK(res.agent_power_series.size() == 360);  // 3600 s at 10 s agent steps
    CHECK(res.baseline_power_series.size() == 360);

    SECTION("per-step rewards vanish for random initial yaws too") {
        cfg.episode_duration_s = 400.0;
        WindFarmEnv env(farm, cfg, &lib);
        Rng rng(5);
        for (int ep = 0; ep < 3; ++ep) {
            EpisodeSpec spec = sample_episode(rng, 2, lib.size());
            Observation obs = env.reset(spec);
            while (!env.done()) {
                StepResult r = env.step(greedy.act(obs));
                CHECK(std::abs(r.reward) < 1e-9);
                obs = r.obs;
            }
        }
    }
    SECTION("repeat run is bit-identical") {
        CaseResult again = run_case(farm, cfg, lib, greedy, c, opt);
        CHECK(again.gain_pct == res.gain_pct);
        CHECK(again.mean_agent_power == res.mean_agent_power);
    }
}

TEST_CASE("case grid enumeration", "[eval]") {
    SECTION("default grid covers 7 directions x 4 speeds x 6 boxes") {
        std::vector<EvalCase> cases = make_eval_cases(123);
        REQUIRE(cases.size() == 168);
        std::set<std::string> ids;
        std::set<uint64_t> seeds;
        for (const EvalCase& c : cases) {
            ids.insert(c.id());
            seeds.insert(c.seed);
            CHECK(c.ti == 0.05);
        }
        CHECK(ids.size() == 168);    // every combination distinct
        CHECK(seeds.size() == 168);  // per-case seeds independent
        CHECK(cases.front().wind_direction_deg == 255.0);
        CHECK(cases.back().wind_direction_deg == 285.0);
        CHECK(cases.back().wind_speed == 13.0);
    }
    SECTION("seed changes per-case seeds but not the grid") {
        auto a = make_eval_cases(1), b = make_eval_cases(2);
        CHECK(a[0].wind_direction_deg == b[0].wind_direction_deg);
        CHECK(a[0].seed != b[0].seed);
    }
}

TEST_CASE("grid runs are order- and parallelism-invariant", "[eval]") {
    FarmLayout farm = FarmLayout::grid(1, 2, 5.0);
    auto lib = make_library(2, 2);
    EnvConfig cfg;
    std::vector<EvalCase> cases = make_eval_cases({265, 275}, {10}, 2, 0.05, 9);
    REQUIRE(cases.size() == 4);
    ControllerFactory factory = [&](const EvalCase&) {
        return std::make_unique<GreedyController>(2, cfg);
    };
    RunCaseOptions opt;
    opt.t_eval_s = 600.0;

    GridResult serial = run_grid(farm, cfg, lib, factory, cases, 1, opt);
    REQUIRE(serial.cases.size() == 4);
    CHECK(serial.failures.empty());

    SECTION("worker count does not change results") {
        GridResult parallel = run_grid(farm, cfg, lib, factory, cases, 3, opt);
        REQUIRE(parallel.cases.size() == 4);
        for (size_t i = 0; i < 4; ++i) {
            CHECK(parallel.cases[i].gain_pct == serial.cases[i].gain_pct);
            CHECK(parallel.cases[i].mean_agent_power == serial.cases[i].mean_agent_power);
        }
    }
    SECTION("case order does not change per-case results") {
        std::vector<EvalCase> reversed(cases.rbegin(), cases.rend());
        GridResult rev = run_grid(farm, cfg, lib, factory, reversed, 1, opt);
        for (size_t i = 0; i < 4; ++i) {
            CHECK(rev.cases[i].c.id() == serial.cases[3 - i].c.id());
            CHECK(rev.cases[i].mean_agent_power == serial.cases[3 - i].mean_agent_power);
        }
    }
    SECTION("a failing case is reported without sinking the rest") {
        ControllerFactory flaky = [&](const EvalCase& c) -> std::unique_ptr<Controller> {
            if (c.box_id == 1) throw std::runtime_error("no such snapshot");
            return std::make_unique<GreedyController>(2, cfg);
        };
        GridResult r = run_grid(farm, cfg, lib, flaky, cases, 2, opt);
        CHECK(r.cases.size() == 2);
        REQUIRE(r.failures.size() == 2);
        CHECK(r.failures[0].find("no such snapshot") != std::string::npos);
    }
}

TEST_CASE("aggregate gain statistics", "[eval]") {
    auto mk = [](double wd, double ws, double gain, double base) {
        CaseResult r;
        r.c.wind_direction_deg = wd;
        r.c.wind_speed = ws;
        r.gain_pct = gain;
        r.mean_baseline_power = base;
        r.mean_agent_power = base * (1.0 + gain / 100.0);
        return r;
    };

    SECTION("unweighted mean of per-case gains") {
        Aggregate a = aggregate_mean_gain({mk(270, 8, 2.0, 100.0), mk(270, 10, 4.0, 100.0)});
        CHECK(a.overall_gain_pct == Approx(3.0).margin(1e-12));
        CHECK(a.ratio_of_means_gain_pct == Approx(3.0).margin(1e-12));
        CHECK(a.n_cases == 2);
        CHECK(a.by_speed.at(8.0) == Approx(2.0));
        CHECK(a.by_speed.at(10.0) == Approx(4.0));
        CHECK(a.by_direction.at(270.0) == Approx(3.0));
    }
    SECTION("ratio of means weights cases by baseline power") {
        // same per-case gains, skewed baselines: the mean of gains is blind to
        // the skew, the ratio of means is not
        Aggregate a = aggregate_mean_gain({mk(270, 8, 2.0, 300.0), mk(270, 10, 4.0, 100.0)});
        CHECK(a.overall_gain_pct == Approx(3.0).margin(1e-12));
        CHECK(a.ratio_of_means_gain_pct == Approx((310.0 / 400.0 - 0.75) * 100.0).margin(1e-9));
    }
    SECTION("empty input throws") {
        CHECK_THROWS_AS(aggregate_mean_gain({}), std::invalid_argument);
    }
}

TEST_CASE("report emission round-trips through the CSV artifacts", "[eval]") {
    namespace fs = std::filesystem;
    auto mk = [](double wd, double ws, int box, double gain) {
        CaseResult r;
        r.c.wind_direction_deg = wd;
        r.c.wind_speed = ws;
        r.c.box_id = box;
        r.c.seed = static_cast<uint64_t>(box) + 7;
        r.gain_pct = gain;
        r.mean_baseline_power = 1e6;
        r.mean_agent_power = 1e6 * (1.0 + gain / 100.0);
        return r;
    };

    EvalReport report;
    report.units.push_back({"none", 0, {{mk(265, 8, 0, -0.731), mk(270, 8, 1, -1.25)}, {}}});
    report.units.push_back({"medium", 0, {{mk(265, 8, 0, 0.4119), mk(270, 8, 1, 0.52)}, {}}});
    report.units.push_back({"medium", 50000, {{mk(265, 8, 0, 1.17), mk(270, 8, 1, 1.3)}, {}}});
    report.units.push_back({"greedy", -1, {{mk(265, 8, 0, 0.0)}, {"wd285_case: boom"}}});

    const fs::path dir = fs::temp_directory_path() / "windsteer_eval_report_test";
    fs::remove_all(dir);
    emit_report(report, dir.string());

    SECTION("cases.csv holds one row per case plus a header") {
        auto rows = read_csv((dir / "cases.csv").string());
        REQUIRE(rows.size() == 8);  // header + 7 cases
        CHECK(rows[0][0] == "size");
        CHECK(rows[1][0] == "none");
        CHECK(rows[7][0] == "greedy");

        // reloading the per-case gains reproduces the published aggregate
        double medium0 = 0.0;
        int n = 0;
        for (size_t i = 1; i < rows.size(); ++i)
            if (rows[i][0] == "medium" && rows[i][1] == "0") {
                medium0 += std::stod(rows[i][7]);
                ++n;
            }
        REQUIRE(n == 2);
        std::ifstream in((dir / "aggregate.json").string());
        nlohmann::json agg = nlohmann::json::parse(in);
        REQUIRE(agg["units"].size() == 4);
        CHECK(medium0 / n ==
              Approx(agg["units"][1]["aggregate"]["overall_gain_pct"].get<double>()).margin(1e-9));
        CHECK(agg["units"][3]["failures"].size() == 1);
    }
    SECTION("heatmap is sizes x snapshot steps, baselines excluded") {
        auto rows = read_csv((dir / "heatmap.csv").string());
        REQUIRE(rows.size() == 3);  // header + none + medium
        REQUIRE(rows[0].size() == 3);
        CHECK(rows[0][1] == "step_0");
        CHECK(rows[0][2] == "step_50000");
        CHECK(rows[1][0] == "none");
        CHECK(rows[2][0] == "medium");
        CHECK(std::stod(rows[2][1]) == Approx((0.4119 + 0.52) / 2).margin(1e-12));
        CHECK(std::stod(rows[2][2]) == Approx((1.17 + 1.3) / 2).margin(1e-12));
        CHECK(rows[1][2].empty());  // "none" was not evaluated at 50k
    }
    SECTION("distribution files carry one row per case") {
        CHECK(read_csv((dir / "by_speed.csv").string()).size() == 8);
        CHECK(read_csv((dir / "by_direction.csv").string()).size() == 8);
    }
    fs::remove_all(dir);
}

TEST_CASE("flow field export matches the grid", "[eval]") {
    namespace fs = std::filesystem;
    FlowField field;
    field.xs = {0.0, 100.0};
    field.ys = {-50.0, 0.0, 50.0};
    field.u = {{8, 9}, {10, 11}, {12, 13}};
    const fs::path path = fs::temp_directory_path() / "windsteer_flow_test.csv";
    write_flow_field_csv(path.string(), field);
    auto rows = read_csv(path.string());
    REQUIRE(rows.size() == 7);  // header + 3x2 samples
    CHECK(rows[1] == std::vector<std::string>{"0", "-50", "8"});
    CHECK(rows[6] == std::vector<std::string>{"100", "50", "13"});
    fs::remove(path.string());
}

TEST_CASE("lut beats holding zero yaw on aligned calm inflow", "[eval]") {
    FarmLayout farm = FarmLayout::grid(1, 3, 5.0);
    auto lib = make_library(3);
    EnvConfig cfg;
    YawLut lut = build_lut(farm, {260, 265, 270, 275, 280}, {8, 10});

    std::vector<EvalCase> cases = make_eval_cases({265, 270, 275}, {8}, 1, 0.0, 17);
    ControllerFactory factory = [&](const EvalCase&) {
        return std::make_unique<LutController>(farm, lut, cfg);
    };
    GridResult grid = run_grid(farm, cfg, lib, factory, cases, 1);
    REQUIRE(grid.cases.size() == 3);
    REQUIRE(grid.failures.empty());

    for (const CaseResult& r : grid.cases) {
        INFO("case " << r.c.id());
        CHECK(r.gain_pct > 0.0);  // steering strictly beats the greedy baseline
    }
    Aggregate agg = aggregate_mean_gain(grid.cases);
    CHECK(agg.overall_gain_pct > 1.0);  // close spacing leaves a lot to recover
}
