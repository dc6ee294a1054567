#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "fracavg/experiments.hpp"
#include "fracavg/outputs.hpp"
#include "generators.hpp"

using namespace fracavg;

namespace {

std::vector<double> normals(std::size_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N;
    std::vector<double> x(n);
    for (auto& v : x) v = N(rng);
    return x;
}

double brute_energy(const std::vector<double>& a, const std::vector<double>& b) {
    auto mean_abs = [](const std::vector<double>& x, const std::vector<double>& y) {
        double s = 0.0;
        for (double u : x)
            for (double v : y) s += std::abs(u - v);
        return s / (x.size() * y.size());
    };
    return 2 * mean_abs(a, b) - mean_abs(a, a) - mean_abs(b, b);
}

json two_state() { return json::array({json::array({-1.0, 1.0}), json::array({1.0, -1.0})}); }

}  // namespace

TEST_CASE("k-statistics against closed forms") {
    const std::vector<double> x{1, 2, 3, 4, 10};
    const auto k = k_statistics(x);
    CHECK(k.k2 == doctest::Approx(sample_variance(x)));
    // third central moment 180 / 5 -> k3 = n^2 m3 / ((n-1)(n-2))
    CHECK(k.k3 == doctest::Approx(25.0 * 36.0 / 12.0));
    const auto g = k_statistics(normals(200000, 1));
    CHECK(g.k2 == doctest::Approx(1.0).epsilon(0.02));
    CHECK(std::abs(g.k3) < 0.05);
    CHECK(std::abs(g.k4) < 0.1);
}

TEST_CASE("batch estimates") {
    const auto x = normals(20000, 2);
    const auto m = batch_mean(x, 20);
    CHECK(m.value == doctest::Approx(sample_mean(x)));
    CHECK(m.se == doctest::Approx(1.0 / std::sqrt(20000.0)).epsilon(0.5));
    const auto v = batch_variance(x, 20);
    CHECK(std::abs(v.value - 1.0) < 4 * v.se);
    CHECK_THROWS_AS(batch_mean(std::vector<double>{1.0}, 20), config_error);
}

TEST_CASE("KS p-value: normal vs shifted") {
    CHECK(ks_normal_pvalue(normals(5000, 3)) > 0.01);
    auto u = normals(5000, 4);
    for (auto& v : u) v = v * v;  // chi-square: strongly non-normal
    CHECK(ks_normal_pvalue(u) < 1e-6);
}

TEST_CASE("energy distance: sorted formula equals brute force") {
    testgen::Gen gen(5);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> a(gen.integer(1, 40)), b(gen.integer(1, 40));
        for (auto& v : a) v = gen.uniform(-2, 2);
        for (auto& v : b) v = gen.uniform(-1, 3);
        if (trial % 4 == 0) b = a;  // ties
        CHECK(energy_distance(a, b) == doctest::Approx(brute_energy(a, b)).epsilon(1e-12).scale(1.0));
        std::vector<Eigen::VectorXd> va, vb;
        for (double v : a) va.push_back(Eigen::VectorXd::Constant(1, v));
        for (double v : b) vb.push_back(Eigen::VectorXd::Constant(1, v));
        CHECK(energy_distance(va, vb) == doctest::Approx(energy_distance(a, b)).scale(1.0));
    }
    const auto a = normals(300, 6), b = normals(300, 7);
    CHECK(energy_permutation_pvalue(a, b, 200, 1) > 0.01);
    auto c = b;
    for (auto& v : c) v += 1.0;
    CHECK(energy_permutation_pvalue(a, c, 200, 1) < 0.01);
}

TEST_CASE("linear and log-log fits") {
    const std::vector<double> x{1, 2, 3, 4}, y{3, 5, 7, 9};
    const auto f = linear_fit(x, y);
    CHECK(f.slope == doctest::Approx(2.0));
    CHECK(f.intercept == doctest::Approx(1.0));
    CHECK(f.slope_se == doctest::Approx(0.0).scale(1.0));
    std::vector<double> p{1, 2, 4, 8}, q;
    for (double v : p) q.push_back(3.0 * std::pow(v, -0.5));
    CHECK(loglog_fit(p, q).slope == doctest::Approx(-0.5));
}

TEST_CASE("delta rules") {
    CHECK(resolve_delta_rule("eps^2", 0.1) == doctest::Approx(0.01));
    CHECK(resolve_delta_rule("0.5*eps^1.5", 0.01) == doctest::Approx(0.5e-3));
    CHECK(resolve_delta_rule("1e-4", 0.1) == doctest::Approx(1e-4));
    CHECK_THROWS_AS(resolve_delta_rule("eps**2", 0.1), config_error);
}

TEST_CASE("config errors name the offending key") {
    CHECK_THROWS_WITH_AS(parse_config(json{{"model", {{"H", 1.2}}}}), doctest::Contains("model.H"), config_error);
    CHECK_THROWS_WITH_AS(parse_config(json{{"modle", json::object()}}), doctest::Contains("modle"), config_error);
    CHECK_THROWS_WITH_AS(parse_config(json{{"model", {{"epsilon", -1.0}}}}), doctest::Contains("model.epsilon"),
                         config_error);
    json bad{{"chain", {{"Q", two_state()}}},
             {"coefficients",
              {{"dim", 1}, {"noise_dim", 1}, {"F", {{{"basis", "constant"}, {"coeffs", {1.0, "x"}}}}}}}};
    CHECK_THROWS_WITH_AS(parse_config(bad), doctest::Contains("coefficients.F[0].coeffs[1]"), config_error);
    json rates{{"chain", {{"Q", {{-1.0, 2.0}, {1.0, -1.0}}}}}};
    CHECK_THROWS_AS(parse_config(rates), config_error);
}

TEST_CASE("defaults are written into the resolved config") {
    auto cfg = parse_config(json{{"model", {{"epsilon", 0.1}}}});
    CHECK(cfg.resolved["model"]["H"].get<double>() == doctest::Approx(0.4));
    CHECK(cfg.model.delta == doctest::Approx(0.01));
    CHECK(cfg.resolved["mc"]["n_paths"].get<int>() == 1000);
}

TEST_CASE("lagged time integral against a Riemann sum") {
    testgen::Gen gen(8);
    for (int trial = 0; trial < 10; ++trial) {
        ChainModel c(gen.generator(3));
        const auto path = sample_trajectory(c, 12.0, 100 + trial);
        const Observable f = gen.observable(3), g = gen.observable(3);
        const double T = 8.0, lag = gen.uniform(0.0, 3.0);
        const int n = 400000;
        double s = 0.0;
        for (int k = 0; k < n; ++k) {
            const double u = (k + 0.5) * T / n;
            s += f[path.state_at(u)] * g[path.state_at(u + lag)];
        }
        s *= T / n;
        CHECK(lagged_time_integral(path, f, g, T, lag) == doctest::Approx(s).epsilon(1e-3).scale(1.0));
    }
}

TEST_CASE("parallel_map keeps index order for any worker count") {
    const std::function<double(std::size_t)> f = [](std::size_t i) { return std::sqrt(static_cast<double>(i)); };
    CHECK(parallel_map<double>(100, 1, f) == parallel_map<double>(100, 4, f));
}

TEST_CASE("reports: CSV and JSON round trip") {
    StatReport rep;
    rep.experiment = "demo";
    rep.seed = 9;
    rep.add_z("mean", {0.1, 0.05}, 0.0);
    rep.add_p("ks", 0.3);
    rep.add_tol("ratio", 0.99, 1.0, 0.02, NAN, json{{"formula", "unit"}});
    rep.add_info("note", 1.0 / 3.0);
    rep.apply_thresholds(3.0, 0.01, false);
    CHECK(rep.passed());
    const auto back = report_from_json(report_json(rep));
    CHECK(report_csv(back) == report_csv(rep));
    CHECK(back.rows[2].oracle["formula"] == "unit");
    const auto csv = report_csv(rep);
    CHECK(csv.rfind("name,estimate,stderr,target,z,pass\n", 0) == 0);
    CHECK(csv.find("0.33333333333333331") != std::string::npos);

    StatReport empty;
    CHECK(report_csv(empty) == "name,estimate,stderr,target,z,pass\n");
    CHECK(empty.passed());
}

TEST_CASE("bonferroni tightens the z threshold") {
    StatReport rep;
    for (int i = 0; i < 10; ++i) rep.add_z("m" + std::to_string(i), {2.8, 1.0}, 0.0);
    rep.apply_thresholds(3.0, 0.01, false);
    CHECK(rep.passed());
    rep.rows[0].z = 3.2;
    rep.rows[0].estimate = 3.2;
    rep.apply_thresholds(3.0, 0.01, true);
    CHECK(rep.passed());  // 10 rows: |z| <= ~3.48
    rep.apply_thresholds(3.0, 0.01, false);
    CHECK_FALSE(rep.passed());
}

TEST_CASE("identical seeds give byte-identical outputs; workers do not matter") {
    auto make = [](std::size_t workers) {
        json doc{{"model", {{"H", 0.4}, {"epsilon", 0.05}, {"T", 0.25}}},
                 {"chain", {{"Q", two_state()}}},
                 {"coefficients",
                  {{"dim", 1}, {"noise_dim", 1}, {"F", {{{"basis", "sin"}, {"k", {1.0}}, {"coeffs", {1.0, -1.0}}}}}}},
                 {"mc", {{"n_paths", 6}, {"seed", 21}, {"workers", workers}}}};
        auto cfg = parse_config(doc);
        auto rep = run_simulate(cfg);
        std::string endpoints;
        for (const auto& [name, content] : rep.files)
            if (name == "endpoints.csv") endpoints = content;
        return endpoints + report_csv(rep);
    };
    const auto a = make(1);
    CHECK(!a.empty());
    CHECK(a == make(1));
    CHECK(a == make(3));
}

TEST_CASE("zero field stays at the initial point") {
    json doc{{"model", {{"epsilon", 0.1}, {"T", 0.2}, {"x0", {{0.7}}}}},
             {"chain", {{"Q", two_state()}}},
             {"coefficients", {{"dim", 1}, {"noise_dim", 1}}},
             {"mc", {{"n_paths", 3}}}};
    auto cfg = parse_config(doc);
    auto rep = run_simulate(cfg);
    for (const auto& [name, content] : rep.files) {
        if (name != "endpoints.csv") continue;
        std::istringstream in(content);
        std::string line;
        std::getline(in, line);
        int rows = 0;
        while (std::getline(in, line)) {
            ++rows;
            CHECK(std::stod(line.substr(line.rfind(',') + 1)) == 0.7);
        }
        CHECK(rows == 3);
    }
}

TEST_CASE("LLN check with f = 0 is exact") {
    json doc{{"chain", {{"Q", two_state()}}},
             {"lln", {{"f", {{0.0, 0.0}}}, {"g", {{1.0, 2.0}}}, {"T_values", {10, 20}}, {"n_seeds", 20}}}};
    auto cfg = parse_config(doc);
    auto rep = run_lln_check(cfg);
    rep.apply_thresholds(3.0, 0.01, false);
    CHECK(rep.passed());
    for (const auto& r : rep.rows)
        if (r.name.rfind("rms", 0) == 0) CHECK(r.estimate == 0.0);
}
