// One line per acceptance criterion; exit status 1 if any fails.
// Optional arguments select criteria by number.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "fracavg/chain.hpp"
#include "fracavg/conditional_gaussian.hpp"
#include "fracavg/config.hpp"
#include "fracavg/effective_diffusion.hpp"
#include "fracavg/experiments.hpp"
#include "fracavg/fbm.hpp"
#include "fracavg/graph.hpp"
#include "fracavg/rough_lift.hpp"
#include "generators.hpp"

using namespace fracavg;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;
};

std::string f6(double x) {
    char b[32];
    std::snprintf(b, sizeof b, "%.4g", x);
    return b;
}

ChainModel two_state(double a, double b) {
    Eigen::MatrixXd Q(2, 2);
    Q << -a, a, b, -b;
    return ChainModel(Q);
}

json two_state_json() { return json::array({json::array({-1.0, 1.0}), json::array({1.0, -1.0})}); }

double max_abs_z(const StatReport& r, const std::string& prefix) {
    double z = 0.0;
    for (const auto& row : r.rows)
        if (row.kind == RowKind::z && row.name.rfind(prefix, 0) == 0) z = std::max(z, std::abs(row.z));
    return z;
}

const StatRow& row(const StatReport& r, const std::string& name) {
    for (const auto& x : r.rows)
        if (x.name == name) return x;
    throw std::runtime_error("missing row " + name);
}

// 1 -------------------------------------------------------------------------
Verdict fbm_exactness() {
    Verdict v;
    double worst_target = 0.0, worst_z = 0.0;
    for (double H : {0.35, 0.5, 0.75, 0.9}) {
        for (std::size_t n : {16u, 100u, 257u, 1024u}) worst_target = std::max(worst_target, FgnSampler(H, 1.0 / n, n).target_error());
        const std::size_t n = 64, N = 5000;
        const double dt = 1.0 / n;
        FbmGrid grid{HurstParam(H), dt, n};
        FgnSampler sampler(H, dt, n);
        std::vector<FbmPath> paths;
        for (std::size_t i = 0; i < N; ++i) paths.push_back(sample_fbm(grid, sampler, 101, i));
        for (auto [a, b] : {std::pair{16, 32}, {32, 64}, {64, 64}, {6, 58}, {8, 8}}) {
            std::vector<double> prod(N);
            for (std::size_t i = 0; i < N; ++i) prod[i] = paths[i].values(0, a) * paths[i].values(0, b);
            // i.i.d. paths: plain standard error
            const double m = sample_mean(prod), se = std::sqrt(sample_variance(prod) / N);
            const double target = 0.5 * (std::pow(a * dt, 2 * H) + std::pow(b * dt, 2 * H) - std::pow(std::abs(b - a) * dt, 2 * H));
            worst_z = std::max(worst_z, std::abs(m - target) / se);
        }
    }
    v.pass = worst_target <= 1e-10 && worst_z <= 4.0;
    v.detail = "max covariance error " + f6(worst_target) + " (<= 1e-10), max |z| " + f6(worst_z) + " (<= 4) over 5000 paths";
    return v;
}

// 2 -------------------------------------------------------------------------
Verdict fractional_power_cross() {
    testgen::Gen gen(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 25; ++trial) {
        ChainModel c(gen.generator(3));
        const Observable f = c.center(gen.observable(3));
        for (double a : {-0.5, -0.2, 0.3}) {
            const Observable e = fractional_power(c, a, f), q = fractional_power_quadrature(c, a, f);
            worst = std::max(worst, (e - q).norm() / e.norm());
        }
    }
    return {worst <= 1e-6, "max relative difference " + f6(worst) + " (<= 1e-6) over 25 random 3-state chains"};
}

// 3 -------------------------------------------------------------------------
Verdict green_kubo() {
    Eigen::MatrixXd Q(3, 3);
    Q << -0.3, 0.2, 0.1, 0.1, -0.25, 0.15, 0.2, 0.1, -0.3;
    ChainModel chain(Q);
    std::vector<Eigen::MatrixXd> c{Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::MatrixXd::Constant(1, 1, -0.5),
                                   Eigen::MatrixXd::Constant(1, 1, 0.2)};
    CoefficientField F(1, 1, 3, {BasisFunction::constant()}, {c});
    Verdict v;
    std::ostringstream os;
    const Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
    for (double H : {0.4, 0.75}) {
        EffectiveDiffusion ed(chain, F.center(chain.mu()), HurstParam(H));
        const Eigen::MatrixXd S = ed.sigma(x, x);
        double prev = INFINITY, last = 0.0;
        bool mono = true;
        os << "H=" << H << " rel err";
        for (double d : {0.2, 0.1, 0.05, 0.025}) {
            const double e = (ed.sigma_green_kubo(x, x, d) - S).norm();
            mono = mono && e < prev;
            prev = e;
            last = e / S.norm();
            os << " " << f6(last);
        }
        os << (mono ? " decreasing; " : " NOT decreasing; ");
        v.pass = v.pass && mono && last <= 0.05;
    }
    v.detail = os.str() + "last <= 0.05";
    return v;
}

// 4 -------------------------------------------------------------------------
Verdict functional_clt() {
    Verdict v;
    std::ostringstream os;
    for (double H : {0.4, 0.5, 0.75}) {
        json doc{{"model", {{"H", H}, {"epsilon", 1e-3}}},
                 {"chain", {{"Q", two_state_json()}}},
                 {"clt", {{"t", 1.0}, {"observables", {{1.0, -1.0}}}, {"method", "conditional"}}},
                 {"mc", {{"n_paths", 10000}, {"seed", 4}}}};
        auto cfg = parse_config(doc);
        auto rep = run_clt_experiment(cfg);
        const auto& var = row(rep, "cov(Z[0],Z[0])");
        const auto& k4 = row(rep, "k4(Z[0])");
        const double closed = std::tgamma(2 * H + 1) * std::pow(2.0, 1 - 2 * H);
        const bool ok = std::abs(var.z) <= 3 && std::abs(k4.z) <= 3 && std::abs(var.target - closed) < 1e-10 * closed;
        v.pass = v.pass && ok;
        os << "H=" << H << " var " << f6(var.estimate) << " vs " << f6(closed) << " z=" << f6(var.z) << " k4 z=" << f6(k4.z)
           << "; ";
    }
    v.detail = os.str() + "|z| <= 3";
    return v;
}

// 5 -------------------------------------------------------------------------
Verdict second_order_shift() {
    Verdict v;
    std::ostringstream os;
    for (double H : {0.4, 0.5, 0.75}) {
        json doc{{"model", {{"H", H}, {"epsilon", 1e-3}}},
                 {"chain", {{"Q", two_state_json()}}},
                 {"second_order", {{"t", 1.0}, {"observables", {{1.0, -1.0}}}, {"method", "conditional"}}},
                 {"mc", {{"n_paths", 10000}, {"seed", 5}}}};
        auto cfg = parse_config(doc);
        auto rep = run_second_order_experiment(cfg);
        const auto& m = row(rep, "E JJ[0,0]");
        // <f, L^{1-2H} f> = 2^{1-2H} for f = (1, -1); at H = 1/2 this is 1/2 <f f>
        const double closed = 0.5 * std::tgamma(2 * H + 1) * std::pow(2.0, 1 - 2 * H);
        const bool ok = std::abs(m.z) <= 3 && std::abs(m.target - closed) < 1e-10;
        v.pass = v.pass && ok;
        os << "H=" << H << " E JJ " << f6(m.estimate) << " +- " << f6(m.stderr_) << " vs " << f6(closed) << " z=" << f6(m.z)
           << "; ";
    }
    v.detail = os.str() + "|z| <= 3";
    return v;
}

// 6 -------------------------------------------------------------------------
Verdict chen_geometric() {
    Verdict v;
    double chen = 0.0, geo = 0.0;
    testgen::Gen gen(6);
    for (double H : {0.4, 0.75}) {
        auto chain = two_state(1.0, 2.0);
        const Observable f = gen.observable(2), g = gen.observable(2);
        const double eps = 0.1, delta = 2e-3, T = 1.0, dt = delta / 4;
        Mollifier moll(delta, dt);
        FbmGrid grid{HurstParam(H), dt, static_cast<std::size_t>(std::llround(T / dt)) + moll.half_width() + 4};
        auto B = sample_fbm(grid, 66);
        auto dB = mollified_derivative(B, moll, Extension::independent, 67);
        auto Y = sample_trajectory(chain, dB.time(static_cast<std::size_t>(dB.values.cols() - 1)) / eps + 1.0, 68);
        RoughDriver drv(Y, dB, eps, HurstParam(H), delta);
        const auto steps = std::llround(T / drv.step());
        for (int k = 0; k < 100; ++k) {
            std::array<long long, 3> ix{gen.integer(0, static_cast<int>(steps)), gen.integer(0, static_cast<int>(steps)),
                                        gen.integer(0, static_cast<int>(steps))};
            std::sort(ix.begin(), ix.end());
            const double a = ix[0] * drv.step(), b = ix[1] * drv.step(), c = ix[2] * drv.step();
            const auto su = drv.increment(f, g, a, b), ut = drv.increment(f, g, b, c), st = drv.increment(f, g, a, c);
            const double scale = std::max({st.ZZ.cwiseAbs().maxCoeff(), (su.Zf * ut.Zg.transpose()).cwiseAbs().maxCoeff(), 1e-300});
            chen = std::max(chen, chen_residual(su, ut, st) / scale);
            const auto ff = drv.increment(f, f, a, c);
            const Eigen::MatrixXd zz = ff.Zf * ff.Zf.transpose();
            geo = std::max(geo, (0.5 * (ff.ZZ + ff.ZZ.transpose()) - 0.5 * zz).cwiseAbs().maxCoeff() /
                                    std::max(zz.cwiseAbs().maxCoeff(), 1e-300));
        }
    }
    v.pass = chen <= 1e-9 && geo <= 1e-9;
    v.detail = "max relative Chen residual " + f6(chen) + ", geometric identity " + f6(geo) + " (<= 1e-9), 100 triples, H in {0.4, 0.75}";
    return v;
}

// 7 -------------------------------------------------------------------------
Verdict mean_oracle() {
    const HurstParam H(0.4);
    auto f = [](double r) { return std::sin(2 * r) + 0.5; };
    auto g = [](double r) { return std::exp(-r); };
    const double s = 0.2, t = 1.2;
    const double limit = mean_iterated_deterministic(f, g, s, t, H);
    std::vector<double> err;
    std::ostringstream os;
    os << "rel err";
    for (double delta : {4e-3, 2e-3, 1e-3}) {
        Mollifier moll(delta, delta / 4);
        err.push_back(std::abs(mollified_iterated_mean(f, g, s, t, H, moll) - limit) / std::abs(limit));
        os << " " << f6(err.back());
    }
    bool mono = err[1] < err[0] && err[2] < err[1];
    // the ensemble of actual sums at delta = 1e-3 agrees with its exact mean
    const double delta = 1e-3, dt = delta / 4;
    Mollifier moll(delta, dt);
    const double exact = mollified_iterated_mean(f, g, s, t, H, moll);
    const auto a = std::llround(s / dt), b = std::llround(t / dt);
    const std::size_t n = static_cast<std::size_t>(b) + moll.half_width() + 8;
    FgnSampler sampler(0.4, dt, n);
    const int N = 2000;
    std::vector<double> sums(N);
    for (int i = 0; i < N; ++i) {
        auto B = sample_fbm(FbmGrid(H, dt, n), sampler, 707, static_cast<std::uint64_t>(i));
        auto d = mollified_derivative(B, moll, Extension::independent, stream_key(708, static_cast<std::uint64_t>(i)));
        double run = 0.0, v = 0.0;
        for (long long k = a; k < b; ++k) {
            const double x = f(k * dt) * d.values(0, k) * dt, y = g(k * dt) * d.values(0, k) * dt;
            v += (run + 0.5 * x) * y;
            run += x;
        }
        sums[static_cast<std::size_t>(i)] = v;
    }
    const double m = sample_mean(sums), se = std::sqrt(sample_variance(sums) / N);
    const double zmc = (m - exact) / se;
    Verdict v;
    v.pass = mono && err.back() <= 0.01 && std::abs(zmc) <= 4;
    os << (mono ? " (decreasing)" : " (NOT decreasing)") << ", <= 0.01 at delta=1e-3; ensemble of " << N
       << " sums vs exact ensemble mean z=" << f6(zmc);
    v.detail = os.str();
    return v;
}

// 8 -------------------------------------------------------------------------
Verdict homogenization() {
    json F = json::array({json{{"basis", "sin"}, {"k", {1.0}}, {"phase", 0.3}, {"coeffs", {1.0, -0.5, 0.2}}},
                          json{{"basis", "constant"}, {"coeffs", {0.5, 0.1, -0.4}}}});
    json doc{{"model", {{"H", 0.4}, {"epsilon", 1e-2}, {"delta_rule", "eps^2"}, {"T", 1.0}, {"x0", {{0.0}, {0.4}}}}},
             {"chain", {{"Q", {{-1.0, 0.6, 0.4}, {0.5, -1.0, 0.5}, {0.3, 0.7, -1.0}}}}},
             {"coefficients", {{"dim", 1}, {"noise_dim", 1}, {"F", F}}},
             {"homogenize", {{"dt_sde", 1e-3}, {"n_perm", 1000}, {"two_point", true}}},
             {"mc", {{"n_paths", 2000}, {"seed", 8}}}};
    auto cfg = parse_config(doc);
    auto rep = run_homogenization_experiment(cfg);
    rep.apply_thresholds(3.0, 0.01, false);
    const auto& p = row(rep, "energy_permutation");
    const double zm = std::abs(row(rep, "mean X[0,0]").z), zv = std::abs(row(rep, "var X[0,0]").z);
    const double zc = std::abs(row(rep, "cov(X[0,0],X[1,0])").z);
    Verdict v;
    v.pass = p.estimate >= 0.01 && zm <= 3 && zv <= 3 && zc <= 3;
    v.detail = "energy permutation p=" + f6(p.estimate) + " (>= 0.01), mean z=" + f6(zm) + ", var z=" + f6(zv) +
               ", two-point cross-cov z=" + f6(zc) + " (<= 3), N=2000, delta=eps^2";
    return v;
}

// 9 -------------------------------------------------------------------------
Verdict graph_machinery() {
    json doc{{"graph", {{"example_graph", true}, {"kappa", 0.1}, {"H", 0.75}, {"lemmas", {{"instances", 200}, {"max_vertices", 6}}},
                        {"main_term", {{"enabled", false}}}}},
             {"mc", {{"seed", 9}}}};
    auto cfg = parse_config(doc);
    auto rep = run_graph_check(cfg);
    Verdict v;
    v.pass = rep.passed() && !rep.rows.empty();
    v.detail = "m=" + f6(row(rep, "example graph quotient components m").estimate) +
               ", |T|=" + f6(row(rep, "example graph forest size").estimate) +
               ", T={(1,2),(5,6)}: " + (row(rep, "example graph forest edges (1,2),(5,6)").pass ? "yes" : "no") +
               ", forest exponent " + f6(row(rep, "example graph exponent m+(1-kappa)|T|").estimate) +
               " <= p-kappa(p-m)=" + f6(row(rep, "example graph bound p-kappa(p-m)").estimate) +
               " (kappa=0.1); lemma failures over 200 random graphs: " +
               f6(row(rep, "decay below -1 => integrable: failures").estimate) + ", " +
               f6(row(rep, "edge deletion lemma: failures").estimate);
    return v;
}

// 10 ------------------------------------------------------------------------
Verdict main_term() {
    auto chain = two_state(1.0, 1.0);
    const Observable f = Eigen::Vector2d(1.0, -1.0);
    const std::vector<Observable> fs{f, f};
    const double H = 0.75;
    std::ostringstream os;
    os << "ratio";
    double last = 0.0, measured = 0.0;
    for (double L : {10.0, 30.0, 100.0}) {
        const std::vector<std::pair<double, double>> iv{{0.0, L}, {0.0, L}};
        const auto r = main_term_check(chain, fs, iv, H);
        last = r.integral / r.main_term;
        os << " L=" << L << ":" << f6(last);
        measured = r.integral / (r.overlaps[0] * 2.0 * chain.inner(f, fractional_power(chain, 1 - 2 * H, f)));
    }
    Verdict v;
    v.pass = std::abs(last - 1.0) <= 0.02;
    os << " (within 0.02 of 1 at L=100); measured prefactor " << f6(measured) << " vs Gamma(2H-1)=" << f6(std::tgamma(2 * H - 1))
       << ", Gamma(1-2H)=" << f6(std::tgamma(1 - 2 * H));
    v.detail = os.str();
    return v;
}

// 11 ------------------------------------------------------------------------
Verdict chaos() {
    Verdict v;
    std::ostringstream os;
    for (double H : {0.4, 0.75}) {
        const auto s = chaos_domination_sweep(H, 50, 16, 4000, 11);
        v.pass = v.pass && s.failures == 0;
        os << "H=" << H << ": " << s.failures << "/50 violations, worst ratio " << f6(s.worst) << "; ";
    }
    v.detail = os.str() + "ratio = var_same / (2 var_indep (1 + 3 rel)) <= 1";
    return v;
}

// 12 ------------------------------------------------------------------------
Verdict lln() {
    json doc{{"chain", {{"Q", two_state_json()}}},
             {"lln", {{"f", {{1.0, 0.0}}}, {"g", {{1.0, 0.5}}}, {"lag", 0.0}, {"T_values", {50, 100, 200, 400, 800}},
                      {"n_seeds", 400}}},
             {"mc", {{"seed", 12}}}};
    auto cfg = parse_config(doc);
    auto rep = run_lln_check(cfg);
    const auto& s = row(rep, "loglog slope");
    return {s.pass, "fitted slope " + f6(s.estimate) + " +- " + f6(s.stderr_) + " (-0.5 +- 0.1)"};
}

// 13 ------------------------------------------------------------------------
Verdict moment_scaling_regimes() {
    auto chain = two_state(1.0, 1.0);
    const Observable f = Eigen::Vector2d(1.0, -1.0);
    Verdict v;
    std::ostringstream os;
    for (double H : {0.4, 0.75}) {
        const auto r = moment_scaling(chain, f, H, 0.01, {1e-5, 2e-5, 4e-5, 8e-5}, {0.25, 0.5, 1.0, 2.0}, 400, 13);
        const bool ok = std::abs(r.first_small.exponent - H) <= 0.1 && std::abs(r.first_large.exponent - 0.5) <= 0.1 &&
                        std::abs(r.second_small.exponent - 2 * H) <= 0.1 && std::abs(r.second_large.exponent - 1.0) <= 0.1;
        v.pass = v.pass && ok;
        os << "H=" << H << ": J " << f6(r.first_small.exponent) << "/" << f6(r.first_large.exponent) << ", JJ "
           << f6(r.second_small.exponent) << "/" << f6(r.second_large.exponent) << "; ";
    }
    v.detail = os.str() + "targets H/0.5 and 2H/1 within 0.1";
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"fBM exactness", fbm_exactness},
        {"fractional power cross-validation", fractional_power_cross},
        {"Green-Kubo convergence", green_kubo},
        {"functional CLT", functional_clt},
        {"second-order shift", second_order_shift},
        {"Chen relation and geometric identity", chen_geometric},
        {"mean iterated-integral oracle", mean_oracle},
        {"homogenization endpoint", homogenization},
        {"graph machinery", graph_machinery},
        {"main-term extraction", main_term},
        {"chaos domination", chaos},
        {"LLN rate", lln},
        {"moment-scaling regimes", moment_scaling_regimes},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k) + 1;
        if (!only.empty() && !only.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = criteria[k].second();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failures += !v.pass;
        std::printf("criterion %2d %s: %s | %s [%.1fs]\n", id, v.pass ? "PASS" : "FAIL", criteria[k].first.c_str(),
                    v.detail.c_str(), sec);
        std::fflush(stdout);
    }
    return failures ? 1 : 0;
}
