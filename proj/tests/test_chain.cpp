#include <doctest.h>

#include <cmath>
#include <vector>

#include "fracavg/chain.hpp"
#include "generators.hpp"

using namespace fracavg;

namespace {

ChainModel two_state(double a, double b) {
    Eigen::MatrixXd Q(2, 2);
    Q << -a, a, b, -b;
    return ChainModel(Q);
}

Observable vec(std::initializer_list<double> v) {
    Observable f(v.size());
    int i = 0;
    for (double x : v) f[i++] = x;
    return f;
}

}  // namespace

TEST_CASE("stationary measure examples") {
    CHECK(two_state(1, 1).mu().isApprox(vec({0.5, 0.5})));
    CHECK(two_state(1, 3).mu().isApprox(vec({0.75, 0.25}), 1e-14));
    ChainModel one(Eigen::MatrixXd::Zero(1, 1));
    CHECK(one.mu()[0] == 1.0);
    Eigen::MatrixXd red(3, 3);
    red << -1, 1, 0, 1, -1, 0, 0, 0, 0;
    CHECK_THROWS_WITH_AS(stationary_measure(red), doctest::Contains("{2}"), config_error);
    Eigen::MatrixXd bad(2, 2);
    bad << -1, 1, 1, -2;
    CHECK_THROWS_AS(ChainModel{bad}, config_error);
}

TEST_CASE("random chains: invariant measure and gap") {
    testgen::Gen gen(1);
    for (int trial = 0; trial < 50; ++trial) {
        ChainModel m(gen.generator(2 + trial % 5));
        CHECK((m.mu().transpose() * m.Q()).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(std::abs(m.mu().sum() - 1.0) < 1e-10);
        CHECK((m.mu().array() > 0).all());
        CHECK(m.gap() > 1e-10);
    }
}

TEST_CASE("semigroup examples and properties") {
    auto m = two_state(1, 1);
    const Observable f = vec({1, -1});
    CHECK(semigroup_apply(m, 0.0, f) == f);
    CHECK(semigroup_apply(m, 1.0, f).isApprox(std::exp(-2.0) * f, 1e-13));
    CHECK(semigroup_apply(m, 3.7, vec({2, 2})).isApprox(vec({2, 2}), 1e-14));
    CHECK_THROWS_AS(semigroup_apply(m, -1.0, f), config_error);

    testgen::Gen gen(2);
    for (int trial = 0; trial < 40; ++trial) {
        ChainModel c(gen.generator(2 + trial % 5));
        Observable g = gen.observable(c.size());
        const double s = gen.uniform(0, 2), t = gen.uniform(0, 2);
        CHECK((semigroup_apply(c, s, semigroup_apply(c, t, g)) - semigroup_apply(c, s + t, g))
                  .cwiseAbs()
                  .maxCoeff() < 1e-10);
        CHECK(std::abs(c.mean(semigroup_apply(c, t, g)) - c.mean(g)) < 1e-10);
        // spectral-gap decay of a centered observable, constant fitted at t = 0
        Observable h = c.center(g);
        const double h0 = h.cwiseAbs().maxCoeff();
        double Cfit = 0.0;
        for (double u = 0.0; u <= 20.0 / c.gap(); u += 0.5 / c.gap())
            Cfit = std::max(Cfit, semigroup_apply(c, u, h).cwiseAbs().maxCoeff() /
                                      (std::exp(-c.gap() * u) * h0));
        CHECK(Cfit < 50.0 * c.eigvec_condition());
    }
}

TEST_CASE("fractional power examples") {
    auto m = two_state(1, 1);
    const Observable f = vec({1, -1});
    CHECK(fractional_power(m, 1.0 - 2.0 / 3.0, f).isApprox(std::pow(2.0, 1.0 / 3.0) * f, 1e-13));
    CHECK(fractional_power(m, -0.5, f).isApprox(std::pow(2.0, -0.5) * f, 1e-13));
    CHECK(fractional_power_quadrature(m, -0.5, f).isApprox(std::pow(2.0, -0.5) * f, 1e-9));
    CHECK(fractional_power(m, 0.3, vec({4, 4})).cwiseAbs().maxCoeff() < 1e-13);
    CHECK(fractional_power_quadrature(m, 0.3, vec({4, 4})).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(fractional_power(m, 0.0, vec({3, 1})).isApprox(vec({1, -1})));
    CHECK_THROWS_AS(fractional_power(m, -0.3, vec({1, 0})), config_error);
    CHECK_THROWS_AS(fractional_power(m, 1.0, f), config_error);
}

TEST_CASE("fractional power: eigen vs quadrature on random chains") {
    testgen::Gen gen(3);
    for (int trial = 0; trial < 10; ++trial) {
        ChainModel c(gen.generator(3));
        Observable f = c.center(gen.observable(3));
        for (double a : {-0.5, -0.2, 0.3, 0.7}) {
            Observable e = fractional_power(c, a, f);
            double tail = 1.0;
            Observable q = fractional_power_quadrature(c, a, f, &tail);
            CHECK((e - q).norm() <= 1e-6 * e.norm());
            CHECK(tail < 1e-12);
        }
        // uncentered input, positive power: constants are annihilated
        Observable g = gen.observable(3);
        CHECK((fractional_power(c, 0.4, g) - fractional_power_quadrature(c, 0.4, g)).norm() <
              1e-6 * fractional_power(c, 0.4, g).norm());
    }
}

TEST_CASE("fractional power composition") {
    testgen::Gen gen(4);
    for (int trial = 0; trial < 30; ++trial) {
        ChainModel c(gen.generator(2 + trial % 5));
        Observable f = c.center(gen.observable(c.size()));
        const double a = gen.uniform(-0.9, 0.9), b = gen.uniform(-0.9, 0.9);
        if (std::abs(a + b) >= 0.95 || std::abs(a) < 1e-3 || std::abs(b) < 1e-3 || std::abs(a + b) < 1e-3)
            continue;
        Observable lhs = fractional_power(c, a, fractional_power(c, b, f));
        Observable rhs = fractional_power(c, a + b, f);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-8 * std::max(1.0, rhs.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("trajectory sampling") {
    ChainModel one(Eigen::MatrixXd::Zero(1, 1));
    auto p1 = sample_trajectory(one, 10.0, 3);
    CHECK(p1.jumps() == 0);
    CHECK(p1.state_at(7.0) == 0);

    auto m = two_state(1, 1);
    const double T = 1e4;
    auto p = sample_trajectory(m, T, 5);
    double occ0 = 0.0, hold = 0.0;
    int nh = 0;
    for (std::size_t i = 0; i < p.times.size(); ++i) {
        const double end = i + 1 < p.times.size() ? p.times[i + 1] : T;
        if (p.states[i] == 0) occ0 += end - p.times[i];
        if (i + 1 < p.times.size() && i > 0) hold += end - p.times[i], ++nh;
    }
    // occupation-time variance: 2 * int_0^inf cov(1_0(Y_0), 1_0(Y_t)) dt / T = 2 * (1/4)/2 / T
    CHECK(std::abs(occ0 / T - 0.5) < 3.0 * std::sqrt(0.25 / T));
    CHECK(std::abs(hold / nh - 1.0) < 3.0 / std::sqrt(nh));
    CHECK(p.state_at(0.0) == p.states[0]);
    for (std::size_t i = 1; i < p.times.size(); ++i) {
        CHECK(p.times[i] > p.times[i - 1]);
        CHECK(p.state_at(p.times[i]) == p.states[i]);
    }
    auto again = sample_trajectory(m, T, 5);
    CHECK(again.times == p.times);
}

TEST_CASE("joint cumulant examples") {
    testgen::Gen gen(5);
    ChainModel c(gen.generator(4));
    Observable f = gen.observable(4), g = gen.observable(4), h = gen.observable(4);
    std::vector<Observable> one{f};
    std::vector<double> t1{0.3};
    CHECK(joint_cumulant(c, one, t1) == doctest::Approx(c.mean(f)));
    std::vector<Observable> two{f, g};
    std::vector<double> t2{0.0, 0.0};
    CHECK(joint_cumulant(c, two, t2) == doctest::Approx(c.inner(f, g) - c.mean(f) * c.mean(g)));
    CHECK(cumulant_coefficient(3) == 2.0);
    CHECK(cumulant_coefficient(4) == -6.0);
    CHECK(cumulant_coefficient(1) == 1.0);
    CHECK(set_partitions(4).size() == 15);
    std::vector<Observable> many(11, f);
    std::vector<double> tm(11, 0.0);
    CHECK_THROWS_AS(joint_cumulant(c, many, tm), config_error);
}

TEST_CASE("cumulants reconstruct moments") {
    testgen::Gen gen(6);
    for (int trial = 0; trial < 10; ++trial) {
        ChainModel c(gen.generator(3 + trial % 3));
        const int k = 2 + trial % 4;
        std::vector<Observable> fs;
        std::vector<double> ts;
        double t = 0.0;
        for (int i = 0; i < k; ++i) {
            fs.push_back(gen.observable(c.size()));
            t += gen.uniform(0, 1);
            ts.push_back(t);
        }
        double rebuilt = 0.0;
        for (const auto& part : set_partitions(k)) {
            double prod = 1.0;
            for (const auto& b : part) {
                std::vector<Observable> bf;
                std::vector<double> bt;
                for (int i : b) bf.push_back(fs[i]), bt.push_back(ts[i]);
                prod *= joint_cumulant(c, bf, bt);
            }
            rebuilt += prod;
        }
        CHECK(rebuilt == doctest::Approx(joint_moment(c, fs, ts)).epsilon(1e-9));
    }
}

TEST_CASE("third cumulant decays at the spectral-gap rate") {
    testgen::Gen gen(7);
    ChainModel c(gen.generator(3));
    Observable f = gen.observable(3);
    std::vector<Observable> fs{f, f, f};
    std::vector<double> ls, gs;
    for (double g = 1.0 / c.gap(); g <= 8.0 / c.gap(); g += 1.0 / c.gap()) {
        std::vector<double> ts{0.0, g, 2 * g};
        ls.push_back(std::log(std::abs(joint_cumulant(c, fs, ts))));
        gs.push_back(g);
    }
    // least-squares slope of log|E_c| against the spacing
    double mg = 0, ml = 0;
    for (std::size_t i = 0; i < gs.size(); ++i) mg += gs[i], ml += ls[i];
    mg /= gs.size(), ml /= gs.size();
    double num = 0, den = 0;
    for (std::size_t i = 0; i < gs.size(); ++i) num += (gs[i] - mg) * (ls[i] - ml), den += (gs[i] - mg) * (gs[i] - mg);
    const double rate = -num / den;
    CHECK(rate > 0.5 * c.gap());
    CHECK(rate < 2.0 * c.gap());
}
