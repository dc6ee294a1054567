#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fracavg/slowfast.hpp"

using namespace fracavg;

namespace {

ChainModel two_state(double a, double b) {
    Eigen::MatrixXd Q(2, 2);
    Q << -a, a, b, -b;
    return ChainModel(Q);
}

Eigen::VectorXd v1(double a) { return Eigen::VectorXd::Constant(1, a); }

CoefficientField scalar_field(BasisFunction b, std::vector<double> c) {
    std::vector<Eigen::MatrixXd> per;
    for (double x : c) per.push_back(Eigen::MatrixXd::Constant(1, 1, x));
    return CoefficientField(1, 1, c.size(), {std::move(b)}, {per});
}

SlowFastSpec base_spec(double H) {
    return SlowFastSpec{two_state(1, 1), scalar_field(BasisFunction::constant(), {1, -1}), CoefficientField{},
                        HurstParam(H), 0.05, 0.01, 0.5, 2.5e-4};
}

}  // namespace

TEST_CASE("zero coefficients leave the points fixed") {
    auto spec = base_spec(0.4);
    spec.F = CoefficientField::zero(1, 1, 2);
    spec.F0 = CoefficientField::zero(1, 1, 2);
    auto tr = solve_slow_fast(spec, {v1(0.3), v1(-1.0)}, 7);
    CHECK(tr.endpoint()(0, 0) == 0.3);
    CHECK(tr.endpoint()(1, 0) == -1.0);
}

TEST_CASE("state-only drift integrates the fast path") {
    auto spec = base_spec(0.4);
    spec.F = CoefficientField::zero(1, 1, 2);
    spec.F0 = scalar_field(BasisFunction::constant(), {2.0, -1.0});
    SlowFastSolver solver(spec);
    auto tr = solver.solve({v1(0.0)}, 3);
    ChainPath Y = solver.fast_path(3, 0);
    // exact int_0^T c(Y(t/eps)) dt
    double exact = 0.0;
    for (std::size_t i = 0; i < Y.states.size(); ++i) {
        const double a = Y.times[i] * spec.epsilon;
        const double b = std::min(i + 1 < Y.times.size() ? Y.times[i + 1] * spec.epsilon : spec.T, spec.T);
        if (a < spec.T) exact += (Y.states[i] == 0 ? 2.0 : -1.0) * (b - a);
    }
    // Simpson weights misplace at most h per jump
    CHECK(std::abs(tr.endpoint()(0, 0) - exact) <= 3.0 * spec.h * static_cast<double>(Y.jumps() + 1));
    // slope -> <c>_mu = 0.5 as eps -> 0
    spec.epsilon = 0.002;
    spec.h = 1e-4;
    spec.T = 2.0;
    auto fast = solve_slow_fast(spec, {v1(0.0)}, 4);
    CHECK(fast.endpoint()(0, 0) / spec.T == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("linear case reproduces the mollified path increment") {
    auto spec = base_spec(0.5);
    spec.F = scalar_field(BasisFunction::constant(), {1.0, 1.0});
    SlowFastSolver solver(spec);
    auto tr = solver.solve({v1(0.0)}, 11);
    auto dB = solver.noise(11, 0);
    // Simpson on the stage samples: exactly what RK4 integrates
    double simpson = 0.0;
    for (std::size_t i = 0; i < solver.steps(); ++i)
        simpson += spec.h / 6.0 * (dB.values(0, 2 * i) + 4.0 * dB.values(0, 2 * i + 1) + dB.values(0, 2 * i + 2));
    CHECK(std::abs(tr.endpoint()(0, 0) - simpson) < 1e-10);
    // and B^delta(T) - B^delta(0) from the same fBM sample, up to Simpson error
    auto Bd = mollified_path(solver.fbm(11, 0), solver.mollifier(), spec.ext, solver.extension_seed(11, 0), solver.sub());
    const double inc = Bd.values(0, 2 * solver.steps()) - Bd.values(0, 0);
    CHECK(std::abs(tr.endpoint()(0, 0) - inc) < 1e-6 * (1.0 + std::abs(inc)));
}

TEST_CASE("configuration errors") {
    auto spec = base_spec(0.4);
    spec.h = 1e-3;  // > min(delta, eps)/20
    CHECK_THROWS_AS(SlowFastSolver{spec}, config_error);
    spec = base_spec(0.75);
    spec.F = scalar_field(BasisFunction::constant(), {1.0, 1.0});
    CHECK_THROWS_AS(SlowFastSolver{spec}, config_error);
    spec = base_spec(0.4);
    spec.T = 0.50001;
    CHECK_THROWS_AS(SlowFastSolver{spec}, config_error);
}

TEST_CASE("blow-up is detected") {
    auto spec = base_spec(0.4);
    spec.F0 = scalar_field(BasisFunction::constant(), {1e12, 1e12});
    CHECK_THROWS_WITH_AS(solve_slow_fast(spec, {v1(0.0)}, 1), doctest::Contains("blow-up"), numerical_error);
}

TEST_CASE("n-point motion shares the noise") {
    auto spec = base_spec(0.4);
    spec.F = scalar_field(BasisFunction::sin(v1(1.0), 0.3), {1, -1});
    SlowFastSolver solver(spec);
    auto two = solver.solve({v1(0.2), v1(0.2), v1(1.5)}, 5, 0, 100);
    auto one = solver.solve({v1(1.5)}, 5);
    CHECK(two.endpoint()(0, 0) == two.endpoint()(1, 0));
    CHECK(two.endpoint()(2, 0) == one.endpoint()(0, 0));
    CHECK(two.times.size() == solver.steps() / 100 + 1);
    // reproducible
    CHECK(solver.solve({v1(1.5)}, 5).endpoint()(0, 0) == one.endpoint()(0, 0));
    CHECK(solver.solve({v1(1.5)}, 6).endpoint()(0, 0) != one.endpoint()(0, 0));
}

TEST_CASE("RK4 order on a frozen fast state") {
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(1, 1);
    std::vector<Eigen::MatrixXd> c0{Eigen::MatrixXd::Constant(1, 1, 3.0)};
    CoefficientField F0(1, 1, 1, {BasisFunction::cos(v1(2.0), 0.0)}, {c0});
    // noiseless: pure fourth order
    std::vector<double> ends;
    for (double h : {2e-2, 1e-2, 5e-3}) {
        SlowFastSpec spec{ChainModel(Q), CoefficientField::zero(1, 1, 1), F0, HurstParam(0.4), 1.0, 1.0, 2.0, h};
        ends.push_back(SlowFastSolver(spec).solve({v1(0.1)}, 9).endpoint()(0, 0));
    }
    CHECK((ends[0] - ends[1]) / (ends[1] - ends[2]) == doctest::Approx(16.0).epsilon(0.1));
    // with noise on a fixed fBM grid the refinement error drops to the
    // rounding floor of the sampled derivative
    auto F = scalar_field(BasisFunction::sin(v1(1.0), 0.3), {1.5});
    ends.clear();
    for (double h : {8e-4, 4e-4, 2e-4}) {
        SlowFastSpec spec{ChainModel(Q), F, F0, HurstParam(0.4), 0.05, 0.016, 0.8, h};
        spec.fbm_dt = 4e-3;
        ends.push_back(SlowFastSolver(spec).solve({v1(0.1)}, 9).endpoint()(0, 0));
    }
    CHECK(std::abs(ends[0] - ends[1]) < 1e-8);
    CHECK(std::abs(ends[1] - ends[2]) < 1e-8);
}

TEST_CASE("delta-robustness: halving delta changes the endpoint less and less") {
    auto spec = base_spec(0.4);
    spec.F = scalar_field(BasisFunction::sin(v1(1.0), 0.3), {1, -1});
    spec.h = 5e-5;
    spec.fbm_dt = 2.5e-4;
    std::vector<double> d1, d2;
    for (std::uint64_t seed = 0; seed < 9; ++seed) {
        std::vector<double> e;
        for (double delta : {4e-3, 2e-3, 1e-3}) {
            spec.delta = delta;
            e.push_back(SlowFastSolver(spec).solve({v1(0.3)}, seed).endpoint()(0, 0));
        }
        d1.push_back(std::abs(e[0] - e[1]));
        d2.push_back(std::abs(e[1] - e[2]));
    }
    std::nth_element(d1.begin(), d1.begin() + 4, d1.end());
    std::nth_element(d2.begin(), d2.begin() + 4, d2.end());
    CHECK(d2[4] < d1[4]);
}

TEST_CASE("limit SDE: deterministic flow when Sigma vanishes") {
    auto chain = two_state(1, 1);
    EffectiveDiffusion ed(chain, CoefficientField::zero(1, 1, 2), HurstParam(0.4),
                          scalar_field(BasisFunction::constant(), {0.5, 1.5}));
    auto tr = solve_limit_npoint(ed, {v1(1.0)}, 2.0, 0.01, 3);
    CHECK(tr.endpoint()(0, 0) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("limit SDE: Gaussian law of the scalar model") {
    for (double H : {0.4, 0.75}) {
        EffectiveDiffusion ed(two_state(1, 1), scalar_field(BasisFunction::constant(), {1, -1}), HurstParam(H));
        const double target = 2.0 * ed.sigma(v1(0), v1(0))(0, 0);
        const int N = 4000;
        double s = 0, s2 = 0, s4 = 0;
        for (int i = 0; i < N; ++i) {
            const double x = solve_limit_npoint(ed, {v1(0.0)}, 1.0, 0.01, 21, i).endpoint()(0, 0);
            s += x, s2 += x * x, s4 += x * x * x * x;
        }
        const double var = s2 / N - (s / N) * (s / N);
        const double se = std::sqrt((s4 / N - (s2 / N) * (s2 / N)) / N);
        CHECK(std::abs(var - target) < 3 * se);
    }
}

TEST_CASE("limit SDE: coincident particles stay together") {
    auto F = scalar_field(BasisFunction::gauss(v1(0.0), 1.0), {1, -1});
    EffectiveDiffusion ed(two_state(1, 1), F, HurstParam(0.4));
    auto tr = solve_limit_npoint(ed, {v1(0.2), v1(0.2)}, 1.0, 0.01, 8, 0, 10);
    for (const auto& X : tr.states) CHECK(X(0, 0) == X(1, 0));
    CHECK(tr.times.size() == 11);
}

TEST_CASE("generator consistency of the limit SDE") {
    auto chain = two_state(1, 3);
    auto F = scalar_field(BasisFunction::tanh(v1(1.0), 0.2), {1.0, -3.0});
    std::vector<Eigen::MatrixXd> c0{Eigen::MatrixXd::Constant(1, 1, 0.3), Eigen::MatrixXd::Constant(1, 1, 0.3)};
    CoefficientField F0(1, 1, 2, {BasisFunction::constant()}, {c0});
    EffectiveDiffusion ed(chain, F, HurstParam(0.4), F0);
    const double x0 = 0.4, t = 0.02;
    auto g1 = [](const Eigen::VectorXd& x) { return x[0]; };
    auto g2 = [](const Eigen::VectorXd& x) { return x[0] * x[0]; };
    const int N = 40000;
    double m1 = 0, m2 = 0, q1 = 0, q2 = 0;
    for (int i = 0; i < N; ++i) {
        const double x = solve_limit_npoint(ed, {v1(x0)}, t, t / 100, 4, i).endpoint()(0, 0);
        const double a = (x - x0) / t, b = (x * x - x0 * x0) / t;
        m1 += a, q1 += a * a, m2 += b, q2 += b * b;
    }
    m1 /= N, m2 /= N;
    const double se1 = std::sqrt((q1 / N - m1 * m1) / N), se2 = std::sqrt((q2 / N - m2 * m2) / N);
    CHECK(std::abs(m1 - ed.generator_apply(g1, v1(x0))) < 4 * se1 + 0.05);
    CHECK(std::abs(m2 - ed.generator_apply(g2, v1(x0))) < 4 * se2 + 0.05);
}
