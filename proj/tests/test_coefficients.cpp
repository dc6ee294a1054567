#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fracavg/coefficients.hpp"
#include "generators.hpp"

using namespace fracavg;

namespace {

Eigen::VectorXd v1(double a) { return Eigen::VectorXd::Constant(1, a); }

Eigen::MatrixXd m1(double a) { return Eigen::MatrixXd::Constant(1, 1, a); }

CoefficientField scalar_field(BasisFunction b, std::vector<double> c) {
    std::vector<Eigen::MatrixXd> per;
    for (double x : c) per.push_back(m1(x));
    return CoefficientField(1, 1, c.size(), {std::move(b)}, {per});
}

// random 2-d field with every menu basis, d = 2, m = 2
CoefficientField random_field(testgen::Gen& g, std::size_t n) {
    std::vector<BasisFunction> basis;
    auto vec2 = [&] {
        Eigen::VectorXd k(2);
        k << g.uniform(-1.5, 1.5), g.uniform(-1.5, 1.5);
        return k;
    };
    basis.push_back(BasisFunction::constant());
    basis.push_back(BasisFunction::sin(vec2(), g.uniform(-1, 1)));
    basis.push_back(BasisFunction::cos(vec2(), g.uniform(-1, 1)));
    basis.push_back(BasisFunction::tanh(vec2(), g.uniform(-1, 1)));
    basis.push_back(BasisFunction::gauss(vec2(), g.uniform(0.5, 2.0)));
    std::vector<std::vector<Eigen::MatrixXd>> coeffs(basis.size());
    for (auto& per : coeffs)
        for (std::size_t y = 0; y < n; ++y) {
            Eigen::MatrixXd c(2, 2);
            c << g.uniform(-1, 1), g.uniform(-1, 1), g.uniform(-1, 1), g.uniform(-1, 1);
            per.push_back(c);
        }
    return CoefficientField(2, 2, n, basis, coeffs);
}

}  // namespace

TEST_CASE("evaluate examples") {
    auto F = scalar_field(BasisFunction::constant(), {2.0, -1.0});
    CHECK(F.evaluate(v1(0.3), 1)(0, 0) == -1.0);
    CHECK(F.evaluate(v1(0.3), 0, {1})(0, 0) == 0.0);
    auto T = scalar_field(BasisFunction::tanh(v1(1.0), 0.0), {3.0});
    const double x = 0.7, sech = 1.0 / std::cosh(x);
    CHECK(T.evaluate(v1(x), 0, {1})(0, 0) == doctest::Approx(3.0 * sech * sech));
    CHECK_THROWS_AS(T.evaluate(v1(x), 0, {5}), config_error);
    CHECK_THROWS_AS(T.evaluate(v1(x), 1), config_error);
}

TEST_CASE("gaussian bump decays") {
    auto G = scalar_field(BasisFunction::gauss(v1(0.5), 1.2), {1.0, -2.0});
    for (int r = 0; r <= 4; ++r) CHECK(decay_sup(G, 2.0, {r}) < 50.0);
    CHECK(std::abs(G.evaluate(v1(50.0), 1)(0, 0)) < 1e-100);
}

TEST_CASE("mu average and centering") {
    Eigen::VectorXd mu(2);
    mu << 0.75, 0.25;
    auto F = scalar_field(BasisFunction::constant(), {1.0, 3.0});
    CHECK(F.mu_average(v1(0.0), mu)(0, 0) == doctest::Approx(1.5));
    Eigen::VectorXd half(2);
    half << 0.5, 0.5;
    auto C = F.center(half);
    CHECK(C.evaluate(v1(0.0), 0)(0, 0) == doctest::Approx(-1.0));
    CHECK(C.evaluate(v1(0.0), 1)(0, 0) == doctest::Approx(1.0));
    auto K = scalar_field(BasisFunction::sin(v1(1.0), 0.2), {4.0, 4.0});
    CHECK(K.center(mu).is_zero());
}

TEST_CASE("centering is idempotent and averages match evaluate") {
    testgen::Gen g(11);
    for (int trial = 0; trial < 20; ++trial) {
        ChainModel chain(g.generator(3));
        auto F = random_field(g, 3);
        auto C = F.center(chain.mu());
        auto CC = C.center(chain.mu());
        CHECK(C.is_centered(chain.mu()));
        Eigen::VectorXd x(2);
        x << g.uniform(-3, 3), g.uniform(-3, 3);
        CHECK((CC.evaluate(x, 1) - C.evaluate(x, 1)).cwiseAbs().maxCoeff() < 1e-14);
        Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(2, 2);
        for (int y = 0; y < 3; ++y) avg += chain.mu()[y] * F.evaluate(x, y);
        CHECK((avg - F.mu_average(x, chain.mu())).cwiseAbs().maxCoeff() < 1e-14);
        CHECK(C.mu_average(x, chain.mu()).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("finite differences match closed-form derivatives with Richardson ratio 4") {
    testgen::Gen g(12);
    for (int trial = 0; trial < 10; ++trial) {
        auto F = random_field(g, 2);
        Eigen::VectorXd x(2);
        x << g.uniform(-2, 2), g.uniform(-2, 2);
        for (int dir = 0; dir < 2; ++dir) {
            MultiIndex e{0, 0};
            e[dir] = 1;
            const double exact = F.evaluate(x, 0, e)(0, 1);
            auto cd = [&](double h) {
                Eigen::VectorXd xp = x, xm = x;
                xp[dir] += h, xm[dir] -= h;
                return (F.evaluate(xp, 0)(0, 1) - F.evaluate(xm, 0)(0, 1)) / (2 * h);
            };
            const double e1 = std::abs(cd(1e-3) - exact), e2 = std::abs(cd(5e-4) - exact);
            if (e2 > 1e-10) CHECK(std::abs(e1 / e2 / 4.0 - 1.0) < 0.1);
            CHECK(std::abs(cd(1e-3) - exact) < 1e-5);
            CHECK(std::abs(cd(1e-4) - exact) < 1e-7);
        }
        // higher orders: derivative of the order-r derivative
        MultiIndex l3{2, 1}, l4{2, 2}, l4b{3, 1};
        const double h = 1e-4;
        Eigen::VectorXd xp = x, xm = x;
        xp[1] += h, xm[1] -= h;
        const double fd = (F.evaluate(xp, 1, l3)(1, 0) - F.evaluate(xm, 1, l3)(1, 0)) / (2 * h);
        CHECK(fd == doctest::Approx(F.evaluate(x, 1, l4)(1, 0)).epsilon(1e-5));
        xp = x, xm = x;
        xp[0] += h, xm[0] -= h;
        const double fd0 = (F.evaluate(xp, 1, l3)(1, 0) - F.evaluate(xm, 1, l3)(1, 0)) / (2 * h);
        CHECK(fd0 == doctest::Approx(F.evaluate(x, 1, l4b)(1, 0)).epsilon(1e-5));
    }
}

TEST_CASE("diffusion fields must be centered for H > 1/2") {
    Eigen::MatrixXd Q(2, 2);
    Q << -1, 1, 1, -1;
    ChainModel chain(Q);
    auto F = scalar_field(BasisFunction::constant(), {1.0, 3.0});
    CHECK_THROWS_AS(prepare_diffusion(F, chain, 0.75, false), config_error);
    std::ostringstream warn;
    auto C = prepare_diffusion(F, chain, 0.75, true, &warn);
    CHECK(C.is_centered(chain.mu()));
    CHECK(warn.str().find("warning") != std::string::npos);
    CHECK_NOTHROW(prepare_diffusion(F, chain, 0.4, false));
}

TEST_CASE("callback basis") {
    auto cb = BasisFunction::callback([](const Eigen::VectorXd& x, const MultiIndex& l) {
        return l[0] == 0 ? x[0] * x[0] : (l[0] == 1 ? 2 * x[0] : (l[0] == 2 ? 2.0 : 0.0));
    });
    auto F = scalar_field(cb, {1.0, 2.0});
    CHECK(F.evaluate(v1(3.0), 1)(0, 0) == 18.0);
    CHECK(F.evaluate(v1(3.0), 1, {2})(0, 0) == 4.0);
}
