#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <functional>
#include <queue>
#include <vector>

#include "fracavg/common.hpp"

namespace fracavg::detail {

// Adaptive Gauss-Kronrod (7/15) for matrix-valued integrands; Boost's
// integrators are scalar-only.
struct MatrixQuadResult {
    Eigen::MatrixXd value;
    double error = 0.0;
    int evaluations = 0;
};

inline MatrixQuadResult integrate_matrix(const std::function<Eigen::MatrixXd(double)>& f, double a, double b,
                                         double abs_tol, double rel_tol, int max_intervals = 4000) {
    static constexpr std::array<double, 8> xk = {
        0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
        0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
        0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
        0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
    static constexpr std::array<double, 8> wk = {
        0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
        0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
        0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
        0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
    static constexpr std::array<double, 4> wg = {
        0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
        0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

    struct Piece {
        double a, b, err;
        Eigen::MatrixXd val;
        bool operator<(const Piece& o) const { return err < o.err; }
    };
    int evals = 0;
    auto rule = [&](double lo, double hi) {
        const double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
        Eigen::MatrixXd fc = f(c);
        Eigen::MatrixXd K = wk[7] * fc, G = wg[3] * fc;
        for (int j = 0; j < 7; ++j) {
            Eigen::MatrixXd s = f(c - h * xk[j]) + f(c + h * xk[j]);
            K += wk[j] * s;
            if (j % 2 == 1) G += wg[j / 2] * s;
        }
        evals += 15;
        return Piece{lo, hi, h * (K - G).cwiseAbs().maxCoeff(), h * K};
    };
    std::priority_queue<Piece> q;
    Piece first = rule(a, b);
    Eigen::MatrixXd total = first.val;
    double err = first.err;
    q.push(std::move(first));
    int intervals = 1;
    while (err > std::max(abs_tol, rel_tol * total.cwiseAbs().maxCoeff())) {
        if (intervals >= max_intervals) {
            throw numerical_error("adaptive quadrature did not converge: achieved error " + std::to_string(err));
        }
        Piece p = q.top();
        q.pop();
        const double mid = 0.5 * (p.a + p.b);
        Piece l = rule(p.a, mid), r = rule(mid, p.b);
        total += l.val + r.val - p.val;
        err += l.err + r.err - p.err;
        q.push(std::move(l));
        q.push(std::move(r));
        ++intervals;
    }
    // recompute from pieces to shed accumulated rounding
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(total.rows(), total.cols());
    double esum = 0.0;
    while (!q.empty()) {
        sum += q.top().val;
        esum += q.top().err;
        q.pop();
    }
    return {sum, esum, evals};
}

}  // namespace fracavg::detail
