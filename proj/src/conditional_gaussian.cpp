#include "fracavg/conditional_gaussian.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace fracavg {

namespace {

void check(std::span<const double> tau, std::span<const double> a, std::span<const double> b) {
    if (tau.size() < 2 || a.size() + 1 != tau.size() || b.size() + 1 != tau.size())
        throw config_error("piecewise integrand: need tau.size() == values.size() + 1 >= 2");
}

// sum_{i<m} c_i (x_m - x_i)^p, vectorizable
inline double power_row(const double* x, const double* c, std::size_t m, double p) {
    const double xm = x[m];
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) acc += c[i] * std::exp(p * std::log(xm - x[i]));
    return acc;
}

}  // namespace

double wiener_covariance(double H, std::span<const double> tau, std::span<const double> a,
                         std::span<const double> b) {
    check(tau, a, b);
    const std::size_t n = a.size();
    const double p = 2.0 * H;
    // summation by parts: int a dB = sum_j wa_j B(tau_j)
    std::vector<double> wa(n + 1), wb(n + 1);
    for (std::size_t j = 0; j <= n; ++j) {
        wa[j] = (j > 0 ? a[j - 1] : 0.0) - (j < n ? a[j] : 0.0);
        wb[j] = (j > 0 ? b[j - 1] : 0.0) - (j < n ? b[j] : 0.0);
    }
    // weights sum to zero, so Cov = -1/2 sum_ij wa_i wb_j |tau_i - tau_j|^{2H}
    double acc = 0.0;
    std::vector<double> c(n + 1);
    for (std::size_t m = 1; m <= n; ++m) {
        // pairs (i, m), i < m: wa_i wb_m + wa_m wb_i
        for (std::size_t i = 0; i < m; ++i) c[i] = wa[i] * wb[m] + wa[m] * wb[i];
        acc += power_row(tau.data(), c.data(), m, p);
    }
    return -0.5 * acc;
}

double iterated_mean(double H, std::span<const double> tau, std::span<const double> a,
                     std::span<const double> b) {
    check(tau, a, b);
    const std::size_t n = a.size();
    const double p = 2.0 * H;
    std::vector<double> e(n);
    for (std::size_t i = 0; i < n; ++i) e[i] = a[i] - (i > 0 ? a[i - 1] : 0.0);
    // P_m = sum_{i<m} e_i (tau_m - tau_i)^{2H}
    std::vector<double> P(n + 1, 0.0);
    for (std::size_t m = 1; m <= n; ++m) P[m] = power_row(tau.data(), e.data(), m, p);
    double acc = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
        const double d = std::pow(tau[l + 1] - tau[l], p);
        // off-diagonal k < l, then the diagonal half
        if (l > 0) acc += 0.5 * b[l] * (P[l + 1] - P[l] - a[l] * d);
        acc += 0.5 * a[l] * b[l] * d;
    }
    return acc;
}

double iterated_variance(double H, std::span<const double> tau, std::span<const double> a,
                         std::span<const double> b) {
    check(tau, a, b);
    const Eigen::Index n = static_cast<Eigen::Index>(a.size());
    const double p = 2.0 * H;
    auto D = [&](Eigen::Index i, Eigen::Index j) { return std::pow(std::abs(tau[j] - tau[i]), p); };
    Eigen::MatrixXd G(n, n), K = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index k = 0; k < n; ++k)
        for (Eigen::Index l = 0; l <= k; ++l)
            G(k, l) = G(l, k) = 0.5 * (D(l, k + 1) + D(l + 1, k) - D(k + 1, l + 1) - D(k, l));
    for (Eigen::Index k = 0; k < n; ++k) {
        K(k, k) = 0.5 * a[k] * b[k];
        for (Eigen::Index l = k + 1; l < n; ++l) K(k, l) = a[k] * b[l];
    }
    const Eigen::MatrixXd Ks = 0.5 * (K + K.transpose());
    const Eigen::MatrixXd M = Ks * G;
    return 2.0 * (M.array() * M.transpose().array()).sum();
}

PiecewiseStates restrict_path(const ChainPath& path, double s, double t) {
    if (!(s < t) || s < 0.0 || t > path.horizon) throw config_error("restrict_path: interval outside the path");
    PiecewiseStates out;
    out.tau.push_back(s);
    out.states.push_back(path.state_at(s));
    auto it = std::upper_bound(path.times.begin(), path.times.end(), s);
    for (; it != path.times.end() && *it < t; ++it) {
        out.tau.push_back(*it);
        out.states.push_back(path.states[static_cast<std::size_t>(it - path.times.begin())]);
    }
    out.tau.push_back(t);
    return out;
}

std::vector<double> along(const PiecewiseStates& p, const Observable& f) {
    std::vector<double> v(p.states.size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = f[p.states[k]];
    return v;
}

}  // namespace fracavg
