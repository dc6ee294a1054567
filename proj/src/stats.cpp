#include "fracavg/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fracavg/common.hpp"

namespace fracavg {

Estimate batch_estimate(std::span<const double> x, const std::function<double(std::span<const double>)>& stat,
                        std::size_t batches) {
    if (batches < 2) throw config_error("batch means: need at least 2 batches");
    if (x.size() < 2 * batches) throw config_error("batch means: need at least 2 samples per batch");
    const std::size_t per = x.size() / batches;
    std::vector<double> v(batches);
    for (std::size_t b = 0; b < batches; ++b) v[b] = stat(x.subspan(b * per, per));
    // the full-sample statistic has about 1/batches of the per-batch variance
    return {stat(x), std::sqrt(sample_variance(v) / static_cast<double>(batches))};
}

Estimate batch_mean(std::span<const double> x, std::size_t batches) {
    return batch_estimate(x, [](std::span<const double> s) { return sample_mean(s); }, batches);
}

Estimate batch_variance(std::span<const double> x, std::size_t batches) {
    return batch_estimate(x, [](std::span<const double> s) { return sample_variance(s); }, batches);
}

Estimate batch_covariance(std::span<const double> x, std::span<const double> y, std::size_t batches) {
    if (x.size() != y.size()) throw config_error("batch covariance: samples differ in size");
    if (batches < 2) throw config_error("batch means: need at least 2 batches");
    if (x.size() < 2 * batches) throw config_error("batch means: need at least 2 samples per batch");
    const std::size_t per = x.size() / batches;
    std::vector<double> v(batches);
    for (std::size_t b = 0; b < batches; ++b) v[b] = sample_covariance(x.subspan(b * per, per), y.subspan(b * per, per));
    return {sample_covariance(x, y), std::sqrt(sample_variance(v) / static_cast<double>(batches))};
}

double sample_mean(std::span<const double> x) {
    if (x.empty()) throw config_error("sample mean: empty sample");
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) { return sample_covariance(x, x); }

double sample_covariance(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw config_error("sample covariance: need two equal samples of size >= 2");
    const double mx = sample_mean(x), my = sample_mean(y);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - mx) * (y[i] - my);
    return s / static_cast<double>(x.size() - 1);
}

Cumulants k_statistics(std::span<const double> x) {
    const double n = static_cast<double>(x.size());
    if (x.size() < 4) throw config_error("k-statistics: need at least 4 samples");
    const double m = sample_mean(x);
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : x) {
        const double d = v - m, d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    Cumulants k;
    k.k2 = n / (n - 1) * m2;
    k.k3 = n * n / ((n - 1) * (n - 2)) * m3;
    k.k4 = n * n * ((n + 1) * m4 - 3 * (n - 1) * m2 * m2) / ((n - 1) * (n - 2) * (n - 3));
    return k;
}

double ks_normal_pvalue(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 8) throw config_error("KS test: need at least 8 samples");
    const double m = sample_mean(x), s = std::sqrt(sample_variance(x));
    if (!(s > 0.0)) return 0.0;
    std::vector<double> z(x.begin(), x.end());
    for (double& v : z) v = (v - m) / s;
    std::sort(z.begin(), z.end());
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double F = 0.5 * std::erfc(-z[i] / std::sqrt(2.0));
        d = std::max({d, F - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - F});
    }
    // Kolmogorov tail with the small-sample correction of Stephens
    const double sq = std::sqrt(static_cast<double>(n));
    const double lam = (sq + 0.12 + 0.11 / sq) * d;
    double p = 0.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = 2.0 * ((j % 2) ? 1.0 : -1.0) * std::exp(-2.0 * j * j * lam * lam);
        p += term;
        if (std::abs(term) < 1e-16) break;
    }
    return std::clamp(p, 0.0, 1.0);
}

namespace {

// sum_{i<j} |x_i - x_j| of a sorted sample
double pair_abs_sum(const std::vector<double>& s) {
    double acc = 0.0, prefix = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        acc += static_cast<double>(i) * s[i] - prefix;
        prefix += s[i];
    }
    return acc;
}

double energy_sorted(const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& pooled) {
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double saa = pair_abs_sum(a), sbb = pair_abs_sum(b), spp = pair_abs_sum(pooled);
    const double sab = spp - saa - sbb;  // sum over cross pairs
    return 2.0 * sab / (na * nb) - 2.0 * saa / (na * na) - 2.0 * sbb / (nb * nb);
}

}  // namespace

double energy_distance(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw config_error("energy distance: empty sample");
    std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end()), sp(sa);
    sp.insert(sp.end(), sb.begin(), sb.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    std::sort(sp.begin(), sp.end());
    return energy_sorted(sa, sb, sp);
}

double energy_distance(const std::vector<Eigen::VectorXd>& a, const std::vector<Eigen::VectorXd>& b) {
    if (a.empty() || b.empty()) throw config_error("energy distance: empty sample");
    auto mean_dist = [](const auto& x, const auto& y) {
        double s = 0.0;
        for (const auto& u : x)
            for (const auto& v : y) s += (u - v).norm();
        return s / static_cast<double>(x.size() * y.size());
    };
    return 2.0 * mean_dist(a, b) - mean_dist(a, a) - mean_dist(b, b);
}

double energy_permutation_pvalue(std::span<const double> a, std::span<const double> b, std::size_t n_perm,
                                 std::uint64_t seed) {
    const double obs = energy_distance(a, b);
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    std::vector<double> sorted_pool(pooled);
    std::sort(sorted_pool.begin(), sorted_pool.end());
    Rng rng = make_rng(seed, 0xed);
    std::size_t hits = 0;
    std::vector<double> pa(a.size()), pb(b.size());
    for (std::size_t k = 0; k < n_perm; ++k) {
        std::shuffle(pooled.begin(), pooled.end(), rng);
        std::copy(pooled.begin(), pooled.begin() + static_cast<std::ptrdiff_t>(a.size()), pa.begin());
        std::copy(pooled.begin() + static_cast<std::ptrdiff_t>(a.size()), pooled.end(), pb.begin());
        std::sort(pa.begin(), pa.end());
        std::sort(pb.begin(), pb.end());
        if (energy_sorted(pa, pb, sorted_pool) >= obs) ++hits;
    }
    return static_cast<double>(1 + hits) / static_cast<double>(1 + n_perm);
}

double energy_permutation_pvalue(const std::vector<Eigen::VectorXd>& a, const std::vector<Eigen::VectorXd>& b,
                                 std::size_t n_perm, std::uint64_t seed) {
    if (a.empty() || b.empty()) throw config_error("energy distance: empty sample");
    const std::size_t na = a.size(), n = na + b.size();
    Eigen::MatrixXd D(n, n);
    auto at = [&](std::size_t i) -> const Eigen::VectorXd& { return i < na ? a[i] : b[i - na]; };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) D(i, j) = D(j, i) = (at(i) - at(j)).norm();
    const double total = D.sum();
    // with A the label-a set: ED = 2 S_ab/(na nb) - S_aa/na^2 - S_bb/nb^2
    auto stat = [&](const std::vector<std::size_t>& lab) {
        double saa = 0.0, sbb = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (lab[i] && lab[j]) saa += D(i, j);
                else if (!lab[i] && !lab[j]) sbb += D(i, j);
            }
        const double sab = 0.5 * (total - saa - sbb);
        const double fa = static_cast<double>(na), fb = static_cast<double>(n - na);
        return 2.0 * sab / (fa * fb) - saa / (fa * fa) - sbb / (fb * fb);
    };
    std::vector<std::size_t> lab(n, 0);
    for (std::size_t i = 0; i < na; ++i) lab[i] = 1;
    const double obs = stat(lab);
    Rng rng = make_rng(seed, 0xee);
    std::size_t hits = 0;
    for (std::size_t k = 0; k < n_perm; ++k) {
        std::shuffle(lab.begin(), lab.end(), rng);
        if (stat(lab) >= obs) ++hits;
    }
    return static_cast<double>(1 + hits) / static_cast<double>(1 + n_perm);
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw config_error("linear fit: need two equal samples of size >= 2");
    const double n = static_cast<double>(x.size());
    const double mx = sample_mean(x), my = sample_mean(y);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw config_error("linear fit: x values are all equal");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    if (x.size() > 2) {
        double rss = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = y[i] - f.intercept - f.slope * x[i];
            rss += r * r;
        }
        f.slope_se = std::sqrt(rss / (n - 2) / sxx);
    }
    return f;
}

LinearFit loglog_fit(std::span<const double> x, std::span<const double> y) {
    std::vector<double> lx(x.size()), ly(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw numerical_error("log-log fit: nonpositive value");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
    }
    return linear_fit(lx, ly);
}

double z_score(const Estimate& a, const Estimate& b) {
    const double s = std::sqrt(a.se * a.se + b.se * b.se);
    const double d = a.value - b.value;
    if (s == 0.0) return d == 0.0 ? 0.0 : std::copysign(INFINITY, d);
    return d / s;
}

double z_score(const Estimate& a, double target) { return z_score(a, Estimate{target, 0.0}); }

}  // namespace fracavg
