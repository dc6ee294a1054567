#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace fracavg {

struct Estimate {
    double value = 0.0;
    double se = 0.0;
};

// Statistic of the whole sample with a batch-means standard error: the
// statistic is recomputed on each of `batches` contiguous batches and the
// spread of those values gives the error.
Estimate batch_estimate(std::span<const double> x, const std::function<double(std::span<const double>)>& stat,
                        std::size_t batches = 20);

Estimate batch_mean(std::span<const double> x, std::size_t batches = 20);
Estimate batch_variance(std::span<const double> x, std::size_t batches = 20);
Estimate batch_covariance(std::span<const double> x, std::span<const double> y, std::size_t batches = 20);

double sample_mean(std::span<const double> x);
double sample_variance(std::span<const double> x);
double sample_covariance(std::span<const double> x, std::span<const double> y);

// Unbiased k-statistics k2, k3, k4.
struct Cumulants {
    double k2 = 0.0, k3 = 0.0, k4 = 0.0;
};
Cumulants k_statistics(std::span<const double> x);

// Kolmogorov-Smirnov test of the standardized sample against N(0, 1);
// asymptotic p-value.
double ks_normal_pvalue(std::span<const double> x);

// Energy distance 2E|X-Y| - E|X-X'| - E|Y-Y'| (V-statistic form).
double energy_distance(std::span<const double> a, std::span<const double> b);
double energy_distance(const std::vector<Eigen::VectorXd>& a, const std::vector<Eigen::VectorXd>& b);

// Permutation p-value of the energy distance, (1 + #{perm >= obs}) / (1 + n_perm).
double energy_permutation_pvalue(std::span<const double> a, std::span<const double> b, std::size_t n_perm,
                                 std::uint64_t seed);
double energy_permutation_pvalue(const std::vector<Eigen::VectorXd>& a, const std::vector<Eigen::VectorXd>& b,
                                 std::size_t n_perm, std::uint64_t seed);

struct LinearFit {
    double slope = 0.0, intercept = 0.0, slope_se = 0.0;
};
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);
// slope of log y against log x
LinearFit loglog_fit(std::span<const double> x, std::span<const double> y);

// Two-sample z-score of independent estimates.
double z_score(const Estimate& a, const Estimate& b);
double z_score(const Estimate& a, double target);

}  // namespace fracavg
