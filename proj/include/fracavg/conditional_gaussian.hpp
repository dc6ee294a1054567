#pragma once

#include <span>
#include <vector>

#include "fracavg/chain.hpp"

namespace fracavg {

// Exact Gaussian moments of fBM integrals with piecewise-constant integrands:
// a[k] on [tau[k], tau[k+1]), k < n, tau.size() == n + 1.

// Cov(int a dB, int b dB)
double wiener_covariance(double H, std::span<const double> tau, std::span<const double> a,
                         std::span<const double> b);

// E int_{r<s} a(r) dB_r b(s) dB_s, the mollification limit (each diagonal
// piece contributes 1/2 a_k b_k |dtau_k|^{2H}).
double iterated_mean(double H, std::span<const double> tau, std::span<const double> a,
                     std::span<const double> b);

// Variance of the same iterated integral (second chaos part); O(n^3).
double iterated_variance(double H, std::span<const double> tau, std::span<const double> a,
                         std::span<const double> b);

// Jump times of a chain path inside [s, t] with the visited states.
struct PiecewiseStates {
    std::vector<double> tau;  // s = tau[0] < ... < tau[n] = t
    std::vector<int> states;  // n entries
};
PiecewiseStates restrict_path(const ChainPath& path, double s, double t);

// f evaluated along the pieces
std::vector<double> along(const PiecewiseStates& p, const Observable& f);

}  // namespace fracavg
