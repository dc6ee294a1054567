#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>

#include "fracavg/chain.hpp"
#include "fracavg/fbm.hpp"

namespace fracavg {

struct RoughIncrement {
    double s = 0.0, t = 0.0;
    Eigen::VectorXd Zf, Zg;  // first order for f and g, per noise component
    Eigen::MatrixXd ZZ;      // second order (f, g), m x m
    double delta = 0.0;
    std::uint64_t provenance = 0;
};

// First/second-order processes of r -> f(Y(r/eps)) dB^delta(r) on the grid of
// a sampled mollified derivative (left-point sums; the diagonal of the
// iterated sum carries weight 1/2, which makes the lift exactly geometric).
class RoughDriver {
public:
    RoughDriver(ChainPath fast, MollifiedDerivative dB, double epsilon, HurstParam H, double delta);

    double step() const { return dB_.step; }
    double horizon() const;
    std::size_t noise_dim() const { return static_cast<std::size_t>(dB_.values.rows()); }

    Eigen::VectorXd first_order(const Observable& f, double s, double t) const;
    Eigen::MatrixXd second_order(const Observable& f, const Observable& g, double s, double t) const;
    RoughIncrement increment(const Observable& f, const Observable& g, double s, double t) const;

private:
    std::size_t index(double t) const;

    ChainPath fast_;
    MollifiedDerivative dB_;
    double eps_;
    HurstParam H_;
    double delta_;
    std::uint64_t id_;
    std::vector<int> states_;  // Y(r_k / eps) on the grid
};

// || ZZ_st - ZZ_su - ZZ_ut - Z_su(f) (x) Z_ut(g) ||_max; increments must come from
// the same driver and observables.
double chen_residual(const RoughIncrement& su, const RoughIncrement& ut, const RoughIncrement& st);

// lim_{delta -> 0} E int_{s<u<r<t} f(u) dB^delta(u) g(r) dB^delta(r) for deterministic f, g.
double mean_iterated_deterministic(const std::function<double(double)>& f, const std::function<double(double)>& g,
                                   double s, double t, const HurstParam& H);

// Exact expectation of the discrete second-order sum (left points, diagonal
// weight 1/2) for deterministic f, g, built from the mollified derivative on
// the fBM grid itself (sub = 1). Needs s >= (w + 1) dt so the extension
// below zero is never touched; s and t must be grid points.
double mollified_iterated_mean(const std::function<double(double)>& f, const std::function<double(double)>& g,
                               double s, double t, const HurstParam& H, const Mollifier& moll);

struct ChaosDomination {
    double var_same = 0.0, var_indep = 0.0;
    double se_same = 0.0, se_indep = 0.0;  // MC standard errors of the variances
};

// K acts on fGn increment vectors of length n (grid step dt):
// K(B, B~) = sum_ij K_ij dB_i dB~_j. Monte Carlo estimates of
// Var(K(B,B) - E K(B,B)) and Var(K(B, B~)).
ChaosDomination chaos_domination_check(const Eigen::MatrixXd& K, const HurstParam& H, double dt,
                                       std::size_t n_samples, std::uint64_t seed);
// Exact values of the same two variances.
ChaosDomination chaos_domination_exact(const Eigen::MatrixXd& K, const HurstParam& H, double dt);

}  // namespace fracavg
