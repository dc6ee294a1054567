#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "fracavg/common.hpp"

namespace fracavg {

using Observable = Eigen::VectorXd;

Eigen::VectorXd stationary_measure(const Eigen::MatrixXd& Q);

// Finite-state CTMC with generator Q (so L = -Q). Immutable once built.
class ChainModel {
public:
    explicit ChainModel(Eigen::MatrixXd Q);

    std::size_t size() const { return static_cast<std::size_t>(Q_.rows()); }
    const Eigen::MatrixXd& Q() const { return Q_; }
    const Eigen::VectorXd& mu() const { return mu_; }
    double gap() const { return gap_; }

    double mean(const Observable& f) const { return mu_.dot(f); }
    double inner(const Observable& f, const Observable& g) const {
        return (mu_.array() * f.array() * g.array()).sum();
    }
    Observable center(const Observable& f) const {
        return (f.array() - mean(f)).matrix();
    }
    bool reversible(double tol = 1e-12) const;

    // Spectral data of L = -Q; only available when L is diagonalizable.
    bool diagonalizable() const { return diagonalizable_; }
    double eigvec_condition() const { return cond_; }
    const Eigen::VectorXcd& eigenvalues() const { return lambda_; }
    const Eigen::MatrixXcd& eigenvectors() const { return V_; }
    const Eigen::MatrixXcd& eigenvectors_inv() const { return Vinv_; }
    Eigen::Index zero_mode() const { return zero_; }

private:
    Eigen::MatrixXd Q_;
    Eigen::VectorXd mu_;
    double gap_ = 0.0;
    bool diagonalizable_ = false;
    double cond_ = 0.0;
    Eigen::VectorXcd lambda_;
    Eigen::MatrixXcd V_, Vinv_;
    Eigen::Index zero_ = 0;
};

Eigen::MatrixXd semigroup_matrix(const ChainModel& model, double t);
Observable semigroup_apply(const ChainModel& model, double t, const Observable& f);

// L^alpha f by eigendecomposition; alpha in (-1, 1). alpha = 0 is the
// identity on the mean-zero part.
Observable fractional_power(const ChainModel& model, double alpha, const Observable& f);

// Same quantity from the integral representation via the semigroup; used
// as an independent oracle. tail_bound (if given) receives the estimated
// truncation error in sup norm.
Observable fractional_power_quadrature(const ChainModel& model, double alpha, const Observable& f,
                                       double* tail_bound = nullptr);

struct ChainPath {
    std::vector<double> times;  // jump times, times[0] = 0
    std::vector<int> states;    // state on [times[i], times[i+1])
    double horizon = 0.0;

    int state_at(double t) const;
    std::size_t jumps() const { return times.size() - 1; }
};

ChainPath sample_trajectory(const ChainModel& model, double T, std::uint64_t seed,
                            std::uint64_t path_index = 0);

// Mobius coefficient (|D|-1)! (-1)^{|D|-1} for a partition with nb blocks.
double cumulant_coefficient(std::size_t nb);

// E prod f_i(Y_{s_i}) for sorted times.
double joint_moment(const ChainModel& model, std::span<const Observable> fs,
                    std::span<const double> times);

double joint_cumulant(const ChainModel& model, std::span<const Observable> fs,
                      std::span<const double> times);

// All set partitions of {0..k-1} as block lists (restricted growth order).
std::vector<std::vector<std::vector<int>>> set_partitions(int k);

}  // namespace fracavg
