#pragma once

#include <Eigen/Dense>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "fracavg/chain.hpp"

namespace fracavg {

using MultiIndex = std::vector<int>;  // length d, |l| <= 4

enum class BasisKind { constant, sin, cos, tanh, gauss, callback };

// Scalar basis function psi: R^d -> R with closed-form derivatives to order 4.
struct BasisFunction {
    BasisKind kind = BasisKind::constant;
    Eigen::VectorXd k;       // sin/cos/tanh: psi = f(k.x + phase); gauss: center
    double phase = 0.0;      // sin/cos/tanh phase; gauss: width w
    std::function<double(const Eigen::VectorXd&, const MultiIndex&)> fn;  // callback

    static BasisFunction constant();
    static BasisFunction sin(Eigen::VectorXd k, double phase);
    static BasisFunction cos(Eigen::VectorXd k, double phase);
    static BasisFunction tanh(Eigen::VectorXd k, double phase);
    static BasisFunction gauss(Eigen::VectorXd center, double width);
    static BasisFunction callback(std::function<double(const Eigen::VectorXd&, const MultiIndex&)> f);

    double eval(const Eigen::VectorXd& x, const MultiIndex& ell) const;
    std::string name() const;
};

BasisKind basis_kind_from_name(const std::string& name);

// F(x, y) = sum_j psi_j(x) c_j(y), c_j(y) a d x m matrix (m = 1 for drifts).
class CoefficientField {
public:
    CoefficientField() = default;
    CoefficientField(std::size_t d, std::size_t m, std::size_t n, std::vector<BasisFunction> basis,
                     std::vector<std::vector<Eigen::MatrixXd>> coeffs);

    static CoefficientField zero(std::size_t d, std::size_t m, std::size_t n);

    std::size_t dim() const { return d_; }
    std::size_t noise_dim() const { return m_; }
    std::size_t states() const { return n_; }
    const std::vector<BasisFunction>& basis() const { return basis_; }
    const std::vector<std::vector<Eigen::MatrixXd>>& coeffs() const { return coeffs_; }

    Eigen::MatrixXd evaluate(const Eigen::VectorXd& x, int state, const MultiIndex& ell = {}) const;
    // psi_j(x) (or D^l psi_j) for every basis index
    Eigen::VectorXd basis_values(const Eigen::VectorXd& x, const MultiIndex& ell = {}) const;
    // F(x, y) for every state y
    std::vector<Eigen::MatrixXd> evaluate_all(const Eigen::VectorXd& x, const MultiIndex& ell = {}) const;

    Eigen::MatrixXd mu_average(const Eigen::VectorXd& x, const Eigen::VectorXd& mu) const;
    CoefficientField center(const Eigen::VectorXd& mu) const;
    bool is_centered(const Eigen::VectorXd& mu, double tol = 1e-10) const;
    bool is_zero() const;

private:
    std::size_t d_ = 0, m_ = 0, n_ = 0;
    std::vector<BasisFunction> basis_;
    std::vector<std::vector<Eigen::MatrixXd>> coeffs_;
};

// Enforces the centering requirement for diffusion fields at H > 1/2; with
// auto_center the field is centered and a warning goes to `warn`.
CoefficientField prepare_diffusion(const CoefficientField& F, const ChainModel& chain, double H,
                                   bool auto_center, std::ostream* warn = nullptr);

// sup over a grid of |x| <= radius of (1+|x|)^kappa max_y |D^l F(x, y)|.
double decay_sup(const CoefficientField& F, double kappa, const MultiIndex& ell, double radius = 50.0,
                 int points_per_axis = 201);

}  // namespace fracavg
