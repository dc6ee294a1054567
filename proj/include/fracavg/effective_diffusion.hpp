#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "fracavg/chain.hpp"
#include "fracavg/coefficients.hpp"
#include "fracavg/fbm.hpp"

namespace fracavg {

// Autocovariance of v = phi * dB for the unit Gaussian mollifier:
// C_v(s) = 1/2 int psi(u - s) eta''(u) du with psi the N(0, 2) density.
double green_kubo_cv(const HurstParam& H, double s);
// R_delta(t) = delta^{2H-2} C_v(t / delta)
double green_kubo_kernel(const HurstParam& H, double delta, double t);

// Raw-kernel constant int_0^inf (<f, P_t g> + <g, P_t f>) t^{2H-2} dt for
// centered f, g and H > 1/2, by quadrature.
double c_raw(const ChainModel& chain, double H, const Observable& f, const Observable& g);

class EffectiveDiffusion {
public:
    // F: d x m diffusion field, F0: d x 1 drift field (may be empty/zero).
    EffectiveDiffusion(ChainModel chain, CoefficientField F, HurstParam H, CoefficientField F0 = {});

    const ChainModel& chain() const { return chain_; }
    const CoefficientField& F() const { return F_; }
    const CoefficientField& F0() const { return F0_; }
    const HurstParam& H() const { return H_; }
    std::size_t dim() const { return F_.dim(); }

    // 1/2 Gamma(2H+1) (<f, L^{1-2H} g> + <L^{1-2H} f, g>)
    double pair_covariance(const Observable& f, const Observable& g) const;
    // f, g: n x m (per state, per noise component); entry (a, b) = C(f_a, g_b)
    Eigen::MatrixXd pair_covariance(const Eigen::MatrixXd& f, const Eigen::MatrixXd& g) const;

    Eigen::MatrixXd sigma(const Eigen::VectorXd& x, const Eigen::VectorXd& xbar) const;
    Eigen::MatrixXd sigma_green_kubo(const Eigen::VectorXd& x, const Eigen::VectorXd& xbar, double delta) const;

    // G_i(x) = d/dxbar_j Sigma_ji(x, xbar) at xbar = x, by Richardson-extrapolated
    // central differences.
    Eigen::VectorXd drift_correction(const Eigen::VectorXd& x) const;
    // Same quantity from the basis expansion and closed-form basis derivatives.
    Eigen::VectorXd drift_correction_exact(const Eigen::VectorXd& x) const;

    Eigen::VectorXd f0_bar(const Eigen::VectorXd& x) const;

    // (q d) x (q d) covariance per unit time of (W(x_1), ..., W(x_q)).
    Eigen::MatrixXd w_field_covariance(const std::vector<Eigen::VectorXd>& points) const;

    double generator_apply(const std::function<double(const Eigen::VectorXd&)>& g,
                           const Eigen::VectorXd& x) const;

private:
    ChainModel chain_;
    CoefficientField F_, F0_;
    HurstParam H_;
    // Sigma(x, xbar) = sum_{a,b} psi_a(x) psi_b(xbar) A_[a][b]
    std::vector<std::vector<Eigen::MatrixXd>> A_;
};

// Symmetrize, check and clip a covariance matrix; throws numerical_error if
// an eigenvalue is below -1e-10 ||M||.
Eigen::MatrixXd clip_psd(const Eigen::MatrixXd& M);
// Symmetric square root S with S S^T = M for a clipped PSD matrix.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& M);

}  // namespace fracavg
