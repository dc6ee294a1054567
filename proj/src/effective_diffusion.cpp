#include "fracavg/effective_diffusion.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>
#include <unsupported/Eigen/MatrixFunctions>

#include "quad.hpp"

namespace fracavg {

namespace {

double psi2(double u) { return std::exp(-0.25 * u * u) / std::sqrt(4.0 * std::numbers::pi); }

constexpr double kPsiCut = 12.0;  // psi2 support used in the eta'' integral

}  // namespace

double green_kubo_cv(const HurstParam& H, double s) {
    s = std::abs(s);
    const double a = std::min(0.0, s - kPsiCut), b = std::max(0.0, s + kPsiCut);
    std::vector<double> breaks{s - 6.0, s - 2.0, s, s + 2.0, s + 6.0};
    return 0.5 * eta_dd_integral(H, a, b, [s](double u) { return psi2(u - s); }, breaks);
}

double green_kubo_kernel(const HurstParam& H, double delta, double t) {
    return std::pow(delta, 2.0 * H.value() - 2.0) * green_kubo_cv(H, t / delta);
}

double c_raw(const ChainModel& chain, double H, const Observable& f, const Observable& g) {
    if (!(H > 0.5)) throw config_error("raw kernel constant needs H > 1/2");
    if (std::abs(chain.mean(f)) > 1e-10 || std::abs(chain.mean(g)) > 1e-10)
        throw config_error("raw kernel constant needs centered observables");
    // w = t^{2H-1}: t^{2H-2} dt = dw / (2H-1)
    const double e = 2.0 * H - 1.0;
    const double wmax = std::pow(40.0 / chain.gap(), e);
    auto integrand = [&](double w) {
        if (w == 0.0) return 2.0 * chain.inner(f, g);
        const double t = std::pow(w, 1.0 / e);
        Eigen::MatrixXd P = semigroup_matrix(chain, t);
        return chain.inner(f, P * g) + chain.inner(g, P * f);
    };
    using boost::math::quadrature::gauss_kronrod;
    return gauss_kronrod<double, 31>::integrate(integrand, 0.0, wmax, 20, 1e-12) / e;
}

// ---------------------------------------------------------------------------

EffectiveDiffusion::EffectiveDiffusion(ChainModel chain, CoefficientField F, HurstParam H, CoefficientField F0)
    : chain_(std::move(chain)), F_(std::move(F)), F0_(std::move(F0)), H_(H) {
    if (F_.states() != chain_.size()) throw config_error("diffusion field and chain disagree on the number of states");
    if (F0_.dim() != 0 && (F0_.dim() != F_.dim() || F0_.states() != chain_.size() || F0_.noise_dim() != 1))
        throw config_error("drift field must be d x 1 over the same chain");
    if (H_.value() > 0.5 && !F_.is_centered(chain_.mu()))
        throw config_error("diffusion field must be centered under mu when H > 1/2");

    const double h = H_.value();
    const double alpha = 1.0 - 2.0 * h;
    const double cH = 0.5 * std::tgamma(2.0 * h + 1.0);
    const std::size_t nb = F_.basis().size(), d = F_.dim(), m = F_.noise_dim(), n = chain_.size();
    const auto& c = F_.coeffs();
    const Eigen::VectorXd& mu = chain_.mu();

    // L^alpha applied to every (basis, row, noise) column over the states;
    // at H = 1/2 the constant part is kept (classical averaging convention)
    std::vector<std::vector<Eigen::MatrixXd>> Lc(nb, std::vector<Eigen::MatrixXd>(n, Eigen::MatrixXd::Zero(d, m)));
    for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t k = 0; k < m; ++k) {
                Observable col(n);
                for (std::size_t y = 0; y < n; ++y) col[y] = c[b][y](i, k);
                Observable lc = (h == 0.5) ? col : fractional_power(chain_, alpha, col);
                for (std::size_t y = 0; y < n; ++y) Lc[b][y](i, k) = lc[y];
            }
    A_.assign(nb, std::vector<Eigen::MatrixXd>(nb, Eigen::MatrixXd::Zero(d, d)));
    for (std::size_t a = 0; a < nb; ++a)
        for (std::size_t b = 0; b < nb; ++b) {
            Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, d);
            for (std::size_t y = 0; y < n; ++y) acc += mu[y] * c[a][y] * Lc[b][y].transpose();
            A_[a][b] = cH * acc;
        }
}

double EffectiveDiffusion::pair_covariance(const Observable& f, const Observable& g) const {
    const double h = H_.value();
    if (h > 0.5 && (std::abs(chain_.mean(f)) > 1e-10 || std::abs(chain_.mean(g)) > 1e-10))
        throw config_error("pair covariance needs centered observables when H > 1/2");
    const double alpha = 1.0 - 2.0 * h;
    const double cH = 0.5 * std::tgamma(2.0 * h + 1.0);
    return cH * (chain_.inner(f, fractional_power(chain_, alpha, g)) +
                 chain_.inner(fractional_power(chain_, alpha, f), g));
}

Eigen::MatrixXd EffectiveDiffusion::pair_covariance(const Eigen::MatrixXd& f, const Eigen::MatrixXd& g) const {
    Eigen::MatrixXd C(f.cols(), g.cols());
    for (Eigen::Index a = 0; a < f.cols(); ++a)
        for (Eigen::Index b = 0; b < g.cols(); ++b) C(a, b) = pair_covariance(Observable(f.col(a)), Observable(g.col(b)));
    return C;
}

Eigen::MatrixXd EffectiveDiffusion::sigma(const Eigen::VectorXd& x, const Eigen::VectorXd& xbar) const {
    const Eigen::VectorXd pa = F_.basis_values(x), pb = F_.basis_values(xbar);
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(dim(), dim());
    for (std::size_t a = 0; a < A_.size(); ++a)
        for (std::size_t b = 0; b < A_.size(); ++b) S += pa[a] * pb[b] * A_[a][b];
    return S;
}

Eigen::MatrixXd EffectiveDiffusion::sigma_green_kubo(const Eigen::VectorXd& x, const Eigen::VectorXd& xbar,
                                                     double delta) const {
    if (!(delta > 0.0)) throw config_error("green-kubo: delta must be positive");
    const std::size_t n = chain_.size(), d = dim(), m = F_.noise_dim();
    const auto Fx = F_.evaluate_all(x), Fb = F_.evaluate_all(xbar);
    const Eigen::VectorXd& mu = chain_.mu();
    Eigen::MatrixXd Fbar_x = Eigen::MatrixXd::Zero(d, m), Fbar_b = Eigen::MatrixXd::Zero(d, m);
    for (std::size_t y = 0; y < n; ++y) Fbar_x += mu[y] * Fx[y], Fbar_b += mu[y] * Fb[y];

    // M = int_0^Tmax R_delta(t) (P_t - 1 mu^T) dt; constants are handled in closed form
    const Eigen::MatrixXd Pi = Eigen::VectorXd::Ones(n) * mu.transpose();
    const double Tmax = std::max(40.0 / chain_.gap(), 50.0 * delta);
    auto integrand = [&](double t) -> Eigen::MatrixXd {
        return green_kubo_kernel(H_, delta, t) * (semigroup_matrix(chain_, t) - Pi);
    };
    std::vector<double> cuts{0.0};
    for (double t = 0.5 * delta; t < Tmax; t *= 2.0) cuts.push_back(t);
    cuts.push_back(Tmax);
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
        M += detail::integrate_matrix(integrand, cuts[i], cuts[i + 1], 1e-13, 1e-10).value;

    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t k = 0; k < m; ++k) {
        Eigen::MatrixXd fx(n, d), fb(n, d);
        for (std::size_t y = 0; y < n; ++y) {
            fx.row(y) = Fx[y].col(k).transpose();
            fb.row(y) = (Fb[y].col(k) - Fbar_b.col(k)).transpose();
        }
        const Eigen::MatrixXd Mf = M * fb;
        for (std::size_t y = 0; y < n; ++y) S += mu[y] * fx.row(y).transpose() * Mf.row(y);
    }
    // int_0^inf R_delta = 1/2 at H = 1/2 and 0 for H < 1/2 (the field is centered for H > 1/2)
    if (H_.value() == 0.5) S += 0.5 * Fbar_x * Fbar_b.transpose();
    return S;
}

Eigen::VectorXd EffectiveDiffusion::drift_correction(const Eigen::VectorXd& x) const {
    const std::size_t d = dim();
    const double h = 1e-4 * (1.0 + x.norm());
    Eigen::VectorXd G = Eigen::VectorXd::Zero(d);
    for (std::size_t j = 0; j < d; ++j) {
        auto D = [&](double step) {
            Eigen::VectorXd xp = x, xm = x;
            xp[j] += step, xm[j] -= step;
            return Eigen::MatrixXd((sigma(x, xp) - sigma(x, xm)) / (2.0 * step));
        };
        const Eigen::MatrixXd R = (4.0 * D(0.5 * h) - D(h)) / 3.0;
        G += R.row(j).transpose();
    }
    return G;
}

Eigen::VectorXd EffectiveDiffusion::drift_correction_exact(const Eigen::VectorXd& x) const {
    const std::size_t d = dim();
    const Eigen::VectorXd pa = F_.basis_values(x);
    Eigen::VectorXd G = Eigen::VectorXd::Zero(d);
    for (std::size_t j = 0; j < d; ++j) {
        MultiIndex e(d, 0);
        e[j] = 1;
        const Eigen::VectorXd db = F_.basis_values(x, e);
        for (std::size_t a = 0; a < A_.size(); ++a)
            for (std::size_t b = 0; b < A_.size(); ++b) G += pa[a] * db[b] * A_[a][b].row(j).transpose();
    }
    return G;
}

Eigen::VectorXd EffectiveDiffusion::f0_bar(const Eigen::VectorXd& x) const {
    if (F0_.dim() == 0) return Eigen::VectorXd::Zero(dim());
    return F0_.mu_average(x, chain_.mu()).col(0);
}

Eigen::MatrixXd clip_psd(const Eigen::MatrixXd& M) {
    Eigen::MatrixXd S = 0.5 * (M + M.transpose());
    if (S.size() == 0) return S;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double scale = std::max(ev.cwiseAbs().maxCoeff(), 0.0);
    if (ev.minCoeff() < -1e-10 * scale)
        throw numerical_error("covariance matrix is indefinite: eigenvalue " + std::to_string(ev.minCoeff()));
    if (ev.minCoeff() >= 0.0) return S;
    Eigen::VectorXd c = ev.cwiseMax(0.0);
    return es.eigenvectors() * c.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& M) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (M + M.transpose()));
    Eigen::VectorXd r = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * r.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd EffectiveDiffusion::w_field_covariance(const std::vector<Eigen::VectorXd>& points) const {
    if (points.empty()) throw config_error("w field covariance needs at least one point");
    const std::size_t q = points.size(), d = dim();
    Eigen::MatrixXd M(q * d, q * d);
    for (std::size_t a = 0; a < q; ++a)
        for (std::size_t b = a; b < q; ++b) {
            Eigen::MatrixXd blk = sigma(points[a], points[b]) + sigma(points[b], points[a]).transpose();
            M.block(a * d, b * d, d, d) = blk;
            M.block(b * d, a * d, d, d) = blk.transpose();
        }
    return clip_psd(M);
}

double EffectiveDiffusion::generator_apply(const std::function<double(const Eigen::VectorXd&)>& g,
                                           const Eigen::VectorXd& x) const {
    const std::size_t d = dim();
    const double h = 1e-3 * (1.0 + x.norm());
    Eigen::VectorXd grad(d);
    Eigen::MatrixXd hess(d, d);
    const double g0 = g(x);
    for (std::size_t i = 0; i < d; ++i) {
        Eigen::VectorXd xp = x, xm = x;
        xp[i] += h, xm[i] -= h;
        grad[i] = (g(xp) - g(xm)) / (2 * h);
        hess(i, i) = (g(xp) - 2 * g0 + g(xm)) / (h * h);
        for (std::size_t j = 0; j < i; ++j) {
            Eigen::VectorXd pp = x, pm = x, mp = x, mm = x;
            pp[i] += h, pp[j] += h, pm[i] += h, pm[j] -= h;
            mp[i] -= h, mp[j] += h, mm[i] -= h, mm[j] -= h;
            hess(i, j) = hess(j, i) = (g(pp) - g(pm) - g(mp) + g(mm)) / (4 * h * h);
        }
    }
    const Eigen::MatrixXd S = sigma(x, x);
    // sum_ij Sigma_ji d_ij g
    const double second = (S.transpose().array() * hess.array()).sum();
    return drift_correction(x).dot(grad) + second + f0_bar(x).dot(grad);
}

}  // namespace fracavg
