#include "fracavg/coefficients.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

namespace fracavg {

namespace {

int order(const MultiIndex& ell) {
    int s = 0;
    for (int l : ell) {
        if (l < 0) throw config_error("derivative multi-index has a negative entry");
        s += l;
    }
    if (s > 4) throw config_error("derivative order above 4 is not supported");
    return s;
}

double kpow(const Eigen::VectorXd& k, const MultiIndex& ell) {
    double p = 1.0;
    for (std::size_t i = 0; i < ell.size(); ++i)
        for (int r = 0; r < ell[i]; ++r) p *= k[static_cast<Eigen::Index>(i)];
    return p;
}

double tanh_deriv(double s, int r) {
    const double T = std::tanh(s), S = 1.0 - T * T;
    switch (r) {
        case 0: return T;
        case 1: return S;
        case 2: return -2.0 * T * S;
        case 3: return S * (6.0 * T * T - 2.0);
        default: return S * (16.0 * T - 24.0 * T * T * T);
    }
}

// probabilists' Hermite polynomials
double hermite(int r, double u) {
    switch (r) {
        case 0: return 1.0;
        case 1: return u;
        case 2: return u * u - 1.0;
        case 3: return u * u * u - 3.0 * u;
        default: return u * u * u * u - 6.0 * u * u + 3.0;
    }
}

}  // namespace

BasisFunction BasisFunction::constant() { return {}; }

BasisFunction BasisFunction::sin(Eigen::VectorXd k, double phase) {
    BasisFunction b;
    b.kind = BasisKind::sin, b.k = std::move(k), b.phase = phase;
    return b;
}

BasisFunction BasisFunction::cos(Eigen::VectorXd k, double phase) {
    BasisFunction b;
    b.kind = BasisKind::cos, b.k = std::move(k), b.phase = phase;
    return b;
}

BasisFunction BasisFunction::tanh(Eigen::VectorXd k, double phase) {
    BasisFunction b;
    b.kind = BasisKind::tanh, b.k = std::move(k), b.phase = phase;
    return b;
}

BasisFunction BasisFunction::gauss(Eigen::VectorXd center, double width) {
    if (!(width > 0.0)) throw config_error("gaussian bump width must be positive");
    BasisFunction b;
    b.kind = BasisKind::gauss, b.k = std::move(center), b.phase = width;
    return b;
}

BasisFunction BasisFunction::callback(std::function<double(const Eigen::VectorXd&, const MultiIndex&)> f) {
    BasisFunction b;
    b.kind = BasisKind::callback, b.fn = std::move(f);
    return b;
}

double BasisFunction::eval(const Eigen::VectorXd& x, const MultiIndex& ell_in) const {
    MultiIndex ell = ell_in;
    if (ell.empty()) ell.assign(static_cast<std::size_t>(x.size()), 0);
    if (ell.size() != static_cast<std::size_t>(x.size()))
        throw config_error("derivative multi-index length does not match dimension");
    const int r = order(ell);
    switch (kind) {
        case BasisKind::constant:
            return r == 0 ? 1.0 : 0.0;
        case BasisKind::sin:
        case BasisKind::cos: {
            // sin^{(r)}(s) = sin(s + r pi/2)
            const double s = k.dot(x) + phase + (kind == BasisKind::cos ? M_PI / 2 : 0.0);
            return kpow(k, ell) * std::sin(s + r * M_PI / 2);
        }
        case BasisKind::tanh:
            return kpow(k, ell) * tanh_deriv(k.dot(x) + phase, r);
        case BasisKind::gauss: {
            const double w = phase;
            double v = 1.0;
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                const double u = (x[i] - k[i]) / w;
                const int li = ell[static_cast<std::size_t>(i)];
                v *= ((li % 2) ? -1.0 : 1.0) * hermite(li, u) * std::exp(-0.5 * u * u) / std::pow(w, li);
            }
            return v;
        }
        case BasisKind::callback:
            return fn(x, ell);
    }
    return 0.0;
}

std::string BasisFunction::name() const {
    switch (kind) {
        case BasisKind::constant: return "constant";
        case BasisKind::sin: return "sin";
        case BasisKind::cos: return "cos";
        case BasisKind::tanh: return "tanh";
        case BasisKind::gauss: return "gauss";
        case BasisKind::callback: return "callback";
    }
    return "?";
}

BasisKind basis_kind_from_name(const std::string& name) {
    if (name == "constant") return BasisKind::constant;
    if (name == "sin") return BasisKind::sin;
    if (name == "cos") return BasisKind::cos;
    if (name == "tanh") return BasisKind::tanh;
    if (name == "gauss") return BasisKind::gauss;
    throw config_error("unknown basis '" + name + "' (expected constant, sin, cos, tanh or gauss)");
}

// ---------------------------------------------------------------------------

CoefficientField::CoefficientField(std::size_t d, std::size_t m, std::size_t n,
                                   std::vector<BasisFunction> basis,
                                   std::vector<std::vector<Eigen::MatrixXd>> coeffs)
    : d_(d), m_(m), n_(n), basis_(std::move(basis)), coeffs_(std::move(coeffs)) {
    if (d == 0 || m == 0 || n == 0) throw config_error("coefficient field: dimensions must be positive");
    if (basis_.size() != coeffs_.size())
        throw config_error("coefficient field: one coefficient array per basis function required");
    for (std::size_t j = 0; j < basis_.size(); ++j) {
        const auto& b = basis_[j];
        if ((b.kind == BasisKind::sin || b.kind == BasisKind::cos || b.kind == BasisKind::tanh ||
             b.kind == BasisKind::gauss) &&
            static_cast<std::size_t>(b.k.size()) != d) {
            std::ostringstream msg;
            msg << "coefficient field: basis " << j << " (" << b.name() << ") needs " << d << " parameters";
            throw config_error(msg.str());
        }
        if (coeffs_[j].size() != n) {
            std::ostringstream msg;
            msg << "coefficient field: basis " << j << " needs one coefficient block per state (" << n << ")";
            throw config_error(msg.str());
        }
        for (std::size_t y = 0; y < n; ++y) {
            const auto& c = coeffs_[j][y];
            if (static_cast<std::size_t>(c.rows()) != d || static_cast<std::size_t>(c.cols()) != m) {
                std::ostringstream msg;
                msg << "coefficient field: basis " << j << ", state " << y << " must be " << d << "x" << m;
                throw config_error(msg.str());
            }
        }
    }
}

CoefficientField CoefficientField::zero(std::size_t d, std::size_t m, std::size_t n) {
    return CoefficientField(d, m, n, {}, {});
}

Eigen::VectorXd CoefficientField::basis_values(const Eigen::VectorXd& x, const MultiIndex& ell) const {
    if (static_cast<std::size_t>(x.size()) != d_) throw config_error("coefficient field: point has wrong dimension");
    Eigen::VectorXd v(basis_.size());
    for (std::size_t j = 0; j < basis_.size(); ++j) v[static_cast<Eigen::Index>(j)] = basis_[j].eval(x, ell);
    return v;
}

Eigen::MatrixXd CoefficientField::evaluate(const Eigen::VectorXd& x, int state, const MultiIndex& ell) const {
    if (state < 0 || static_cast<std::size_t>(state) >= n_) throw config_error("coefficient field: state out of range");
    const Eigen::VectorXd psi = basis_values(x, ell);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d_, m_);
    for (std::size_t j = 0; j < basis_.size(); ++j) out += psi[static_cast<Eigen::Index>(j)] * coeffs_[j][state];
    return out;
}

std::vector<Eigen::MatrixXd> CoefficientField::evaluate_all(const Eigen::VectorXd& x, const MultiIndex& ell) const {
    const Eigen::VectorXd psi = basis_values(x, ell);
    std::vector<Eigen::MatrixXd> out(n_, Eigen::MatrixXd::Zero(d_, m_));
    for (std::size_t j = 0; j < basis_.size(); ++j)
        for (std::size_t y = 0; y < n_; ++y) out[y] += psi[static_cast<Eigen::Index>(j)] * coeffs_[j][y];
    return out;
}

Eigen::MatrixXd CoefficientField::mu_average(const Eigen::VectorXd& x, const Eigen::VectorXd& mu) const {
    if (static_cast<std::size_t>(mu.size()) != n_) throw config_error("coefficient field: measure has wrong size");
    auto all = evaluate_all(x);
    Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(d_, m_);
    for (std::size_t y = 0; y < n_; ++y) avg += mu[static_cast<Eigen::Index>(y)] * all[y];
    return avg;
}

CoefficientField CoefficientField::center(const Eigen::VectorXd& mu) const {
    auto c = coeffs_;
    for (auto& per_state : c) {
        Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(d_, m_);
        for (std::size_t y = 0; y < n_; ++y) mean += mu[static_cast<Eigen::Index>(y)] * per_state[y];
        for (auto& cy : per_state) cy -= mean;
    }
    return CoefficientField(d_, m_, n_, basis_, std::move(c));
}

bool CoefficientField::is_centered(const Eigen::VectorXd& mu, double tol) const {
    for (const auto& per_state : coeffs_) {
        Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(d_, m_);
        for (std::size_t y = 0; y < n_; ++y) mean += mu[static_cast<Eigen::Index>(y)] * per_state[y];
        if (mean.cwiseAbs().maxCoeff() > tol) return false;
    }
    return true;
}

bool CoefficientField::is_zero() const {
    for (const auto& per_state : coeffs_)
        for (const auto& c : per_state)
            if (!c.isZero(0.0)) return false;
    return true;
}

CoefficientField prepare_diffusion(const CoefficientField& F, const ChainModel& chain, double H,
                                   bool auto_center, std::ostream* warn) {
    if (F.states() != chain.size()) throw config_error("diffusion field and chain disagree on the number of states");
    if (H <= 0.5 || F.is_centered(chain.mu())) return F;
    if (!auto_center)
        throw config_error("diffusion field must be centered under mu when H > 1/2 (set auto_center to center it)");
    if (warn) *warn << "warning: diffusion field was not centered; subtracting its mu-average\n";
    return F.center(chain.mu());
}

double decay_sup(const CoefficientField& F, double kappa, const MultiIndex& ell, double radius,
                 int points_per_axis) {
    const std::size_t d = F.dim();
    if (d > 3) throw config_error("decay sweep limited to d <= 3");
    std::vector<int> idx(d, 0);
    double best = 0.0;
    while (true) {
        Eigen::VectorXd x(d);
        for (std::size_t i = 0; i < d; ++i)
            x[i] = -radius + 2.0 * radius * idx[i] / std::max(1, points_per_axis - 1);
        for (const auto& v : F.evaluate_all(x, ell))
            best = std::max(best, std::pow(1.0 + x.norm(), kappa) * v.cwiseAbs().maxCoeff());
        std::size_t i = 0;
        while (i < d && ++idx[i] == points_per_axis) idx[i++] = 0;
        if (i == d) break;
    }
    return best;
}

}  // namespace fracavg
