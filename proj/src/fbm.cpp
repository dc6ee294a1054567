#include "fracavg/fbm.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <complex>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "fft.hpp"

namespace fracavg {

HurstParam::HurstParam(double H) : H_(H) {
    if (!(H > 1.0 / 3.0 && H < 1.0)) {
        std::ostringstream msg;
        msg << "Hurst parameter must lie in (1/3, 1), got " << H;
        throw config_error(msg.str());
    }
}

FbmGrid::FbmGrid(HurstParam H_, double dt_, std::size_t n, std::size_t m)
    : H(H_), dt(dt_), n_steps(n), n_components(m) {
    if (!(dt > 0.0)) throw config_error("fbm grid: dt must be positive");
    if (n_steps == 0) throw config_error("fbm grid: n_steps must be positive");
    if (n_components == 0) throw config_error("fbm grid: n_components must be positive");
}

double fgn_autocov(double H, double dt, std::size_t k) {
    const double p = 2.0 * H;
    const double kk = static_cast<double>(k);
    double g;
    if (k == 0) {
        g = 1.0;
    } else {
        g = 0.5 * (std::pow(kk + 1.0, p) - 2.0 * std::pow(kk, p) + std::pow(kk - 1.0, p));
    }
    return g * std::pow(dt, p);
}

double fbm_covariance(const HurstParam& H, double s, double t) {
    if (s < 0.0 || t < 0.0) throw config_error("fbm_covariance: times must be nonnegative");
    const double p = 2.0 * H.value();
    return 0.5 * (std::pow(s, p) + std::pow(t, p) - std::pow(std::abs(t - s), p));
}

// ---------------------------------------------------------------------------

FgnSampler::FgnSampler(double H, double dt, std::size_t n) : H_(H), dt_(dt), n_(n) {
    if (n == 0) throw config_error("fgn sampler: n must be positive");
    if (n >= 64) {
        std::size_t half = 1;
        while (half < n) half <<= 1;
        for (int attempt = 0; attempt < 4 && !circulant_; ++attempt, half <<= 1) {
            const std::size_t M = 2 * half;
            std::vector<std::complex<double>> row(M);
            for (std::size_t k = 0; k <= half; ++k) row[k] = fgn_autocov(H, dt, k);
            for (std::size_t k = half + 1; k < M; ++k) row[k] = row[M - k];
            detail::fft_forward(row);
            double lmax = 0.0, lmin = 0.0;
            for (auto& z : row) {
                lmax = std::max(lmax, z.real());
                lmin = std::min(lmin, z.real());
            }
            if (lmin < -1e-12 * lmax) continue;
            m_ = M;
            eig_.resize(M);
            sqrt_eig_.resize(M);
            for (std::size_t j = 0; j < M; ++j) {
                eig_[j] = std::max(row[j].real(), 0.0);
                sqrt_eig_[j] = std::sqrt(eig_[j] / static_cast<double>(M));
            }
            circulant_ = true;
        }
    }
    if (!circulant_) {
        Eigen::MatrixXd C(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                C(i, j) = fgn_autocov(H, dt, i > j ? i - j : j - i);
        Eigen::LLT<Eigen::MatrixXd> llt(C);
        if (llt.info() != Eigen::Success)
            throw numerical_error("fgn sampler: circulant embedding and Cholesky both failed");
        chol_ = llt.matrixL();
        m_ = n;
    }
}

void FgnSampler::sample(Rng& rng, double* out) const {
    std::normal_distribution<double> N01;
    if (circulant_) {
        std::vector<std::complex<double>> w(m_);
        for (std::size_t j = 0; j < m_; ++j) {
            const double a = N01(rng), b = N01(rng);
            w[j] = {sqrt_eig_[j] * a, sqrt_eig_[j] * b};
        }
        detail::fft_forward(w);
        for (std::size_t k = 0; k < n_; ++k) out[k] = w[k].real();
        return;
    }
    Eigen::VectorXd z(n_);
    for (std::size_t k = 0; k < n_; ++k) z[k] = N01(rng);
    Eigen::Map<Eigen::VectorXd>(out, n_) = chol_.triangularView<Eigen::Lower>() * z;
}

double FgnSampler::target_error() const {
    double err = 0.0;
    if (circulant_) {
        // inverse DFT of the eigenvalues via the forward transform of the conjugate
        std::vector<std::complex<double>> e(m_);
        for (std::size_t j = 0; j < m_; ++j) e[j] = eig_[j];
        detail::fft_forward(e);
        for (std::size_t k = 0; k < n_; ++k) {
            const double ck = e[k == 0 ? 0 : m_ - k].real() / static_cast<double>(m_);
            err = std::max(err, std::abs(ck - fgn_autocov(H_, dt_, k)));
        }
        return err;
    }
    Eigen::MatrixXd LLt = chol_ * chol_.transpose();
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = 0; j < n_; ++j)
            err = std::max(err, std::abs(LLt(i, j) - fgn_autocov(H_, dt_, i > j ? i - j : j - i)));
    return err;
}

FbmPath sample_fbm(const FbmGrid& grid, const FgnSampler& sampler, std::uint64_t seed,
                   std::uint64_t path_index) {
    if (sampler.size() != grid.n_steps)
        throw config_error("sample_fbm: sampler size does not match grid");
    FbmPath path{grid, Eigen::MatrixXd::Zero(grid.n_components, grid.n_steps + 1)};
    std::vector<double> inc(grid.n_steps);
    for (std::size_t c = 0; c < grid.n_components; ++c) {
        Rng rng = make_rng(seed, 0xfb, path_index, c);
        sampler.sample(rng, inc.data());
        double acc = 0.0;
        for (std::size_t k = 0; k < grid.n_steps; ++k) {
            acc += inc[k];
            path.values(c, k + 1) = acc;
        }
    }
    return path;
}

FbmPath sample_fbm(const FbmGrid& grid, std::uint64_t seed) {
    FgnSampler sampler(grid.H.value(), grid.dt, grid.n_steps);
    return sample_fbm(grid, sampler, seed, 0);
}

void write_fbm_csv(std::ostream& os, const FbmPath& path) {
    os << "t";
    for (std::size_t c = 0; c < path.grid.n_components; ++c) os << ",comp" << c;
    os << '\n';
    os << std::setprecision(17);
    for (std::size_t k = 0; k <= path.grid.n_steps; ++k) {
        os << path.grid.time(k);
        for (std::size_t c = 0; c < path.grid.n_components; ++c) os << ',' << path.values(c, k);
        os << '\n';
    }
}

// ---------------------------------------------------------------------------

namespace {
constexpr double kTrunc = 6.0;

double gauss(double u) { return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi); }
}  // namespace

Mollifier::Mollifier(double delta, double dt) : delta_(delta), dt_(dt) {
    if (!(delta > 0.0) || !(dt > 0.0)) throw config_error("mollifier: delta and dt must be positive");
    w_ = static_cast<std::size_t>(std::floor(kTrunc * delta / dt + 1e-12));
    const std::size_t len = 2 * w_ + 1;
    phi_.assign(len, 0.0);
    dphi_.assign(len, 0.0);
    double mass = 0.0, moment = 0.0;
    for (std::size_t i = 0; i <= w_; ++i) {
        const double t = static_cast<double>(i) * dt;
        const double g = gauss(t / delta) / delta;
        phi_[w_ + i] = phi_[w_ - i] = g;
        mass += (i == 0 ? 1.0 : 2.0) * g * dt;
        // -sum dphi(s) s dt with dphi = -s/delta^2 g
        moment += (i == 0 ? 0.0 : 2.0) * t * t / (delta * delta) * g * dt;
    }
    norm_ = 1.0 / mass;
    dnorm_ = 1.0 / moment;
    for (std::size_t i = 0; i <= w_; ++i) {
        const double t = static_cast<double>(i) * dt;
        phi_[w_ + i] *= norm_;
        phi_[w_ - i] = phi_[w_ + i];
        const double d = -t / (delta * delta) * gauss(t / delta) / delta * dnorm_;
        dphi_[w_ + i] = d;
        dphi_[w_ - i] = -d;
    }
}

double Mollifier::phi(double t) const {
    if (std::abs(t) > kTrunc * delta_) return 0.0;
    return norm_ * gauss(t / delta_) / delta_;
}

double Mollifier::dphi(double t) const {
    if (std::abs(t) > kTrunc * delta_) return 0.0;
    return -dnorm_ * t / (delta_ * delta_) * gauss(t / delta_) / delta_;
}

namespace {

// Path on indices -(pad) .. n, stored with offset pad.
Eigen::MatrixXd padded_path(const FbmPath& path, std::size_t pad, Extension ext,
                            std::uint64_t ext_seed) {
    const std::size_t n = path.grid.n_steps;
    const std::size_t m = path.grid.n_components;
    Eigen::MatrixXd P(m, n + 1 + pad);
    P.rightCols(n + 1) = path.values;
    if (ext == Extension::reflect) {
        for (std::size_t i = 1; i <= pad; ++i) {
            const std::size_t src = std::min(i, n);
            P.col(pad - i) = -path.values.col(src);
        }
        return P;
    }
    FbmGrid g(path.grid.H, path.grid.dt, pad, m);
    FbmPath tail = sample_fbm(g, ext_seed);
    for (std::size_t i = 1; i <= pad; ++i) P.col(pad - i) = -tail.values.col(i);
    return P;
}

MollifiedDerivative convolve(const FbmPath& path, const Mollifier& moll, Extension ext,
                             std::uint64_t ext_seed, std::size_t sub, bool derivative) {
    if (moll.delta() < 4.0 * path.grid.dt * (1.0 - 1e-12))
        throw config_error("mollified derivative: delta must be at least 4*dt");
    if (std::abs(moll.dt() - path.grid.dt) > 1e-12 * path.grid.dt)
        throw config_error("mollified derivative: mollifier sampled on a different grid");
    if (sub == 0) throw config_error("mollified derivative: sub must be positive");
    const std::size_t w = moll.half_width();
    const std::size_t n = path.grid.n_steps;
    if (n < w + 2) throw config_error("mollified derivative: path shorter than mollifier support");
    const std::size_t pad = w + 1;
    const double dt = path.grid.dt;
    Eigen::MatrixXd P = padded_path(path, pad, ext, ext_seed);

    // value at (k + p/sub) dt = sum_{i=-pad}^{w} wt_p[i] B_{k-i}
    const std::size_t taps = pad + w + 1;
    // Per phase: d-weights get sum 0 and first moment -1, p-weights get sum 1
    // and first moment 0, so linear paths are reproduced exactly despite the
    // hard truncation of the support.
    std::vector<std::vector<double>> wt(sub, std::vector<double>(taps));
    std::vector<double> pw(taps), dw(taps), off(taps);
    for (std::size_t p = 0; p < sub; ++p) {
        double sp = 0.0, sd = 0.0;
        for (std::size_t q = 0; q < taps; ++q) {
            const double i = static_cast<double>(q) - static_cast<double>(pad);
            off[q] = (i + static_cast<double>(p) / static_cast<double>(sub)) * dt;
            pw[q] = moll.phi(off[q]) * dt;
            dw[q] = moll.dphi(off[q]) * dt;
            sp += pw[q];
        }
        for (auto& x : pw) x /= sp;
        for (std::size_t q = 0; q < taps; ++q) sd += dw[q];
        double md = 0.0;
        for (std::size_t q = 0; q < taps; ++q) {
            dw[q] -= sd * pw[q];
            md -= dw[q] * off[q];
        }
        for (auto& x : dw) x /= md;
        if (derivative) {
            wt[p] = dw;
        } else {
            double mp = 0.0;
            for (std::size_t q = 0; q < taps; ++q) mp += pw[q] * off[q];
            for (std::size_t q = 0; q < taps; ++q) wt[p][q] = pw[q] + mp * dw[q];
        }
    }

    const std::size_t kmax = n - w - 1;
    const std::size_t count = kmax * sub + 1;
    MollifiedDerivative out{dt / static_cast<double>(sub),
                            Eigen::MatrixXd::Zero(path.grid.n_components, count)};
    for (std::size_t c = 0; c < path.grid.n_components; ++c) {
        std::vector<double> row(P.cols());
        for (Eigen::Index j = 0; j < P.cols(); ++j) row[j] = P(c, j);
        for (std::size_t k = 0; k <= kmax; ++k) {
            const std::size_t center = k + pad;  // index of B_k in row
            for (std::size_t p = 0; p < sub; ++p) {
                const std::size_t idx = k * sub + p;
                if (idx >= count) break;
                double acc = 0.0;
                const double* wp = wt[p].data();
                // B_{k-i} for i = q - pad
                for (std::size_t q = 0; q < taps; ++q) acc += wp[q] * row[center + pad - q];
                out.values(c, idx) = acc;
            }
        }
    }
    return out;
}

}  // namespace

MollifiedDerivative mollified_derivative(const FbmPath& path, const Mollifier& moll, Extension ext,
                                         std::uint64_t ext_seed, std::size_t sub) {
    return convolve(path, moll, ext, ext_seed, sub, true);
}

MollifiedDerivative mollified_path(const FbmPath& path, const Mollifier& moll, Extension ext,
                                   std::uint64_t ext_seed, std::size_t sub) {
    return convolve(path, moll, ext, ext_seed, sub, false);
}

// ---------------------------------------------------------------------------

double eta_dd_integral(const HurstParam& Hp, double a, double b,
                       const std::function<double(double)>& phi, const std::vector<double>& breaks) {
    if (a > 0.0 || b < 0.0) throw config_error("eta_dd_integral: need a <= 0 <= b");
    if (!(a < b)) throw config_error("eta_dd_integral: need a < b");
    const double H = Hp.value();
    const double phi0 = phi(0.0);
    const double ea = a < 0.0 ? 1.0 : 0.0;
    const double eb = b > 0.0 ? 1.0 : 0.0;
    if (H == 0.5) return phi0 * (ea + eb);

    const double p = 2.0 * H - 2.0;
    boost::math::quadrature::tanh_sinh<double> ts;
    auto piece = [&](double lo, double hi, double sgn) {
        // integral over t in [lo, hi] subset of [0, inf) of t^p (phi(sgn t) - phi0)
        auto f = [&](double t) {
            const double d = t > 0.0 ? phi(sgn * t) - phi0 : 0.0;
            return d == 0.0 ? 0.0 : std::pow(t, p) * d;
        };
        double err = 0.0;
        // only the piece touching the origin is singular
        double v = lo == 0.0 ? ts.integrate(f, lo, hi, 1e-12, &err)
                             : boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, hi, 15, 1e-12, &err);
        if (!std::isfinite(v)) throw numerical_error("eta_dd_integral: quadrature diverged");
        return v;
    };
    auto part = [&](double lo, double hi, double sgn) {
        if (hi <= lo) return 0.0;
        std::vector<double> cuts{lo};
        for (double x : breaks) {
            const double t = sgn * x;
            if (t > lo && t < hi) cuts.push_back(t);
        }
        cuts.push_back(hi);
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) acc += piece(cuts[i], cuts[i + 1], sgn);
        return acc;
    };
    const double reg = part(0.0, -a, -1.0) + part(0.0, b, 1.0);
    double sing = 0.0;
    if (a < 0.0) sing += std::pow(-a, 2.0 * H - 1.0);
    if (b > 0.0) sing += std::pow(b, 2.0 * H - 1.0);
    return -2.0 * Hp.alpha() * reg + 2.0 * H * phi0 * sing;
}

}  // namespace fracavg
