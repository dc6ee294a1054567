#include "fracavg/chain.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <functional>
#include <sstream>
#include <unsupported/Eigen/MatrixFunctions>

namespace fracavg {

namespace {

std::vector<int> reachable(const Eigen::MatrixXd& Q, int start, bool reverse) {
    const int n = static_cast<int>(Q.rows());
    std::vector<int> seen(n, 0), stack{start};
    seen[start] = 1;
    while (!stack.empty()) {
        int s = stack.back();
        stack.pop_back();
        for (int t = 0; t < n; ++t) {
            const double rate = reverse ? Q(t, s) : Q(s, t);
            if (t != s && rate > 0.0 && !seen[t]) {
                seen[t] = 1;
                stack.push_back(t);
            }
        }
    }
    return seen;
}

void validate_generator(const Eigen::MatrixXd& Q) {
    if (Q.rows() == 0 || Q.rows() != Q.cols()) throw config_error("generator must be square and nonempty");
    for (Eigen::Index i = 0; i < Q.rows(); ++i) {
        double row = 0.0, scale = 0.0;
        for (Eigen::Index j = 0; j < Q.cols(); ++j) {
            if (!std::isfinite(Q(i, j))) throw config_error("generator has non-finite entries");
            if (i != j && Q(i, j) < 0.0) {
                std::ostringstream msg;
                msg << "generator off-diagonal entry Q[" << i << "][" << j << "] is negative";
                throw config_error(msg.str());
            }
            row += Q(i, j);
            scale = std::max(scale, std::abs(Q(i, j)));
        }
        if (std::abs(row) > 1e-12 * std::max(1.0, scale)) {
            std::ostringstream msg;
            msg << "generator row " << i << " sums to " << row << ", expected 0";
            throw config_error(msg.str());
        }
    }
    const int n = static_cast<int>(Q.rows());
    auto fwd = reachable(Q, 0, false), bwd = reachable(Q, 0, true);
    std::vector<int> bad;
    for (int s = 0; s < n; ++s)
        if (!fwd[s] || !bwd[s]) bad.push_back(s);
    if (!bad.empty()) {
        std::ostringstream msg;
        msg << "chain is reducible: states {";
        for (std::size_t i = 0; i < bad.size(); ++i) msg << (i ? "," : "") << bad[i];
        msg << "} do not communicate with state 0";
        throw config_error(msg.str());
    }
}

}  // namespace

Eigen::VectorXd stationary_measure(const Eigen::MatrixXd& Q) {
    validate_generator(Q);
    const Eigen::Index n = Q.rows();
    if (n == 1) return Eigen::VectorXd::Ones(1);
    // mu Q = 0 with sum(mu) = 1: replace one equation by the normalization
    Eigen::MatrixXd A = Q.transpose();
    A.row(n - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs[n - 1] = 1.0;
    Eigen::VectorXd mu = A.fullPivLu().solve(rhs);
    if ((mu.array() <= 0.0).any()) throw numerical_error("stationary measure has nonpositive entries");
    return mu / mu.sum();
}

ChainModel::ChainModel(Eigen::MatrixXd Q) : Q_(std::move(Q)) {
    mu_ = stationary_measure(Q_);
    const Eigen::Index n = Q_.rows();
    if (n == 1) {
        lambda_ = Eigen::VectorXcd::Zero(1);
        V_ = Vinv_ = Eigen::MatrixXcd::Identity(1, 1);
        diagonalizable_ = true;
        cond_ = 1.0;
        gap_ = std::numeric_limits<double>::infinity();
        return;
    }
    Eigen::EigenSolver<Eigen::MatrixXd> es(-Q_);
    lambda_ = es.eigenvalues();
    V_ = es.eigenvectors();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(V_);
    const auto& sv = svd.singularValues();
    cond_ = sv[0] / sv[sv.size() - 1];
    diagonalizable_ = std::isfinite(cond_) && cond_ < 1e8;
    if (diagonalizable_) Vinv_ = V_.inverse();
    lambda_.cwiseAbs().minCoeff(&zero_);
    gap_ = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i)
        if (i != zero_) gap_ = std::min(gap_, lambda_[i].real());
    if (!(gap_ > 1e-10)) throw numerical_error("chain has no spectral gap");
}

bool ChainModel::reversible(double tol) const {
    for (Eigen::Index i = 0; i < Q_.rows(); ++i)
        for (Eigen::Index j = 0; j < i; ++j)
            if (std::abs(mu_[i] * Q_(i, j) - mu_[j] * Q_(j, i)) > tol) return false;
    return true;
}

Eigen::MatrixXd semigroup_matrix(const ChainModel& model, double t) {
    if (t < 0.0) throw config_error("semigroup: t must be nonnegative");
    if (t == 0.0) return Eigen::MatrixXd::Identity(model.size(), model.size());
    Eigen::MatrixXd Qt = model.Q() * t;
    return Qt.exp();
}

Observable semigroup_apply(const ChainModel& model, double t, const Observable& f) {
    if (t == 0.0) return f;
    return semigroup_matrix(model, t) * f;
}

Observable fractional_power(const ChainModel& model, double alpha, const Observable& f) {
    if (!(alpha > -1.0 && alpha < 1.0)) throw config_error("fractional power: alpha must lie in (-1, 1)");
    if (alpha < 0.0 && std::abs(model.mean(f)) > 1e-10)
        throw config_error("fractional power: negative powers need a mean-zero observable");
    if (alpha == 0.0) return model.center(f);
    if (!model.diagonalizable())
        throw numerical_error("fractional power: generator is not diagonalizable within tolerance");
    Eigen::VectorXcd c = model.eigenvectors_inv() * f.cast<std::complex<double>>();
    for (Eigen::Index i = 0; i < c.size(); ++i)
        c[i] = (i == model.zero_mode()) ? 0.0 : c[i] * std::pow(model.eigenvalues()[i], alpha);
    Eigen::VectorXcd r = model.eigenvectors() * c;
    const double im = r.imag().cwiseAbs().maxCoeff();
    if (im > 1e-9 * std::max(1.0, r.real().cwiseAbs().maxCoeff()))
        throw numerical_error("fractional power: imaginary residue above tolerance");
    return r.real();
}

Observable fractional_power_quadrature(const ChainModel& model, double alpha, const Observable& f,
                                       double* tail_bound) {
    if (!(alpha > -1.0 && alpha < 1.0)) throw config_error("fractional power: alpha must lie in (-1, 1)");
    if (alpha < 0.0 && std::abs(model.mean(f)) > 1e-10)
        throw config_error("fractional power: negative powers need a mean-zero observable");
    if (alpha == 0.0) return model.center(f);
    const double Tstar = 40.0 / model.gap();
    const double fsup = f.cwiseAbs().maxCoeff();
    const std::size_t n = model.size();
    Observable out(n);
    using boost::math::quadrature::gauss_kronrod;

    if (alpha < 0.0) {
        // u = t^{-alpha}: t^{-alpha-1} dt = du / (-alpha)
        const double umax = std::pow(Tstar, -alpha);
        for (std::size_t i = 0; i < n; ++i) {
            auto g = [&](double u) {
                const double t = std::pow(u, -1.0 / alpha);
                return semigroup_apply(model, t, f)[i];
            };
            out[i] = gauss_kronrod<double, 31>::integrate(g, 0.0, umax, 15, 1e-13) / (-alpha);
        }
        out /= std::tgamma(-alpha);
        if (tail_bound)
            *tail_bound = fsup * std::pow(Tstar, -alpha - 1.0) * std::exp(-40.0) / model.gap() /
                          std::abs(std::tgamma(-alpha));
        return out;
    }
    // u = t^{1-alpha}: t^{-alpha-1}(P_t f - f) dt = (P_t f - f)/t du / (1-alpha)
    const double umax = std::pow(Tstar, 1.0 - alpha);
    // P_t f - f without cancellation: top-right block of exp(t [[Q, Qf], [0, 0]])
    Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + 1, n + 1);
    aug.topLeftCorner(n, n) = model.Q();
    aug.topRightCorner(n, 1) = model.Q() * f;
    const Observable Qf = model.Q() * f;
    for (std::size_t i = 0; i < n; ++i) {
        auto g = [&](double u) {
            if (u == 0.0) return Qf[i];
            const double t = std::pow(u, 1.0 / (1.0 - alpha));
            Eigen::MatrixXd E = (aug * t).exp();
            return E(i, n) / t;
        };
        out[i] = gauss_kronrod<double, 31>::integrate(g, 0.0, umax, 15, 1e-13) / (1.0 - alpha);
    }
    // beyond T*, P_t f is <f> to e^{-40}
    const double m = model.mean(f);
    for (std::size_t i = 0; i < n; ++i) out[i] += (m - f[i]) * std::pow(Tstar, -alpha) / alpha;
    out /= std::tgamma(-alpha);
    if (tail_bound)
        *tail_bound = fsup * std::pow(Tstar, -alpha - 1.0) * std::exp(-40.0) / model.gap() /
                      std::abs(std::tgamma(-alpha));
    return out;
}

int ChainPath::state_at(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t i = it == times.begin() ? 0 : static_cast<std::size_t>(it - times.begin()) - 1;
    return states[i];
}

ChainPath sample_trajectory(const ChainModel& model, double T, std::uint64_t seed,
                            std::uint64_t path_index) {
    if (!(T > 0.0)) throw config_error("sample_trajectory: horizon must be positive");
    Rng rng = make_rng(seed, 0xc4, path_index);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const Eigen::MatrixXd& Q = model.Q();
    const int n = static_cast<int>(model.size());
    auto draw = [&](auto weight, double total) {
        double r = U(rng) * total, acc = 0.0;
        int last = -1;
        for (int j = 0; j < n; ++j) {
            const double w = weight(j);
            if (w <= 0.0) continue;
            last = j;
            acc += w;
            if (r < acc) return j;
        }
        return last;
    };
    ChainPath path;
    path.horizon = T;
    int s = draw([&](int j) { return model.mu()[j]; }, 1.0);
    path.times.push_back(0.0);
    path.states.push_back(s);
    double t = 0.0;
    while (true) {
        const double rate = -Q(s, s);
        if (rate <= 0.0) break;
        std::exponential_distribution<double> E(rate);
        t += E(rng);
        if (t > T) break;
        s = draw([&](int j) { return j == s ? 0.0 : Q(s, j); }, rate);
        path.times.push_back(t);
        path.states.push_back(s);
    }
    return path;
}

double cumulant_coefficient(std::size_t nb) {
    if (nb == 0) throw config_error("cumulant coefficient needs at least one block");
    double f = std::tgamma(static_cast<double>(nb));
    return (nb % 2 == 1) ? f : -f;
}

std::vector<std::vector<std::vector<int>>> set_partitions(int k) {
    std::vector<std::vector<std::vector<int>>> out;
    if (k <= 0) return out;
    std::vector<int> a(k, 0);
    std::function<void(int, int)> rec = [&](int i, int nb) {
        if (i == k) {
            std::vector<std::vector<int>> blocks(nb);
            for (int j = 0; j < k; ++j) blocks[a[j]].push_back(j);
            out.push_back(std::move(blocks));
            return;
        }
        for (int b = 0; b <= nb; ++b) {
            a[i] = b;
            rec(i + 1, std::max(nb, b + 1));
        }
    };
    a[0] = 0;
    rec(1, 1);
    return out;
}

namespace {

void check_times(std::span<const Observable> fs, std::span<const double> times) {
    if (fs.empty() || fs.size() != times.size()) throw config_error("cumulant: need k >= 1 observables with times");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (times[i] < times[i - 1]) throw config_error("cumulant: times must be sorted");
}

double subset_moment(const ChainModel& model, std::span<const Observable> fs,
                     std::span<const double> times, const std::vector<int>& idx) {
    Observable g = fs[idx.back()];
    for (int i = static_cast<int>(idx.size()) - 2; i >= 0; --i) {
        const double dt = times[idx[i + 1]] - times[idx[i]];
        g = (fs[idx[i]].array() * semigroup_apply(model, dt, g).array()).matrix();
    }
    return model.mu().dot(g);
}

}  // namespace

double joint_moment(const ChainModel& model, std::span<const Observable> fs,
                    std::span<const double> times) {
    check_times(fs, times);
    std::vector<int> all(fs.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    return subset_moment(model, fs, times, all);
}

double joint_cumulant(const ChainModel& model, std::span<const Observable> fs,
                      std::span<const double> times) {
    check_times(fs, times);
    const int k = static_cast<int>(fs.size());
    if (k > 10) throw config_error("joint cumulant: k > 10 rejected");
    std::vector<double> memo(std::size_t{1} << k, std::nan(""));
    auto moment = [&](const std::vector<int>& block) {
        unsigned mask = 0;
        for (int i : block) mask |= 1u << i;
        if (std::isnan(memo[mask])) memo[mask] = subset_moment(model, fs, times, block);
        return memo[mask];
    };
    double total = 0.0;
    for (const auto& part : set_partitions(k)) {
        double prod = cumulant_coefficient(part.size());
        for (const auto& b : part) prod *= moment(b);
        total += prod;
    }
    return total;
}

}  // namespace fracavg
