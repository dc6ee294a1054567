#include "fracavg/slowfast.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace fracavg {

namespace {

constexpr double kBlowUp = 1e8;

std::size_t checked_steps(double T, double h, const char* what) {
    const double r = T / h;
    const auto n = static_cast<std::size_t>(std::llround(r));
    if (n == 0 || std::abs(r - static_cast<double>(n)) > 1e-6 * r)
        throw config_error(std::string(what) + ": horizon must be an integer multiple of the step");
    return n;
}

std::size_t fbm_sub(const SlowFastSpec& s) {
    const double half = 0.5 * s.h;
    if (s.fbm_dt > 0.0) {
        const double r = s.fbm_dt / half;
        const auto k = static_cast<std::size_t>(std::llround(r));
        if (k == 0 || std::abs(r - static_cast<double>(k)) > 1e-9 * r)
            throw config_error("slow-fast: fbm_dt must be a multiple of h/2");
        return k;
    }
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(0.25 * s.delta / half * (1 + 1e-12))));
}

void blow_up(const Eigen::MatrixXd& X, double t, std::uint64_t seed, std::uint64_t idx) {
    if (X.allFinite() && X.cwiseAbs().maxCoeff() <= kBlowUp) return;
    std::ostringstream os;
    os << "blow-up: |X| exceeded 1e8 (or non-finite) at t = " << t << " (seed " << seed << ", path " << idx << ")";
    throw numerical_error(os.str());
}

}  // namespace

SlowFastSolver::SlowFastSolver(SlowFastSpec spec)
    : spec_(std::move(spec)),
      n_(checked_steps(spec_.T, spec_.h, "slow-fast")),
      sub_(fbm_sub(spec_)),
      grid_(spec_.H, 0.5 * spec_.h * static_cast<double>(sub_), 1, 1),
      sampler_(spec_.H, 0.5 * spec_.h * static_cast<double>(sub_), 1),
      moll_(spec_.delta, 0.5 * spec_.h * static_cast<double>(sub_)) {
    const auto& s = spec_;
    if (!(s.epsilon > 0.0) || !(s.delta > 0.0) || !(s.h > 0.0)) throw config_error("slow-fast: epsilon, delta, h must be positive");
    if (s.h > std::min(s.delta, s.epsilon) / 20.0 * (1 + 1e-12))
        throw config_error("slow-fast: resolution rule h <= min(delta, epsilon)/20 violated");
    if (s.F.states() != s.chain.size()) throw config_error("slow-fast: F and chain disagree on the number of states");
    if (s.F0.dim() != 0 && (s.F0.dim() != s.F.dim() || s.F0.states() != s.chain.size() || s.F0.noise_dim() != 1))
        throw config_error("slow-fast: F0 must be d x 1 over the same chain");
    if (s.H.value() > 0.5 && !s.F.is_centered(s.chain.mu()))
        throw config_error("slow-fast: F must be centered under mu when H > 1/2");
    // The fBM must extend past T by the mollifier support. The margin does not
    // depend on delta (unless the support is wider), so delta studies with a
    // fixed fbm_dt see the same Brownian sample.
    const std::size_t w = moll_.half_width();
    const std::size_t m = s.F.noise_dim();
    const std::size_t core = (n_ * 2 + sub_ - 1) / sub_;
    const std::size_t need = core + std::max(core / 8 + 2, w + 2);
    grid_ = FbmGrid(s.H, grid_.dt, need, m);
    sampler_ = FgnSampler(s.H, grid_.dt, need);
}

FbmPath SlowFastSolver::fbm(std::uint64_t seed, std::uint64_t path_index) const {
    return sample_fbm(grid_, sampler_, seed, path_index);
}

std::uint64_t SlowFastSolver::extension_seed(std::uint64_t seed, std::uint64_t path_index) const {
    return stream_key(seed, 0xe7, path_index);
}

MollifiedDerivative SlowFastSolver::noise(std::uint64_t seed, std::uint64_t path_index) const {
    return mollified_derivative(fbm(seed, path_index), moll_, spec_.ext, extension_seed(seed, path_index), sub_);
}

ChainPath SlowFastSolver::fast_path(std::uint64_t seed, std::uint64_t path_index) const {
    return sample_trajectory(spec_.chain, spec_.T / spec_.epsilon, seed, path_index);
}

Trajectory SlowFastSolver::solve(const std::vector<Eigen::VectorXd>& x0, std::uint64_t seed,
                                 std::uint64_t path_index, std::size_t record_every) const {
    if (x0.empty()) throw config_error("slow-fast: need at least one initial point");
    const auto& s = spec_;
    const std::size_t d = s.F.dim(), q = x0.size();
    for (const auto& x : x0)
        if (static_cast<std::size_t>(x.size()) != d) throw config_error("slow-fast: initial point has wrong dimension");
    const MollifiedDerivative dB = noise(seed, path_index);
    const ChainPath Y = fast_path(seed, path_index);
    const double scale = std::pow(s.epsilon, 0.5 - s.H.value());
    const bool drift = s.F0.dim() != 0;

    // exact state of Y(t / eps) at nondecreasing stage times
    std::size_t cursor = 0;
    auto state_at = [&](double t) {
        const double u = t / s.epsilon;
        while (cursor + 1 < Y.times.size() && Y.times[cursor + 1] <= u) ++cursor;
        return Y.states[cursor];
    };
    // stage index j -> time j h/2
    auto rhs = [&](const Eigen::MatrixXd& X, std::size_t j, Eigen::MatrixXd& out) {
        const int y = state_at(0.5 * s.h * static_cast<double>(j));
        const Eigen::VectorXd b = dB.values.col(static_cast<Eigen::Index>(j));
        for (std::size_t p = 0; p < q; ++p) {
            const Eigen::VectorXd x = X.row(p).transpose();
            Eigen::VectorXd v = scale * (s.F.evaluate(x, y) * b);
            if (drift) v += s.F0.evaluate(x, y).col(0);
            out.row(p) = v.transpose();
        }
    };

    Trajectory tr;
    tr.seed = seed;
    tr.path_index = path_index;
    Eigen::MatrixXd X(q, d);
    for (std::size_t p = 0; p < q; ++p) X.row(p) = x0[p].transpose();
    if (record_every) {
        tr.times.push_back(0.0);
        tr.states.push_back(X);
    }
    Eigen::MatrixXd k1(q, d), k2(q, d), k3(q, d), k4(q, d);
    for (std::size_t i = 0; i < n_; ++i) {
        rhs(X, 2 * i, k1);
        rhs(X + 0.5 * s.h * k1, 2 * i + 1, k2);
        rhs(X + 0.5 * s.h * k2, 2 * i + 1, k3);
        rhs(X + s.h * k3, 2 * i + 2, k4);
        X += s.h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        const double t = s.h * static_cast<double>(i + 1);
        blow_up(X, t, seed, path_index);
        if (record_every && ((i + 1) % record_every == 0) && i + 1 < n_) {
            tr.times.push_back(t);
            tr.states.push_back(X);
        }
    }
    tr.times.push_back(s.T);
    tr.states.push_back(X);
    return tr;
}

Trajectory solve_slow_fast(const SlowFastSpec& spec, const std::vector<Eigen::VectorXd>& x0, std::uint64_t seed) {
    return SlowFastSolver(spec).solve(x0, seed);
}

Trajectory solve_limit_npoint(const EffectiveDiffusion& ed, const std::vector<Eigen::VectorXd>& x0, double T,
                              double dt_sde, std::uint64_t seed, std::uint64_t path_index,
                              std::size_t record_every) {
    if (x0.empty()) throw config_error("limit sde: need at least one initial point");
    if (!(dt_sde > 0.0) || dt_sde > T / 100.0 * (1 + 1e-12)) throw config_error("limit sde: need dt <= T/100");
    const std::size_t n = checked_steps(T, dt_sde, "limit sde");
    const std::size_t d = ed.dim(), q = x0.size();
    for (const auto& x : x0)
        if (static_cast<std::size_t>(x.size()) != d) throw config_error("limit sde: initial point has wrong dimension");
    Rng rng = make_rng(seed, 0x5d, path_index);
    std::normal_distribution<double> N(0.0, 1.0);
    const double sq = std::sqrt(dt_sde);

    Trajectory tr;
    tr.seed = seed;
    tr.path_index = path_index;
    std::vector<Eigen::VectorXd> pts = x0;
    auto snapshot = [&] {
        Eigen::MatrixXd M(q, d);
        for (std::size_t p = 0; p < q; ++p) M.row(p) = pts[p].transpose();
        return M;
    };
    if (record_every) {
        tr.times.push_back(0.0);
        tr.states.push_back(snapshot());
    }
    Eigen::VectorXd z(q * d);
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::MatrixXd S = psd_sqrt(ed.w_field_covariance(pts));
        for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = N(rng);
        const Eigen::VectorXd dW = sq * (S * z);
        for (std::size_t p = 0; p < q; ++p) {
            const Eigen::VectorXd b = ed.drift_correction(pts[p]) + ed.f0_bar(pts[p]);
            pts[p] += dW.segment(static_cast<Eigen::Index>(p * d), static_cast<Eigen::Index>(d)) + dt_sde * b;
        }
        const double t = dt_sde * static_cast<double>(i + 1);
        blow_up(snapshot(), t, seed, path_index);
        if (record_every && ((i + 1) % record_every == 0) && i + 1 < n) {
            tr.times.push_back(t);
            tr.states.push_back(snapshot());
        }
    }
    tr.times.push_back(T);
    tr.states.push_back(snapshot());
    return tr;
}

}  // namespace fracavg
