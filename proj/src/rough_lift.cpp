#include "fracavg/rough_lift.hpp"

#include <atomic>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>

namespace fracavg {

namespace {

std::atomic<std::uint64_t> next_id{1};

// sample variance with a batch-means standard error (20 batches)
std::pair<double, double> variance_with_se(const std::vector<double>& x) {
    const std::size_t n = x.size();
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) sq[i] = (x[i] - mean) * (x[i] - mean);
    double var = 0.0;
    for (double v : sq) var += v;
    var /= static_cast<double>(n - 1);
    const std::size_t nb = 20, per = n / nb;
    double s = 0.0, s2 = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
        double m = 0.0;
        for (std::size_t i = b * per; i < (b + 1) * per; ++i) m += sq[i];
        m /= static_cast<double>(per);
        s += m;
        s2 += m * m;
    }
    const double bm = s / nb;
    const double bv = (s2 - nb * bm * bm) / (nb - 1);
    return {var, std::sqrt(std::max(bv, 0.0) / nb)};
}

}  // namespace

RoughDriver::RoughDriver(ChainPath fast, MollifiedDerivative dB, double epsilon, HurstParam H, double delta)
    : fast_(std::move(fast)), dB_(std::move(dB)), eps_(epsilon), H_(H), delta_(delta), id_(next_id++) {
    if (!(epsilon > 0.0)) throw config_error("rough driver: epsilon must be positive");
    if (dB_.values.cols() < 2) throw config_error("rough driver: empty noise");
    if (horizon() / eps_ > fast_.horizon * (1 + 1e-12)) throw config_error("rough driver: chain path too short");
    states_.resize(static_cast<std::size_t>(dB_.values.cols()));
    std::size_t cur = 0;
    for (std::size_t k = 0; k < states_.size(); ++k) {
        const double u = dB_.time(k) / eps_;
        while (cur + 1 < fast_.times.size() && fast_.times[cur + 1] <= u) ++cur;
        states_[k] = fast_.states[cur];
    }
}

double RoughDriver::horizon() const { return dB_.time(static_cast<std::size_t>(dB_.values.cols() - 1)); }

std::size_t RoughDriver::index(double t) const {
    const double r = t / dB_.step;
    const auto k = static_cast<long long>(std::llround(r));
    if (k < 0 || k >= dB_.values.cols() || std::abs(r - static_cast<double>(k)) > 1e-6)
        throw config_error("rough driver: time " + std::to_string(t) + " is not a grid point inside the horizon");
    return static_cast<std::size_t>(k);
}

Eigen::VectorXd RoughDriver::first_order(const Observable& f, double s, double t) const {
    const std::size_t a = index(s), b = index(t);
    if (b < a) throw config_error("rough driver: need s <= t");
    Eigen::VectorXd z = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(noise_dim()));
    for (std::size_t k = a; k < b; ++k) z += f[states_[k]] * dB_.values.col(static_cast<Eigen::Index>(k));
    return std::pow(eps_, 0.5 - H_.value()) * dB_.step * z;
}

Eigen::MatrixXd RoughDriver::second_order(const Observable& f, const Observable& g, double s, double t) const {
    const std::size_t a = index(s), b = index(t);
    if (b < a) throw config_error("rough driver: need s <= t");
    const auto m = static_cast<Eigen::Index>(noise_dim());
    Eigen::VectorXd run = Eigen::VectorXd::Zero(m);
    Eigen::MatrixXd zz = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t k = a; k < b; ++k) {
        const Eigen::VectorXd x = f[states_[k]] * dB_.values.col(static_cast<Eigen::Index>(k));
        const Eigen::VectorXd y = g[states_[k]] * dB_.values.col(static_cast<Eigen::Index>(k));
        zz += (run + 0.5 * x) * y.transpose();
        run += x;
    }
    return std::pow(eps_, 1.0 - 2.0 * H_.value()) * dB_.step * dB_.step * zz;
}

RoughIncrement RoughDriver::increment(const Observable& f, const Observable& g, double s, double t) const {
    RoughIncrement r;
    r.s = s;
    r.t = t;
    r.Zf = first_order(f, s, t);
    r.Zg = first_order(g, s, t);
    r.ZZ = second_order(f, g, s, t);
    r.delta = delta_;
    // observables are part of the provenance
    std::uint64_t key = id_;
    for (Eigen::Index i = 0; i < f.size(); ++i) key = stream_key(key, std::hash<double>{}(f[i]), std::hash<double>{}(g[i]));
    r.provenance = key;
    return r;
}

double chen_residual(const RoughIncrement& su, const RoughIncrement& ut, const RoughIncrement& st) {
    if (su.provenance != ut.provenance || su.provenance != st.provenance || su.delta != st.delta || ut.delta != st.delta)
        throw config_error("chen residual: increments come from different paths, observables or delta");
    if (su.s != st.s || su.t != ut.s || ut.t != st.t) throw config_error("chen residual: intervals do not chain");
    const Eigen::MatrixXd R = st.ZZ - su.ZZ - ut.ZZ - su.Zf * ut.Zg.transpose();
    return R.cwiseAbs().maxCoeff();
}

double mean_iterated_deterministic(const std::function<double(double)>& f, const std::function<double(double)>& g,
                                   double s, double t, const HurstParam& H) {
    if (!(s < t)) throw config_error("mean_iterated_deterministic: need s < t");
    boost::math::quadrature::tanh_sinh<double> ts;
    // inner: 1/2 int_s^r f(u) eta''(r - u) du, regularized at u = r
    auto inner = [&](double r) {
        if (r <= s) return 0.0;
        return 0.5 * eta_dd_integral(H, s - r, 0.0, [&](double v) { return f(r + v); });
    };
    double err = 0.0;
    const double v = ts.integrate([&](double r) { return g(r) * inner(r); }, s, t, 1e-10, &err);
    if (!std::isfinite(v) || err > 1e-6 * (1.0 + std::abs(v)))
        throw numerical_error("mean_iterated_deterministic: quadrature did not converge (error " + std::to_string(err) + ")");
    return v;
}

double mollified_iterated_mean(const std::function<double(double)>& f, const std::function<double(double)>& g,
                               double s, double t, const HurstParam& H, const Mollifier& moll) {
    const double dt = moll.dt();
    const std::size_t w = moll.half_width();
    const auto a = static_cast<long long>(std::llround(s / dt)), b = static_cast<long long>(std::llround(t / dt));
    if (std::abs(s / dt - a) > 1e-6 || std::abs(t / dt - b) > 1e-6 || b <= a)
        throw config_error("mollified_iterated_mean: s < t must be grid points");
    if (a < static_cast<long long>(w + 1)) throw config_error("mollified_iterated_mean: s too close to 0");
    // tap weights c(j): Bdot_i = sum_j c(i - j) B_j, read off from a unit impulse
    const std::size_t j0 = 2 * w + 2, n = 4 * w + 6;
    FbmPath imp{FbmGrid(H, dt, n), Eigen::MatrixXd::Zero(1, n + 1)};
    imp.values(0, j0) = 1.0;
    const MollifiedDerivative d = mollified_derivative(imp, moll, Extension::reflect);
    std::vector<std::pair<long long, double>> c;
    for (Eigen::Index i = 0; i < d.values.cols(); ++i)
        if (d.values(0, i) != 0.0) c.emplace_back(static_cast<long long>(i) - static_cast<long long>(j0), d.values(0, i));
    // stationary lag kernel E Bdot_k Bdot_{k+m}
    const std::size_t len = static_cast<std::size_t>(b - a);
    const double p = 2.0 * H.value(), scale = std::pow(dt, p);
    std::vector<double> kd(len);
    for (std::size_t m = 0; m < len; ++m) {
        double acc = 0.0;
        for (const auto& [ia, ca] : c)
            for (const auto& [ib, cb] : c) acc += ca * cb * std::pow(std::abs(static_cast<double>(ib - ia - static_cast<long long>(m))), p);
        kd[m] = -0.5 * acc * scale;
    }
    std::vector<double> fv(len), gv(len);
    for (std::size_t k = 0; k < len; ++k) {
        const double r = static_cast<double>(a + static_cast<long long>(k)) * dt;
        fv[k] = f(r);
        gv[k] = g(r);
    }
    double acc = 0.0;
    for (std::size_t l = 0; l < len; ++l) {
        double inner = 0.5 * fv[l] * kd[0];
        for (std::size_t k = 0; k < l; ++k) inner += fv[k] * kd[l - k];
        acc += gv[l] * inner;
    }
    return acc * dt * dt;
}

ChaosDomination chaos_domination_exact(const Eigen::MatrixXd& K, const HurstParam& H, double dt) {
    const Eigen::Index n = K.rows();
    if (K.cols() != n) throw config_error("chaos check: K must be square");
    Eigen::MatrixXd G(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) G(i, j) = fgn_autocov(H.value(), dt, static_cast<std::size_t>(std::abs(i - j)));
    const Eigen::MatrixXd Ks = 0.5 * (K + K.transpose());
    const Eigen::MatrixXd A = Ks * G, B = K * G, C = K.transpose() * G;
    ChaosDomination r;
    r.var_same = 2.0 * (A.array() * A.transpose().array()).sum();
    r.var_indep = (B.array() * C.transpose().array()).sum();
    return r;
}

ChaosDomination chaos_domination_check(const Eigen::MatrixXd& K, const HurstParam& H, double dt,
                                       std::size_t n_samples, std::uint64_t seed) {
    const std::size_t n = static_cast<std::size_t>(K.rows());
    if (K.cols() != K.rows()) throw config_error("chaos check: K must be square");
    if (n_samples < 40) throw config_error("chaos check: need at least 40 samples");
    FgnSampler sampler(H.value(), dt, n);
    std::vector<double> same(n_samples), indep(n_samples);
    Eigen::VectorXd x(n), y(n);
    for (std::size_t i = 0; i < n_samples; ++i) {
        Rng r1 = make_rng(seed, 0xcd, i, 0), r2 = make_rng(seed, 0xcd, i, 1);
        sampler.sample(r1, x.data());
        sampler.sample(r2, y.data());
        same[i] = x.dot(K * x);
        indep[i] = x.dot(K * y);
    }
    ChaosDomination r;
    std::tie(r.var_same, r.se_same) = variance_with_se(same);
    std::tie(r.var_indep, r.se_indep) = variance_with_se(indep);
    return r;
}

}  // namespace fracavg
