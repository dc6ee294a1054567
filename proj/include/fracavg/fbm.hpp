#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "fracavg/common.hpp"

namespace fracavg {

class HurstParam {
public:
    explicit HurstParam(double H);
    double value() const { return H_; }
    double alpha() const { return H_ * (1.0 - 2.0 * H_); }
    operator double() const { return H_; }

private:
    double H_;
};

struct FbmGrid {
    FbmGrid(HurstParam H, double dt, std::size_t n_steps, std::size_t n_components = 1);

    HurstParam H;
    double dt;
    std::size_t n_steps;
    std::size_t n_components;

    double time(std::size_t k) const { return static_cast<double>(k) * dt; }
    double horizon() const { return static_cast<double>(n_steps) * dt; }
};

struct FbmPath {
    FbmGrid grid;
    Eigen::MatrixXd values;  // n_components x (n_steps + 1), column 0 is zero
};

// Increment autocovariance of fractional Gaussian noise on a grid of step dt.
double fgn_autocov(double H, double dt, std::size_t k);

double fbm_covariance(const HurstParam& H, double s, double t);

// Reusable exact sampler for n fGn increments. Circulant embedding when it
// is nonnegative and n >= 64, dense Cholesky otherwise.
class FgnSampler {
public:
    FgnSampler(double H, double dt, std::size_t n);

    std::size_t size() const { return n_; }
    bool circulant() const { return circulant_; }
    std::size_t embedding_size() const { return m_; }

    // Fills out[0..n) with one draw.
    void sample(Rng& rng, double* out) const;

    // Max |target(k) - gamma(k)| of the covariance actually realized by the
    // factorization (ifft of the eigenvalues, or rows of L L^T).
    double target_error() const;

private:
    double H_, dt_;
    std::size_t n_, m_ = 0;
    bool circulant_ = false;
    std::vector<double> sqrt_eig_;  // sqrt(lambda_j / M)
    std::vector<double> eig_;
    Eigen::MatrixXd chol_;
};

FbmPath sample_fbm(const FbmGrid& grid, std::uint64_t seed);

// Same as sample_fbm but with a caller-owned sampler (amortizes setup).
FbmPath sample_fbm(const FbmGrid& grid, const FgnSampler& sampler, std::uint64_t seed,
                   std::uint64_t path_index = 0);

void write_fbm_csv(std::ostream& os, const FbmPath& path);

// Truncated Gaussian bump at scale delta, sampled on a grid of step dt.
class Mollifier {
public:
    Mollifier(double delta, double dt);

    double delta() const { return delta_; }
    double dt() const { return dt_; }
    // Support is [-w*dt, w*dt] on the sample grid.
    std::size_t half_width() const { return w_; }

    // Renormalized density and derivative at an arbitrary time.
    double phi(double t) const;
    double dphi(double t) const;

    const std::vector<double>& phi_samples() const { return phi_; }    // index j+w -> t=j*dt
    const std::vector<double>& dphi_samples() const { return dphi_; }

private:
    double delta_, dt_;
    std::size_t w_;
    double norm_, dnorm_;
    std::vector<double> phi_, dphi_;
};

enum class Extension {
    reflect,      // B(-t) := -B(t): exact for linear paths, deterministic
    independent,  // B(-t) := -B~(t), B~ an independent fBM of the same law
};

// Sampled mollified derivative. values(c, i) is d/dt(phi_delta * B)_c at time
// i * dt / sub, for i*dt/sub in [0, T - (w+1)*dt].
struct MollifiedDerivative {
    double step;
    Eigen::MatrixXd values;
    double time(std::size_t i) const { return static_cast<double>(i) * step; }
};

MollifiedDerivative mollified_derivative(const FbmPath& path, const Mollifier& moll,
                                         Extension ext = Extension::independent,
                                         std::uint64_t ext_seed = 0, std::size_t sub = 1);

// Mollified path (phi_delta * B) on the same output grid as above.
MollifiedDerivative mollified_path(const FbmPath& path, const Mollifier& moll,
                                   Extension ext = Extension::independent,
                                   std::uint64_t ext_seed = 0, std::size_t sub = 1);

// Integral of eta'' (eta = |t|^{2H}) against phi over [a, b], a <= 0 <= b.
// Optional breakpoints split the regular part (useful when phi is a narrow
// bump away from the origin).
double eta_dd_integral(const HurstParam& H, double a, double b,
                       const std::function<double(double)>& phi,
                       const std::vector<double>& breaks = {});

}  // namespace fracavg
