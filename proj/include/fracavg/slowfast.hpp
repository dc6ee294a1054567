#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "fracavg/chain.hpp"
#include "fracavg/coefficients.hpp"
#include "fracavg/effective_diffusion.hpp"
#include "fracavg/fbm.hpp"

namespace fracavg {

// dX = eps^{1/2-H} F(X, Y(t/eps)) dB^delta/dt dt + F0(X, Y(t/eps)) dt on [0, T].
// delta is the mollifier width in the time variable of X.
struct SlowFastSpec {
    ChainModel chain;
    CoefficientField F, F0;
    HurstParam H;
    double epsilon;
    double delta;
    double T;
    double h;
    Extension ext = Extension::independent;
    double fbm_dt = 0.0;  // fBM grid step; 0 picks the largest multiple of h/2 below delta/4
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Eigen::MatrixXd> states;  // q x d per recorded time
    std::uint64_t seed = 0;
    std::uint64_t path_index = 0;
    const Eigen::MatrixXd& endpoint() const { return states.back(); }
};

class SlowFastSolver {
public:
    explicit SlowFastSolver(SlowFastSpec spec);

    const SlowFastSpec& spec() const { return spec_; }
    std::size_t steps() const { return n_; }
    double fbm_dt() const { return grid_.dt; }

    // One realization of (B, Y): mollified derivative sampled with step h/2
    // and the chain path in fast time.
    MollifiedDerivative noise(std::uint64_t seed, std::uint64_t path_index) const;
    FbmPath fbm(std::uint64_t seed, std::uint64_t path_index) const;
    std::uint64_t extension_seed(std::uint64_t seed, std::uint64_t path_index) const;
    const Mollifier& mollifier() const { return moll_; }
    std::size_t sub() const { return sub_; }
    ChainPath fast_path(std::uint64_t seed, std::uint64_t path_index) const;

    // n-point motion: all points share the realization. record_every = 0
    // keeps only the endpoints.
    Trajectory solve(const std::vector<Eigen::VectorXd>& x0, std::uint64_t seed, std::uint64_t path_index = 0,
                     std::size_t record_every = 0) const;

private:
    SlowFastSpec spec_;
    std::size_t n_;
    std::size_t sub_;
    FbmGrid grid_;
    FgnSampler sampler_;
    Mollifier moll_;
};

Trajectory solve_slow_fast(const SlowFastSpec& spec, const std::vector<Eigen::VectorXd>& x0, std::uint64_t seed);

// Euler-Maruyama for dX = W(X, dt) + G(X) dt + F0bar(X) dt, n-point motion.
Trajectory solve_limit_npoint(const EffectiveDiffusion& ed, const std::vector<Eigen::VectorXd>& x0, double T,
                              double dt_sde, std::uint64_t seed, std::uint64_t path_index = 0,
                              std::size_t record_every = 0);

}  // namespace fracavg
