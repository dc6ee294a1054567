#pragma once

#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "fracavg/config.hpp"
#include "fracavg/stats.hpp"

namespace fracavg {

enum class RowKind {
    z,      // |z| <= z threshold
    p,      // p >= p threshold
    bound,  // estimate <= target
    tol,    // |estimate - target| <= tol
    info,   // reported only
};

struct StatRow {
    std::string name;
    double estimate = 0.0;
    double stderr_ = NAN;
    double target = NAN;
    double z = NAN;
    double tol = NAN;
    bool pass = true;
    RowKind kind = RowKind::info;
    json oracle;  // formula id and parameters for rows with a derived target
};

struct StatReport {
    std::string experiment;
    std::uint64_t seed = 0;
    std::vector<StatRow> rows;
    std::vector<std::string> warnings;
    json extra = json::object();
    // extra artifacts (file name, contents), written next to the tables
    std::vector<std::pair<std::string, std::string>> files;

    StatRow& add_z(std::string name, const Estimate& est, double target, json oracle = {});
    StatRow& add_z2(std::string name, const Estimate& a, const Estimate& b, json oracle = {});
    StatRow& add_p(std::string name, double p, json oracle = {});
    StatRow& add_bound(std::string name, double value, double bound, json oracle = {});
    StatRow& add_tol(std::string name, double value, double target, double tol, double se = NAN, json oracle = {});
    StatRow& add_info(std::string name, double value, double se = NAN, double target = NAN);

    // Recomputes pass flags of z and p rows; with bonferroni the family
    // level is split over the number of rows of each kind.
    void apply_thresholds(double z_threshold, double p_threshold, bool bonferroni);
    bool passed() const;
};

// f(i) for i < n; results land in index order, so the reduction never
// depends on the worker count.
template <class T>
std::vector<T> parallel_map(std::size_t n, std::size_t workers, const std::function<T(std::size_t)>& f) {
    std::vector<std::optional<T>> out(n);
    auto unwrap = [&] {
        std::vector<T> r;
        r.reserve(n);
        for (auto& x : out) r.push_back(std::move(*x));
        return r;
    };
    if (workers <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) out[i].emplace(f(i));
        return unwrap();
    }
    std::size_t next = 0;
    std::mutex mtx;
    std::exception_ptr err;
    auto work = [&] {
        while (true) {
            std::size_t i;
            {
                std::lock_guard<std::mutex> lk(mtx);
                if (next >= n || err) return;
                i = next++;
            }
            try {
                out[i].emplace(f(i));
            } catch (...) {
                std::lock_guard<std::mutex> lk(mtx);
                if (!err) err = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, n); ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
    return unwrap();
}

// Constant-in-x field with one row per observable and scalar noise.
CoefficientField observable_field(const std::vector<Observable>& fs);

StatReport run_sample_fbm(ExperimentConfig& cfg);
StatReport run_simulate(ExperimentConfig& cfg);
StatReport run_sigma(ExperimentConfig& cfg);
StatReport run_clt_experiment(ExperimentConfig& cfg);
StatReport run_second_order_experiment(ExperimentConfig& cfg);
StatReport run_homogenization_experiment(ExperimentConfig& cfg);
StatReport run_lln_check(ExperimentConfig& cfg);
StatReport run_rough_check(ExperimentConfig& cfg);
// `graph_text` (when non-empty) is a graph description file used instead of
// the config's graph section.
StatReport run_graph_check(ExperimentConfig& cfg, const std::string& graph_text = "");

// int_0^T f(Y_s) g(Y_{s+lag}) ds along one path (horizon >= T + lag).
double lagged_time_integral(const ChainPath& path, const Observable& f, const Observable& g, double T, double lag);

struct ScalingFit {
    double exponent = 0.0, se = 0.0;
    std::vector<double> gaps, norms, norm_se;
};

// L2 norms of J and 𝕁 over [0, gap] from the exact conditional law given
// the chain path (gap in slow time, chain time gap / eps), fitted on log-log.
struct MomentScaling {
    ScalingFit first_small, first_large, second_small, second_large;
};
MomentScaling moment_scaling(const ChainModel& chain, const Observable& f, double H, double eps,
                             const std::vector<double>& small_gaps, const std::vector<double>& large_gaps,
                             std::size_t n_paths, std::uint64_t seed, std::size_t batches = 20);

struct ChaosSummary {
    std::size_t kernels = 0, failures = 0;
    double worst = 0.0;  // max of var_same / (2 var_indep (1 + 3 rel))
};
// Random dense kernels with standard normal entries on an n-point grid.
ChaosSummary chaos_domination_sweep(double H, std::size_t kernels, std::size_t n, std::size_t samples,
                                    std::uint64_t seed);

}  // namespace fracavg
