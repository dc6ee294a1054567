#include "fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>

namespace fracavg::detail {

namespace {

struct PlanCache {
    std::mutex mu;
    std::map<std::size_t, fftw_plan> plans;
    ~PlanCache() {
        for (auto& [n, p] : plans) fftw_destroy_plan(p);
    }
};

PlanCache& cache() {
    static PlanCache c;
    return c;
}

fftw_plan plan_for(std::size_t n) {
    auto& c = cache();
    std::lock_guard lock(c.mu);
    auto it = c.plans.find(n);
    if (it != c.plans.end()) return it->second;
    // planning needs scratch arrays; execution goes through the new-array API
    std::vector<std::complex<double>> scratch(n);
    auto* p = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), p, p, FFTW_FORWARD,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    c.plans.emplace(n, plan);
    return plan;
}

}  // namespace

void fft_forward(std::vector<std::complex<double>>& data) {
    if (data.empty()) return;
    fftw_plan plan = plan_for(data.size());
    auto* p = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(plan, p, p);
}

}  // namespace fracavg::detail
