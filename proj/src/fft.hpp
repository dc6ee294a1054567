#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace fracavg::detail {

// In-place forward DFT (sign -1), unnormalized. Plans are cached per size.
void fft_forward(std::vector<std::complex<double>>& data);

}  // namespace fracavg::detail
