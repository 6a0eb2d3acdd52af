#pragma once

#include <complex>
#include <vector>

namespace curvematch::fft {

// Smallest power of two >= n (n >= 1).
int next_pow2(int n);

// In-place iterative radix-2 FFT over n = 2^k points.
// inverse = true applies the conjugate transform and scales by 1/n.
void transform(std::complex<double>* data, int n, bool inverse);

// 2D FFT over a row-major ny x nx grid (both powers of two).
void transform_2d(std::vector<std::complex<double>>& data, int nx, int ny, bool inverse);

}  // namespace curvematch::fft
