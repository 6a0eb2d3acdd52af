#include "curvematch/fft.hpp"

#include <cmath>

#include "curvematch/error.hpp"

namespace curvematch::fft {

int next_pow2(int n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

namespace {

// twiddle table w[j] = exp(-2*pi*i*j/n), j < n/2
std::vector<std::complex<double>> twiddles(int n) {
    std::vector<std::complex<double>> w(static_cast<std::size_t>(n / 2));
    const double step = -2.0 * 3.14159265358979323846 / n;
    for (int j = 0; j < n / 2; ++j) w[j] = std::polar(1.0, step * j);
    return w;
}

void transform_with(std::complex<double>* a, int n, bool inverse,
                    const std::vector<std::complex<double>>& tw) {
    // bit-reversal permutation
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        const int step = n / len;
        const int half = len / 2;
        for (int i = 0; i < n; i += len) {
            for (int j = 0; j < half; ++j) {
                std::complex<double> w = tw[static_cast<std::size_t>(j) * step];
                if (inverse) w = std::conj(w);
                const std::complex<double> u = a[i + j];
                const std::complex<double> v = a[i + j + half] * w;
                a[i + j] = u + v;
                a[i + j + half] = u - v;
            }
        }
    }
    if (inverse) {
        const double scale = 1.0 / n;
        for (int i = 0; i < n; ++i) a[i] *= scale;
    }
}

}  // namespace

void transform(std::complex<double>* data, int n, bool inverse) {
    if (n <= 0 || (n & (n - 1)) != 0) throw argument_error("fft size must be a power of two");
    if (n == 1) return;
    transform_with(data, n, inverse, twiddles(n));
}

void transform_2d(std::vector<std::complex<double>>& data, int nx, int ny, bool inverse) {
    if (data.size() != static_cast<std::size_t>(nx) * ny)
        throw argument_error("fft grid size mismatch");
    if ((nx & (nx - 1)) != 0 || (ny & (ny - 1)) != 0)
        throw argument_error("fft grid dims must be powers of two");

    if (nx > 1) {
        const auto twx = twiddles(nx);
        for (int y = 0; y < ny; ++y)
            transform_with(data.data() + static_cast<std::size_t>(y) * nx, nx, inverse, twx);
    }
    if (ny > 1) {
        const auto twy = twiddles(ny);
        std::vector<std::complex<double>> col(static_cast<std::size_t>(ny));
        for (int x = 0; x < nx; ++x) {
            for (int y = 0; y < ny; ++y) col[y] = data[static_cast<std::size_t>(y) * nx + x];
            transform_with(col.data(), ny, inverse, twy);
            for (int y = 0; y < ny; ++y) data[static_cast<std::size_t>(y) * nx + x] = col[y];
        }
    }
}

}  // namespace curvematch::fft
