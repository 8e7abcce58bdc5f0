#pragma once

// Minimal discrete Fourier transforms: an in-place radix-2 FFT for
// power-of-two lengths and a direct evaluation fallback for everything else.
// Transforms are unnormalized; sign is the exponent sign of the kernel
// exp(sign * i * 2 pi j k / n).

#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

namespace shapebridge {
namespace fft {

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline void radix2_in_place(std::vector<std::complex<double>>& a, int sign) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double angle = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
        const std::complex<double> root = std::polar(1.0, angle);
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                std::complex<double> u = a[i + k];
                std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= root;
            }
        }
    }
}

inline std::vector<std::complex<double>> direct(const std::vector<std::complex<double>>& a,
                                                int sign) {
    const std::size_t n = a.size();
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            const double angle =
                sign * 2.0 * std::numbers::pi * static_cast<double>(j * k) / static_cast<double>(n);
            acc += a[j] * std::polar(1.0, angle);
        }
        out[k] = acc;
    }
    return out;
}

// Unnormalized DFT of arbitrary length; radix-2 when possible.
inline std::vector<std::complex<double>> transform(std::vector<std::complex<double>> a,
                                                   int sign) {
    if (is_power_of_two(a.size())) {
        radix2_in_place(a, sign);
        return a;
    }
    return direct(a, sign);
}

}  // namespace fft
}  // namespace shapebridge
