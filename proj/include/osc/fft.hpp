#pragma once

#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace osc {

using cplx = std::complex<double>;

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

/// Iterative radix-2 Cooley-Tukey, in place. n must be a power of two.
inline void fft_inplace(std::vector<cplx>& a, bool inverse) {
    const std::size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0)
        throw std::invalid_argument("fft_inplace: length must be a power of two");
    // bit reversal
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        double ang = 2.0 * std::numbers::pi / static_cast<double>(len);
        if (!inverse) ang = -ang;
        const cplx wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                cplx u = a[i + k];
                cplx v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse) {
        const double inv = 1.0 / static_cast<double>(n);
        for (cplx& x : a) x *= inv;
    }
}

/// Direct O(n^2) transform for arbitrary lengths (used where an exact
/// non-power-of-two length is part of the contract, e.g. the ramp filter).
inline std::vector<cplx> dft(const std::vector<cplx>& in, bool inverse) {
    const std::size_t n = in.size();
    std::vector<cplx> tw(n);
    const double sgn = inverse ? 1.0 : -1.0;
    for (std::size_t k = 0; k < n; ++k) {
        double ang = sgn * 2.0 * std::numbers::pi * static_cast<double>(k) /
                     static_cast<double>(n);
        tw[k] = cplx(std::cos(ang), std::sin(ang));
    }
    std::vector<cplx> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        cplx s(0.0, 0.0);
        for (std::size_t j = 0; j < n; ++j) s += in[j] * tw[(j * k) % n];
        out[k] = s;
    }
    if (inverse) {
        const double inv = 1.0 / static_cast<double>(n);
        for (cplx& x : out) x *= inv;
    }
    return out;
}

/// 2D FFT over a row-major h x w complex buffer (both extents powers of two).
inline void fft2d_inplace(std::vector<cplx>& a, std::size_t h, std::size_t w, bool inverse) {
    std::vector<cplx> row(w), col(h);
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) row[j] = a[i * w + j];
        fft_inplace(row, inverse);
        for (std::size_t j = 0; j < w; ++j) a[i * w + j] = row[j];
    }
    for (std::size_t j = 0; j < w; ++j) {
        for (std::size_t i = 0; i < h; ++i) col[i] = a[i * w + j];
        fft_inplace(col, inverse);
        for (std::size_t i = 0; i < h; ++i) a[i * w + j] = col[i];
    }
}

} // namespace osc
