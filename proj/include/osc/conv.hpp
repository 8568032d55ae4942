#pragma once

#include "osc/fft.hpp"
#include "osc/tensor.hpp"

namespace osc {

/// Zero-padded convolution whose output keeps the input's spatial size.
enum class PadMode { ZeroSame };

namespace detail {
inline void check_conv_args(const Tensor& filter, const Tensor& map) {
    require(filter.ndim() == 2 && map.ndim() == 2, "conv2d: expects 2D tensors");
    require(filter.rows() == filter.cols(), "conv2d: filter must be square");
    require(filter.rows() % 2 == 1, "conv2d: filter size must be odd");
    require(filter.rows() <= std::min(map.rows(), map.cols()),
            "conv2d: filter larger than image");
}
} // namespace detail

/// True 2D convolution (flipped kernel):
///   out[i,j] = sum_{u,v} filter[u,v] * map[i-u+c, j-v+c],  c = (p-1)/2,
/// with zero contribution outside the map. The (u,v)-outer loop keeps the
/// per-pixel accumulation order fixed regardless of threading.
inline Tensor conv2d(const Tensor& filter, const Tensor& map, PadMode = PadMode::ZeroSame) {
    detail::check_conv_args(filter, map);
    const std::size_t p = filter.rows();
    const std::size_t H = map.rows(), W = map.cols();
    const std::ptrdiff_t c = static_cast<std::ptrdiff_t>((p - 1) / 2);
    Tensor out({H, W});
    for (std::size_t u = 0; u < p; ++u) {
        for (std::size_t v = 0; v < p; ++v) {
            const double f = filter(u, v);
            if (f == 0.0) continue;
            // map index (i - u + c, j - v + c) must land inside the map
            const std::ptrdiff_t du = static_cast<std::ptrdiff_t>(u) - c;
            const std::ptrdiff_t dv = static_cast<std::ptrdiff_t>(v) - c;
            const std::size_t i0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, du));
            const std::size_t i1 = static_cast<std::size_t>(
                std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(H), static_cast<std::ptrdiff_t>(H) + du));
            const std::size_t j0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, dv));
            const std::size_t j1 = static_cast<std::size_t>(
                std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(W), static_cast<std::ptrdiff_t>(W) + dv));
            for (std::size_t i = i0; i < i1; ++i) {
                const double* src = &map.data[(i - du) * W + (j0 - dv)];
                double* dst = &out.data[i * W + j0];
                for (std::size_t j = j0; j < j1; ++j) *dst++ += f * *src++;
            }
        }
    }
    return out;
}

/// Exact adjoint of conv2d under the standard inner product (a correlation):
///   out[m,n] = sum_{u,v} filter[u,v] * residual[m+u-c, n+v-c].
inline Tensor conv2d_adjoint(const Tensor& filter, const Tensor& residual,
                             PadMode = PadMode::ZeroSame) {
    detail::check_conv_args(filter, residual);
    const std::size_t p = filter.rows();
    const std::size_t H = residual.rows(), W = residual.cols();
    const std::ptrdiff_t c = static_cast<std::ptrdiff_t>((p - 1) / 2);
    Tensor out({H, W});
    for (std::size_t u = 0; u < p; ++u) {
        for (std::size_t v = 0; v < p; ++v) {
            const double f = filter(u, v);
            if (f == 0.0) continue;
            const std::ptrdiff_t du = static_cast<std::ptrdiff_t>(u) - c;
            const std::ptrdiff_t dv = static_cast<std::ptrdiff_t>(v) - c;
            // residual index (m + du, n + dv) must land inside
            const std::size_t m0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -du));
            const std::size_t m1 = static_cast<std::size_t>(
                std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(H), static_cast<std::ptrdiff_t>(H) - du));
            const std::size_t n0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -dv));
            const std::size_t n1 = static_cast<std::size_t>(
                std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(W), static_cast<std::ptrdiff_t>(W) - dv));
            for (std::size_t m = m0; m < m1; ++m) {
                const double* src = &residual.data[(m + du) * W + (n0 + dv)];
                double* dst = &out.data[m * W + n0];
                for (std::size_t n = n0; n < n1; ++n) *dst++ += f * *src++;
            }
        }
    }
    return out;
}

/// FFT-accelerated path, numerically equal to conv2d (checked to 1e-9).
inline Tensor conv2d_fft(const Tensor& filter, const Tensor& map, PadMode = PadMode::ZeroSame) {
    detail::check_conv_args(filter, map);
    const std::size_t p = filter.rows();
    const std::size_t H = map.rows(), W = map.cols();
    const std::size_t c = (p - 1) / 2;
    const std::size_t PH = next_pow2(H + p - 1);
    const std::size_t PW = next_pow2(W + p - 1);
    std::vector<cplx> A(PH * PW), B(PH * PW);
    for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j) A[i * PW + j] = map(i, j);
    for (std::size_t u = 0; u < p; ++u)
        for (std::size_t v = 0; v < p; ++v) B[u * PW + v] = filter(u, v);
    fft2d_inplace(A, PH, PW, false);
    fft2d_inplace(B, PH, PW, false);
    for (std::size_t i = 0; i < A.size(); ++i) A[i] *= B[i];
    fft2d_inplace(A, PH, PW, true);
    Tensor out({H, W});
    for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j) out(i, j) = A[(i + c) * PW + (j + c)].real();
    return out;
}

/// Gradient of conv2d(filter, map) with respect to the filter, for a given
/// upstream weight plane:  out[u,v] = sum_{i,j} weight[i,j] * map[i-u+c, j-v+c].
inline Tensor conv2d_filter_grad(const Tensor& weight, const Tensor& map, std::size_t p) {
    require(weight.same_shape(map), "conv2d_filter_grad: shape mismatch");
    require(p % 2 == 1 && p <= std::min(map.rows(), map.cols()),
            "conv2d_filter_grad: bad filter size");
    const std::size_t H = map.rows(), W = map.cols();
    const std::ptrdiff_t c = static_cast<std::ptrdiff_t>((p - 1) / 2);
    Tensor out({p, p});
    for (std::size_t u = 0; u < p; ++u) {
        for (std::size_t v = 0; v < p; ++v) {
            const std::ptrdiff_t du = static_cast<std::ptrdiff_t>(u) - c;
            const std::ptrdiff_t dv = static_cast<std::ptrdiff_t>(v) - c;
            const std::size_t i0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, du));
            const std::size_t i1 = static_cast<std::size_t>(
                std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(H), static_cast<std::ptrdiff_t>(H) + du));
            const std::size_t j0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, dv));
            const std::size_t j1 = static_cast<std::size_t>(
                std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(W), static_cast<std::ptrdiff_t>(W) + dv));
            double s = 0.0;
            for (std::size_t i = i0; i < i1; ++i) {
                const double* wrow = &weight.data[i * W + j0];
                const double* mrow = &map.data[(i - du) * W + (j0 - dv)];
                for (std::size_t j = j0; j < j1; ++j) s += *wrow++ * *mrow++;
            }
            out(u, v) = s;
        }
    }
    return out;
}

} // namespace osc
