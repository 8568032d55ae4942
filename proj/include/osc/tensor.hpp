#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <utility>
#include <vector>

namespace osc {

inline void require(bool cond, const char* what) {
    if (!cond) throw std::invalid_argument(what);
}

/// Dense row-major tensor of doubles. Images are dims {rows, cols};
/// higher-rank data (coefficient stacks, filter banks on disk) use more dims.
struct Tensor {
    std::vector<std::size_t> dims;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::initializer_list<std::size_t> d)
        : dims(d), data(numel(dims), 0.0) {}
    explicit Tensor(std::vector<std::size_t> d)
        : dims(std::move(d)), data(numel(dims), 0.0) {}

    static std::size_t numel(const std::vector<std::size_t>& d) {
        std::size_t n = 1;
        for (std::size_t e : d) n *= e;
        return n;
    }

    std::size_t size() const { return data.size(); }
    std::size_t ndim() const { return dims.size(); }
    std::size_t rows() const { return dims.at(0); }
    std::size_t cols() const { return dims.at(1); }

    double& operator()(std::size_t i, std::size_t j) { return data[i * dims[1] + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * dims[1] + j]; }

    bool same_shape(const Tensor& o) const { return dims == o.dims; }
};

inline Tensor zeros_like(const Tensor& t) { return Tensor(t.dims); }

inline bool all_finite(const Tensor& t) {
    for (double v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

inline double dot(const Tensor& a, const Tensor& b) {
    require(a.same_shape(b), "dot: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

inline double sq_norm(const Tensor& t) {
    double s = 0.0;
    for (double v : t.data) s += v * v;
    return s;
}

inline double frob_norm(const Tensor& t) { return std::sqrt(sq_norm(t)); }

inline double l1_norm(const Tensor& t) {
    double s = 0.0;
    for (double v : t.data) s += std::abs(v);
    return s;
}

inline double max_abs(const Tensor& t) {
    double m = 0.0;
    for (double v : t.data) m = std::max(m, std::abs(v));
    return m;
}

inline Tensor operator+(const Tensor& a, const Tensor& b) {
    require(a.same_shape(b), "tensor add: shape mismatch");
    Tensor r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r.data[i] += b.data[i];
    return r;
}

inline Tensor operator-(const Tensor& a, const Tensor& b) {
    require(a.same_shape(b), "tensor sub: shape mismatch");
    Tensor r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r.data[i] -= b.data[i];
    return r;
}

inline Tensor operator*(double s, const Tensor& a) {
    Tensor r = a;
    for (double& v : r.data) v *= s;
    return r;
}

/// Pointwise product, the Hadamard mask application.
inline Tensor hadamard(const Tensor& a, const Tensor& b) {
    require(a.same_shape(b), "hadamard: shape mismatch");
    Tensor r = a;
    for (std::size_t i = 0; i < r.size(); ++i) r.data[i] *= b.data[i];
    return r;
}

/// sum_i mask[i] * t[i]^2, mask binary.
inline double masked_sq_norm(const Tensor& t, const Tensor& mask) {
    require(t.same_shape(mask), "masked_sq_norm: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) s += mask.data[i] * t.data[i] * t.data[i];
    return s;
}

inline double masked_l1_norm(const Tensor& t, const Tensor& mask) {
    require(t.same_shape(mask), "masked_l1_norm: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) s += mask.data[i] * std::abs(t.data[i]);
    return s;
}

inline Tensor clamp01(const Tensor& t) {
    Tensor r = t;
    for (double& v : r.data) v = std::min(1.0, std::max(0.0, v));
    return r;
}

} // namespace osc
