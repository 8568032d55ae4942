#pragma once

#include <cstdio>
#include <fstream>
#include <span>
#include <string>

#include "osc/conv.hpp"
#include "osc/filter_param.hpp"
#include "osc/parallel.hpp"
#include "osc/rng.hpp"
#include "osc/tensor_io.hpp"

namespace osc {

/// Per-channel artifact response maps, one H x W plane per (l, k) pair,
/// ordered l-major, k-minor to match the bank.
struct FeatureMaps {
    std::size_t height = 0, width = 0;
    std::vector<Tensor> maps;

    FeatureMaps() = default;
    FeatureMaps(std::size_t h, std::size_t w, std::size_t channels)
        : height(h), width(w), maps(channels, Tensor({h, w})) {}

    std::size_t channels() const { return maps.size(); }
};

inline double l1_norm(const FeatureMaps& m) {
    double s = 0.0;
    for (const Tensor& t : m.maps) s += l1_norm(t);
    return s;
}

inline double dot(const FeatureMaps& a, const FeatureMaps& b) {
    require(a.channels() == b.channels(), "dot: channel mismatch");
    double s = 0.0;
    for (std::size_t c = 0; c < a.channels(); ++c) s += dot(a.maps[c], b.maps[c]);
    return s;
}

inline double frob_norm(const FeatureMaps& m) {
    double s = 0.0;
    for (const Tensor& t : m.maps) s += sq_norm(t);
    return std::sqrt(s);
}

/// A = sum_c filters[c] (x) M_c. Channels are convolved in parallel into
/// private buffers and reduced in channel order, so the result does not
/// depend on the thread count.
inline Tensor synthesize_bank(std::span<const Tensor> filters, const FeatureMaps& M) {
    require(filters.size() == M.channels(), "synthesize_bank: channel mismatch");
    require(!filters.empty(), "synthesize_bank: empty bank");
    std::vector<Tensor> partial(filters.size());
    parallel_for(filters.size(), [&](std::size_t c) {
        partial[c] = conv2d(filters[c], M.maps[c]);
    });
    Tensor out({M.height, M.width});
    for (const Tensor& t : partial)
        for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += t.data[i];
    return out;
}

/// Channel c of the result is conv2d_adjoint(filters[c], residual).
inline FeatureMaps adjoint_bank(std::span<const Tensor> filters, const Tensor& residual) {
    require(residual.ndim() == 2, "adjoint_bank: residual must be 2D");
    FeatureMaps out(residual.rows(), residual.cols(), filters.size());
    parallel_for(filters.size(), [&](std::size_t c) {
        out.maps[c] = conv2d_adjoint(filters[c], residual);
    });
    return out;
}

/// Orientation-shared convolutional dictionary: one CoefficientSet drives all
/// L*K filters C_k(theta_l). The bank is rebuilt whenever coefficients change
/// (see with_coefficients); treat instances as immutable values.
struct OSCDictionary {
    CoefficientSet coeffs;
    std::size_t L = 1;
    BasisVariant variant = BasisVariant::AliasFree;
    std::vector<Tensor> bank; // l-major, k-minor

    std::size_t p() const { return coeffs.p; }
    std::size_t K() const { return coeffs.K; }
    std::size_t channels() const { return bank.size(); }
};

inline OSCDictionary make_dictionary(CoefficientSet coeffs, std::size_t L,
                                     BasisVariant variant = BasisVariant::AliasFree) {
    require(L >= 1, "make_dictionary: L must be positive");
    OSCDictionary d;
    d.coeffs = std::move(coeffs);
    d.L = L;
    d.variant = variant;
    d.bank = assemble_bank(d.coeffs, L, variant);
    return d;
}

inline OSCDictionary with_coefficients(const OSCDictionary& dict, CoefficientSet coeffs) {
    return make_dictionary(std::move(coeffs), dict.L, dict.variant);
}

inline Tensor synthesize(const OSCDictionary& dict, const FeatureMaps& M) {
    require(M.channels() == dict.channels(), "synthesize: channel mismatch");
    return synthesize_bank(dict.bank, M);
}

inline FeatureMaps adjoint(const OSCDictionary& dict, const Tensor& residual) {
    return adjoint_bank(dict.bank, residual);
}

enum class ParamCountMode { Parametrized, FreeFilters };

/// Learnable-parameter count: shared coefficients (a and b per (q,t,k), minus
/// the K unused b_00k entries) versus L*K unconstrained p x p filters.
inline std::size_t param_count(const OSCDictionary& dict, ParamCountMode mode) {
    const std::size_t p = dict.p(), K = dict.K();
    if (mode == ParamCountMode::Parametrized) return 2 * p * p * K - K;
    return p * p * dict.L * K;
}

/// Largest eigenvalue of adjoint(synthesize(.)) by power iteration, used to
/// derive safe solver step sizes. Deterministic for a fixed seed.
inline double operator_norm_estimate(std::span<const Tensor> filters, std::size_t h,
                                     std::size_t w, int iterations,
                                     std::uint64_t seed = 0x05c0ffeeULL) {
    Rng rng(seed);
    FeatureMaps v(h, w, filters.size());
    for (Tensor& t : v.maps)
        for (double& x : t.data) x = rng.uniform(-1.0, 1.0);
    double lambda = 0.0;
    for (int it = 0; it < iterations; ++it) {
        FeatureMaps tv = adjoint_bank(filters, synthesize_bank(filters, v));
        const double n = frob_norm(tv);
        if (n == 0.0) return 0.0;
        lambda = dot(v, tv) / (frob_norm(v) * frob_norm(v));
        const double inv = 1.0 / n;
        for (Tensor& t : tv.maps)
            for (double& x : t.data) x *= inv;
        v = std::move(tv);
    }
    return lambda;
}

inline double operator_norm_estimate(const OSCDictionary& dict, std::size_t h,
                                     std::size_t w, int iterations,
                                     std::uint64_t seed = 0x05c0ffeeULL) {
    return operator_norm_estimate(std::span<const Tensor>(dict.bank), h, w, iterations, seed);
}

inline const char* variant_name(BasisVariant v) {
    return v == BasisVariant::AliasFree ? "aliasfree" : "plain";
}

inline BasisVariant variant_from_name(const std::string& s) {
    if (s == "aliasfree") return BasisVariant::AliasFree;
    if (s == "plain") return BasisVariant::Plain;
    throw std::runtime_error("unknown basis variant: " + s);
}

namespace detail {
inline std::string meta_sibling_osct(const std::string& meta_path) {
    const auto pos = meta_path.rfind('.');
    const std::string stem =
        pos == std::string::npos ? meta_path : meta_path.substr(0, pos);
    return stem + ".osct";
}
} // namespace detail

/// Writes <stem>.meta (fixed key order: p, L, K, h, variant) plus the
/// coefficient tensor as <stem>.osct with dims {2, K, p, p} (a first, b second).
inline void save_dictionary(const OSCDictionary& dict, const std::string& meta_path) {
    std::ofstream f(meta_path);
    if (!f) throw std::runtime_error("save_dictionary: cannot open " + meta_path);
    char hbuf[64];
    std::snprintf(hbuf, sizeof(hbuf), "%.17g", dict.coeffs.h);
    f << "p=" << dict.p() << "\n"
      << "L=" << dict.L << "\n"
      << "K=" << dict.K() << "\n"
      << "h=" << hbuf << "\n"
      << "variant=" << variant_name(dict.variant) << "\n";
    if (!f) throw std::runtime_error("save_dictionary: write failed for " + meta_path);
    Tensor c({2, dict.K(), dict.p(), dict.p()});
    const std::size_t half = dict.coeffs.a.size();
    for (std::size_t i = 0; i < half; ++i) {
        c.data[i] = dict.coeffs.a[i];
        c.data[half + i] = dict.coeffs.b[i];
    }
    write_osct(detail::meta_sibling_osct(meta_path), c);
}

inline OSCDictionary load_dictionary(const std::string& meta_path) {
    std::ifstream f(meta_path);
    if (!f) throw std::runtime_error("load_dictionary: cannot open " + meta_path);
    std::size_t p = 0, L = 0, K = 0;
    double h = 0.0;
    std::string variant;
    std::string line;
    while (std::getline(f, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "p") p = std::stoul(val);
        else if (key == "L") L = std::stoul(val);
        else if (key == "K") K = std::stoul(val);
        else if (key == "h") h = std::stod(val);
        else if (key == "variant") variant = val;
    }
    if (p == 0 || L == 0 || K == 0 || h <= 0.0 || variant.empty())
        throw std::runtime_error("load_dictionary: incomplete header in " + meta_path);
    Tensor c = read_osct(detail::meta_sibling_osct(meta_path));
    if (c.dims != std::vector<std::size_t>{2, K, p, p})
        throw std::runtime_error("load_dictionary: coefficient tensor shape mismatch");
    CoefficientSet coeffs(p, K, h);
    const std::size_t half = coeffs.a.size();
    for (std::size_t i = 0; i < half; ++i) {
        coeffs.a[i] = c.data[i];
        coeffs.b[i] = c.data[half + i];
    }
    return make_dictionary(std::move(coeffs), L, variant_from_name(variant));
}

} // namespace osc
