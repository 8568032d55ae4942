#pragma once

#include <array>
#include <cstdint>
#include <numbers>

#include "osc/tensor.hpp"

namespace osc {

/// Fourier basis flavor. Plain uses raw frequencies (q, t); AliasFree remaps
/// them to the centered band so rotated evaluation stays free of aliasing.
/// AliasFree is the default everywhere outside aliasing-comparison tests.
enum class BasisVariant { Plain, AliasFree };

/// Expansion coefficients a_{qtk}, b_{qtk} shared across all rotation angles.
/// b at (q,t) = (0,0) multiplies an identically-zero basis and is kept at 0.
struct CoefficientSet {
    std::size_t p = 0; // odd filter size
    std::size_t K = 0; // filters per orientation
    double h = 0.25;   // mesh size of the sampling grid
    std::vector<double> a; // K*p*p, index (k, q, t)
    std::vector<double> b;

    CoefficientSet() = default;
    CoefficientSet(std::size_t p_, std::size_t K_, double h_)
        : p(p_), K(K_), h(h_), a(K_ * p_ * p_, 0.0), b(K_ * p_ * p_, 0.0) {
        require(p_ % 2 == 1 && p_ >= 1, "CoefficientSet: p must be odd");
        require(K_ >= 1, "CoefficientSet: K must be positive");
        require(h_ > 0.0, "CoefficientSet: h must be positive");
    }

    std::size_t idx(std::size_t k, std::size_t q, std::size_t t) const {
        return (k * p + q) * p + t;
    }
    double& a_at(std::size_t k, std::size_t q, std::size_t t) { return a[idx(k, q, t)]; }
    double a_at(std::size_t k, std::size_t q, std::size_t t) const { return a[idx(k, q, t)]; }
    double& b_at(std::size_t k, std::size_t q, std::size_t t) { return b[idx(k, q, t)]; }
    double b_at(std::size_t k, std::size_t q, std::size_t t) const { return b[idx(k, q, t)]; }
};

/// Frequency remap I_p: y for y <= p/2, else y - p. The comparison is done in
/// integers (2y <= p) so the half-band boundary is exact.
inline int index_remap(std::size_t y, std::size_t p) {
    require(y < p, "index_remap: index out of range");
    return 2 * y <= p ? static_cast<int>(y) : static_cast<int>(y) - static_cast<int>(p);
}

inline double support_radius(std::size_t p, double h) {
    return 0.5 * static_cast<double>(p + 1) * h;
}

/// Raised-cosine radial mask: 1 at the origin, exactly 0 for ||x|| >= (p+1)h/2.
inline double radial_mask(std::array<double, 2> x, std::size_t p, double h) {
    const double r = std::hypot(x[0], x[1]);
    const double R = support_radius(p, h);
    if (r >= R) return 0.0;
    return 0.5 * (1.0 + std::cos(std::numbers::pi * r / R));
}

/// Applies T_theta = [[cos, -sin], [sin, cos]]^T to x.
inline std::array<double, 2> rotate_coords(double theta, std::array<double, 2> x) {
    const double c = std::cos(theta), s = std::sin(theta);
    return {c * x[0] + s * x[1], -s * x[0] + c * x[1]};
}

/// Evaluates the (q, t) cosine/sine basis pair at x.
inline std::pair<double, double> eval_basis(std::size_t q, std::size_t t,
                                            std::array<double, 2> x, BasisVariant variant,
                                            std::size_t p, double h) {
    require(q < p && t < p, "eval_basis: frequency index out of range");
    const double mask = radial_mask(x, p, h);
    if (mask == 0.0) return {0.0, 0.0};
    double fq, ft;
    if (variant == BasisVariant::AliasFree) {
        fq = static_cast<double>(index_remap(q, p));
        ft = static_cast<double>(index_remap(t, p));
    } else {
        fq = static_cast<double>(q);
        ft = static_cast<double>(t);
    }
    const double ang =
        2.0 * std::numbers::pi / (static_cast<double>(p) * h) * (fq * x[0] + ft * x[1]);
    return {mask * std::cos(ang), mask * std::sin(ang)};
}

/// Centered sampling grid; element (i, j) holds ((i-(p-1)/2)h, (j-(p-1)/2)h),
/// so the middle element is exactly (0, 0).
inline std::vector<std::array<double, 2>> grid_coords(std::size_t p, double h) {
    require(p % 2 == 1, "grid_coords: p must be odd");
    std::vector<std::array<double, 2>> g(p * p);
    const double half = static_cast<double>((p - 1) / 2);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j)
            g[i * p + j] = {(static_cast<double>(i) - half) * h,
                            (static_cast<double>(j) - half) * h};
    return g;
}

/// Grid points on or outside the mask support radius. Rotation preserves the
/// radius exactly in real arithmetic but not in floating point, so assembly
/// skips these points outright to keep the support invariant exact.
inline std::vector<bool> support_flags(std::size_t p, double h) {
    const auto grid = grid_coords(p, h);
    const double R = support_radius(p, h);
    std::vector<bool> inside(p * p);
    for (std::size_t g = 0; g < p * p; ++g)
        inside[g] = std::hypot(grid[g][0], grid[g][1]) < R;
    return inside;
}

/// Sampled basis tensors phi^c, phi^s at every bank angle theta_l = 2*pi*l/L,
/// regenerated deterministically from (p, h, L, variant). Layout is
/// [l][q][t][pixel] flattened.
struct BasisCache {
    std::size_t p = 0, L = 0;
    double h = 0.0;
    BasisVariant variant = BasisVariant::AliasFree;
    std::vector<double> phi_c, phi_s;

    const double* phic_at(std::size_t l, std::size_t q, std::size_t t) const {
        return &phi_c[((l * p + q) * p + t) * p * p];
    }
    const double* phis_at(std::size_t l, std::size_t q, std::size_t t) const {
        return &phi_s[((l * p + q) * p + t) * p * p];
    }
};

inline BasisCache build_basis_cache(std::size_t p, double h, std::size_t L,
                                    BasisVariant variant) {
    require(L >= 1, "build_basis_cache: L must be positive");
    BasisCache cache;
    cache.p = p;
    cache.L = L;
    cache.h = h;
    cache.variant = variant;
    cache.phi_c.assign(L * p * p * p * p, 0.0);
    cache.phi_s.assign(L * p * p * p * p, 0.0);
    const auto grid = grid_coords(p, h);
    const auto inside = support_flags(p, h);
    for (std::size_t l = 0; l < L; ++l) {
        const double theta =
            2.0 * std::numbers::pi * static_cast<double>(l) / static_cast<double>(L);
        for (std::size_t q = 0; q < p; ++q) {
            for (std::size_t t = 0; t < p; ++t) {
                double* pc = &cache.phi_c[((l * p + q) * p + t) * p * p];
                double* ps = &cache.phi_s[((l * p + q) * p + t) * p * p];
                for (std::size_t g = 0; g < p * p; ++g) {
                    if (!inside[g]) continue;
                    auto [cv, sv] = eval_basis(q, t, rotate_coords(theta, grid[g]),
                                               variant, p, h);
                    pc[g] = cv;
                    ps[g] = sv;
                }
            }
        }
    }
    return cache;
}

/// [C_k(theta)]_ij = sum_{q,t} a_{qtk} phi^c_qt(T_theta x_ij)
///                 + b_{qtk} phi^s_qt(T_theta x_ij), for arbitrary theta.
inline Tensor assemble_filter(const CoefficientSet& coeffs, std::size_t k, double theta,
                              BasisVariant variant) {
    require(k < coeffs.K, "assemble_filter: filter index out of range");
    const std::size_t p = coeffs.p;
    const auto grid = grid_coords(p, coeffs.h);
    const auto inside = support_flags(p, coeffs.h);
    Tensor filter({p, p});
    for (std::size_t q = 0; q < p; ++q) {
        for (std::size_t t = 0; t < p; ++t) {
            const double aq = coeffs.a_at(k, q, t);
            const double bq = (q == 0 && t == 0) ? 0.0 : coeffs.b_at(k, q, t);
            if (aq == 0.0 && bq == 0.0) continue;
            for (std::size_t g = 0; g < p * p; ++g) {
                if (!inside[g]) continue;
                auto [cv, sv] =
                    eval_basis(q, t, rotate_coords(theta, grid[g]), variant, p, coeffs.h);
                filter.data[g] += aq * cv + bq * sv;
            }
        }
    }
    return filter;
}

/// Cached-basis assembly at a bank angle index.
inline Tensor assemble_filter_cached(const CoefficientSet& coeffs, std::size_t k,
                                     const BasisCache& cache, std::size_t l) {
    require(k < coeffs.K, "assemble_filter_cached: filter index out of range");
    require(l < cache.L, "assemble_filter_cached: angle index out of range");
    require(cache.p == coeffs.p, "assemble_filter_cached: cache/coeff size mismatch");
    const std::size_t p = coeffs.p;
    Tensor filter({p, p});
    for (std::size_t q = 0; q < p; ++q) {
        for (std::size_t t = 0; t < p; ++t) {
            const double aq = coeffs.a_at(k, q, t);
            const double bq = (q == 0 && t == 0) ? 0.0 : coeffs.b_at(k, q, t);
            if (aq == 0.0 && bq == 0.0) continue;
            const double* pc = cache.phic_at(l, q, t);
            const double* ps = cache.phis_at(l, q, t);
            for (std::size_t g = 0; g < p * p; ++g)
                filter.data[g] += aq * pc[g] + bq * ps[g];
        }
    }
    return filter;
}

/// Full bank at theta_l = 2*pi*l/L, ordered l-major, k-minor.
inline std::vector<Tensor> assemble_bank(const CoefficientSet& coeffs, std::size_t L,
                                         BasisVariant variant) {
    const BasisCache cache = build_basis_cache(coeffs.p, coeffs.h, L, variant);
    std::vector<Tensor> bank;
    bank.reserve(L * coeffs.K);
    for (std::size_t l = 0; l < L; ++l)
        for (std::size_t k = 0; k < coeffs.K; ++k)
            bank.push_back(assemble_filter_cached(coeffs, k, cache, l));
    return bank;
}

} // namespace osc
