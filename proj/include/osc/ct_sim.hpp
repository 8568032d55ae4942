#pragma once

#include <algorithm>
#include <cstdint>
#include <numbers>

#include "osc/fft.hpp"
#include "osc/parallel.hpp"
#include "osc/rng.hpp"
#include "osc/tensor.hpp"

namespace osc {

/// Parallel-beam acquisition over [0, 2pi). Detector offsets are in image
/// pixel units; the array must span the image diagonal.
struct Geometry {
    std::size_t n_views = 180;
    std::size_t n_det = 185;
    double det_spacing = 1.0;
    std::size_t image_size = 128;
};

inline void check_geometry(const Geometry& g) {
    require(g.n_views >= 2, "geometry: need at least two views");
    require(g.n_det >= 2 && g.det_spacing > 0.0, "geometry: bad detector array");
    const double diag = std::numbers::sqrt2 * static_cast<double>(g.image_size);
    require(static_cast<double>(g.n_det) * g.det_spacing >= diag,
            "geometry: detector array must span the image diagonal");
}

/// Additive soft-edged ellipse. (cx, cy) are centered coordinates
/// (x = col - (W-1)/2, y = row - (H-1)/2); angle rotates the major axis;
/// edge is the transition width in pixels (0 = hard edge).
struct Ellipse {
    double cx = 0.0, cy = 0.0;
    double rx = 1.0, ry = 1.0;
    double angle = 0.0;
    double value = 1.0;
    double edge = 0.0;
};

struct MetalDisk {
    double cx = 0.0, cy = 0.0;
    double r = 1.0;
};

struct PhantomSpec {
    std::vector<Ellipse> ellipses;
    std::vector<MetalDisk> metal;
};

struct Phantom {
    Tensor image;       // clean anatomy, clamped to [0, 1]
    Tensor metal_mask;  // binary
    Tensor metal_image; // soft-edged unit-intensity metal footprint (partial volume)
};

struct Sinogram {
    Tensor data;  // n_views x n_det line integrals
    Tensor trace; // binary metal trace
};

inline Phantom make_phantom(const PhantomSpec& spec, std::size_t size) {
    for (const Ellipse& e : spec.ellipses)
        require(e.rx > 0.0 && e.ry > 0.0, "make_phantom: degenerate ellipse");
    for (const MetalDisk& d : spec.metal)
        require(d.r > 0.0, "make_phantom: degenerate metal disk");
    Phantom ph;
    ph.image = Tensor({size, size});
    ph.metal_mask = Tensor({size, size});
    ph.metal_image = Tensor({size, size});
    const double c = 0.5 * static_cast<double>(size - 1);
    parallel_for(size, [&](std::size_t row) {
        for (std::size_t col = 0; col < size; ++col) {
            const double x = static_cast<double>(col) - c;
            const double y = static_cast<double>(row) - c;
            double v = 0.0;
            for (const Ellipse& e : spec.ellipses) {
                const double ca = std::cos(e.angle), sa = std::sin(e.angle);
                const double u = (ca * (x - e.cx) + sa * (y - e.cy)) / e.rx;
                const double w = (-sa * (x - e.cx) + ca * (y - e.cy)) / e.ry;
                const double rho = std::sqrt(u * u + w * w);
                if (e.edge <= 0.0) {
                    if (rho <= 1.0) v += e.value;
                } else {
                    // signed distance from the boundary, approximated radially
                    const double d = (rho - 1.0) * std::min(e.rx, e.ry);
                    const double wgt = std::clamp(0.5 - d / e.edge, 0.0, 1.0);
                    v += e.value * wgt;
                }
            }
            ph.image(row, col) = std::clamp(v, 0.0, 1.0);
            double metal = 0.0;
            for (const MetalDisk& d : spec.metal) {
                const double dx = x - d.cx, dy = y - d.cy;
                const double dist = std::sqrt(dx * dx + dy * dy);
                if (dist <= d.r) ph.metal_mask(row, col) = 1.0;
                // soft footprint kept a pixel inside the mask radius, so the
                // projector's bilinear smear stays within the masked region
                metal = std::max(metal, std::clamp((d.r - 1.0 - dist) / 1.2, 0.0, 1.0));
            }
            ph.metal_image(row, col) = metal;
        }
    });
    return ph;
}

/// Seeded random phantom: one body ellipse, several interior structures with
/// fairly sharp boundaries, and optionally one or two metal disks inside the
/// body. Fine structure matters: it is what sinogram interpolation destroys.
inline PhantomSpec random_phantom_spec(std::uint64_t seed, std::size_t size,
                                       bool with_metal, bool centered_metal = false) {
    Rng rng(seed);
    PhantomSpec spec;
    const double s = static_cast<double>(size);
    Ellipse body;
    body.cx = rng.uniform(-0.02, 0.02) * s;
    body.cy = rng.uniform(-0.02, 0.02) * s;
    body.rx = rng.uniform(0.34, 0.42) * s;
    body.ry = rng.uniform(0.30, 0.40) * s;
    body.angle = rng.uniform(0.0, std::numbers::pi);
    body.value = rng.uniform(0.20, 0.30);
    body.edge = 1.5;
    spec.ellipses.push_back(body);
    const std::size_t organs = 3 + rng.uniform_int(3);
    for (std::size_t i = 0; i < organs; ++i) {
        Ellipse e;
        e.cx = body.cx + rng.uniform(-0.55, 0.55) * body.rx;
        e.cy = body.cy + rng.uniform(-0.55, 0.55) * body.ry;
        e.rx = rng.uniform(0.06, 0.16) * s;
        e.ry = rng.uniform(0.06, 0.16) * s;
        e.angle = rng.uniform(0.0, std::numbers::pi);
        e.value = rng.uniform(-0.2, 0.4);
        e.edge = rng.uniform(0.8, 1.4);
        spec.ellipses.push_back(e);
    }
    // mid-sized low-contrast lumps: smooth in the image, but their projection
    // bumps curve enough inside a wide metal trace that a linear bridge
    // cannot recover them
    const std::size_t lumps = 10 + rng.uniform_int(6);
    for (std::size_t i = 0; i < lumps; ++i) {
        Ellipse e;
        e.cx = body.cx + rng.uniform(-0.75, 0.75) * body.rx;
        e.cy = body.cy + rng.uniform(-0.75, 0.75) * body.ry;
        e.rx = rng.uniform(0.04, 0.10) * s;
        e.ry = rng.uniform(0.04, 0.10) * s;
        e.angle = rng.uniform(0.0, std::numbers::pi);
        e.value = rng.uniform(0.08, 0.2) * (rng.uniform() < 0.45 ? -1.0 : 1.0);
        e.edge = rng.uniform(2.0, 3.5);
        spec.ellipses.push_back(e);
    }
    if (with_metal) {
        const std::size_t disks = 1 + rng.uniform_int(2);
        for (std::size_t i = 0; i < disks; ++i) {
            MetalDisk d;
            if (centered_metal && i == 0) {
                d.cx = rng.uniform(-1.5, 1.5);
                d.cy = rng.uniform(-1.5, 1.5);
            } else {
                d.cx = body.cx + rng.uniform(-0.55, 0.55) * body.rx;
                d.cy = body.cy + rng.uniform(-0.55, 0.55) * body.ry;
            }
            d.r = rng.uniform(0.04, 0.08) * s;
            spec.metal.push_back(d);
        }
    }
    return spec;
}

namespace detail {
inline double bilinear_at(const Tensor& img, double x, double y) {
    // (x, y) in centered coordinates
    const std::size_t H = img.rows(), W = img.cols();
    const double col = x + 0.5 * static_cast<double>(W - 1);
    const double row = y + 0.5 * static_cast<double>(H - 1);
    if (col < 0.0 || row < 0.0 || col > static_cast<double>(W - 1) ||
        row > static_cast<double>(H - 1))
        return 0.0;
    const std::size_t c0 = static_cast<std::size_t>(col);
    const std::size_t r0 = static_cast<std::size_t>(row);
    const std::size_t c1 = std::min(c0 + 1, W - 1);
    const std::size_t r1 = std::min(r0 + 1, H - 1);
    const double fc = col - static_cast<double>(c0);
    const double fr = row - static_cast<double>(r0);
    return (1.0 - fr) * ((1.0 - fc) * img(r0, c0) + fc * img(r0, c1)) +
           fr * ((1.0 - fc) * img(r1, c0) + fc * img(r1, c1));
}
} // namespace detail

/// Line integrals by ray marching at quarter-pixel steps with bilinear
/// sampling. View v is at angle 2*pi*v/n_views; detector offset d maps to
/// s = (d - (n_det-1)/2) * det_spacing along (cos, sin) of the view angle.
inline Tensor radon(const Tensor& image, const Geometry& geom) {
    require(image.ndim() == 2 && image.rows() == image.cols(), "radon: image must be square");
    check_geometry(geom);
    const double step = 0.25;
    const double half_det = 0.5 * static_cast<double>(geom.n_det - 1);
    const double T = 0.5 * std::numbers::sqrt2 * static_cast<double>(image.rows()) + 1.0;
    const std::size_t n_steps = static_cast<std::size_t>(std::ceil(2.0 * T / step));
    Tensor sino({geom.n_views, geom.n_det});
    parallel_for(geom.n_views, [&](std::size_t v) {
        const double theta = 2.0 * std::numbers::pi * static_cast<double>(v) /
                             static_cast<double>(geom.n_views);
        const double ct = std::cos(theta), st = std::sin(theta);
        for (std::size_t d = 0; d < geom.n_det; ++d) {
            const double s = (static_cast<double>(d) - half_det) * geom.det_spacing;
            double acc = 0.0;
            for (std::size_t m = 0; m < n_steps; ++m) {
                const double t = -T + (static_cast<double>(m) + 0.5) * step;
                const double x = s * ct - t * st;
                const double y = s * st + t * ct;
                acc += detail::bilinear_at(image, x, y);
            }
            sino(v, d) = acc * step;
        }
    });
    return sino;
}

/// Ram-Lak filtering per view over a zero-padded transform of length
/// 2 * n_det: bin k is scaled by min(k, N-k) / (N * det_spacing). The
/// continuous ramp output integrates to zero; truncating the padded result
/// back to n_det samples strands a small DC residue in the discarded tail,
/// so the kept segment is re-projected to zero mean.
inline Tensor ramp_filter(const Tensor& sino, double det_spacing = 1.0) {
    require(sino.ndim() == 2, "ramp_filter: sinogram must be 2D");
    const std::size_t n_det = sino.cols();
    const std::size_t N = 2 * n_det;
    std::vector<double> response(N);
    for (std::size_t k = 0; k < N; ++k)
        response[k] = static_cast<double>(std::min(k, N - k)) /
                      (static_cast<double>(N) * det_spacing);
    Tensor out({sino.rows(), n_det});
    parallel_for(sino.rows(), [&](std::size_t v) {
        std::vector<cplx> row(N, cplx(0.0, 0.0));
        for (std::size_t d = 0; d < n_det; ++d) row[d] = sino(v, d);
        std::vector<cplx> spec = dft(row, false);
        for (std::size_t k = 0; k < N; ++k) spec[k] *= response[k];
        std::vector<cplx> filt = dft(spec, true);
        double mean = 0.0;
        for (std::size_t d = 0; d < n_det; ++d) mean += filt[d].real();
        mean /= static_cast<double>(n_det);
        for (std::size_t d = 0; d < n_det; ++d) out(v, d) = filt[d].real() - mean;
    });
    return out;
}

/// Backprojection with linear detector interpolation, scaled by pi/n_views.
/// No clamping here; the pipeline clamps at its boundary.
inline Tensor fbp(const Tensor& sino, const Geometry& geom) {
    require(sino.ndim() == 2 && sino.rows() == geom.n_views && sino.cols() == geom.n_det,
            "fbp: sinogram/geometry mismatch");
    const std::size_t size = geom.image_size;
    const double c = 0.5 * static_cast<double>(size - 1);
    const double half_det = 0.5 * static_cast<double>(geom.n_det - 1);
    std::vector<double> cs(geom.n_views), sn(geom.n_views);
    for (std::size_t v = 0; v < geom.n_views; ++v) {
        const double theta = 2.0 * std::numbers::pi * static_cast<double>(v) /
                             static_cast<double>(geom.n_views);
        cs[v] = std::cos(theta);
        sn[v] = std::sin(theta);
    }
    Tensor img({size, size});
    parallel_for(size, [&](std::size_t row) {
        const double y = static_cast<double>(row) - c;
        for (std::size_t col = 0; col < size; ++col) {
            const double x = static_cast<double>(col) - c;
            double acc = 0.0;
            for (std::size_t v = 0; v < geom.n_views; ++v) {
                const double s = x * cs[v] + y * sn[v];
                const double d = s / geom.det_spacing + half_det;
                if (d < 0.0 || d > static_cast<double>(geom.n_det - 1)) continue;
                const std::size_t d0 = static_cast<std::size_t>(d);
                const std::size_t d1 = std::min(d0 + 1, geom.n_det - 1);
                const double f = d - static_cast<double>(d0);
                acc += (1.0 - f) * sino(v, d0) + f * sino(v, d1);
            }
            img(row, col) = acc * std::numbers::pi / static_cast<double>(geom.n_views);
        }
    });
    return img;
}

/// Beam-hardening-style corruption inside the metal trace: v + severity*v^2,
/// plus a stronger clipped amplification on trace border cells. The border
/// term is deliberately abrupt across detectors and views; it is what turns
/// the trace inconsistency into thin streaks rather than smooth shading.
inline Tensor corrupt(const Tensor& sino, const Tensor& trace, double severity) {
    require(sino.same_shape(trace), "corrupt: shape mismatch");
    require(severity >= 0.0, "corrupt: negative severity");
    const std::size_t V = sino.rows(), D = sino.cols();
    double smax = 0.0;
    for (double v : sino.data) smax = std::max(smax, v);
    const double cap = smax * (1.0 + 6.0 * severity);
    Tensor out = sino;
    for (std::size_t v = 0; v < V; ++v) {
        for (std::size_t d = 0; d < D; ++d) {
            if (trace(v, d) == 0.0) continue;
            double val = sino(v, d);
            val += severity * val * val;
            const bool border = (d == 0 || trace(v, d - 1) == 0.0) ||
                                (d + 1 == D || trace(v, d + 1) == 0.0);
            if (border) val *= 1.0 + 8.0 * severity;
            out(v, d) = std::min(val, cap);
        }
    }
    return out;
}

/// Replaces each traced interval per view row with linear interpolation
/// between the nearest untraced neighbors; boundary intervals extend the
/// nearest untraced value. A fully traced row is unrecoverable.
inline Tensor li_correct(const Tensor& sino, const Tensor& trace) {
    require(sino.same_shape(trace), "li_correct: shape mismatch");
    const std::size_t V = sino.rows(), D = sino.cols();
    Tensor out = sino;
    for (std::size_t v = 0; v < V; ++v) {
        std::size_t d = 0;
        while (d < D) {
            if (trace(v, d) == 0.0) {
                ++d;
                continue;
            }
            std::size_t end = d;
            while (end < D && trace(v, end) != 0.0) ++end;
            const bool has_left = d > 0;
            const bool has_right = end < D;
            if (!has_left && !has_right)
                throw std::runtime_error("li_correct: fully traced view row");
            if (!has_left) {
                for (std::size_t j = d; j < end; ++j) out(v, j) = sino(v, end);
            } else if (!has_right) {
                for (std::size_t j = d; j < end; ++j) out(v, j) = sino(v, d - 1);
            } else {
                const double left = sino(v, d - 1);
                const double right = sino(v, end);
                const double span = static_cast<double>(end - (d - 1));
                for (std::size_t j = d; j < end; ++j) {
                    const double f = static_cast<double>(j - (d - 1)) / span;
                    out(v, j) = left + (right - left) * f;
                }
            }
            d = end;
        }
    }
    return out;
}

/// Trace = exact support of the forward-projected metal mask.
inline Tensor metal_trace(const Tensor& metal_mask, const Geometry& geom) {
    Tensor proj = radon(metal_mask, geom);
    Tensor tr(proj.dims);
    for (std::size_t i = 0; i < proj.size(); ++i)
        tr.data[i] = proj.data[i] > 1e-12 ? 1.0 : 0.0;
    return tr;
}

struct PairSample {
    Tensor Y, X, I, metal_mask;
};

/// Paired sample: X from the clean phantom, Y from the metal-corrupted
/// sinogram, both through ramp-filtered backprojection and clamped at the
/// pipeline boundary.
inline PairSample make_pair_from_spec(const PhantomSpec& spec, const Geometry& geom,
                                      double severity, double metal_value = 4.0) {
    const Phantom ph = make_phantom(spec, geom.image_size);
    const Tensor clean_sino = radon(ph.image, geom);
    PairSample out;
    out.X = clamp01(fbp(ramp_filter(clean_sino, geom.det_spacing), geom));
    Tensor with_metal = ph.image;
    for (std::size_t i = 0; i < with_metal.size(); ++i)
        with_metal.data[i] += metal_value * ph.metal_image.data[i];
    Tensor sino = radon(with_metal, geom);
    const Tensor trace = metal_trace(ph.metal_mask, geom);
    sino = corrupt(sino, trace, severity);
    out.Y = clamp01(fbp(ramp_filter(sino, geom.det_spacing), geom));
    out.metal_mask = ph.metal_mask;
    out.I = Tensor(ph.metal_mask.dims);
    for (std::size_t i = 0; i < out.I.size(); ++i)
        out.I.data[i] = 1.0 - ph.metal_mask.data[i];
    return out;
}

/// Deterministic random pair from a seed.
inline PairSample make_pair(std::uint64_t seed, const Geometry& geom, double severity,
                            double metal_value = 4.0) {
    return make_pair_from_spec(random_phantom_spec(seed, geom.image_size, true), geom,
                               severity, metal_value);
}

} // namespace osc
