#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>

#include "osc/ct_sim.hpp"
#include "osc/fft.hpp"
#include "osc/metrics.hpp"
#include "oracles.hpp"

using namespace osc;
using std::numbers::pi;

namespace {

Geometry small_geom(std::size_t size = 96, std::size_t views = 120) {
    Geometry g;
    g.image_size = size;
    g.n_views = views;
    g.n_det = static_cast<std::size_t>(std::ceil(std::numbers::sqrt2 * size)) + 3;
    if (g.n_det % 2 == 0) ++g.n_det;
    return g;
}

Tensor ones_like(const Tensor& t) {
    Tensor r(t.dims);
    for (double& v : r.data) v = 1.0;
    return r;
}

} // namespace

TEST_CASE("make_phantom") {
    SUBCASE("empty spec gives a zero image") {
        const Phantom ph = make_phantom(PhantomSpec{}, 32);
        CHECK(max_abs(ph.image) == 0.0);
        CHECK(max_abs(ph.metal_mask) == 0.0);
    }
    SUBCASE("centered disk area matches pi r^2 within 2%") {
        PhantomSpec spec;
        spec.ellipses.push_back({0.0, 0.0, 40.0, 40.0, 0.0, 1.0, 0.0});
        const Phantom ph = make_phantom(spec, 128);
        double count = 0.0;
        for (double v : ph.image.data) count += v >= 0.5;
        CHECK(std::abs(count - pi * 1600.0) / (pi * 1600.0) <= 0.02);
    }
    SUBCASE("fixed seed reproduces bitwise") {
        const PhantomSpec s1 = random_phantom_spec(42, 96, true);
        const PhantomSpec s2 = random_phantom_spec(42, 96, true);
        const Phantom a = make_phantom(s1, 96);
        const Phantom b = make_phantom(s2, 96);
        CHECK(a.image.data == b.image.data);
        CHECK(a.metal_mask.data == b.metal_mask.data);
    }
    SUBCASE("degenerate ellipse throws") {
        PhantomSpec spec;
        spec.ellipses.push_back({0.0, 0.0, 0.0, 5.0, 0.0, 1.0, 0.0});
        CHECK_THROWS_AS(make_phantom(spec, 32), std::invalid_argument);
    }
}

TEST_CASE("radon") {
    const Geometry geom = small_geom(128, 180);
    SUBCASE("zero image projects to zero") {
        CHECK(max_abs(radon(Tensor({128, 128}), geom)) == 0.0);
    }
    SUBCASE("disk chord length law within 2% RMS") {
        PhantomSpec spec;
        spec.ellipses.push_back({0.0, 0.0, 40.0, 40.0, 0.0, 1.0, 0.0});
        const Phantom ph = make_phantom(spec, 128);
        const Tensor sino = radon(ph.image, geom);
        const double half_det = 0.5 * (geom.n_det - 1);
        for (std::size_t v : {std::size_t(0), std::size_t(45), std::size_t(97)}) {
            double num = 0.0, den = 0.0;
            for (std::size_t d = 0; d < geom.n_det; ++d) {
                const double s = (d - half_det) * geom.det_spacing;
                if (std::abs(s) >= 40.0) continue;
                const double chord = 2.0 * std::sqrt(1600.0 - s * s);
                num += (sino(v, d) - chord) * (sino(v, d) - chord);
                den += chord * chord;
            }
            CHECK(std::sqrt(num / den) <= 0.02);
        }
    }
    SUBCASE("rotating the phantom by one view cycles the sinogram") {
        const Geometry g = small_geom(96, 90);
        PhantomSpec spec = random_phantom_spec(7, 96, false);
        const Tensor sino = radon(make_phantom(spec, 96).image, g);
        const double dtheta = 2.0 * pi / static_cast<double>(g.n_views);
        PhantomSpec rotated = spec;
        for (Ellipse& e : rotated.ellipses) {
            const double cx = std::cos(dtheta) * e.cx - std::sin(dtheta) * e.cy;
            const double cy = std::sin(dtheta) * e.cx + std::cos(dtheta) * e.cy;
            e.cx = cx;
            e.cy = cy;
            e.angle += dtheta;
        }
        const Tensor sino_rot = radon(make_phantom(rotated, 96).image, g);
        double best = 1e30;
        for (int dir : {+1, -1}) {
            double num = 0.0, den = 0.0;
            for (std::size_t v = 0; v < g.n_views; ++v) {
                const std::size_t vs = (v + g.n_views + dir) % g.n_views;
                for (std::size_t d = 0; d < g.n_det; ++d) {
                    const double diff = sino_rot(vs, d) - sino(v, d);
                    num += diff * diff;
                    den += sino(v, d) * sino(v, d);
                }
            }
            best = std::min(best, std::sqrt(num / den));
        }
        CHECK(best <= 0.02);
    }
    SUBCASE("non-square image throws") {
        CHECK_THROWS_AS(radon(Tensor({64, 65}), geom), std::invalid_argument);
    }
}

TEST_CASE("ramp_filter") {
    const Geometry geom = small_geom();
    SUBCASE("zero stays zero") {
        CHECK(max_abs(ramp_filter(Tensor({10, geom.n_det}))) == 0.0);
    }
    SUBCASE("constant rows lose their DC component") {
        Tensor sino({4, geom.n_det});
        for (std::size_t v = 0; v < 4; ++v)
            for (std::size_t d = 0; d < geom.n_det; ++d) sino(v, d) = 3.0 + v;
        const Tensor out = ramp_filter(sino);
        for (std::size_t v = 0; v < 4; ++v) {
            double rowsum = 0.0;
            for (std::size_t d = 0; d < geom.n_det; ++d) rowsum += out(v, d);
            CHECK(std::abs(rowsum) / (3.0 + v) / geom.n_det <= 1e-9);
        }
    }
    SUBCASE("filtering is linear") {
        Rng rng(3);
        const Tensor s1 = oracle::random_tensor(6, geom.n_det, rng);
        const Tensor s2 = oracle::random_tensor(6, geom.n_det, rng);
        const Tensor lhs = ramp_filter(2.0 * s1 + (-0.7) * s2);
        const Tensor rhs = 2.0 * ramp_filter(s1) + (-0.7) * ramp_filter(s2);
        CHECK(oracle::rel_err(lhs, rhs) <= 1e-12);
    }
}

TEST_CASE("fbp") {
    SUBCASE("round trip reaches 30 dB at 128x128 with 360 views") {
        const Geometry geom = small_geom(128, 360);
        const PhantomSpec spec = oracle::smooth_phantom_spec(11, 128);
        const Phantom ph = make_phantom(spec, 128);
        const Tensor recon =
            clamp01(fbp(ramp_filter(radon(ph.image, geom), geom.det_spacing), geom));
        const double psnr = psnr_masked(recon, ph.image, ones_like(ph.image));
        CAPTURE(psnr);
        CHECK(psnr >= 30.0);
    }
    SUBCASE("zero sinogram reconstructs to zero") {
        const Geometry geom = small_geom(64, 90);
        CHECK(max_abs(fbp(Tensor({geom.n_views, geom.n_det}), geom)) == 0.0);
    }
    SUBCASE("backprojection is linear") {
        const Geometry geom = small_geom(48, 60);
        Rng rng(5);
        const Tensor s1 = oracle::random_tensor(geom.n_views, geom.n_det, rng);
        const Tensor s2 = oracle::random_tensor(geom.n_views, geom.n_det, rng);
        const Tensor lhs = fbp(1.3 * s1 + (-0.4) * s2, geom);
        const Tensor rhs = 1.3 * fbp(s1, geom) + (-0.4) * fbp(s2, geom);
        CHECK(oracle::rel_err(lhs, rhs) <= 1e-12);
    }
}

TEST_CASE("corrupt") {
    const Geometry geom = small_geom();
    const PhantomSpec spec = random_phantom_spec(13, geom.image_size, true, true);
    const Phantom ph = make_phantom(spec, geom.image_size);
    const Tensor sino = radon(ph.image, geom);
    const Tensor trace = metal_trace(ph.metal_mask, geom);
    SUBCASE("severity zero is the identity") {
        const Tensor out = corrupt(sino, trace, 0.0);
        CHECK(out.data == sino.data);
    }
    SUBCASE("empty trace leaves the sinogram untouched") {
        const Tensor out = corrupt(sino, Tensor(trace.dims), 0.8);
        CHECK(out.data == sino.data);
    }
    SUBCASE("negative severity throws") {
        CHECK_THROWS_AS(corrupt(sino, trace, -0.1), std::invalid_argument);
    }
    SUBCASE("higher severity degrades the reconstruction by 3 dB or more") {
        std::vector<double> drops;
        for (std::uint64_t seed : {201ULL, 202ULL, 203ULL, 204ULL, 205ULL}) {
            const PhantomSpec s = random_phantom_spec(seed, geom.image_size, true, true);
            const PairSample lo = make_pair_from_spec(s, geom, 0.1);
            const PairSample hi = make_pair_from_spec(s, geom, 0.5);
            drops.push_back(psnr_masked(lo.Y, lo.X, lo.I) - psnr_masked(hi.Y, hi.X, hi.I));
        }
        std::sort(drops.begin(), drops.end());
        CHECK(drops[2] >= 3.0);
    }
}

TEST_CASE("li_correct") {
    SUBCASE("empty trace is the identity") {
        Rng rng(7);
        const Tensor sino = oracle::random_tensor(5, 12, rng);
        const Tensor out = li_correct(sino, Tensor(sino.dims));
        CHECK(out.data == sino.data);
    }
    SUBCASE("interpolates a middle gap linearly") {
        Tensor sino({1, 4});
        sino.data = {1.0, 10.0, -3.0, 4.0};
        Tensor trace({1, 4});
        trace.data = {0.0, 1.0, 1.0, 0.0};
        const Tensor out = li_correct(sino, trace);
        CHECK(out.data[0] == 1.0);
        CHECK(out.data[1] == doctest::Approx(2.0));
        CHECK(out.data[2] == doctest::Approx(3.0));
        CHECK(out.data[3] == 4.0);
    }
    SUBCASE("boundary gaps extend the nearest value") {
        Tensor sino({1, 4});
        sino.data = {9.0, 2.0, 5.0, 7.0};
        Tensor trace({1, 4});
        trace.data = {1.0, 0.0, 0.0, 1.0};
        const Tensor out = li_correct(sino, trace);
        CHECK(out.data[0] == 2.0);
        CHECK(out.data[3] == 5.0);
    }
    SUBCASE("fully traced row is unrecoverable") {
        Tensor sino({1, 3});
        sino.data = {1.0, 2.0, 3.0};
        Tensor trace({1, 3});
        trace.data = {1.0, 1.0, 1.0};
        CHECK_THROWS_AS(li_correct(sino, trace), std::runtime_error);
    }
    SUBCASE("LI improves the reconstruction over the corrupted input") {
        const Geometry geom = small_geom();
        std::vector<double> gains;
        for (std::uint64_t seed : {301ULL, 302ULL, 303ULL, 304ULL, 305ULL}) {
            const PhantomSpec spec = random_phantom_spec(seed, geom.image_size, true);
            const Phantom ph = make_phantom(spec, geom.image_size);
            Tensor with_metal = ph.image;
            for (std::size_t i = 0; i < with_metal.size(); ++i)
                with_metal.data[i] += 4.0 * ph.metal_image.data[i];
            const Tensor trace = metal_trace(ph.metal_mask, geom);
            const Tensor bad = corrupt(radon(with_metal, geom), trace, 0.5);
            const PairSample pair = make_pair_from_spec(spec, geom, 0.5);
            const Tensor li =
                clamp01(fbp(ramp_filter(li_correct(bad, trace), geom.det_spacing), geom));
            gains.push_back(psnr_masked(li, pair.X, pair.I) -
                            psnr_masked(pair.Y, pair.X, pair.I));
        }
        std::sort(gains.begin(), gains.end());
        CHECK(gains[2] > 0.0);
    }
}

TEST_CASE("metal trace is the exact support of the projected mask") {
    const Geometry geom = small_geom(64, 60);
    const PhantomSpec spec = random_phantom_spec(17, 64, true);
    const Phantom ph = make_phantom(spec, 64);
    const Tensor proj = radon(ph.metal_mask, geom);
    const Tensor trace = metal_trace(ph.metal_mask, geom);
    for (std::size_t i = 0; i < proj.size(); ++i)
        CHECK(trace.data[i] == (proj.data[i] > 1e-12 ? 1.0 : 0.0));
}

TEST_CASE("make_pair") {
    const Geometry geom = small_geom(64, 90);
    SUBCASE("no metal and zero severity give Y identical to X") {
        PhantomSpec spec = random_phantom_spec(23, 64, false);
        const PairSample pair = make_pair_from_spec(spec, geom, 0.0);
        CHECK(pair.Y.data == pair.X.data);
        CHECK(max_abs(pair.metal_mask) == 0.0);
    }
    SUBCASE("metal plus severity produce visible artifacts") {
        const PairSample pair = make_pair(31, geom, 0.5);
        REQUIRE(frob_norm(pair.metal_mask) > 0.0);
        CHECK(psnr_masked(pair.Y, pair.X, pair.I) < 40.0);
    }
    SUBCASE("fixed seed reproduces bitwise") {
        const PairSample a = make_pair(57, geom, 0.5);
        const PairSample b = make_pair(57, geom, 0.5);
        CHECK(a.Y.data == b.Y.data);
        CHECK(a.X.data == b.X.data);
        CHECK(a.I.data == b.I.data);
    }
}

TEST_CASE("generated artifacts spread energy across orientations") {
    const Geometry geom = small_geom(96, 120);
    std::vector<double> ratios;
    for (std::uint64_t seed = 400; seed < 408; ++seed) {
        const PhantomSpec spec = random_phantom_spec(seed, geom.image_size, true, true);
        const PairSample pair = make_pair_from_spec(spec, geom, 0.5);
        const std::size_t n = next_pow2(geom.image_size);
        std::vector<cplx> buf(n * n, cplx(0.0, 0.0));
        for (std::size_t i = 0; i < geom.image_size; ++i)
            for (std::size_t j = 0; j < geom.image_size; ++j)
                buf[i * n + j] = pair.I(i, j) * (pair.Y(i, j) - pair.X(i, j));
        fft2d_inplace(buf, n, n, false);
        double bins[8] = {0, 0, 0, 0, 0, 0, 0, 0};
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double fu = i < n / 2 ? double(i) : double(i) - double(n);
                const double fv = j < n / 2 ? double(j) : double(j) - double(n);
                if (fu == 0.0 && fv == 0.0) continue;
                double ang = std::atan2(fv, fu);
                if (ang < 0.0) ang += pi;
                if (ang >= pi) ang -= pi;
                int b = static_cast<int>(ang / pi * 8.0);
                if (b == 8) b = 7;
                bins[b] += std::norm(buf[i * n + j]);
            }
        double lo = bins[0], hi = bins[0];
        for (double b : bins) {
            lo = std::min(lo, b);
            hi = std::max(hi, b);
        }
        ratios.push_back(lo / hi);
    }
    std::sort(ratios.begin(), ratios.end());
    CHECK(ratios[ratios.size() / 2] >= 0.2);
}
