#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "osc/dict_learn.hpp"
#include "oracles.hpp"

using namespace osc;

namespace {

TrainSample random_sample(const OSCDictionary& dict, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Tensor Y({n, n}), X({n, n}), I({n, n});
    for (double& v : Y.data) v = rng.uniform();
    for (double& v : X.data) v = rng.uniform();
    for (double& v : I.data) v = rng.uniform() < 0.9 ? 1.0 : 0.0;
    return make_train_sample(std::move(Y), std::move(X), std::move(I));
}

FeatureMaps random_maps(std::size_t n, std::size_t channels, std::uint64_t seed) {
    Rng rng(seed);
    FeatureMaps m(n, n, channels);
    for (Tensor& t : m.maps)
        for (double& v : t.data) v = rng.uniform(-0.5, 0.5);
    return m;
}

double coeff_loss(const OSCDictionary& proto, const CoefficientSet& c, const FeatureMaps& M,
                  const TrainSample& s, double lambda1) {
    const OSCDictionary d = with_coefficients(proto, c);
    Tensor r = synthesize(d, M);
    for (std::size_t i = 0; i < r.size(); ++i) r.data[i] = s.A_obs.data[i] - r.data[i];
    return masked_sq_norm(r, s.I) + lambda1 * masked_l1_norm(r, s.I);
}

} // namespace

TEST_CASE("coeff_gradient") {
    const std::size_t n = 12, p = 5, K = 2, L = 3;
    const OSCDictionary dict =
        make_dictionary(oracle::random_smooth_coefficients(p, K, 0.25, 21, 2.0), L);
    SUBCASE("zero maps give a zero gradient") {
        const TrainSample s = random_sample(dict, n, 1);
        const CoeffGrad g = coeff_gradient(dict, FeatureMaps(n, n, dict.channels()), s, 0.4);
        for (double v : g.a) CHECK(v == 0.0);
        for (double v : g.b) CHECK(v == 0.0);
    }
    SUBCASE("perfect fit gives a zero gradient at lambda1 = 0") {
        const FeatureMaps M = random_maps(n, dict.channels(), 2);
        const Tensor A = synthesize(dict, M);
        Tensor I(A.dims);
        for (double& v : I.data) v = 1.0;
        const TrainSample s = make_train_sample(A, Tensor(A.dims), I);
        const CoeffGrad g = coeff_gradient(dict, M, s, 0.0);
        for (double v : g.a) CHECK(v == 0.0);
        for (double v : g.b) CHECK(v == 0.0);
    }
    SUBCASE("matches central finite differences at lambda1 = 0") {
        const TrainSample s = random_sample(dict, n, 3);
        const FeatureMaps M = random_maps(n, dict.channels(), 4);
        const CoeffGrad g = coeff_gradient(dict, M, s, 0.0);
        Rng rng(5);
        const double eps = 1e-6;
        for (int rep = 0; rep < 20; ++rep) {
            CoefficientSet da(p, K, 0.25), db(p, K, 0.25);
            for (std::size_t i = 0; i < da.a.size(); ++i) {
                da.a[i] = rng.uniform(-1.0, 1.0);
                db.b[i] = rng.uniform(-1.0, 1.0);
            }
            CoefficientSet cp = dict.coeffs, cm = dict.coeffs;
            for (std::size_t i = 0; i < cp.a.size(); ++i) {
                cp.a[i] += eps * da.a[i];
                cp.b[i] += eps * db.b[i];
                cm.a[i] -= eps * da.a[i];
                cm.b[i] -= eps * db.b[i];
            }
            const double fd =
                (coeff_loss(dict, cp, M, s, 0.0) - coeff_loss(dict, cm, M, s, 0.0)) /
                (2.0 * eps);
            double an = 0.0;
            for (std::size_t i = 0; i < g.a.size(); ++i)
                an += g.a[i] * da.a[i] + g.b[i] * db.b[i];
            CHECK(std::abs(fd - an) / (std::abs(fd) + 1e-12) <= 1e-5);
        }
    }
    SUBCASE("shape mismatch throws") {
        const TrainSample s = random_sample(dict, n, 6);
        CHECK_THROWS_AS(coeff_gradient(dict, FeatureMaps(n, n, 1), s, 0.0),
                        std::invalid_argument);
    }
}

TEST_CASE("train recovers a planted streak dictionary") {
    const std::size_t n = 24;
    const OSCDictionary truth = make_dictionary(oracle::streak_coefficients(9, 2, 0.25, 7), 4);
    std::vector<TrainSample> ds;
    for (int i = 0; i < 6; ++i) {
        const oracle::PlantedInstance pl =
            oracle::make_planted(truth, n, 5000 + i, 0.005, 3.0, 4.0);
        ds.push_back(make_train_sample(pl.A, Tensor(pl.A.dims), pl.I));
    }
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.lr = 1e-3;
    cfg.alpha = 0.2;
    cfg.inner_iters = 35;
    cfg.seed = 100;
    OSCDictionary init = make_dictionary(random_coefficients(9, 2, 0.25, cfg.seed), 4);
    {
        CoefficientSet c = init.coeffs;
        normalize_coefficients(c, init.variant);
        init = with_coefficients(init, std::move(c));
    }
    const TrainResult res = train(ds, init, cfg);
    REQUIRE(res.loss_curve.size() == 51);
    CHECK(res.loss_curve.back() <= 0.2 * res.loss_curve.front());
    // norm constraint holds after training
    for (std::size_t k = 0; k < res.dict.K(); ++k) {
        const double nrm =
            frob_norm(assemble_filter(res.dict.coeffs, k, 0.0, res.dict.variant));
        CHECK(std::abs(nrm - 1.0) <= 1e-9);
    }
    // the bank is exactly the shared-coefficient assembly at every angle
    for (std::size_t l = 0; l < res.dict.L; ++l)
        for (std::size_t k = 0; k < res.dict.K(); ++k) {
            const Tensor direct = assemble_filter(
                res.dict.coeffs, k, 2.0 * std::numbers::pi * l / res.dict.L, res.dict.variant);
            CHECK(oracle::rel_err(res.dict.bank[l * res.dict.K() + k], direct) <= 1e-14);
        }
}

TEST_CASE("train with lr = 0 leaves coefficients unchanged and the loss flat") {
    const OSCDictionary dict =
        make_dictionary(oracle::random_smooth_coefficients(9, 2, 0.25, 31, 2.0), 4);
    std::vector<TrainSample> ds;
    for (int i = 0; i < 2; ++i) ds.push_back(random_sample(dict, 16, 50 + i));
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.lr = 0.0;
    cfg.alpha = 0.05;
    cfg.inner_iters = 8;
    cfg.seed = 9;
    cfg.norm_constraint = false;
    const TrainResult res = train(ds, dict, cfg);
    CHECK(res.dict.coeffs.a == dict.coeffs.a);
    CHECK(res.dict.coeffs.b == dict.coeffs.b);
    REQUIRE(res.loss_curve.size() == 5);
    for (std::size_t e = 1; e < res.loss_curve.size(); ++e)
        CHECK(res.loss_curve[e] == res.loss_curve[1]);
}

TEST_CASE("training is deterministic for a fixed seed") {
    const OSCDictionary truth = make_dictionary(oracle::streak_coefficients(9, 2, 0.25, 3), 4);
    std::vector<TrainSample> ds;
    for (int i = 0; i < 3; ++i) {
        const oracle::PlantedInstance pl = oracle::make_planted(truth, 16, 700 + i);
        ds.push_back(make_train_sample(pl.A, Tensor(pl.A.dims), pl.I));
    }
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.lr = 1e-3;
    cfg.alpha = 0.2;
    cfg.inner_iters = 10;
    cfg.seed = 77;
    const OSCDictionary init = make_dictionary(random_coefficients(9, 2, 0.25, cfg.seed), 4);
    const TrainResult a = train(ds, init, cfg);
    const TrainResult b = train(ds, init, cfg);
    CHECK(a.dict.coeffs.a == b.dict.coeffs.a);
    CHECK(a.dict.coeffs.b == b.dict.coeffs.b);
    CHECK(a.loss_curve == b.loss_curve);
}

TEST_CASE("training_loss") {
    const OSCDictionary dict =
        make_dictionary(oracle::random_smooth_coefficients(9, 2, 0.25, 41, 2.0), 4);
    TrainConfig cfg;
    cfg.alpha = 0.1;
    cfg.inner_iters = 10;
    SUBCASE("zero artifact layers give exactly zero loss") {
        std::vector<TrainSample> ds;
        Tensor X({16, 16}), I({16, 16});
        for (double& v : I.data) v = 1.0;
        Rng rng(1);
        for (double& v : X.data) v = rng.uniform();
        ds.push_back(make_train_sample(X, X, I)); // Y == X, so A_obs == 0
        CHECK(training_loss(dict, ds, cfg) == 0.0);
    }
    SUBCASE("lambda1 = 0 equals the pure masked squared error, recomputed independently") {
        std::vector<TrainSample> ds;
        ds.push_back(random_sample(dict, 16, 61));
        ds.push_back(random_sample(dict, 16, 62));
        cfg.lambda1 = 0.0;
        const double got = training_loss(dict, ds, cfg);
        const double lam = operator_norm_estimate(dict, 16, 16, 50);
        const double eta = 0.95 / lam;
        double want = 0.0;
        for (const TrainSample& s : ds) {
            const FeatureMaps M =
                sparse_code(dict.bank, s.A_obs, s.I, cfg.alpha, cfg.inner_iters, eta);
            Tensor A({16, 16});
            for (std::size_t c = 0; c < dict.channels(); ++c)
                A = A + oracle::conv2d_brute(dict.bank[c], M.maps[c]);
            for (std::size_t i = 0; i < A.size(); ++i) {
                const double r = s.A_obs.data[i] - A.data[i];
                want += s.I.data[i] * r * r;
            }
        }
        want /= ds.size();
        CHECK(got == doctest::Approx(want).epsilon(1e-12));
    }
    SUBCASE("empty dataset is rejected by train") {
        CHECK_THROWS_AS(train({}, dict, cfg), std::invalid_argument);
    }
}
