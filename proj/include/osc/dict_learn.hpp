#pragma once

#include "osc/prox_solver.hpp"

namespace osc {

struct TrainConfig {
    int epochs = 40;
    double lr = 2e-3;        // coefficient step size
    double alpha = 0.05;     // L1 weight used when sparse coding M
    int inner_iters = 15;    // ISTA iterations per sample
    double lambda1 = 0.0;    // masked L1 weight in the coefficient loss
    std::uint64_t seed = 0;
    bool norm_constraint = true;
};

/// One training pair plus the observed artifact layer A_obs = I . (Y - X).
struct TrainSample {
    Tensor Y, X, I, A_obs;
};

inline TrainSample make_train_sample(Tensor Y, Tensor X, Tensor I) {
    require(Y.same_shape(X) && X.same_shape(I), "make_train_sample: shape mismatch");
    TrainSample s;
    s.A_obs = Tensor(Y.dims);
    for (std::size_t i = 0; i < Y.size(); ++i)
        s.A_obs.data[i] = I.data[i] * (Y.data[i] - X.data[i]);
    s.Y = std::move(Y);
    s.X = std::move(X);
    s.I = std::move(I);
    return s;
}

/// Gradient layout mirrors CoefficientSet (index (k, q, t)).
struct CoeffGrad {
    std::vector<double> a, b;
};

/// Gradient of
///   L(c) = ||I . (A_obs - C(c)(x)M)||_F^2 + lambda1 ||I . (A_obs - C(c)(x)M)||_1
/// with respect to every expansion coefficient. Because assembly is linear in
/// the coefficients, dC_k(theta_l)/da_qtk is the cached basis tensor at
/// (l, q, t) and the chain rule reduces to per-channel filter gradients.
inline CoeffGrad coeff_gradient(const OSCDictionary& dict, const FeatureMaps& M,
                                const TrainSample& sample, double lambda1 = 0.0) {
    require(M.channels() == dict.channels(), "coeff_gradient: channel mismatch");
    require(sample.A_obs.same_shape(sample.I), "coeff_gradient: shape mismatch");
    require(M.height == sample.A_obs.rows() && M.width == sample.A_obs.cols(),
            "coeff_gradient: map/sample shape mismatch");
    const std::size_t p = dict.p(), K = dict.K(), L = dict.L;

    Tensor r = synthesize(dict, M);
    for (std::size_t i = 0; i < r.size(); ++i)
        r.data[i] = sample.A_obs.data[i] - r.data[i];
    // dL/d(synth) = -(2 I.r + lambda1 I.sign(r)); fold the minus into W
    Tensor w(r.dims);
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double ri = r.data[i];
        const double sgn = ri > 0.0 ? 1.0 : (ri < 0.0 ? -1.0 : 0.0);
        w.data[i] = -sample.I.data[i] * (2.0 * ri + lambda1 * sgn);
    }

    std::vector<Tensor> fgrad(L * K);
    parallel_for(L * K, [&](std::size_t c) {
        fgrad[c] = conv2d_filter_grad(w, M.maps[c], p);
    });

    const BasisCache cache = build_basis_cache(p, dict.coeffs.h, L, dict.variant);
    CoeffGrad g;
    g.a.assign(K * p * p, 0.0);
    g.b.assign(K * p * p, 0.0);
    parallel_for(K, [&](std::size_t k) {
        for (std::size_t q = 0; q < p; ++q) {
            for (std::size_t t = 0; t < p; ++t) {
                double ga = 0.0, gb = 0.0;
                for (std::size_t l = 0; l < L; ++l) {
                    const double* pc = cache.phic_at(l, q, t);
                    const double* ps = cache.phis_at(l, q, t);
                    const Tensor& fg = fgrad[l * K + k];
                    for (std::size_t i = 0; i < p * p; ++i) {
                        ga += fg.data[i] * pc[i];
                        gb += fg.data[i] * ps[i];
                    }
                }
                g.a[(k * p + q) * p + t] = ga;
                g.b[(k * p + q) * p + t] = (q == 0 && t == 0) ? 0.0 : gb;
            }
        }
    });
    return g;
}

/// Random coefficient init, i.i.d. uniform in [-0.1/p, 0.1/p].
inline CoefficientSet random_coefficients(std::size_t p, std::size_t K, double h,
                                          std::uint64_t seed) {
    CoefficientSet c(p, K, h);
    Rng rng(seed);
    const double s = 0.1 / static_cast<double>(p);
    for (double& v : c.a) v = rng.uniform(-s, s);
    for (double& v : c.b) v = rng.uniform(-s, s);
    for (std::size_t k = 0; k < K; ++k) c.b_at(k, 0, 0) = 0.0;
    return c;
}

/// Rescales each filter's coefficients so ||C_k(0)||_F = 1. Resolves the
/// scale ambiguity between the dictionary and the feature maps.
inline void normalize_coefficients(CoefficientSet& coeffs, BasisVariant variant) {
    for (std::size_t k = 0; k < coeffs.K; ++k) {
        const Tensor f = assemble_filter(coeffs, k, 0.0, variant);
        const double n = frob_norm(f);
        if (n < 1e-12) continue;
        const double inv = 1.0 / n;
        for (std::size_t q = 0; q < coeffs.p; ++q)
            for (std::size_t t = 0; t < coeffs.p; ++t) {
                coeffs.a_at(k, q, t) *= inv;
                coeffs.b_at(k, q, t) *= inv;
            }
    }
}

/// Projects the isotropic basis component out of each filter so it has zero
/// mean at theta = 0 (and, the mask being radial, near-zero mean at every
/// angle). Streak structure is oscillatory; flat anatomy is not, so zero-mean
/// filters cannot respond to bright constant patches.
inline void remove_dc_component(CoefficientSet& coeffs, BasisVariant variant) {
    const auto grid = grid_coords(coeffs.p, coeffs.h);
    const std::size_t n = coeffs.p * coeffs.p;
    double mu = 0.0;
    for (std::size_t g = 0; g < n; ++g)
        mu += eval_basis(0, 0, grid[g], variant, coeffs.p, coeffs.h).first;
    mu /= static_cast<double>(n);
    for (std::size_t k = 0; k < coeffs.K; ++k) {
        const Tensor f = assemble_filter(coeffs, k, 0.0, variant);
        double mean = 0.0;
        for (double v : f.data) mean += v;
        mean /= static_cast<double>(n);
        coeffs.a_at(k, 0, 0) -= mean / mu;
    }
}

inline double sample_loss(const OSCDictionary& dict, const FeatureMaps& M,
                          const TrainSample& sample, double lambda1) {
    Tensor r = synthesize(dict, M);
    for (std::size_t i = 0; i < r.size(); ++i)
        r.data[i] = sample.A_obs.data[i] - r.data[i];
    return masked_sq_norm(r, sample.I) + lambda1 * masked_l1_norm(r, sample.I);
}

struct TrainResult {
    OSCDictionary dict;
    std::vector<double> loss_curve; // per-epoch mean sample loss
};

namespace detail {
/// Warm-startable power iteration state for tracking lambda_max across the
/// small coefficient updates of a training run.
struct LambdaTracker {
    FeatureMaps v;
    double lambda = 0.0;

    void init(const OSCDictionary& dict, std::size_t h, std::size_t w, std::uint64_t seed) {
        Rng rng(seed);
        v = FeatureMaps(h, w, dict.channels());
        for (Tensor& t : v.maps)
            for (double& x : t.data) x = rng.uniform(-1.0, 1.0);
        refresh(dict, 50);
    }

    void refresh(const OSCDictionary& dict, int iters) {
        for (int it = 0; it < iters; ++it) {
            FeatureMaps tv = adjoint(dict, synthesize(dict, v));
            const double n = frob_norm(tv);
            if (n == 0.0) {
                lambda = 0.0;
                return;
            }
            lambda = dot(v, tv) / (frob_norm(v) * frob_norm(v));
            const double inv = 1.0 / n;
            for (Tensor& t : tv.maps)
                for (double& x : t.data) x *= inv;
            v = std::move(tv);
        }
    }
};
} // namespace detail

/// Alternating minimization: per sample, sparse-code M with the current bank,
/// take one gradient step on the shared coefficients, optionally re-normalize.
/// Deterministic for a fixed seed and config (samples are visited in order).
/// loss_curve[0] is the untrained dictionary's loss; entry e+1 is the running
/// mean over epoch e.
inline TrainResult train(const std::vector<TrainSample>& dataset,
                         const OSCDictionary& dict_init, const TrainConfig& config) {
    require(!dataset.empty(), "train: empty dataset");
    require(config.lr >= 0.0, "train: lr must be non-negative");
    require(config.alpha >= 0.0 && config.lambda1 >= 0.0, "train: negative weight");

    OSCDictionary dict = dict_init;
    detail::LambdaTracker lam;
    lam.init(dict, dataset[0].Y.rows(), dataset[0].Y.cols(), config.seed ^ 0x9e3779b9ULL);

    TrainResult result;
    {
        const double eta0 = lam.lambda > 1e-12 ? 0.95 / lam.lambda : 1.0;
        double init_loss = 0.0;
        for (const TrainSample& sample : dataset) {
            const FeatureMaps M = sparse_code(dict.bank, sample.A_obs, sample.I,
                                              config.alpha, config.inner_iters, eta0);
            init_loss += sample_loss(dict, M, sample, config.lambda1);
        }
        result.loss_curve.push_back(init_loss / static_cast<double>(dataset.size()));
    }
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        double loss_sum = 0.0;
        for (const TrainSample& sample : dataset) {
            const double eta = lam.lambda > 1e-12 ? 0.95 / lam.lambda : 1.0;
            FeatureMaps M = sparse_code(dict.bank, sample.A_obs, sample.I, config.alpha,
                                        config.inner_iters, eta);
            loss_sum += sample_loss(dict, M, sample, config.lambda1);

            if (config.lr == 0.0 && !config.norm_constraint) continue;
            CoeffGrad g = coeff_gradient(dict, M, sample, config.lambda1);
            CoefficientSet coeffs = dict.coeffs;
            for (std::size_t i = 0; i < coeffs.a.size(); ++i) {
                coeffs.a[i] -= config.lr * g.a[i];
                coeffs.b[i] -= config.lr * g.b[i];
            }
            if (config.norm_constraint) normalize_coefficients(coeffs, dict.variant);
            dict = with_coefficients(dict, std::move(coeffs));
            lam.refresh(dict, 8);
        }
        result.loss_curve.push_back(loss_sum / static_cast<double>(dataset.size()));
    }
    result.dict = std::move(dict);
    return result;
}

/// Mean over samples of the masked F^2 + lambda1 * L1 fit after fresh sparse
/// coding with the given dictionary.
inline double training_loss(const OSCDictionary& dict, const std::vector<TrainSample>& dataset,
                            const TrainConfig& config) {
    if (dataset.empty()) return 0.0;
    const double lammax =
        operator_norm_estimate(dict, dataset[0].Y.rows(), dataset[0].Y.cols(), 50);
    const double eta = lammax > 1e-12 ? 0.95 / lammax : 1.0;
    double loss_sum = 0.0;
    for (const TrainSample& sample : dataset) {
        FeatureMaps M = sparse_code(dict.bank, sample.A_obs, sample.I, config.alpha,
                                    config.inner_iters, eta);
        loss_sum += sample_loss(dict, M, sample, config.lambda1);
    }
    return loss_sum / static_cast<double>(dataset.size());
}

} // namespace osc
