#pragma once

#include <optional>

#include "osc/osc_model.hpp"

namespace osc {

enum class XInit { YClone, Zero };

struct SolverConfig {
    double alpha = 0.02;               // L1 weight on the feature maps
    double beta = 1.0;                 // weight on the image prior (a box indicator)
    std::optional<double> eta1;        // feature-map step; empty = 0.99 / lambda_max
    std::optional<double> eta2;        // image step; empty = 0.99
    int iterations = 100;
    XInit x_init = XInit::YClone;
    bool record_history = false;
};

struct SolverState {
    FeatureMaps M;
    Tensor X;
    int n = 0;
    std::vector<double> history;
};

struct SolveResult {
    Tensor X;
    FeatureMaps M;
    Tensor A;
    std::vector<double> history;
};

inline void check_solver_inputs(const Tensor& Y, const Tensor& I) {
    require(Y.ndim() == 2 && I.ndim() == 2, "solver: Y and I must be 2D");
    require(Y.same_shape(I), "solver: Y/I shape mismatch");
    for (double v : I.data)
        require(v == 0.0 || v == 1.0, "solver: mask must be binary");
}

/// Gradient of (1/2)||I . (Y - X - C(x)M)||_F^2 in M:  C^T (I . (C(x)M + X - Y)).
inline FeatureMaps grad_m(const OSCDictionary& dict, const FeatureMaps& M, const Tensor& X,
                          const Tensor& Y, const Tensor& I) {
    require(X.same_shape(Y) && Y.same_shape(I), "grad_m: shape mismatch");
    Tensor r = synthesize(dict, M);
    for (std::size_t i = 0; i < r.size(); ++i)
        r.data[i] = I.data[i] * (r.data[i] + X.data[i] - Y.data[i]);
    return adjoint(dict, r);
}

/// Gradient of the same data term in X:  I . (C(x)M + X - Y).
inline Tensor grad_x(const OSCDictionary& dict, const FeatureMaps& M, const Tensor& X,
                     const Tensor& Y, const Tensor& I) {
    require(X.same_shape(Y) && Y.same_shape(I), "grad_x: shape mismatch");
    Tensor r = synthesize(dict, M);
    for (std::size_t i = 0; i < r.size(); ++i)
        r.data[i] = I.data[i] * (r.data[i] + X.data[i] - Y.data[i]);
    return r;
}

/// Soft threshold: sign(v) * max(|v| - tau, 0).
inline Tensor prox_l1(const Tensor& v, double tau) {
    require(tau >= 0.0, "prox_l1: negative threshold");
    Tensor r = v;
    for (double& x : r.data) {
        const double m = std::abs(x) - tau;
        x = m > 0.0 ? (x > 0.0 ? m : -m) : 0.0;
    }
    return r;
}

inline FeatureMaps prox_l1(const FeatureMaps& v, double tau) {
    require(tau >= 0.0, "prox_l1: negative threshold");
    FeatureMaps r = v;
    for (Tensor& t : r.maps)
        for (double& x : t.data) {
            const double m = std::abs(x) - tau;
            x = m > 0.0 ? (x > 0.0 ? m : -m) : 0.0;
        }
    return r;
}

/// Projection onto [0, 1], the proximal map of the box indicator.
inline Tensor prox_image(const Tensor& v) {
    return clamp01(v);
}

/// ||I . (Y - X - C(x)M)||_F^2 + alpha ||M||_1 (+ 0 for feasible X).
inline double objective(const OSCDictionary& dict, const FeatureMaps& M, const Tensor& X,
                        const Tensor& Y, const Tensor& I, double alpha) {
    Tensor r = synthesize(dict, M);
    for (std::size_t i = 0; i < r.size(); ++i)
        r.data[i] = Y.data[i] - X.data[i] - r.data[i];
    return masked_sq_norm(r, I) + alpha * l1_norm(M);
}

struct ResolvedSteps {
    double eta1 = 0.0;
    double eta2 = 0.0;
};

/// Auto steps resolve once, before the first iteration: eta1 = 0.99 over a
/// 50-round power-iteration estimate of lambda_max(C^T C), eta2 = 0.99.
inline ResolvedSteps resolve_steps(const OSCDictionary& dict, std::size_t h, std::size_t w,
                                   const SolverConfig& config) {
    ResolvedSteps s;
    if (config.eta1) {
        require(*config.eta1 > 0.0, "solver: eta1 must be positive");
        s.eta1 = *config.eta1;
    } else {
        const double lam = operator_norm_estimate(dict, h, w, 50);
        s.eta1 = lam > 1e-12 ? 0.99 / lam : 1.0;
    }
    if (config.eta2) {
        require(*config.eta2 > 0.0, "solver: eta2 must be positive");
        s.eta2 = *config.eta2;
    } else {
        s.eta2 = 0.99;
    }
    return s;
}

namespace detail {
inline SolverState step_with(SolverState state, const OSCDictionary& dict, const Tensor& Y,
                             const Tensor& I, const SolverConfig& config,
                             const ResolvedSteps& steps) {
    // M update first; the X update then sees the new maps.
    FeatureMaps gm = grad_m(dict, state.M, state.X, Y, I);
    for (std::size_t c = 0; c < state.M.channels(); ++c)
        for (std::size_t i = 0; i < state.M.maps[c].size(); ++i)
            state.M.maps[c].data[i] -= steps.eta1 * gm.maps[c].data[i];
    state.M = prox_l1(state.M, config.alpha * steps.eta1);

    Tensor gx = grad_x(dict, state.M, state.X, Y, I);
    for (std::size_t i = 0; i < state.X.size(); ++i)
        state.X.data[i] -= steps.eta2 * gx.data[i];
    state.X = prox_image(state.X);

    state.n += 1;
    return state;
}
} // namespace detail

inline SolverState step(SolverState state, const OSCDictionary& dict, const Tensor& Y,
                        const Tensor& I, const SolverConfig& config) {
    check_solver_inputs(Y, I);
    const ResolvedSteps steps = resolve_steps(dict, Y.rows(), Y.cols(), config);
    return detail::step_with(std::move(state), dict, Y, I, config, steps);
}

inline Tensor make_x_init(const Tensor& Y, const Tensor& I, XInit mode) {
    if (mode == XInit::Zero) return Tensor(Y.dims);
    // YClone: copy Y, fill the metal region with the mean of Y over I
    double sum = 0.0, count = 0.0;
    for (std::size_t i = 0; i < Y.size(); ++i) {
        sum += I.data[i] * Y.data[i];
        count += I.data[i];
    }
    const double fill = count > 0.0 ? sum / count : 0.0;
    Tensor X = Y;
    for (std::size_t i = 0; i < X.size(); ++i)
        if (I.data[i] == 0.0) X.data[i] = fill;
    return X;
}

/// Runs `iterations` proximal-gradient steps from (M = 0, X per config).
inline SolveResult solve(const Tensor& Y, const Tensor& I, const OSCDictionary& dict,
                         const SolverConfig& config) {
    check_solver_inputs(Y, I);
    require(config.iterations >= 0, "solve: negative iteration count");
    const ResolvedSteps steps = resolve_steps(dict, Y.rows(), Y.cols(), config);
    SolverState state;
    state.M = FeatureMaps(Y.rows(), Y.cols(), dict.channels());
    state.X = make_x_init(Y, I, config.x_init);
    if (config.record_history)
        state.history.push_back(objective(dict, state.M, state.X, Y, I, config.alpha));
    for (int it = 0; it < config.iterations; ++it) {
        state = detail::step_with(std::move(state), dict, Y, I, config, steps);
        if (config.record_history)
            state.history.push_back(objective(dict, state.M, state.X, Y, I, config.alpha));
    }
    SolveResult result;
    result.A = synthesize(dict, state.M);
    result.X = std::move(state.X);
    result.M = std::move(state.M);
    result.history = std::move(state.history);
    return result;
}

/// ISTA sparse coding of `target` against a fixed bank with X held fixed:
/// M <- prox_l1(M - eta C^T (I . (C(x)M - target)), alpha * eta).
inline FeatureMaps sparse_code(std::span<const Tensor> filters, const Tensor& target,
                               const Tensor& I, double alpha, int iterations, double eta) {
    require(target.same_shape(I), "sparse_code: target/mask shape mismatch");
    require(eta > 0.0, "sparse_code: step must be positive");
    FeatureMaps M(target.rows(), target.cols(), filters.size());
    for (int it = 0; it < iterations; ++it) {
        Tensor r = synthesize_bank(filters, M);
        for (std::size_t i = 0; i < r.size(); ++i)
            r.data[i] = I.data[i] * (r.data[i] - target.data[i]);
        FeatureMaps g = adjoint_bank(filters, r);
        for (std::size_t c = 0; c < M.channels(); ++c)
            for (std::size_t i = 0; i < M.maps[c].size(); ++i)
                M.maps[c].data[i] -= eta * g.maps[c].data[i];
        M = prox_l1(M, alpha * eta);
    }
    return M;
}

} // namespace osc
