#pragma once

#include <concepts>
#include <span>
#include <vector>

#include "spiny/cable.hpp"
#include "spiny/config.hpp"

namespace spiny {

// A system for the single-step schemes: pure drift f(x) and componentwise
// noise multiplier g(x) (the mu + nu g(.) factor), so one step adds
// f dt + g * dW.
template <class S>
concept SdeSystem = requires(const S& s, std::span<const double> x, std::span<double> out) {
    { s.drift(x, out) } -> std::same_as<void>;
    { s.diffusion(x, out) } -> std::same_as<void>;
};

// Scratch buffers reused across steps.
struct StepWorkspace {
    std::vector<double> f0, g0, f1, g1, pred;

    void resize(std::size_t n) {
        f0.resize(n);
        g0.resize(n);
        f1.resize(n);
        g1.resize(n);
        pred.resize(n);
    }
};

// Ito: x <- x + f(x) dt + g(x) dW.
template <SdeSystem S>
void em_step(const S& sys, std::vector<double>& x, std::span<const double> dW, double dt, StepWorkspace& ws) {
    const std::size_t n = x.size();
    if (dW.size() != n) throw ShapeError("noise increment does not match state");
    ws.resize(n);
    sys.drift(x, ws.f0);
    sys.diffusion(x, ws.g0);
    for (std::size_t i = 0; i < n; ++i) x[i] = x[i] + ws.f0[i] * dt + ws.g0[i] * dW[i];
}

// Stratonovich (stochastic Heun): Euler-Maruyama predictor, then a corrector
// averaging both drift and noise multiplier at the two ends with the same dW.
template <SdeSystem S>
void heun_step(const S& sys, std::vector<double>& x, std::span<const double> dW, double dt, StepWorkspace& ws) {
    const std::size_t n = x.size();
    if (dW.size() != n) throw ShapeError("noise increment does not match state");
    ws.resize(n);
    sys.drift(x, ws.f0);
    sys.diffusion(x, ws.g0);
    for (std::size_t i = 0; i < n; ++i) ws.pred[i] = x[i] + ws.f0[i] * dt + ws.g0[i] * dW[i];
    sys.drift(ws.pred, ws.f1);
    sys.diffusion(ws.pred, ws.g1);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = x[i] + 0.5 * (ws.f0[i] + ws.f1[i]) * dt + 0.5 * (ws.g0[i] + ws.g1[i]) * dW[i];
    }
}

// Noise-free advance used by both interpretations when mu = nu = 0, where the
// Ito and Stratonovich solutions coincide.
template <SdeSystem S>
void deterministic_step(const S& sys, std::vector<double>& x, double dt, StepWorkspace& ws) {
    const std::size_t n = x.size();
    ws.resize(n);
    sys.drift(x, ws.f0);
    for (std::size_t i = 0; i < n; ++i) x[i] = x[i] + ws.f0[i] * dt;
}

template <SdeSystem S>
void scheme_step(Interpretation scheme, const S& sys, std::vector<double>& x, std::span<const double> dW, double dt,
                 StepWorkspace& ws) {
    if (scheme == Interpretation::ito) {
        em_step(sys, x, dW, dt, ws);
    } else {
        heun_step(sys, x, dW, dt, ws);
    }
}

}  // namespace spiny
