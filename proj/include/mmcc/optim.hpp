#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmcc::optim {

// Thrown when a gradient carries a non-finite component; the offending
// parameter index is reported so the period update can be rejected.
struct PoisonedStepError : std::runtime_error {
    std::size_t index;
    explicit PoisonedStepError(std::size_t i)
        : std::runtime_error("adam: non-finite gradient at parameter index " + std::to_string(i)),
          index(i) {}
};

struct AdamState {
    std::vector<double> m, v;
    long step = 0; // t, increments by exactly 1 per adam_step
    double alpha = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState make(std::size_t dim, double alpha, double beta1 = 0.9,
                          double beta2 = 0.999, double eps = 1e-8) {
        AdamState s;
        s.m.assign(dim, 0.0);
        s.v.assign(dim, 0.0);
        s.alpha = alpha;
        s.beta1 = beta1;
        s.beta2 = beta2;
        s.eps = eps;
        return s;
    }
};

// One bias-corrected Adam step. Gradients are of the objective to be
// MAXIMIZED; the sign flip to the conventional descent update happens
// here, so callers pass ascent gradients untouched.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

// Minibatch sampler: given the minibatch index and current parameters,
// returns (objective value, ascent gradient).
using MinibatchSampler =
    std::function<std::pair<double, std::vector<double>>(int minibatch, std::span<const double> params)>;

// Exactly m Adam steps, one per minibatch, in minibatch index order.
// Sampler exceptions propagate so the caller can reject the period update.
void run_minibatch_ascent(const MinibatchSampler& sampler, std::span<double> params,
                          AdamState& state, int m);

} // namespace mmcc::optim
