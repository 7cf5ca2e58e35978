#include "mmcc/optim.hpp"

#include <cmath>

namespace mmcc::optim {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw std::invalid_argument("adam_step: dimension mismatch");
    for (std::size_t i = 0; i < grads.size(); ++i)
        if (!std::isfinite(grads[i])) throw PoisonedStepError(i);
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = -grads[i]; // ascent
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= state.alpha * mhat / (std::sqrt(vhat) + state.eps);
    }
}

void run_minibatch_ascent(const MinibatchSampler& sampler, std::span<double> params,
                          AdamState& state, int m) {
    for (int j = 0; j < m; ++j) {
        auto [value, grad] = sampler(j, params);
        (void)value;
        adam_step(params, grad, state);
    }
}

} // namespace mmcc::optim
