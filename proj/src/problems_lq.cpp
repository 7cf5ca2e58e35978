#include "mmcc/problems.hpp"

#include <cmath>
#include <stdexcept>

namespace mmcc::problems {

LqSpec LqSpec::small_instance() {
    LqSpec s;
    s.d = 2;
    s.horizon = 3;
    return s;
}

void LqSpec::validate() const {
    if (d < 1 || horizon < 1) throw std::invalid_argument("lq: bad dimensions");
    if (!(q >= 0.0) || !(r > 0.0)) throw std::invalid_argument("lq: need q >= 0, r > 0");
    if (!(sigma >= 0.0)) throw std::invalid_argument("lq: sigma must be >= 0");
    if (!s0.empty() && static_cast<int>(s0.size()) != d)
        throw std::invalid_argument("lq: s0 dimension mismatch");
}

ProblemDefinition build_lq(const LqSpec& spec_in) {
    LqSpec spec = spec_in;
    spec.validate();
    if (spec.s0.empty()) spec.s0.assign(static_cast<std::size_t>(spec.d), 1.0);

    ProblemDefinition p;
    p.name = "lq";
    p.n_s = spec.d;
    p.n_c = spec.d;
    p.n_c0 = spec.d;
    p.n_z = spec.d;
    p.horizon = spec.horizon;
    p.s0 = spec.s0;
    p.obs.resize(static_cast<std::size_t>(spec.d));
    for (int i = 0; i < spec.d; ++i) p.obs[static_cast<std::size_t>(i)] = i;
    p.head = HeadSpec::unconstrained();

    const double a = spec.a, b = spec.b, q = spec.q, r = spec.r, sg = spec.sigma;
    const int T = spec.horizon;
    p.sample_shock = [](int, rng::Stream& s, std::span<double> z) { s.fill_normal(z); };
    p.transition = [a, b, sg](ad::Tape& t, int, ad::V s, ad::V c, std::span<const double> z) {
        ad::V noise = t.constant(z, static_cast<int>(z.size()));
        return t.add(t.add(t.scale(s, a), t.scale(c, b)), t.scale(noise, sg));
    };
    p.step_utility = [q, r, T](ad::Tape& t, int period, ad::V s_next, ad::V s, ad::V c) {
        ad::V cost = t.add(t.scale(t.dot(s, s), q), t.scale(t.dot(c, c), r));
        if (period == T - 1) cost = t.add(cost, t.scale(t.dot(s_next, s_next), q));
        return t.neg(cost);
    };

    p.validate();
    return p;
}

LqSolution lq_riccati(const LqSpec& spec_in) {
    LqSpec spec = spec_in;
    spec.validate();
    if (spec.s0.empty()) spec.s0.assign(static_cast<std::size_t>(spec.d), 1.0);
    const int T = spec.horizon;
    LqSolution sol;
    sol.P.assign(static_cast<std::size_t>(T + 1), 0.0);
    sol.gain.assign(static_cast<std::size_t>(T), 0.0);
    sol.P[static_cast<std::size_t>(T)] = spec.q;
    for (int t = T - 1; t >= 0; --t) {
        double pn = sol.P[static_cast<std::size_t>(t + 1)];
        double denom = spec.r + spec.b * spec.b * pn;
        sol.gain[static_cast<std::size_t>(t)] = spec.a * spec.b * pn / denom;
        sol.P[static_cast<std::size_t>(t)] =
            spec.q + spec.a * spec.a * pn - spec.a * spec.a * spec.b * spec.b * pn * pn / denom;
    }
    double cost = 0.0;
    for (double s : spec.s0) cost += sol.P[0] * s * s;
    // process noise enters each period with cost P_{t+1} per dimension
    for (int t = 0; t < T; ++t)
        cost += spec.sigma * spec.sigma * spec.d * sol.P[static_cast<std::size_t>(t + 1)];
    sol.value = -cost;
    return sol;
}

} // namespace mmcc::problems
