#pragma once

#include "mmcc/nn.hpp"
#include "mmcc/problem.hpp"

#include <iosfwd>

namespace mmcc {

struct PolicyNetwork {
    int period = 0; // 1 <= period <= T-1
    nn::Mlp net;
};

// The full control parameter x = (c0, theta_1, ..., theta_{T-1}):
// a raw control vector for period 0 plus one network per later period.
// Read-shared during simulation; mutated only between simulation phases.
struct PolicyStack {
    std::vector<double> c0_raw; // pre-head values, dimension n_c0
    std::vector<PolicyNetwork> nets; // nets[t-1] is the period-t network

    int horizon() const { return static_cast<int>(nets.size()) + 1; }

    std::size_t period_param_count(int t) const;
    std::vector<double> clone_period(int t) const;
    void restore_period(int t, std::span<const double> params);

    std::uint64_t fingerprint() const;
};

// Random stack for `problem` with the given hidden widths; weights are
// drawn from the (seed, kInit, period, ...) substream.
PolicyStack make_stack(const ProblemDefinition& problem, const std::vector<int>& hidden,
                       std::uint64_t seed);

// Per-tape binding of the whole stack; the trained period's parameters
// become leaf nodes, all others constants. train_period: -1 none, 0 c0,
// t >= 1 the period-t network.
struct BoundStack {
    const ProblemDefinition* problem = nullptr;
    const PolicyStack* stack = nullptr;
    int train_period = -1;
    ad::V c0;
    std::vector<nn::BoundMlp> nets;
};

BoundStack bind_stack(ad::Tape& tape, const ProblemDefinition& problem,
                      const PolicyStack& stack, int train_period);

// c_t = c0 head for t = 0, head(network_t(obs(state))) otherwise.
ad::V policy_control(ad::Tape& tape, const BoundStack& bound, int t, ad::V state);

// Gradient of the trained period's parameters, flat, clone_period() order.
void collect_period_grads(const ad::Tape& tape, const BoundStack& bound, std::span<double> out);

// Convenience single-state evaluation on a scratch tape (tests, baselines).
std::vector<double> evaluate_policy(const ProblemDefinition& problem, const PolicyStack& stack,
                                    int t, std::span<const double> state);

// Checkpoint format: u32 c0 length, c0 f64s, u32 net count, then network
// snapshots (serialize.hpp layout).
void save_stack(std::ostream& os, const PolicyStack& stack);
PolicyStack load_stack(std::istream& is);

} // namespace mmcc
