#pragma once

#include "mmcc/policy.hpp"
#include "mmcc/problem.hpp"

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmcc::sim {

// A simulated path left the representable range (overflow/NaN in the state).
struct SimulationError : std::runtime_error {
    int path, period;
    SimulationError(const std::string& name, int p, int t)
        : std::runtime_error(name + ": non-finite state on path " + std::to_string(p) +
                             " at period " + std::to_string(t)),
          path(p), period(t) {}
};

// Draws z_{t+1} for the transition taken at period t. Deterministic in
// (path, t): re-calling with the same arguments yields the same shock,
// which is what makes common-random-number comparisons and frozen-shock
// finite differencing possible.
using ShockFn = std::function<void(int path, int t, std::span<double> z)>;

// Fixed evaluation set: keys carry no sweep index, so the same shocks
// score every candidate in every sweep.
ShockFn eval_shocks(const ProblemDefinition& problem, std::uint64_t seed);
// Sweep-opening simulation (prefix cache), one set per sweep.
ShockFn sweep_shocks(const ProblemDefinition& problem, std::uint64_t seed, long sweep);
// Fresh suffix shocks, one set per Adam step.
ShockFn train_shocks(const ProblemDefinition& problem, std::uint64_t seed, long sweep,
                     int period, int minibatch);

struct TrajectoryBatch {
    int n_paths = 0, horizon = 0, n_s = 0, n_c = 0, n_c0 = 0;
    std::vector<double> states;   // path-major, (horizon+1) states per path
    std::vector<double> controls; // path-major, c0 then periods 1..T-1
    std::vector<double> utility;  // realized objective per path

    std::span<const double> state(int path, int t) const;
    std::span<const double> control(int path, int t) const;
};

struct ObjectiveEstimate {
    double mean = 0.0;
    double se = 0.0; // 0 when fewer than 2 samples
    int n = 0;
};

ObjectiveEstimate estimate_objective(std::span<const double> samples);

// Forward-simulates n_paths trajectories under the stack (no gradients;
// recorded in chunks so tape memory stays bounded).
TrajectoryBatch simulate_batch(const ProblemDefinition& problem, const PolicyStack& stack,
                               int n_paths, const ShockFn& shocks);

// As above but under an arbitrary control rule (baselines, oracles).
// The rule writes final controls directly; no head is applied.
using ControlFn = std::function<void(int t, std::span<const double> state, std::span<double> c)>;
TrajectoryBatch simulate_fixed(const ProblemDefinition& problem, const ControlFn& control,
                               int n_paths, const ShockFn& shocks);

ObjectiveEstimate evaluate_stack(const ProblemDefinition& problem, const PolicyStack& stack,
                                 int n_paths, const ShockFn& shocks);

// Mean suffix objective over b paths started from start_states (b rows of
// n_s, s0-copies when t == 0) and, unless grad_out is empty, its gradient
// with respect to the period-t parameters. Time-separable problems only.
double suffix_value_and_grad(const ProblemDefinition& problem, const PolicyStack& stack, int t,
                             std::span<const double> start_states, int b, const ShockFn& shocks,
                             std::span<double> grad_out);

// General-utility analogue: the objective is the full-path utility with
// periods before t spliced in from `prefix` as constants, periods from t
// on re-simulated under the current stack with fresh shocks. `paths`
// selects which prefix trajectories form the minibatch; the ShockFn is
// called with the local batch index.
double spliced_value_and_grad(const ProblemDefinition& problem, const PolicyStack& stack, int t,
                              const TrajectoryBatch& prefix, std::span<const int> paths,
                              const ShockFn& shocks, std::span<double> grad_out);

} // namespace mmcc::sim
