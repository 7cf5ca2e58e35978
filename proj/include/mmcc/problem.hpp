#pragma once

#include "mmcc/head.hpp"
#include "mmcc/rng.hpp"
#include "mmcc/tape.hpp"

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace mmcc {

// Contract bundling state evolution, shock sampling, utility, and the
// control-constraint head. Transitions and utilities are expressed in
// tape operations so suffix objectives differentiate through future
// states (backpropagation through time). Shocks are sampled
// independently of controls; pathwise gradients rely on that.
// Immutable after build; safe for concurrent read.
struct ProblemDefinition {
    std::string name;
    int n_s = 0;   // state dimension
    int n_c = 0;   // control dimension, periods >= 1
    int n_c0 = 0;  // period-0 control dimension (may differ, e.g. (y, z0))
    int n_z = 0;   // shock dimension
    int horizon = 0; // T periods 0..T-1
    std::vector<double> s0;
    std::vector<int> obs; // state indices fed to the policy networks
    // Optional per-observation multipliers normalizing network inputs to
    // O(1); empty means all ones. Same length as obs when set.
    std::vector<double> obs_scale;

    HeadSpec head;
    bool head_applies_to_c0 = true;

    // Draws z_{t+1} into `z` (length n_z).
    std::function<void(int t, rng::Stream&, std::span<double> z)> sample_shock;

    // s_{t+1} = psi_{t+1}(s_t, c_t, z_{t+1}); `c` has length n_c0 when t == 0.
    std::function<ad::V(ad::Tape&, int t, ad::V s, ad::V c, std::span<const double> z)> transition;

    // Time-separable: u_{t+1}(s_{t+1}, s_t, c_t), already discounted.
    std::function<ad::V(ad::Tape&, int t, ad::V s_next, ad::V s, ad::V c)> step_utility;

    // Optional terminal term appended to every full/suffix objective.
    std::function<ad::V(ad::Tape&, ad::V s_T)> terminal_utility;

    // General (possibly non-time-separable) utility of the whole path:
    // states has horizon+1 entries, controls has horizon entries.
    std::function<ad::V(ad::Tape&, std::span<const ad::V> states, std::span<const ad::V> controls)>
        general_utility;

    // Reports negate the internal (maximized) objective for display,
    // e.g. problems posed as minimizations.
    bool display_negate = false;

    // Diagnostic counters shared with the transition closures.
    std::map<std::string, std::shared_ptr<std::atomic<long long>>> counters;

    bool time_separable() const { return static_cast<bool>(step_utility); }

    void validate() const; // throws on an inconsistent definition
};

} // namespace mmcc
