#include "mmcc/simulate.hpp"

#include <cmath>
#include <numeric>

namespace mmcc::sim {

namespace {

constexpr int kChunk = 256; // paths recorded per tape reset in no-grad runs

bool all_finite(std::span<const double> xs) {
    for (double x : xs)
        if (!std::isfinite(x)) return false;
    return true;
}

} // namespace

ShockFn eval_shocks(const ProblemDefinition& problem, std::uint64_t seed) {
    const ProblemDefinition* p = &problem;
    return [p, seed](int path, int t, std::span<double> z) {
        auto s = rng::Stream::keyed(seed, rng::kEval, static_cast<std::uint64_t>(path),
                                    static_cast<std::uint64_t>(t));
        p->sample_shock(t, s, z);
    };
}

ShockFn sweep_shocks(const ProblemDefinition& problem, std::uint64_t seed, long sweep) {
    const ProblemDefinition* p = &problem;
    return [p, seed, sweep](int path, int t, std::span<double> z) {
        auto s = rng::Stream::keyed(seed, rng::kSweepSim, static_cast<std::uint64_t>(sweep),
                                    static_cast<std::uint64_t>(path), static_cast<std::uint64_t>(t));
        p->sample_shock(t, s, z);
    };
}

ShockFn train_shocks(const ProblemDefinition& problem, std::uint64_t seed, long sweep,
                     int period, int minibatch) {
    const ProblemDefinition* p = &problem;
    return [p, seed, sweep, period, minibatch](int path, int t, std::span<double> z) {
        auto s = rng::Stream::keyed(seed, rng::kTrain, static_cast<std::uint64_t>(sweep),
                                    static_cast<std::uint64_t>(period),
                                    static_cast<std::uint64_t>(minibatch),
                                    static_cast<std::uint64_t>(path), static_cast<std::uint64_t>(t));
        p->sample_shock(t, s, z);
    };
}

std::span<const double> TrajectoryBatch::state(int path, int t) const {
    std::size_t stride = static_cast<std::size_t>(horizon + 1) * n_s;
    return {states.data() + static_cast<std::size_t>(path) * stride +
                static_cast<std::size_t>(t) * n_s,
            static_cast<std::size_t>(n_s)};
}

std::span<const double> TrajectoryBatch::control(int path, int t) const {
    std::size_t stride = static_cast<std::size_t>(n_c0) + static_cast<std::size_t>(horizon - 1) * n_c;
    const double* base = controls.data() + static_cast<std::size_t>(path) * stride;
    if (t == 0) return {base, static_cast<std::size_t>(n_c0)};
    return {base + n_c0 + static_cast<std::size_t>(t - 1) * n_c, static_cast<std::size_t>(n_c)};
}

ObjectiveEstimate estimate_objective(std::span<const double> samples) {
    ObjectiveEstimate e;
    e.n = static_cast<int>(samples.size());
    if (e.n == 0) return e;
    e.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / e.n;
    if (e.n >= 2) {
        double ss = 0.0;
        for (double x : samples) ss += (x - e.mean) * (x - e.mean);
        e.se = std::sqrt(ss / (e.n - 1) / e.n);
    }
    return e;
}

namespace {

// Shared no-grad rollout; `make_control` produces the period-t control
// node for the current path.
template <typename MakeControl>
TrajectoryBatch rollout(const ProblemDefinition& problem, int n_paths, const ShockFn& shocks,
                        ad::Tape& tape, int n_c0_applied, MakeControl&& make_control,
                        const std::function<void(ad::Tape&)>& rebind) {
    const int T = problem.horizon;
    TrajectoryBatch batch;
    batch.n_paths = n_paths;
    batch.horizon = T;
    batch.n_s = problem.n_s;
    batch.n_c = problem.n_c;
    batch.n_c0 = n_c0_applied;
    batch.states.resize(static_cast<std::size_t>(n_paths) * (T + 1) * problem.n_s);
    batch.controls.resize(static_cast<std::size_t>(n_paths) *
                          (static_cast<std::size_t>(n_c0_applied) +
                           static_cast<std::size_t>(T - 1) * problem.n_c));
    batch.utility.resize(static_cast<std::size_t>(n_paths));

    std::vector<double> z(static_cast<std::size_t>(problem.n_z));
    std::vector<ad::V> path_states, path_controls;
    auto write = [](std::span<const double> src, std::span<double> dst) {
        std::copy(src.begin(), src.end(), dst.begin());
    };
    auto mut_state = [&batch](int path, int t) {
        std::size_t stride = static_cast<std::size_t>(batch.horizon + 1) * batch.n_s;
        return std::span<double>(batch.states.data() + static_cast<std::size_t>(path) * stride +
                                     static_cast<std::size_t>(t) * batch.n_s,
                                 static_cast<std::size_t>(batch.n_s));
    };
    auto mut_control = [&batch](int path, int t) {
        std::size_t stride = static_cast<std::size_t>(batch.n_c0) +
                             static_cast<std::size_t>(batch.horizon - 1) * batch.n_c;
        double* base = batch.controls.data() + static_cast<std::size_t>(path) * stride;
        if (t == 0) return std::span<double>(base, static_cast<std::size_t>(batch.n_c0));
        return std::span<double>(base + batch.n_c0 + static_cast<std::size_t>(t - 1) * batch.n_c,
                                 static_cast<std::size_t>(batch.n_c));
    };

    for (int start = 0; start < n_paths; start += kChunk) {
        tape.reset();
        rebind(tape);
        int stop = std::min(n_paths, start + kChunk);
        for (int path = start; path < stop; ++path) {
            path_states.clear();
            path_controls.clear();
            ad::V s = tape.constant(problem.s0, problem.n_s);
            path_states.push_back(s);
            write(problem.s0, mut_state(path, 0));
            ad::V u{};
            bool have_u = false;
            for (int t = 0; t < T; ++t) {
                ad::V c = make_control(tape, path, t, s);
                path_controls.push_back(c);
                write(tape.value(c), mut_control(path, t));
                if (problem.n_z > 0) shocks(path, t, z);
                ad::V s_next = problem.transition(tape, t, s, c, z);
                auto sv = tape.value(s_next);
                if (!all_finite(sv)) throw SimulationError(problem.name, path, t + 1);
                write(sv, mut_state(path, t + 1));
                if (problem.time_separable()) {
                    ad::V du = problem.step_utility(tape, t, s_next, s, c);
                    u = have_u ? tape.add(u, du) : du;
                    have_u = true;
                }
                s = s_next;
                path_states.push_back(s);
            }
            if (problem.time_separable()) {
                if (problem.terminal_utility) {
                    ad::V g = problem.terminal_utility(tape, s);
                    u = have_u ? tape.add(u, g) : g;
                    have_u = true;
                }
                batch.utility[static_cast<std::size_t>(path)] =
                    have_u ? tape.scalar_value(u) : 0.0;
            } else {
                ad::V w = problem.general_utility(tape, path_states, path_controls);
                batch.utility[static_cast<std::size_t>(path)] = tape.scalar_value(w);
            }
            if (!std::isfinite(batch.utility[static_cast<std::size_t>(path)]))
                throw SimulationError(problem.name, path, T);
        }
    }
    return batch;
}

} // namespace

TrajectoryBatch simulate_batch(const ProblemDefinition& problem, const PolicyStack& stack,
                               int n_paths, const ShockFn& shocks) {
    ad::Tape tape;
    BoundStack bound;
    auto rebind = [&](ad::Tape& tp) { bound = bind_stack(tp, problem, stack, -1); };
    auto make_control = [&](ad::Tape& tp, int, int t, ad::V s) {
        return policy_control(tp, bound, t, s);
    };
    return rollout(problem, n_paths, shocks, tape, problem.n_c0, make_control, rebind);
}

TrajectoryBatch simulate_fixed(const ProblemDefinition& problem, const ControlFn& control,
                               int n_paths, const ShockFn& shocks) {
    ad::Tape tape;
    std::vector<double> c0buf(static_cast<std::size_t>(problem.n_c0));
    std::vector<double> cbuf(static_cast<std::size_t>(problem.n_c));
    auto rebind = [](ad::Tape&) {};
    auto make_control = [&](ad::Tape& tp, int, int t, ad::V s) {
        auto& buf = t == 0 ? c0buf : cbuf;
        control(t, tp.value(s), buf);
        return tp.constant(buf, static_cast<int>(buf.size()));
    };
    return rollout(problem, n_paths, shocks, tape, problem.n_c0, make_control, rebind);
}

ObjectiveEstimate evaluate_stack(const ProblemDefinition& problem, const PolicyStack& stack,
                                 int n_paths, const ShockFn& shocks) {
    return estimate_objective(simulate_batch(problem, stack, n_paths, shocks).utility);
}

double suffix_value_and_grad(const ProblemDefinition& problem, const PolicyStack& stack, int t,
                             std::span<const double> start_states, int b, const ShockFn& shocks,
                             std::span<double> grad_out) {
    if (!problem.time_separable())
        throw std::logic_error(problem.name + ": suffix objective needs a time-separable utility");
    if (start_states.size() != static_cast<std::size_t>(b) * problem.n_s)
        throw std::invalid_argument("suffix_value_and_grad: start_states size mismatch");
    const int T = problem.horizon;
    const bool want_grad = !grad_out.empty();

    ad::Tape tape;
    BoundStack bound = bind_stack(tape, problem, stack, want_grad ? t : -1);
    std::vector<double> z(static_cast<std::size_t>(problem.n_z));
    ad::V total{};
    bool have_total = false;
    for (int i = 0; i < b; ++i) {
        ad::V s = tape.constant(
            start_states.subspan(static_cast<std::size_t>(i) * problem.n_s,
                                 static_cast<std::size_t>(problem.n_s)),
            problem.n_s);
        ad::V u{};
        bool have_u = false;
        for (int k = t; k < T; ++k) {
            ad::V c = policy_control(tape, bound, k, s);
            if (problem.n_z > 0) shocks(i, k, z);
            ad::V s_next = problem.transition(tape, k, s, c, z);
            if (!all_finite(tape.value(s_next))) throw SimulationError(problem.name, i, k + 1);
            ad::V du = problem.step_utility(tape, k, s_next, s, c);
            u = have_u ? tape.add(u, du) : du;
            have_u = true;
            s = s_next;
        }
        if (problem.terminal_utility) {
            ad::V g = problem.terminal_utility(tape, s);
            u = have_u ? tape.add(u, g) : g;
            have_u = true;
        }
        if (!have_u) u = tape.scalar(0.0);
        total = have_total ? tape.add(total, u) : u;
        have_total = true;
    }
    ad::V mean = tape.scale(total, 1.0 / b);
    if (want_grad) {
        tape.backward(mean);
        collect_period_grads(tape, bound, grad_out);
    }
    return tape.scalar_value(mean);
}

double spliced_value_and_grad(const ProblemDefinition& problem, const PolicyStack& stack, int t,
                              const TrajectoryBatch& prefix, std::span<const int> paths,
                              const ShockFn& shocks, std::span<double> grad_out) {
    if (problem.time_separable())
        throw std::logic_error(problem.name + ": spliced objective is for general utilities");
    const int T = problem.horizon;
    const bool want_grad = !grad_out.empty();

    ad::Tape tape;
    BoundStack bound = bind_stack(tape, problem, stack, want_grad ? t : -1);
    std::vector<double> z(static_cast<std::size_t>(problem.n_z));
    std::vector<ad::V> states, controls;
    ad::V total{};
    bool have_total = false;
    for (int i = 0; i < static_cast<int>(paths.size()); ++i) {
        int src = paths[i];
        states.clear();
        controls.clear();
        ad::V s = tape.constant(prefix.state(src, 0), problem.n_s);
        states.push_back(s);
        for (int k = 0; k < t; ++k) {
            auto ck = prefix.control(src, k);
            controls.push_back(tape.constant(ck, static_cast<int>(ck.size())));
            s = tape.constant(prefix.state(src, k + 1), problem.n_s);
            states.push_back(s);
        }
        for (int k = t; k < T; ++k) {
            ad::V c = policy_control(tape, bound, k, s);
            controls.push_back(c);
            if (problem.n_z > 0) shocks(i, k, z);
            ad::V s_next = problem.transition(tape, k, s, c, z);
            if (!all_finite(tape.value(s_next))) throw SimulationError(problem.name, src, k + 1);
            s = s_next;
            states.push_back(s);
        }
        ad::V w = problem.general_utility(tape, states, controls);
        total = have_total ? tape.add(total, w) : w;
        have_total = true;
    }
    ad::V mean = tape.scale(total, 1.0 / static_cast<double>(paths.size()));
    if (want_grad) {
        tape.backward(mean);
        collect_period_grads(tape, bound, grad_out);
    }
    return tape.scalar_value(mean);
}

} // namespace mmcc::sim
