#include "mmcc/trainer.hpp"

#include <chrono>
#include <cmath>
#include <ostream>

namespace mmcc::train {

void TrainerConfig::validate() const {
    if (b < 1 || m < 1 || max_sweeps < 1)
        throw std::invalid_argument("TrainerConfig: b, m, max_sweeps must be positive");
    if (n_eval < 2) throw std::invalid_argument("TrainerConfig: n_eval must be >= 2");
    if (N < 0) throw std::invalid_argument("TrainerConfig: N must be >= 0");
    if (!(alpha > 0.0)) throw std::invalid_argument("TrainerConfig: alpha must be positive");
    if (!(tau_rel >= 0.0)) throw std::invalid_argument("TrainerConfig: tau_rel must be >= 0");
    if (plateau_patience < 1)
        throw std::invalid_argument("TrainerConfig: plateau_patience must be >= 1");
}

namespace {

double elapsed(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

// m Adam steps on period t's parameters; throws PoisonedStepError or
// SimulationError when a step cannot be taken. The stack holds the
// post-ascent parameters on return.
void ascend_period(const ProblemDefinition& problem, PolicyStack& stack,
                   const TrainerConfig& config, long sweep_index, int t,
                   const sim::TrajectoryBatch& prefix) {
    std::vector<double> params = stack.clone_period(t);
    auto adam = optim::AdamState::make(params.size(), config.alpha);
    std::vector<double> grad(params.size());
    std::vector<double> starts;
    std::vector<int> path_ids;
    if (problem.time_separable())
        starts.resize(static_cast<std::size_t>(config.b) * problem.n_s);
    else
        path_ids.resize(static_cast<std::size_t>(config.b));

    optim::MinibatchSampler sampler = [&](int j, std::span<const double> p) {
        stack.restore_period(t, p);
        auto shocks = sim::train_shocks(problem, config.seed, sweep_index, t, j);
        double value;
        if (problem.time_separable()) {
            for (int i = 0; i < config.b; ++i) {
                auto row = prefix.state(j * config.b + i, t);
                std::copy(row.begin(), row.end(),
                          starts.begin() + static_cast<std::size_t>(i) * problem.n_s);
            }
            value = sim::suffix_value_and_grad(problem, stack, t, starts, config.b, shocks, grad);
        } else {
            for (int i = 0; i < config.b; ++i) path_ids[static_cast<std::size_t>(i)] = j * config.b + i;
            value = sim::spliced_value_and_grad(problem, stack, t, prefix, path_ids, shocks, grad);
        }
        return std::pair<double, std::vector<double>>(value, grad);
    };
    optim::run_minibatch_ascent(sampler, params, adam, config.m);
    stack.restore_period(t, params);
}

} // namespace

int sweep(const ProblemDefinition& problem, PolicyStack& stack, const TrainerConfig& config,
          long sweep_index, sim::ObjectiveEstimate& incumbent, std::vector<PeriodRecord>& records,
          const PeriodCallback& on_period) {
    config.validate();
    auto eval_set = sim::eval_shocks(problem, config.seed);
    if (incumbent.n == 0)
        incumbent = sim::evaluate_stack(problem, stack, config.n_eval, eval_set);

    sim::TrajectoryBatch prefix = sim::simulate_batch(
        problem, stack, config.paths(), sim::sweep_shocks(problem, config.seed, sweep_index));

    int accepted_count = 0;
    for (int t = problem.horizon - 1; t >= 0; --t) {
        auto started = std::chrono::steady_clock::now();
        PeriodRecord rec;
        rec.sweep = sweep_index;
        rec.period = t;
        std::vector<double> snapshot = stack.clone_period(t);
        bool accepted = false;
        try {
            ascend_period(problem, stack, config, sweep_index, t, prefix);
            sim::ObjectiveEstimate cand =
                sim::evaluate_stack(problem, stack, config.n_eval, eval_set);
            if (cand.mean > incumbent.mean) { // strict: ties keep the incumbent
                incumbent = cand;
                accepted = true;
            }
        } catch (const optim::PoisonedStepError&) {
            rec.note = "poisoned";
        } catch (const sim::SimulationError&) {
            rec.note = "blowup";
        }
        if (!accepted) stack.restore_period(t, snapshot);
        rec.accepted = accepted;
        accepted_count += accepted ? 1 : 0;
        rec.eval_mean = incumbent.mean;
        rec.eval_se = incumbent.se;
        rec.seconds = elapsed(started);
        records.push_back(rec);
        if (on_period) on_period(records.back());
    }
    return accepted_count;
}

std::string train_step(const ProblemDefinition& problem, PolicyStack& stack,
                       const TrainerConfig& config, TrainState& state,
                       std::vector<PeriodRecord>& records, const PeriodCallback& on_period) {
    config.validate();
    if (state.next_sweep >= config.max_sweeps) return "max_sweeps";
    sweep(problem, stack, config, state.next_sweep, state.incumbent, records, on_period);
    bool first = state.next_sweep == 0;
    ++state.next_sweep;
    if (!first) {
        double denom = std::max(std::abs(state.prev_mean), 1e-12);
        double gain = (state.incumbent.mean - state.prev_mean) / denom;
        state.flat_sweeps = gain < config.tau_rel ? state.flat_sweeps + 1 : 0;
    }
    state.prev_mean = state.incumbent.mean;
    if (!first && state.flat_sweeps >= config.plateau_patience) return "plateau";
    if (state.next_sweep >= config.max_sweeps) return "max_sweeps";
    return "";
}

TrainResult train(const ProblemDefinition& problem, PolicyStack& stack,
                  const TrainerConfig& config, const PeriodCallback& on_period) {
    config.validate();
    problem.validate();
    TrainResult result;
    TrainState state;
    std::string stop;
    do {
        stop = train_step(problem, stack, config, state, result.records, on_period);
        result.sweeps = state.next_sweep;
    } while (stop.empty());
    result.stop_reason = stop;
    result.final_mean = state.incumbent.mean;
    result.final_se = state.incumbent.se;
    return result;
}

void write_csv(std::ostream& os, std::span<const PeriodRecord> records, bool negate) {
    os << "sweep,period,accepted,eval_mean,eval_se,seconds\n";
    os.precision(17);
    for (const auto& r : records)
        os << r.sweep << ',' << r.period << ',' << (r.accepted ? 1 : 0) << ','
           << (negate ? -r.eval_mean : r.eval_mean) << ',' << r.eval_se << ',' << r.seconds
           << '\n';
}

} // namespace mmcc::train
