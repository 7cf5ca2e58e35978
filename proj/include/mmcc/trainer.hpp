#pragma once

#include "mmcc/optim.hpp"
#include "mmcc/policy.hpp"
#include "mmcc/simulate.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace mmcc::train {

struct TrainerConfig {
    int b = 16;          // minibatch size
    int m = 256;         // Adam steps per period update
    int N = 0;           // declared training paths per sweep; 0 means b * m.
                         // The sweep always simulates b * m prefix paths; a
                         // nonzero N is a consistency declaration the
                         // validator checks against b * m.
    int n_eval = 4096;   // fixed common-random-number evaluation paths
    int max_sweeps = 30;
    double alpha = 1e-3; // Adam step size
    double tau_rel = 1e-4;       // plateau threshold on relative sweep gain
    int plateau_patience = 2;    // consecutive sub-threshold sweeps to stop
    std::uint64_t seed = 1;

    int paths() const { return b * m; }
    void validate() const; // throws on nonsensical settings
};

struct PeriodRecord {
    long sweep = 0;
    int period = 0;
    bool accepted = false;
    double eval_mean = 0.0; // post-decision incumbent value on the fixed set
    double eval_se = 0.0;
    double seconds = 0.0;
    std::string note; // empty, "poisoned", or "blowup"
};

struct TrainResult {
    long sweeps = 0;
    double final_mean = 0.0;
    double final_se = 0.0;
    std::string stop_reason; // "plateau" or "max_sweeps"
    std::vector<PeriodRecord> records;
};

using PeriodCallback = std::function<void(const PeriodRecord&)>;

// One backward sweep (periods T-1 .. 0). Each period update runs m Adam
// steps on the suffix (or spliced full-path) objective and is kept only
// if it strictly improves the incumbent on the fixed evaluation set;
// otherwise the period's parameters are restored bit-for-bit. The
// incumbent estimate is carried in/out so accepted values never need
// re-evaluating. Returns the number of accepted period updates.
int sweep(const ProblemDefinition& problem, PolicyStack& stack, const TrainerConfig& config,
          long sweep_index, sim::ObjectiveEstimate& incumbent, std::vector<PeriodRecord>& records,
          const PeriodCallback& on_period = {});

// Resumable loop position: everything the stopping rule needs besides
// the stack itself. Serialize this alongside the stack to checkpoint.
struct TrainState {
    long next_sweep = 0;
    sim::ObjectiveEstimate incumbent;
    double prev_mean = 0.0;
    int flat_sweeps = 0;
};

// Runs one sweep and updates the plateau bookkeeping. Returns "" while
// the run should continue, else the stop reason ("plateau" or
// "max_sweeps"; immediately "max_sweeps" when the budget is spent).
std::string train_step(const ProblemDefinition& problem, PolicyStack& stack,
                       const TrainerConfig& config, TrainState& state,
                       std::vector<PeriodRecord>& records, const PeriodCallback& on_period = {});

// Full run: sweeps until the relative gain stays below tau_rel for
// plateau_patience consecutive sweeps, or max_sweeps is reached.
TrainResult train(const ProblemDefinition& problem, PolicyStack& stack,
                  const TrainerConfig& config, const PeriodCallback& on_period = {});

// "sweep,period,accepted,eval_mean,eval_se,seconds" rows; negate flips
// the sign of eval_mean for problems reported as minimizations.
void write_csv(std::ostream& os, std::span<const PeriodRecord> records, bool negate);

} // namespace mmcc::train
