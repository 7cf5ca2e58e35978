#pragma once

#include "mmcc/trainer.hpp"

#include <json.hpp>

#include <stdexcept>
#include <string>
#include <vector>

namespace mmcc::harness {

// Configuration problems: bad file, unknown key, malformed --set. The
// CLI maps these to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string problem;       // fbsde | heston | growth | dsice | lq
    nlohmann::json spec;       // problem-spec overrides, strict keys
    train::TrainerConfig trainer;
    std::vector<int> hidden = {16};
    bool oracle = true;        // compute oracle/baseline comparisons
    std::string out_dir = "run";

    static RunConfig from_json(const nlohmann::json& j);
    // Reads a JSON config file and applies `--set key=value` overrides
    // (dotted paths, e.g. trainer.seed=7 or spec.T=5).
    static RunConfig load(const std::string& path, const std::vector<std::string>& sets = {});
    nlohmann::json to_json() const;
};

// Static checks beyond parsing: known problem id, b*m == n_eval, spec
// invariants, head compatibility. Empty list means valid.
std::vector<std::string> validate(const RunConfig& config);

// Trains and writes artifacts (config.json, sweeps.csv, plotdata.csv,
// summary.json, stack.bin, progress.json) under out_dir. Returns 0 on
// success, 3 on numerical failure.
int run(const RunConfig& config);

// Continues a checkpointed run from out_dir. Returns as run().
int resume(const RunConfig& config);

// Writes oracle.json (problem-dependent independent reference values).
int run_oracle(const RunConfig& config);

} // namespace mmcc::harness
