#include "mmcc/harness.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

namespace {

struct CommonOpts {
    std::string config_path;
    std::string problem;
    std::string out_dir;
    std::vector<std::string> sets;
    long seed = -1;
    int threads = 0;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "JSON config file");
    cmd->add_option("--problem", o.problem, "problem id (fbsde|heston|growth|dsice|lq)");
    cmd->add_option("--out", o.out_dir, "output directory");
    cmd->add_option("--set", o.sets, "key=value override (repeatable; dotted paths)");
    cmd->add_option("--seed", o.seed, "trainer seed");
    cmd->add_option("--threads", o.threads,
                    "worker cap (default MMCC_THREADS; simulation is single-threaded)");
}

mmcc::harness::RunConfig make_config(const CommonOpts& o) {
    auto sets = o.sets;
    if (!o.problem.empty()) sets.insert(sets.begin(), "problem=" + o.problem);
    if (!o.out_dir.empty()) sets.push_back("out_dir=" + o.out_dir);
    if (o.seed >= 0) sets.push_back("trainer.seed=" + std::to_string(o.seed));
    return mmcc::harness::RunConfig::load(o.config_path, sets);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"monotone backward-sweep policy trainer"};
    app.require_subcommand(1);

    CommonOpts run_o, oracle_o, validate_o, resume_o;
    auto* run_cmd = app.add_subcommand("run", "train and write artifacts");
    add_common(run_cmd, run_o);
    auto* oracle_cmd = app.add_subcommand("oracle", "compute independent reference values");
    add_common(oracle_cmd, oracle_o);
    auto* validate_cmd = app.add_subcommand("validate", "check a config, print diagnostics");
    add_common(validate_cmd, validate_o);
    auto* resume_cmd = app.add_subcommand("resume", "continue from a checkpoint");
    add_common(resume_cmd, resume_o);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) {
            auto cfg = make_config(run_o);
            int rc = mmcc::harness::run(cfg);
            if (rc == 0)
                std::cout << "run complete: " << cfg.out_dir << "/summary.json\n";
            else
                std::cerr << "numerical failure; see " << cfg.out_dir << "/summary.json\n";
            return rc;
        }
        if (oracle_cmd->parsed()) {
            auto cfg = make_config(oracle_o);
            int rc = mmcc::harness::run_oracle(cfg);
            std::cout << "oracle written: " << cfg.out_dir << "/oracle.json\n";
            return rc;
        }
        if (validate_cmd->parsed()) {
            auto cfg = make_config(validate_o);
            auto diags = mmcc::harness::validate(cfg);
            for (const auto& d : diags) std::cout << d << "\n";
            if (diags.empty()) std::cout << "config ok\n";
            return diags.empty() ? 0 : 2;
        }
        if (resume_cmd->parsed()) {
            auto cfg = make_config(resume_o);
            int rc = mmcc::harness::resume(cfg);
            if (rc == 0) std::cout << "resumed run complete: " << cfg.out_dir << "/summary.json\n";
            return rc;
        }
    } catch (const mmcc::harness::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
