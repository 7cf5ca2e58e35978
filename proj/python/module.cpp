#include "mmcc/harness.hpp"
#include "mmcc/problems.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace mmcc;
using nlohmann::json;

namespace {

harness::RunConfig config_from_json_str(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw harness::ConfigError(std::string("config parse error: ") + e.what());
    }
    return harness::RunConfig::from_json(root);
}

py::dict train_problem(const std::string& problem, const std::string& spec_json, int b, int m,
                       int n_eval, int max_sweeps, double alpha, std::uint64_t seed,
                       const std::vector<int>& hidden, const std::string& out_dir) {
    harness::RunConfig cfg;
    cfg.problem = problem;
    cfg.spec = spec_json.empty() ? json::object() : json::parse(spec_json);
    cfg.trainer.b = b;
    cfg.trainer.m = m;
    cfg.trainer.n_eval = n_eval;
    cfg.trainer.max_sweeps = max_sweeps;
    cfg.trainer.alpha = alpha;
    cfg.trainer.seed = seed;
    cfg.hidden = hidden;
    cfg.out_dir = out_dir;
    int rc = harness::run(cfg);
    py::dict out;
    out["exit_code"] = rc;
    out["out_dir"] = out_dir;
    return out;
}

} // namespace

PYBIND11_MODULE(_core, mod) {
    mod.doc() = "monotone backward-sweep policy trainer (C++ core bindings)";

    py::register_exception<harness::ConfigError>(mod, "ConfigError");

    mod.def(
        "run",
        [](const std::string& config_json) {
            return harness::run(config_from_json_str(config_json));
        },
        py::arg("config_json"),
        "Train from a JSON config string; writes artifacts to out_dir, returns the exit code.");
    mod.def(
        "resume",
        [](const std::string& config_json) {
            return harness::resume(config_from_json_str(config_json));
        },
        py::arg("config_json"), "Continue a checkpointed run.");
    mod.def(
        "oracle",
        [](const std::string& config_json) {
            return harness::run_oracle(config_from_json_str(config_json));
        },
        py::arg("config_json"), "Write oracle.json with independent reference values.");
    mod.def(
        "validate",
        [](const std::string& config_json) {
            return harness::validate(config_from_json_str(config_json));
        },
        py::arg("config_json"), "Return config diagnostics (empty list = valid).");

    mod.def("train", &train_problem, py::arg("problem"), py::arg("spec_json") = "", py::arg("b") = 16,
            py::arg("m") = 256, py::arg("n_eval") = 4096, py::arg("max_sweeps") = 30,
            py::arg("alpha") = 1e-3, py::arg("seed") = 1,
            py::arg("hidden") = std::vector<int>{16}, py::arg("out_dir") = "run",
            "Convenience wrapper: build, train, and write artifacts.");

    mod.def(
        "fbsde_oracle",
        [](int d_w, double T, int steps, double beta, long n_mc, std::uint64_t seed) {
            auto spec = problems::FbsdeSpec::paper_instance();
            spec.d_w = d_w;
            spec.T = T;
            spec.steps = steps;
            spec.beta = beta;
            auto r = problems::fbsde_oracle_y(spec, n_mc, seed);
            return py::make_tuple(r.value, r.se);
        },
        py::arg("d_w") = 100, py::arg("T") = 1.0, py::arg("steps") = 20, py::arg("beta") = -1.0,
        py::arg("n_mc") = 2'000'000, py::arg("seed") = 1,
        "Monte Carlo terminal-value oracle; returns (y_star, se).");

    mod.def(
        "heston_oracle",
        [](double T, int steps, double y0) {
            auto spec = problems::HestonSpec::paper_instance();
            spec.T = T;
            spec.steps = steps;
            spec.y0 = y0;
            return problems::heston_pde_oracle_converged(spec, {});
        },
        py::arg("T") = 10.0, py::arg("steps") = 120, py::arg("y0") = 0.1,
        "Finite-difference PDE oracle g(0, y0), grid-doubled to convergence.");

    mod.def(
        "lq_value",
        [](int d, int horizon, double a, double b, double q, double r, double sigma) {
            problems::LqSpec spec;
            spec.d = d;
            spec.horizon = horizon;
            spec.a = a;
            spec.b = b;
            spec.q = q;
            spec.r = r;
            spec.sigma = sigma;
            return problems::lq_riccati(spec).value;
        },
        py::arg("d") = 4, py::arg("horizon") = 8, py::arg("a") = 0.9, py::arg("b") = 0.5,
        py::arg("q") = 1.0, py::arg("r") = 0.5, py::arg("sigma") = 0.3,
        "Closed-form Riccati optimal objective for the synthetic LQ family.");

    mod.def(
        "dsice_rollout",
        [](double mu, double p, int horizon, int tail) {
            auto spec = problems::DsiceSpec::paper_instance();
            spec.horizon = horizon;
            spec.tail = tail;
            return problems::dsice_reference_rollout(spec, mu, p);
        },
        py::arg("mu") = 0.3, py::arg("p") = 0.75, py::arg("horizon") = 60, py::arg("tail") = 40,
        "Deterministic constant-policy rollout of the climate-economy objective.");

    mod.attr("__version__") = "0.1.0";
}
