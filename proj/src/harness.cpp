#include "mmcc/harness.hpp"

#include "mmcc/problems.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace mmcc::harness {

using nlohmann::json;

namespace {

// ------------------------------------------------------------- spec parsing

// Strict field table: every key in the spec object must match a setter.
struct FieldTable {
    std::map<std::string, std::function<void(const json&)>> set;

    void apply(const json& spec, const std::string& problem) const {
        if (spec.is_null()) return;
        if (!spec.is_object()) throw ConfigError(problem + ": spec must be an object");
        for (const auto& [key, value] : spec.items()) {
            auto it = set.find(key);
            if (it == set.end())
                throw ConfigError(problem + ": unknown spec field '" + key + "'");
            try {
                it->second(value);
            } catch (const json::exception& e) {
                throw ConfigError(problem + ": bad value for '" + key + "': " + e.what());
            }
        }
    }
};

void bind_num(FieldTable& t, const std::string& key, double& slot) {
    t.set[key] = [&slot](const json& v) { slot = v.get<double>(); };
}
void bind_int(FieldTable& t, const std::string& key, int& slot) {
    t.set[key] = [&slot](const json& v) { slot = v.get<int>(); };
}
void bind_vec(FieldTable& t, const std::string& key, std::vector<double>& slot) {
    t.set[key] = [&slot](const json& v) { slot = v.get<std::vector<double>>(); };
}

long oracle_n_mc(const json& spec, long fallback) {
    if (spec.is_object() && spec.contains("oracle_n_mc")) return spec["oracle_n_mc"].get<long>();
    return fallback;
}

problems::FbsdeSpec fbsde_spec(const json& j) {
    auto s = problems::FbsdeSpec::paper_instance();
    FieldTable t;
    bind_int(t, "d_w", s.d_w);
    t.set["d"] = t.set["d_w"]; // CLI shorthand
    bind_num(t, "T", s.T);
    bind_int(t, "steps", s.steps);
    bind_num(t, "beta", s.beta);
    t.set["oracle_n_mc"] = [](const json&) {};
    t.apply(j, "fbsde");
    s.validate();
    return s;
}

problems::HestonSpec heston_spec(const json& j) {
    auto s = problems::HestonSpec::paper_instance();
    FieldTable t;
    bind_num(t, "r", s.r);
    bind_num(t, "delta", s.delta);
    bind_num(t, "gamma", s.gamma);
    bind_num(t, "rho", s.rho);
    bind_num(t, "kappa", s.kappa);
    bind_num(t, "y_bar", s.y_bar);
    bind_num(t, "lambda_bar", s.lambda_bar);
    bind_num(t, "beta_bar", s.beta_bar);
    bind_num(t, "psi", s.psi);
    bind_num(t, "T", s.T);
    bind_int(t, "steps", s.steps);
    bind_num(t, "y0", s.y0);
    t.apply(j, "heston");
    s.validate();
    return s;
}

problems::GrowthSpec growth_spec(const json& j) {
    auto s = problems::GrowthSpec::paper_instance();
    FieldTable t;
    bind_int(t, "n", s.n);
    bind_int(t, "T", s.T);
    bind_num(t, "beta", s.beta);
    bind_num(t, "H", s.H);
    bind_vec(t, "theta", s.theta);
    bind_vec(t, "tau", s.tau);
    bind_vec(t, "A", s.A);
    bind_vec(t, "b", s.b);
    bind_vec(t, "Y0", s.Y0);
    t.apply(j, "growth");
    s.validate();
    return s;
}

problems::DsiceSpec dsice_spec(const json& j) {
    auto s = problems::DsiceSpec::paper_instance();
    FieldTable t;
    bind_int(t, "horizon", s.horizon);
    bind_int(t, "tail", s.tail);
    bind_num(t, "phi12", s.phi12);
    bind_num(t, "phi21", s.phi21);
    bind_num(t, "phi23", s.phi23);
    bind_num(t, "phi32", s.phi32);
    bind_num(t, "heat12", s.heat12);
    bind_num(t, "heat21", s.heat21);
    bind_num(t, "xi1", s.xi1);
    bind_num(t, "xi2", s.xi2);
    bind_num(t, "eta", s.eta);
    bind_num(t, "m_at_star", s.m_at_star);
    bind_num(t, "alpha", s.alpha);
    bind_num(t, "pi1", s.pi1);
    bind_num(t, "pi2", s.pi2);
    bind_num(t, "sigma0", s.sigma0);
    bind_num(t, "theta2", s.theta2);
    bind_num(t, "delta_k", s.delta_k);
    bind_num(t, "psi", s.psi);
    bind_num(t, "beta", s.beta);
    bind_num(t, "A0", s.A0);
    bind_num(t, "alpha1", s.alpha1);
    bind_num(t, "alpha2", s.alpha2);
    bind_num(t, "K0", s.K0);
    bind_vec(t, "M0", s.M0);
    bind_vec(t, "T0", s.T0);
    bind_num(t, "e_land0", s.e_land0);
    t.apply(j, "dsice");
    s.validate();
    return s;
}

problems::LqSpec lq_spec(const json& j) {
    problems::LqSpec s;
    FieldTable t;
    bind_int(t, "d", s.d);
    bind_int(t, "horizon", s.horizon);
    bind_num(t, "a", s.a);
    bind_num(t, "b", s.b);
    bind_num(t, "q", s.q);
    bind_num(t, "r", s.r);
    bind_num(t, "sigma", s.sigma);
    bind_vec(t, "s0", s.s0);
    t.apply(j, "lq");
    s.validate();
    return s;
}

// ------------------------------------------------------------- problem glue

struct Built {
    ProblemDefinition def;
    std::function<json()> oracle_payload;
    // Extra summary fields comparing the trained stack to the oracle;
    // `trained` holds the per-path evaluation-set utilities.
    std::function<json(const PolicyStack&, std::span<const double> trained)> comparison;
};

Built build_from(const RunConfig& cfg) {
    Built out;
    if (cfg.problem == "fbsde") {
        auto spec = fbsde_spec(cfg.spec);
        out.def = problems::build_fbsde(spec);
        long n_mc = oracle_n_mc(cfg.spec, 2'000'000);
        std::uint64_t seed = cfg.trainer.seed;
        out.oracle_payload = [spec, n_mc, seed] {
            auto r = problems::fbsde_oracle_y(spec, n_mc, seed);
            return json{{"y_star", r.value}, {"se", r.se}, {"n_mc", n_mc}};
        };
        out.comparison = [spec, n_mc, seed](const PolicyStack& stack, std::span<const double>) {
            auto r = problems::fbsde_oracle_y(spec, n_mc, seed);
            double y = stack.c0_raw[0];
            return json{{"oracle_y_star", r.value},
                        {"oracle_se", r.se},
                        {"trained_y", y},
                        {"rel_error", std::abs(y - r.value) / std::abs(r.value)}};
        };
    } else if (cfg.problem == "heston") {
        auto spec = heston_spec(cfg.spec);
        out.def = problems::build_heston_fbsde(spec);
        out.oracle_payload = [spec] {
            return json{{"g0", problems::heston_pde_oracle_converged(spec, {})}};
        };
        out.comparison = [spec](const PolicyStack& stack, std::span<const double>) {
            double g0 = problems::heston_pde_oracle_converged(spec, {});
            double xi0 = stack.c0_raw[0];
            return json{{"oracle_g0", g0},
                        {"trained_xi0", xi0},
                        {"rel_error", std::abs(xi0 - g0) / std::abs(g0)}};
        };
    } else if (cfg.problem == "growth") {
        auto spec = growth_spec(cfg.spec);
        out.def = problems::build_growth(spec);
        int n_eval = cfg.trainer.n_eval;
        std::uint64_t seed = cfg.trainer.seed;
        // closures rebuild the definition so they stay self-contained
        auto baseline = [spec, n_eval, seed] {
            auto def = problems::build_growth(spec);
            return problems::growth_infinite_baseline(spec, n_eval, sim::eval_shocks(def, seed));
        };
        out.oracle_payload = [baseline] {
            auto b = baseline();
            return json{{"baseline_objective", b.objective.mean},
                        {"baseline_se", b.objective.se},
                        {"Z_star", b.Z_star},
                        {"gamma", b.gamma}};
        };
        out.comparison = [baseline, spec, n_eval, seed](const PolicyStack&,
                                                        std::span<const double> trained) {
            auto b = baseline();
            auto def = problems::build_growth(spec);
            auto base_batch = sim::simulate_fixed(def, b.policy, n_eval, sim::eval_shocks(def, seed));
            std::vector<double> diff(trained.size());
            for (std::size_t i = 0; i < trained.size(); ++i)
                diff[i] = trained[i] - base_batch.utility[i];
            auto d = sim::estimate_objective(diff);
            return json{{"baseline_objective", b.objective.mean},
                        {"baseline_se", b.objective.se},
                        {"paired_gain", d.mean},
                        {"paired_gain_se", d.se}};
        };
    } else if (cfg.problem == "dsice") {
        auto spec = dsice_spec(cfg.spec);
        out.def = problems::build_dsice(spec);
        auto grid_best = [spec] {
            double best = -std::numeric_limits<double>::infinity();
            double bmu = 0, bp = 0;
            for (int i = 1; i <= 5; ++i)
                for (int k = 1; k <= 5; ++k) {
                    double mu = 0.2 * i - 0.1, p = 0.2 * k - 0.1;
                    double v = problems::dsice_reference_rollout(spec, mu, p);
                    if (v > best) {
                        best = v;
                        bmu = mu;
                        bp = p;
                    }
                }
            return std::tuple{best, bmu, bp};
        };
        out.oracle_payload = [grid_best] {
            auto [best, mu, p] = grid_best();
            return json{{"grid_best_value", best}, {"grid_best_mu", mu}, {"grid_best_p", p}};
        };
        out.comparison = [grid_best](const PolicyStack&, std::span<const double> trained) {
            auto [best, mu, p] = grid_best();
            auto est = sim::estimate_objective(trained);
            return json{{"grid_best_value", best},
                        {"grid_best_mu", mu},
                        {"grid_best_p", p},
                        {"beats_grid", est.mean > best}};
        };
    } else if (cfg.problem == "lq") {
        auto spec = lq_spec(cfg.spec);
        out.def = problems::build_lq(spec);
        out.oracle_payload = [spec] {
            auto sol = problems::lq_riccati(spec);
            return json{{"riccati_value", sol.value}, {"gain", sol.gain}};
        };
        out.comparison = [spec](const PolicyStack&, std::span<const double> trained) {
            auto sol = problems::lq_riccati(spec);
            auto est = sim::estimate_objective(trained);
            return json{{"riccati_value", sol.value},
                        {"gap", sol.value - est.mean},
                        {"gap_se", est.se}};
        };
    } else {
        throw ConfigError("unknown problem id '" + cfg.problem + "'");
    }
    return out;
}

// ------------------------------------------------------------- artifacts

json records_to_json(const std::vector<train::PeriodRecord>& records) {
    json arr = json::array();
    for (const auto& r : records)
        arr.push_back({r.sweep, r.period, r.accepted, r.eval_mean, r.eval_se, r.seconds, r.note});
    return arr;
}

std::vector<train::PeriodRecord> records_from_json(const json& arr) {
    std::vector<train::PeriodRecord> out;
    for (const auto& e : arr) {
        train::PeriodRecord r;
        r.sweep = e.at(0).get<long>();
        r.period = e.at(1).get<int>();
        r.accepted = e.at(2).get<bool>();
        r.eval_mean = e.at(3).get<double>();
        r.eval_se = e.at(4).get<double>();
        r.seconds = e.at(5).get<double>();
        r.note = e.at(6).get<std::string>();
        out.push_back(r);
    }
    return out;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os << text;
}

void write_checkpoint(const std::filesystem::path& dir, const PolicyStack& stack,
                      const train::TrainState& state,
                      const std::vector<train::PeriodRecord>& records) {
    {
        std::ofstream os(dir / "stack.bin", std::ios::binary);
        save_stack(os, stack);
    }
    json prog{{"next_sweep", state.next_sweep},
              {"incumbent",
               {{"mean", state.incumbent.mean}, {"se", state.incumbent.se}, {"n", state.incumbent.n}}},
              {"prev_mean", state.prev_mean},
              {"flat_sweeps", state.flat_sweeps},
              {"records", records_to_json(records)}};
    write_text(dir / "progress.json", prog.dump(2) + "\n");
}

constexpr const char* kVersion = "0.1.0";

void write_config_echo(const std::filesystem::path& dir, const RunConfig& cfg) {
    json echo{{"version", kVersion}, {"config", cfg.to_json()}, {"seed", cfg.trainer.seed}};
    write_text(dir / "config.json", echo.dump(2) + "\n");
}

int finish_run(const RunConfig& cfg, const Built& built, PolicyStack& stack,
               const train::TrainState& state, const std::vector<train::PeriodRecord>& records,
               const std::string& stop_reason) {
    std::filesystem::path dir(cfg.out_dir);
    const bool neg = built.def.display_negate;

    std::ostringstream csv;
    train::write_csv(csv, records, neg);
    write_text(dir / "sweeps.csv", csv.str());

    std::ostringstream plot;
    plot << "sweep,objective\n";
    plot.precision(17);
    long cur = -1;
    double last = 0.0;
    for (const auto& r : records) {
        if (r.sweep != cur && cur >= 0) plot << cur << ',' << (neg ? -last : last) << '\n';
        cur = r.sweep;
        last = r.eval_mean;
    }
    if (cur >= 0) plot << cur << ',' << (neg ? -last : last) << '\n';
    write_text(dir / "plotdata.csv", plot.str());

    int accepted = 0;
    for (const auto& r : records) accepted += r.accepted ? 1 : 0;
    json summary{{"problem", cfg.problem},
                 {"objective", neg ? -state.incumbent.mean : state.incumbent.mean},
                 {"se", state.incumbent.se},
                 {"sweeps", state.next_sweep},
                 {"stop_reason", stop_reason},
                 {"accepted_updates", accepted},
                 {"version", kVersion}};
    for (const auto& [name, counter] : built.def.counters)
        summary["counters"][name] = counter->load();
    if (cfg.oracle && built.comparison) {
        auto batch = sim::simulate_batch(built.def, stack, cfg.trainer.n_eval,
                                         sim::eval_shocks(built.def, cfg.trainer.seed));
        summary["comparison"] = built.comparison(stack, batch.utility);
    }
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    return 0;
}

int run_loop(const RunConfig& cfg, const Built& built, PolicyStack& stack,
             train::TrainState& state, std::vector<train::PeriodRecord>& records) {
    std::filesystem::path dir(cfg.out_dir);
    std::string stop;
    try {
        do {
            stop = train::train_step(built.def, stack, cfg.trainer, state, records);
            write_checkpoint(dir, stack, state, records);
        } while (stop.empty());
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        json summary{{"problem", cfg.problem}, {"error", e.what()}, {"version", kVersion}};
        write_text(dir / "summary.json", summary.dump(2) + "\n");
        return 3;
    }
    return finish_run(cfg, built, stack, state, records, stop);
}

} // namespace

// ------------------------------------------------------------- RunConfig

RunConfig RunConfig::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    RunConfig cfg;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "problem")
                cfg.problem = value.get<std::string>();
            else if (key == "spec")
                cfg.spec = value;
            else if (key == "hidden")
                cfg.hidden = value.get<std::vector<int>>();
            else if (key == "oracle")
                cfg.oracle = value.get<bool>();
            else if (key == "out_dir")
                cfg.out_dir = value.get<std::string>();
            else if (key == "trainer") {
                if (!value.is_object()) throw ConfigError("trainer must be an object");
                for (const auto& [tk, tv] : value.items()) {
                    if (tk == "b")
                        cfg.trainer.b = tv.get<int>();
                    else if (tk == "m")
                        cfg.trainer.m = tv.get<int>();
                    else if (tk == "N")
                        cfg.trainer.N = tv.get<int>();
                    else if (tk == "n_eval")
                        cfg.trainer.n_eval = tv.get<int>();
                    else if (tk == "max_sweeps")
                        cfg.trainer.max_sweeps = tv.get<int>();
                    else if (tk == "alpha")
                        cfg.trainer.alpha = tv.get<double>();
                    else if (tk == "tau_rel")
                        cfg.trainer.tau_rel = tv.get<double>();
                    else if (tk == "plateau_patience")
                        cfg.trainer.plateau_patience = tv.get<int>();
                    else if (tk == "seed")
                        cfg.trainer.seed = tv.get<std::uint64_t>();
                    else
                        throw ConfigError("unknown trainer field '" + tk + "'");
                }
            } else
                throw ConfigError("unknown config field '" + key + "'");
        } catch (const json::exception& e) {
            throw ConfigError("bad value for '" + key + "': " + e.what());
        }
    }
    if (cfg.problem.empty()) throw ConfigError("config: 'problem' is required");
    return cfg;
}

RunConfig RunConfig::load(const std::string& path, const std::vector<std::string>& sets) {
    json root;
    if (!path.empty()) {
        std::ifstream is(path);
        if (!is) throw ConfigError("cannot open config file '" + path + "'");
        try {
            root = json::parse(is);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("config parse error: ") + e.what());
        }
    } else {
        root = json::object();
    }
    // accept the config.json echo a run writes, so `resume --config
    // <out_dir>/config.json` works directly
    if (root.is_object() && root.contains("config") && root.contains("version"))
        root = root["config"];
    static const std::vector<std::string> trainer_keys = {
        "b", "m", "N", "n_eval", "max_sweeps", "alpha", "tau_rel", "plateau_patience", "seed"};
    for (const auto& s : sets) {
        auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("--set expects key=value, got '" + s + "'");
        std::string key = s.substr(0, eq), raw = s.substr(eq + 1);
        json value;
        try {
            value = json::parse(raw);
        } catch (const json::parse_error&) {
            value = raw; // unquoted strings pass through
        }
        // route bare keys: top-level > trainer > spec
        std::vector<std::string> parts;
        std::stringstream ss(key);
        for (std::string p; std::getline(ss, p, '.');) parts.push_back(p);
        if (parts.empty()) throw ConfigError("--set: empty key in '" + s + "'");
        if (parts.size() == 1) {
            const std::string& k = parts[0];
            if (k == "problem" || k == "hidden" || k == "oracle" || k == "out_dir")
                root[k] = value;
            else if (std::find(trainer_keys.begin(), trainer_keys.end(), k) != trainer_keys.end())
                root["trainer"][k] = value;
            else
                root["spec"][k] = value;
        } else {
            json* node = &root;
            for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
            (*node)[parts.back()] = value;
        }
    }
    return from_json(root);
}

json RunConfig::to_json() const {
    return json{{"problem", problem},
                {"spec", spec.is_null() ? json::object() : spec},
                {"trainer",
                 {{"b", trainer.b},
                  {"m", trainer.m},
                  {"N", trainer.N},
                  {"n_eval", trainer.n_eval},
                  {"max_sweeps", trainer.max_sweeps},
                  {"alpha", trainer.alpha},
                  {"tau_rel", trainer.tau_rel},
                  {"plateau_patience", trainer.plateau_patience},
                  {"seed", trainer.seed}}},
                {"hidden", hidden},
                {"oracle", oracle},
                {"out_dir", out_dir}};
}

std::vector<std::string> validate(const RunConfig& cfg) {
    std::vector<std::string> out;
    try {
        cfg.trainer.validate();
    } catch (const std::exception& e) {
        out.push_back(e.what());
    }
    if (cfg.trainer.N != 0 && cfg.trainer.b * cfg.trainer.m != cfg.trainer.N)
        out.push_back("b*m != N (" + std::to_string(cfg.trainer.b) + "*" +
                      std::to_string(cfg.trainer.m) + " != " + std::to_string(cfg.trainer.N) +
                      "); the sweep divides the N training paths into m minibatches of b");
    if (cfg.trainer.n_eval < 2) out.push_back("n_eval must be >= 2");
    for (int h : cfg.hidden)
        if (h < 1) out.push_back("hidden widths must be positive");
    try {
        auto built = build_from(cfg); // spec invariants + head compatibility
        built.def.validate();
    } catch (const std::exception& e) {
        out.push_back(e.what());
    }
    return out;
}

int run(const RunConfig& cfg) {
    auto diags = validate(cfg);
    if (!diags.empty()) throw ConfigError(diags.front());
    auto built = build_from(cfg);
    std::filesystem::create_directories(cfg.out_dir);
    write_config_echo(cfg.out_dir, cfg);
    auto stack = make_stack(built.def, cfg.hidden, cfg.trainer.seed);
    train::TrainState state;
    std::vector<train::PeriodRecord> records;
    return run_loop(cfg, built, stack, state, records);
}

int resume(const RunConfig& cfg) {
    auto diags = validate(cfg);
    if (!diags.empty()) throw ConfigError(diags.front());
    std::filesystem::path dir(cfg.out_dir);
    if (!std::filesystem::exists(dir / "progress.json") ||
        !std::filesystem::exists(dir / "stack.bin"))
        throw ConfigError("no checkpoint under '" + cfg.out_dir + "'");
    auto built = build_from(cfg);
    PolicyStack stack;
    {
        std::ifstream is(dir / "stack.bin", std::ios::binary);
        stack = load_stack(is);
    }
    json prog;
    {
        std::ifstream is(dir / "progress.json");
        try {
            prog = json::parse(is);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("corrupt progress.json: ") + e.what());
        }
    }
    train::TrainState state;
    state.next_sweep = prog.at("next_sweep").get<long>();
    state.incumbent.mean = prog.at("incumbent").at("mean").get<double>();
    state.incumbent.se = prog.at("incumbent").at("se").get<double>();
    state.incumbent.n = prog.at("incumbent").at("n").get<int>();
    state.prev_mean = prog.at("prev_mean").get<double>();
    state.flat_sweeps = prog.at("flat_sweeps").get<int>();
    auto records = records_from_json(prog.at("records"));
    write_config_echo(dir, cfg);
    return run_loop(cfg, built, stack, state, records);
}

int run_oracle(const RunConfig& cfg) {
    auto built = build_from(cfg);
    std::filesystem::create_directories(cfg.out_dir);
    json payload = built.oracle_payload ? built.oracle_payload() : json::object();
    json out{{"problem", cfg.problem},
             {"inputs", cfg.spec.is_null() ? json::object() : cfg.spec},
             {"seed", cfg.trainer.seed},
             {"version", kVersion},
             {"oracle", payload}};
    write_text(std::filesystem::path(cfg.out_dir) / "oracle.json", out.dump(2) + "\n");
    return 0;
}

} // namespace mmcc::harness
