#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mmcc/problems.hpp"
#include "mmcc/simulate.hpp"

#include <cmath>
#include <vector>

using namespace mmcc;

namespace {

ProblemDefinition lq_problem(double sigma = 0.3) {
    auto spec = problems::LqSpec::small_instance(); // d = 2, T = 3
    spec.sigma = sigma;
    return problems::build_lq(spec);
}

} // namespace

TEST_CASE("shock factories are deterministic and decorrelated") {
    auto p = lq_problem();
    auto ev = sim::eval_shocks(p, 99);
    std::vector<double> a(2), b(2);
    ev(3, 1, a);
    ev(0, 0, b); // interleave another call
    ev(3, 1, b);
    CHECK(a == b);
    auto ev2 = sim::eval_shocks(p, 100);
    ev2(3, 1, b);
    CHECK(a != b);
    // sweep shocks differ between sweeps; train shocks differ per minibatch
    auto s0 = sim::sweep_shocks(p, 99, 0), s1 = sim::sweep_shocks(p, 99, 1);
    s0(3, 1, a);
    s1(3, 1, b);
    CHECK(a != b);
    auto t0 = sim::train_shocks(p, 99, 0, 2, 0), t1 = sim::train_shocks(p, 99, 0, 2, 1);
    t0(0, 2, a);
    t1(0, 2, b);
    CHECK(a != b);
}

TEST_CASE("estimate_objective computes mean and standard error") {
    std::vector<double> xs = {1.0, 2.0, 3.0, 4.0};
    auto e = sim::estimate_objective(xs);
    CHECK(e.n == 4);
    CHECK(e.mean == doctest::Approx(2.5));
    // sample sd = sqrt(5/3), se = sd / 2
    CHECK(e.se == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
    std::vector<double> one = {7.0};
    auto e1 = sim::estimate_objective(one);
    CHECK(e1.mean == 7.0);
    CHECK(e1.se == 0.0);
    CHECK(e1.n == 1);
}

TEST_CASE("simulate_batch is reproducible and starts at s0") {
    auto p = lq_problem();
    auto stack = make_stack(p, {6}, 1);
    auto shocks = sim::eval_shocks(p, 5);
    auto b1 = sim::simulate_batch(p, stack, 300, shocks);
    auto b2 = sim::simulate_batch(p, stack, 300, shocks);
    CHECK(b1.utility == b2.utility);
    CHECK(b1.states == b2.states);
    REQUIRE(b1.n_paths == 300);
    for (int path : {0, 17, 299}) {
        auto s = b1.state(path, 0);
        REQUIRE(s.size() == 2);
        CHECK(s[0] == 1.0);
        CHECK(s[1] == 1.0);
    }
    auto e = sim::evaluate_stack(p, stack, 300, shocks);
    CHECK(e.mean == sim::estimate_objective(b1.utility).mean);
}

TEST_CASE("noiseless LQ under a fixed rule matches the closed-form rollout") {
    auto p = lq_problem(0.0);
    sim::ControlFn zero = [](int, std::span<const double>, std::span<double> c) {
        for (double& x : c) x = 0.0;
    };
    auto batch = sim::simulate_fixed(p, zero, 4, sim::eval_shocks(p, 1));
    // s_{t+1} = 0.9 s_t from (1,1); cost sums q|s_t|^2 over t = 0..2 plus q|s_3|^2
    double expect = 0.0;
    double s = 1.0;
    for (int t = 0; t <= 3; ++t) {
        expect -= 2.0 * s * s; // d = 2 identical coordinates, q = 1
        s *= 0.9;
    }
    for (double u : batch.utility) CHECK(u == doctest::Approx(expect).epsilon(1e-12));
    // controls recorded in the batch are the written ones
    for (int t = 0; t < 3; ++t)
        for (double c : batch.control(0, t)) CHECK(c == 0.0);
}

TEST_CASE("suffix value at t = 0 equals the mean simulated utility") {
    auto p = lq_problem();
    auto stack = make_stack(p, {6}, 2);
    auto shocks = sim::eval_shocks(p, 31);
    const int b = 64;
    auto batch = sim::simulate_batch(p, stack, b, shocks);
    double mean = sim::estimate_objective(batch.utility).mean;
    std::vector<double> starts;
    for (int i = 0; i < b; ++i) starts.insert(starts.end(), p.s0.begin(), p.s0.end());
    double v = sim::suffix_value_and_grad(p, stack, 0, starts, b, shocks, {});
    CHECK(v == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("suffix gradients match frozen-shock finite differences") {
    auto p = lq_problem();
    auto stack = make_stack(p, {5}, 4);
    auto shocks = sim::eval_shocks(p, 8);
    const int b = 8;
    // start states drawn off s0 so period-t nets see varied inputs
    for (int t = 0; t < p.horizon; ++t) {
        std::vector<double> starts;
        for (int i = 0; i < b; ++i) {
            starts.push_back(1.0 + 0.1 * i);
            starts.push_back(-0.5 + 0.05 * i);
        }
        std::vector<double> grad(stack.period_param_count(t));
        double base = sim::suffix_value_and_grad(p, stack, t, starts, b, shocks, grad);
        CHECK(std::isfinite(base));
        auto params = stack.clone_period(t);
        const double h = 1e-6;
        for (std::size_t i = 0; i < params.size();
             i += std::max<std::size_t>(1, params.size() / 11)) {
            auto pp = params;
            pp[i] += h;
            stack.restore_period(t, pp);
            double up = sim::suffix_value_and_grad(p, stack, t, starts, b, shocks, {});
            pp[i] -= 2 * h;
            stack.restore_period(t, pp);
            double dn = sim::suffix_value_and_grad(p, stack, t, starts, b, shocks, {});
            stack.restore_period(t, params);
            CHECK(grad[i] == doctest::Approx((up - dn) / (2 * h)).epsilon(1e-4));
        }
    }
}

TEST_CASE("spliced value at t = 0 reduces to the full-path objective") {
    auto spec = problems::FbsdeSpec::desk_instance(2);
    spec.steps = 4;
    auto p = problems::build_fbsde(spec);
    auto stack = make_stack(p, {6}, 3);
    auto shocks = sim::eval_shocks(p, 12);
    const int b = 16;
    auto prefix = sim::simulate_batch(p, stack, b, shocks);
    std::vector<int> paths(b);
    for (int i = 0; i < b; ++i) paths[static_cast<std::size_t>(i)] = i;
    double v = sim::spliced_value_and_grad(p, stack, 0, prefix, paths, shocks, {});
    CHECK(v == doctest::Approx(sim::estimate_objective(prefix.utility).mean).epsilon(1e-10));
}

TEST_CASE("spliced gradients match frozen-shock finite differences") {
    auto spec = problems::FbsdeSpec::desk_instance(2);
    spec.steps = 4;
    auto p = problems::build_fbsde(spec);
    auto stack = make_stack(p, {5}, 6);
    auto shocks = sim::eval_shocks(p, 21);
    const int b = 8;
    auto prefix = sim::simulate_batch(p, stack, b, shocks);
    std::vector<int> paths = {0, 1, 2, 3, 4, 5, 6, 7};
    auto fresh = sim::train_shocks(p, 21, 0, 0, 0);
    for (int t : {0, 2, 3}) {
        std::vector<double> grad(stack.period_param_count(t));
        sim::spliced_value_and_grad(p, stack, t, prefix, paths, fresh, grad);
        auto params = stack.clone_period(t);
        const double h = 1e-6;
        for (std::size_t i = 0; i < params.size();
             i += std::max<std::size_t>(1, params.size() / 9)) {
            auto pp = params;
            pp[i] += h;
            stack.restore_period(t, pp);
            double up = sim::spliced_value_and_grad(p, stack, t, prefix, paths, fresh, {});
            pp[i] -= 2 * h;
            stack.restore_period(t, pp);
            double dn = sim::spliced_value_and_grad(p, stack, t, prefix, paths, fresh, {});
            stack.restore_period(t, params);
            CHECK(grad[i] == doctest::Approx((up - dn) / (2 * h)).epsilon(1e-4));
        }
    }
}

TEST_CASE("diverging dynamics raise SimulationError with location info") {
    ProblemDefinition p;
    p.name = "explode";
    p.n_s = 1;
    p.n_c = 1;
    p.n_c0 = 1;
    p.n_z = 0;
    p.horizon = 4;
    p.s0 = {2.0};
    p.obs = {0};
    p.head = HeadSpec::unconstrained();
    p.transition = [](ad::Tape& t, int, ad::V s, ad::V, std::span<const double>) {
        return t.mul(t.scale(s, 1e200), s); // overflows to inf within two steps
    };
    p.step_utility = [](ad::Tape& t, int, ad::V, ad::V, ad::V c) { return t.sum(c); };
    p.validate();
    auto stack = make_stack(p, {4}, 1);
    try {
        sim::simulate_batch(p, stack, 2, {});
        FAIL("expected SimulationError");
    } catch (const sim::SimulationError& e) {
        CHECK(e.path >= 0);
        CHECK(e.period >= 0);
        CHECK(std::string(e.what()).find("explode") != std::string::npos);
    }
}
