#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mmcc/optim.hpp"

#include <cmath>
#include <limits>
#include <vector>

using namespace mmcc;

TEST_CASE("first adam step matches the hand-computed update") {
    std::vector<double> p = {1.0, -2.0};
    std::vector<double> g = {0.3, -0.7}; // ascent gradient
    auto st = optim::AdamState::make(2, 0.01);
    optim::adam_step(p, g, st);
    CHECK(st.step == 1);
    for (int i = 0; i < 2; ++i) {
        // bias-corrected m_hat = g, v_hat = g^2 on the first step; the
        // descent update uses -g because the objective is maximized.
        double gd = -g[static_cast<std::size_t>(i)];
        double expect = (i == 0 ? 1.0 : -2.0) - 0.01 * gd / (std::abs(gd) + 1e-8);
        CHECK(p[static_cast<std::size_t>(i)] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("adam matches a reference implementation over many steps") {
    std::vector<double> p = {0.5, 0.5, 0.5};
    std::vector<double> pref = p;
    auto st = optim::AdamState::make(3, 0.02, 0.8, 0.95, 1e-8);
    std::vector<double> m(3, 0.0), v(3, 0.0);
    for (int k = 1; k <= 50; ++k) {
        std::vector<double> g(3);
        for (int i = 0; i < 3; ++i)
            g[static_cast<std::size_t>(i)] = std::sin(0.1 * k + i) * (i + 1);
        optim::adam_step(p, g, st);
        for (int i = 0; i < 3; ++i) {
            std::size_t u = static_cast<std::size_t>(i);
            double gd = -g[u];
            m[u] = 0.8 * m[u] + 0.2 * gd;
            v[u] = 0.95 * v[u] + 0.05 * gd * gd;
            double mh = m[u] / (1.0 - std::pow(0.8, k));
            double vh = v[u] / (1.0 - std::pow(0.95, k));
            pref[u] -= 0.02 * mh / (std::sqrt(vh) + 1e-8);
        }
    }
    for (int i = 0; i < 3; ++i)
        CHECK(p[static_cast<std::size_t>(i)] ==
              doctest::Approx(pref[static_cast<std::size_t>(i)]).epsilon(1e-12));
}

TEST_CASE("adam ascends a concave quadratic to its maximizer") {
    std::vector<double> p = {-4.0};
    auto st = optim::AdamState::make(1, 0.05);
    for (int k = 0; k < 2000; ++k) {
        std::vector<double> g = {2.0 * (3.0 - p[0])}; // d/dp of -(p-3)^2
        optim::adam_step(p, g, st);
    }
    CHECK(p[0] == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("non-finite gradient throws and leaves parameters untouched") {
    std::vector<double> p = {1.0, 2.0, 3.0};
    std::vector<double> keep = p;
    std::vector<double> g = {0.1, std::numeric_limits<double>::quiet_NaN(), 0.2};
    auto st = optim::AdamState::make(3, 0.01);
    CHECK_THROWS_AS(optim::adam_step(p, g, st), optim::PoisonedStepError);
    try {
        optim::adam_step(p, g, st);
    } catch (const optim::PoisonedStepError& e) {
        CHECK(e.index == 1);
    }
    CHECK(p == keep);
    CHECK(st.step == 0);
    g[1] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(optim::adam_step(p, g, st), optim::PoisonedStepError);
}

TEST_CASE("run_minibatch_ascent visits minibatches in order, once each") {
    std::vector<int> seen;
    optim::MinibatchSampler sampler = [&seen](int j, std::span<const double> params) {
        seen.push_back(j);
        return std::make_pair(0.0, std::vector<double>{params[0] > 0 ? -1.0 : 1.0});
    };
    std::vector<double> p = {5.0};
    auto st = optim::AdamState::make(1, 0.01);
    optim::run_minibatch_ascent(sampler, p, st, 7);
    CHECK(st.step == 7);
    REQUIRE(seen.size() == 7);
    for (int j = 0; j < 7; ++j) CHECK(seen[static_cast<std::size_t>(j)] == j);
    CHECK(p[0] < 5.0); // ascent gradient -1 pushes the parameter down
}

TEST_CASE("sampler exceptions propagate out of run_minibatch_ascent") {
    optim::MinibatchSampler sampler = [](int j, std::span<const double>) {
        if (j == 2) throw optim::PoisonedStepError(0);
        return std::make_pair(0.0, std::vector<double>{1.0});
    };
    std::vector<double> p = {0.0};
    auto st = optim::AdamState::make(1, 0.01);
    CHECK_THROWS_AS(optim::run_minibatch_ascent(sampler, p, st, 5), optim::PoisonedStepError);
    CHECK(st.step == 2); // two clean steps before the failure
}
