#include "mmcc/problems.hpp"

#include <cmath>
#include <stdexcept>

namespace mmcc::problems {

namespace {

// g(x) = ln((1 + x'x)/2), the paper's terminal function.
ad::V log_quadratic_taped(ad::Tape& t, ad::V x) {
    return t.log_(t.scale(t.shift(t.dot(x, x), 1.0), 0.5));
}

double log_quadratic_scalar(std::span<const double> x) {
    double q = 0.0;
    for (double v : x) q += v * v;
    return std::log(0.5 * (1.0 + q));
}

} // namespace

FbsdeSpec FbsdeSpec::paper_instance() {
    FbsdeSpec s;
    s.d_w = 100;
    s.T = 1.0;
    s.steps = 20;
    s.beta = -1.0;
    return s;
}

FbsdeSpec FbsdeSpec::desk_instance(int d_w) {
    FbsdeSpec s = paper_instance();
    s.d_w = d_w;
    return s;
}

void FbsdeSpec::validate() const {
    if (d_w < 1) throw std::invalid_argument("fbsde: d_w must be >= 1");
    if (steps < 1) throw std::invalid_argument("fbsde: N_T must be >= 1");
    if (!(T > 0.0)) throw std::invalid_argument("fbsde: T must be positive");
    if (beta == 0.0) throw std::invalid_argument("fbsde: beta must be nonzero");
    if (!x0.empty() && static_cast<int>(x0.size()) != d_w)
        throw std::invalid_argument("fbsde: x0 dimension mismatch");
}

ProblemDefinition build_fbsde(const FbsdeSpec& spec_in) {
    FbsdeSpec spec = spec_in;
    spec.validate();
    if (spec.x0.empty()) spec.x0.assign(static_cast<std::size_t>(spec.d_w), 0.0);
    if (!spec.g_taped) spec.g_taped = log_quadratic_taped;

    const int d = spec.d_w;
    const double dt = spec.T / spec.steps;
    const double sdt = std::sqrt(dt);
    const double beta = spec.beta;

    ProblemDefinition p;
    p.name = "fbsde";
    p.n_s = d + 1; // (X, Y)
    p.n_c = d;     // c(t_n, X) with Z = sqrt(2) c
    p.n_c0 = d + 1; // (y, z0)
    p.n_z = d;
    p.horizon = spec.steps;
    p.s0.assign(spec.x0.begin(), spec.x0.end());
    p.s0.push_back(0.0); // Y slot; overwritten by the y control at t = 0
    p.obs.resize(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) p.obs[static_cast<std::size_t>(i)] = i;
    p.head = HeadSpec::unconstrained();
    p.display_negate = true; // paper minimizes E|Y_T - g(X_T)|^2

    p.sample_shock = [sdt](int, rng::Stream& s, std::span<double> z) {
        s.fill_normal(z);
        for (double& x : z) x *= sdt; // Delta W ~ N(0, dt)
    };

    auto g_taped = spec.g_taped;
    p.transition = [d, dt, beta](ad::Tape& t, int period, ad::V s, ad::V c,
                                 std::span<const double> z) {
        std::vector<int> xs(static_cast<std::size_t>(d));
        for (int i = 0; i < d; ++i) xs[static_cast<std::size_t>(i)] = i;
        ad::V x = t.gather(s, xs);
        ad::V dw = t.constant(z, d);
        ad::V x_next = t.add(x, t.scale(dw, std::sqrt(2.0)));

        ad::V y, zc; // current Y and the Z control (pre sqrt(2) map for t >= 1)
        if (period == 0) {
            std::vector<int> yi = {0};
            y = t.gather(c, yi);
            std::vector<int> zi(static_cast<std::size_t>(d));
            for (int i = 0; i < d; ++i) zi[static_cast<std::size_t>(i)] = i + 1;
            zc = t.gather(c, zi); // z0 used directly
        } else {
            std::vector<int> yi = {d};
            y = t.gather(s, yi);
            zc = t.scale(c, std::sqrt(2.0)); // Z = sigma^T c with sigma = sqrt(2) I
        }
        // dY = -(beta/2)|Z|^2 dt + Z dW (Cole-Hopf: u_t + Lap u + beta|grad u|^2 = 0)
        ad::V drift = t.scale(t.dot(zc, zc), -0.5 * beta * dt);
        ad::V diffu = t.dot(zc, dw);
        ad::V y_next = t.add(y, t.add(drift, diffu));
        std::vector<ad::V> parts = {x_next, y_next};
        return t.concat(parts);
    };

    p.general_utility = [d, g_taped](ad::Tape& t, std::span<const ad::V> states,
                                     std::span<const ad::V>) {
        ad::V sT = states.back();
        std::vector<int> xs(static_cast<std::size_t>(d));
        for (int i = 0; i < d; ++i) xs[static_cast<std::size_t>(i)] = i;
        ad::V x = t.gather(sT, xs);
        std::vector<int> yi = {d};
        ad::V y = t.gather(sT, yi);
        ad::V err = t.sub(y, g_taped(t, x));
        return t.neg(t.dot(err, err));
    };

    p.validate();
    return p;
}

OracleResult fbsde_oracle_y(const FbsdeSpec& spec_in, long n_mc, std::uint64_t seed) {
    FbsdeSpec spec = spec_in;
    spec.validate();
    if (n_mc < 1000) throw std::invalid_argument("fbsde oracle: N_mc must be >= 1e3");
    if (spec.x0.empty()) spec.x0.assign(static_cast<std::size_t>(spec.d_w), 0.0);
    auto g = spec.g_scalar ? spec.g_scalar : log_quadratic_scalar;

    const double sT = std::sqrt(2.0 * spec.T); // X_T = x0 + sqrt(2) W_T
    std::vector<double> x(static_cast<std::size_t>(spec.d_w));
    std::vector<double> e(static_cast<std::size_t>(n_mc)); // beta*g samples
    for (long i = 0; i < n_mc; ++i) {
        auto s = rng::Stream::keyed(seed, rng::kOracle, static_cast<std::uint64_t>(i));
        for (int j = 0; j < spec.d_w; ++j)
            x[static_cast<std::size_t>(j)] = spec.x0[static_cast<std::size_t>(j)] + sT * s.next_normal();
        e[static_cast<std::size_t>(i)] = spec.beta * g(x);
    }
    // log-sum-exp: y* = (1/beta)(LSE(e) - ln N); SE by the delta method.
    double mx = e[0];
    for (double v : e) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : e) sum += std::exp(v - mx);
    double mean = sum / static_cast<double>(n_mc);
    double var = 0.0;
    for (double v : e) {
        double dlt = std::exp(v - mx) - mean;
        var += dlt * dlt;
    }
    var /= static_cast<double>(n_mc - 1);
    OracleResult out;
    out.value = (mx + std::log(mean)) / spec.beta;
    out.se = std::sqrt(var / static_cast<double>(n_mc)) / (std::abs(spec.beta) * mean);
    return out;
}

} // namespace mmcc::problems
