#include "mmcc/problems.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace mmcc::problems {

GrowthSpec GrowthSpec::paper_instance() {
    GrowthSpec s;
    s.n = 6;
    s.T = 5;
    s.beta = 0.95;
    s.H = 1.0;
    s.theta = {0.1, 0.1, 0.12, 0.08, 0.1, 0.2, 0.3};
    s.tau.assign(7, 1.0);
    // Shipped default input-share matrix: uniform a_ij with b_i = 0.5,
    // satisfying b_i + sum_j a_ij = 1 (see README).
    s.A.assign(36, 0.5 / 6.0);
    s.b.assign(6, 0.5);
    s.Y0 = {6, 10, 9, 5, 8, 4};
    return s;
}

void GrowthSpec::validate() const {
    const std::size_t un = static_cast<std::size_t>(n);
    if (n < 1 || T < 1) throw std::invalid_argument("growth: bad dimensions");
    if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("growth: beta must be in (0,1)");
    if (!(H > 0.0)) throw std::invalid_argument("growth: H must be positive");
    if (theta.size() != un + 1 || tau.size() != un + 1)
        throw std::invalid_argument("growth: theta/tau need n+1 entries");
    if (A.size() != un * un || b.size() != un || Y0.size() != un)
        throw std::invalid_argument("growth: A/b/Y0 dimension mismatch");
    for (int i = 0; i < n; ++i) {
        double row = b[static_cast<std::size_t>(i)];
        if (!(row > 0.0)) throw std::invalid_argument("growth: b_i must be positive");
        for (int j = 0; j < n; ++j) {
            double a = A[static_cast<std::size_t>(i * n + j)];
            if (!(a > 0.0)) throw std::invalid_argument("growth: a_ij must be positive");
            row += a;
        }
        if (std::abs(row - 1.0) > 1e-9)
            throw std::invalid_argument("growth: b_i + sum_j a_ij = 1 violated");
    }
    for (double y : Y0)
        if (!(y > 0.0)) throw std::invalid_argument("growth: Y0 must be positive");
}

namespace {

// Control layout: index 0 = Z, 1..n = L_i; for commodity j = 1..n the
// block (n+1)*j holds c_j followed by X_{1j}..X_{nj}.
int z_index() { return 0; }
int l_index(int i) { return i; }                      // i = 1..n
int c_index(int n, int j) { return (n + 1) * j; }     // j = 1..n
int x_index(int n, int i, int j) { return (n + 1) * j + i; }

} // namespace

ProblemDefinition build_growth(const GrowthSpec& spec) {
    spec.validate();
    const int n = spec.n;
    const int nc = (n + 1) * (n + 1);

    ProblemDefinition p;
    p.name = "growth";
    p.n_s = 2 * n; // (Y, lambda)
    p.n_c = nc;
    p.n_c0 = nc;
    p.n_z = n;
    p.horizon = spec.T + 1; // utility summed over t = 0..T
    p.s0.assign(spec.Y0.begin(), spec.Y0.end());
    p.s0.insert(p.s0.end(), static_cast<std::size_t>(n), 1.0); // lambda_0 = 1
    p.obs.resize(static_cast<std::size_t>(2 * n));
    for (int i = 0; i < 2 * n; ++i) p.obs[static_cast<std::size_t>(i)] = i;

    // Head: one time-endowment group scaled to H, plus per-commodity
    // groups scaled to the current stock Y_j.
    std::vector<std::vector<int>> groups;
    std::vector<HeadSpec::GroupScale> scales;
    {
        std::vector<int> time_group;
        time_group.push_back(z_index());
        for (int i = 1; i <= n; ++i) time_group.push_back(l_index(i));
        groups.push_back(time_group);
        scales.push_back({false, -1, spec.H});
        for (int j = 1; j <= n; ++j) {
            std::vector<int> grp;
            grp.push_back(c_index(n, j));
            for (int i = 1; i <= n; ++i) grp.push_back(x_index(n, i, j));
            groups.push_back(grp);
            scales.push_back({true, j - 1, 0.0}); // state index j-1 holds Y_j
        }
    }
    p.head = HeadSpec::grouped_softmax(groups, scales);
    p.head_applies_to_c0 = true;

    p.sample_shock = [n](int, rng::Stream& s, std::span<double> z) { s.fill_normal(z); };

    // Cobb-Douglas exponent matrix: ln Y'_i = b_i ln L_i + sum_j a_ij ln X_ij.
    std::vector<double> E(static_cast<std::size_t>(n) * nc, 0.0);
    for (int i = 1; i <= n; ++i) {
        E[static_cast<std::size_t>((i - 1) * nc + l_index(i))] = spec.b[static_cast<std::size_t>(i - 1)];
        for (int j = 1; j <= n; ++j)
            E[static_cast<std::size_t>((i - 1) * nc + x_index(n, i, j))] =
                spec.A[static_cast<std::size_t>((i - 1) * n + (j - 1))];
    }

    p.transition = [n, nc, E](ad::Tape& t, int, ad::V, ad::V c, std::span<const double> z) {
        ad::V em = t.constant(E, n, nc);
        ad::V lnc = t.log_(c);
        std::vector<double> lam(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) lam[static_cast<std::size_t>(i)] = std::exp(z[static_cast<std::size_t>(i)]);
        ad::V lam_v = t.constant(lam, n);
        ad::V y_next = t.mul(lam_v, t.exp_(t.matvec(em, lnc)));
        std::vector<ad::V> parts = {y_next, lam_v};
        return t.concat(parts);
    };

    const double beta = spec.beta;
    const std::vector<double> theta = spec.theta;
    const std::vector<double> tau = spec.tau;
    p.step_utility = [n, beta, theta, tau](ad::Tape& t, int period, ad::V, ad::V, ad::V c) {
        std::vector<int> idx;
        idx.push_back(z_index());
        for (int j = 1; j <= n; ++j) idx.push_back(c_index(n, j));
        ad::V cons = t.gather(c, idx); // (Z, c_1..c_n), weights (theta_0..theta_n)
        ad::V u{};
        bool uniform_log = true;
        for (double tv : tau) uniform_log = uniform_log && tv == 1.0;
        if (uniform_log) {
            ad::V w = t.constant(theta, n + 1);
            u = t.dot(w, t.log_(cons));
        } else {
            std::vector<ad::V> terms;
            for (int j = 0; j <= n; ++j) {
                std::vector<int> one = {j};
                ad::V cj = t.gather(cons, one);
                double tj = tau[static_cast<std::size_t>(j)];
                ad::V term = tj == 1.0 ? t.log_(cj)
                                       : t.scale(t.powc(cj, 1.0 - tj), 1.0 / (1.0 - tj));
                terms.push_back(t.scale(term, theta[static_cast<std::size_t>(j)]));
            }
            ad::V s = terms[0];
            for (std::size_t k = 1; k < terms.size(); ++k) s = t.add(s, terms[k]);
            u = t.sum(s);
        }
        return t.scale(u, std::pow(beta, period));
    };

    p.validate();
    return p;
}

GrowthBaseline growth_infinite_baseline(const GrowthSpec& spec, int n_paths,
                                        const sim::ShockFn& shocks) {
    spec.validate();
    for (double tv : spec.tau)
        if (tv != 1.0)
            throw std::invalid_argument("growth baseline: closed form requires log utility");
    const int n = spec.n;

    // gamma^T = theta_{1..n}^T (I - beta A)^{-1}
    Eigen::MatrixXd A(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = spec.A[static_cast<std::size_t>(i * n + j)];
    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n) - spec.beta * A;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(M.transpose());
    if (!lu.isInvertible()) throw std::runtime_error("growth baseline: I - beta A singular");
    Eigen::VectorXd th(n);
    for (int i = 0; i < n; ++i) th(i) = spec.theta[static_cast<std::size_t>(i + 1)];
    Eigen::VectorXd gam = lu.solve(th);

    GrowthBaseline base;
    base.gamma.assign(gam.data(), gam.data() + n);
    double denom = spec.theta[0];
    for (int j = 0; j < n; ++j) denom += spec.beta * gam(j) * spec.b[static_cast<std::size_t>(j)];
    base.Z_star = spec.theta[0] / denom * spec.H;
    base.L_star.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        base.L_star[static_cast<std::size_t>(i)] =
            spec.beta * gam(i) * spec.b[static_cast<std::size_t>(i)] / denom * spec.H;

    const int nc = (n + 1) * (n + 1);
    GrowthSpec sp = spec;
    std::vector<double> gamma = base.gamma;
    double Z_star = base.Z_star;
    std::vector<double> L_star = base.L_star;
    base.policy = [sp, gamma, Z_star, L_star, n, nc](int, std::span<const double> state,
                                                     std::span<double> ctrl) {
        ctrl[static_cast<std::size_t>(z_index())] = Z_star;
        for (int i = 1; i <= n; ++i)
            ctrl[static_cast<std::size_t>(l_index(i))] = L_star[static_cast<std::size_t>(i - 1)];
        for (int j = 1; j <= n; ++j) {
            double Yj = state[static_cast<std::size_t>(j - 1)];
            ctrl[static_cast<std::size_t>(c_index(n, j))] =
                sp.theta[static_cast<std::size_t>(j)] / gamma[static_cast<std::size_t>(j - 1)] * Yj;
            for (int i = 1; i <= n; ++i)
                ctrl[static_cast<std::size_t>(x_index(n, i, j))] =
                    sp.beta * gamma[static_cast<std::size_t>(i - 1)] *
                    sp.A[static_cast<std::size_t>((i - 1) * n + (j - 1))] /
                    gamma[static_cast<std::size_t>(j - 1)] * Yj;
        }
    };

    ProblemDefinition problem = build_growth(spec);
    auto batch = sim::simulate_fixed(problem, base.policy, n_paths, shocks);
    base.objective = sim::estimate_objective(batch.utility);
    return base;
}

} // namespace mmcc::problems
