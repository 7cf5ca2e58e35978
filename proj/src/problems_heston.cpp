#include "mmcc/problems.hpp"

#include <cmath>
#include <stdexcept>

namespace mmcc::problems {

double HestonSpec::source() const { return theta() * std::pow(delta, psi) / (psi * k()); }

double HestonSpec::r_tilde(double y) const {
    double lam_over_sig_sq = lambda_bar * lambda_bar * y; // lambda(y)^2 / sigma(y)^2
    return (r * (1.0 - gamma) - delta * theta() +
            0.5 * ((1.0 - gamma) / gamma) * lam_over_sig_sq) /
           k();
}

double HestonSpec::alpha_tilde(double y) const {
    // alpha(y) + ((1-gamma)/gamma) * (lambda/sigma) * beta(y) * rho, with
    // lambda/sigma = lambda_bar*sqrt(y) and beta(y) = beta_bar*sqrt(y).
    return kappa * (y_bar - y) + ((1.0 - gamma) / gamma) * lambda_bar * beta_bar * rho * y;
}

HestonSpec HestonSpec::paper_instance() { return {}; }

HestonSpec HestonSpec::desk_instance() {
    HestonSpec s;
    s.T = 2.0;
    s.steps = 24;
    return s;
}

void HestonSpec::validate() const {
    if (!(gamma > 0.0) || gamma == 1.0) throw std::invalid_argument("heston: need gamma > 0, != 1");
    if (!(psi > 0.0) || psi == 1.0) throw std::invalid_argument("heston: need psi > 0, != 1");
    if (!(T > 0.0) || steps < 1) throw std::invalid_argument("heston: bad horizon");
    if (!(y0 >= 0.0) || !(y_bar > 0.0)) throw std::invalid_argument("heston: bad variance levels");
    if (!(delta > 0.0)) throw std::invalid_argument("heston: delta must be positive");
}

ProblemDefinition build_heston_fbsde(const HestonSpec& spec) {
    spec.validate();
    const double dt = spec.T / spec.steps;
    const double sdt = std::sqrt(dt);
    const double cst = spec.source();
    const double pw = spec.exponent();
    // r_tilde and alpha_tilde are affine in y
    const double r0 = spec.r_tilde(0.0), r1 = spec.r_tilde(1.0) - spec.r_tilde(0.0);
    const double a0 = spec.alpha_tilde(0.0), a1 = spec.alpha_tilde(1.0) - spec.alpha_tilde(0.0);
    const double bbar = spec.beta_bar;

    ProblemDefinition p;
    p.name = "heston";
    p.n_s = 2; // (xi, eta)
    p.n_c = 1; // Z_t
    p.n_c0 = 2; // (xi_0, Z_0)
    p.n_z = 1;
    p.horizon = spec.steps;
    p.s0 = {1.0, spec.y0}; // xi slot overwritten by the xi_0 control at t = 0
    p.obs = {1};           // networks see eta
    p.head = HeadSpec::unconstrained();
    p.display_negate = true; // paper minimizes E(xi_T - 1)^2

    auto neg_var = std::make_shared<std::atomic<long long>>(0);
    p.counters["negative_variance"] = neg_var;

    p.sample_shock = [sdt](int, rng::Stream& s, std::span<double> z) {
        z[0] = sdt * s.next_normal();
    };

    p.transition = [=](ad::Tape& t, int period, ad::V s, ad::V c,
                       std::span<const double> z) {
        std::vector<int> i0 = {0}, i1 = {1};
        ad::V eta = t.gather(s, i1);
        ad::V xi, zc;
        if (period == 0) {
            xi = t.gather(c, i0);
            zc = t.gather(c, i1);
        } else {
            xi = t.gather(s, i0);
            zc = c;
        }
        if (t.value(eta)[0] < 0.0) neg_var->fetch_add(1);
        ad::V etap = t.relu(eta); // full truncation inside coefficient evaluations
        // d xi = -[r~(eta) xi + cst * xi^pw] dt + Z dW. Note the sign of
        // the linear term: re-deriving the HJB reduction (it reproduces
        // r~, alpha~, the source constant and the exponent k exactly)
        // shows the xi-drift is -r~ xi - cst xi^pw; the widely quoted
        // form with +r~ xi contradicts the expected-utility special case
        // psi = 1/gamma.
        ad::V rt = t.shift(t.scale(etap, r1), r0);
        ad::V drift = t.neg(t.mul(rt, xi));
        if (pw == 0.0)
            drift = t.shift(drift, -cst);
        else
            drift = t.sub(drift, t.scale(t.powc(xi, pw), cst));
        ad::V dw = t.constant(z, 1);
        ad::V xi_next = t.add(xi, t.add(t.scale(drift, dt), t.mul(zc, dw)));
        // d eta = alpha~(eta) dt + beta_bar sqrt(eta) dW
        ad::V at = t.shift(t.scale(etap, a1), a0);
        ad::V vol = t.scale(t.sqrt_(t.shift(etap, 1e-12)), bbar);
        ad::V eta_next = t.add(eta, t.add(t.scale(at, dt), t.mul(vol, dw)));
        std::vector<ad::V> parts = {xi_next, eta_next};
        return t.concat(parts);
    };

    p.general_utility = [](ad::Tape& t, std::span<const ad::V> states, std::span<const ad::V>) {
        std::vector<int> i0 = {0};
        ad::V xi = t.gather(states.back(), i0);
        ad::V err = t.shift(xi, -1.0);
        return t.neg(t.dot(err, err));
    };

    p.validate();
    return p;
}

// Thomas algorithm for a tridiagonal system (lo, di, up are the three bands).
static void solve_tridiag(std::vector<double>& lo, std::vector<double>& di,
                          std::vector<double>& up, std::vector<double>& rhs) {
    const std::size_t n = di.size();
    for (std::size_t i = 1; i < n; ++i) {
        double w = lo[i] / di[i - 1];
        di[i] -= w * up[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    rhs[n - 1] /= di[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - up[i] * rhs[i + 1]) / di[i];
}

double heston_pde_oracle(const HestonSpec& spec, const PdeGrid& grid) {
    spec.validate();
    if (grid.ny < 4 || grid.nt < 1) throw std::invalid_argument("heston oracle: grid too coarse");
    if (!(grid.y_max > spec.y0)) throw std::invalid_argument("heston oracle: y0 not interior");
    const int ny = grid.ny, nt = grid.nt;
    const double h = grid.y_max / ny;
    const double dt = spec.T / nt;
    const double cst = spec.source();
    const double pw = spec.exponent();

    std::vector<double> g(static_cast<std::size_t>(ny + 1), 1.0); // terminal g(T, y) = 1
    std::vector<double> lo(g.size()), di(g.size()), up(g.size()), rhs(g.size());

    for (int n = 0; n < nt; ++n) {
        for (int i = 0; i <= ny; ++i) {
            const double y = i * h;
            const double rt = spec.r_tilde(y);
            const double at = spec.alpha_tilde(y);
            const double dif = 0.5 * spec.beta_bar * spec.beta_bar * y;
            double cl = 0.0, cd = rt, cu = 0.0; // L = r~ + a~ d_y + dif d_yy
            if (i == 0) { // one-sided drift, zero diffusion at y = 0
                cd += -at / h;
                cu += at / h;
            } else if (i == ny) { // one-sided drift, g_yy ~ 0 at the far edge
                cl += -at / h;
                cd += at / h;
            } else {
                cl += -at / (2.0 * h) + dif / (h * h);
                cd += -2.0 * dif / (h * h);
                cu += at / (2.0 * h) + dif / (h * h);
            }
            std::size_t k = static_cast<std::size_t>(i);
            lo[k] = -dt * cl;
            di[k] = 1.0 - dt * cd;
            up[k] = -dt * cu;
            const double src = pw == 0.0 ? cst : cst * std::pow(g[k], pw);
            rhs[k] = g[k] + dt * src;
        }
        solve_tridiag(lo, di, up, rhs);
        g = rhs;
        for (double v : g)
            if (!std::isfinite(v))
                throw std::runtime_error("heston oracle: finite-difference solution diverged");
    }
    // linear interpolation at y0
    double pos = spec.y0 / h;
    int i = std::min(static_cast<int>(pos), ny - 1);
    double w = pos - i;
    return (1.0 - w) * g[static_cast<std::size_t>(i)] + w * g[static_cast<std::size_t>(i + 1)];
}

double heston_pde_oracle_converged(const HestonSpec& spec, PdeGrid grid, double tol,
                                   int max_doublings) {
    double prev = heston_pde_oracle(spec, grid);
    for (int k = 0; k < max_doublings; ++k) {
        grid.ny *= 2;
        grid.nt *= 2;
        double next = heston_pde_oracle(spec, grid);
        if (std::abs(next - prev) < tol) return next;
        prev = next;
    }
    throw std::runtime_error("heston oracle: grid doubling did not converge");
}

} // namespace mmcc::problems
