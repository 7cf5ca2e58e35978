#include "mmcc/problems.hpp"

#include <cmath>
#include <stdexcept>

namespace mmcc::problems {

double DsiceSpec::pop(int t) const {
    return 6514.0 * std::exp(-0.035 * t) + 8600.0 * (1.0 - std::exp(-0.035 * t));
}

double DsiceSpec::trend(int t) const {
    return A0 * std::exp(alpha1 * (1.0 - std::exp(-alpha2 * t)) / alpha2);
}

double DsiceSpec::sigma_t(int t) const {
    return sigma0 * std::exp(-0.0073 * (1.0 - std::exp(-0.003 * t)) / 0.003);
}

double DsiceSpec::theta1(int t) const {
    return 1.17 * sigma_t(t) * (1.0 + std::exp(-0.005 * t)) / (2.0 * theta2);
}

double DsiceSpec::e_land(int t) const { return e_land0 * std::max(0.0, 1.0 - t / 100.0); }

DsiceSpec DsiceSpec::paper_instance() { return {}; }

DsiceSpec DsiceSpec::smoke_instance() {
    DsiceSpec s;
    s.horizon = 60;
    s.tail = 40;
    return s;
}

void DsiceSpec::validate() const {
    if (horizon < 1 || tail < 0) throw std::invalid_argument("dsice: bad horizon/tail");
    auto rate = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (!rate(phi12) || !rate(phi21) || !rate(phi23) || !rate(phi32))
        throw std::invalid_argument("dsice: carbon diffusion rates must lie in [0,1]");
    if (!(K0 > 0.0)) throw std::invalid_argument("dsice: K0 must be positive");
    if (M0.size() != 3 || T0.size() != 2) throw std::invalid_argument("dsice: M0/T0 dimensions");
    if (!(psi > 0.0) || psi == 1.0) throw std::invalid_argument("dsice: need psi > 0, != 1");
    if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("dsice: beta must be in (0,1)");
    if (!(m_at_star > 0.0) || !(theta2 > 1.0)) throw std::invalid_argument("dsice: bad parameters");
}

namespace {

struct Tables {
    // per-period exogenous series, horizon + tail + 1 entries
    std::vector<double> L, A, sig, th1, eland, fex, disc;
};

Tables make_tables(const DsiceSpec& s) {
    Tables tb;
    int n = s.horizon + s.tail + 1;
    tb.L.resize(static_cast<std::size_t>(n));
    tb.A.resize(static_cast<std::size_t>(n));
    tb.sig.resize(static_cast<std::size_t>(n));
    tb.th1.resize(static_cast<std::size_t>(n));
    tb.eland.resize(static_cast<std::size_t>(n));
    tb.fex.resize(static_cast<std::size_t>(n));
    tb.disc.resize(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) {
        std::size_t k = static_cast<std::size_t>(t);
        tb.L[k] = s.pop(t);
        tb.A[k] = s.trend(t);
        tb.sig[k] = s.sigma_t(t);
        tb.th1[k] = s.theta1(t);
        tb.eland[k] = s.e_land(t);
        tb.fex[k] = s.f_ex(t);
        tb.disc[k] = std::pow(s.beta, t);
    }
    return tb;
}

// State layout: (K, M_AT, M_UO, M_LO, T_AT, T_OC, zeta, chi).
constexpr int kK = 0, kMAT = 1, kTAT = 4, kZeta = 6;

// Output net of damage: Omega(T_AT) * zeta * A_t * K^alpha * L^(1-alpha).
ad::V gross_product(ad::Tape& t, const DsiceSpec& s, ad::V K, ad::V zeta, double At, double Lt) {
    ad::V ka = t.powc(K, s.alpha);
    return t.scale(t.mul(zeta, ka), At * std::pow(Lt, 1.0 - s.alpha));
}

ad::V damage_factor(ad::Tape& t, const DsiceSpec& s, ad::V tat) {
    ad::V den = t.shift(t.add(t.scale(tat, s.pi1), t.scale(t.square(tat), s.pi2)), 1.0);
    return t.powc(den, -1.0);
}

// M' = Phi_M M + (E, 0, 0); T' = Phi_T T + (xi1 F, 0). Dense 3x3/2x2 matvecs.
ad::V carbon_step(ad::Tape& t, const DsiceSpec& s, ad::V M, ad::V E) {
    std::vector<double> phi = {1.0 - s.phi12, s.phi21,                   0.0,
                               s.phi12,       1.0 - s.phi21 - s.phi23,   s.phi32,
                               0.0,           s.phi23,                   1.0 - s.phi32};
    ad::V pm = t.constant(phi, 3, 3);
    std::vector<ad::V> ez = {E, t.scalar(0.0), t.scalar(0.0)};
    return t.add(t.matvec(pm, M), t.concat(ez));
}

ad::V temperature_step(ad::Tape& t, const DsiceSpec& s, ad::V T, ad::V forcing) {
    std::vector<double> phi = {1.0 - s.heat21 - s.xi2, s.heat12,
                               s.heat21,               1.0 - s.heat12};
    ad::V pt = t.constant(phi, 2, 2);
    std::vector<ad::V> fz = {t.scale(forcing, s.xi1), t.scalar(0.0)};
    return t.add(t.matvec(pt, T), t.concat(fz));
}

ad::V radiative_forcing(ad::Tape& t, const DsiceSpec& s, ad::V mat, double fex) {
    // eta * log2(M_AT / M*) + F_EX
    ad::V lg = t.scale(t.log_(t.scale(mat, 1.0 / s.m_at_star)), s.eta / std::log(2.0));
    return t.shift(lg, fex);
}

// beta^t * L * (C/L)^(1-1/psi) / (1-1/psi)
ad::V period_utility(ad::Tape& t, const DsiceSpec& s, ad::V C, double Lt, double disc) {
    double e = 1.0 - 1.0 / s.psi;
    ad::V cl = t.powc(t.scale(C, 1.0 / Lt), e);
    return t.scale(cl, disc * Lt / e);
}

} // namespace

ProblemDefinition build_dsice(const DsiceSpec& spec) {
    spec.validate();
    auto tb = std::make_shared<Tables>(make_tables(spec));

    ProblemDefinition p;
    p.name = "dsice";
    p.n_s = 8;
    p.n_c = 2;  // (mu, p)
    p.n_c0 = 2;
    p.n_z = 0;  // deterministic zeta by default
    p.horizon = spec.horizon;
    p.s0 = {spec.K0, spec.M0[0], spec.M0[1], spec.M0[2], spec.T0[0], spec.T0[1], 1.0, 1.0};
    p.obs = {0, 1, 2, 3, 4, 5, 6, 7};
    // normalize the wildly different state magnitudes to O(1) net inputs
    p.obs_scale = {1.0 / spec.K0, 1.0 / spec.M0[0], 1.0 / spec.M0[1], 1.0 / spec.M0[2],
                   1.0,           1.0,              1.0,              1.0};
    p.head = HeadSpec::sigmoid_box({0.0, 0.0}, {1.0, 1.0});
    p.head_applies_to_c0 = true;

    DsiceSpec s = spec;
    p.transition = [s, tb](ad::Tape& t, int period, ad::V st, ad::V c, std::span<const double>) {
        std::size_t k = static_cast<std::size_t>(period);
        std::vector<int> iK = {kK}, iM = {1, 2, 3}, iT = {4, 5}, iTAT = {kTAT}, iZ = {kZeta},
                         iMAT = {kMAT}, irest = {6, 7};
        ad::V K = t.gather(st, iK);
        ad::V M = t.gather(st, iM);
        ad::V Tv = t.gather(st, iT);
        ad::V tat = t.gather(st, iTAT);
        ad::V zeta = t.gather(st, iZ);
        std::vector<int> imu = {0}, ip = {1};
        ad::V mu = t.gather(c, imu);
        ad::V pr = t.gather(c, ip);

        ad::V f = gross_product(t, s, K, zeta, tb->A[k], tb->L[k]);
        ad::V Y = t.mul(damage_factor(t, s, tat), f);
        // K' = (1-delta)K + (1-p)(1 - theta1 mu^theta2) Y
        ad::V net = t.shift(t.scale(t.powc(mu, s.theta2), -tb->th1[k]), 1.0);
        ad::V invest = t.mul(t.shift(t.neg(pr), 1.0), t.mul(net, Y));
        ad::V K_next = t.add(t.scale(K, 1.0 - s.delta_k), invest);
        if (t.value(K_next)[0] <= 0.0)
            throw std::domain_error("dsice: nonpositive capital (infeasible path)");

        ad::V e_ind = t.mul(t.shift(t.neg(mu), 1.0), t.scale(f, tb->sig[k]));
        ad::V E = t.shift(e_ind, tb->eland[k]);
        ad::V M_next = carbon_step(t, s, M, E);
        ad::V forcing = radiative_forcing(t, s, t.gather(st, iMAT), tb->fex[k]);
        ad::V T_next = temperature_step(t, s, Tv, forcing);
        std::vector<ad::V> parts = {K_next, M_next, T_next, t.gather(st, irest)};
        return t.concat(parts);
    };

    p.step_utility = [s, tb](ad::Tape& t, int period, ad::V, ad::V st, ad::V c) {
        std::size_t k = static_cast<std::size_t>(period);
        std::vector<int> iK = {kK}, iTAT = {kTAT}, iZ = {kZeta}, imu = {0}, ip = {1};
        ad::V K = t.gather(st, iK);
        ad::V Y = t.mul(damage_factor(t, s, t.gather(st, iTAT)),
                        gross_product(t, s, K, t.gather(st, iZ), tb->A[k], tb->L[k]));
        ad::V net = t.shift(t.scale(t.powc(t.gather(c, imu), s.theta2), -tb->th1[k]), 1.0);
        ad::V C = t.mul(t.gather(c, ip), t.mul(net, Y));
        return period_utility(t, s, C, tb->L[k], tb->disc[k]);
    };

    // Deterministic tail: growth ends, emissions stop, C = 0.78 Y.
    p.terminal_utility = [s, tb](ad::Tape& t, ad::V sT) {
        std::size_t kT = static_cast<std::size_t>(s.horizon);
        const double Lf = tb->L[kT], Af = tb->A[kT];
        std::vector<int> iK = {kK}, iM = {1, 2, 3}, iT = {4, 5}, iTAT0 = {0}, iZ = {kZeta};
        ad::V K = t.gather(sT, iK);
        ad::V M = t.gather(sT, iM);
        ad::V Tv = t.gather(sT, iT);
        ad::V zeta = t.gather(sT, iZ);
        ad::V total = t.scalar(0.0);
        for (int sidx = 0; sidx <= s.tail; ++sidx) {
            std::size_t k = static_cast<std::size_t>(s.horizon + sidx);
            ad::V tat = t.gather(Tv, iTAT0);
            ad::V Y = t.mul(damage_factor(t, s, tat), gross_product(t, s, K, zeta, Af, Lf));
            ad::V C = t.scale(Y, 0.78);
            total = t.add(total, period_utility(t, s, C, Lf, tb->disc[k]));
            if (sidx == s.tail) break;
            K = t.add(t.scale(K, 1.0 - s.delta_k), t.scale(Y, 0.22));
            std::vector<int> iMAT0 = {0};
            ad::V forcing = radiative_forcing(t, s, t.gather(M, iMAT0), tb->fex[k]);
            M = carbon_step(t, s, M, t.scalar(0.0));
            Tv = temperature_step(t, s, Tv, forcing);
        }
        return total;
    };

    p.validate();
    return p;
}

double dsice_reference_rollout(const DsiceSpec& spec, double mu, double p) {
    if (!(mu > 0.0 && mu < 1.0 && p > 0.0 && p < 1.0))
        throw std::invalid_argument("dsice rollout: (mu, p) must lie in (0,1)");
    ProblemDefinition problem = build_dsice(spec);
    sim::ControlFn constant = [mu, p](int, std::span<const double>, std::span<double> c) {
        c[0] = mu;
        c[1] = p;
    };
    auto batch = sim::simulate_fixed(problem, constant, 1, {});
    return batch.utility[0];
}

} // namespace mmcc::problems
