#pragma once

#include "mmcc/problem.hpp"
#include "mmcc/simulate.hpp"

#include <functional>
#include <vector>

namespace mmcc::problems {

// ---------------------------------------------------------------- FBSDE

struct FbsdeSpec {
    int d_w = 100;
    double T = 1.0;
    int steps = 20; // N_T
    double beta = -1.0;
    std::vector<double> x0; // defaults to the origin
    // Terminal function, as a tape op and as a plain scalar function
    // (the latter feeds the Monte Carlo oracle).
    std::function<ad::V(ad::Tape&, ad::V x)> g_taped;
    std::function<double(std::span<const double>)> g_scalar;

    static FbsdeSpec paper_instance(); // d_w=100 log-quadratic terminal
    static FbsdeSpec desk_instance(int d_w);
    void validate() const;
};

ProblemDefinition build_fbsde(const FbsdeSpec& spec);

struct OracleResult {
    double value = 0.0;
    double se = 0.0;
};

// y* = (1/beta) ln E[exp(beta g(x0 + sqrt(2) W_T))], plain Monte Carlo with
// log-sum-exp rescaling; independent of the trainer.
OracleResult fbsde_oracle_y(const FbsdeSpec& spec, long n_mc, std::uint64_t seed);

// ---------------------------------------------------------------- Heston

struct HestonSpec {
    double r = 0.05;
    double delta = 0.08;
    double gamma = 2.0;
    double rho = -0.5;
    double kappa = 5.0;
    double y_bar = 0.0225; // long-run variance; drift alpha(y) = kappa*(y_bar - y)
    double lambda_bar = 0.07 / 0.15;
    double beta_bar = 0.25;
    double psi = 0.125; // EIS; default solves psi = 2-gamma+((1-gamma)^2/gamma)rho^2
    double T = 10.0;
    int steps = 120;
    double y0 = 0.1;

    double k() const { return gamma / (gamma + (1.0 - gamma) * rho * rho); }
    double theta() const { return (1.0 - gamma) / (1.0 - 1.0 / psi); }
    double source() const; // theta*delta^psi/(psi*k)
    double exponent() const { return 1.0 - psi * k() / theta(); }
    double r_tilde(double y) const;
    double alpha_tilde(double y) const;

    static HestonSpec paper_instance();
    static HestonSpec desk_instance(); // T=2, 24 periods
    void validate() const;
};

// Counter "negative_variance" increments when eta dips below 0 pre-floor.
ProblemDefinition build_heston_fbsde(const HestonSpec& spec);

struct PdeGrid {
    double y_max = 1.0;
    int ny = 400;  // space intervals
    int nt = 4000; // time steps
};

// Implicit-explicit finite differences for g(t,y); returns g(0, y0).
double heston_pde_oracle(const HestonSpec& spec, const PdeGrid& grid);
// Runs the oracle with grid doubling until successive values differ by
// < tol; throws on convergence failure.
double heston_pde_oracle_converged(const HestonSpec& spec, PdeGrid grid, double tol = 1e-3,
                                   int max_doublings = 4);

// ---------------------------------------------------------------- Growth

struct GrowthSpec {
    int n = 6;
    int T = 5;          // utility summed over t = 0..T (T+1 control periods)
    double beta = 0.95;
    double H = 1.0;
    std::vector<double> theta; // (theta_0 .. theta_n), leisure weight first
    std::vector<double> tau;   // curvature per utility term; 1 = log
    std::vector<double> A;     // n x n row-major, a_ij
    std::vector<double> b;     // labor exponents
    std::vector<double> Y0;

    static GrowthSpec paper_instance(); // shipped default A (see README)
    void validate() const;
};

ProblemDefinition build_growth(const GrowthSpec& spec);

struct GrowthBaseline {
    std::vector<double> gamma;    // theta^T (I - beta A)^{-1}
    double Z_star = 0.0;          // stationary leisure
    std::vector<double> L_star;   // stationary labor allocations
    sim::ControlFn policy;        // full control vector from the current state
    sim::ObjectiveEstimate objective; // finite-horizon estimate under this policy
};

// Infinite-horizon closed-form policy (log utility), evaluated on the
// finite-horizon problem with the given shock set (pass the trainer's
// evaluation set for a common-random-number comparison).
GrowthBaseline growth_infinite_baseline(const GrowthSpec& spec, int n_paths,
                                        const sim::ShockFn& shocks);

// ---------------------------------------------------------------- DSICE

struct DsiceSpec {
    int horizon = 600;  // calT
    int tail = 400;     // calS, terminal deterministic rollout years
    // carbon diffusion rates (atmosphere/upper ocean/lower ocean)
    double phi12 = 0.0189, phi21 = 0.0097, phi23 = 0.0050, phi32 = 0.0003;
    // temperature system
    double heat12 = 0.0066, heat21 = 0.0050, xi1 = 0.022, xi2 = 0.0279;
    double eta = 3.8;        // radiative forcing parameter
    double m_at_star = 596.4; // pre-industrial atmospheric carbon
    double alpha = 0.3;      // capital share
    double pi1 = 0.0, pi2 = 0.0028; // damage coefficients
    double sigma0 = 0.1342;  // decarbonization level
    double theta2 = 2.8;     // abatement cost exponent
    double delta_k = 0.1;    // capital depreciation
    double psi = 1.5;        // EIS
    double beta = 0.985;     // discount
    double A0 = 0.0272;
    double alpha1 = 0.0092, alpha2 = 0.001; // productivity trend
    double K0 = 137.0;
    std::vector<double> M0 = {808.9, 1255.0, 18365.0};
    std::vector<double> T0 = {0.7307, 0.0068};
    double e_land0 = 1.1; // linearly declining, reaching 0 at t = 100

    double f_ex(int t) const { return t <= 100 ? -0.06 + 0.0036 * t : 0.3; }
    double pop(int t) const;      // L_t in millions
    double trend(int t) const;    // A_t
    double sigma_t(int t) const;
    double theta1(int t) const;
    double e_land(int t) const;

    static DsiceSpec paper_instance();
    static DsiceSpec smoke_instance(); // calT=60, calS=40
    void validate() const;
};

ProblemDefinition build_dsice(const DsiceSpec& spec);

// Deterministic rollout of the full objective (terminal tail included)
// under constant controls; the must-beat smoke-test baseline.
double dsice_reference_rollout(const DsiceSpec& spec, double mu, double p);

// ---------------------------------------------------------------- LQ

// Synthetic scalar-coefficient linear-quadratic family (per-dimension
// decoupled): s' = a s + b c + sigma z, cost q|s|^2 + r|c|^2 each period
// plus q|s_T|^2, maximized as its negative. Closed-form Riccati solution
// below serves as the test oracle and the family drives the cost-scaling
// acceptance measurement.
struct LqSpec {
    int d = 4;
    int horizon = 8;
    double a = 0.9, b = 0.5, q = 1.0, r = 0.5, sigma = 0.3;
    std::vector<double> s0;

    static LqSpec small_instance();
    void validate() const;
};

ProblemDefinition build_lq(const LqSpec& spec);

struct LqSolution {
    std::vector<double> P;    // Riccati values P_0..P_T (scalar per dimension)
    std::vector<double> gain; // K_0..K_{T-1}, optimal c_t = -K_t s_t
    double value = 0.0;       // optimal expected objective (maximized form)
};

LqSolution lq_riccati(const LqSpec& spec);

} // namespace mmcc::problems
