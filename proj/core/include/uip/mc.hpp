#pragma once

#include "uip/paths.hpp"
#include "uip/payoff.hpp"
#include "uip/pde.hpp"

#include <limits>

namespace uip {

struct McEstimate {
    double value = 0.0;
    double se = 0.0;
    std::size_t samples = 0;
};

/// Sample mean and its standard error.
McEstimate summarize(const std::vector<double>& samples);

struct PriceOptions {
    std::size_t paths = 100000;
    int steps = 1;
    std::uint64_t seed = 1;
    bool antithetic = false;
    bool prefer_quadrature = true; // tensor quadrature when n + d <= 2 and payoff smooth
    int quad_nodes = 64;
    double max_bad_fraction = 1e-4; // tolerated share of non-finite samples
};

/// E^0[f(S_T, X_T)] under the minimal martingale measure.
McEstimate price_mmm(const MarketModel& m, const Payoff& f, const PriceOptions& opt = {});

struct BsdeOptions {
    std::size_t paths = 100000;
    int steps = 64;
    int basis_degree = 3;
    double ridge = 1e-8;
    std::uint64_t seed = 1;
    double trunc_quantile = 0.999; // driver truncation: 10x this quantile of gamma |Z^X|
    double trunc_factor = 10.0;
    // absolute ceiling on the truncation level; the truncated driver stays
    // nonnegative, so prices computed with a finite ceiling still bracket the
    // risk-neutral price from the correct side
    double trunc_cap = std::numeric_limits<double>::infinity();
};

/// Regression Monte Carlo solution of the quadratic BSDE. Per-step basis
/// coefficients are retained so Z can be evaluated on fresh states.
struct BsdeSolution {
    double y0 = 0.0;
    double y0_se = 0.0;
    double gamma = 0.0;
    int side = +1;
    int n = 0, d = 0;
    int basis_degree = 0;
    double m_trunc = 0.0; // largest truncation level used
    Vec times;            // steps + 1 nodes
    Vec z0;               // n + d

    std::vector<std::vector<int>> exponents; // basis multi-indices
    std::vector<Vec> center;                 // per step: state standardization
    std::vector<Vec> scale;
    std::vector<Mat> z_coeffs; // per step: basis x (n+d)

    /// Z(t_k, s, x) from the stored regression; valid for 0 < k < steps.
    Vec z_at(int step, const Vec& s, const Vec& x) const;
    int steps() const { return static_cast<int>(times.size()) - 1; }
};

/// Buy side: Y_t = f - int (gamma/2) |Z^X|^2 ds - int Z dW; sell flips the
/// driver sign. Z targets are centered on the fitted conditional mean and the
/// driver integral uses the trapezoid rule with the almost-everywhere payoff
/// gradient at maturity. Y_0 and Z_0 are plain averages (time-0 state is
/// deterministic). y0_se covers the terminal averaging only, not regression
/// noise; replicate runs across seeds measure the full run-to-run error.
BsdeSolution solve_bsde(const MarketModel& m, const Payoff& f, double gamma, Side side,
                        const BsdeOptions& opt = {});

struct WeightedGradient {
    Vec gradient; // n + d components, d/ds then d/dx
    Vec se;
};

/// Discrete Malliavin-type weight at grid index `step` of a path simulated
/// under the minimal martingale measure from time t: traded block
/// (1/(r-t)) diag(1/s_t) sigma^{-T} (W_r - W_t); factor block a left-point
/// Riemann sum of diag(e^{-alpha(u-t)}) beta^{-T} dW. Undefined at step 0.
Vec weight_process(const MarketModel& m, const PathSet& ps, std::size_t path, int step);

struct MalliavinOptions {
    std::size_t paths = 200000;
    int steps = 64;
    std::uint64_t seed = 2;
};

/// Gradient of the value function at (0, s0, x0) by weighted expectation:
/// E[f N_T -/+ int h^m(Z^X) N dr] (buy/sell). gamma > 0 requires a BSDE
/// solution supplying Z^X along paths; the weight is undefined at r = t, so
/// the first grid index is excluded from the integral.
WeightedGradient malliavin_gradient(const MarketModel& m, const Payoff& f, double gamma,
                                    Side side, const BsdeSolution* z_source,
                                    const MalliavinOptions& opt = {});

/// One-shot exact-transition sampler for grad E^0_{t,a}[f(A_T)] (the gamma=0
/// weighted estimator without time discretization). Reusable across states at
/// a fixed evaluation time.
class OneShotGradient {
public:
    OneShotGradient(const MarketModel& m, double t);

    /// Mean of f(A_T) w(A_T) over `paths` exact draws started at (t, s, x).
    /// Components: d/ds block then d/dx block. stream_salt decorrelates
    /// nested calls.
    Vec estimate(const Payoff& f, const Vec& s, const Vec& x, std::size_t paths,
                 std::uint64_t seed, std::uint64_t stream_salt = 0) const;

    /// Same draws, value estimate (for finite-difference-free p0 checks).
    double estimate_value(const Payoff& f, const Vec& s, const Vec& x, std::size_t paths,
                          std::uint64_t seed, std::uint64_t stream_salt = 0) const;

private:
    const MarketModel& model_;
    double t_, tau_;
    Mat sigma_inv_t_; // sigma^{-T}
    Vec log_drift_;   // -(1/2) diag(sigma sigma') tau
    Mat chol_s_;      // sigma sqrt(tau)
    Vec decay_;       // e^{-alpha tau}
    Mat noise_l_;     // factor-noise factor (V^{1/2})
    Mat stein_;       // D(tau) V^{-1} noise_l: weight = stein_ * z
    Vec mean_b_;      // b-integral part of the factor mean
};

} // namespace uip
