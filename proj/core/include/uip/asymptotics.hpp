#pragma once

#include "uip/mc.hpp"

namespace uip {

enum class InnerGradient { OneShot, FiniteDifference, Callback };

struct ZetaOptions {
    std::size_t outer_paths = 4000;
    std::size_t inner_paths = 512; // split into two independent halves per node
    int time_nodes = 33;           // trapezoid nodes including 0 and T
    std::uint64_t seed = 3;
    InnerGradient method = InnerGradient::OneShot;
    // exact grad of E^0_{t,(s,x)}[f] for Callback (full n+d vector; only the
    // factor block is used)
    std::function<Vec(double, const Vec&, const Vec&)> p0_grad_x;
    double fd_step = 1e-4; // relative bump for FiniteDifference
};

/// zeta(0, a_0) = E^0 int_0^T |beta' grad_x p^0(t, A_t)|^2 dt. The squared
/// norm at interior nodes is the dot product of two half-sample gradient
/// estimates, which keeps the estimator free of inner-variance bias; the
/// terminal node uses the payoff's almost-everywhere factor gradient.
McEstimate zeta(const MarketModel& m, const Payoff& f, const ZetaOptions& opt = {});

struct ExpandOptions {
    PriceOptions p0;
    ZetaOptions zeta_opt;
};

struct AsymptoticExpansion {
    double p0 = 0.0, p0_se = 0.0;
    double zeta = 0.0, zeta_se = 0.0;
    double price = 0.0, se = 0.0;
    double gamma = 0.0;
    int side = +1;
};

/// Small-risk-aversion expansion p = p^0 -/+ (gamma/2) zeta + O(gamma^2)
/// (buy/sell).
AsymptoticExpansion expand_price(const MarketModel& m, const Payoff& f, double gamma,
                                 Side side, const ExpandOptions& opt = {});

struct GradientExpandOptions {
    std::size_t outer_paths = 20000;
    std::size_t inner_paths = 256;
    int steps = 32;
    std::uint64_t seed = 4;
    double growth_probe_factor = 100.0; // bounded-gradient sanity probe
};

struct GradientExpansion {
    Vec gradient; // d/ds block then d/dx block
    Vec se;
    double gamma = 0.0;
    int side = +1;
};

/// First-order expansion of the value gradient at (0, s0, x0):
/// d/dx_j: e^{-alpha_j T} ( E^0[f_{x_j}] -/+ gamma E^0[f_{x_j} I] ),
/// d/ds_i: (1/s_i) ( E^0[f_{s_i} S^i_T] -/+ gamma E^0[f_{s_i} S^i_T I] ),
/// with I = int_0^T (beta' grad_x p^0)' dW^X. Requires a bounded factor
/// gradient; a growth probe rejects payoffs that violate it.
GradientExpansion expand_gradients(const MarketModel& m, const Payoff& f, double gamma,
                                   Side side, const GradientExpandOptions& opt = {});

/// -(1/gamma) log E^0[e^{-gamma f}]: a lower bound for the buy price, exact
/// when f does not depend on the traded assets. Computed with a shifted
/// log-sum-exp; quadrature route as in price_mmm.
McEstimate price_lower_bound(const MarketModel& m, const Payoff& f, double gamma,
                             const PriceOptions& opt = {});

struct BoundLink {
    std::string name;
    double lo = 0.0, lo_se = 0.0;
    double hi = 0.0, hi_se = 0.0;
    double margin() const { return hi - lo; }
    /// margin plus tolerance plus 3 joint standard errors; >= 0 passes.
    double slack(double tol) const;
};

struct BoundReport {
    std::vector<BoundLink> links;
    double tol = 0.0;
    bool ok = false;
    std::string to_string() const;
};

/// Checks every link lo <= hi up to tol + 3 SE.
BoundReport make_bound_report(std::vector<BoundLink> links, double tol);

} // namespace uip
