#pragma once

#include "uip/common.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace uip {

enum class Smoothness { SmoothC3, LipschitzC0, DiscontinuousInX };

/// European payoff f(s, x) on terminal traded prices and factor levels.
/// Gradient callbacks are almost-everywhere derivatives; when absent they
/// fall back to central differences.
struct Payoff {
    std::function<double(const Vec& s, const Vec& x)> value;
    std::function<Vec(const Vec& s, const Vec& x)> grad_s_fn;
    std::function<Vec(const Vec& s, const Vec& x)> grad_x_fn;
    Smoothness smoothness = Smoothness::SmoothC3;
    double growth_q = 0.0;               // polynomial growth order in s
    std::optional<double> bound;         // sup |f| when bounded
    std::vector<int> x_discontinuities;  // factor coordinates carrying jumps/kinks
    std::string name = "payoff";

    double operator()(const Vec& s, const Vec& x) const;
    Vec grad_s(const Vec& s, const Vec& x) const;
    Vec grad_x(const Vec& s, const Vec& x) const;
};

struct OneSidedGradients {
    Vec s_minus, s_plus;
    Vec x_minus, x_plus;
};

/// One-sided difference quotients in every coordinate; for C^1 payoffs the
/// two sides agree to O(h).
OneSidedGradients one_sided_gradients(const Payoff& f, const Vec& s, const Vec& x,
                                      double h = 1e-6);

/// Convolution with a compactly supported bump of radius 1/l over the
/// payoff's discontinuous factor coordinates. The kernel mass is normalized
/// to one in exact arithmetic of the quadrature rule, so constants are
/// reproduced exactly and the payoff is unchanged at distance > 1/l from the
/// discontinuity locus for locally linear payoffs.
Payoff mollify(const Payoff& f, double l);

/// Bounded scarcity multiplier applied to the marginal fuel price.
struct ScarcityFunction {
    std::function<double(double)> g;
    std::function<double(double)> dg;
    double bound = 0.0;
    std::vector<double> kinks; // points where g is not C^1; quadratures split here
    std::string name = "scarcity";
};

/// g(z) = min(M, z^-nu) for z > 0, capped at M on z <= 0.
ScarcityFunction scarcity_power(double cap, double nu);

/// Checks |g| <= bound and dg against central differences on a sample grid.
void validate(const ScarcityFunction& g, double z_lo = -3.0, double z_hi = 5.0);

Payoff make_digital_x(int coord, double threshold);
Payoff make_call(int coord, double strike);
Payoff make_spread_call(const Vec& weights, double strike);

/// Electricity forward: x = (c^1..c^m, y) with y the demand, s the fuel
/// spreads. f = g(sum c - y) * sum_i s_i 1_{y > sum_{k<i} c_k}.
Payoff make_forward_payoff(const ScarcityFunction& g, int fuels);

/// min(forward, cap).
Payoff make_capped_forward_payoff(const ScarcityFunction& g, int fuels, double cap);

} // namespace uip
