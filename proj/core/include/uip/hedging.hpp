#pragma once

#include "uip/mc.hpp"

namespace uip {

enum class StrategyKind { PureInvestment, HedgeOnly, OptimalWithClaim };

/// Traded-asset strategy in currency amounts. PureInvestment is the constant
/// Merton portfolio (sigma sigma')^{-1} mu / gamma; the claim adjustment is
/// the surface delta -s_i dphi/ds_i, interpolated from the solved price
/// field with queries clamped to the grid hull.
StrategyFn make_strategy(const MarketModel& m, const PriceSurface* surface, double gamma,
                         StrategyKind kind);

struct HedgeOptions {
    std::size_t paths = 200000;
    int steps = 64;
    std::uint64_t seed = 11;
    double v0 = 0.0;
    int perturbations = 5;      // constant strategy offsets, must not improve utility
    double price_shift = 0.05;  // relative price bumps for the sign checks
    double winsor_q = 1e-6;     // lower-tail clamp quantile for reported means
    double ce_rel_tol = 0.005;  // indifference tolerance in certainty-equivalent units
};

struct IndifferenceReport {
    double gamma = 0.0;
    int side = +1;
    double price = 0.0;
    std::size_t paths = 0;
    int steps = 0;
    double ce_gap = 0.0;    // certainty equivalent of (claim position at price) minus base
    double ce_gap_se = 0.0;
    double gap_up_z = 0.0;  // z-score of the utility gap when paying/receiving more
    double gap_dn_z = 0.0;
    Vec perturbation_z;
    double claim_utility = 0.0, base_utility = 0.0;
    double claim_utility_winsor = 0.0, base_utility_winsor = 0.0;
    bool indifferent = false, shifts_ok = false, perturbations_ok = false, pass = false;
    std::string summary() const;
};

/// Monte Carlo check under the physical measure that the claim position,
/// hedged with the surface strategy and traded at `price`, is utility
/// indifferent to pure investment: common random numbers, paired gap, +-5%
/// price-sign checks, and bounded strategy perturbations that must not
/// improve expected utility by more than 2 SE.
IndifferenceReport verify_indifference(const MarketModel& m, const Payoff& f,
                                       const PriceSurface& surface, double price,
                                       const HedgeOptions& opt = {});

} // namespace uip
