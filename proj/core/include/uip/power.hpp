#pragma once

#include "uip/asymptotics.hpp"
#include "uip/payoff.hpp"

namespace uip {

/// Two-fuel structural electricity setup: traded fuel-spread prices s = (s1,
/// s2) (geometric Brownian, diagonal sigma) and factors x = (c1, c2, y) for
/// the fuel capacities and the demand (diagonal beta). The electricity
/// forward payoff is g(c1 + c2 - y) (s1 + s2 1_{y > c1}).
struct PowerModel {
    MarketModel base;
    ScarcityFunction g;
    double cap = 0.0;            // > 0 caps the forward payoff
    double h1 = 1.0, h2 = 1.0;   // heat rates behind the spread quotes; metadata only

    Payoff forward_payoff() const;
};

/// Validates the structural shape: n = 2, d = 3, diagonal sigma and beta.
void validate(const PowerModel& pm);

/// Stylized two-fuel preset with fast-reverting demand and a power scarcity
/// function.
PowerModel aid_2fuel_preset();

struct PsiOptions {
    int nodes = 64;          // per-axis quadrature nodes
    bool refine = true;      // re-evaluate at 3/2 the nodes and gate
    double refine_tol = 1e-6;
    double tail_sd = 8.0;    // quadrature truncation in standard deviations
};

struct PsiValues {
    double psi1 = 0.0; // E[g(z + c) | X_t = x], z = C1_T - D_T, c = C2_T
    double psi2 = 0.0; // E[g(z + c) 1_{z < 0} | X_t = x]
};

struct PsiDerivs {
    double psi1 = 0.0, psi2 = 0.0;
    Vec d1, d2; // d psi^i / d(c1, c2, y)
};

/// Conditional marginal-fuel weights: the forward price at (t, s, x) is
/// psi1 s1 + psi2 s2.
PsiValues marginal_weights(const PowerModel& pm, double t, const Vec& x,
                           const PsiOptions& opt = {});

/// Same sweep with Stein-factor derivatives; refuses t within 1e-6 T of
/// maturity where the derivatives lose meaning.
PsiDerivs marginal_weight_derivatives(const PowerModel& pm, double t, const Vec& x,
                                      const PsiOptions& opt = {});

/// Quadrature forward price at (t, s, x); se = 0.
McEstimate forward_p0(const PowerModel& pm, double t, const Vec& s, const Vec& x,
                      const PsiOptions& opt = {});

/// Marginal-fuel weights and derivatives tabulated over (t, x) nodes,
/// evaluated in parallel; row r corresponds to (times[r], states[r]).
struct PsiTable {
    std::vector<double> times;
    std::vector<Vec> states;
    std::vector<PsiDerivs> rows;
    PsiOptions quad;
};

PsiTable build_psi_table(const PowerModel& pm, const std::vector<double>& times,
                         const std::vector<Vec>& states, const PsiOptions& opt = {});

struct ForwardZetaOptions {
    int time_nodes = 33;
    std::size_t samples = 1024; // factor-law draws per node, common across nodes
    std::uint64_t seed = 21;
    PsiOptions psi;
};

/// zeta(0, x0) for the uncapped forward payoff through the marginal-weight
/// reduction: sum_j beta_j^2 int_0^T [ s1^2 e^{sigma1^2 t} E(psi1_j^2)
/// + s2^2 e^{sigma2^2 t} E(psi2_j^2) + 2 s1 s2 E(psi1_j psi2_j) ] dt, with
/// almost-everywhere payoff derivatives at the terminal node. The refinement
/// gate runs on the first sample of each time node. A positive cap is
/// ignored here: the reduction has no closed form for the capped claim, and
/// caps are sized to bind too rarely to move the first-order term.
McEstimate forward_zeta(const PowerModel& pm, const ForwardZetaOptions& opt = {});

struct PowerExpansion {
    double p0 = 0.0;
    double zeta = 0.0, zeta_se = 0.0;
    double price = 0.0;
    double gamma = 0.0;
    int side = +1;
};

/// p0 -/+ (gamma/2) zeta via the quadrature routes above.
PowerExpansion forward_uip(const PowerModel& pm, double gamma, Side side,
                           const ForwardZetaOptions& opt = {});

} // namespace uip
