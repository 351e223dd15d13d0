#pragma once

#include "uip/grid.hpp"
#include "uip/payoff.hpp"

#include <cstdint>

namespace uip {

enum class Side { Buy, Sell };

struct Hamiltonian {
    double value = 0.0;
    Vec control;
};

/// h^m(q) = sup_{|delta| <= m} (-q'delta - |delta|^2 / (2 gamma)): the
/// optimizer is -gamma q clamped to the ball of radius m, and the value is
/// (gamma/2)|q|^2 in the unclamped region.
Hamiltonian truncated_hamiltonian(const Vec& q, double gamma, double m);

struct PdeOptions {
    double dt_cap_factor = 1e-3;   // time step also capped at factor * T
    double m_trunc = 0.0;          // <= 0: auto-calibrated from the terminal slice
    double divergence_factor = 10.0;
    int store_slices = 65;         // uniform time slices kept on the surface
    std::vector<double> store_times; // extra slice times to capture
    double mollify_cells = 1.0;    // kernel radius in units of the factor cell size
};

/// Semilinear solve of the indifference-price PDE, marched backwards with an
/// alternating-direction implicit treatment of the per-axis diffusion, an
/// upwinded explicit drift, explicit mixed derivatives, and the truncated
/// Hamiltonian of beta' grad_x phi taken from the previous level. Buy side
/// subtracts the Hamiltonian, sell side adds it.
PriceSurface solve_uip_pde(const MarketModel& m, const Payoff& f, double gamma, Side side,
                           const Grid& g, const PdeOptions& opt = {});

/// -(1/gamma) log E[e^{-gamma f(X_T)}] for payoffs depending on the factors
/// only; Gauss-Hermite tensor quadrature for d <= 2, Monte Carlo above.
double certainty_equivalent(const MarketModel& m, const Payoff& f, double gamma,
                            int quad_nodes = 64, std::size_t mc_paths = 200000,
                            std::uint64_t seed = 7);

/// Closed-form gradient field of the digital claim in the single-factor
/// driftless model; solves g_t + gamma g g_x = (beta^2/2) g_xx with elapsed
/// time t since the terminal condition.
double burgers_reference(double t, double x, double gamma, double beta);

/// g(t, x) <= C / sqrt(t) with C = beta (e^{gamma/beta^2} - 1) / (gamma sqrt(2 pi)).
double burgers_bound_constant(double gamma, double beta);

} // namespace uip
