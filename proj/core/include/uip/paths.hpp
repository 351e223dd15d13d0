#pragma once

#include "uip/market_model.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace uip {

using ControlFn = std::function<Vec(double, const Vec&, const Vec&)>; // delta(t, s, x)
using StrategyFn = std::function<Vec(double, const Vec&, const Vec&)>; // pi(t, s, x), euro amounts

/// Simulated paths on a uniform grid. Coordinates per node: traded prices
/// first, then factors. Increments are the plain Brownian steps used for the
/// traded block and the factor block (the exact OU transition additionally
/// consumes unstored residual draws from the same substream).
struct PathSet {
    int n = 0;
    int d = 0;
    Measure measure = Measure::MinimalMartingale;
    std::uint64_t seed = 0;
    bool antithetic = false;
    std::size_t paths = 0;
    int steps = 0;
    Vec times; // steps + 1 nodes
    std::vector<double> states;     // paths x (steps+1) x (n+d)
    std::vector<double> increments; // paths x steps x (n+d)

    int dim() const { return n + d; }
    double dt() const { return times[1] - times[0]; }

    const double* state(std::size_t path, int step) const {
        return states.data() + (path * (steps + 1) + step) * dim();
    }
    double* state(std::size_t path, int step) {
        return states.data() + (path * (steps + 1) + step) * dim();
    }
    const double* increment(std::size_t path, int step) const {
        return increments.data() + (path * steps + step) * dim();
    }
    double* increment(std::size_t path, int step) {
        return increments.data() + (path * steps + step) * dim();
    }
    Vec traded(std::size_t path, int step) const {
        return Eigen::Map<const Vec>(state(path, step), n);
    }
    Vec factors(std::size_t path, int step) const {
        return Eigen::Map<const Vec>(state(path, step) + n, d);
    }
};

struct SimOptions {
    std::optional<State> start; // defaults to (0, s0, x0)
    ControlFn control;          // required iff measure == Controlled
    bool antithetic = false;    // pair 2m/2m+1 shares a substream with flipped draws
};

/// Exact lognormal stepping for the traded block; exact OU transitions under
/// Physical / MinimalMartingale; Euler-Maruyama with the beta*delta drift
/// under Controlled. Bit-reproducible for a fixed seed at any thread count.
PathSet simulate_paths(const MarketModel& m, Measure measure, std::size_t paths, int steps,
                       std::uint64_t seed, const SimOptions& options = {});

/// Terminal wealth of the self-financing strategy pi on each path:
/// V_T = v0 + sum_k pi(t_k, S_k, X_k)' (mu dt + sigma dW^S_k).
Vec terminal_wealth(const MarketModel& m, const PathSet& ps, double v0, const StrategyFn& pi);

/// First max_paths paths as CSV (path, t, traded..., factors...).
void export_csv(const PathSet& ps, std::size_t max_paths, std::ostream& os);

} // namespace uip
