#pragma once

#include "uip/market_model.hpp"

#include <iosfwd>
#include <optional>
#include <vector>

namespace uip {

/// Tensor grid over (log s_1..log s_n, x_1..x_d), uniform per axis.
/// Bounds cover the terminal law under both the physical and the pricing
/// measure out to n_sd standard deviations.
struct Grid {
    int n = 0;
    int d = 0;
    std::vector<Vec> axes; // log-price nodes for traded axes, levels for factors
    int time_steps = 0;    // lower bound; the solver refines to meet its step rule

    int dim() const { return n + d; }
    std::size_t nodes() const {
        std::size_t t = 1;
        for (const auto& a : axes) t *= a.size();
        return t;
    }
    double spacing(int axis) const { return axes[axis][1] - axes[axis][0]; }

    static Grid make(const MarketModel& m, const std::vector<int>& nodes_per_axis,
                     int time_steps, double n_sd = 5.0);
};

/// Time-sliced price and gradient fields produced by the PDE engine.
/// Gradients are in price units for traded axes (d/ds, not d/dlog s).
/// Queries interpolate multilinearly in space and linearly in time; anything
/// outside the spatial hull throws.
struct PriceSurface {
    Grid grid;
    double gamma = 0.0;
    int side = +1; // +1 buy, -1 sell
    double m_trunc = 0.0;
    std::string payoff_name;
    std::string model_id;
    Vec slice_times;                              // ascending, first = 0, last = T
    std::vector<std::vector<double>> values;      // per slice, flattened nodes
    std::vector<std::vector<std::vector<double>>> gradients; // slice x axis x node

    double price() const; // value at (0, s0-ish grid anchor) -- see anchor_
    double value_at(double t, const Vec& s, const Vec& x) const;
    Vec gradient_at(double t, const Vec& s, const Vec& x) const;
    double value_at(const Vec& s, const Vec& x) const { return value_at(0.0, s, x); }

    Vec anchor_s; // initial traded prices, for price()
    Vec anchor_x;

    void write_csv(std::ostream& os) const; // t = 0 slice
    void save_binary(const std::string& path) const;
    static std::optional<PriceSurface> load_binary(const std::string& path,
                                                   std::uint64_t expected_key);
    std::uint64_t key = 0;
};

std::uint64_t surface_cache_key(const MarketModel& m, const std::string& payoff_name,
                                double gamma, int side, const Grid& g);

} // namespace uip
