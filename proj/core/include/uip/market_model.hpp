#pragma once

#include "uip/common.hpp"

#include <functional>
#include <optional>

namespace uip {

/// Joint market: n traded assets follow a multivariate geometric Brownian
/// motion dS^i/S^i = mu_i dt + sigma_i. dW^S, and d nontraded factors follow
/// a generalized Ornstein-Uhlenbeck process dX_i = (b_i(t) - alpha_i X_i) dt
/// + beta_i. dW^X with W^S independent of W^X.
struct MarketModel {
    Vec mu;      // traded drifts (n)
    Mat sigma;   // traded volatility matrix (n x n), invertible
    Vec alpha;   // mean-reversion rates (d), nonnegative
    Mat beta;    // factor volatility matrix (d x d)
    Vec b0;      // constant part of the factor drift (d)
    std::function<Vec(double)> b; // optional time-dependent drift; overrides b0
    double T = 0.0;
    Vec s0;      // initial traded prices (n), strictly positive
    Vec x0;      // initial factor levels (d)

    int n() const { return static_cast<int>(mu.size()); }
    int d() const { return static_cast<int>(alpha.size()); }
    int dim() const { return n() + d(); }

    Vec drift_b(double t) const { return b ? b(t) : b0; }

    /// Canonical description used for cache keys and reports.
    std::string describe() const;
};

enum class Measure { Physical, MinimalMartingale, Controlled };

struct State {
    double t = 0.0;
    Vec s;
    Vec x;
};

struct GaussianLaw {
    Vec mean;
    Mat cov;
};

/// Throws validation_error on inconsistent shapes, non-invertible sigma
/// (condition number above 1e10), nonpositive horizon or initial prices.
void validate(const MarketModel& m);

/// theta = sigma^{-1} mu; removing it from the traded drift yields the
/// minimal martingale measure.
Vec market_price_of_risk(const MarketModel& m);

/// Law of X_{t+dt} given X_t = x. Mean integrals of a time-dependent drift
/// use composite Simpson (512 panels); the covariance is analytic.
GaussianLaw ou_conditional_moments(const MarketModel& m, double t, const Vec& x, double dt);

/// Law of log S_{t+dt} given S_t = s under the given measure (Controlled is
/// driftless on the traded block, like MinimalMartingale).
GaussianLaw traded_log_law(const MarketModel& m, const Vec& s, double dt, Measure measure);

/// (1 - e^{-a h}) / a with the a -> 0 limit handled.
double decay_integral(double a, double h);

/// Per-step quantities for exact OU transitions: X_{t+h} = D x + m +
/// (C/h) dW + L xi with D = diag(e^{-alpha h}), C = cov(noise, dW),
/// L L' = V - C C'/h, xi independent standard normals.
struct OuStep {
    Vec decay;    // diag of D
    Vec mean_b;   // m: integral of D(h-u) b(t+u) du
    Mat cross;    // C (d x d)
    Mat resid_l;  // L (d x d), lower triangular
    Mat full_l;   // Cholesky-type factor of the full noise covariance V
};

OuStep ou_step(const MarketModel& m, double t, double h);

} // namespace uip
