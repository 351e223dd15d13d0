#include "uip/acceptance.hpp"

#include "uip/asymptotics.hpp"
#include "uip/hedging.hpp"
#include "uip/mc.hpp"
#include "uip/pde.hpp"
#include "uip/power.hpp"
#include "uip/quadrature.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace uip {

namespace {

using clock_type = std::chrono::steady_clock;

double elapsed(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

/// 1+1 reference setup used across the cross-validation criteria: one traded
/// asset, one driftless factor, and a smooth increasing payoff linear in s.
MarketModel reference_model() {
    MarketModel m;
    m.mu = Vec::Constant(1, 0.06);
    m.sigma = Mat::Constant(1, 1, 0.25);
    m.alpha = Vec::Constant(1, 0.0);
    m.beta = Mat::Constant(1, 1, 0.5);
    m.b0 = Vec::Constant(1, 0.0);
    m.T = 1.0;
    m.s0 = Vec::Constant(1, 1.0);
    m.x0 = Vec::Constant(1, 0.0);
    return m;
}

Payoff reference_payoff() {
    Payoff f;
    f.value = [](const Vec& s, const Vec& x) {
        return s[0] * (1.5 + 2.0 * std::tanh(1.5 * x[0] + 0.4));
    };
    f.grad_s_fn = [](const Vec&, const Vec& x) {
        return Vec(Vec::Constant(1, 1.5 + 2.0 * std::tanh(1.5 * x[0] + 0.4)));
    };
    f.grad_x_fn = [](const Vec& s, const Vec& x) {
        const double th = std::tanh(1.5 * x[0] + 0.4);
        return Vec(Vec::Constant(1, s[0] * 3.0 * (1.0 - th * th)));
    };
    f.smoothness = Smoothness::SmoothC3;
    f.growth_q = 1.0;
    f.name = "reference payoff";
    return f;
}

Payoff negated(const Payoff& f) {
    Payoff g;
    g.value = [f](const Vec& s, const Vec& x) { return -f.value(s, x); };
    g.grad_s_fn = [f](const Vec& s, const Vec& x) { return Vec(-f.grad_s(s, x)); };
    g.grad_x_fn = [f](const Vec& s, const Vec& x) { return Vec(-f.grad_x(s, x)); };
    g.smoothness = f.smoothness;
    g.growth_q = f.growth_q;
    g.name = "negated " + f.name;
    return g;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double bs_call_price(double s, double k, double sig, double T) {
    const double d1 = (std::log(s / k) + 0.5 * sig * sig * T) / (sig * std::sqrt(T));
    return s * normal_cdf(d1) - k * normal_cdf(d1 - sig * std::sqrt(T));
}

double bs_call_delta(double s, double k, double sig, double T) {
    const double d1 = (std::log(s / k) + 0.5 * sig * sig * T) / (sig * std::sqrt(T));
    return normal_cdf(d1);
}

/// First-order risk adjustment for the reference payoff s g(x) with a
/// driftless factor, by iterated Gaussian quadrature:
///   zeta = int_0^T beta^2 s0^2 e^{sigma^2 t} E_{X_t}[ (E[g'(X_T) | X_t])^2 ] dt.
double reference_zeta_quadrature(const MarketModel& m, int time_nodes = 65, int gh_nodes = 96) {
    const double beta = m.beta(0, 0), sig = m.sigma(0, 0), T = m.T, s0 = m.s0[0];
    auto gprime = [](double x) {
        const double th = std::tanh(1.5 * x + 0.4);
        return 3.0 * (1.0 - th * th);
    };
    const QuadRule& gl = gauss_legendre(time_nodes);
    double total = 0.0;
    for (int i = 0; i < time_nodes; ++i) {
        const double t = 0.5 * T * (gl.nodes[i] + 1.0);
        const double w = 0.5 * T * gl.weights[i];
        const double sd_t = beta * std::sqrt(t);
        const double sd_r = beta * std::sqrt(T - t);
        auto inner = [&](double x) {
            const double gx = gauss_expectation(gprime, x, sd_r, gh_nodes);
            return gx * gx;
        };
        const double ex = t == 0.0 ? inner(m.x0[0]) : gauss_expectation(inner, m.x0[0], sd_t, gh_nodes);
        total += w * beta * beta * s0 * s0 * std::exp(sig * sig * t) * ex;
    }
    return total;
}

CriterionResult criterion_1() {
    CriterionResult r{1, "complete-market reduction", false, 0.0, ""};
    const auto t0 = clock_type::now();
    MarketModel m;
    m.mu = Vec::Constant(1, 0.05);
    m.sigma = Mat::Constant(1, 1, 0.2);
    m.alpha = Vec::Constant(1, 0.5);
    m.beta = Mat::Constant(1, 1, 0.3);
    m.b0 = Vec::Constant(1, 0.25);
    m.x0 = Vec::Constant(1, 0.5);
    m.T = 1.0;
    m.s0 = Vec::Constant(1, 1.0);
    const Payoff call = make_call(0, 1.0);
    const Grid g = Grid::make(m, {257, 49}, 200);
    const PriceSurface ps = solve_uip_pde(m, call, 0.5, Side::Buy, g, {});
    double max_price_rel = 0.0, max_delta_rel = 0.0;
    for (double spot = 0.80; spot <= 1.2005; spot += 0.05) {
        const Vec s = Vec::Constant(1, spot);
        const double got = ps.value_at(s, m.x0);
        const double want = bs_call_price(spot, 1.0, 0.2, 1.0);
        const double delta = ps.gradient_at(0.0, s, m.x0)[0];
        const double want_delta = bs_call_delta(spot, 1.0, 0.2, 1.0);
        max_price_rel = std::max(max_price_rel, std::abs(got - want) / want);
        max_delta_rel = std::max(max_delta_rel, std::abs(delta - want_delta) / want_delta);
    }
    r.seconds = elapsed(t0);
    r.pass = max_price_rel <= 5e-3 && max_delta_rel <= 1e-2 && r.seconds < 30.0;
    r.detail = "price rel " + num(max_price_rel) + " (<= 5e-3), delta rel " + num(max_delta_rel) +
               " (<= 1e-2) vs Black-Scholes, spot 0.8..1.2";
    return r;
}

CriterionResult criterion_2() {
    CriterionResult r{2, "certainty-equivalent reduction", false, 0.0, ""};
    const auto t0 = clock_type::now();
    const MarketModel m = reference_model();
    Payoff f;
    f.value = [](const Vec&, const Vec& x) { return 1.5 + 2.0 * std::tanh(1.5 * x[0] + 0.4); };
    f.grad_s_fn = [](const Vec&, const Vec&) { return Vec(Vec::Zero(1)); };
    f.grad_x_fn = [](const Vec&, const Vec& x) {
        const double th = std::tanh(1.5 * x[0] + 0.4);
        return Vec(Vec::Constant(1, 3.0 * (1.0 - th * th)));
    };
    f.smoothness = Smoothness::SmoothC3;
    f.growth_q = 0.0;
    f.bound = 3.5;
    f.name = "bounded factor payoff";
    double worst = 0.0;
    for (const double gamma : {0.25, 1.0, 4.0}) {
        // the strong-aversion case needs the finest factor resolution
        const Grid g = gamma > 2.0 ? Grid::make(m, {49, 513}, 384) : Grid::make(m, {65, 385}, 256);
        const PriceSurface ps = solve_uip_pde(m, f, gamma, Side::Buy, g, {});
        const double ce = certainty_equivalent(m, f, gamma, 64);
        worst = std::max(worst, std::abs(ps.price() - ce) / std::abs(ce));
    }
    r.seconds = elapsed(t0);
    r.pass = worst <= 1e-3 && r.seconds < 10.0;
    r.detail = "max rel gap " + num(worst) + " (<= 1e-3) vs Gauss-Hermite certainty equivalent, gamma {0.25, 1, 4}";
    return r;
}

CriterionResult criterion_3() {
    CriterionResult r{3, "burgers oracle", false, 0.0, ""};
    const auto t0 = clock_type::now();
    MarketModel m;
    m.mu = Vec(0);
    m.sigma = Mat(0, 0);
    m.s0 = Vec(0);
    m.alpha = Vec::Zero(1);
    m.beta = Mat::Constant(1, 1, 1.0);
    m.b0 = Vec::Zero(1);
    m.x0 = Vec::Zero(1);
    m.T = 1.0;
    const Payoff dig = make_digital_x(0, 0.0);
    const Grid g = Grid::make(m, {401}, 400);
    PdeOptions opt;
    opt.store_times = {0.0, 0.5, 0.9};
    const PriceSurface ps = solve_uip_pde(m, dig, 1.0, Side::Buy, g, opt);
    const double bound_c = burgers_bound_constant(1.0, 1.0);
    double max_err = 0.0;
    bool bound_ok = true;
    for (const double t : {0.1, 0.5, 1.0}) {
        const double lim = bound_c / std::sqrt(t) + 1e-6;
        for (double x = -2.0 * std::sqrt(t); x <= 2.0 * std::sqrt(t) + 1e-12; x += 0.01) {
            const double gx = ps.gradient_at(1.0 - t, Vec(0), Vec::Constant(1, x))[0];
            max_err = std::max(max_err, std::abs(gx - burgers_reference(t, x, 1.0, 1.0)));
            bound_ok = bound_ok && gx <= lim;
        }
    }
    r.seconds = elapsed(t0);
    r.pass = max_err <= 1e-2 && bound_ok && r.seconds < 60.0;
    r.detail = "max |phi_x - g| " + num(max_err) + " (<= 1e-2) at t {0.1, 0.5, 1}, decay bound " +
               std::string(bound_ok ? "holds" : "VIOLATED");
    return r;
}

CriterionResult criterion_4() {
    CriterionResult r{4, "price bound chain", false, 0.0, ""};
    const auto t0 = clock_type::now();
    std::vector<BoundLink> links;

    // spread call on two traded assets with an inert factor: buy and sell
    // collapse onto the replication price, so both margins sit at zero within
    // tolerance plus Monte Carlo noise
    MarketModel ms;
    ms.mu = Vec(2);
    ms.mu << 0.05, 0.03;
    ms.sigma = Mat(2, 2);
    ms.sigma << 0.2, 0.0, 0.06, 0.25;
    ms.s0 = Vec(2);
    ms.s0 << 1.0, 0.9;
    ms.alpha = Vec::Constant(1, 0.5);
    ms.beta = Mat::Constant(1, 1, 0.3);
    ms.b0 = Vec::Constant(1, 0.25);
    ms.x0 = Vec::Constant(1, 0.5);
    ms.T = 1.0;
    Vec w(2);
    w << 1.0, -1.0;
    const Payoff spread = make_spread_call(w, 0.1);
    PriceOptions po;
    po.paths = 200000;
    po.seed = 21;
    const McEstimate p0s = price_mmm(ms, spread, po);
    const Grid gs = Grid::make(ms, {57, 57, 41}, 28);
    for (const double gamma : {0.1, 0.5, 1.0}) {
        const PriceSurface pb = solve_uip_pde(ms, spread, gamma, Side::Buy, gs, {});
        const PriceSurface psl = solve_uip_pde(ms, spread, gamma, Side::Sell, gs, {});
        links.push_back({"spread buy<=p0 gamma " + num(gamma), pb.price(), 0.0, p0s.value, p0s.se});
        links.push_back({"spread p0<=sell gamma " + num(gamma), p0s.value, p0s.se, psl.price(), 0.0});
    }

    // capped electricity forward: regression prices with a hard truncation
    // ceiling stay between the constrained buy and sell values, which bracket
    // the risk-neutral price from below and above
    PowerModel pm = aid_2fuel_preset();
    pm.cap = 30.0;
    const Payoff fwd = pm.forward_payoff();
    PriceOptions pop;
    pop.paths = 400000;
    pop.prefer_quadrature = false;
    pop.seed = 5;
    const McEstimate p0p = price_mmm(pm.base, fwd, pop);
    BsdeOptions bo;
    bo.paths = 50000;
    bo.steps = 32;
    bo.basis_degree = 3;
    bo.seed = 5;
    bo.trunc_cap = 4.0;
    for (const double gamma : {0.1, 0.5, 1.0}) {
        const BsdeSolution yb = solve_bsde(pm.base, fwd, gamma, Side::Buy, bo);
        const BsdeSolution ys = solve_bsde(pm.base, fwd, gamma, Side::Sell, bo);
        links.push_back({"forward buy<=p0 gamma " + num(gamma), yb.y0, yb.y0_se, p0p.value, p0p.se});
        links.push_back({"forward p0<=sell gamma " + num(gamma), p0p.value, p0p.se, ys.y0, ys.y0_se});
    }

    const BoundReport rep = make_bound_report(links, 1e-4);
    double worst = 1e300;
    for (const auto& l : rep.links) worst = std::min(worst, l.slack(rep.tol));
    r.seconds = elapsed(t0);
    r.pass = rep.ok && r.seconds < 120.0;
    r.detail = "12 bound links, min slack " + num(worst) + " (>= 0) at tol 1e-4, gamma {0.1, 0.5, 1}";
    return r;
}

CriterionResult criterion_5() {
    CriterionResult r{5, "buy-sell symmetry", false, 0.0, ""};
    const auto t0 = clock_type::now();
    const MarketModel m = reference_model();
    const Payoff f = reference_payoff();
    const Grid g = Grid::make(m, {161, 161}, 128, 6.0);
    const PriceSurface sell = solve_uip_pde(m, f, 0.5, Side::Sell, g, {});
    const PriceSurface buy_neg = solve_uip_pde(m, negated(f), 0.5, Side::Buy, g, {});
    const double gap = std::abs(sell.price() + buy_neg.price());
    r.seconds = elapsed(t0);
    r.pass = gap <= 1e-9;
    r.detail = "|sell(f) + buy(-f)| = " + num(gap) + " (<= 1e-9), sell(f) = " + num(sell.price());
    return r;
}

CriterionResult criterion_6() {
    CriterionResult r{6, "pde-bsde cross-check", false, 0.0, ""};
    const auto t0 = clock_type::now();
    const MarketModel m = reference_model();
    const Payoff f = reference_payoff();
    const Grid g = Grid::make(m, {257, 257}, 128, 6.0);
    const PriceSurface ps = solve_uip_pde(m, f, 0.5, Side::Buy, g, {});
    // the reported y0_se only covers the terminal averaging, so run-to-run
    // scatter across seeds is the honest error measure
    std::vector<double> y0s;
    for (const std::uint64_t seed : {5u, 6u, 7u, 8u}) {
        BsdeOptions bo;
        bo.paths = 100000;
        bo.steps = 64;
        bo.basis_degree = 3;
        bo.seed = seed;
        y0s.push_back(solve_bsde(m, f, 0.5, Side::Buy, bo).y0);
    }
    double mean = 0.0;
    for (const double v : y0s) mean += v;
    mean /= static_cast<double>(y0s.size());
    double var = 0.0;
    for (const double v : y0s) var += (v - mean) * (v - mean);
    const double se = std::sqrt(var / 3.0) / 2.0;
    const double gap = std::abs(mean - ps.price());
    r.seconds = elapsed(t0);
    r.pass = gap <= 0.01 * ps.price() && gap <= 3.0 * se && r.seconds < 120.0;
    r.detail = "pde " + num(ps.price()) + ", bsde " + num(mean) + " over 4 seeds, gap " + num(gap) +
               " (<= 1% and <= 3 se = " + num(3.0 * se) + ")";
    return r;
}

CriterionResult criterion_7() {
    CriterionResult r{7, "weighted-gradient estimator", false, 0.0, ""};
    const auto t0 = clock_type::now();
    const MarketModel m = reference_model();
    const Payoff dig = make_digital_x(0, 0.0);

    const WeightedGradient g0 = malliavin_gradient(m, dig, 0.0, Side::Buy, nullptr, {});
    const double exact = std::exp(-0.0) / std::sqrt(2.0 * M_PI) / 0.5; // N(0, beta^2 T) density at 0 / beta sqrt(T)
    const double z0 = (g0.gradient[1] - exact) / g0.se[1];

    const Grid g = Grid::make(m, {257, 257}, 128, 6.0);
    const PriceSurface ps = solve_uip_pde(m, dig, 0.5, Side::Buy, g, {});
    const double pde_dx = ps.gradient_at(0.0, m.s0, m.x0)[1];
    BsdeOptions bo;
    bo.paths = 100000;
    bo.steps = 64;
    bo.basis_degree = 5;
    bo.seed = 9;
    const BsdeSolution sol = solve_bsde(m, dig, 0.5, Side::Buy, bo);
    const WeightedGradient g5 = malliavin_gradient(m, dig, 0.5, Side::Buy, &sol, {});
    const double rel = std::abs(g5.gradient[1] - pde_dx) / std::abs(pde_dx);

    r.seconds = elapsed(t0);
    r.pass = std::abs(z0) <= 3.0 && rel <= 0.02;
    r.detail = "gamma 0: z = " + num(z0) + " (|z| <= 3) vs Gaussian delta; gamma 0.5: rel " +
               num(rel) + " (<= 2e-2) vs pde factor delta " + num(pde_dx);
    return r;
}

CriterionResult criterion_8() {
    CriterionResult r{8, "expansion order", false, 0.0, ""};
    const auto t0 = clock_type::now();
    const MarketModel m = reference_model();
    const Payoff f = reference_payoff();
    const Grid g = Grid::make(m, {257, 257}, 256, 6.0);
    const double p0 = solve_uip_pde(m, f, 0.0, Side::Buy, g, {}).price();
    const double zq = reference_zeta_quadrature(m);
    const std::vector<double> gammas = {0.025, 0.05, 0.1, 0.2};
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    std::string resids;
    for (const double gamma : gammas) {
        const double price = solve_uip_pde(m, f, gamma, Side::Buy, g, {}).price();
        const double resid = std::max(std::abs(price - (p0 - 0.5 * gamma * zq)), 1e-14);
        const double lx = std::log(gamma), ly = std::log(resid);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        resids += (resids.empty() ? "" : ", ") + num(resid);
    }
    const double n = static_cast<double>(gammas.size());
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    r.seconds = elapsed(t0);
    r.pass = slope >= 1.7 && slope <= 2.3 && r.seconds < 300.0;
    r.detail = "log-log slope " + num(slope) + " (in [1.7, 2.3]), residuals {" + resids +
               "} at gamma {0.025, 0.05, 0.1, 0.2}";
    return r;
}

CriterionResult criterion_9() {
    CriterionResult r{9, "indifference verification", false, 0.0, ""};
    const auto t0 = clock_type::now();
    const MarketModel m = reference_model();
    const Payoff f = reference_payoff();
    const Grid g = Grid::make(m, {161, 161}, 64);
    const PriceSurface ps = solve_uip_pde(m, f, 1.0, Side::Buy, g, {});
    HedgeOptions opt;
    opt.paths = 200000;
    opt.steps = 64;
    opt.seed = 11;
    const IndifferenceReport rep = verify_indifference(m, f, ps, ps.price(), opt);
    r.seconds = elapsed(t0);
    r.pass = rep.pass && r.seconds < 300.0;
    r.detail = "gap z " + num(rep.ce_gap / std::max(rep.ce_gap_se, 1e-300)) +
               " (|z| <= 3), shifted-price z " + num(rep.gap_dn_z) + " / " + num(rep.gap_up_z) +
               " (correct signs >= 3), worst perturbation z " + num(rep.perturbation_z.maxCoeff()) +
               " (<= 2)";
    return r;
}

CriterionResult criterion_10() {
    CriterionResult r{10, "electricity forward", false, 0.0, ""};
    const auto t0 = clock_type::now();
    const PowerModel un = aid_2fuel_preset();
    const Payoff fwd_un = un.forward_payoff();

    // quadrature forward price vs plain pricing-measure Monte Carlo
    const McEstimate quad = forward_p0(un, 0.0, un.base.s0, un.base.x0);
    PriceOptions po;
    po.paths = 400000;
    po.prefer_quadrature = false;
    po.seed = 5;
    const McEstimate mc = price_mmm(un.base, fwd_un, po);
    const double z_p0 = (quad.value - mc.value) / mc.se;

    // marginal-weight derivatives vs central finite differences
    double worst_fd = 0.0;
    const double t_mid = 0.5 * un.base.T;
    for (const double scale : {0.9, 1.0, 1.1}) {
        const Vec x = scale * un.base.x0;
        const PsiDerivs pd = marginal_weight_derivatives(un, t_mid, x);
        for (int j = 0; j < 3; ++j) {
            const double h = 1e-5 * std::max(1.0, std::abs(x[j]));
            Vec xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            const PsiValues vp = marginal_weights(un, t_mid, xp);
            const PsiValues vm = marginal_weights(un, t_mid, xm);
            const double fd1 = (vp.psi1 - vm.psi1) / (2.0 * h);
            const double fd2 = (vp.psi2 - vm.psi2) / (2.0 * h);
            worst_fd = std::max(worst_fd, std::abs(fd1 - pd.d1[j]) / std::max(std::abs(pd.d1[j]), 1e-8));
            worst_fd = std::max(worst_fd, std::abs(fd2 - pd.d2[j]) / std::max(std::abs(pd.d2[j]), 1e-8));
        }
    }

    // reduced first-order term vs the generic nested Monte Carlo estimate
    ForwardZetaOptions fzo;
    fzo.samples = 4096;
    const McEstimate fz = forward_zeta(un, fzo);
    const McEstimate nz = zeta(un.base, fwd_un, {});
    const double zeta_rel = std::abs(fz.value - nz.value) / nz.value;

    // capped expansion price vs the regression solver at gamma 0.2
    PowerModel pm = un;
    pm.cap = 30.0;
    const PowerExpansion ex = forward_uip(pm, 0.2, Side::Buy, fzo);
    BsdeOptions bo;
    bo.paths = 200000;
    bo.steps = 32;
    bo.basis_degree = 3;
    bo.seed = 17;
    const BsdeSolution y = solve_bsde(pm.base, pm.forward_payoff(), 0.2, Side::Buy, bo);
    const double allow = 3.0 * std::sqrt(y.y0_se * y.y0_se + 0.01 * ex.zeta_se * ex.zeta_se) +
                         0.05 * std::abs(y.y0);
    const double exp_gap = std::abs(ex.price - y.y0);

    r.seconds = elapsed(t0);
    r.pass = std::abs(z_p0) <= 3.0 && worst_fd <= 1e-4 && zeta_rel <= 0.05 && exp_gap <= allow &&
             r.seconds < 600.0;
    r.detail = "p0 z " + num(z_p0) + " (|z| <= 3), psi fd rel " + num(worst_fd) +
               " (<= 1e-4), zeta rel " + num(zeta_rel) + " (<= 5e-2), expansion gap " +
               num(exp_gap) + " (<= " + num(allow) + ")";
    return r;
}

CriterionResult criterion_11() {
    CriterionResult r{11, "monotonicity and shape", false, 0.0, ""};
    const auto t0 = clock_type::now();
    const MarketModel m = reference_model();
    const Payoff f = reference_payoff();

    // buy price nonincreasing in gamma along the pde route
    const Grid gm = Grid::make(m, {193, 193}, 96, 6.0);
    double prev = 1e300;
    bool pde_mono = true;
    for (const double gamma : {0.1, 0.5, 1.0}) {
        const double p = solve_uip_pde(m, f, gamma, Side::Buy, gm, {}).price();
        pde_mono = pde_mono && p <= prev + 1e-9;
        prev = p;
    }

    // and along the regression route, two seeds per gamma
    double means[2] = {0.0, 0.0}, sds[2] = {0.0, 0.0};
    int gi = 0;
    for (const double gamma : {0.25, 1.0}) {
        double v[2];
        for (int rep = 0; rep < 2; ++rep) {
            BsdeOptions bo;
            bo.paths = 100000;
            bo.steps = 64;
            bo.basis_degree = 3;
            bo.seed = 5 + static_cast<std::uint64_t>(rep);
            v[rep] = solve_bsde(m, f, gamma, Side::Buy, bo).y0;
        }
        means[gi] = 0.5 * (v[0] + v[1]);
        sds[gi] = std::abs(v[0] - v[1]) / std::sqrt(2.0);
        ++gi;
    }
    const double drop = means[0] - means[1];
    const double drop_se = std::sqrt(sds[0] * sds[0] + sds[1] * sds[1]) / std::sqrt(2.0);
    const bool bsde_mono = drop >= -2.0 * drop_se;

    // concavity in the traded price for a payoff linear in s
    const Grid gc = Grid::make(m, {257, 257}, 128, 6.0);
    const PriceSurface ps = solve_uip_pde(m, f, 0.5, Side::Buy, gc, {});
    double max_dd = -1e300;
    for (double s = 0.725; s <= 1.2755; s += 0.025) {
        const double a = ps.value_at(0.0, Vec::Constant(1, s - 0.025), m.x0);
        const double b = ps.value_at(0.0, Vec::Constant(1, s), m.x0);
        const double c = ps.value_at(0.0, Vec::Constant(1, s + 0.025), m.x0);
        max_dd = std::max(max_dd, a - 2.0 * b + c);
    }

    // certainty-equivalent lower bound
    const McEstimate lb = price_lower_bound(m, f, 0.5);
    const double lb_margin = ps.price() - lb.value;

    r.seconds = elapsed(t0);
    r.pass = pde_mono && bsde_mono && max_dd <= 1e-6 && lb_margin >= -1e-4;
    r.detail = std::string("pde gamma-monotone ") + (pde_mono ? "yes" : "NO") + ", bsde drop " +
               num(drop) + " (>= -2 se = " + num(-2.0 * drop_se) + "), max second difference " +
               num(max_dd) + " (<= 1e-6), lower-bound margin " + num(lb_margin) + " (>= -1e-4)";
    return r;
}

} // namespace

std::vector<CriterionResult> run_acceptance(std::ostream& log, int only) {
    using Fn = CriterionResult (*)();
    const Fn criteria[] = {criterion_1, criterion_2, criterion_3, criterion_4,
                           criterion_5, criterion_6, criterion_7, criterion_8,
                           criterion_9, criterion_10, criterion_11};
    std::vector<CriterionResult> results;
    for (int id = 1; id <= 11; ++id) {
        if (only != 0 && only != id) continue;
        CriterionResult r;
        try {
            r = criteria[id - 1]();
        } catch (const std::exception& e) {
            r.id = id;
            r.name = "criterion " + std::to_string(id);
            r.pass = false;
            r.detail = std::string("exception: ") + e.what();
        }
        char line[512];
        std::snprintf(line, sizeof line, "criterion %d: %s - %s: %s (%.1fs)\n", r.id,
                      r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str(), r.seconds);
        log << line << std::flush;
        results.push_back(std::move(r));
    }
    return results;
}

} // namespace uip
