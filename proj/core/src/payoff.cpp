#include "uip/payoff.hpp"

#include "uip/quadrature.hpp"

#include <cmath>
#include <sstream>

namespace uip {

double Payoff::operator()(const Vec& s, const Vec& x) const {
    if (!value) throw validation_error("payoff: missing value function");
    const double v = value(s, x);
    if (!std::isfinite(v)) throw numerical_error("payoff: non-finite value at sample point");
    return v;
}

namespace {

Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& a, double h) {
    Vec g(a.size());
    Vec p = a;
    for (int i = 0; i < a.size(); ++i) {
        const double step = h * (1.0 + std::abs(a[i]));
        p[i] = a[i] + step;
        const double up = f(p);
        p[i] = a[i] - step;
        const double dn = f(p);
        p[i] = a[i];
        g[i] = (up - dn) / (2.0 * step);
    }
    return g;
}

} // namespace

Vec Payoff::grad_s(const Vec& s, const Vec& x) const {
    if (grad_s_fn) return grad_s_fn(s, x);
    return fd_gradient([&](const Vec& p) { return value(p, x); }, s, 1e-6);
}

Vec Payoff::grad_x(const Vec& s, const Vec& x) const {
    if (grad_x_fn) return grad_x_fn(s, x);
    return fd_gradient([&](const Vec& p) { return value(s, p); }, x, 1e-6);
}

OneSidedGradients one_sided_gradients(const Payoff& f, const Vec& s, const Vec& x, double h) {
    OneSidedGradients g;
    g.s_minus = Vec(s.size());
    g.s_plus = Vec(s.size());
    g.x_minus = Vec(x.size());
    g.x_plus = Vec(x.size());
    const double base = f(s, x);
    Vec p = s;
    for (int i = 0; i < s.size(); ++i) {
        const double step = h * (1.0 + std::abs(s[i]));
        p[i] = s[i] + step;
        g.s_plus[i] = (f(p, x) - base) / step;
        p[i] = s[i] - step;
        g.s_minus[i] = (base - f(p, x)) / step;
        p[i] = s[i];
    }
    Vec q = x;
    for (int i = 0; i < x.size(); ++i) {
        const double step = h * (1.0 + std::abs(x[i]));
        q[i] = x[i] + step;
        g.x_plus[i] = (f(s, q) - base) / step;
        q[i] = x[i] - step;
        g.x_minus[i] = (base - f(s, q)) / step;
        q[i] = x[i];
    }
    return g;
}

Payoff mollify(const Payoff& f, double l) {
    if (!(l > 0.0)) throw validation_error("mollify: radius parameter must be positive");
    std::vector<int> coords = f.x_discontinuities;
    if (coords.empty()) return f; // nothing to smooth
    const double r = 1.0 / l;
    const int k = static_cast<int>(coords.size());

    // Tensor Gauss-Legendre nodes over the cube [-r, r]^k, bump-weighted and
    // self-normalized so the kernel integrates to exactly one.
    const QuadRule& gl = gauss_legendre(16);
    const int nq = static_cast<int>(gl.nodes.size());
    std::vector<Vec> offsets;
    std::vector<double> weights;
    std::vector<int> idx(k, 0);
    double mass = 0.0;
    for (;;) {
        Vec y(k);
        double w = 1.0;
        double norm2 = 0.0;
        for (int j = 0; j < k; ++j) {
            y[j] = r * gl.nodes[idx[j]];
            w *= gl.weights[idx[j]];
            norm2 += (y[j] / r) * (y[j] / r);
        }
        if (norm2 < 1.0) {
            const double bump = std::exp(-1.0 / (1.0 - norm2));
            offsets.push_back(y);
            weights.push_back(w * bump);
            mass += w * bump;
        }
        int j = 0;
        while (j < k && ++idx[j] == nq) idx[j++] = 0;
        if (j == k) break;
    }
    for (double& w : weights) w /= mass;

    Payoff out = f;
    out.smoothness = Smoothness::SmoothC3;
    out.x_discontinuities.clear();
    out.grad_x_fn = nullptr; // jumps became steep slopes; use differences
    std::ostringstream nm;
    nm << f.name << "~moll(l=" << format_full(l) << ')';
    out.name = nm.str();
    auto base = f.value;
    out.value = [base, coords, offsets, weights](const Vec& s, const Vec& x) {
        Vec shifted = x;
        double acc = 0.0;
        for (std::size_t q = 0; q < offsets.size(); ++q) {
            for (std::size_t j = 0; j < coords.size(); ++j)
                shifted[coords[j]] = x[coords[j]] + offsets[q][j];
            acc += weights[q] * base(s, shifted);
        }
        return acc;
    };
    return out;
}

ScarcityFunction scarcity_power(double cap, double nu) {
    if (!(cap > 0.0) || !(nu > 0.0))
        throw validation_error("scarcity_power: cap and exponent must be positive");
    ScarcityFunction g;
    const double z0 = std::pow(cap, -1.0 / nu); // cap binds on z <= z0
    g.g = [cap, nu, z0](double z) { return z <= z0 ? cap : std::pow(z, -nu); };
    g.dg = [nu, z0](double z) { return z <= z0 ? 0.0 : -nu * std::pow(z, -nu - 1.0); };
    g.bound = cap;
    g.kinks = {z0};
    std::ostringstream nm;
    nm << "scarcity-power(M=" << format_full(cap) << ",nu=" << format_full(nu) << ')';
    g.name = nm.str();
    return g;
}

void validate(const ScarcityFunction& g, double z_lo, double z_hi) {
    if (!g.g || !g.dg) throw validation_error("scarcity: missing g or derivative");
    const int samples = 193;
    for (int i = 0; i < samples; ++i) {
        const double z = z_lo + (z_hi - z_lo) * i / (samples - 1);
        const double v = g.g(z);
        if (!(std::abs(v) <= g.bound * (1.0 + 1e-12)))
            throw validation_error("scarcity: |g| exceeds declared bound");
        const double h = 1e-5 * (1.0 + std::abs(z));
        const double cfd = (g.g(z + h) - g.g(z - h)) / (2.0 * h);
        const double dg = g.dg(z);
        // Skip straddles of a kink, where the two branches disagree by design.
        if (std::abs(g.dg(z + h) - g.dg(z - h)) > 0.5 * (1.0 + std::abs(dg))) continue;
        if (std::abs(cfd - dg) > 1e-6 * std::max(1.0, std::abs(dg)))
            throw validation_error("scarcity: derivative inconsistent with finite differences");
    }
}

Payoff make_digital_x(int coord, double threshold) {
    Payoff p;
    p.value = [coord, threshold](const Vec&, const Vec& x) {
        return x[coord] >= threshold ? 1.0 : 0.0;
    };
    p.grad_s_fn = [](const Vec& s, const Vec&) { return Vec(Vec::Zero(s.size())); };
    p.grad_x_fn = [](const Vec&, const Vec& x) { return Vec(Vec::Zero(x.size())); };
    p.smoothness = Smoothness::DiscontinuousInX;
    p.growth_q = 0.0;
    p.bound = 1.0;
    p.x_discontinuities = {coord};
    std::ostringstream nm;
    nm << "digital(x" << coord + 1 << ">=" << format_full(threshold) << ')';
    p.name = nm.str();
    return p;
}

Payoff make_call(int coord, double strike) {
    Payoff p;
    p.value = [coord, strike](const Vec& s, const Vec&) {
        return std::max(s[coord] - strike, 0.0);
    };
    p.grad_s_fn = [coord, strike](const Vec& s, const Vec&) {
        Vec g = Vec::Zero(s.size());
        g[coord] = s[coord] > strike ? 1.0 : 0.0;
        return g;
    };
    p.grad_x_fn = [](const Vec&, const Vec& x) { return Vec(Vec::Zero(x.size())); };
    p.smoothness = Smoothness::LipschitzC0;
    p.growth_q = 1.0;
    std::ostringstream nm;
    nm << "call(s" << coord + 1 << ",K=" << format_full(strike) << ')';
    p.name = nm.str();
    return p;
}

Payoff make_spread_call(const Vec& weights, double strike) {
    Payoff p;
    Vec w = weights;
    p.value = [w, strike](const Vec& s, const Vec&) {
        return std::max(w.dot(s) - strike, 0.0);
    };
    p.grad_s_fn = [w, strike](const Vec& s, const Vec&) {
        return Vec(w.dot(s) > strike ? w : Vec(Vec::Zero(s.size())));
    };
    p.grad_x_fn = [](const Vec&, const Vec& x) { return Vec(Vec::Zero(x.size())); };
    p.smoothness = Smoothness::LipschitzC0;
    p.growth_q = 1.0;
    std::ostringstream nm;
    nm << "spread_call(K=" << format_full(strike) << ",w=";
    for (int i = 0; i < w.size(); ++i) nm << (i ? "," : "") << format_full(w[i]);
    nm << ')';
    p.name = nm.str();
    return p;
}

namespace {

// Marginal-fuel weight on the traded block: fuel i sells iff demand exceeds
// the capacity of cheaper fuels, y > sum_{k<i} c_k (first fuel always sells).
double stack_price(const Vec& s, const Vec& x) {
    const int fuels = static_cast<int>(s.size());
    const double y = x[fuels];
    double acc = s[0];
    double cum = 0.0;
    for (int i = 1; i < fuels; ++i) {
        cum += x[i - 1];
        if (y - cum > 0.0) acc += s[i];
    }
    return acc;
}

double residual_capacity(const Vec& s, const Vec& x) {
    double c = 0.0;
    for (int i = 0; i < s.size(); ++i) c += x[i];
    return c - x[s.size()];
}

} // namespace

Payoff make_forward_payoff(const ScarcityFunction& g, int fuels) {
    if (fuels < 1) throw validation_error("forward payoff: need at least one fuel");
    validate(g);
    Payoff p;
    auto gv = g.g;
    auto gd = g.dg;
    p.value = [gv](const Vec& s, const Vec& x) {
        return gv(residual_capacity(s, x)) * stack_price(s, x);
    };
    p.grad_s_fn = [gv](const Vec& s, const Vec& x) {
        const int fuels = static_cast<int>(s.size());
        const double gz = gv(residual_capacity(s, x));
        Vec out(fuels);
        out[0] = gz;
        double cum = 0.0;
        for (int i = 1; i < fuels; ++i) {
            cum += x[i - 1];
            out[i] = x[fuels] - cum > 0.0 ? gz : 0.0;
        }
        return out;
    };
    p.grad_x_fn = [gv, gd](const Vec& s, const Vec& x) {
        const double dg = gd(residual_capacity(s, x));
        const double price = stack_price(s, x);
        Vec out(x.size());
        for (int i = 0; i < s.size(); ++i) out[i] = dg * price;
        out[s.size()] = -dg * price; // a.e.; indicator jumps carry no density here
        return out;
    };
    p.smoothness = Smoothness::DiscontinuousInX;
    p.growth_q = 1.0;
    for (int i = 0; i < fuels; ++i) p.x_discontinuities.push_back(i);
    p.x_discontinuities.push_back(fuels);
    p.name = "power_forward[" + g.name + "]";
    return p;
}

Payoff make_capped_forward_payoff(const ScarcityFunction& g, int fuels, double cap) {
    if (!(cap > 0.0)) throw validation_error("capped forward: cap must be positive");
    Payoff base = make_forward_payoff(g, fuels);
    Payoff p = base;
    auto v = base.value;
    auto gs = base.grad_s_fn;
    auto gx = base.grad_x_fn;
    p.value = [v, cap](const Vec& s, const Vec& x) { return std::min(v(s, x), cap); };
    p.grad_s_fn = [v, gs, cap](const Vec& s, const Vec& x) {
        return Vec(v(s, x) < cap ? gs(s, x) : Vec(Vec::Zero(s.size())));
    };
    p.grad_x_fn = [v, gx, cap](const Vec& s, const Vec& x) {
        return Vec(v(s, x) < cap ? gx(s, x) : Vec(Vec::Zero(x.size())));
    };
    p.bound = cap;
    std::ostringstream nm;
    nm << "capped_" << base.name << "(cap=" << format_full(cap) << ')';
    p.name = nm.str();
    return p;
}

} // namespace uip
