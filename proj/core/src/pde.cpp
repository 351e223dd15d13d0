#include "uip/pde.hpp"

#include "uip/quadrature.hpp"
#include "uip/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace uip {

Hamiltonian truncated_hamiltonian(const Vec& q, double gamma, double m) {
    if (gamma < 0.0) throw validation_error("hamiltonian: gamma must be nonnegative");
    if (m < 0.0) throw validation_error("hamiltonian: truncation radius must be nonnegative");
    Hamiltonian h;
    h.control = Vec::Zero(q.size());
    if (gamma == 0.0 || q.size() == 0) return h;
    const double qn = q.norm();
    if (gamma * qn <= m) {
        h.control = -gamma * q;
        h.value = 0.5 * gamma * qn * qn;
    } else {
        h.control = qn > 0.0 ? Vec(-m / qn * q) : Vec(Vec::Zero(q.size()));
        h.value = m * qn - 0.5 * m * m / gamma;
    }
    return h;
}

namespace {

// Flattened tensor-field helpers. Row-major layout; axis a has size sz[a]
// and stride st[a].
struct Layout {
    std::vector<int> sz;
    std::vector<std::size_t> st;
    std::size_t total = 1;

    explicit Layout(const Grid& g) {
        const int dim = g.dim();
        sz.resize(dim);
        st.resize(dim);
        for (int a = 0; a < dim; ++a) sz[a] = static_cast<int>(g.axes[a].size());
        std::size_t s = 1;
        for (int a = dim - 1; a >= 0; --a) {
            st[a] = s;
            s *= sz[a];
        }
        total = s;
    }
};

// First derivative along an axis: central inside, one-sided second-order at
// the two boundary planes.
void axis_gradient(const Layout& lay, int a, double h, const std::vector<double>& u,
                   std::vector<double>& out) {
    const int na = lay.sz[a];
    const std::size_t sa = lay.st[a];
    const std::size_t block = sa * na;
    for (std::size_t blk = 0; blk < lay.total; blk += block)
        for (std::size_t off = 0; off < sa; ++off) {
            const std::size_t base = blk + off;
            out[base] = (-3.0 * u[base] + 4.0 * u[base + sa] - u[base + 2 * sa]) / (2.0 * h);
            const std::size_t last = base + (na - 1) * sa;
            out[last] = (3.0 * u[last] - 4.0 * u[last - sa] + u[last - 2 * sa]) / (2.0 * h);
            for (int i = 1; i + 1 < na; ++i) {
                const std::size_t k = base + i * sa;
                out[k] = (u[k + sa] - u[k - sa]) / (2.0 * h);
            }
        }
}

// Second derivative along an axis scaled by coeff; zero at boundary planes
// (linear-extrapolation boundary condition).
void axis_second(const Layout& lay, int a, double coeff_over_h2, const std::vector<double>& u,
                 std::vector<double>& out) {
    const int na = lay.sz[a];
    const std::size_t sa = lay.st[a];
    const std::size_t block = sa * na;
    for (std::size_t blk = 0; blk < lay.total; blk += block)
        for (std::size_t off = 0; off < sa; ++off) {
            const std::size_t base = blk + off;
            out[base] = 0.0;
            out[base + (na - 1) * sa] = 0.0;
            for (int i = 1; i + 1 < na; ++i) {
                const std::size_t k = base + i * sa;
                out[k] = coeff_over_h2 * (u[k + sa] - 2.0 * u[k] + u[k - sa]);
            }
        }
}

// expl += v(node) * du/dxi_a with a second-order stencil biased toward the
// side the information comes from.
void add_upwind_drift(const Layout& lay, int a, double h, const std::vector<double>& vel,
                      const std::vector<double>& u, std::vector<double>& expl) {
    const int na = lay.sz[a];
    const std::size_t sa = lay.st[a];
    const std::size_t block = sa * na;
    const double inv2h = 1.0 / (2.0 * h);
    const double invh = 1.0 / h;
    for (std::size_t blk = 0; blk < lay.total; blk += block)
        for (std::size_t off = 0; off < sa; ++off) {
            const std::size_t base = blk + off;
            for (int i = 0; i < na; ++i) {
                const std::size_t k = base + i * sa;
                const double v = vel[k];
                double du;
                if (v >= 0.0) {
                    if (i + 2 < na)
                        du = (-3.0 * u[k] + 4.0 * u[k + sa] - u[k + 2 * sa]) * inv2h;
                    else if (i + 1 < na)
                        du = (u[k + sa] - u[k - sa]) * inv2h;
                    else
                        du = (u[k] - u[k - sa]) * invh;
                } else {
                    if (i >= 2)
                        du = (3.0 * u[k] - 4.0 * u[k - sa] + u[k - 2 * sa]) * inv2h;
                    else if (i >= 1)
                        du = (u[k + sa] - u[k - sa]) * inv2h;
                    else
                        du = (u[k + sa] - u[k]) * invh;
                }
                expl[k] += v * du;
            }
        }
}

// expl += coeff * d2u/(dxi_a dxi_b), central cross stencil, zero on boundary
// planes of either axis.
void add_cross(const Layout& lay, int a, int b, double coeff, double ha, double hb,
               const std::vector<double>& u, std::vector<double>& expl) {
    const std::size_t sa = lay.st[a], sb = lay.st[b];
    const int na = lay.sz[a], nb = lay.sz[b];
    const double c = coeff / (4.0 * ha * hb);
    std::vector<int> idx(lay.sz.size(), 0);
    for (std::size_t k = 0; k < lay.total; ++k) {
        const int ia = idx[a], ib = idx[b];
        if (ia > 0 && ia + 1 < na && ib > 0 && ib + 1 < nb)
            expl[k] += c * (u[k + sa + sb] - u[k + sa - sb] - u[k - sa + sb] + u[k - sa - sb]);
        for (int ax = static_cast<int>(idx.size()) - 1; ax >= 0; --ax) {
            if (++idx[ax] < lay.sz[ax]) break;
            idx[ax] = 0;
        }
    }
}

// Tridiagonal solve of (I - r d^2) along axis a with identity boundary rows;
// constant coefficients allow one precomputed elimination sweep.
struct AxisSolver {
    int na = 0;
    std::size_t sa = 0;
    std::vector<double> cp;      // modified upper coefficients
    std::vector<double> inv_den; // 1 / (b - a * cp_prev)

    void init(int n, std::size_t stride, double r) {
        na = n;
        sa = stride;
        cp.assign(n, 0.0);
        inv_den.assign(n, 0.0);
        // rows: [1, 0, ...], interior [-r, 1+2r, -r], [..., 0, 1]
        inv_den[0] = 1.0;
        cp[0] = 0.0;
        for (int i = 1; i < n; ++i) {
            const double ai = (i + 1 < n) ? -r : 0.0;
            const double bi = (i + 1 < n) ? 1.0 + 2.0 * r : 1.0;
            const double ci = (i + 1 < n) ? -r : 0.0;
            const double den = bi - ai * cp[i - 1];
            inv_den[i] = 1.0 / den;
            cp[i] = ci * inv_den[i];
        }
    }

    void solve_line(double* x) const {
        // forward sweep writes the modified rhs in place
        x[0] *= inv_den[0];
        for (int i = 1; i < na; ++i) {
            const double lower = (i + 1 < na) ? lower_ : 0.0;
            x[i * sa] = (x[i * sa] - lower * x[(i - 1) * sa]) * inv_den[i];
        }
        for (int i = na - 2; i >= 0; --i) x[i * sa] -= cp[i] * x[(i + 1) * sa];
    }

    double lower_ = 0.0;
};

} // namespace

PriceSurface solve_uip_pde(const MarketModel& m, const Payoff& payoff, double gamma, Side side,
                           const Grid& g, const PdeOptions& opt) {
    validate(m);
    if (gamma < 0.0) throw validation_error("pde: gamma must be nonnegative");
    if (g.n != m.n() || g.d != m.d()) throw validation_error("pde: grid does not match model");
    if (g.dim() < 1 || g.dim() > 3)
        throw validation_error("pde: solver supports one to three spatial dimensions");

    const int n = m.n(), d = m.d(), dim = g.dim();
    const Layout lay(g);
    const Mat ss = m.sigma * m.sigma.transpose();
    const Mat bb = m.beta * m.beta.transpose();

    // Terminal condition, mollified if the payoff jumps in x.
    Payoff f = payoff;
    if (payoff.smoothness == Smoothness::DiscontinuousInX && !payoff.x_discontinuities.empty()) {
        double hmin = std::numeric_limits<double>::infinity();
        for (int c : payoff.x_discontinuities) hmin = std::min(hmin, g.spacing(n + c));
        f = mollify(payoff, opt.mollify_cells / hmin);
    }

    std::vector<double> u(lay.total);
    {
        std::vector<int> idx(dim, 0);
        Vec s(n), x(d);
        for (std::size_t k = 0; k < lay.total; ++k) {
            for (int a = 0; a < n; ++a) s[a] = std::exp(g.axes[a][idx[a]]);
            for (int a = 0; a < d; ++a) x[a] = g.axes[n + a][idx[n + a]];
            u[k] = f(s, x);
            for (int ax = dim - 1; ax >= 0; --ax) {
                if (++idx[ax] < lay.sz[ax]) break;
                idx[ax] = 0;
            }
        }
    }

    // Gradient buffers for the factor block and the driver.
    std::vector<std::vector<double>> xgrad(d, std::vector<double>(lay.total));
    auto compute_xgrads = [&](const std::vector<double>& field) {
        for (int j = 0; j < d; ++j) axis_gradient(lay, n + j, g.spacing(n + j), field, xgrad[j]);
    };

    double m_trunc = opt.m_trunc;
    if (m_trunc <= 0.0) {
        double qmax = 0.0;
        if (d > 0 && gamma > 0.0) {
            compute_xgrads(u);
            Vec grad(d);
            for (std::size_t k = 0; k < lay.total; ++k) {
                for (int j = 0; j < d; ++j) grad[j] = xgrad[j][k];
                qmax = std::max(qmax, (m.beta.transpose() * grad).norm());
            }
        }
        m_trunc = std::max(1.0, 8.0 * gamma * qmax);
    }

    double envelope = 0.0;
    for (double v : u) envelope = std::max(envelope, std::abs(v));
    const double blow_up = opt.divergence_factor * (envelope + 1.0);

    // Step rule: per-axis parabolic bound, advection guard, and the horizon cap.
    double dtau = opt.dt_cap_factor * m.T;
    std::vector<double> diff(dim, 0.0);
    for (int a = 0; a < n; ++a) diff[a] = 0.5 * ss(a, a);
    for (int j = 0; j < d; ++j) diff[n + j] = 0.5 * bb(j, j);
    for (int a = 0; a < dim; ++a) {
        const double h = g.spacing(a);
        if (diff[a] > 0.0) dtau = std::min(dtau, h * h / (2.0 * diff[a]));
        double vmax;
        if (a < n) {
            vmax = 0.5 * ss(a, a);
        } else {
            const int j = a - n;
            double bmax = 0.0;
            for (int q = 0; q <= 16; ++q) bmax = std::max(bmax, std::abs(m.drift_b(m.T * q / 16.0)[j]));
            const double xmax = std::max(std::abs(g.axes[a][0]), std::abs(g.axes[a][lay.sz[a] - 1]));
            vmax = bmax + m.alpha[j] * xmax;
        }
        if (vmax > 0.0) dtau = std::min(dtau, 0.4 * h / vmax);
    }
    const int steps = std::max(g.time_steps, static_cast<int>(std::ceil(m.T / dtau)));
    dtau = m.T / steps;

    // Slice schedule (time indices counted in tau = T - t).
    std::set<int> keep;
    const int nslices = std::max(2, opt.store_slices);
    for (int sidx = 0; sidx < nslices; ++sidx)
        keep.insert(static_cast<int>(std::llround(static_cast<double>(steps) * sidx / (nslices - 1))));
    for (double t : opt.store_times) {
        if (t < -1e-12 || t > m.T * (1.0 + 1e-12))
            throw validation_error("pde: requested slice time outside [0, T]");
        keep.insert(static_cast<int>(std::llround((m.T - t) / dtau)));
    }
    keep.insert(0);
    keep.insert(steps);

    // Pre-factorized implicit sweeps, one per axis.
    std::vector<AxisSolver> solvers(dim);
    std::vector<double> rcoef(dim);
    for (int a = 0; a < dim; ++a) {
        const double h = g.spacing(a);
        rcoef[a] = 0.5 * dtau * diff[a] / (h * h);
        solvers[a].init(lay.sz[a], lay.st[a], rcoef[a]);
        solvers[a].lower_ = -rcoef[a];
    }

    // Velocity fields (traded axes constant; factor axes affine, refreshed
    // only when the drift is time-dependent).
    std::vector<std::vector<double>> vel(dim, std::vector<double>(lay.total));
    auto fill_velocities = [&](double t) {
        const Vec bt = m.drift_b(t);
        std::vector<int> idx(dim, 0);
        for (std::size_t k = 0; k < lay.total; ++k) {
            for (int a = 0; a < n; ++a) vel[a][k] = -0.5 * ss(a, a);
            for (int j = 0; j < d; ++j)
                vel[n + j][k] = bt[j] - m.alpha[j] * g.axes[n + j][idx[n + j]];
            for (int ax = dim - 1; ax >= 0; --ax) {
                if (++idx[ax] < lay.sz[ax]) break;
                idx[ax] = 0;
            }
        }
    };
    fill_velocities(m.T);

    PriceSurface out;
    out.grid = g;
    out.gamma = gamma;
    out.side = side == Side::Buy ? +1 : -1;
    out.m_trunc = m_trunc;
    out.payoff_name = payoff.name;
    out.model_id = m.describe();
    out.anchor_s = m.s0;
    out.anchor_x = m.x0;
    out.key = surface_cache_key(m, payoff.name, gamma, out.side, g);

    std::vector<double> stimes;
    auto store_slice = [&](int k_tau) {
        stimes.push_back(m.T - k_tau * dtau);
        out.values.emplace_back(u);
        std::vector<std::vector<double>> gr(dim, std::vector<double>(lay.total));
        for (int a = 0; a < dim; ++a) {
            axis_gradient(lay, a, g.spacing(a), u, gr[a]);
            if (a < n) { // d/ds = d/dxi / s
                std::vector<int> idx(dim, 0);
                for (std::size_t k = 0; k < lay.total; ++k) {
                    gr[a][k] /= std::exp(g.axes[a][idx[a]]);
                    for (int ax = dim - 1; ax >= 0; --ax) {
                        if (++idx[ax] < lay.sz[ax]) break;
                        idx[ax] = 0;
                    }
                }
            }
        }
        out.gradients.push_back(std::move(gr));
    };
    if (keep.count(0)) store_slice(0);

    const double driver_sign = side == Side::Buy ? -1.0 : 1.0;
    std::vector<double> expl(lay.total), y(lay.total), rhs(lay.total);
    std::vector<std::vector<double>> au(dim, std::vector<double>(lay.total));
    Vec qv(d), grad(d);

    for (int k_tau = 1; k_tau <= steps; ++k_tau) {
        if (m.b) fill_velocities(m.T - (k_tau - 1) * dtau);

        std::fill(expl.begin(), expl.end(), 0.0);
        for (int a = 0; a < dim; ++a) add_upwind_drift(lay, a, g.spacing(a), vel[a], u, expl);
        for (int a = 0; a < dim; ++a)
            for (int bax = a + 1; bax < dim; ++bax) {
                double c = 0.0;
                if (a < n && bax < n) c = ss(a, bax);
                if (a >= n && bax >= n) c = bb(a - n, bax - n);
                if (c != 0.0)
                    add_cross(lay, a, bax, c, g.spacing(a), g.spacing(bax), u, expl);
            }
        if (gamma > 0.0 && d > 0) {
            compute_xgrads(u);
            for (std::size_t k = 0; k < lay.total; ++k) {
                for (int j = 0; j < d; ++j) grad[j] = xgrad[j][k];
                qv.noalias() = m.beta.transpose() * grad;
                const double qn = qv.norm();
                const double h = gamma * qn <= m_trunc
                                     ? 0.5 * gamma * qn * qn
                                     : m_trunc * qn - 0.5 * m_trunc * m_trunc / gamma;
                expl[k] += driver_sign * h;
            }
        }
        for (int a = 0; a < dim; ++a) axis_second(lay, a, diff[a] / (g.spacing(a) * g.spacing(a)), u, au[a]);

        // Douglas predictor and directional corrections.
        for (std::size_t k = 0; k < lay.total; ++k) {
            double acc = expl[k];
            for (int a = 0; a < dim; ++a) acc += au[a][k];
            y[k] = u[k] + dtau * acc;
        }
        for (int a = 0; a < dim; ++a) {
            const double r = rcoef[a];
            if (r == 0.0) continue;
            for (std::size_t k = 0; k < lay.total; ++k)
                rhs[k] = y[k] - 0.5 * dtau * au[a][k];
            const int na = lay.sz[a];
            const std::size_t sa = lay.st[a];
            const std::size_t block = sa * na;
            for (std::size_t blk = 0; blk < lay.total; blk += block)
                for (std::size_t off = 0; off < sa; ++off) solvers[a].solve_line(&rhs[blk + off]);
            y.swap(rhs);
        }
        u.swap(y);

        if ((k_tau & 63) == 0 || k_tau == steps) {
            for (double v : u)
                if (!std::isfinite(v) || std::abs(v) > blow_up) {
                    std::ostringstream msg;
                    msg << "pde: solution left its envelope at step " << k_tau << " of " << steps
                        << " (bound " << blow_up << ")";
                    throw numerical_error(msg.str());
                }
        }
        if (keep.count(k_tau)) store_slice(k_tau);
    }

    // Slices were pushed in decreasing t; flip to ascending.
    std::reverse(out.values.begin(), out.values.end());
    std::reverse(out.gradients.begin(), out.gradients.end());
    std::reverse(stimes.begin(), stimes.end());
    out.slice_times = Eigen::Map<const Vec>(stimes.data(), static_cast<Eigen::Index>(stimes.size()));
    return out;
}

namespace {

bool depends_on_traded(const MarketModel& m, const Payoff& f) {
    if (m.n() == 0) return false;
    for (double scale : {0.8, 1.25}) {
        Vec s = m.s0 * scale;
        for (double xs : {-0.7, 0.0, 1.3}) {
            Vec x = m.x0;
            for (int j = 0; j < m.d(); ++j) x[j] += xs;
            if (std::abs(f(s, x) - f(m.s0, x)) > 1e-12 * (1.0 + std::abs(f(m.s0, x))))
                return true;
        }
    }
    return false;
}

} // namespace

double certainty_equivalent(const MarketModel& m, const Payoff& f, double gamma, int quad_nodes,
                            std::size_t mc_paths, std::uint64_t seed) {
    validate(m);
    if (gamma < 0.0) throw validation_error("certainty_equivalent: gamma must be nonnegative");
    if (depends_on_traded(m, f))
        throw validation_error("certainty_equivalent: payoff must depend on the factors only");
    const int d = m.d();
    if (d == 0) return f(m.s0, Vec(0));
    const GaussianLaw law = ou_conditional_moments(m, 0.0, m.x0, m.T);
    Eigen::SelfAdjointEigenSolver<Mat> es(law.cov);
    Vec ev = es.eigenvalues();
    for (int i = 0; i < d; ++i) ev[i] = ev[i] > 0.0 ? std::sqrt(ev[i]) : 0.0;
    const Mat l = es.eigenvectors() * ev.asDiagonal();

    auto expect = [&](const std::function<double(const Vec&)>& h) {
        double acc = 0.0;
        if (d <= 2) {
            const QuadRule& q = gauss_hermite(quad_nodes);
            const int nq = static_cast<int>(q.nodes.size());
            Vec z(d), x(d);
            if (d == 1) {
                for (int i = 0; i < nq; ++i) {
                    x = law.mean + l.col(0) * (std::sqrt(2.0) * q.nodes[i]);
                    acc += q.weights[i] * h(x);
                }
            } else {
                for (int i = 0; i < nq; ++i)
                    for (int j = 0; j < nq; ++j) {
                        z[0] = std::sqrt(2.0) * q.nodes[i];
                        z[1] = std::sqrt(2.0) * q.nodes[j];
                        x = law.mean + l * z;
                        acc += q.weights[i] * q.weights[j] * h(x);
                    }
            }
            return acc * std::pow(M_PI, -0.5 * d);
        }
        Vec z(d), x(d);
        for (std::size_t p = 0; p < mc_paths; ++p) {
            Philox gen(seed, p);
            for (int j = 0; j < d; ++j) z[j] = gen.normal(j);
            x = law.mean + l * z;
            acc += h(x);
        }
        return acc / static_cast<double>(mc_paths);
    };

    if (gamma == 0.0) return expect([&](const Vec& x) { return f(m.s0, x); });
    const double fref = f(m.s0, law.mean);
    const double acc =
        expect([&](const Vec& x) { return std::exp(-gamma * (f(m.s0, x) - fref)); });
    if (!(acc > 0.0) || !std::isfinite(acc))
        throw numerical_error("certainty_equivalent: exponential moment did not converge");
    return fref - std::log(acc) / gamma;
}

double burgers_reference(double t, double x, double gamma, double beta) {
    if (!(t > 0.0)) throw validation_error("burgers_reference: need elapsed time t > 0");
    if (!(beta > 0.0) || !(gamma > 0.0))
        throw validation_error("burgers_reference: gamma and beta must be positive");
    const double efac = std::exp(-gamma / (beta * beta));
    const double z = x / (beta * std::sqrt(t));
    const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
    const double num = beta * std::exp(-x * x / (2.0 * beta * beta * t)) * (1.0 - efac);
    const double den = gamma * std::sqrt(2.0 * M_PI * t) * ((efac - 1.0) * cdf + 1.0);
    return num / den;
}

double burgers_bound_constant(double gamma, double beta) {
    if (!(beta > 0.0) || !(gamma > 0.0))
        throw validation_error("burgers_bound_constant: gamma and beta must be positive");
    return beta * std::expm1(gamma / (beta * beta)) / (gamma * std::sqrt(2.0 * M_PI));
}

} // namespace uip
