#include "uip/asymptotics.hpp"

#include "uip/quadrature.hpp"
#include "uip/threading.hpp"

#include <cmath>
#include <sstream>

namespace uip {

namespace {

std::uint64_t node_salt(int node, std::size_t path, int half) {
    return (static_cast<std::uint64_t>(node + 1) << 42) ^ (static_cast<std::uint64_t>(path) << 2) ^
           static_cast<std::uint64_t>(half + 1);
}

// beta' times the factor block of an inner gradient estimate at (t_k, s, x).
struct InnerGrad {
    const MarketModel& m;
    const Payoff& f;
    const ZetaOptions& opt;
    const OneShotGradient* osg;
    Mat beta_t;

    Vec operator()(int node, double t, const Vec& s, const Vec& x, std::size_t path,
                   int half) const {
        const int d = m.d();
        const std::size_t np = std::max<std::size_t>(1, opt.inner_paths / 2);
        if (opt.method == InnerGradient::Callback) {
            const Vec g = opt.p0_grad_x(t, s, x);
            return beta_t * g.tail(d);
        }
        if (opt.method == InnerGradient::OneShot) {
            const Vec g = osg->estimate(f, s, x, np, opt.seed, node_salt(node, path, half));
            return beta_t * g.tail(d);
        }
        Vec g(d);
        Vec xb = x;
        for (int j = 0; j < d; ++j) {
            const double h = opt.fd_step * (1.0 + std::abs(x[j]));
            xb[j] = x[j] + h;
            const double up = osg->estimate_value(f, s, xb, np, opt.seed, node_salt(node, path, half));
            xb[j] = x[j] - h;
            const double dn = osg->estimate_value(f, s, xb, np, opt.seed, node_salt(node, path, half));
            xb[j] = x[j];
            g[j] = (up - dn) / (2.0 * h);
        }
        return beta_t * g;
    }
};

} // namespace

McEstimate zeta(const MarketModel& m, const Payoff& f, const ZetaOptions& opt) {
    validate(m);
    const int d = m.d(), n = m.n();
    if (d == 0) return {0.0, 0.0, opt.outer_paths};
    if (opt.time_nodes < 3) throw validation_error("zeta: need at least 3 time nodes");
    if (opt.method != InnerGradient::Callback && opt.inner_paths < 2)
        throw validation_error("zeta: need at least 2 inner paths");
    if (opt.method == InnerGradient::Callback && !opt.p0_grad_x)
        throw validation_error("zeta: Callback method needs p0_grad_x");

    const int steps = opt.time_nodes - 1;
    PathSet ps = simulate_paths(m, Measure::MinimalMartingale, opt.outer_paths, steps, opt.seed);
    const double dt = ps.dt();
    Mat beta_t = m.beta.transpose();

    std::vector<std::unique_ptr<OneShotGradient>> osgs(static_cast<std::size_t>(steps));
    if (opt.method != InnerGradient::Callback)
        for (int k = 0; k < steps; ++k)
            osgs[static_cast<std::size_t>(k)] = std::make_unique<OneShotGradient>(m, ps.times[k]);

    // t = 0: the state is deterministic, one evaluation serves all paths.
    double head = 0.0;
    {
        InnerGrad ig{m, f, opt, osgs.empty() ? nullptr : osgs[0].get(), beta_t};
        const Vec a = ig(0, 0.0, m.s0, m.x0, 0, 0);
        const Vec b = ig(0, 0.0, m.s0, m.x0, 0, 1);
        head = a.dot(b);
    }

    std::vector<double> integral(opt.outer_paths);
    parallel_for(opt.outer_paths, [&](std::size_t lo, std::size_t hi) {
        Vec s(n), x(d), gx(d);
        for (std::size_t p = lo; p < hi; ++p) {
            double acc = 0.5 * dt * head;
            for (int k = 1; k < steps; ++k) {
                const double* st = ps.state(p, k);
                for (int i = 0; i < n; ++i) s[i] = st[i];
                for (int i = 0; i < d; ++i) x[i] = st[n + i];
                InnerGrad ig{m, f, opt, osgs[static_cast<std::size_t>(k)].get(), beta_t};
                const Vec a = ig(k, ps.times[k], s, x, p, 0);
                const Vec b = ig(k, ps.times[k], s, x, p, 1);
                acc += dt * a.dot(b);
            }
            const double* st = ps.state(p, steps);
            for (int i = 0; i < n; ++i) s[i] = st[i];
            for (int i = 0; i < d; ++i) x[i] = st[n + i];
            gx = f.grad_x(s, x);
            acc += 0.5 * dt * (beta_t * gx).squaredNorm();
            integral[p] = acc;
        }
    });
    return summarize(integral);
}

AsymptoticExpansion expand_price(const MarketModel& m, const Payoff& f, double gamma, Side side,
                                 const ExpandOptions& opt) {
    if (gamma < 0.0) throw validation_error("expand_price: gamma must be nonnegative");
    AsymptoticExpansion e;
    e.gamma = gamma;
    e.side = side == Side::Buy ? +1 : -1;
    const McEstimate p0 = price_mmm(m, f, opt.p0);
    e.p0 = p0.value;
    e.p0_se = p0.se;
    const McEstimate z = zeta(m, f, opt.zeta_opt);
    e.zeta = z.value;
    e.zeta_se = z.se;
    const double sg = side == Side::Buy ? 1.0 : -1.0;
    e.price = e.p0 - sg * 0.5 * gamma * e.zeta;
    e.se = std::sqrt(e.p0_se * e.p0_se + 0.25 * gamma * gamma * e.zeta_se * e.zeta_se);
    return e;
}

GradientExpansion expand_gradients(const MarketModel& m, const Payoff& f, double gamma, Side side,
                                   const GradientExpandOptions& opt) {
    validate(m);
    if (gamma < 0.0) throw validation_error("expand_gradients: gamma must be nonnegative");
    if (f.smoothness == Smoothness::DiscontinuousInX)
        throw validation_error("expand_gradients: needs a Lipschitz payoff in the factors");
    const int n = m.n(), d = m.d(), dim = n + d;

    // Bounded-factor-gradient probe at the center and the 5 sd corners.
    {
        GaussianLaw lx = d > 0 ? ou_conditional_moments(m, 0.0, m.x0, m.T) : GaussianLaw{};
        Vec sd = d > 0 ? Vec(lx.cov.diagonal().cwiseSqrt()) : Vec();
        Vec s_hi = m.s0, s_lo = m.s0;
        if (n > 0) {
            const Mat ss = m.sigma * m.sigma.transpose();
            for (int i = 0; i < n; ++i) {
                const double w = 5.0 * std::sqrt(ss(i, i) * m.T);
                s_hi[i] *= std::exp(w);
                s_lo[i] *= std::exp(-w);
            }
        }
        const double g0 = f.grad_x(m.s0, m.x0).norm();
        double gmax = g0;
        if (d > 0) {
            gmax = std::max(gmax, f.grad_x(s_hi, Vec(lx.mean + 5.0 * sd)).norm());
            gmax = std::max(gmax, f.grad_x(s_lo, Vec(lx.mean - 5.0 * sd)).norm());
        }
        if (gmax > opt.growth_probe_factor * (1.0 + g0))
            throw validation_error("expand_gradients: factor gradient fails the bounded probe");
    }

    PathSet ps = simulate_paths(m, Measure::MinimalMartingale, opt.outer_paths, opt.steps, opt.seed);
    const double dt = ps.dt();
    Mat beta_t = m.beta.transpose();
    const double sg = (side == Side::Buy ? 1.0 : -1.0) * gamma;

    std::vector<std::unique_ptr<OneShotGradient>> osgs(static_cast<std::size_t>(opt.steps));
    for (int k = 0; k < opt.steps; ++k)
        osgs[static_cast<std::size_t>(k)] = std::make_unique<OneShotGradient>(m, ps.times[k]);
    Vec head(d);
    if (d > 0) {
        const Vec g0 = osgs[0]->estimate(f, m.s0, m.x0, std::max<std::size_t>(2048, opt.inner_paths),
                                         opt.seed, node_salt(0, 0, 2));
        head = beta_t * g0.tail(d);
    }

    Mat est(static_cast<Eigen::Index>(opt.outer_paths), dim);
    parallel_for(opt.outer_paths, [&](std::size_t lo, std::size_t hi) {
        Vec s(n), x(d), gx(d), gs(n);
        for (std::size_t p = lo; p < hi; ++p) {
            double integral = 0.0;
            for (int k = 0; k < opt.steps; ++k) {
                Vec bg;
                if (k == 0) {
                    bg = head;
                } else {
                    const double* st = ps.state(p, k);
                    for (int i = 0; i < n; ++i) s[i] = st[i];
                    for (int i = 0; i < d; ++i) x[i] = st[n + i];
                    const Vec g = osgs[static_cast<std::size_t>(k)]->estimate(
                        f, s, x, opt.inner_paths, opt.seed, node_salt(k, p, 0));
                    bg = beta_t * g.tail(d);
                }
                const double* dw = ps.increment(p, k);
                for (int i = 0; i < d; ++i) integral += bg[i] * dw[n + i];
            }
            const double* st = ps.state(p, opt.steps);
            for (int i = 0; i < n; ++i) s[i] = st[i];
            for (int i = 0; i < d; ++i) x[i] = st[n + i];
            gx = f.grad_x(s, x);
            gs = f.grad_s(s, x);
            const double w = 1.0 - sg * integral;
            for (int i = 0; i < n; ++i)
                est(static_cast<Eigen::Index>(p), i) = gs[i] * (s[i] / m.s0[i]) * w;
            for (int i = 0; i < d; ++i)
                est(static_cast<Eigen::Index>(p), n + i) =
                    std::exp(-m.alpha[i] * m.T) * gx[i] * w;
        }
    });

    GradientExpansion out;
    out.gamma = gamma;
    out.side = side == Side::Buy ? +1 : -1;
    out.gradient = Vec(dim);
    out.se = Vec(dim);
    for (int j = 0; j < dim; ++j) {
        std::vector<double> col(opt.outer_paths);
        for (std::size_t p = 0; p < opt.outer_paths; ++p)
            col[p] = est(static_cast<Eigen::Index>(p), j);
        const McEstimate e = summarize(col);
        out.gradient[j] = e.value;
        out.se[j] = e.se;
    }
    return out;
}

McEstimate price_lower_bound(const MarketModel& m, const Payoff& f, double gamma,
                             const PriceOptions& opt) {
    validate(m);
    if (gamma < 0.0) throw validation_error("price_lower_bound: gamma must be nonnegative");
    if (gamma == 0.0) return price_mmm(m, f, opt);
    if (opt.prefer_quadrature && m.dim() <= 2 && f.smoothness == Smoothness::SmoothC3) {
        const double fref = f(m.s0, m.x0);
        Payoff wrapped;
        wrapped.value = [&f, gamma, fref](const Vec& s, const Vec& x) {
            return std::exp(-gamma * (f.value(s, x) - fref));
        };
        wrapped.smoothness = Smoothness::SmoothC3;
        wrapped.name = f.name + "~exp";
        const McEstimate e = price_mmm(m, wrapped, opt);
        return {fref - std::log(e.value) / gamma, 0.0, e.samples};
    }
    SimOptions so;
    so.antithetic = opt.antithetic;
    PathSet ps = simulate_paths(m, Measure::MinimalMartingale, opt.paths, std::max(1, opt.steps),
                                opt.seed, so);
    std::vector<double> fv(opt.paths);
    parallel_for(opt.paths, [&](std::size_t lo, std::size_t hi) {
        Vec s(m.n()), x(m.d());
        for (std::size_t p = lo; p < hi; ++p) {
            const double* st = ps.state(p, ps.steps);
            for (int i = 0; i < m.n(); ++i) s[i] = st[i];
            for (int i = 0; i < m.d(); ++i) x[i] = st[m.n() + i];
            fv[p] = f.value(s, x);
        }
    });
    std::size_t bad = 0;
    double shift = -std::numeric_limits<double>::infinity();
    for (double v : fv)
        if (std::isfinite(v)) shift = std::max(shift, -gamma * v);
    std::vector<double> ev;
    ev.reserve(opt.paths);
    for (double v : fv) {
        if (std::isfinite(v))
            ev.push_back(std::exp(-gamma * v - shift));
        else
            ++bad;
    }
    if (static_cast<double>(bad) > opt.max_bad_fraction * static_cast<double>(opt.paths))
        throw numerical_error("price_lower_bound: too many non-finite payoff samples");
    if (opt.antithetic) {
        std::vector<double> pairs;
        pairs.reserve(ev.size() / 2);
        for (std::size_t i = 0; i + 1 < ev.size(); i += 2)
            pairs.push_back(0.5 * (ev[i] + ev[i + 1]));
        ev.swap(pairs);
    }
    const McEstimate e = summarize(ev);
    McEstimate out;
    out.value = -(shift + std::log(e.value)) / gamma;
    out.se = e.se / (gamma * e.value);
    out.samples = opt.paths - bad;
    return out;
}

double BoundLink::slack(double tol) const {
    return margin() + tol + 3.0 * std::sqrt(lo_se * lo_se + hi_se * hi_se);
}

BoundReport make_bound_report(std::vector<BoundLink> links, double tol) {
    BoundReport r;
    r.links = std::move(links);
    r.tol = tol;
    r.ok = true;
    for (const auto& l : r.links)
        if (!(l.slack(tol) >= 0.0)) r.ok = false;
    return r;
}

std::string BoundReport::to_string() const {
    std::ostringstream os;
    for (const auto& l : links)
        os << l.name << ": lo=" << format_full(l.lo) << " hi=" << format_full(l.hi)
           << " margin=" << format_full(l.margin()) << (l.slack(tol) >= 0.0 ? " ok" : " VIOLATED")
           << "\n";
    os << (ok ? "bounds hold" : "bounds violated") << " (tol " << format_full(tol) << ")\n";
    return os.str();
}

} // namespace uip
