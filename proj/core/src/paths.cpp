#include "uip/paths.hpp"

#include "uip/rng.hpp"
#include "uip/threading.hpp"

#include <cmath>
#include <ostream>

namespace uip {

PathSet simulate_paths(const MarketModel& m, Measure measure, std::size_t paths, int steps,
                       std::uint64_t seed, const SimOptions& options) {
    validate(m);
    if (paths < 1) throw validation_error("simulate_paths: need at least one path");
    if (steps < 1) throw validation_error("simulate_paths: need at least one step");
    if (measure == Measure::Controlled && !options.control)
        throw validation_error("simulate_paths: Controlled measure needs a control function");
    if (options.antithetic && paths % 2 != 0)
        throw validation_error("simulate_paths: antithetic sampling needs an even path count");

    const int n = m.n(), d = m.d(), dim = n + d;
    State start = options.start.value_or(State{0.0, m.s0, m.x0});
    if (start.s.size() != n || start.x.size() != d)
        throw validation_error("simulate_paths: start state has wrong shape");
    if (!(start.t >= 0.0 && start.t < m.T))
        throw validation_error("simulate_paths: start time outside [0, T)");

    PathSet ps;
    ps.n = n;
    ps.d = d;
    ps.measure = measure;
    ps.seed = seed;
    ps.antithetic = options.antithetic;
    ps.paths = paths;
    ps.steps = steps;
    const double h = (m.T - start.t) / steps;
    ps.times = Vec(steps + 1);
    for (int k = 0; k <= steps; ++k) ps.times[k] = start.t + k * h;
    ps.states.resize(paths * (steps + 1) * dim);
    ps.increments.resize(paths * static_cast<std::size_t>(steps) * dim);

    const Mat ss = m.sigma * m.sigma.transpose();
    Vec log_drift(n);
    for (int i = 0; i < n; ++i)
        log_drift[i] = ((measure == Measure::Physical ? m.mu[i] : 0.0) - 0.5 * ss(i, i)) * h;
    const double sqh = std::sqrt(h);

    // Exact OU pieces; only the b-integral varies along the grid.
    std::vector<OuStep> ou(1, ou_step(m, start.t, h));
    if (m.b) {
        ou.resize(steps);
        for (int k = 1; k < steps; ++k) ou[k] = ou_step(m, ps.times[k], h);
    }
    const Mat cross_over_h = h > 0.0 ? Mat(ou[0].cross / h) : Mat::Zero(d, d);

    // Draw layout per path and step: n traded increments, d factor
    // increments, d residual draws for the exact transition.
    const std::uint64_t per_step = static_cast<std::uint64_t>(n) + 2 * d;

    parallel_for(paths, [&](std::size_t lo, std::size_t hi) {
        Vec z(n), zx(d), zr(d), dws(n), dwx(d), s(n), x(d), xn(d), delta(d);
        for (std::size_t p = lo; p < hi; ++p) {
            const std::uint64_t stream = options.antithetic ? p / 2 : p;
            const double sign = (options.antithetic && p % 2 == 1) ? -1.0 : 1.0;
            Philox gen(seed, stream);
            s = start.s;
            x = start.x;
            double* out = ps.state(p, 0);
            for (int i = 0; i < n; ++i) out[i] = s[i];
            for (int i = 0; i < d; ++i) out[n + i] = x[i];
            for (int k = 0; k < steps; ++k) {
                const std::uint64_t base = per_step * k;
                for (int i = 0; i < n; ++i) z[i] = sign * gen.normal(base + i);
                for (int i = 0; i < d; ++i) zx[i] = sign * gen.normal(base + n + i);
                dws = sqh * z;
                dwx = sqh * zx;
                double* inc = ps.increment(p, k);
                for (int i = 0; i < n; ++i) inc[i] = dws[i];
                for (int i = 0; i < d; ++i) inc[n + i] = dwx[i];

                if (n > 0) {
                    const Vec diff = m.sigma * dws;
                    for (int i = 0; i < n; ++i) s[i] *= std::exp(log_drift[i] + diff[i]);
                }
                if (d > 0) {
                    if (measure == Measure::Controlled) {
                        delta = options.control(ps.times[k], s, x);
                        xn = x + (m.drift_b(ps.times[k]) - m.alpha.cwiseProduct(x) +
                                  m.beta * delta) * h + m.beta * dwx;
                    } else {
                        const OuStep& st = ou[m.b ? k : 0];
                        for (int i = 0; i < d; ++i) zr[i] = sign * gen.normal(base + n + d + i);
                        xn = st.decay.cwiseProduct(x) + st.mean_b + cross_over_h * dwx +
                             st.resid_l * zr;
                    }
                    x = xn;
                }
                out = ps.state(p, k + 1);
                for (int i = 0; i < n; ++i) out[i] = s[i];
                for (int i = 0; i < d; ++i) out[n + i] = x[i];
            }
        }
    });
    return ps;
}

Vec terminal_wealth(const MarketModel& m, const PathSet& ps, double v0, const StrategyFn& pi) {
    if (!pi) throw validation_error("terminal_wealth: missing strategy");
    const int n = ps.n;
    if (n != m.n()) throw validation_error("terminal_wealth: model/path mismatch");
    Vec out(ps.paths);
    const double h = ps.dt();
    parallel_for(ps.paths, [&](std::size_t lo, std::size_t hi) {
        Vec s(n), x(ps.d), dws(n);
        for (std::size_t p = lo; p < hi; ++p) {
            double v = v0;
            for (int k = 0; k < ps.steps; ++k) {
                const double* st = ps.state(p, k);
                for (int i = 0; i < n; ++i) s[i] = st[i];
                for (int i = 0; i < ps.d; ++i) x[i] = st[n + i];
                const double* inc = ps.increment(p, k);
                for (int i = 0; i < n; ++i) dws[i] = inc[i];
                const Vec pos = pi(ps.times[k], s, x);
                v += pos.dot(m.mu * h + m.sigma * dws);
            }
            out[p] = v;
        }
    });
    return out;
}

void export_csv(const PathSet& ps, std::size_t max_paths, std::ostream& os) {
    os << "path,t";
    for (int i = 0; i < ps.n; ++i) os << ",s" << (i + 1);
    for (int i = 0; i < ps.d; ++i) os << ",x" << (i + 1);
    os << '\n';
    const std::size_t count = std::min(max_paths, ps.paths);
    for (std::size_t p = 0; p < count; ++p)
        for (int k = 0; k <= ps.steps; ++k) {
            os << p << ',' << format_full(ps.times[k]);
            const double* st = ps.state(p, k);
            for (int i = 0; i < ps.dim(); ++i) os << ',' << format_full(st[i]);
            os << '\n';
        }
}

} // namespace uip
