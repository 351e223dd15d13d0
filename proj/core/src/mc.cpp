#include "uip/mc.hpp"

#include "uip/quadrature.hpp"
#include "uip/rng.hpp"
#include "uip/threading.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <atomic>
#include <cmath>

namespace uip {

namespace {

Mat psd_sqrt(const Mat& a) {
    if (a.rows() == 0) return a;
    Eigen::SelfAdjointEigenSolver<Mat> es(a);
    Vec lam = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * lam.cwiseSqrt().asDiagonal();
}

double quad_price(const MarketModel& m, const Payoff& f, int nodes) {
    const int n = m.n(), d = m.d(), dim = n + d;
    Vec mean(dim);
    Mat cov = Mat::Zero(dim, dim);
    if (n > 0) {
        GaussianLaw lt = traded_log_law(m, m.s0, m.T, Measure::MinimalMartingale);
        mean.head(n) = lt.mean;
        cov.topLeftCorner(n, n) = lt.cov;
    }
    if (d > 0) {
        GaussianLaw lx = ou_conditional_moments(m, 0.0, m.x0, m.T);
        mean.tail(d) = lx.mean;
        cov.bottomRightCorner(d, d) = lx.cov;
    }
    const Mat l = psd_sqrt(cov);
    const QuadRule& q = gauss_hermite(nodes);
    const double norm = std::pow(M_PI, -0.5 * dim);
    Vec u(dim), y(dim), s(n), x(d);
    long double acc = 0.0L;
    const int nj = dim == 2 ? nodes : 1;
    for (int i = 0; i < nodes; ++i) {
        for (int j = 0; j < nj; ++j) {
            u[0] = q.nodes[i];
            double w = q.weights[i];
            if (dim == 2) {
                u[1] = q.nodes[j];
                w *= q.weights[j];
            }
            y = mean + std::sqrt(2.0) * (l * u);
            for (int k = 0; k < n; ++k) s[k] = std::exp(y[k]);
            for (int k = 0; k < d; ++k) x[k] = y[n + k];
            const double fv = f.value(s, x);
            if (!std::isfinite(fv)) throw numerical_error("price_mmm: payoff not finite at quadrature node");
            acc += static_cast<long double>(w) * fv;
        }
    }
    return static_cast<double>(acc) * norm;
}

} // namespace

McEstimate summarize(const std::vector<double>& v) {
    if (v.empty()) throw validation_error("summarize: empty sample");
    long double s = 0.0L, s2 = 0.0L;
    for (double x : v) {
        s += x;
        s2 += static_cast<long double>(x) * x;
    }
    const double mn = static_cast<double>(s / v.size());
    const double var = std::max(0.0, static_cast<double>(s2 / v.size()) - mn * mn);
    McEstimate e;
    e.value = mn;
    e.se = v.size() > 1 ? std::sqrt(var / (v.size() - 1)) : 0.0;
    e.samples = v.size();
    return e;
}

McEstimate price_mmm(const MarketModel& m, const Payoff& f, const PriceOptions& opt) {
    validate(m);
    if (opt.paths == 0) throw validation_error("price_mmm: paths must be positive");
    if (opt.prefer_quadrature && m.dim() <= 2 && f.smoothness == Smoothness::SmoothC3) {
        McEstimate e;
        e.value = quad_price(m, f, opt.quad_nodes);
        e.se = 0.0;
        e.samples = static_cast<std::size_t>(std::pow(opt.quad_nodes, m.dim()));
        return e;
    }
    SimOptions so;
    so.antithetic = opt.antithetic;
    PathSet ps = simulate_paths(m, Measure::MinimalMartingale, opt.paths,
                                std::max(1, opt.steps), opt.seed, so);
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
    std::vector<double> kept;
    kept.reserve(opt.paths);
    std::size_t bad = 0;
    if (opt.antithetic) {
        for (std::size_t p = 0; p + 1 < opt.paths; p += 2) {
            if (std::isfinite(fv[p]) && std::isfinite(fv[p + 1]))
                kept.push_back(0.5 * (fv[p] + fv[p + 1]));
            else
                bad += 2;
        }
    } else {
        for (double v : fv) {
            if (std::isfinite(v))
                kept.push_back(v);
            else
                ++bad;
        }
    }
    if (static_cast<double>(bad) > opt.max_bad_fraction * static_cast<double>(opt.paths))
        throw numerical_error("price_mmm: " + std::to_string(bad) + " non-finite payoff samples");
    if (kept.empty()) throw numerical_error("price_mmm: no usable samples");
    McEstimate e = summarize(kept);
    e.samples = opt.paths - bad;
    return e;
}

Vec weight_process(const MarketModel& m, const PathSet& ps, std::size_t path, int step) {
    if (step <= 0 || step > ps.steps)
        throw validation_error("weight_process: step must be in [1, steps]");
    const int n = m.n(), d = m.d();
    const Mat sigma_inv_t = m.sigma.inverse().transpose();
    const Mat beta_inv_t = d > 0 ? Mat(m.beta.transpose().inverse()) : Mat(0, 0);
    const double tau = ps.times[step] - ps.times[0];
    Vec w(n + d);
    Vec dws = Vec::Zero(n);
    Vec wx = Vec::Zero(d);
    for (int j = 0; j < step; ++j) {
        const double* dw = ps.increment(path, j);
        for (int i = 0; i < n; ++i) dws[i] += dw[i];
        if (d > 0) {
            Vec v = beta_inv_t * Eigen::Map<const Vec>(dw + n, d);
            const double u = ps.times[j] - ps.times[0];
            for (int i = 0; i < d; ++i) wx[i] += std::exp(-m.alpha[i] * u) * v[i];
        }
    }
    const double* s0 = ps.state(path, 0);
    Vec ws = sigma_inv_t * dws;
    for (int i = 0; i < n; ++i) w[i] = ws[i] / (s0[i] * tau);
    for (int i = 0; i < d; ++i) w[n + i] = wx[i] / tau;
    return w;
}

WeightedGradient malliavin_gradient(const MarketModel& m, const Payoff& f, double gamma,
                                    Side side, const BsdeSolution* z_source,
                                    const MalliavinOptions& opt) {
    validate(m);
    int steps = opt.steps;
    if (gamma > 0.0) {
        if (!z_source)
            throw validation_error("malliavin_gradient: gamma > 0 needs a BSDE Z source");
        if (z_source->gamma != gamma || z_source->side != (side == Side::Buy ? +1 : -1))
            throw validation_error("malliavin_gradient: Z source solved for different gamma or side");
        steps = z_source->steps();
    }
    const int n = m.n(), d = m.d(), dim = n + d;
    PathSet ps = simulate_paths(m, Measure::MinimalMartingale, opt.paths, steps, opt.seed);
    const double dt = ps.dt();
    const double ss = side == Side::Buy ? 1.0 : -1.0;
    const Mat sigma_inv_t = m.sigma.inverse().transpose();
    const Mat beta_inv_t = d > 0 ? Mat(m.beta.transpose().inverse()) : Mat(0, 0);

    std::atomic<bool> bad{false};
    Mat est(static_cast<Eigen::Index>(opt.paths), dim);
    std::vector<Vec> decays(static_cast<std::size_t>(steps));
    for (int j = 0; j < steps; ++j) {
        Vec dj(d);
        for (int i = 0; i < d; ++i) dj[i] = std::exp(-m.alpha[i] * (ps.times[j] - ps.times[0]));
        decays[static_cast<std::size_t>(j)] = dj;
    }

    parallel_for(opt.paths, [&](std::size_t lo, std::size_t hi) {
        Vec s(n), x(d), dws(n), wx(d), nk(dim), intg(dim), v(d);
        for (std::size_t p = lo; p < hi; ++p) {
            dws.setZero();
            wx.setZero();
            intg.setZero();
            for (int k = 1; k <= steps; ++k) {
                const double* dw = ps.increment(p, k - 1);
                for (int i = 0; i < n; ++i) dws[i] += dw[i];
                if (d > 0) {
                    v.noalias() = beta_inv_t * Eigen::Map<const Vec>(dw + n, d);
                    wx += decays[static_cast<std::size_t>(k - 1)].cwiseProduct(v);
                }
                const double tau = ps.times[k] - ps.times[0];
                const double* st0 = ps.state(p, 0);
                Vec wsv = sigma_inv_t * dws;
                for (int i = 0; i < n; ++i) nk[i] = wsv[i] / (st0[i] * tau);
                for (int i = 0; i < d; ++i) nk[n + i] = wx[i] / tau;
                const double* st = ps.state(p, k);
                if (k < steps && gamma > 0.0 && d > 0) {
                    for (int i = 0; i < n; ++i) s[i] = st[i];
                    for (int i = 0; i < d; ++i) x[i] = st[n + i];
                    const Vec z = z_source->z_at(k, s, x);
                    const double h =
                        truncated_hamiltonian(z.tail(d), gamma, z_source->m_trunc).value;
                    intg += h * dt * nk;
                }
                if (k == steps) {
                    for (int i = 0; i < n; ++i) s[i] = st[i];
                    for (int i = 0; i < d; ++i) x[i] = st[n + i];
                    const double fv = f.value(s, x);
                    if (!std::isfinite(fv)) bad.store(true, std::memory_order_relaxed);
                    est.row(static_cast<Eigen::Index>(p)) = (fv * nk - ss * intg).transpose();
                }
            }
        }
    });

    if (bad.load()) throw numerical_error("malliavin_gradient: non-finite payoff sample");
    WeightedGradient g;
    g.gradient = Vec(dim);
    g.se = Vec(dim);
    for (int j = 0; j < dim; ++j) {
        std::vector<double> col(opt.paths);
        for (std::size_t p = 0; p < opt.paths; ++p)
            col[p] = est(static_cast<Eigen::Index>(p), j);
        McEstimate e = summarize(col);
        g.gradient[j] = e.value;
        g.se[j] = e.se;
    }
    return g;
}

OneShotGradient::OneShotGradient(const MarketModel& m, double t) : model_(m), t_(t) {
    validate(m);
    if (!(t >= 0.0) || t >= m.T)
        throw validation_error("OneShotGradient: need 0 <= t < T");
    tau_ = m.T - t;
    const int n = m.n(), d = m.d();
    if (n > 0) {
        sigma_inv_t_ = m.sigma.inverse().transpose();
        const Mat ss = m.sigma * m.sigma.transpose();
        log_drift_ = -0.5 * ss.diagonal() * tau_;
        chol_s_ = m.sigma * std::sqrt(tau_);
    }
    if (d > 0) {
        const OuStep st = ou_step(m, t, tau_);
        decay_ = st.decay;
        mean_b_ = st.mean_b;
        noise_l_ = st.full_l;
        const Mat v = st.full_l * st.full_l.transpose();
        Eigen::LDLT<Mat> ldlt(v);
        if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any())
            throw validation_error("OneShotGradient: factor noise covariance is singular");
        stein_ = decay_.asDiagonal() * ldlt.solve(noise_l_);
    }
}

Vec OneShotGradient::estimate(const Payoff& f, const Vec& s, const Vec& x, std::size_t paths,
                              std::uint64_t seed, std::uint64_t stream_salt) const {
    const int n = model_.n(), d = model_.d(), dim = n + d;
    const std::uint64_t eff =
        stream_salt == 0 ? seed : fnv1a(&stream_salt, sizeof(stream_salt), seed);
    Vec zs(n), zx(d), st(n), xt(d), acc = Vec::Zero(dim), w(dim), ls(n), nx(d);
    const double rst = 1.0 / std::sqrt(tau_);
    for (std::size_t p = 0; p < paths; ++p) {
        Philox rng(eff, p);
        for (int i = 0; i < n; ++i) zs[i] = rng.normal(static_cast<std::uint64_t>(i));
        for (int i = 0; i < d; ++i) zx[i] = rng.normal(static_cast<std::uint64_t>(n + i));
        if (n > 0) {
            ls.noalias() = chol_s_ * zs;
            for (int i = 0; i < n; ++i) st[i] = s[i] * std::exp(log_drift_[i] + ls[i]);
            w.head(n) = (sigma_inv_t_ * zs).cwiseQuotient(s) * rst;
        }
        if (d > 0) {
            nx.noalias() = noise_l_ * zx;
            xt = decay_.cwiseProduct(x) + mean_b_ + nx;
            w.tail(d).noalias() = stein_ * zx;
        }
        const double fv = f.value(st, xt);
        if (!std::isfinite(fv))
            throw numerical_error("OneShotGradient: non-finite payoff sample");
        acc += fv * w;
    }
    return acc / static_cast<double>(paths);
}

double OneShotGradient::estimate_value(const Payoff& f, const Vec& s, const Vec& x,
                                       std::size_t paths, std::uint64_t seed,
                                       std::uint64_t stream_salt) const {
    const int n = model_.n(), d = model_.d();
    const std::uint64_t eff =
        stream_salt == 0 ? seed : fnv1a(&stream_salt, sizeof(stream_salt), seed);
    Vec zs(n), zx(d), st(n), xt(d), ls(n), nx(d);
    long double acc = 0.0L;
    for (std::size_t p = 0; p < paths; ++p) {
        Philox rng(eff, p);
        for (int i = 0; i < n; ++i) zs[i] = rng.normal(static_cast<std::uint64_t>(i));
        for (int i = 0; i < d; ++i) zx[i] = rng.normal(static_cast<std::uint64_t>(n + i));
        if (n > 0) {
            ls.noalias() = chol_s_ * zs;
            for (int i = 0; i < n; ++i) st[i] = s[i] * std::exp(log_drift_[i] + ls[i]);
        }
        if (d > 0) {
            nx.noalias() = noise_l_ * zx;
            xt = decay_.cwiseProduct(x) + mean_b_ + nx;
        }
        const double fv = f.value(st, xt);
        if (!std::isfinite(fv))
            throw numerical_error("OneShotGradient: non-finite payoff sample");
        acc += fv;
    }
    return static_cast<double>(acc / paths);
}

} // namespace uip
