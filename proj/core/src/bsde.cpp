#include "uip/mc.hpp"

#include "uip/payoff.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <functional>

namespace uip {

namespace {

std::vector<std::vector<int>> total_degree_exponents(int dim, int degree) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur(dim, 0);
    std::function<void(int, int)> rec = [&](int pos, int left) {
        if (pos == dim) {
            out.push_back(cur);
            return;
        }
        for (int e = 0; e <= left; ++e) {
            cur[pos] = e;
            rec(pos + 1, left - e);
        }
        cur[pos] = 0;
    };
    rec(0, degree);
    return out;
}

void fill_basis_row(const std::vector<std::vector<int>>& exps, const Vec& u, int degree,
                    Mat& phi, Eigen::Index row, Mat& pw) {
    const int dim = static_cast<int>(u.size());
    for (int i = 0; i < dim; ++i) {
        pw(i, 0) = 1.0;
        for (int e = 1; e <= degree; ++e) pw(i, e) = pw(i, e - 1) * u[i];
    }
    for (std::size_t b = 0; b < exps.size(); ++b) {
        double v = 1.0;
        for (int i = 0; i < dim; ++i) v *= pw(i, exps[b][i]);
        phi(row, static_cast<Eigen::Index>(b)) = v;
    }
}

double quantile_of(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    const std::size_t k = std::min(v.size() - 1,
                                   static_cast<std::size_t>(q * static_cast<double>(v.size())));
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
    return v[k];
}

} // namespace

Vec BsdeSolution::z_at(int step, const Vec& s, const Vec& x) const {
    if (step == 0) return z0;
    if (step < 0 || step >= steps())
        throw validation_error("z_at: step index outside the regression range");
    const int dim = n + d;
    Vec u(dim);
    for (int i = 0; i < n; ++i) u[i] = std::log(s[i]);
    for (int i = 0; i < d; ++i) u[n + i] = x[i];
    u = (u - center[static_cast<std::size_t>(step)])
            .cwiseQuotient(scale[static_cast<std::size_t>(step)]);
    Mat pw(dim, basis_degree + 1);
    Mat phi(1, static_cast<Eigen::Index>(exponents.size()));
    fill_basis_row(exponents, u, basis_degree, phi, 0, pw);
    return z_coeffs[static_cast<std::size_t>(step)].transpose() * phi.row(0).transpose();
}

BsdeSolution solve_bsde(const MarketModel& m, const Payoff& f, double gamma, Side side,
                        const BsdeOptions& opt) {
    validate(m);
    if (gamma < 0.0) throw validation_error("solve_bsde: gamma must be nonnegative");
    if (opt.steps < 2) throw validation_error("solve_bsde: need at least 2 time steps");
    const int n = m.n(), d = m.d(), dim = n + d;
    const auto exps = total_degree_exponents(dim, opt.basis_degree);
    const auto nb = static_cast<Eigen::Index>(exps.size());
    if (opt.paths < 10 * exps.size())
        throw validation_error("solve_bsde: need at least 10 paths per basis function");

    PathSet ps = simulate_paths(m, Measure::MinimalMartingale, opt.paths, opt.steps, opt.seed);
    const double dt = ps.dt();
    const double ss = side == Side::Buy ? 1.0 : -1.0;
    const auto mp = static_cast<Eigen::Index>(opt.paths);

    BsdeSolution sol;
    sol.gamma = gamma;
    sol.side = side == Side::Buy ? +1 : -1;
    sol.n = n;
    sol.d = d;
    sol.basis_degree = opt.basis_degree;
    sol.times = ps.times;
    sol.exponents = exps;
    sol.center.resize(static_cast<std::size_t>(opt.steps));
    sol.scale.resize(static_cast<std::size_t>(opt.steps));
    sol.z_coeffs.resize(static_cast<std::size_t>(opt.steps));

    // trapezoid endpoint at maturity from the payoff gradient; only smooth
    // payoffs get it, kinked or spiky gradients feed the tails too hard
    const bool grad_endpoint = gamma > 0.0 && d > 0 && f.smoothness == Smoothness::SmoothC3;
    Vec y(mp), h_prev = Vec::Zero(mp);
    {
        Vec s(n), x(d);
        std::vector<double> tnorms;
        Mat zterm(mp, std::max(d, 1));
        for (Eigen::Index p = 0; p < mp; ++p) {
            const double* st = ps.state(static_cast<std::size_t>(p), opt.steps);
            for (int i = 0; i < n; ++i) s[i] = st[i];
            for (int i = 0; i < d; ++i) x[i] = st[n + i];
            y[p] = f.value(s, x);
            if (!std::isfinite(y[p]))
                throw numerical_error("solve_bsde: non-finite terminal payoff sample");
            if (grad_endpoint) {
                zterm.row(p) = (m.beta.transpose() * f.grad_x(s, x)).transpose();
                tnorms.push_back(gamma * zterm.row(p).norm());
            }
        }
        if (grad_endpoint) {
            const double mt = std::min(opt.trunc_cap,
                                       opt.trunc_factor * quantile_of(tnorms, opt.trunc_quantile));
            sol.m_trunc = std::max(sol.m_trunc, mt);
            for (Eigen::Index p = 0; p < mp; ++p)
                h_prev[p] = truncated_hamiltonian(zterm.row(p).transpose(), gamma, mt).value;
        }
    }
    // indifference values inherit the payoff range (adding a constant shifts
    // the price by the constant); clamping fits to the sampled range padded by
    // one range width stops polynomial tail overshoot from feeding the
    // quadratic driver while leaving in-range fits alone
    const double pad = y.maxCoeff() - y.minCoeff();
    const double ylo = y.minCoeff() - pad, yhi = y.maxCoeff() + pad;

    Mat phi(mp, nb), tz(mp, dim), zx(mp, d), pw(dim, opt.basis_degree + 1);
    Vec u(dim), ty(mp), resid(mp);
    std::vector<double> norms(opt.paths);

    for (int k = opt.steps - 1; k >= 1; --k) {
        Vec mean = Vec::Zero(dim), var = Vec::Zero(dim);
        for (Eigen::Index p = 0; p < mp; ++p) {
            const double* st = ps.state(static_cast<std::size_t>(p), k);
            for (int i = 0; i < n; ++i) {
                const double v = std::log(st[i]);
                mean[i] += v;
                var[i] += v * v;
            }
            for (int i = 0; i < d; ++i) {
                mean[n + i] += st[n + i];
                var[n + i] += st[n + i] * st[n + i];
            }
        }
        mean /= static_cast<double>(mp);
        var = (var / static_cast<double>(mp) - mean.cwiseProduct(mean)).cwiseMax(1e-24);
        const Vec sd = var.cwiseSqrt();
        sol.center[static_cast<std::size_t>(k)] = mean;
        sol.scale[static_cast<std::size_t>(k)] = sd;

        for (Eigen::Index p = 0; p < mp; ++p) {
            const double* st = ps.state(static_cast<std::size_t>(p), k);
            for (int i = 0; i < n; ++i) u[i] = (std::log(st[i]) - mean[i]) / sd[i];
            for (int i = 0; i < d; ++i) u[n + i] = (st[n + i] - mean[n + i]) / sd[n + i];
            fill_basis_row(exps, u, opt.basis_degree, phi, p, pw);
        }

        Mat g = Mat::Zero(nb, nb);
        g.selfadjointView<Eigen::Lower>().rankUpdate(phi.transpose(), 1.0);
        g /= static_cast<double>(mp);
        g.diagonal().array() += opt.ridge;
        Eigen::LDLT<Mat> ldlt(g); // reads the lower triangle only
        if (ldlt.info() != Eigen::Success)
            throw numerical_error("solve_bsde: singular regression at step " + std::to_string(k));

        // centering the Z target on the fitted conditional mean removes the
        // O(1) variance of y dW/dt without moving its conditional expectation
        const Vec cy0 = ldlt.solve(phi.transpose() * y / static_cast<double>(mp));
        resid.noalias() = y - phi * cy0;
        for (Eigen::Index p = 0; p < mp; ++p) {
            const double* dw = ps.increment(static_cast<std::size_t>(p), k);
            for (int j = 0; j < dim; ++j) tz(p, j) = resid[p] * dw[j] / dt;
        }

        const Mat cz = ldlt.solve(phi.transpose() * tz / static_cast<double>(mp));
        sol.z_coeffs[static_cast<std::size_t>(k)] = cz;
        zx.noalias() = phi * cz.rightCols(d);

        double mk = 0.0;
        if (gamma > 0.0 && d > 0) {
            for (Eigen::Index p = 0; p < mp; ++p)
                norms[static_cast<std::size_t>(p)] = gamma * zx.row(p).norm();
            mk = std::min(opt.trunc_cap,
                          opt.trunc_factor * quantile_of(norms, opt.trunc_quantile));
            sol.m_trunc = std::max(sol.m_trunc, mk);
        }
        // trapezoidal driver over [t_k, t_{k+1}] using the previous step's
        // per-path driver values; the last interval is a rectangle when the
        // maturity endpoint is unavailable
        const bool rect = k == opt.steps - 1 && !grad_endpoint;
        for (Eigen::Index p = 0; p < mp; ++p) {
            double h = 0.0;
            if (gamma > 0.0 && d > 0)
                h = truncated_hamiltonian(zx.row(p).transpose(), gamma, mk).value;
            ty[p] = y[p] - ss * (rect ? h : 0.5 * (h + h_prev[p])) * dt;
            h_prev[p] = h;
        }
        const Vec cy = ldlt.solve(phi.transpose() * ty / static_cast<double>(mp));
        y.noalias() = phi * cy;
        if (!y.allFinite())
            throw numerical_error("solve_bsde: non-finite regression at step " + std::to_string(k));
        Eigen::Index clamped = 0;
        for (Eigen::Index p = 0; p < mp; ++p) {
            if (y[p] < ylo || y[p] > yhi) {
                y[p] = std::clamp(y[p], ylo, yhi);
                ++clamped;
            }
        }
        if (clamped * 4 > mp)
            throw numerical_error("solve_bsde: value fit left the payoff range at step " +
                                  std::to_string(k));
    }

    Vec z0 = Vec::Zero(dim);
    const double ybar = y.mean();
    for (Eigen::Index p = 0; p < mp; ++p) {
        const double* dw = ps.increment(static_cast<std::size_t>(p), 0);
        for (int j = 0; j < dim; ++j) z0[j] += (y[p] - ybar) * dw[j] / dt;
    }
    z0 /= static_cast<double>(mp);
    sol.z0 = z0;
    double h0 = 0.0;
    if (gamma > 0.0 && d > 0) {
        const double m0 = std::min(opt.trunc_cap, opt.trunc_factor * gamma * z0.tail(d).norm());
        h0 = truncated_hamiltonian(z0.tail(d), gamma, std::max(m0, sol.m_trunc)).value;
    }
    McEstimate e = summarize(std::vector<double>(y.data(), y.data() + mp));
    sol.y0 = e.value - ss * 0.5 * (h0 + h_prev.mean()) * dt;
    sol.y0_se = e.se;
    if (!std::isfinite(sol.y0)) throw numerical_error("solve_bsde: non-finite value at time zero");
    return sol;
}

} // namespace uip
