#include "uip/power.hpp"

#include "uip/quadrature.hpp"
#include "uip/rng.hpp"
#include "uip/threading.hpp"

#include <atomic>
#include <cmath>

namespace uip {

namespace {

Mat psd_sqrt3(const Mat& a) {
    Eigen::SelfAdjointEigenSolver<Mat> es(a);
    Vec lam = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * lam.cwiseSqrt().asDiagonal();
}

bool is_diagonal(const Mat& a) {
    const double scale = a.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            if (i != j && std::abs(a(i, j)) > 1e-14 * scale) return false;
    return true;
}

struct PsiRaw {
    double p1 = 0.0, p2 = 0.0;       // psi1, psi2
    double mz1 = 0.0, mz2 = 0.0;     // d/d mz
    double mc1 = 0.0, mc2 = 0.0;     // d/d mc
};

double gaussian_pdf(double v, double mean, double var) {
    const double u = v - mean;
    return std::exp(-0.5 * u * u / var) / std::sqrt(2.0 * M_PI * var);
}

// Integrals over the joint law of z = C1_T - D_T and c = C2_T (independent
// Gaussians for diagonal beta). Panels split at the scarcity kinks shifted
// into each axis and at z = 0; Gauss-Legendre against the explicit density
// converges exponentially on each smooth piece.
PsiRaw psi_integrals(const ScarcityFunction& g, double mz, double vz, double mc, double vc,
                     int nodes, double tail) {
    const double sdz = std::sqrt(vz), sdc = std::sqrt(vc);
    const double clo = mc - tail * sdc, chi = mc + tail * sdc;
    const double zlo = mz - tail * sdz, zhi = mz + tail * sdz;

    // inner integral at fixed z: (E_c[g(z+c)], E_c[g(z+c)(c-mc)/vc])
    auto inner = [&](double z, double& gv, double& gm) {
        std::vector<double> edges{clo};
        for (double k : g.kinks) {
            const double cstar = k - z;
            if (cstar > clo && cstar < chi) edges.push_back(cstar);
        }
        edges.push_back(chi);
        std::sort(edges.begin(), edges.end());
        const int panels = static_cast<int>(edges.size()) - 1;
        const int per = std::max(4, nodes / panels);
        const QuadRule& r = gauss_legendre(per);
        gv = 0.0;
        gm = 0.0;
        for (int q = 0; q < panels; ++q) {
            const double a = edges[static_cast<std::size_t>(q)];
            const double b = edges[static_cast<std::size_t>(q) + 1];
            const double h = 0.5 * (b - a), mid = 0.5 * (a + b);
            for (int i = 0; i < per; ++i) {
                const double c = mid + h * r.nodes[i];
                const double w = h * r.weights[i] * gaussian_pdf(c, mc, vc);
                const double val = g.g(z + c);
                gv += w * val;
                gm += w * val * (c - mc) / vc;
            }
        }
    };

    std::vector<double> zedges{zlo};
    if (0.0 > zlo && 0.0 < zhi) zedges.push_back(0.0);
    zedges.push_back(zhi);
    const int zpanels = static_cast<int>(zedges.size()) - 1;
    const int zper = std::max(4, nodes / zpanels);
    const QuadRule& zr = gauss_legendre(zper);

    PsiRaw out;
    for (int q = 0; q < zpanels; ++q) {
        const double a = zedges[static_cast<std::size_t>(q)];
        const double b = zedges[static_cast<std::size_t>(q) + 1];
        const double h = 0.5 * (b - a), mid = 0.5 * (a + b);
        const bool neg = b <= 0.0;
        for (int i = 0; i < zper; ++i) {
            const double z = mid + h * zr.nodes[i];
            const double w = h * zr.weights[i] * gaussian_pdf(z, mz, vz);
            double gv, gm;
            inner(z, gv, gm);
            const double stein = (z - mz) / vz;
            out.p1 += w * gv;
            out.mz1 += w * gv * stein;
            out.mc1 += w * gm;
            if (neg) {
                out.p2 += w * gv;
                out.mz2 += w * gv * stein;
                out.mc2 += w * gm;
            }
        }
    }
    return out;
}

struct CondLaw {
    double mz, vz, mc, vc;
    Vec decay; // e^{-alpha tau}
};

CondLaw conditional_zc_law(const PowerModel& pm, double t, const Vec& x) {
    const double tau = pm.base.T - t;
    const GaussianLaw law = ou_conditional_moments(pm.base, t, x, tau);
    CondLaw c;
    c.mz = law.mean[0] - law.mean[2];
    c.vz = law.cov(0, 0) + law.cov(2, 2) - 2.0 * law.cov(0, 2);
    c.mc = law.mean[1];
    c.vc = law.cov(1, 1);
    const double cross = law.cov(0, 1) - law.cov(1, 2);
    if (std::abs(cross) > 1e-12 * (1.0 + std::abs(c.vz) + std::abs(c.vc)))
        throw numerical_error("power: z and c are not conditionally independent");
    c.decay = Vec(3);
    for (int i = 0; i < 3; ++i) c.decay[i] = std::exp(-pm.base.alpha[i] * tau);
    return c;
}

PsiRaw psi_gated(const PowerModel& pm, const CondLaw& law, const PsiOptions& opt) {
    PsiRaw a = psi_integrals(pm.g, law.mz, law.vz, law.mc, law.vc, opt.nodes, opt.tail_sd);
    if (opt.refine) {
        PsiRaw b =
            psi_integrals(pm.g, law.mz, law.vz, law.mc, law.vc, (3 * opt.nodes) / 2, opt.tail_sd);
        const double tol = opt.refine_tol;
        if (std::abs(a.p1 - b.p1) > tol * (1.0 + std::abs(b.p1)) ||
            std::abs(a.p2 - b.p2) > tol * (1.0 + std::abs(b.p2)))
            throw numerical_error("power: psi quadrature failed the refinement gate");
        return b;
    }
    return a;
}

} // namespace

void validate(const PowerModel& pm) {
    validate(pm.base);
    if (pm.base.n() != 2 || pm.base.d() != 3)
        throw validation_error("power: expected 2 traded spreads and 3 factors (c1, c2, demand)");
    if (!is_diagonal(pm.base.sigma) || !is_diagonal(pm.base.beta))
        throw validation_error("power: sigma and beta must be diagonal");
    validate(pm.g);
    if (pm.cap < 0.0) throw validation_error("power: cap must be nonnegative");
    if (!(pm.h1 > 0.0) || !(pm.h2 > 0.0)) throw validation_error("power: heat rates must be positive");
}

Payoff PowerModel::forward_payoff() const {
    return cap > 0.0 ? make_capped_forward_payoff(g, 2, cap) : make_forward_payoff(g, 2);
}

PowerModel aid_2fuel_preset() {
    PowerModel pm;
    MarketModel& m = pm.base;
    m.mu = Vec(2);
    m.mu << 0.05, 0.05;
    m.sigma = Mat::Zero(2, 2);
    m.sigma(0, 0) = 0.3;
    m.sigma(1, 1) = 0.4;
    m.alpha = Vec(3);
    m.alpha << 0.5, 0.5, 1.0;
    m.beta = Mat::Zero(3, 3);
    m.beta(0, 0) = 0.05;
    m.beta(1, 1) = 0.05;
    m.beta(2, 2) = 0.1;
    m.x0 = Vec(3);
    m.x0 << 0.6, 0.5, 0.75; // capacities and demand in normalized units
    m.b0 = Vec::Zero(3);    // no seasonal component in the stylized preset
    m.T = 0.5;
    m.s0 = Vec(2);
    m.s0 << 3.0, 1.0;
    pm.g = scarcity_power(10.0, 1.0);
    return pm;
}

PsiValues marginal_weights(const PowerModel& pm, double t, const Vec& x, const PsiOptions& opt) {
    validate(pm);
    if (!(t >= 0.0) || t >= pm.base.T)
        throw validation_error("marginal_weights: need 0 <= t < T");
    const CondLaw law = conditional_zc_law(pm, t, x);
    const PsiRaw r = psi_gated(pm, law, opt);
    return {r.p1, r.p2};
}

PsiDerivs marginal_weight_derivatives(const PowerModel& pm, double t, const Vec& x,
                                      const PsiOptions& opt) {
    validate(pm);
    if (!(t >= 0.0) || t > pm.base.T * (1.0 - 1e-6))
        throw validation_error("marginal_weight_derivatives: too close to maturity");
    const CondLaw law = conditional_zc_law(pm, t, x);
    const PsiRaw r = psi_gated(pm, law, opt);
    PsiDerivs d;
    d.psi1 = r.p1;
    d.psi2 = r.p2;
    d.d1 = Vec(3);
    d.d2 = Vec(3);
    d.d1 << law.decay[0] * r.mz1, law.decay[1] * r.mc1, -law.decay[2] * r.mz1;
    d.d2 << law.decay[0] * r.mz2, law.decay[1] * r.mc2, -law.decay[2] * r.mz2;
    return d;
}

McEstimate forward_p0(const PowerModel& pm, double t, const Vec& s, const Vec& x,
                      const PsiOptions& opt) {
    const PsiValues v = marginal_weights(pm, t, x, opt);
    McEstimate e;
    e.value = v.psi1 * s[0] + v.psi2 * s[1];
    e.se = 0.0;
    e.samples = static_cast<std::size_t>(opt.nodes) * static_cast<std::size_t>(opt.nodes);
    return e;
}

PsiTable build_psi_table(const PowerModel& pm, const std::vector<double>& times,
                         const std::vector<Vec>& states, const PsiOptions& opt) {
    validate(pm);
    if (times.size() != states.size())
        throw validation_error("build_psi_table: times and states must align");
    for (double t : times)
        if (!(t >= 0.0) || t > pm.base.T * (1.0 - 1e-6))
            throw validation_error("build_psi_table: nodes must satisfy 0 <= t < T");
    PsiTable tab;
    tab.times = times;
    tab.states = states;
    tab.quad = opt;
    tab.rows.resize(times.size());
    std::atomic<bool> gate_failed{false};
    parallel_for(times.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t r = b; r < e; ++r) {
            try {
                tab.rows[r] = marginal_weight_derivatives(pm, times[r], states[r], opt);
            } catch (const numerical_error&) {
                gate_failed.store(true);
            }
        }
    });
    if (gate_failed.load())
        throw numerical_error("build_psi_table: psi quadrature failed the refinement gate");
    return tab;
}

McEstimate forward_zeta(const PowerModel& pm, const ForwardZetaOptions& opt) {
    validate(pm);
    if (opt.time_nodes < 3) throw validation_error("forward_zeta: need at least 3 time nodes");
    const MarketModel& m = pm.base;
    const int K = opt.time_nodes - 1;
    const double dt = m.T / K;
    const double s1 = m.s0[0], s2 = m.s0[1];
    const double sig1 = m.sigma(0, 0), sig2 = m.sigma(1, 1);
    const Vec beta2 = m.beta.diagonal().cwiseProduct(m.beta.diagonal());

    // common standard normals across time nodes keep the integrand smooth in t
    Mat xi(3, static_cast<Eigen::Index>(opt.samples));
    for (std::size_t p = 0; p < opt.samples; ++p) {
        Philox rng(opt.seed, p);
        for (int i = 0; i < 3; ++i)
            xi(i, static_cast<Eigen::Index>(p)) = rng.normal(static_cast<std::uint64_t>(i));
    }

    std::vector<double> acc(opt.samples, 0.0);
    Vec a(3), b(3), xs(3);
    for (int k = 0; k <= K; ++k) {
        const double t = k * dt;
        const double w = (k == 0 || k == K) ? 0.5 * dt : dt;
        const double e1 = s1 * s1 * std::exp(sig1 * sig1 * t);
        const double e2 = s2 * s2 * std::exp(sig2 * sig2 * t);
        const double e12 = 2.0 * s1 * s2;

        GaussianLaw law;
        Mat l;
        if (k > 0) {
            law = ou_conditional_moments(m, 0.0, m.x0, t);
            l = psd_sqrt3(law.cov);
        }
        PsiOptions po = opt.psi;
        for (std::size_t p = 0; p < opt.samples; ++p) {
            if (k == 0)
                xs = m.x0;
            else
                xs = law.mean + l * xi.col(static_cast<Eigen::Index>(p));
            if (k < K) {
                po.refine = opt.psi.refine && p == 0; // gate once per node
                const PsiDerivs pd = marginal_weight_derivatives(pm, t, xs, po);
                a = pd.d1;
                b = pd.d2;
            } else {
                const double r = xs[0] + xs[1] - xs[2];
                const double gp = pm.g.dg(r);
                const double ind = xs[0] - xs[2] < 0.0 ? 1.0 : 0.0;
                a << gp, gp, -gp;
                b = ind * a;
            }
            double integrand = 0.0;
            for (int j = 0; j < 3; ++j)
                integrand += beta2[j] * (e1 * a[j] * a[j] + e2 * b[j] * b[j] + e12 * a[j] * b[j]);
            acc[p] += w * integrand;
            if (k == 0) break; // deterministic node, same for all samples
        }
        if (k == 0)
            for (std::size_t p = 1; p < opt.samples; ++p) acc[p] = acc[0];
    }
    return summarize(acc);
}

PowerExpansion forward_uip(const PowerModel& pm, double gamma, Side side,
                           const ForwardZetaOptions& opt) {
    if (gamma < 0.0) throw validation_error("forward_uip: gamma must be nonnegative");
    PowerExpansion e;
    e.gamma = gamma;
    e.side = side == Side::Buy ? +1 : -1;
    e.p0 = forward_p0(pm, 0.0, pm.base.s0, pm.base.x0, opt.psi).value;
    const McEstimate z = forward_zeta(pm, opt);
    e.zeta = z.value;
    e.zeta_se = z.se;
    e.price = e.p0 - (side == Side::Buy ? 1.0 : -1.0) * 0.5 * gamma * e.zeta;
    return e;
}

} // namespace uip
