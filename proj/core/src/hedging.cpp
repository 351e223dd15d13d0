#include "uip/hedging.hpp"

#include "uip/rng.hpp"
#include "uip/threading.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace uip {

namespace {

double winsorized_mean(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    const std::size_t k = static_cast<std::size_t>(q * static_cast<double>(v.size()));
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
    const double cut = v[k];
    long double s = 0.0L;
    for (double x : v) s += std::max(x, cut);
    return static_cast<double>(s / v.size());
}

struct PairedGap {
    double mean = 0.0, se = 0.0;
};

PairedGap paired_gap(const std::vector<double>& a, const std::vector<double>& b, double scale_a) {
    std::vector<double> diff(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) diff[i] = scale_a * a[i] - b[i];
    const McEstimate e = summarize(diff);
    return {e.value, e.se};
}

} // namespace

StrategyFn make_strategy(const MarketModel& m, const PriceSurface* surface, double gamma,
                         StrategyKind kind) {
    validate(m);
    if (m.n() == 0) throw validation_error("make_strategy: no traded assets");
    if (kind != StrategyKind::HedgeOnly && gamma <= 0.0)
        throw validation_error("make_strategy: gamma must be positive for the Merton part");
    if (kind != StrategyKind::PureInvestment && surface == nullptr)
        throw validation_error("make_strategy: hedge strategies need a price surface");
    const int n = m.n();
    Vec pi0 = Vec::Zero(n);
    if (kind != StrategyKind::HedgeOnly) {
        const Mat ss = m.sigma * m.sigma.transpose();
        pi0 = ss.ldlt().solve(m.mu) / gamma;
    }
    if (kind == StrategyKind::PureInvestment)
        return [pi0](double, const Vec&, const Vec&) { return pi0; };

    const PriceSurface surf = *surface; // strategies may outlive the caller's surface
    const double t_max = surf.slice_times[surf.slice_times.size() - 1];
    // the buyer holds +f and hedges -s phi^b_s; the seller holds -f, whose
    // position value is -phi^s, so the hedge sign flips with the side
    const double hsign = surf.side > 0 ? 1.0 : -1.0;
    return [pi0, surf, n, t_max, hsign](double t, const Vec& s, const Vec& x) {
        Vec sc(n), xc(x.size());
        for (int i = 0; i < n; ++i) {
            const Vec& ax = surf.grid.axes[static_cast<std::size_t>(i)];
            sc[i] = std::exp(std::clamp(std::log(s[i]), ax[0], ax[ax.size() - 1]));
        }
        for (int i = 0; i < x.size(); ++i) {
            const Vec& ax = surf.grid.axes[static_cast<std::size_t>(n + i)];
            xc[i] = std::clamp(x[i], ax[0], ax[ax.size() - 1]);
        }
        const Vec g = surf.gradient_at(std::clamp(t, 0.0, t_max), sc, xc);
        Vec pi = pi0;
        for (int i = 0; i < n; ++i) pi[i] -= hsign * sc[i] * g[i];
        return pi;
    };
}

std::string IndifferenceReport::summary() const {
    std::ostringstream os;
    os << (side > 0 ? "buy" : "sell") << " gamma=" << format_full(gamma)
       << " price=" << format_full(price) << " ce_gap=" << format_full(ce_gap) << " (se "
       << format_full(ce_gap_se) << ")"
       << " shift z=(" << format_full(gap_up_z) << ", " << format_full(gap_dn_z) << ")"
       << " perturbations<=" << format_full(perturbation_z.size() ? perturbation_z.maxCoeff() : 0.0)
       << (pass ? " PASS" : " FAIL");
    return os.str();
}

IndifferenceReport verify_indifference(const MarketModel& m, const Payoff& f,
                                       const PriceSurface& surface, double price,
                                       const HedgeOptions& opt) {
    validate(m);
    const double gamma = surface.gamma;
    if (gamma <= 0.0) throw validation_error("verify_indifference: surface gamma must be positive");
    const int n = m.n(), d = m.d();
    const double sg = surface.side > 0 ? 1.0 : -1.0;

    PathSet ps = simulate_paths(m, Measure::Physical, opt.paths, opt.steps, opt.seed);
    const StrategyFn claim_pi = make_strategy(m, &surface, gamma, StrategyKind::OptimalWithClaim);
    const StrategyFn base_pi = make_strategy(m, nullptr, gamma, StrategyKind::PureInvestment);

    const Vec v_claim = terminal_wealth(m, ps, opt.v0, claim_pi);
    const Vec v_base = terminal_wealth(m, ps, opt.v0, base_pi);

    std::vector<double> u_claim(opt.paths), u_base(opt.paths);
    {
        std::vector<double> fv(opt.paths);
        parallel_for(opt.paths, [&](std::size_t lo, std::size_t hi) {
            Vec s(n), x(d);
            for (std::size_t p = lo; p < hi; ++p) {
                const double* st = ps.state(p, ps.steps);
                for (int i = 0; i < n; ++i) s[i] = st[i];
                for (int i = 0; i < d; ++i) x[i] = st[n + i];
                fv[p] = f.value(s, x);
            }
        });
        for (std::size_t p = 0; p < opt.paths; ++p) {
            if (!std::isfinite(fv[p]))
                throw numerical_error("verify_indifference: non-finite payoff sample");
            u_claim[p] = -std::exp(-gamma * (v_claim[static_cast<Eigen::Index>(p)] +
                                             sg * (fv[p] - price)));
            u_base[p] = -std::exp(-gamma * v_base[static_cast<Eigen::Index>(p)]);
        }
    }

    IndifferenceReport r;
    r.gamma = gamma;
    r.side = surface.side;
    r.price = price;
    r.paths = opt.paths;
    r.steps = opt.steps;
    r.claim_utility = summarize(u_claim).value;
    r.base_utility = summarize(u_base).value;
    r.claim_utility_winsor = winsorized_mean(u_claim, opt.winsor_q);
    r.base_utility_winsor = winsorized_mean(u_base, opt.winsor_q);

    const PairedGap g0 = paired_gap(u_claim, u_base, 1.0);
    // ln(EU_claim / EU_base) in certainty-equivalent units; first order in the gap
    r.ce_gap = -std::log(r.claim_utility / r.base_utility) / gamma;
    r.ce_gap_se = g0.se / (gamma * std::abs(r.base_utility));
    r.indifferent = std::abs(r.ce_gap) <= std::max(opt.ce_rel_tol * std::abs(price),
                                                   3.0 * r.ce_gap_se);

    // paying more must hurt a buyer (and receiving more must help a seller)
    const double up = std::exp(sg * gamma * opt.price_shift * price);
    const PairedGap gu = paired_gap(u_claim, u_base, up);
    const PairedGap gd = paired_gap(u_claim, u_base, 1.0 / up);
    r.gap_up_z = gu.mean / gu.se;
    r.gap_dn_z = gd.mean / gd.se;
    // buy: paying more pushes the gap negative; sell: receiving more, positive
    r.shifts_ok = (sg > 0 ? (r.gap_up_z < -3.0 && r.gap_dn_z > 3.0)
                          : (r.gap_up_z > 3.0 && r.gap_dn_z < -3.0));

    // bounded constant perturbations of the claim strategy must not improve
    Vec delta0 = claim_pi(0.0, m.s0, m.x0);
    const double scale = 0.25 * (delta0.norm() + 0.1) / std::sqrt(static_cast<double>(n));
    r.perturbation_z = Vec(opt.perturbations);
    for (int j = 0; j < opt.perturbations; ++j) {
        Philox rng(opt.seed ^ 0x7065727475726275ULL, static_cast<std::uint64_t>(j));
        Vec off(n);
        for (int i = 0; i < n; ++i) off[i] = scale * rng.normal(static_cast<std::uint64_t>(i));
        StrategyFn pert = [claim_pi, off](double t, const Vec& s, const Vec& x) {
            return Vec(claim_pi(t, s, x) + off);
        };
        const Vec v_pert = terminal_wealth(m, ps, opt.v0, pert);
        std::vector<double> diff(opt.paths);
        for (std::size_t p = 0; p < opt.paths; ++p) {
            const double shift = u_claim[p] * std::exp(-gamma * (v_pert[static_cast<Eigen::Index>(p)] -
                                                                 v_claim[static_cast<Eigen::Index>(p)]));
            diff[p] = shift - u_claim[p];
        }
        const McEstimate e = summarize(diff);
        r.perturbation_z[j] = e.value / e.se;
    }
    r.perturbations_ok = opt.perturbations == 0 || r.perturbation_z.maxCoeff() <= 2.0;
    r.pass = r.indifferent && r.shifts_ok && r.perturbations_ok;
    return r;
}

} // namespace uip
