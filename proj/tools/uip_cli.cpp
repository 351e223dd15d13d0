// Command-line front end: runs the configured engine and writes JSON/CSV
// artifacts whose bytes depend only on the config (timings go to stdout).
#include "uip/acceptance.hpp"
#include "uip/asymptotics.hpp"
#include "uip/config.hpp"
#include "uip/hedging.hpp"
#include "uip/mc.hpp"
#include "uip/pde.hpp"
#include "uip/power.hpp"
#include "uip/threading.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace uip;
using clock_type = std::chrono::steady_clock;

struct CliArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::vector<double> gammas;
    std::optional<std::string> out_dir;
    std::optional<unsigned> threads;
    std::optional<std::string> engine;
};

RunConfig load_with_overrides(const CliArgs& a) {
    RunConfig c = load_config(a.config_path);
    if (a.seed) c.seed = *a.seed;
    if (!a.gammas.empty()) c.gammas = a.gammas;
    if (a.out_dir) c.out_dir = *a.out_dir;
    if (a.threads) c.threads = *a.threads;
    if (a.engine) {
        if (*a.engine == "pde") c.engine.kind = EngineKind::Pde;
        else if (*a.engine == "bsde") c.engine.kind = EngineKind::Bsde;
        else if (*a.engine == "expand") c.engine.kind = EngineKind::Expand;
        else if (*a.engine == "power") c.engine.kind = EngineKind::Power;
        else throw validation_error("--engine: expected pde, bsde, expand, or power");
    }
    set_max_threads(c.threads == 0 ? std::thread::hardware_concurrency() : c.threads);
    for (const std::string& w : c.warnings) std::cout << "note: " << w << "\n";
    return c;
}

void write_artifacts(const RunConfig& c, RunReport& rep, double elapsed) {
    std::filesystem::create_directories(c.out_dir);
    const std::string stem = c.out_dir + "/" + rep.command + "_" + rep.config_hash;
    // timings vary run to run; keep the files byte-stable
    rep.elapsed_seconds = 0.0;
    std::ofstream(stem + ".json") << rep.to_json();
    std::ofstream(stem + ".csv") << rep.to_csv();
    std::printf("wrote %s.json and .csv (%.1fs)\n", stem.c_str(), elapsed);
}

RunReport make_report(const RunConfig& c, const std::string& command) {
    RunReport rep;
    rep.command = command;
    rep.config_hash = config_hash(c);
    rep.engine = engine_name(c.engine.kind);
    rep.metadata.emplace_back("payoff", c.payoff.name);
    rep.metadata.emplace_back("side", c.side == Side::Buy ? "buy" : "sell");
    rep.metadata.emplace_back("seed", std::to_string(c.seed));
    return rep;
}

Grid grid_for(const RunConfig& c) {
    const int dim = static_cast<int>(c.model.mu.size() + c.model.alpha.size());
    const std::vector<int> nodes(static_cast<std::size_t>(dim), c.engine.grid_nodes);
    return Grid::make(c.model, nodes, c.engine.time_steps, c.engine.grid_sd);
}

int cmd_price(const CliArgs& a) {
    const RunConfig c = load_with_overrides(a);
    const auto t0 = clock_type::now();
    RunReport rep = make_report(c, "price");
    const Payoff f = build_payoff(c);
    for (std::size_t i = 0; i < c.gammas.size(); ++i) {
        const double gamma = c.gammas[i];
        const std::string label = "price gamma " + std::to_string(gamma);
        const std::size_t price_idx = rep.entries.size();
        switch (c.engine.kind) {
        case EngineKind::Pde: {
            const Grid g = grid_for(c);
            const PriceSurface ps = solve_uip_pde(c.model, f, gamma, c.side, g, {});
            rep.entries.push_back({label, ps.price(), 0.0, "pde grid " +
                                   std::to_string(c.engine.grid_nodes) + "^" +
                                   std::to_string(g.dim()) + "/" +
                                   std::to_string(c.engine.time_steps)});
            std::filesystem::create_directories(c.out_dir);
            std::ofstream os(c.out_dir + "/surface_" + rep.config_hash + "_g" +
                             std::to_string(i) + ".csv");
            ps.write_csv(os);
            break;
        }
        case EngineKind::Bsde: {
            BsdeOptions bo;
            bo.paths = c.engine.paths;
            bo.steps = c.engine.time_steps;
            bo.basis_degree = c.engine.basis_degree;
            bo.seed = c.seed;
            const BsdeSolution y = solve_bsde(c.model, f, gamma, c.side, bo);
            rep.entries.push_back({label, y.y0, y.y0_se, "bsde; se covers terminal averaging only"});
            break;
        }
        case EngineKind::Expand: {
            ExpandOptions eo;
            eo.p0.paths = c.engine.paths;
            eo.p0.seed = c.seed;
            eo.zeta_opt.outer_paths = c.engine.outer_paths;
            eo.zeta_opt.inner_paths = c.engine.inner_paths;
            eo.zeta_opt.time_nodes = c.engine.time_nodes;
            eo.zeta_opt.seed = c.seed + 1;
            const AsymptoticExpansion e = expand_price(c.model, f, gamma, c.side, eo);
            rep.entries.push_back({label, e.price, e.se, "first-order expansion"});
            rep.entries.push_back({"p0 gamma " + std::to_string(gamma), e.p0, e.p0_se, ""});
            rep.entries.push_back({"zeta gamma " + std::to_string(gamma), e.zeta, e.zeta_se, ""});
            break;
        }
        case EngineKind::Power: {
            ForwardZetaOptions fz;
            fz.time_nodes = c.engine.time_nodes;
            fz.samples = c.engine.zeta_samples;
            fz.seed = c.seed;
            fz.psi.nodes = c.engine.quad_nodes;
            const PowerExpansion e = forward_uip(c.power, gamma, c.side, fz);
            rep.entries.push_back({label, e.price, 0.1 * e.zeta_se, "forward expansion"});
            rep.entries.push_back({"p0 gamma " + std::to_string(gamma), e.p0, 0.0, "quadrature"});
            rep.entries.push_back({"zeta gamma " + std::to_string(gamma), e.zeta, e.zeta_se, ""});
            break;
        }
        }
        std::printf("%s = %.8f\n", label.c_str(), rep.entries[price_idx].value);
    }
    write_artifacts(c, rep, std::chrono::duration<double>(clock_type::now() - t0).count());
    return 0;
}

int cmd_hedge(const CliArgs& a) {
    const RunConfig c = load_with_overrides(a);
    if (c.engine.kind != EngineKind::Pde)
        throw validation_error("hedge needs the pde engine (the hedge reads surface deltas)");
    const auto t0 = clock_type::now();
    RunReport rep = make_report(c, "hedge");
    const Payoff f = build_payoff(c);
    const Grid g = grid_for(c);
    for (const double gamma : c.gammas) {
        const PriceSurface ps = solve_uip_pde(c.model, f, gamma, c.side, g, {});
        const StrategyFn base = make_strategy(c.model, nullptr, gamma, StrategyKind::PureInvestment);
        const StrategyFn full = make_strategy(c.model, &ps, gamma, StrategyKind::OptimalWithClaim);
        const Vec pi0 = base(0.0, c.model.s0, c.model.x0);
        const Vec pi1 = full(0.0, c.model.s0, c.model.x0);
        rep.entries.push_back({"price gamma " + std::to_string(gamma), ps.price(), 0.0, ""});
        for (int i = 0; i < pi1.size(); ++i) {
            rep.entries.push_back({"position s" + std::to_string(i + 1) + " gamma " +
                                   std::to_string(gamma), pi1[i], 0.0, "euro amount at t=0"});
            rep.entries.push_back({"claim adjustment s" + std::to_string(i + 1) + " gamma " +
                                   std::to_string(gamma), pi1[i] - pi0[i], 0.0, ""});
        }
        std::printf("gamma %.4g: price %.8f, first position %.6f\n", gamma, ps.price(),
                    pi1.size() ? pi1[0] : 0.0);
    }
    write_artifacts(c, rep, std::chrono::duration<double>(clock_type::now() - t0).count());
    return 0;
}

int cmd_expand(const CliArgs& a) {
    CliArgs b = a;
    b.engine = "expand";
    return cmd_price(b);
}

int cmd_verify(const CliArgs& a) {
    const RunConfig c = load_with_overrides(a);
    if (c.engine.kind != EngineKind::Pde)
        throw validation_error("verify needs the pde engine (the strategy reads surface deltas)");
    const auto t0 = clock_type::now();
    RunReport rep = make_report(c, "verify");
    const Payoff f = build_payoff(c);
    const Grid g = grid_for(c);
    bool all_pass = true;
    for (const double gamma : c.gammas) {
        const PriceSurface ps = solve_uip_pde(c.model, f, gamma, c.side, g, {});
        HedgeOptions ho;
        ho.paths = c.engine.paths;
        ho.steps = c.engine.time_steps;
        ho.seed = c.seed;
        const IndifferenceReport ir = verify_indifference(c.model, f, ps, ps.price(), ho);
        all_pass = all_pass && ir.pass;
        const std::string tag = " gamma " + std::to_string(gamma);
        rep.entries.push_back({"price" + tag, ir.price, 0.0, ""});
        rep.entries.push_back({"ce gap" + tag, ir.ce_gap, ir.ce_gap_se, "certainty-equivalent units"});
        rep.entries.push_back({"shift z down" + tag, ir.gap_dn_z, 0.0, ""});
        rep.entries.push_back({"shift z up" + tag, ir.gap_up_z, 0.0, ""});
        rep.entries.push_back({"pass" + tag, ir.pass ? 1.0 : 0.0, 0.0, ir.summary()});
        std::cout << ir.summary() << "\n";
    }
    write_artifacts(c, rep, std::chrono::duration<double>(clock_type::now() - t0).count());
    return all_pass ? 0 : 2;
}

int cmd_power_forward(const CliArgs& a) {
    const RunConfig c = load_with_overrides(a);
    if (!c.is_power_model())
        throw validation_error("power-forward needs a two-fuel model (preset aid-2fuel or a power payoff)");
    const auto t0 = clock_type::now();
    RunReport rep = make_report(c, "power-forward");
    const PowerModel& pm = c.power;
    const McEstimate p0 = forward_p0(pm, 0.0, pm.base.s0, pm.base.x0,
                                     PsiOptions{c.engine.quad_nodes, true, 1e-6, 8.0});
    rep.entries.push_back({"forward p0", p0.value, 0.0, "quadrature"});
    ForwardZetaOptions fz;
    fz.time_nodes = c.engine.time_nodes;
    fz.samples = c.engine.zeta_samples;
    fz.seed = c.seed;
    fz.psi.nodes = c.engine.quad_nodes;
    const McEstimate z = forward_zeta(pm, fz);
    rep.entries.push_back({"forward zeta", z.value, z.se, ""});
    for (const double gamma : c.gammas) {
        const double sgn = c.side == Side::Buy ? -1.0 : 1.0;
        rep.entries.push_back({"price gamma " + std::to_string(gamma),
                               p0.value + sgn * 0.5 * gamma * z.value, 0.5 * gamma * z.se,
                               "forward expansion"});
    }
    // marginal-weight decomposition along time at the spot factor state
    const int rows = std::max(2, c.engine.time_nodes);
    std::vector<double> times;
    std::vector<Vec> states;
    const double t_hi = pm.base.T * (1.0 - 1e-3);
    for (int i = 0; i < rows; ++i) {
        times.push_back(t_hi * i / (rows - 1));
        states.push_back(pm.base.x0);
    }
    const PsiTable table = build_psi_table(pm, times, states,
                                           PsiOptions{c.engine.quad_nodes, true, 1e-6, 8.0});
    std::filesystem::create_directories(c.out_dir);
    std::ofstream os(c.out_dir + "/psi_" + rep.config_hash + ".csv");
    os << "t,psi1,psi2,dpsi1_c1,dpsi1_c2,dpsi1_y,dpsi2_c1,dpsi2_c2,dpsi2_y\n";
    char buf[256];
    for (std::size_t rix = 0; rix < table.rows.size(); ++rix) {
        const PsiDerivs& pd = table.rows[rix];
        std::snprintf(buf, sizeof buf,
                      "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      table.times[rix], pd.psi1, pd.psi2, pd.d1[0], pd.d1[1], pd.d1[2],
                      pd.d2[0], pd.d2[1], pd.d2[2]);
        os << buf;
    }
    std::printf("forward p0 %.6f, zeta %.6f +- %.6f, psi table %zu rows\n", p0.value, z.value,
                z.se, table.rows.size());
    write_artifacts(c, rep, std::chrono::duration<double>(clock_type::now() - t0).count());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Indifference prices and hedges for payoffs on traded and nontraded assets"};
    app.require_subcommand(1);

    CliArgs args;
    int only = 0;
    auto add_common = [&](CLI::App* sub, bool need_config) {
        auto* copt = sub->add_option("--config", args.config_path, "JSON run configuration");
        if (need_config) copt->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", [&args](const CLI::results_t& v) {
            args.seed = std::stoull(v[0]);
            return true;
        }, "Override the config seed");
        sub->add_option("--gamma", args.gammas, "Override risk aversion (repeatable)");
        sub->add_option("--out", [&args](const CLI::results_t& v) {
            args.out_dir = v[0];
            return true;
        }, "Override the artifact directory");
        sub->add_option("--threads", [&args](const CLI::results_t& v) {
            args.threads = static_cast<unsigned>(std::stoul(v[0]));
            return true;
        }, "Worker thread cap (0 = hardware)");
    };

    auto* price = app.add_subcommand("price", "Price the configured payoff");
    add_common(price, true);
    price->add_option("--engine", [&args](const CLI::results_t& v) {
        args.engine = v[0];
        return true;
    }, "Override the engine: pde, bsde, expand, power");

    auto* hedge = app.add_subcommand("hedge", "Solve and report the optimal hedge at t=0");
    add_common(hedge, true);
    auto* expand = app.add_subcommand("expand", "Small risk-aversion expansion price");
    add_common(expand, true);
    auto* verify = app.add_subcommand("verify", "Monte Carlo indifference verification");
    add_common(verify, true);
    auto* power = app.add_subcommand("power-forward", "Electricity forward decomposition");
    add_common(power, true);
    auto* accept = app.add_subcommand("acceptance", "Run the acceptance suite");
    accept->add_option("--only", only, "Run a single criterion (1-11)")->check(CLI::Range(1, 11));

    CLI11_PARSE(app, argc, argv);

    try {
        if (price->parsed()) return cmd_price(args);
        if (hedge->parsed()) return cmd_hedge(args);
        if (expand->parsed()) return cmd_expand(args);
        if (verify->parsed()) return cmd_verify(args);
        if (power->parsed()) return cmd_power_forward(args);
        if (accept->parsed()) {
            const auto results = uip::run_acceptance(std::cout, only);
            for (const auto& r : results)
                if (!r.pass) return 3;
            return 0;
        }
    } catch (const uip::validation_error& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 1;
    } catch (const uip::numerical_error& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
