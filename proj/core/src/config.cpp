#include "uip/config.hpp"

#include "json.hpp"

#include <Eigen/SVD>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace uip {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw validation_error("config." + path + ": " + what);
}

void check_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (allowed.find(it.key()) == allowed.end())
            fail(path, "unrecognized field '" + it.key() + "'");
}

double get_number(const json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
}

double get_number(const json& parent, const std::string& path, const std::string& key,
                  double fallback) {
    if (!parent.contains(key)) return fallback;
    return get_number(parent.at(key), path + "." + key);
}

std::int64_t get_integer(const json& parent, const std::string& path, const std::string& key,
                         std::int64_t fallback, std::int64_t lo, std::int64_t hi) {
    if (!parent.contains(key)) return fallback;
    const json& j = parent.at(key);
    if (!j.is_number_integer()) fail(path + "." + key, "expected an integer");
    const auto v = j.get<std::int64_t>();
    if (v < lo || v > hi)
        fail(path + "." + key,
             "out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return v;
}

Vec get_vector(const json& j, const std::string& path) {
    if (!j.is_array()) fail(path, "expected an array of numbers");
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
        v[static_cast<Eigen::Index>(i)] = get_number(j[i], path + "[" + std::to_string(i) + "]");
    return v;
}

Mat get_matrix(const json& j, const std::string& path, Eigen::Index rows) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
        fail(path, "expected " + std::to_string(rows) + " rows");
    Mat m(rows, rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const Vec row = get_vector(j[static_cast<std::size_t>(i)],
                                   path + "[" + std::to_string(i) + "]");
        if (row.size() != rows) fail(path, "expected a square matrix");
        m.row(i) = row.transpose();
    }
    return m;
}

MarketModel parse_model(const json& j, std::vector<std::string>& warnings) {
    check_keys(j, "model", {"mu", "sigma", "s0", "alpha", "beta", "b0", "x0", "maturity"});
    for (const char* key : {"mu", "sigma", "s0", "alpha", "beta", "x0", "maturity"})
        if (!j.contains(key)) fail(std::string("model.") + key, "missing");
    MarketModel m;
    m.mu = get_vector(j.at("mu"), "model.mu");
    m.sigma = get_matrix(j.at("sigma"), "model.sigma", m.mu.size());
    m.s0 = get_vector(j.at("s0"), "model.s0");
    m.alpha = get_vector(j.at("alpha"), "model.alpha");
    m.beta = get_matrix(j.at("beta"), "model.beta", m.alpha.size());
    m.x0 = get_vector(j.at("x0"), "model.x0");
    if (j.contains("b0")) {
        m.b0 = get_vector(j.at("b0"), "model.b0");
    } else {
        m.b0 = Vec::Zero(m.alpha.size());
        warnings.push_back("config.model.b0: missing; defaulting to zero drift level");
    }
    m.T = get_number(j.at("maturity"), "model.maturity");

    if (m.mu.size() > 0) {
        Eigen::JacobiSVD<Mat> svd(m.sigma);
        const double smin = svd.singularValues().minCoeff();
        const double smax = svd.singularValues().maxCoeff();
        if (smin <= 0.0 || smax / smin > 1e10)
            fail("model.sigma", "singular volatility matrix (condition number above 1e10)");
    }
    try {
        validate(m);
    } catch (const validation_error& e) {
        fail("model", e.what());
    }
    return m;
}

PayoffSpec parse_payoff(const json& j, const MarketModel& m) {
    if (!j.is_object() || !j.contains("name")) fail("payoff.name", "missing");
    PayoffSpec p;
    p.name = j.at("name").get<std::string>();
    const std::string path = "payoff";
    if (p.name == "call") {
        check_keys(j, path, {"name", "asset", "strike"});
        p.asset = static_cast<int>(get_integer(j, path, "asset", 0, 0, m.n() - 1));
        p.strike = get_number(j, path, "strike", 1.0);
        if (!(p.strike > 0.0)) fail("payoff.strike", "must be positive");
    } else if (p.name == "digital") {
        check_keys(j, path, {"name", "factor", "threshold"});
        p.asset = static_cast<int>(get_integer(j, path, "factor", 0, 0, m.d() - 1));
        p.strike = get_number(j, path, "threshold", 0.0);
    } else if (p.name == "spread_call") {
        check_keys(j, path, {"name", "weights", "strike"});
        if (!j.contains("weights")) fail("payoff.weights", "missing");
        p.weights = get_vector(j.at("weights"), "payoff.weights");
        if (p.weights.size() != m.n())
            fail("payoff.weights", "expected one weight per traded asset");
        p.strike = get_number(j, path, "strike", 0.0);
    } else if (p.name == "power_forward" || p.name == "capped_power_forward") {
        check_keys(j, path, {"name", "scarcity", "cap"});
        if (j.contains("scarcity")) {
            const json& s = j.at("scarcity");
            check_keys(s, "payoff.scarcity", {"name", "cap", "nu"});
            if (!s.contains("name") || s.at("name").get<std::string>() != "scarcity-power")
                fail("payoff.scarcity.name", "unknown scarcity preset (expected scarcity-power)");
            p.scarcity_cap = get_number(s, "payoff.scarcity", "cap", 10.0);
            p.scarcity_nu = get_number(s, "payoff.scarcity", "nu", 1.0);
            if (!(p.scarcity_cap > 0.0)) fail("payoff.scarcity.cap", "must be positive");
            if (!(p.scarcity_nu > 0.0)) fail("payoff.scarcity.nu", "must be positive");
        }
        if (p.name == "capped_power_forward") {
            if (!j.contains("cap")) fail("payoff.cap", "missing");
            p.cap = get_number(j.at("cap"), "payoff.cap");
            if (!(p.cap > 0.0)) fail("payoff.cap", "must be positive");
        } else if (j.contains("cap")) {
            fail("payoff.cap", "only capped_power_forward takes a cap");
        }
    } else {
        fail("payoff.name", "unknown payoff '" + p.name +
                                "' (expected digital, call, spread_call, power_forward, "
                                "capped_power_forward)");
    }
    return p;
}

EngineSpec parse_engine(const json& j) {
    if (!j.is_object() || !j.contains("name")) fail("engine.name", "missing");
    EngineSpec e;
    const std::string name = j.at("name").get<std::string>();
    const std::string path = "engine";
    if (name == "pde") {
        e.kind = EngineKind::Pde;
        check_keys(j, path, {"name", "grid_nodes", "grid_sd", "time_steps", "mollify"});
        e.grid_nodes = static_cast<int>(get_integer(j, path, "grid_nodes", 129, 9, 4097));
        e.grid_sd = get_number(j, path, "grid_sd", 6.0);
        if (!(e.grid_sd >= 2.0)) fail("engine.grid_sd", "must be at least 2 standard deviations");
        e.time_steps = static_cast<int>(get_integer(j, path, "time_steps", 64, 2, 100000));
        if (j.contains("mollify")) {
            if (!j.at("mollify").is_boolean()) fail("engine.mollify", "expected a boolean");
            e.mollify = j.at("mollify").get<bool>();
        }
    } else if (name == "bsde") {
        e.kind = EngineKind::Bsde;
        check_keys(j, path, {"name", "paths", "steps", "basis_degree"});
        e.paths = static_cast<std::size_t>(get_integer(j, path, "paths", 100000, 100, 100000000));
        e.time_steps = static_cast<int>(get_integer(j, path, "steps", 64, 2, 4096));
        e.basis_degree = static_cast<int>(get_integer(j, path, "basis_degree", 3, 1, 8));
    } else if (name == "expand") {
        e.kind = EngineKind::Expand;
        check_keys(j, path, {"name", "outer_paths", "inner_paths", "time_nodes"});
        e.outer_paths =
            static_cast<std::size_t>(get_integer(j, path, "outer_paths", 4000, 16, 10000000));
        e.inner_paths =
            static_cast<std::size_t>(get_integer(j, path, "inner_paths", 512, 16, 10000000));
        e.time_nodes = static_cast<int>(get_integer(j, path, "time_nodes", 33, 3, 4097));
    } else if (name == "power") {
        e.kind = EngineKind::Power;
        check_keys(j, path, {"name", "quad_nodes", "zeta_samples", "time_nodes"});
        e.quad_nodes = static_cast<int>(get_integer(j, path, "quad_nodes", 64, 8, 1024));
        e.zeta_samples =
            static_cast<std::size_t>(get_integer(j, path, "zeta_samples", 1024, 16, 10000000));
        e.time_nodes = static_cast<int>(get_integer(j, path, "time_nodes", 33, 3, 4097));
    } else {
        fail("engine.name", "unknown engine '" + name + "' (expected pde, bsde, expand, power)");
    }
    return e;
}

void emit_vector(std::ostringstream& os, const Vec& v) {
    os << '[';
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) os << ", ";
        os << format_full(v[i]);
    }
    os << ']';
}

void emit_matrix(std::ostringstream& os, const Mat& m, const std::string& pad) {
    os << '[';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (i) os << ",\n" << pad;
        emit_vector(os, m.row(i).transpose());
    }
    os << ']';
}

} // namespace

std::string engine_name(EngineKind k) {
    switch (k) {
        case EngineKind::Pde: return "pde";
        case EngineKind::Bsde: return "bsde";
        case EngineKind::Expand: return "expand";
        case EngineKind::Power: return "power";
    }
    return "?";
}

RunConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw validation_error(std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw validation_error("config: expected a JSON object");
    check_keys(j, "",
               {"schema_version", "model", "payoff", "engine", "gamma", "side", "seed", "threads",
                "out_dir"});

    RunConfig c;
    if (!j.contains("schema_version") || !j.at("schema_version").is_number_integer() ||
        j.at("schema_version").get<int>() != 1)
        fail("schema_version", "expected 1");

    if (!j.contains("model")) fail("model", "missing");
    const json& jm = j.at("model");
    if (jm.is_object() && jm.contains("preset")) {
        check_keys(jm, "model", {"preset"});
        const std::string preset = jm.at("preset").get<std::string>();
        if (preset != "aid-2fuel")
            fail("model.preset", "unknown preset '" + preset + "' (expected aid-2fuel)");
        c.preset = preset;
        c.power = aid_2fuel_preset();
        c.model = c.power.base;
    } else {
        c.model = parse_model(jm, c.warnings);
    }

    if (!j.contains("payoff")) fail("payoff", "missing");
    c.payoff = parse_payoff(j.at("payoff"), c.model);

    if (j.contains("engine")) {
        c.engine = parse_engine(j.at("engine"));
    } else {
        c.warnings.push_back("config.engine: missing; defaulting to the pde engine");
    }

    if (j.contains("gamma")) {
        const json& jg = j.at("gamma");
        if (jg.is_number()) {
            c.gammas = {get_number(jg, "gamma")};
        } else {
            const Vec g = get_vector(jg, "gamma");
            if (g.size() == 0) fail("gamma", "must not be empty");
            c.gammas.assign(g.data(), g.data() + g.size());
        }
        for (double g : c.gammas)
            if (!(g >= 0.0)) fail("gamma", "risk aversion must be nonnegative");
    } else {
        c.gammas = {0.5};
        c.warnings.push_back("config.gamma: missing; defaulting to 0.5");
    }

    if (j.contains("side")) {
        const std::string s = j.at("side").get<std::string>();
        if (s == "buy")
            c.side = Side::Buy;
        else if (s == "sell")
            c.side = Side::Sell;
        else
            fail("side", "expected buy or sell");
    }
    c.seed = static_cast<std::uint64_t>(
        get_integer(j, "", "seed", 1, 0, std::numeric_limits<std::int64_t>::max()));
    c.threads = static_cast<unsigned>(get_integer(j, "", "threads", 0, 0, 4096));
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();

    // cross-field constraints
    const bool power_payoff = c.payoff.name == "power_forward" ||
                              c.payoff.name == "capped_power_forward";
    if (power_payoff) {
        if (c.preset.empty()) {
            c.power.base = c.model;
        }
        c.power.g = scarcity_power(c.payoff.scarcity_cap, c.payoff.scarcity_nu);
        c.power.cap = c.payoff.cap;
        try {
            validate(c.power);
        } catch (const validation_error& e) {
            fail("payoff", std::string("power payoffs need a two-fuel model: ") + e.what());
        }
    }
    if (c.engine.kind == EngineKind::Power && !power_payoff)
        fail("engine", "the power engine prices power_forward or capped_power_forward payoffs");
    if (c.engine.kind == EngineKind::Pde) {
        const int dim = c.model.n() + c.model.d();
        if (dim > 3) {
            if (!c.preset.empty())
                fail("engine", "the aid-2fuel preset has 5 state dimensions; the pde engine "
                               "handles at most 3 (use the bsde or expand engine)");
            fail("engine", "the pde engine handles at most 3 state dimensions, got " +
                               std::to_string(dim) + " (use the bsde or expand engine)");
        }
        if (c.payoff.name == "digital" && !c.engine.mollify) {
            c.engine.mollify = true;
            c.warnings.push_back(
                "config.engine: factor-discontinuous payoff with the pde engine; "
                "mollification enabled");
        }
    }
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("config: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string emit_config(const RunConfig& c) {
    std::ostringstream os;
    os << "{\n  \"schema_version\": 1,\n  \"model\": ";
    if (!c.preset.empty()) {
        os << "{ \"preset\": \"" << c.preset << "\" },\n";
    } else {
        const MarketModel& m = c.model;
        os << "{\n    \"mu\": ";
        emit_vector(os, m.mu);
        os << ",\n    \"sigma\": ";
        emit_matrix(os, m.sigma, "              ");
        os << ",\n    \"s0\": ";
        emit_vector(os, m.s0);
        os << ",\n    \"alpha\": ";
        emit_vector(os, m.alpha);
        os << ",\n    \"beta\": ";
        emit_matrix(os, m.beta, "             ");
        os << ",\n    \"b0\": ";
        emit_vector(os, m.b0);
        os << ",\n    \"x0\": ";
        emit_vector(os, m.x0);
        os << ",\n    \"maturity\": " << format_full(m.T) << "\n  },\n";
    }

    os << "  \"payoff\": { \"name\": \"" << c.payoff.name << "\"";
    if (c.payoff.name == "call")
        os << ", \"asset\": " << c.payoff.asset << ", \"strike\": " << format_full(c.payoff.strike);
    if (c.payoff.name == "digital")
        os << ", \"factor\": " << c.payoff.asset
           << ", \"threshold\": " << format_full(c.payoff.strike);
    if (c.payoff.name == "spread_call") {
        os << ", \"weights\": ";
        emit_vector(os, c.payoff.weights);
        os << ", \"strike\": " << format_full(c.payoff.strike);
    }
    if (c.payoff.name == "power_forward" || c.payoff.name == "capped_power_forward") {
        os << ", \"scarcity\": { \"name\": \"scarcity-power\", \"cap\": "
           << format_full(c.payoff.scarcity_cap) << ", \"nu\": " << format_full(c.payoff.scarcity_nu)
           << " }";
        if (c.payoff.name == "capped_power_forward")
            os << ", \"cap\": " << format_full(c.payoff.cap);
    }
    os << " },\n";

    os << "  \"engine\": { \"name\": \"" << engine_name(c.engine.kind) << "\"";
    switch (c.engine.kind) {
        case EngineKind::Pde:
            os << ", \"grid_nodes\": " << c.engine.grid_nodes
               << ", \"grid_sd\": " << format_full(c.engine.grid_sd)
               << ", \"time_steps\": " << c.engine.time_steps
               << ", \"mollify\": " << (c.engine.mollify ? "true" : "false");
            break;
        case EngineKind::Bsde:
            os << ", \"paths\": " << c.engine.paths << ", \"steps\": " << c.engine.time_steps
               << ", \"basis_degree\": " << c.engine.basis_degree;
            break;
        case EngineKind::Expand:
            os << ", \"outer_paths\": " << c.engine.outer_paths
               << ", \"inner_paths\": " << c.engine.inner_paths
               << ", \"time_nodes\": " << c.engine.time_nodes;
            break;
        case EngineKind::Power:
            os << ", \"quad_nodes\": " << c.engine.quad_nodes
               << ", \"zeta_samples\": " << c.engine.zeta_samples
               << ", \"time_nodes\": " << c.engine.time_nodes;
            break;
    }
    os << " },\n";

    os << "  \"gamma\": [";
    for (std::size_t i = 0; i < c.gammas.size(); ++i) {
        if (i) os << ", ";
        os << format_full(c.gammas[i]);
    }
    os << "],\n";
    os << "  \"side\": \"" << (c.side == Side::Buy ? "buy" : "sell") << "\",\n";
    os << "  \"seed\": " << c.seed << ",\n";
    os << "  \"threads\": " << c.threads << ",\n";
    os << "  \"out_dir\": \"" << c.out_dir << "\"\n}\n";
    return os.str();
}

std::string config_hash(const RunConfig& c) {
    const std::uint64_t h = fnv1a(emit_config(c));
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

bool config_equal(const RunConfig& a, const RunConfig& b) {
    return emit_config(a) == emit_config(b);
}

Payoff build_payoff(const RunConfig& c) {
    const PayoffSpec& p = c.payoff;
    if (p.name == "call") return make_call(p.asset, p.strike);
    if (p.name == "digital") return make_digital_x(p.asset, p.strike);
    if (p.name == "spread_call") return make_spread_call(p.weights, p.strike);
    if (p.name == "power_forward" || p.name == "capped_power_forward")
        return c.power.forward_payoff();
    throw validation_error("config.payoff.name: unknown payoff '" + p.name + "'");
}

std::string RunReport::to_json() const {
    std::ostringstream os;
    os << "{\n  \"schema_version\": " << schema_version << ",\n";
    os << "  \"command\": \"" << command << "\",\n";
    os << "  \"config_hash\": \"" << config_hash << "\",\n";
    os << "  \"engine\": \"" << engine << "\",\n";
    os << "  \"elapsed_seconds\": " << format_full(elapsed_seconds) << ",\n";
    os << "  \"metadata\": {";
    for (std::size_t i = 0; i < metadata.size(); ++i) {
        if (i) os << ',';
        os << "\n    \"" << metadata[i].first << "\": \"" << metadata[i].second << '"';
    }
    os << (metadata.empty() ? "" : "\n  ") << "},\n";
    os << "  \"entries\": [";
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const ReportEntry& e = entries[i];
        if (i) os << ',';
        os << "\n    { \"name\": \"" << e.name << "\", \"value\": " << format_full(e.value)
           << ", \"se\": " << format_full(e.se) << ", \"note\": \"" << e.note << "\" }";
    }
    os << (entries.empty() ? "" : "\n  ") << "]\n}\n";
    return os.str();
}

std::string RunReport::to_csv() const {
    std::ostringstream os;
    os << "name,value,se,note\n";
    for (const ReportEntry& e : entries)
        os << e.name << ',' << format_full(e.value) << ',' << format_full(e.se) << ',' << e.note
           << '\n';
    return os.str();
}

} // namespace uip
