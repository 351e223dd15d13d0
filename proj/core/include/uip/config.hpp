#pragma once

#include "uip/pde.hpp"
#include "uip/power.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace uip {

enum class EngineKind { Pde, Bsde, Expand, Power };

std::string engine_name(EngineKind k);

/// Named payoff plus parameters. `asset` is the traded index for calls and
/// the factor index for digitals; `strike` doubles as the digital threshold.
struct PayoffSpec {
    std::string name = "call"; // digital | call | spread_call | power_forward | capped_power_forward
    int asset = 0;
    double strike = 1.0;
    Vec weights;               // spread_call weights over traded assets
    double scarcity_cap = 10.0;
    double scarcity_nu = 1.0;
    double cap = 0.0;          // capped_power_forward bound
};

struct EngineSpec {
    EngineKind kind = EngineKind::Pde;
    // pde
    int grid_nodes = 129;
    double grid_sd = 6.0;
    int time_steps = 64;
    bool mollify = false; // forced on for factor-discontinuous payoffs
    // bsde
    std::size_t paths = 100000;
    int basis_degree = 3;
    // expand (nested zeta)
    std::size_t outer_paths = 4000;
    std::size_t inner_paths = 512;
    // expand + power
    int time_nodes = 33;
    // power quadrature
    int quad_nodes = 64;
    std::size_t zeta_samples = 1024;
};

/// A parsed, validated, normalized run: every field has its final value and
/// the embedded model is ready to use. Explicit models carry a constant
/// factor drift; time-dependent seasonal drifts are code-level only.
struct RunConfig {
    int schema_version = 1;
    std::string preset;  // "" for explicit models, or "aid-2fuel"
    MarketModel model;
    PowerModel power;    // populated for the power preset / power payoffs
    PayoffSpec payoff;
    EngineSpec engine;
    std::vector<double> gammas{0.5};
    Side side = Side::Buy;
    std::uint64_t seed = 1;
    unsigned threads = 0; // 0 = hardware parallelism
    std::string out_dir = "out";
    std::vector<std::string> warnings; // normalization notes; not serialized

    bool is_power_model() const { return !preset.empty() || payoff.name.find("power_") == 0; }
};

/// Parses a JSON document, fills defaults, enforces cross-field constraints
/// (engine capacity vs model dimension, payoff smoothness vs engine), and
/// returns the normalized config. Errors carry the offending field path.
RunConfig parse_config(const std::string& text);

RunConfig load_config(const std::string& path);

/// Normalized emission: fixed key order, every field explicit, numbers at 17
/// significant digits. parse_config(emit_config(c)) reproduces c exactly.
std::string emit_config(const RunConfig& c);

/// FNV-1a of the normalized emission, as 16 hex digits.
std::string config_hash(const RunConfig& c);

/// Field-by-field equality over everything emit_config serializes.
bool config_equal(const RunConfig& a, const RunConfig& b);

/// Resolves the payoff spec against the model in c.
Payoff build_payoff(const RunConfig& c);

/// One reported number; se = 0 for deterministic values, in which case the
/// note records the tolerance or provenance.
struct ReportEntry {
    std::string name;
    double value = 0.0;
    double se = 0.0;
    std::string note;
};

struct RunReport {
    int schema_version = 1;
    std::string command;
    std::string config_hash;
    std::string engine;
    double elapsed_seconds = 0.0;
    std::vector<std::pair<std::string, std::string>> metadata;
    std::vector<ReportEntry> entries;

    std::string to_json() const;
    std::string to_csv() const;
};

} // namespace uip
