#pragma once

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "paneitz/operators.hpp"
#include "paneitz/subcritical_solver.hpp"

namespace paneitz {

inline constexpr const char* kVersion = "0.3.1";

struct SweepConfig {
    std::vector<double> eps;  // decreasing after parsing
    double delta = 0.5;
    bool refine = true;

    bool operator==(const SweepConfig&) const = default;
};

struct OutputConfig {
    std::string directory = "runs";
    bool csv = true;
    bool json = true;

    bool operator==(const OutputConfig&) const = default;
};

struct RunConfig {
    ProblemSpec problem;
    SolverOptions solver;
    /// Exponent of a single solve; the critical exponent when absent.
    std::optional<double> q;
    /// Continuation schedule; the default geometric schedule when empty.
    std::vector<double> q_schedule;
    /// Extra random starts for the single solve (seeded by `seed`).
    int restarts = 0;
    std::uint64_t seed = 0;
    SweepConfig sweep;
    OutputConfig output;

    bool operator==(const RunConfig&) const = default;
};

/// Strict schema: unknown keys and type mismatches throw ConfigError.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);
nlohmann::json to_json(const RunConfig& cfg);

nlohmann::json problem_to_json(const ProblemSpec& spec);
ProblemSpec problem_from_json(const nlohmann::json& j);

/// Replaces the grid by one of the same family with m nodes.
void override_grid_size(RunConfig& cfg, int m);

/// FNV-1a over the canonical JSON dump, output section excluded.
std::uint64_t config_hash(const RunConfig& cfg);
std::string hash_hex(std::uint64_t h);

}  // namespace paneitz
