#pragma once

#include <filesystem>
#include <json.hpp>
#include <string>

#include "paneitz/config.hpp"
#include "paneitz/special_functions.hpp"

namespace paneitz {

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,  // identity or acceptance violation
    kExitConfig = 2,   // malformed config, inadmissible gamma, non-coercive operator
    kExitSolver = 3,   // solver non-convergence
};

struct CommandResult {
    int exit_code = kExitOk;
    std::filesystem::path run_dir;
    nlohmann::json report;
    std::string message;
};

/// Identity suite for n in [n_lo, n_hi]; an empty range yields an empty table.
CommandResult cmd_verify_identities(int n_lo, int n_hi, const std::filesystem::path& out_dir,
                                    const IpqFunction& ipq_impl = ipq);
/// extension, feasible point, single-q minimization, multiplier, snapshot.
CommandResult cmd_solve(const RunConfig& cfg);
/// Continuation to the critical exponent plus the energy threshold.
CommandResult cmd_continue(const RunConfig& cfg);
/// Epsilon sweep, expansion fit and certificate; sweep entries use `workers` threads.
CommandResult cmd_expand(const RunConfig& cfg, int workers);

/// Run directory <output.directory>/run-<config hash>/<command>.
std::filesystem::path run_directory(const RunConfig& cfg, const std::string& command);

}  // namespace paneitz
