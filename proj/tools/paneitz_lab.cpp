#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <thread>

#include "paneitz/commands.hpp"
#include "paneitz/errors.hpp"

using namespace paneitz;

namespace {

int worker_count() {
    if (const char* env = std::getenv("PANEITZ_WORKERS")) {
        try {
            const int w = std::stoi(env);
            if (w >= 1) return w;
        } catch (const std::exception&) {
        }
        std::cerr << "ignoring PANEITZ_WORKERS=" << env << " (expected a positive integer)\n";
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

int report(const CommandResult& r) {
    (r.exit_code == kExitOk ? std::cout : std::cerr) << r.message << '\n';
    if (!r.run_dir.empty()) std::cout << "report: " << r.run_dir.string() << '\n';
    return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Radial Paneitz-Branson boundary value problems: subcritical continuation and test-function expansions"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    int grid_size = 0;
    std::uint64_t seed = 0;
    int n_lo = 5;
    int n_hi = 12;

    auto* verify = app.add_subcommand("verify-identities", "Check the special-function identities");
    verify->add_option("--n-min", n_lo, "Smallest dimension")->capture_default_str();
    verify->add_option("--n-max", n_hi, "Largest dimension")->capture_default_str();
    verify->add_option("--out", out_dir, "Output directory")->default_str("runs");

    std::vector<CLI::App*> runs;
    for (auto [name, help] : {std::pair{"solve", "Single-exponent constrained minimization"},
                              std::pair{"continue", "Continuation to the critical exponent"},
                              std::pair{"expand", "Test-function sweep and expansion fit"}}) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "Run configuration (JSON)")->required();
        sub->add_option("--out", out_dir, "Override output.directory");
        sub->add_option("--grid-size", grid_size, "Override the number of grid nodes");
        sub->add_option("--seed", seed, "Override the restart seed");
        runs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    if (verify->parsed()) {
        return report(cmd_verify_identities(n_lo, n_hi, out_dir.empty() ? "runs" : out_dir));
    }

    try {
        RunConfig cfg = load_config(config_path);
        if (!out_dir.empty()) cfg.output.directory = out_dir;
        if (grid_size > 0) override_grid_size(cfg, grid_size);
        if (runs[0]->parsed() || runs[1]->parsed() || runs[2]->parsed()) {
            for (auto* sub : runs) {
                if (sub->parsed() && sub->count("--seed")) cfg.seed = seed;
            }
        }
        if (runs[0]->parsed()) return report(cmd_solve(cfg));
        if (runs[1]->parsed()) return report(cmd_continue(cfg));
        return report(cmd_expand(cfg, worker_count()));
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DomainError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    }
}
