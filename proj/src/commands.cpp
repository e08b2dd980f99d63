#include "paneitz/commands.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <random>
#include <sstream>

#include "paneitz/boundary_extension.hpp"
#include "paneitz/errors.hpp"
#include "paneitz/subcritical_solver.hpp"
#include "paneitz/test_functions.hpp"

namespace paneitz {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class CsvWriter {
public:
    CsvWriter(const fs::path& path, const std::vector<std::string>& header) : out_(path) {
        if (!out_) throw std::runtime_error("cannot write " + path.string());
        out_ << std::setprecision(17);
        for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
        out_ << '\n';
    }
    template <class... T>
    void row(const T&... xs) {
        int i = 0;
        ((out_ << (i++ ? "," : "") << xs), ...);
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

json stamp(const RunConfig& cfg) {
    return {{"version", kVersion},
            {"grid_size", cfg.problem.grid.size()},
            {"constraint_tol", cfg.solver.constraint_tol},
            {"stationarity_tol", cfg.solver.stationarity_tol},
            {"max_iterations", cfg.solver.max_iterations},
            {"config_hash", hash_hex(config_hash(cfg))}};
}

// Maps library exceptions to exit codes; the partial report survives.
CommandResult guarded(CommandResult r, const std::function<void(CommandResult&)>& body) {
    try {
        body(r);
    } catch (const ConfigError& e) {
        r.exit_code = kExitConfig;
        r.message = std::string("configuration error: ") + e.what();
    } catch (const CoercivityError& e) {
        r.exit_code = kExitConfig;
        std::ostringstream os;
        os << "operator is not coercive: " << e.what() << " (estimated lower bound " << e.lambda_estimate() << ")";
        r.message = os.str();
    } catch (const AdmissibilityError& e) {
        r.exit_code = kExitConfig;
        r.message = e.what();
    } catch (const DomainError& e) {
        r.exit_code = kExitConfig;
        r.message = std::string("invalid problem: ") + e.what();
    } catch (const SolverError& e) {
        r.exit_code = kExitSolver;
        r.message = std::string("solver did not converge: ") + e.what();
    }
    if (r.exit_code != kExitOk) r.report["error"] = r.message;
    return r;
}

std::vector<double> full_field(const DiscreteOperator& op, std::span<const double> w, std::span<const double> h) {
    auto u = op.embed(w);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] += h[i];
    return u;
}

void write_solution(const fs::path& dir, const ProblemSpec& spec, const DiscreteOperator& op,
                    std::span<const double> w, std::span<const double> h) {
    const auto wf = op.embed(w);
    CsvWriter csv(dir / "solution.csv", {"r", "w", "h", "u"});
    const auto x = spec.grid.nodes();
    for (std::size_t i = 0; i < x.size(); ++i) csv.row(x[i], wf[i], h[i], wf[i] + h[i]);
}

json solution_json(const SubcriticalSolution& s) {
    return {{"q", s.q},
            {"mu", s.mu},
            {"lambda", s.lambda},
            {"constraint_residual", s.constraint_residual},
            {"el_residual", s.el_residual},
            {"preconditioned_residual", s.preconditioned_residual},
            {"iterations", s.iterations},
            {"t_q", s.t_q},
            {"start_bound", s.start_bound}};
}

struct Prepared {
    DiscreteOperator op;
    ExtensionField ext;
    double mass = 0.0;
    EigenPair eigen;
};

// Extension, admissibility and the first eigenpair: the common front of solve and continue.
Prepared prepare(const RunConfig& cfg, json& report) {
    const ProblemSpec& spec = cfg.problem;
    spec.validate();
    Prepared p{assemble_paneitz(spec), {}, 0.0, {}};
    p.ext = solve_extension(spec, p.op);
    p.mass = critical_mass(spec, p.op, p.ext.h);
    report["extension"] = {{"residual", p.ext.residual},
                           {"coercivity", p.ext.coercivity},
                           {"critical_mass", p.mass},
                           {"h_is_zero", std::all_of(p.ext.h.begin(), p.ext.h.end(), [](double v) { return v == 0.0; })}};
    if (!admissibility_check(spec, p.op, p.ext.h)) {
        std::ostringstream os;
        os << "inadmissible constraint level: \\int f |h|^{2#} dv = " << std::setprecision(10) << p.mass
           << " >= gamma = " << spec.gamma << "; the level must strictly exceed the critical mass of the extension";
        throw AdmissibilityError(os.str());
    }
    p.eigen = first_eigenpair(spec);
    report["eigen"] = {{"lambda1", p.eigen.lambda1}, {"residual", p.eigen.residual}};
    return p;
}

}  // namespace

fs::path run_directory(const RunConfig& cfg, const std::string& command) {
    return fs::path(cfg.output.directory) / ("run-" + hash_hex(config_hash(cfg))) / command;
}

CommandResult cmd_verify_identities(int n_lo, int n_hi, const fs::path& out_dir, const IpqFunction& ipq_impl) {
    CommandResult r;
    std::ostringstream key;
    key << "identities-" << n_lo << "-" << n_hi;
    r.run_dir = out_dir / key.str();
    fs::create_directories(r.run_dir);
    const auto rows = n_lo <= n_hi ? run_identity_suite(n_lo, n_hi, ipq_impl, true) : std::vector<IdentityCheck>{};
    CsvWriter csv(r.run_dir / "identities.csv", {"name", "lhs", "rhs", "rel_error", "tolerance", "passed"});
    int failed = 0;
    json table = json::array();
    for (const auto& c : rows) {
        csv.row(c.name, c.lhs, c.rhs, c.rel_error, c.tolerance, c.passed ? "pass" : "FAIL");
        if (!c.passed) {
            ++failed;
            table.push_back({{"name", c.name}, {"rel_error", c.rel_error}, {"tolerance", c.tolerance}});
        }
    }
    r.report = {{"command", "verify-identities"},
                {"version", kVersion},
                {"n_range", {n_lo, n_hi}},
                {"checks", rows.size()},
                {"failed", failed},
                {"failures", table}};
    write_json(r.run_dir / "report.json", r.report);
    r.exit_code = failed ? kExitFailure : kExitOk;
    std::ostringstream os;
    os << rows.size() - static_cast<std::size_t>(failed) << "/" << rows.size() << " identities hold";
    r.message = os.str();
    return r;
}

CommandResult cmd_solve(const RunConfig& cfg) {
    CommandResult init;
    init.run_dir = run_directory(cfg, "solve");
    init.report = {{"command", "solve"}, {"config", to_json(cfg)}, {"stamp", stamp(cfg)}};
    auto r = guarded(init, [&](CommandResult& r) {
        fs::create_directories(r.run_dir);
        const ProblemSpec& spec = cfg.problem;
        Prepared p = prepare(cfg, r.report);
        const double q = cfg.q.value_or(critical_exponent(spec.dimension()));
        const FeasiblePoint fp = feasible_point(spec, p.op, p.ext.h, p.eigen.psi1, q);
        SubcriticalSolution best = minimize(spec, p.op, p.ext.h, q, fp.w0, cfg.solver);

        // Optional random restarts from smooth clamped perturbations of psi1.
        std::mt19937_64 rng(cfg.seed);
        std::uniform_real_distribution<double> coef(-1.0, 1.0);
        const auto x = spec.grid.nodes();
        const double r0 = spec.grid.r_in();
        const double len = spec.grid.r_out() - r0;
        json restarts = json::array();
        for (int k = 0; k < cfg.restarts; ++k) {
            const double c0 = coef(rng), c1 = coef(rng), c2 = coef(rng);
            std::vector<double> start(p.eigen.psi1.size());
            for (std::size_t i = 0; i < start.size(); ++i) {
                const double s = (x[i + static_cast<std::size_t>(p.op.first_dof())] - r0) / len;
                start[i] = p.eigen.psi1[i] * (c0 + c1 * s + c2 * s * s);
            }
            start = project_to_constraint(spec, p.op, p.ext.h, start, q, p.eigen.psi1);
            try {
                SubcriticalSolution s = minimize(spec, p.op, p.ext.h, q, start, cfg.solver);
                restarts.push_back(s.mu);
                if (s.mu < best.mu) best = std::move(s);
            } catch (const SolverError& e) {
                restarts.push_back(e.what());
            }
        }
        best.t_q = fp.t;
        best.start_bound = fp.t * fp.t * energy(spec, p.op, p.eigen.psi1);
        const auto u = full_field(p.op, best.w, p.ext.h);
        r.report["solution"] = solution_json(best);
        r.report["solution"]["nodal_count"] = nodal_check(u);
        r.report["restarts"] = restarts;
        r.report["threshold"] = nontriviality_threshold(spec);
        if (cfg.output.csv) write_solution(r.run_dir, spec, p.op, best.w, p.ext.h);
        std::ostringstream os;
        os << "q = " << q << ": mu = " << best.mu << ", lambda = " << best.lambda << ", sign changes = "
           << nodal_check(u);
        r.message = os.str();
    });
    if (cfg.output.json && fs::exists(r.run_dir)) write_json(r.run_dir / "report.json", r.report);
    return r;
}

CommandResult cmd_continue(const RunConfig& cfg) {
    CommandResult init;
    init.run_dir = run_directory(cfg, "continue");
    init.report = {{"command", "continue"}, {"config", to_json(cfg)}, {"stamp", stamp(cfg)}};
    auto r = guarded(init, [&](CommandResult& r) {
        fs::create_directories(r.run_dir);
        const ProblemSpec& spec = cfg.problem;
        Prepared p = prepare(cfg, r.report);
        const auto schedule = cfg.q_schedule.empty() ? default_q_schedule(spec.dimension()) : cfg.q_schedule;
        const ContinuationTrace trace = continuation(spec, schedule, cfg.solver);
        json stages = json::array();
        for (const auto& s : trace.stages) stages.push_back(solution_json(s));
        r.report["trace"] = stages;
        r.report["limit_mu"] = trace.limit_mu;
        r.report["threshold"] = trace.threshold;
        r.report["threshold_met"] = trace.threshold_met;
        r.report["failed"] = trace.failed;
        if (cfg.output.csv) {
            CsvWriter csv(r.run_dir / "trace.csv", {"q", "mu", "lambda", "constraint_residual", "el_residual",
                                                    "preconditioned_residual", "iterations", "t_q", "start_bound"});
            for (const auto& s : trace.stages) {
                csv.row(s.q, s.mu, s.lambda, s.constraint_residual, s.el_residual, s.preconditioned_residual,
                        s.iterations, s.t_q, s.start_bound);
            }
        }
        if (!trace.stages.empty()) {
            const auto& last = trace.stages.back();
            r.report["nodal_count"] = nodal_check(full_field(p.op, last.w, trace.h));
            if (cfg.output.csv) write_solution(r.run_dir, spec, p.op, last.w, trace.h);
        }
        std::ostringstream os;
        if (trace.failed) {
            r.exit_code = kExitSolver;
            os << "continuation stopped after " << trace.stages.size() << " stages: " << trace.failure;
        } else {
            os << trace.stages.size() << " stages, mu = " << trace.limit_mu << ", threshold " << trace.threshold
               << (trace.threshold_met ? " met" : " not met");
        }
        r.message = os.str();
    });
    if (cfg.output.json && fs::exists(r.run_dir)) write_json(r.run_dir / "report.json", r.report);
    return r;
}

CommandResult cmd_expand(const RunConfig& cfg, int workers) {
    CommandResult init;
    init.run_dir = run_directory(cfg, "expand");
    init.report = {{"command", "expand"}, {"config", to_json(cfg)}, {"stamp", stamp(cfg)}};
    auto r = guarded(init, [&](CommandResult& r) {
        const ProblemSpec& spec = cfg.problem;
        if (!spec.grid.is_ball()) throw ConfigError("expand needs a ball domain (grid r_in = 0)");
        if (cfg.sweep.eps.size() < 4) throw ConfigError("expand needs at least 4 epsilon values in the sweep");
        fs::create_directories(r.run_dir);
        const ExpansionFit fit = fit_expansion(spec, cfg.sweep.eps, {cfg.sweep.delta, workers, cfg.sweep.refine});
        if (cfg.output.csv) {
            CsvWriter csv(r.run_dir / "expansion.csv", {"eps", "mu_laplacian", "mu_gradient", "mu_potential", "mu",
                                                        "gamma", "Q", "normalized", "in_fit"});
            for (std::size_t i = 0; i < fit.samples.size(); ++i) {
                const auto& s = fit.samples[i];
                csv.row(s.epsilon, s.mu.laplacian, s.mu.gradient, s.mu.potential, s.mu.total, s.gamma, s.q,
                        s.normalized, static_cast<int>(i) >= fit.window_begin ? 1 : 0);
            }
        }
        json fj = {{"model", fit.model},
                   {"leading", fit.leading},
                   {"c2_fit", fit.c2_fit},
                   {"c2_analytic", fit.c2_analytic},
                   {"rel_error", fit.rel_error},
                   {"window", {fit.eps_list[static_cast<std::size_t>(fit.window_begin)], fit.eps_list.back()}},
                   {"nuisance_exponent", fit.nuisance_exponent},
                   {"nuisance_coefficient", fit.nuisance_coefficient},
                   {"residual_rms", fit.residual_rms}};
        fj["c2_fit_refined"] = std::isnan(fit.c2_fit_refined) ? json(nullptr) : json(fit.c2_fit_refined);
        if (fit.model == "eps2_log") fj["c2_rederived"] = fit.c2_rederived;
        r.report["fit"] = fj;

        // The certificate needs a solution on the same spec; failures are reported, not fatal.
        ContinuationTrace trace;
        try {
            trace = continuation(spec, cfg.q_schedule.empty() ? default_q_schedule(spec.dimension()) : cfg.q_schedule,
                                 cfg.solver);
        } catch (const std::exception& e) {
            trace.failed = true;
            trace.failure = e.what();
            trace.threshold = nontriviality_threshold(spec);
        }
        const Certificate c = threshold_certificate(spec, trace, fit);
        r.report["certificate"] = {{"mu", c.mu},
                                   {"threshold", c.threshold},
                                   {"threshold_met", c.threshold_met},
                                   {"c2_analytic", c.c2_analytic},
                                   {"curvature_hypothesis", c.curvature_hypothesis},
                                   {"nodal_count", c.nodal_count},
                                   {"nontrivial_nodal", c.nontrivial_nodal},
                                   {"notes", c.notes}};
        std::ostringstream os;
        os << fit.model << " fit: c2 = " << fit.c2_fit << " vs analytic " << fit.c2_analytic << " (rel. error "
           << fit.rel_error << ")";
        r.message = os.str();
    });
    if (cfg.output.json && fs::exists(r.run_dir)) write_json(r.run_dir / "report.json", r.report);
    return r;
}

}  // namespace paneitz
