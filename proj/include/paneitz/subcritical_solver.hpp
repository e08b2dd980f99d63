#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "paneitz/boundary_extension.hpp"
#include "paneitz/operators.hpp"

namespace paneitz {

struct SolverOptions {
    double constraint_tol = 1e-8;    // relative to gamma
    double stationarity_tol = 1e-6;  // ||P w - lambda g|| / ||P w|| in the quadrature norm
    int max_iterations = 5000;

    bool operator==(const SolverOptions&) const = default;
};

/// Constrained minimizer of I over {w clamped : \int f |w + h|^q dv = gamma}.
struct SubcriticalSolution {
    double q = 0.0;
    std::vector<double> w;  // dofs
    double lambda = 0.0;
    double mu = 0.0;
    double constraint_residual = 0.0;
    double el_residual = 0.0;
    /// ||w - lambda P^{-1} g|| / ||w||, free of the rounding floor of the fourth-order residual.
    double preconditioned_residual = 0.0;
    int iterations = 0;
    bool converged = false;
    /// Energy of the competitor t_q psi1 at this exponent.
    double start_bound = 0.0;
    double t_q = 0.0;
};

struct FeasiblePoint {
    double t = 0.0;
    std::vector<double> w0;
};

/// Positive root t of \int f |t psi1 + h|^q dv = gamma and w0 = t psi1.
FeasiblePoint feasible_point(const ProblemSpec& spec, const DiscreteOperator& op, std::span<const double> h,
                             std::span<const double> psi1, double q);

/// Scales w along its ray onto the constraint set. A zero field has no ray and
/// is replaced by the fallback direction when one is given.
std::vector<double> project_to_constraint(const ProblemSpec& spec, const DiscreteOperator& op,
                                          std::span<const double> h, std::span<const double> w, double q,
                                          std::span<const double> fallback_direction = {});

/// Multiplier of the Euler-Lagrange equation P w = lambda f |w+h|^{q-2}(w+h),
/// lambda = <w, P w> / (gamma - \int f |w+h|^{q-2}(w+h) h dv).
/// Throws AdmissibilityError when the denominator is not positive.
double lagrange_multiplier(const ProblemSpec& spec, const DiscreteOperator& op, std::span<const double> h,
                           std::span<const double> w, double q);

/// Relative quadrature norm of P w - lambda f |w+h|^{q-2}(w+h) on the dofs.
double stationarity_residual(const ProblemSpec& spec, const DiscreteOperator& op, std::span<const double> h,
                             std::span<const double> w, double q, double lambda);

/// ||w - lambda P^{-1} f |w+h|^{q-2}(w+h)|| / ||w|| in the quadrature norm.
double preconditioned_residual(const ProblemSpec& spec, const DiscreteOperator& op, std::span<const double> h,
                               std::span<const double> w, double q, double lambda);

/// P-preconditioned projected descent from a feasible start. Energy is non-increasing
/// across accepted steps. Throws SolverError on stagnation or when max_iterations runs out.
SubcriticalSolution minimize(const ProblemSpec& spec, const DiscreteOperator& op, std::span<const double> h,
                             double q, std::span<const double> w0, const SolverOptions& options = {});

struct ContinuationTrace {
    std::vector<SubcriticalSolution> stages;
    double limit_mu = 0.0;
    /// gamma^{2/2#} / (K0 ||f||_inf^{2/2#})
    double threshold = 0.0;
    bool threshold_met = false;
    bool failed = false;
    std::string failure;
    std::vector<double> h;
    EigenPair eigen;
};

/// q_k = 2# - (2# - 2.2) 2^{-k}, k = 0..8, followed by 2#.
std::vector<double> default_q_schedule(int n);

/// Warm-started minimization along an increasing schedule ending at 2#.
/// Stage failures are recorded and the partial trace is returned.
ContinuationTrace continuation(const ProblemSpec& spec, const std::vector<double>& q_schedule,
                               const SolverOptions& options = {});

double nontriviality_threshold(const ProblemSpec& spec);

/// Number of strict sign changes along the radius; entries with
/// |u| <= rel_tol * max|u| are treated as zero and skipped.
int nodal_check(std::span<const double> u, double rel_tol = 1e-10);

}  // namespace paneitz
