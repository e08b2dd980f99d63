#pragma once

#include <span>
#include <vector>

#include "paneitz/operators.hpp"

namespace paneitz {

/// Full-grid solution of P h = 0 with the boundary data of the problem.
struct ExtensionField {
    std::vector<double> h;
    /// Sup-norm of the discrete P h over the interior nodes.
    double residual = 0.0;
    /// Coercivity estimate that licensed the solve.
    double coercivity = 0.0;
};

/// Smallest eigenpair of the clamped bilaplacian, psi1 on the dofs with \int psi1^2 dv = 1.
struct EigenPair {
    double lambda1 = 0.0;
    std::vector<double> psi1;
    /// ||Delta^2 psi1 - lambda1 psi1|| / lambda1 in the quadrature norm.
    double residual = 0.0;
    int iterations = 0;
};

/// Polynomial lift matching (phi1, phi2) on each boundary sphere: even quadratic on a
/// ball, cubic Hermite across an annulus.
std::vector<double> boundary_lift(const ProblemSpec& spec);

/// Radial derivative d/dr implied by the outward normal data at (inner, outer).
std::pair<double, double> boundary_radial_derivatives(const ProblemSpec& spec);

/// Throws CoercivityError when the operator is not coercive.
ExtensionField solve_extension(const ProblemSpec& spec, const DiscreteOperator& op);

EigenPair first_eigenpair(const ProblemSpec& spec);

/// \int f |h|^{2#} dv.
double critical_mass(const ProblemSpec& spec, const DiscreteOperator& op, std::span<const double> h);

/// Strict inequality \int f |h|^{2#} dv < gamma.
bool admissibility_check(const ProblemSpec& spec, const DiscreteOperator& op, std::span<const double> h);

}  // namespace paneitz
