#pragma once

#include <Eigen/Sparse>
#include <memory>
#include <span>
#include <vector>

#include "paneitz/geometry.hpp"
#include "paneitz/profile.hpp"

namespace paneitz {

/// Dirichlet value and outward normal derivative on one boundary sphere.
struct BoundaryData {
    double value = 0.0;
    double normal_derivative = 0.0;

    bool operator==(const BoundaryData&) const = default;
};

/// A radial Dirichlet problem P u = lambda f |u|^{2#-2} u with
/// P = Delta^2 - div(A grad) + a and A(du, du) = alpha(r) u'^2.
struct ProblemSpec {
    ProblemSpec(RadialGrid grid_, RadialMetric metric_);

    RadialGrid grid;
    RadialMetric metric;
    RadialProfile a;
    RadialProfile alpha;
    RadialProfile f = RadialProfile::constant(1.0);
    BoundaryData outer;
    BoundaryData inner;  // ignored when the grid is a ball
    double gamma = 1.0;

    int dimension() const noexcept { return grid.dimension(); }
    /// R0 from the metric, Tr A(x0) = n alpha(0), Delta f(x0) / f(x0) = -n f''(0) / f(0).
    CurvatureData curvature() const;
    /// Throws DomainError if f is not positive at every node.
    void validate() const;

    bool operator==(const ProblemSpec&) const = default;
};

/// Second-order finite-volume Laplacian Delta = -div grad on all grid nodes,
/// with zero boundary flux. matrix = V^{-1} S with S symmetric.
struct DiscreteLaplacian {
    Eigen::SparseMatrix<double> matrix;
    std::vector<double> weights;

    std::vector<double> apply(std::span<const double> u) const;
};

DiscreteLaplacian assemble_laplacian(const RadialGrid& grid, const RadialMetric& metric);

/// Clamped discretization of P on the interior degrees of freedom.
///
/// The stiffness K = E^T S V^{-1} S E + E^T S_alpha E + diag(V a) is symmetric;
/// P = V^{-1} K is symmetric in the dual-cell quadrature inner product and
/// w^T K w is the discrete energy of w. Immutable after construction.
class DiscreteOperator {
public:
    const RadialGrid& grid() const noexcept { return grid_; }
    int node_count() const noexcept { return static_cast<int>(vol_.size()); }
    int dof_count() const noexcept { return dof_count_; }
    /// Index of the first interior node (0 on a ball, 1 on an annulus).
    int first_dof() const noexcept { return first_dof_; }
    /// Dual-cell volumes on all nodes.
    std::span<const double> weights() const noexcept { return vol_; }
    std::span<const double> dof_weights() const noexcept {
        return std::span<const double>(vol_).subspan(static_cast<std::size_t>(first_dof_),
                                                     static_cast<std::size_t>(dof_count_));
    }
    const Eigen::SparseMatrix<double>& stiffness() const noexcept { return K_; }
    /// H^2 Gram matrix ||Delta w||^2 + ||grad w||^2 + ||w||^2 on the dofs.
    Eigen::SparseMatrix<double> h2_gram() const;
    /// Clamped bilaplacian part E^T S V^{-1} S E.
    Eigen::SparseMatrix<double> bilaplacian_stiffness() const;

    double min_alpha() const noexcept { return min_alpha_; }
    double min_a() const noexcept { return min_a_; }

    /// P w for a clamped field given on the dofs.
    std::vector<double> apply(std::span<const double> w) const;
    /// Discrete Laplacian of a full-grid field whose radial derivative at the
    /// inner and outer boundary is prescribed.
    std::vector<double> laplacian(std::span<const double> u, double dudr_inner, double dudr_outer) const;
    /// P u at the dofs for a full-grid field with prescribed boundary derivatives.
    std::vector<double> apply_full(std::span<const double> u, double dudr_inner, double dudr_outer) const;
    /// Solves P z = rhs on the dofs. Requires a nonsingular operator.
    std::vector<double> solve(std::span<const double> rhs) const;

    std::vector<double> embed(std::span<const double> w) const;
    std::vector<double> restrict_to_dofs(std::span<const double> u) const;
    /// Quadrature inner product on the dofs.
    double inner(std::span<const double> x, std::span<const double> y) const;

    // Raw coefficients, exposed for energy evaluation and oracles.
    std::span<const double> flux() const noexcept { return flux_; }
    std::span<const double> alpha_flux() const noexcept { return alpha_flux_; }
    std::span<const double> a_nodal() const noexcept { return a_nodal_; }
    std::span<const double> boundary_density() const noexcept { return boundary_density_; }

private:
    friend DiscreteOperator assemble_paneitz(const ProblemSpec& spec);
    explicit DiscreteOperator(const RadialGrid& grid) : grid_(grid) {}

    RadialGrid grid_;
    int first_dof_ = 0;
    int dof_count_ = 0;
    std::vector<double> vol_;
    std::vector<double> flux_;        // W(r_{i+1/2}) / (r_{i+1} - r_i)
    std::vector<double> alpha_flux_;  // alpha W / dr at half nodes
    std::vector<double> a_nodal_;
    std::vector<double> boundary_density_;  // W at r_in and r_out
    double min_alpha_ = 0.0;
    double min_a_ = 0.0;
    Eigen::SparseMatrix<double> K_;
    std::shared_ptr<const Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> ldlt_;
};

DiscreteOperator assemble_paneitz(const ProblemSpec& spec);

/// Per-term breakdown of I(w) = \int (Delta w)^2 + A(dw, dw) + a w^2 dv.
struct EnergyBreakdown {
    double laplacian = 0.0;
    double gradient = 0.0;
    double potential = 0.0;
    double total = 0.0;
};

/// Quadrature of the energy density of a clamped field (dofs only).
EnergyBreakdown energy_terms(const DiscreteOperator& op, std::span<const double> w);
double energy(const ProblemSpec& spec, const DiscreteOperator& op, std::span<const double> w);

/// \int f |w + h|^q dv for dofs w and a full-grid extension h; requires 2 <= q <= 2#.
double constraint_value(const ProblemSpec& spec, const DiscreteOperator& op, std::span<const double> w,
                        std::span<const double> h, double q);

/// Smallest eigenvalue of the pencil (K, H^2 Gram). Positive values certify coercivity.
double coercivity_check(const ProblemSpec& spec, const DiscreteOperator& op);

}  // namespace paneitz
