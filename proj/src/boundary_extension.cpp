#include "paneitz/boundary_extension.hpp"

#include <cmath>
#include <sstream>

#include "paneitz/errors.hpp"
#include "paneitz/special_functions.hpp"

namespace paneitz {

std::pair<double, double> boundary_radial_derivatives(const ProblemSpec& spec) {
    // The outward normal is +d/dr on the outer sphere and -d/dr on the inner one.
    const double inner = spec.grid.is_ball() ? 0.0 : -spec.inner.normal_derivative;
    return {inner, spec.outer.normal_derivative};
}

std::vector<double> boundary_lift(const ProblemSpec& spec) {
    const auto nodes = spec.grid.nodes();
    std::vector<double> lift(nodes.size());
    const double R = spec.grid.r_out();
    const auto [d_in, d_out] = boundary_radial_derivatives(spec);
    if (spec.grid.is_ball()) {
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const double r = nodes[i];
            lift[i] = spec.outer.value + d_out * (r * r - R * R) / (2.0 * R);
        }
        return lift;
    }
    const double a = spec.grid.r_in();
    const double L = R - a;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const double s = (nodes[i] - a) / L;
        const double h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        const double h10 = s * (1.0 - s) * (1.0 - s);
        const double h01 = s * s * (3.0 - 2.0 * s);
        const double h11 = s * s * (s - 1.0);
        lift[i] = h00 * spec.inner.value + h10 * L * d_in + h01 * spec.outer.value + h11 * L * d_out;
    }
    return lift;
}

ExtensionField solve_extension(const ProblemSpec& spec, const DiscreteOperator& op) {
    ExtensionField ext;
    ext.coercivity = coercivity_check(spec, op);
    if (!(ext.coercivity > 0.0)) {
        std::ostringstream os;
        os << "operator is not coercive (Lambda estimate " << ext.coercivity
           << " <= 0); the boundary extension is not unique";
        throw CoercivityError(os.str(), ext.coercivity);
    }
    const auto [d_in, d_out] = boundary_radial_derivatives(spec);
    const auto lift = boundary_lift(spec);
    auto rhs = op.apply_full(lift, d_in, d_out);
    for (double& v : rhs) v = -v;
    const auto correction = op.solve(rhs);
    ext.h = lift;
    for (int k = 0; k < op.dof_count(); ++k) {
        ext.h[static_cast<std::size_t>(op.first_dof() + k)] += correction[static_cast<std::size_t>(k)];
    }
    const auto res = op.apply_full(ext.h, d_in, d_out);
    for (double v : res) ext.residual = std::max(ext.residual, std::abs(v));
    return ext;
}

EigenPair first_eigenpair(const ProblemSpec& spec) {
    ProblemSpec bare(spec.grid, spec.metric);
    const DiscreteOperator op = assemble_paneitz(bare);
    const auto& K = op.stiffness();
    const auto vw = op.dof_weights();
    const Eigen::Index N = K.rows();
    Eigen::VectorXd V(N);
    for (Eigen::Index k = 0; k < N; ++k) V(k) = vw[static_cast<std::size_t>(k)];

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(K);
    if (ldlt.info() != Eigen::Success) {
        throw SolverError("first_eigenpair: factorization of the clamped bilaplacian failed");
    }
    auto normalize = [&V](Eigen::VectorXd& x) { x /= std::sqrt(x.dot(V.cwiseProduct(x))); };

    EigenPair out;
    Eigen::VectorXd x = Eigen::VectorXd::Ones(N);
    normalize(x);
    // lambda ~ 1 / <x, K^{-1} V x>_V avoids the cancellation of the Rayleigh quotient on fine grids.
    double lambda = x.dot(K * x);
    constexpr int kMaxIterations = 2000;
    bool converged = false;
    for (int it = 1; it <= kMaxIterations; ++it) {
        Eigen::VectorXd y = ldlt.solve(V.cwiseProduct(x));
        const double next = 1.0 / x.dot(V.cwiseProduct(y));
        normalize(y);
        // The eigenvalue settles quadratically faster than the vector, so test both.
        const Eigen::VectorXd dx = y - x;
        const double shift = std::sqrt(dx.dot(V.cwiseProduct(dx)));
        x = std::move(y);
        out.iterations = it;
        const bool settled = std::abs(next - lambda) <= 1e-13 * next && shift <= 1e-11;
        lambda = next;
        if (settled && it > 2) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        throw SolverError("first_eigenpair: inverse iteration did not converge");
    }
    // Fix the sign so the eigenfield has positive mean.
    if (x.dot(V) < 0.0) x = -x;
    out.lambda1 = lambda;
    out.psi1.assign(x.data(), x.data() + N);
    const auto p = op.apply(out.psi1);
    double r2 = 0.0;
    for (Eigen::Index k = 0; k < N; ++k) {
        const double d = p[static_cast<std::size_t>(k)] - lambda * x(k);
        r2 += V(k) * d * d;
    }
    out.residual = std::sqrt(r2) / lambda;
    return out;
}

double critical_mass(const ProblemSpec& spec, const DiscreteOperator& op, std::span<const double> h) {
    const double two_sharp = critical_exponent(spec.dimension());
    const auto vol = op.weights();
    const auto nodes = spec.grid.nodes();
    double acc = 0.0;
    for (std::size_t i = 0; i < vol.size(); ++i) {
        acc += vol[i] * spec.f.value(nodes[i]) * std::pow(std::abs(h[i]), two_sharp);
    }
    return acc;
}

bool admissibility_check(const ProblemSpec& spec, const DiscreteOperator& op, std::span<const double> h) {
    return critical_mass(spec, op, h) < spec.gamma;
}

}  // namespace paneitz
