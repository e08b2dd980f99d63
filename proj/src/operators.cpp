#include "paneitz/operators.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include "paneitz/errors.hpp"
#include "paneitz/special_functions.hpp"

namespace paneitz {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

ProblemSpec::ProblemSpec(RadialGrid grid_, RadialMetric metric_)
    : grid(std::move(grid_)), metric(std::move(metric_)) {}

CurvatureData ProblemSpec::curvature() const {
    CurvatureData c;
    const double n = dimension();
    c.R0 = metric.R0();
    c.trA0 = n * alpha.value(0.0);
    c.f0 = f.value(0.0);
    c.lap_f_over_f = -n * f.second_derivative(0.0) / c.f0;
    return c;
}

void ProblemSpec::validate() const {
    if (grid.dimension() != metric.dimension()) {
        throw DomainError("grid and metric disagree on the ambient dimension");
    }
    for (double r : grid.nodes()) {
        if (!(f.value(r) > 0.0)) {
            std::ostringstream os;
            os << "f must be positive on the domain; f(" << r << ") = " << f.value(r);
            throw DomainError(os.str());
        }
    }
    metric.validate_on(grid);
}

namespace {

/// Symmetric tridiagonal flux matrix S on all nodes: (S u)_i = sum of c_{i+-1/2}(u_i - u_{i+-1}).
SparseMatrix flux_matrix(std::span<const double> c, int m) {
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(3 * m));
    for (int i = 0; i + 1 < m; ++i) {
        const double ci = c[static_cast<std::size_t>(i)];
        t.emplace_back(i, i, ci);
        t.emplace_back(i + 1, i + 1, ci);
        t.emplace_back(i, i + 1, -ci);
        t.emplace_back(i + 1, i, -ci);
    }
    SparseMatrix S(m, m);
    S.setFromTriplets(t.begin(), t.end());
    return S;
}

SparseMatrix injection(int m, int first, int count) {
    std::vector<Triplet> t;
    for (int k = 0; k < count; ++k) t.emplace_back(first + k, k, 1.0);
    SparseMatrix E(m, count);
    E.setFromTriplets(t.begin(), t.end());
    return E;
}

SparseMatrix diagonal(std::span<const double> d) {
    const auto m = static_cast<Eigen::Index>(d.size());
    SparseMatrix D(m, m);
    D.reserve(Eigen::VectorXi::Constant(m, 1));
    for (Eigen::Index i = 0; i < m; ++i) D.insert(i, i) = d[static_cast<std::size_t>(i)];
    return D;
}

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> x) {
    return {x.data(), static_cast<Eigen::Index>(x.size())};
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
    return {v.data(), v.data() + v.size()};
}

std::vector<double> half_node_coefficients(const RadialGrid& grid, const RadialMetric& metric,
                                           const RadialProfile* weight) {
    const auto x = grid.nodes();
    std::vector<double> c(x.size() - 1);
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
        const double mid = 0.5 * (x[i] + x[i + 1]);
        const double w = weight ? weight->value(mid) : 1.0;
        c[i] = metric.density(mid) * w / (x[i + 1] - x[i]);
    }
    return c;
}

}  // namespace

std::vector<double> DiscreteLaplacian::apply(std::span<const double> u) const {
    if (u.size() != weights.size()) {
        throw DomainError("laplacian: field length does not match the grid");
    }
    return to_std(matrix * as_vector(u));
}

DiscreteLaplacian assemble_laplacian(const RadialGrid& grid, const RadialMetric& metric) {
    DiscreteLaplacian L;
    L.weights = dual_cell_volumes(grid, metric);
    const auto c = half_node_coefficients(grid, metric, nullptr);
    std::vector<double> inv(L.weights.size());
    std::transform(L.weights.begin(), L.weights.end(), inv.begin(), [](double v) { return 1.0 / v; });
    L.matrix = diagonal(inv) * flux_matrix(c, grid.size());
    return L;
}

DiscreteOperator assemble_paneitz(const ProblemSpec& spec) {
    spec.validate();
    const RadialGrid& grid = spec.grid;
    DiscreteOperator op(grid);
    const int m = grid.size();
    op.first_dof_ = grid.is_ball() ? 0 : 1;
    op.dof_count_ = m - 1 - op.first_dof_;
    op.vol_ = dual_cell_volumes(grid, spec.metric);
    op.flux_ = half_node_coefficients(grid, spec.metric, nullptr);
    op.alpha_flux_ = half_node_coefficients(grid, spec.metric, &spec.alpha);
    op.a_nodal_ = spec.a.sample(grid.nodes());
    op.boundary_density_ = {spec.metric.density(grid.r_in()), spec.metric.density(grid.r_out())};

    const auto x = grid.nodes();
    op.min_a_ = *std::min_element(op.a_nodal_.begin(), op.a_nodal_.end());
    op.min_alpha_ = INFINITY;
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
        op.min_alpha_ = std::min(op.min_alpha_, spec.alpha.value(0.5 * (x[i] + x[i + 1])));
    }

    for (double v : op.vol_) {
        if (!(v > 0.0)) {
            throw DomainError("singular assembly: non-positive dual-cell volume");
        }
    }

    const SparseMatrix S = flux_matrix(op.flux_, m);
    const SparseMatrix Sa = flux_matrix(op.alpha_flux_, m);
    const SparseMatrix E = injection(m, op.first_dof_, op.dof_count_);
    std::vector<double> inv_vol(op.vol_.size());
    std::transform(op.vol_.begin(), op.vol_.end(), inv_vol.begin(), [](double v) { return 1.0 / v; });
    const SparseMatrix SE = S * E;
    std::vector<double> va(static_cast<std::size_t>(op.dof_count_));
    for (int k = 0; k < op.dof_count_; ++k) {
        const auto i = static_cast<std::size_t>(op.first_dof_ + k);
        va[static_cast<std::size_t>(k)] = op.vol_[i] * op.a_nodal_[i];
    }
    op.K_ = SparseMatrix(SE.transpose() * diagonal(inv_vol) * SE) + SparseMatrix(E.transpose() * Sa * E) +
            diagonal(va);
    op.K_.makeCompressed();

    auto ldlt = std::make_shared<Eigen::SimplicialLDLT<SparseMatrix>>(op.K_);
    if (ldlt->info() == Eigen::Success) {
        op.ldlt_ = std::move(ldlt);
    }
    return op;
}

Eigen::SparseMatrix<double> DiscreteOperator::bilaplacian_stiffness() const {
    const int m = node_count();
    const SparseMatrix S = flux_matrix(flux_, m);
    const SparseMatrix E = injection(m, first_dof_, dof_count_);
    std::vector<double> inv_vol(vol_.size());
    std::transform(vol_.begin(), vol_.end(), inv_vol.begin(), [](double v) { return 1.0 / v; });
    const SparseMatrix SE = S * E;
    SparseMatrix B = SE.transpose() * diagonal(inv_vol) * SE;
    B.makeCompressed();
    return B;
}

Eigen::SparseMatrix<double> DiscreteOperator::h2_gram() const {
    const int m = node_count();
    const SparseMatrix S = flux_matrix(flux_, m);
    const SparseMatrix E = injection(m, first_dof_, dof_count_);
    SparseMatrix G = bilaplacian_stiffness() + SparseMatrix(E.transpose() * S * E) + diagonal(dof_weights());
    G.makeCompressed();
    return G;
}

std::vector<double> DiscreteOperator::apply(std::span<const double> w) const {
    if (w.size() != static_cast<std::size_t>(dof_count_)) {
        throw DomainError("apply: field length does not match the interior degrees of freedom");
    }
    Eigen::VectorXd y = K_ * as_vector(w);
    const auto v = dof_weights();
    for (Eigen::Index k = 0; k < y.size(); ++k) y(k) /= v[static_cast<std::size_t>(k)];
    return to_std(y);
}

std::vector<double> DiscreteOperator::laplacian(std::span<const double> u, double dudr_inner,
                                                double dudr_outer) const {
    const int m = node_count();
    if (u.size() != static_cast<std::size_t>(m)) {
        throw DomainError("laplacian: field length does not match the grid");
    }
    std::vector<double> out(static_cast<std::size_t>(m), 0.0);
    for (int i = 0; i + 1 < m; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const double F = flux_[k] * (u[k + 1] - u[k]);  // W u' at r_{i+1/2}
        out[k] -= F;
        out[k + 1] += F;
    }
    // Boundary fluxes W u' through r_out (and r_in on an annulus).
    out.back() -= boundary_density_[1] * dudr_outer;
    if (first_dof_ == 1) {
        out.front() += boundary_density_[0] * dudr_inner;
    }
    for (std::size_t k = 0; k < out.size(); ++k) out[k] /= vol_[k];
    return out;
}

std::vector<double> DiscreteOperator::apply_full(std::span<const double> u, double dudr_inner,
                                                 double dudr_outer) const {
    const auto v = laplacian(u, dudr_inner, dudr_outer);
    // Second application needs values only, so the flux closure is irrelevant at dof rows.
    const auto lv = laplacian(v, 0.0, 0.0);
    std::vector<double> out(static_cast<std::size_t>(dof_count_));
    for (int k = 0; k < dof_count_; ++k) {
        const auto i = static_cast<std::size_t>(first_dof_ + k);
        double div_a = 0.0;
        if (i + 1 < u.size()) div_a -= alpha_flux_[i] * (u[i + 1] - u[i]);
        if (i > 0) div_a += alpha_flux_[i - 1] * (u[i] - u[i - 1]);
        out[static_cast<std::size_t>(k)] = lv[i] + div_a / vol_[i] + a_nodal_[i] * u[i];
    }
    return out;
}

std::vector<double> DiscreteOperator::solve(std::span<const double> rhs) const {
    if (!ldlt_) {
        throw SolverError("operator factorization failed (singular stiffness)");
    }
    if (rhs.size() != static_cast<std::size_t>(dof_count_)) {
        throw DomainError("solve: right-hand side length does not match the degrees of freedom");
    }
    Eigen::VectorXd b(dof_count_);
    const auto v = dof_weights();
    for (int k = 0; k < dof_count_; ++k) b(k) = v[static_cast<std::size_t>(k)] * rhs[static_cast<std::size_t>(k)];
    const Eigen::VectorXd z = ldlt_->solve(b);
    return to_std(z);
}

std::vector<double> DiscreteOperator::embed(std::span<const double> w) const {
    std::vector<double> u(static_cast<std::size_t>(node_count()), 0.0);
    std::copy(w.begin(), w.end(), u.begin() + first_dof_);
    return u;
}

std::vector<double> DiscreteOperator::restrict_to_dofs(std::span<const double> u) const {
    return {u.begin() + first_dof_, u.begin() + first_dof_ + dof_count_};
}

double DiscreteOperator::inner(std::span<const double> x, std::span<const double> y) const {
    const auto v = dof_weights();
    double acc = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) acc += v[k] * x[k] * y[k];
    return acc;
}

EnergyBreakdown energy_terms(const DiscreteOperator& op, std::span<const double> w) {
    const auto u = op.embed(w);
    const auto lap = op.laplacian(u, 0.0, 0.0);
    const auto vol = op.weights();
    EnergyBreakdown e;
    for (std::size_t i = 0; i < u.size(); ++i) {
        e.laplacian += vol[i] * lap[i] * lap[i];
        e.potential += vol[i] * op.a_nodal()[i] * u[i] * u[i];
    }
    const auto af = op.alpha_flux();
    for (std::size_t i = 0; i + 1 < u.size(); ++i) {
        const double d = u[i + 1] - u[i];
        e.gradient += af[i] * d * d;
    }
    e.total = e.laplacian + e.gradient + e.potential;
    return e;
}

double energy(const ProblemSpec& /*spec*/, const DiscreteOperator& op, std::span<const double> w) {
    return energy_terms(op, w).total;
}

double constraint_value(const ProblemSpec& spec, const DiscreteOperator& op, std::span<const double> w,
                        std::span<const double> h, double q) {
    const double two_sharp = critical_exponent(spec.dimension());
    if (!(q >= 2.0) || q > two_sharp * (1.0 + 1e-14)) {
        std::ostringstream os;
        os << "constraint exponent q = " << q << " outside [2, " << two_sharp << "]";
        throw DomainError(os.str());
    }
    const auto vol = op.weights();
    const auto nodes = spec.grid.nodes();
    const int first = op.first_dof();
    double acc = 0.0;
    for (std::size_t i = 0; i < vol.size(); ++i) {
        const int k = static_cast<int>(i) - first;
        const double wi = (k >= 0 && k < op.dof_count()) ? w[static_cast<std::size_t>(k)] : 0.0;
        acc += vol[i] * spec.f.value(nodes[i]) * std::pow(std::abs(wi + h[i]), q);
    }
    return acc;
}

double coercivity_check(const ProblemSpec& /*spec*/, const DiscreteOperator& op) {
    const SparseMatrix& K = op.stiffness();
    const SparseMatrix G = op.h2_gram();
    using Factor = Eigen::SimplicialLDLT<SparseMatrix>;
    auto factor_if_definite = [&](double shift) -> std::unique_ptr<Factor> {
        auto f = std::make_unique<Factor>(SparseMatrix(K - shift * G));
        if (f->info() != Eigen::Success || !(f->vectorD().minCoeff() > 0.0)) return nullptr;
        return f;
    };
    // K - sigma G is positive definite for this shift (the bilaplacian part is nonnegative).
    double sigma = std::min({0.0, op.min_alpha(), op.min_a()}) - 1.0;
    auto ldlt = factor_if_definite(sigma);
    if (!ldlt) throw SolverError("coercivity_check: factorization of the shifted pencil failed");

    const Eigen::Index N = K.rows();
    Eigen::VectorXd x = Eigen::VectorXd::Ones(N);
    x /= std::sqrt(x.dot(G * x));
    double rho = x.dot(K * x);
    constexpr int kMaxIterations = 5000;
    for (int it = 0; it < kMaxIterations; ++it) {
        Eigen::VectorXd y = ldlt->solve(G * x);
        // Shifted-inverse estimate, an upper bound for the smallest eigenvalue.
        const double rho_next = sigma + 1.0 / x.dot(G * y);
        y /= std::sqrt(y.dot(G * y));
        x = std::move(y);
        const double change = std::abs(rho_next - rho);
        rho = rho_next;
        if (it > 2 && change <= 1e-13 * std::max(1.0, std::abs(rho))) {
            return rho;
        }
        // Move the shift toward the estimate while Sylvester inertia confirms it stays below.
        if (it % 4 == 3) {
            double step = 0.9 * (rho - sigma);
            for (int tries = 0; tries < 8; ++tries, step *= 0.5) {
                if (auto f = factor_if_definite(sigma + step)) {
                    sigma += step;
                    ldlt = std::move(f);
                    break;
                }
            }
        }
    }
    throw SolverError("coercivity_check: inverse iteration did not converge");
}

}  // namespace paneitz
