#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "paneitz/profile.hpp"

namespace paneitz {

/// Nodes r_0 < ... < r_{m-1} on [r_in, r_out] for a radial problem in ambient dimension n.
/// r_in = 0 is a geodesic ball around the center; r_in > 0 is an annulus.
class RadialGrid {
public:
    static RadialGrid uniform(double r_in, double r_out, int m, int n);
    /// Ball grid clustered at the center: r(s) = rho sinh(beta s), s uniform in [0, 1].
    static RadialGrid graded(double r_out, int m, int n, double cluster_scale);
    static RadialGrid from_nodes(std::vector<double> nodes, int n);

    double r_in() const noexcept { return nodes_.front(); }
    double r_out() const noexcept { return nodes_.back(); }
    int size() const noexcept { return static_cast<int>(nodes_.size()); }
    int dimension() const noexcept { return n_; }
    bool is_ball() const noexcept { return nodes_.front() == 0.0; }
    bool is_uniform() const noexcept { return uniform_; }
    std::span<const double> nodes() const noexcept { return nodes_; }
    double operator[](int i) const { return nodes_[static_cast<std::size_t>(i)]; }
    /// Cluster scale of a graded grid (0 for uniform grids).
    double cluster_scale() const noexcept { return cluster_scale_; }

    bool operator==(const RadialGrid&) const = default;

private:
    RadialGrid(std::vector<double> nodes, int n, bool uniform, double cluster_scale);

    std::vector<double> nodes_;
    int n_;
    bool uniform_;
    double cluster_scale_;
};

enum class MetricKind { flat, round_sphere, custom };

std::string to_string(MetricKind kind);
MetricKind metric_kind_from_string(const std::string& name);

/// Spherically averaged volume density theta(r) (theta(0) = 1) and the scalar
/// curvature R0 at the center. The Riemannian volume element of a radial
/// function reads dv = omega_{n-1} theta(r) r^{n-1} dr.
class RadialMetric {
public:
    MetricKind kind() const noexcept { return kind_; }
    int dimension() const noexcept { return n_; }
    double R0() const noexcept { return R0_; }
    const RadialProfile& custom_theta() const noexcept { return custom_; }

    double theta(double r) const;
    double theta_prime(double r) const;
    /// theta'/theta, evaluated without cancellation near r = 0.
    double log_derivative(double r) const;
    /// omega_{n-1} r^{n-1} theta(r).
    double density(double r) const;

    /// Throws DomainError if theta <= 0 at any node.
    void validate_on(const RadialGrid& grid) const;

    bool operator==(const RadialMetric&) const = default;

private:
    friend RadialMetric make_metric_preset(MetricKind, const RadialGrid&, const RadialProfile&, double);

    MetricKind kind_ = MetricKind::flat;
    int n_ = 5;
    double R0_ = 0.0;
    double omega_ = 0.0;
    RadialProfile custom_;
};

/// flat: theta = 1, R0 = 0. round_sphere: unit sphere, theta = (sin r / r)^{n-1},
/// R0 = n(n-1); requires r_out < pi. custom: theta and R0 as supplied.
RadialMetric make_metric_preset(MetricKind kind, const RadialGrid& grid, const RadialProfile& custom_theta = {},
                                double custom_R0 = 0.0);

/// Curvature quantities at the center that enter the test-function expansions.
/// lap_f_over_f uses the positive-spectrum convention Delta = -div grad.
struct CurvatureData {
    double R0 = 0.0;
    double trA0 = 0.0;
    double lap_f_over_f = 0.0;
    double f0 = 1.0;
};

/// Least-squares r^2 coefficient of theta on [0, window_fraction * r_out]
/// (model theta - 1 = c r^2 + d r^4). Requires a ball grid.
double fit_g_expansion(const RadialMetric& metric, const RadialGrid& grid, double window_fraction = 0.125);

/// Riemannian volumes of the dual cells [r_{i-1/2}, r_{i+1/2}] clipped to the domain.
std::vector<double> dual_cell_volumes(const RadialGrid& grid, const RadialMetric& metric);

/// \int values dv_g with the dual-cell rule (exact for constants, second order in general).
double volume_integral(const RadialGrid& grid, const RadialMetric& metric, std::span<const double> values);

namespace detail {
/// \int_a^b fn(r) dr by 8-point Gauss-Legendre on a single interval.
template <class Fn>
double gauss_legendre(Fn&& fn, double a, double b);
}  // namespace detail

}  // namespace paneitz

#include "paneitz/detail/gauss_legendre.ipp"
