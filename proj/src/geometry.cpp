#include "paneitz/geometry.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <sstream>

#include "paneitz/errors.hpp"
#include "paneitz/special_functions.hpp"

namespace paneitz {

namespace {

void check_dimension(int n) {
    if (n < 5) {
        throw DomainError("ambient dimension must be >= 5, got " + std::to_string(n));
    }
}

constexpr int kMinNodes = 8;

}  // namespace

RadialGrid::RadialGrid(std::vector<double> nodes, int n, bool uniform, double cluster_scale)
    : nodes_(std::move(nodes)), n_(n), uniform_(uniform), cluster_scale_(cluster_scale) {
    check_dimension(n_);
    if (nodes_.size() < static_cast<std::size_t>(kMinNodes)) {
        throw DomainError("radial grid needs at least 8 nodes");
    }
    if (!(nodes_.front() >= 0.0)) {
        throw DomainError("radial grid must start at r >= 0");
    }
    for (std::size_t i = 1; i < nodes_.size(); ++i) {
        if (!(nodes_[i] > nodes_[i - 1])) {
            throw DomainError("radial grid nodes must be strictly increasing");
        }
    }
}

RadialGrid RadialGrid::uniform(double r_in, double r_out, int m, int n) {
    if (!(r_out > r_in) || !(r_in >= 0.0)) {
        throw DomainError("uniform grid requires 0 <= r_in < r_out");
    }
    if (m < kMinNodes) {
        throw DomainError("radial grid needs at least 8 nodes");
    }
    std::vector<double> nodes(static_cast<std::size_t>(m));
    const double h = (r_out - r_in) / (m - 1);
    for (int i = 0; i < m; ++i) {
        nodes[static_cast<std::size_t>(i)] = r_in + h * i;
    }
    nodes.back() = r_out;
    return RadialGrid(std::move(nodes), n, true, 0.0);
}

RadialGrid RadialGrid::graded(double r_out, int m, int n, double cluster_scale) {
    if (!(r_out > 0.0) || !(cluster_scale > 0.0)) {
        throw DomainError("graded grid requires r_out > 0 and a positive cluster scale");
    }
    if (m < kMinNodes) {
        throw DomainError("radial grid needs at least 8 nodes");
    }
    const double beta = std::asinh(r_out / cluster_scale);
    std::vector<double> nodes(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        nodes[static_cast<std::size_t>(i)] = cluster_scale * std::sinh(beta * i / (m - 1.0));
    }
    nodes.front() = 0.0;
    nodes.back() = r_out;
    return RadialGrid(std::move(nodes), n, false, cluster_scale);
}

RadialGrid RadialGrid::from_nodes(std::vector<double> nodes, int n) {
    return RadialGrid(std::move(nodes), n, false, 0.0);
}

std::string to_string(MetricKind kind) {
    switch (kind) {
        case MetricKind::flat: return "flat";
        case MetricKind::round_sphere: return "round_sphere";
        case MetricKind::custom: return "custom";
    }
    return "unknown";
}

MetricKind metric_kind_from_string(const std::string& name) {
    if (name == "flat") return MetricKind::flat;
    if (name == "round_sphere") return MetricKind::round_sphere;
    if (name == "custom") return MetricKind::custom;
    throw ConfigError("unknown metric preset '" + name + "' (expected flat, round_sphere or custom)");
}

double RadialMetric::theta(double r) const {
    switch (kind_) {
        case MetricKind::flat: return 1.0;
        case MetricKind::round_sphere: {
            const double s = r < 1e-8 ? 1.0 - r * r / 6.0 : std::sin(r) / r;
            return std::pow(s, n_ - 1);
        }
        case MetricKind::custom: return custom_.value(r);
    }
    return 1.0;
}

double RadialMetric::log_derivative(double r) const {
    switch (kind_) {
        case MetricKind::flat: return 0.0;
        case MetricKind::round_sphere: {
            // cot r - 1/r = -r/3 - r^3/45 - 2r^5/945 - r^7/4725 - ...
            double c;
            if (r < 1e-2) {
                const double r2 = r * r;
                c = -r * (1.0 / 3.0 + r2 * (1.0 / 45.0 + r2 * (2.0 / 945.0 + r2 / 4725.0)));
            } else {
                c = std::cos(r) / std::sin(r) - 1.0 / r;
            }
            return (n_ - 1) * c;
        }
        case MetricKind::custom: return custom_.derivative(r) / custom_.value(r);
    }
    return 0.0;
}

double RadialMetric::theta_prime(double r) const {
    return theta(r) * log_derivative(r);
}

double RadialMetric::density(double r) const {
    return omega_ * std::pow(r, n_ - 1) * theta(r);
}

void RadialMetric::validate_on(const RadialGrid& grid) const {
    for (double r : grid.nodes()) {
        const double t = theta(r);
        if (!(t > 0.0) || !std::isfinite(t)) {
            std::ostringstream os;
            os << "metric density theta is not positive at r = " << r << " (theta = " << t << ")";
            throw DomainError(os.str());
        }
    }
}

RadialMetric make_metric_preset(MetricKind kind, const RadialGrid& grid, const RadialProfile& custom_theta,
                                double custom_R0) {
    RadialMetric m;
    m.kind_ = kind;
    m.n_ = grid.dimension();
    m.omega_ = sphere_volume(m.n_ - 1);
    switch (kind) {
        case MetricKind::flat: m.R0_ = 0.0; break;
        case MetricKind::round_sphere:
            if (!(grid.r_out() < std::numbers::pi)) {
                throw DomainError("round_sphere preset requires r_out < pi");
            }
            m.R0_ = static_cast<double>(m.n_) * (m.n_ - 1);
            break;
        case MetricKind::custom: {
            const double t0 = custom_theta.value(0.0);
            if (std::abs(t0 - 1.0) > 1e-12) {
                std::ostringstream os;
                os << "custom theta must satisfy theta(0) = 1, got " << t0;
                throw DomainError(os.str());
            }
            m.custom_ = custom_theta;
            m.R0_ = custom_R0;
            break;
        }
    }
    m.validate_on(grid);
    return m;
}

double fit_g_expansion(const RadialMetric& metric, const RadialGrid& grid, double window_fraction) {
    if (!grid.is_ball()) {
        throw DomainError("fit_g_expansion needs the center r = 0 inside the domain (ball grid)");
    }
    const double r_max = window_fraction * grid.r_out();
    std::vector<double> rs;
    for (double r : grid.nodes()) {
        if (r > 0.0 && r <= r_max) rs.push_back(r);
    }
    if (rs.size() < 3) {
        throw DomainError("fit window contains fewer than three nodes");
    }
    Eigen::MatrixXd A(static_cast<Eigen::Index>(rs.size()), 2);
    Eigen::VectorXd b(static_cast<Eigen::Index>(rs.size()));
    for (std::size_t i = 0; i < rs.size(); ++i) {
        const double r2 = rs[i] * rs[i];
        const auto k = static_cast<Eigen::Index>(i);
        A(k, 0) = r2;
        A(k, 1) = r2 * r2;
        b(k) = metric.theta(rs[i]) - 1.0;
    }
    // Column scaling keeps the normal equations well conditioned on short windows.
    const Eigen::Vector2d scale(1.0 / (r_max * r_max), 1.0 / std::pow(r_max, 4));
    const Eigen::MatrixXd As = A * scale.asDiagonal();
    const Eigen::VectorXd x = As.colPivHouseholderQr().solve(b);
    return x(0) * scale(0);
}

std::vector<double> dual_cell_volumes(const RadialGrid& grid, const RadialMetric& metric) {
    const auto nodes = grid.nodes();
    const std::size_t m = nodes.size();
    std::vector<double> vol(m);
    auto dens = [&metric](double r) { return metric.density(r); };
    for (std::size_t i = 0; i < m; ++i) {
        const double lo = i == 0 ? nodes[0] : 0.5 * (nodes[i - 1] + nodes[i]);
        const double hi = i + 1 == m ? nodes[m - 1] : 0.5 * (nodes[i] + nodes[i + 1]);
        // Split at the node so the rule sees a smooth integrand on each half.
        vol[i] = detail::gauss_legendre(dens, lo, nodes[i]) + detail::gauss_legendre(dens, nodes[i], hi);
    }
    return vol;
}

double volume_integral(const RadialGrid& grid, const RadialMetric& metric, std::span<const double> values) {
    if (values.size() != static_cast<std::size_t>(grid.size())) {
        throw DomainError("volume_integral: field length does not match the grid");
    }
    const auto vol = dual_cell_volumes(grid, metric);
    double acc = 0.0;
    for (std::size_t i = 0; i < vol.size(); ++i) acc += vol[i] * values[i];
    return acc;
}

}  // namespace paneitz
