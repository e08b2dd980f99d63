#include "paneitz/profile.hpp"

#include <algorithm>
#include <cmath>

// Boost 1.74's pchip calls isnan unqualified.
using std::isnan;
#include <boost/math/interpolators/pchip.hpp>

#include "paneitz/errors.hpp"

namespace paneitz {

struct RadialProfile::Interpolant {
    boost::math::interpolators::pchip<std::vector<double>> spline;
};

RadialProfile::RadialProfile() : coefficients_{0.0} {}

RadialProfile RadialProfile::constant(double c) {
    return polynomial({c});
}

RadialProfile RadialProfile::polynomial(std::vector<double> coefficients) {
    if (coefficients.empty()) {
        coefficients.push_back(0.0);
    }
    for (double c : coefficients) {
        if (!std::isfinite(c)) {
            throw DomainError("polynomial profile has a non-finite coefficient");
        }
    }
    RadialProfile p;
    p.kind_ = Kind::polynomial;
    p.coefficients_ = std::move(coefficients);
    return p;
}

RadialProfile RadialProfile::table(std::vector<double> radii, std::vector<double> values) {
    if (radii.size() != values.size()) {
        throw DomainError("profile table: radius and value columns differ in length");
    }
    if (radii.size() < 4) {
        throw DomainError("profile table needs at least four samples");
    }
    for (std::size_t i = 1; i < radii.size(); ++i) {
        if (!(radii[i] > radii[i - 1])) {
            throw DomainError("profile table radii must be strictly increasing");
        }
    }
    RadialProfile p;
    p.kind_ = Kind::table;
    p.coefficients_.clear();
    p.radii_ = radii;
    p.values_ = values;
    p.interp_ = std::make_shared<const Interpolant>(
        Interpolant{boost::math::interpolators::pchip<std::vector<double>>(std::move(radii), std::move(values))});
    return p;
}

double RadialProfile::value(double r) const {
    if (kind_ == Kind::polynomial) {
        double acc = 0.0;
        for (auto it = coefficients_.rbegin(); it != coefficients_.rend(); ++it) {
            acc = acc * r + *it;
        }
        return acc;
    }
    const double x = std::clamp(r, radii_.front(), radii_.back());
    return interp_->spline(x);
}

double RadialProfile::derivative(double r) const {
    if (kind_ == Kind::polynomial) {
        double acc = 0.0;
        for (std::size_t k = coefficients_.size(); k-- > 1;) {
            acc = acc * r + static_cast<double>(k) * coefficients_[k];
        }
        return acc;
    }
    if (r < radii_.front() || r > radii_.back()) {
        return 0.0;
    }
    return interp_->spline.prime(r);
}

double RadialProfile::second_derivative(double r) const {
    if (kind_ == Kind::polynomial) {
        double acc = 0.0;
        for (std::size_t k = coefficients_.size(); k-- > 2;) {
            acc = acc * r + static_cast<double>(k * (k - 1)) * coefficients_[k];
        }
        return acc;
    }
    // Piecewise cubic: one-sided differences of the first derivative.
    const double span = radii_.back() - radii_.front();
    const double step = 1e-5 * span;
    const double lo = std::max(radii_.front(), r - step);
    const double hi = std::min(radii_.back(), r + step);
    return (derivative(hi) - derivative(lo)) / (hi - lo);
}

std::vector<double> RadialProfile::sample(std::span<const double> nodes) const {
    std::vector<double> out(nodes.size());
    std::transform(nodes.begin(), nodes.end(), out.begin(), [this](double r) { return value(r); });
    return out;
}

double RadialProfile::max_value(std::span<const double> nodes) const {
    double m = -INFINITY;
    for (double r : nodes) m = std::max(m, value(r));
    return m;
}

double RadialProfile::min_value(std::span<const double> nodes) const {
    double m = INFINITY;
    for (double r : nodes) m = std::min(m, value(r));
    return m;
}

bool RadialProfile::operator==(const RadialProfile& other) const {
    return kind_ == other.kind_ && coefficients_ == other.coefficients_ && radii_ == other.radii_ &&
           values_ == other.values_;
}

}  // namespace paneitz
