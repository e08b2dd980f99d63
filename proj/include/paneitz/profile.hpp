#pragma once

#include <memory>
#include <span>
#include <vector>

namespace paneitz {

/// A scalar function of the radius, given either as a polynomial in r or as a
/// monotone (r, value) table interpolated by a shape-preserving cubic.
///
/// Profiles are immutable values; copies share the interpolant.
class RadialProfile {
public:
    enum class Kind { polynomial, table };

    RadialProfile();  // the zero polynomial

    static RadialProfile constant(double c);
    /// coefficients[k] multiplies r^k.
    static RadialProfile polynomial(std::vector<double> coefficients);
    /// Requires strictly increasing radii and at least four samples.
    static RadialProfile table(std::vector<double> radii, std::vector<double> values);

    Kind kind() const noexcept { return kind_; }
    const std::vector<double>& coefficients() const noexcept { return coefficients_; }
    const std::vector<double>& radii() const noexcept { return radii_; }
    const std::vector<double>& values() const noexcept { return values_; }

    double value(double r) const;
    double derivative(double r) const;
    double second_derivative(double r) const;

    std::vector<double> sample(std::span<const double> nodes) const;
    double max_value(std::span<const double> nodes) const;
    double min_value(std::span<const double> nodes) const;

    bool operator==(const RadialProfile& other) const;

private:
    struct Interpolant;

    Kind kind_ = Kind::polynomial;
    std::vector<double> coefficients_;
    std::vector<double> radii_;
    std::vector<double> values_;
    std::shared_ptr<const Interpolant> interp_;
};

}  // namespace paneitz
