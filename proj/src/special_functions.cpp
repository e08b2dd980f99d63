#include "paneitz/special_functions.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "paneitz/errors.hpp"

namespace paneitz {

DimensionParams DimensionParams::make(int n) {
    return DimensionParams{n, critical_exponent(n)};
}

double critical_exponent(int n) {
    if (n < 5) {
        throw DomainError("critical exponent requires n >= 5, got " + std::to_string(n));
    }
    return 2.0 * n / (n - 4.0);
}

double ipq(double p, double q) {
    if (!(p - q > 1.0) || !(q > -1.0)) {
        std::ostringstream os;
        os << "ipq(" << p << ", " << q << "): integral diverges unless p - q > 1 and q > -1";
        throw DomainError(os.str());
    }
    const double a = q + 1.0;
    const double b = p - q - 1.0;
    const double direct = std::tgamma(a) * std::tgamma(b) / std::tgamma(p);
    if (std::isfinite(direct) && direct > 0.0) {
        return direct;
    }
    return std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(p));
}

double sphere_volume(int n) {
    if (n < 1) {
        throw DomainError("sphere_volume requires n >= 1, got " + std::to_string(n));
    }
    const double half = 0.5 * (n + 1);
    return 2.0 * std::pow(std::numbers::pi, half) / std::tgamma(half);
}

double best_constant_K0(int n) {
    if (n < 5) {
        throw DomainError("best_constant_K0 requires n >= 5, got " + std::to_string(n));
    }
    const double nn = n;
    const double inv = nn * (nn * nn - 4.0) * (nn - 4.0) * std::pow(sphere_volume(n), 4.0 / nn) / 16.0;
    return 1.0 / inv;
}

EinsteinCoefficients einstein_coefficients(int n, double R) {
    if (n < 5) {
        throw DomainError("einstein_coefficients requires n >= 5, got " + std::to_string(n));
    }
    const double nn = n;
    return {(nn * nn - 2.0 * nn - 4.0) / (2.0 * nn * (nn - 1.0)) * R,
            (nn - 4.0) * (nn * nn - 4.0) / (16.0 * (nn - 1.0) * (nn - 1.0)) * R * R};
}

namespace {

IdentityCheck make_check(std::string name, double lhs, double rhs, double tol) {
    IdentityCheck c;
    c.name = std::move(name);
    c.lhs = lhs;
    c.rhs = rhs;
    c.tolerance = tol;
    const double scale = std::max(std::abs(lhs), std::abs(rhs));
    c.rel_error = scale == 0.0 ? 0.0 : std::abs(lhs - rhs) / scale;
    c.passed = std::isfinite(c.rel_error) && c.rel_error <= tol;
    return c;
}

}  // namespace

std::vector<IdentityCheck> run_identity_suite(int n_lo, int n_hi, const IpqFunction& ipq_impl,
                                              bool include_recurrences) {
    std::vector<IdentityCheck> out;
    if (include_recurrences) {
        for (int p = 3; p <= 20; ++p) {
            for (int q = 0; q <= p - 2; ++q) {
                std::ostringstream tag;
                tag << "(p=" << p << ",q=" << q << ")";
                out.push_back(make_check("I_{p+1}^q = (p-q-1)/p I_p^q " + tag.str(), ipq_impl(p + 1.0, q),
                                         (p - q - 1.0) / p * ipq_impl(p, q), 1e-12));
                // Gamma(q+2) = (q+1) Gamma(q+1) fixes the factor as (q+1), not q.
                out.push_back(make_check("I_{p+1}^{q+1} = (q+1)/(p-q-1) I_{p+1}^q " + tag.str(),
                                         ipq_impl(p + 1.0, q + 1.0),
                                         (q + 1.0) / (p - q - 1.0) * ipq_impl(p + 1.0, q), 1e-12));
            }
        }
    }
    for (int n = n_lo; n <= n_hi; ++n) {
        const std::string tag = "(n=" + std::to_string(n) + ")";
        out.push_back(make_check("omega_n = 2^{n-1} I_n^{n/2-1} omega_{n-1} " + tag, sphere_volume(n),
                                 std::pow(2.0, n - 1) * ipq_impl(n, 0.5 * n - 1.0) * sphere_volume(n - 1),
                                 1e-10));
        const double nn = n;
        const double inv_formula =
            nn * (nn * nn - 4.0) * (nn - 4.0) * std::pow(sphere_volume(n), 4.0 / nn) / 16.0;
        out.push_back(make_check("K0 * (1/K0 formula) = 1 " + tag, best_constant_K0(n) * inv_formula, 1.0, 1e-12));
    }
    return out;
}

}  // namespace paneitz
