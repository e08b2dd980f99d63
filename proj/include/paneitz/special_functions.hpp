#pragma once

#include <functional>
#include <string>
#include <vector>

namespace paneitz {

/// Ambient dimension together with its critical Sobolev exponent 2n/(n-4).
struct DimensionParams {
    int n = 5;
    double two_sharp = 10.0;

    static DimensionParams make(int n);
};

/// 2n/(n-4); requires n >= 5.
double critical_exponent(int n);

/// I_p^q = \int_0^\infty t^q / (1+t)^p dt = Gamma(q+1) Gamma(p-q-1) / Gamma(p).
///
/// Real exponents are accepted; throws DomainError unless p - q > 1 and q > -1.
double ipq(double p, double q);

/// Volume of the unit n-sphere S^n (so sphere_volume(1) = 2 pi).
double sphere_volume(int n);

/// Sharp constant of ||u||_{2#}^2 <= K0 ||Delta u||_2^2 on R^n.
double best_constant_K0(int n);

struct EinsteinCoefficients {
    double alpha = 0.0;
    double beta = 0.0;
};

/// Coefficients of Delta^2 + alpha Delta + beta on an Einstein manifold with scalar curvature R.
EinsteinCoefficients einstein_coefficients(int n, double R);

/// One row of the identity table produced by run_identity_suite.
struct IdentityCheck {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double rel_error = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

using IpqFunction = std::function<double(double, double)>;

/// Beta-integral recurrences on p in [3, 20], q in [0, p-2]; the sphere-volume
/// recursion and the K0 reciprocal identity for n in [n_lo, n_hi].
/// An empty dimension range (n_lo > n_hi) skips the dimension-indexed rows
/// but still runs the recurrence rows when include_recurrences is set.
std::vector<IdentityCheck> run_identity_suite(int n_lo, int n_hi, const IpqFunction& ipq_impl = ipq,
                                              bool include_recurrences = true);

}  // namespace paneitz
