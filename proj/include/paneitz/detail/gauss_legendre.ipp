#pragma once

#include <boost/math/quadrature/gauss.hpp>

namespace paneitz::detail {

template <class Fn>
double gauss_legendre(Fn&& fn, double a, double b) {
    return boost::math::quadrature::gauss<double, 8>::integrate(fn, a, b);
}

}  // namespace paneitz::detail
