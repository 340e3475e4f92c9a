#pragma once

// Thin wrappers over Boost.Math special functions used across the library.

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/erf.hpp>

namespace lda {

inline double norm_cdf(double x) {
    static const boost::math::normal_distribution<double> n01;
    return boost::math::cdf(n01, x);
}

inline double norm_ppf(double p) {
    static const boost::math::normal_distribution<double> n01;
    return boost::math::quantile(n01, p);
}

inline double norm_pdf(double x) {
    static const boost::math::normal_distribution<double> n01;
    return boost::math::pdf(n01, x);
}

} // namespace lda
