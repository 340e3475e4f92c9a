#pragma once

#include <algorithm>
#include <stdexcept>

namespace lda {

// Per-event excess-of-loss cover: nothing below the deductible D, full excess
// up to the top cover limit U, capped at U beyond.
struct InsurancePolicy {
    double deductible = 0.0;
    double limit = 0.0;

    InsurancePolicy(double d, double u) : deductible(d), limit(u) {
        if (!(d >= 0.0) || !(u > 0.0))
            throw std::invalid_argument("insurance policy: need deductible >= 0 and limit > 0");
    }
};

inline double insurance_recovery(double x, const InsurancePolicy& p) {
    if (x < p.deductible) return 0.0;
    return std::min(x - p.deductible, p.limit);
}

inline double apply_insurance(double x, const InsurancePolicy& p) {
    return x - insurance_recovery(x, p);
}

} // namespace lda
