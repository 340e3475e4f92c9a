#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "lda/rng.hpp"

namespace lda {

enum class FreqFamily { Poisson, NegBinomial, Binomial };

struct PanjerCoeffs {
    double a;
    double b;
    double p0;
    double p1;
};

// Annual-count law. All three families satisfy the recursion
// p_n = (a + b/n) p_{n-1} for n >= 2. Immutable after construction.
class FrequencyModel {
public:
    static FrequencyModel poisson(double lambda);
    // r > 0 (need not be integer), 0 < p < 1; pmf(k) = C(k+r-1,k) p^r (1-p)^k,
    // i.e. number of failures before the r-th success, p0 = p^r.
    static FrequencyModel neg_binomial(double r, double p);
    static FrequencyModel binomial(int n, double p);

    FreqFamily family() const { return family_; }

    double pmf(int k) const;
    double cdf(int k) const;
    double mean() const;
    double variance() const;
    // First three cumulants of N.
    void cumulants(double& k1, double& k2, double& k3) const;

    PanjerCoeffs panjer_coeffs() const;

    // Probability generating function E[s^N]; complex overload feeds the
    // characteristic-function aggregation path.
    double pgf(double s) const;
    std::complex<double> pgf(std::complex<double> s) const;

    // Inverse cdf by cumulative-sum search over a cached table; one uniform
    // per draw.
    int quantile(double u) const;
    int sample(RngStream& rng) const { return quantile(rng.uniform()); }

    double param1() const { return p1_; } // lambda | r | n
    double param2() const { return p2_; } // unused | p | p

private:
    FrequencyModel(FreqFamily f, double a, double b);
    void build_table();

    FreqFamily family_;
    double p1_ = 0.0;
    double p2_ = 0.0;
    std::vector<double> cdf_table_; // cumulative pmf, extended to 1 - 1e-15
};

} // namespace lda
