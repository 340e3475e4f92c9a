#include "lda/frequency.hpp"

#include <cmath>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

namespace lda {

namespace {
double log_choose(double n, double k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}
} // namespace

FrequencyModel::FrequencyModel(FreqFamily f, double a, double b) : family_(f), p1_(a), p2_(b) {
    build_table();
}

FrequencyModel FrequencyModel::poisson(double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw std::invalid_argument("Poisson: lambda must be >= 0");
    return FrequencyModel(FreqFamily::Poisson, lambda, 0.0);
}

FrequencyModel FrequencyModel::neg_binomial(double r, double p) {
    if (!(r > 0.0) || !(p > 0.0) || !(p < 1.0))
        throw std::invalid_argument("NegBinomial: need r > 0 and 0 < p < 1");
    return FrequencyModel(FreqFamily::NegBinomial, r, p);
}

FrequencyModel FrequencyModel::binomial(int n, double p) {
    if (n < 1 || !(p >= 0.0) || !(p <= 1.0))
        throw std::invalid_argument("Binomial: need n >= 1 and 0 <= p <= 1");
    return FrequencyModel(FreqFamily::Binomial, static_cast<double>(n), p);
}

double FrequencyModel::pmf(int k) const {
    if (k < 0) return 0.0;
    switch (family_) {
        case FreqFamily::Poisson: {
            const double lam = p1_;
            if (lam == 0.0) return k == 0 ? 1.0 : 0.0;
            return std::exp(k * std::log(lam) - lam - std::lgamma(k + 1.0));
        }
        case FreqFamily::NegBinomial: {
            const double r = p1_, p = p2_;
            return std::exp(std::lgamma(k + r) - std::lgamma(r) - std::lgamma(k + 1.0) +
                            r * std::log(p) + k * std::log1p(-p));
        }
        case FreqFamily::Binomial: {
            const int n = static_cast<int>(p1_);
            const double p = p2_;
            if (k > n) return 0.0;
            if (p == 0.0) return k == 0 ? 1.0 : 0.0;
            if (p == 1.0) return k == n ? 1.0 : 0.0;
            return std::exp(log_choose(n, k) + k * std::log(p) + (n - k) * std::log1p(-p));
        }
    }
    return 0.0;
}

void FrequencyModel::build_table() {
    cdf_table_.clear();
    double c = 0.0;
    int k = 0;
    const int hard_cap = 1 << 22;
    while (true) {
        const double term = pmf(k);
        c += term;
        cdf_table_.push_back(std::min(c, 1.0));
        if (c >= 1.0 - 1e-15) break;
        // the float sum can plateau a hair under the target: once past the
        // mode the terms decay geometrically, so a vanishing term ends it too
        if (term <= 1e-18 && c >= 0.5) break;
        if (family_ == FreqFamily::Binomial && k >= static_cast<int>(p1_)) break;
        if (++k > hard_cap) throw std::invalid_argument("frequency cdf table would be huge");
    }
}

double FrequencyModel::cdf(int k) const {
    if (k < 0) return 0.0;
    if (k >= static_cast<int>(cdf_table_.size())) return 1.0;
    return cdf_table_[static_cast<std::size_t>(k)];
}

double FrequencyModel::mean() const {
    switch (family_) {
        case FreqFamily::Poisson: return p1_;
        case FreqFamily::NegBinomial: return p1_ * (1.0 - p2_) / p2_;
        case FreqFamily::Binomial: return p1_ * p2_;
    }
    return 0.0;
}

double FrequencyModel::variance() const {
    switch (family_) {
        case FreqFamily::Poisson: return p1_;
        case FreqFamily::NegBinomial: return p1_ * (1.0 - p2_) / (p2_ * p2_);
        case FreqFamily::Binomial: return p1_ * p2_ * (1.0 - p2_);
    }
    return 0.0;
}

void FrequencyModel::cumulants(double& k1, double& k2, double& k3) const {
    switch (family_) {
        case FreqFamily::Poisson:
            k1 = k2 = k3 = p1_;
            return;
        case FreqFamily::NegBinomial: {
            const double r = p1_, p = p2_, q = 1.0 - p;
            k1 = r * q / p;
            k2 = r * q / (p * p);
            k3 = r * q * (1.0 + q) / (p * p * p);
            return;
        }
        case FreqFamily::Binomial: {
            const double n = p1_, p = p2_;
            k1 = n * p;
            k2 = n * p * (1.0 - p);
            k3 = n * p * (1.0 - p) * (1.0 - 2.0 * p);
            return;
        }
    }
}

PanjerCoeffs FrequencyModel::panjer_coeffs() const {
    switch (family_) {
        case FreqFamily::Poisson:
            return {0.0, p1_, pmf(0), pmf(1)};
        case FreqFamily::NegBinomial: {
            const double r = p1_, p = p2_;
            return {1.0 - p, (r - 1.0) * (1.0 - p), pmf(0), pmf(1)};
        }
        case FreqFamily::Binomial: {
            const double n = p1_, p = p2_;
            return {-p / (1.0 - p), (n + 1.0) * p / (1.0 - p), pmf(0), pmf(1)};
        }
    }
    return {0, 0, 0, 0};
}

double FrequencyModel::pgf(double s) const {
    switch (family_) {
        case FreqFamily::Poisson: return std::exp(p1_ * (s - 1.0));
        case FreqFamily::NegBinomial: {
            const double r = p1_, p = p2_;
            return std::pow(p / (1.0 - (1.0 - p) * s), r);
        }
        case FreqFamily::Binomial: {
            const double n = p1_, p = p2_;
            return std::pow(1.0 - p + p * s, n);
        }
    }
    return 0.0;
}

std::complex<double> FrequencyModel::pgf(std::complex<double> s) const {
    switch (family_) {
        case FreqFamily::Poisson: return std::exp(p1_ * (s - 1.0));
        case FreqFamily::NegBinomial: {
            const double r = p1_, p = p2_;
            return std::pow(p / (1.0 - (1.0 - p) * s), std::complex<double>(r));
        }
        case FreqFamily::Binomial: {
            const double n = p1_, p = p2_;
            return std::pow(1.0 - p + p * s, std::complex<double>(n));
        }
    }
    return {0.0, 0.0};
}

int FrequencyModel::quantile(double u) const {
    // Smallest k with cdf(k) >= u.
    const auto& t = cdf_table_;
    std::size_t lo = 0, hi = t.size();
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (t[mid] >= u)
            hi = mid;
        else
            lo = mid + 1;
    }
    // u beyond the tabulated mass (< 1e-15 tail): extend linearly.
    if (lo == t.size()) {
        double c = t.back();
        int k = static_cast<int>(t.size());
        while (c < u && k < (1 << 23)) c += pmf(k++);
        return k - 1;
    }
    return static_cast<int>(lo);
}

} // namespace lda
