#pragma once

#include <memory>
#include <vector>

#include "lda/rng.hpp"

namespace lda {

enum class SevFamily { Lognormal, GPD, GandH, GB2, GCD, Empirical, Spliced, LeftTruncated };

namespace detail {
// Implementation node. Immutable after construction; shared across threads.
class Severity {
public:
    virtual ~Severity() = default;
    virtual SevFamily family() const = 0;
    virtual double cdf(double x) const = 0;
    virtual double quantile(double q) const = 0;
    virtual double density(double x) const = 0;
    // Raw moment E[X^m]; default integrates quantile(u)^m over (0,1).
    virtual double moment(int m) const;
    virtual bool moment_finite(int /*m*/) const { return true; }
    virtual double support_min() const { return 0.0; }
    // True for the heavy-tail families where the single-loss tail
    // approximation is valid (Lognormal, GPD xi>0, GB2, GCD).
    virtual bool subexponential() const { return false; }
};
} // namespace detail

// Value-semantics handle over an immutable severity law. Sampling is by
// inversion: exactly one uniform per draw, for every family.
class SeverityModel {
public:
    static SeverityModel lognormal(double mu, double sigma);
    // xi >= 0 only (heavy or exponential tail); xi < 0 rejected.
    static SeverityModel gpd(double xi, double beta);
    // X = a + b (e^{gY}-1)/g e^{hY^2/2}, Y standard normal; b > 0, h >= 0 so
    // the transform is strictly increasing. Support is the whole real line.
    static SeverityModel g_and_h(double a, double b, double g, double h);
    static SeverityModel gb2(double a, double b, double p, double q);
    // F(x) = 1 - K/((x+c)^alpha + A) with K = (m+c)^alpha - c^alpha,
    // A = (m+c)^alpha - 2 c^alpha; median at m.
    static SeverityModel gcd(double alpha, double m, double c);
    static SeverityModel empirical(std::vector<double> sample);
    static SeverityModel left_truncated(const SeverityModel& base, double L);
    // Empirical body below u, GPD tail above; cdf continuous at u with value
    // F_n(u). u must lie within the body sample range.
    static SeverityModel splice_gpd_tail(const SeverityModel& body, double u,
                                         const SeverityModel& tail);

    SevFamily family() const { return impl_->family(); }
    double cdf(double x) const { return impl_->cdf(x); }
    double quantile(double q) const;
    double density(double x) const { return impl_->density(x); }
    double moment(int m) const;
    bool moment_finite(int m) const { return impl_->moment_finite(m); }
    bool subexponential() const { return impl_->subexponential(); }
    double mean() const { return moment(1); }
    double support_min() const { return impl_->support_min(); }

    double sample(RngStream& rng) const { return quantile_unchecked(rng.uniform()); }
    std::vector<double> sample(RngStream& rng, std::size_t n) const;

private:
    explicit SeverityModel(std::shared_ptr<const detail::Severity> impl) : impl_(std::move(impl)) {}
    double quantile_unchecked(double q) const { return impl_->quantile(q); }

    std::shared_ptr<const detail::Severity> impl_;
};

} // namespace lda
