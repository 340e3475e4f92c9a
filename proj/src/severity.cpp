#include "lda/severity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "lda/errors.hpp"
#include "lda/special.hpp"

namespace lda {
namespace detail {

namespace {

using quad61 = boost::math::quadrature::gauss_kronrod<double, 61>;

void check_support(double x, double lo) {
    if (!(x >= lo)) throw std::domain_error("loss below the support of the severity model");
}

} // namespace

double Severity::moment(int m) const {
    if (m < 1) throw std::invalid_argument("moment order must be >= 1");
    if (!moment_finite(m)) throw NumericsError("requested severity moment diverges");
    const auto g = [this, m](double u) { return std::pow(quantile(u), m); };
    return quad61::integrate(g, 0.0, 1.0, 12, 1e-10);
}

namespace {

class Lognormal final : public Severity {
public:
    Lognormal(double mu, double sigma) : mu_(mu), sigma_(sigma) {
        if (!(sigma > 0.0) || !std::isfinite(mu) || !std::isfinite(sigma))
            throw std::invalid_argument("Lognormal: need finite mu and sigma > 0");
    }
    SevFamily family() const override { return SevFamily::Lognormal; }
    double cdf(double x) const override {
        check_support(x, 0.0);
        if (x == 0.0) return 0.0;
        return norm_cdf((std::log(x) - mu_) / sigma_);
    }
    double quantile(double q) const override { return std::exp(mu_ + sigma_ * norm_ppf(q)); }
    double density(double x) const override {
        check_support(x, 0.0);
        if (x == 0.0) return 0.0;
        return norm_pdf((std::log(x) - mu_) / sigma_) / (x * sigma_);
    }
    double moment(int m) const override {
        return std::exp(m * mu_ + 0.5 * m * m * sigma_ * sigma_);
    }
    bool subexponential() const override { return true; }

private:
    double mu_, sigma_;
};

class Gpd final : public Severity {
public:
    Gpd(double xi, double beta) : xi_(xi), beta_(beta) {
        if (!(xi >= 0.0) || !(beta > 0.0))
            throw std::invalid_argument("GPD: need xi >= 0 and beta > 0");
    }
    SevFamily family() const override { return SevFamily::GPD; }
    double cdf(double x) const override {
        check_support(x, 0.0);
        if (xi_ == 0.0) return -std::expm1(-x / beta_);
        return 1.0 - std::pow(1.0 + xi_ * x / beta_, -1.0 / xi_);
    }
    double quantile(double q) const override {
        if (xi_ == 0.0) return -beta_ * std::log1p(-q);
        return (beta_ / xi_) * std::expm1(-xi_ * std::log1p(-q));
    }
    double density(double x) const override {
        check_support(x, 0.0);
        if (xi_ == 0.0) return std::exp(-x / beta_) / beta_;
        return std::pow(1.0 + xi_ * x / beta_, -1.0 / xi_ - 1.0) / beta_;
    }
    bool moment_finite(int m) const override { return xi_ == 0.0 || m < 1.0 / xi_; }
    bool subexponential() const override { return xi_ > 0.0; }
    // E[X^m] = beta^m m! / prod_{i=1..m}(1 - i xi), for m < 1/xi.
    double moment(int m) const override {
        if (!moment_finite(m)) throw NumericsError("GPD moment of order m diverges for m >= 1/xi");
        double v = 1.0;
        for (int i = 1; i <= m; ++i) v *= beta_ * i / (1.0 - i * xi_);
        return v;
    }

private:
    double xi_, beta_;
};

class GandH final : public Severity {
public:
    GandH(double a, double b, double g, double h) : a_(a), b_(b), g_(g), h_(h) {
        if (!(b > 0.0) || !(h >= 0.0))
            throw std::invalid_argument("g-and-h: need b > 0 and h >= 0");
    }
    SevFamily family() const override { return SevFamily::GandH; }
    double support_min() const override { return -std::numeric_limits<double>::infinity(); }

    double transform(double y) const {
        const double base = g_ == 0.0 ? y : std::expm1(g_ * y) / g_;
        return a_ + b_ * base * std::exp(0.5 * h_ * y * y);
    }
    double dtransform(double y) const {
        const double e = std::exp(0.5 * h_ * y * y);
        if (g_ == 0.0) return b_ * e * (1.0 + h_ * y * y);
        return b_ * e * (std::exp(g_ * y) + h_ * y * std::expm1(g_ * y) / g_);
    }

    // Invert the monotone transform by bracketed bisection on y.
    double invert(double x) const {
        const double ymax = 38.0; // Phi saturates in double beyond here
        if (x <= transform(-ymax)) return -ymax;
        if (x >= transform(ymax)) return ymax;
        double lo = -ymax, hi = ymax;
        for (int it = 0; it < 120; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid == lo || mid == hi) break;
            if (transform(mid) < x)
                lo = mid;
            else
                hi = mid;
            if (hi - lo < 1e-12) break;
        }
        return 0.5 * (lo + hi);
    }

    double cdf(double x) const override { return norm_cdf(invert(x)); }
    double quantile(double q) const override { return transform(norm_ppf(q)); }
    double density(double x) const override {
        const double y = invert(x);
        return norm_pdf(y) / dtransform(y);
    }
    bool moment_finite(int m) const override { return m * h_ < 1.0; }
    double moment(int m) const override {
        if (!moment_finite(m)) throw NumericsError("g-and-h moment diverges: m*h >= 1");
        const auto f = [this, m](double y) { return std::pow(transform(y), m) * norm_pdf(y); };
        return quad61::integrate(f, -38.0, 38.0, 12, 1e-10);
    }

private:
    double a_, b_, g_, h_;
};

class Gb2 final : public Severity {
public:
    Gb2(double a, double b, double p, double q) : a_(a), b_(b), p_(p), q_(q) {
        if (a == 0.0 || !(b > 0.0) || !(p > 0.0) || !(q > 0.0))
            throw std::invalid_argument("GB2: need a != 0, b > 0, p > 0, q > 0");
    }
    SevFamily family() const override { return SevFamily::GB2; }
    double cdf(double x) const override {
        check_support(x, 0.0);
        if (x == 0.0) return 0.0;
        const double t = std::pow(x / b_, a_);
        const double z = t / (1.0 + t);
        const double i = boost::math::ibeta(p_, q_, z);
        return a_ > 0.0 ? i : 1.0 - i;
    }
    double quantile(double q) const override {
        const double target = a_ > 0.0 ? q : 1.0 - q;
        const double z = boost::math::ibeta_inv(p_, q_, target);
        return b_ * std::pow(z / (1.0 - z), 1.0 / a_);
    }
    // Log form keeps extreme tails finite.
    double density(double x) const override {
        check_support(x, 0.0);
        if (x == 0.0) return 0.0;
        const double la = std::log(std::abs(a_)) + (a_ * p_ - 1.0) * std::log(x) -
                          a_ * p_ * std::log(b_) -
                          (std::lgamma(p_) + std::lgamma(q_) - std::lgamma(p_ + q_)) -
                          (p_ + q_) * std::log1p(std::pow(x / b_, a_));
        return std::exp(la);
    }
    bool moment_finite(int m) const override { return p_ + m / a_ > 0.0 && q_ - m / a_ > 0.0; }
    bool subexponential() const override { return true; }
    // E[X^m] = b^m B(p + m/a, q - m/a) / B(p, q).
    double moment(int m) const override {
        if (!moment_finite(m)) throw NumericsError("GB2 moment of order m diverges");
        return std::exp(m * std::log(b_) + std::lgamma(p_ + m / a_) +
                        std::lgamma(q_ - m / a_) - std::lgamma(p_) - std::lgamma(q_));
    }

private:
    double a_, b_, p_, q_;
};

class Gcd final : public Severity {
public:
    Gcd(double alpha, double m, double c) : alpha_(alpha), c_(c) {
        if (!(alpha > 0.0) || !(m > 0.0) || !(c >= 0.0))
            throw std::invalid_argument("GCD: need alpha > 0, m > 0, c >= 0");
        k_ = std::pow(m + c, alpha) - std::pow(c, alpha);
        a_ = std::pow(m + c, alpha) - 2.0 * std::pow(c, alpha);
    }
    SevFamily family() const override { return SevFamily::GCD; }
    double cdf(double x) const override {
        check_support(x, 0.0);
        return 1.0 - k_ / (std::pow(x + c_, alpha_) + a_);
    }
    double quantile(double q) const override {
        return std::pow(k_ / (1.0 - q) - a_, 1.0 / alpha_) - c_;
    }
    double density(double x) const override {
        check_support(x, 0.0);
        const double d = std::pow(x + c_, alpha_) + a_;
        return alpha_ * k_ * std::pow(x + c_, alpha_ - 1.0) / (d * d);
    }
    bool moment_finite(int m) const override { return m < alpha_; }
    bool subexponential() const override { return true; }

private:
    double alpha_, c_, k_, a_;
};

class Empirical final : public Severity {
public:
    explicit Empirical(std::vector<double> sample) : x_(std::move(sample)) {
        if (x_.empty()) throw DataError("empirical severity needs at least one observation");
        for (double v : x_)
            if (!std::isfinite(v)) throw DataError("empirical severity sample contains non-finite values");
        std::sort(x_.begin(), x_.end());
    }
    SevFamily family() const override { return SevFamily::Empirical; }
    double support_min() const override { return std::min(0.0, x_.front()); }
    // Right-continuous step function (1/K) sum I(X_k <= x).
    double cdf(double x) const override {
        const auto it = std::upper_bound(x_.begin(), x_.end(), x);
        return static_cast<double>(it - x_.begin()) / static_cast<double>(x_.size());
    }
    double quantile(double q) const override {
        const double a = q * static_cast<double>(x_.size());
        auto i = static_cast<std::size_t>(std::ceil(a - 1e-9));
        if (i > 0) --i;
        if (i >= x_.size()) i = x_.size() - 1;
        return x_[i];
    }
    double density(double) const override {
        throw NumericsError("empirical severity has no density");
    }
    double moment(int m) const override {
        double s = 0.0;
        for (double v : x_) s += std::pow(v, m);
        return s / static_cast<double>(x_.size());
    }
    const std::vector<double>& sample_points() const { return x_; }

private:
    std::vector<double> x_;
};

class LeftTruncated final : public Severity {
public:
    LeftTruncated(std::shared_ptr<const Severity> base, double L)
        : base_(std::move(base)), L_(L), FL_(base_->cdf(std::max(L, base_->support_min()))) {
        if (FL_ >= 1.0) throw std::domain_error("left truncation leaves an empty tail: F(L) = 1");
    }
    SevFamily family() const override { return SevFamily::LeftTruncated; }
    double support_min() const override { return L_; }
    double cdf(double x) const override {
        check_support(x, L_);
        return (base_->cdf(x) - FL_) / (1.0 - FL_);
    }
    double quantile(double q) const override {
        return base_->quantile(FL_ + q * (1.0 - FL_));
    }
    double density(double x) const override {
        check_support(x, L_);
        return base_->density(x) / (1.0 - FL_);
    }
    bool moment_finite(int m) const override { return base_->moment_finite(m); }
    bool subexponential() const override { return base_->subexponential(); }

private:
    std::shared_ptr<const Severity> base_;
    double L_, FL_;
};

class Spliced final : public Severity {
public:
    Spliced(std::shared_ptr<const Severity> body, double u, std::shared_ptr<const Severity> tail)
        : body_(std::move(body)), tail_(std::move(tail)), u_(u), w_(body_->cdf(u)) {
        if (w_ >= 1.0) throw DataError("splice threshold above the body sample maximum");
        if (w_ <= 0.0) throw DataError("splice threshold below the whole body sample");
    }
    SevFamily family() const override { return SevFamily::Spliced; }
    double support_min() const override { return body_->support_min(); }
    double cdf(double x) const override {
        if (x < u_) return body_->cdf(x);
        return w_ + (1.0 - w_) * tail_->cdf(x - u_);
    }
    double quantile(double q) const override {
        if (q <= w_) return body_->quantile(q);
        return u_ + tail_->quantile((q - w_) / (1.0 - w_));
    }
    double density(double x) const override {
        if (x < u_) return body_->density(x);
        return (1.0 - w_) * tail_->density(x - u_);
    }
    bool moment_finite(int m) const override { return tail_->moment_finite(m); }
    bool subexponential() const override { return tail_->subexponential(); }

private:
    std::shared_ptr<const Severity> body_, tail_;
    double u_, w_;
};

} // namespace
} // namespace detail

SeverityModel SeverityModel::lognormal(double mu, double sigma) {
    return SeverityModel(std::make_shared<detail::Lognormal>(mu, sigma));
}

SeverityModel SeverityModel::gpd(double xi, double beta) {
    return SeverityModel(std::make_shared<detail::Gpd>(xi, beta));
}

SeverityModel SeverityModel::g_and_h(double a, double b, double g, double h) {
    return SeverityModel(std::make_shared<detail::GandH>(a, b, g, h));
}

SeverityModel SeverityModel::gb2(double a, double b, double p, double q) {
    return SeverityModel(std::make_shared<detail::Gb2>(a, b, p, q));
}

SeverityModel SeverityModel::gcd(double alpha, double m, double c) {
    return SeverityModel(std::make_shared<detail::Gcd>(alpha, m, c));
}

SeverityModel SeverityModel::empirical(std::vector<double> sample) {
    return SeverityModel(std::make_shared<detail::Empirical>(std::move(sample)));
}

SeverityModel SeverityModel::left_truncated(const SeverityModel& base, double L) {
    if (L <= base.support_min()) return base;
    return SeverityModel(std::make_shared<detail::LeftTruncated>(base.impl_, L));
}

SeverityModel SeverityModel::splice_gpd_tail(const SeverityModel& body, double u,
                                             const SeverityModel& tail) {
    if (tail.family() != SevFamily::GPD)
        throw std::invalid_argument("splice tail must be a GPD model");
    return SeverityModel(std::make_shared<detail::Spliced>(body.impl_, u, tail.impl_));
}

double SeverityModel::quantile(double q) const {
    if (!(q > 0.0) || !(q < 1.0)) throw std::domain_error("quantile level must be in (0,1)");
    return impl_->quantile(q);
}

double SeverityModel::moment(int m) const { return impl_->moment(m); }

std::vector<double> SeverityModel::sample(RngStream& rng, std::size_t n) const {
    std::vector<double> out(n);
    for (auto& v : out) v = sample(rng);
    return out;
}

} // namespace lda
