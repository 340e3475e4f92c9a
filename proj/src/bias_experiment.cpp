#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "lda/aggregate.hpp"
#include "lda/errors.hpp"
#include "lda/fit.hpp"
#include "lda/optimize.hpp"
#include "lda/special.hpp"

namespace lda {

namespace {

constexpr std::size_t kGrid = std::size_t{1} << 20;
const double kHalfLog2Pi = 0.5 * std::log(8.0 * std::atan(1.0));

double quad(const std::function<double(double)>& f, double lo, double hi) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, hi, 15, 1e-13);
}

// Population ("infinite-sample") fit of a plain or left-truncated normal to
// the target log-amount density: the Kullback-Leibler divergence from the
// target is minimized over (location, log scale). For a Gaussian candidate
// the theta-dependent part of the cross-entropy involves the target only
// through its mass and first two moments, which are computed once by
// adaptive quadrature; the simplex search then runs on the exact objective.
struct NormalFit {
    double mu = 0.0;
    double sigma = 0.0;
};

NormalFit kl_fit_normal(const std::function<double(double)>& dens, double lo, double hi,
                        std::optional<double> trunc_at) {
    const double m0 = quad(dens, lo, hi);
    const double m1 = quad([&](double s) { return s * dens(s); }, lo, hi);
    const double m2 = quad([&](double s) { return s * s * dens(s); }, lo, hi);
    if (!(m0 > 0.0)) throw NumericsError("degenerate target law in population fit");

    auto objective = [&](const std::vector<double>& t) -> double {
        const double mq = t[0];
        const double lsq = t[1];
        if (std::abs(lsq) > 30.0) return 1e100;
        const double sq = std::exp(lsq);
        // -integral of target * log candidate, up to the target's own entropy
        double j = (kHalfLog2Pi + lsq) * m0 + (m2 - 2.0 * mq * m1 + mq * mq * m0) / (2.0 * sq * sq);
        if (trunc_at) {
            const double tail = norm_cdf((mq - *trunc_at) / sq);
            if (!(tail > 0.0)) return 1e100;
            j += m0 * std::log(tail);
        }
        return std::isfinite(j) ? j : 1e100;
    };

    const double mean = m1 / m0;
    const double var = std::max(m2 / m0 - mean * mean, 1e-10);
    std::vector<double> x0 = {mean, 0.5 * std::log(var)};
    auto r = nelder_mead_multistart(objective, x0, {0.25, 0.25});
    if (!r.converged) throw ConvergenceError("population fit did not converge");
    return {r.x[0], std::exp(r.x[1])};
}

// Midpoint-rule lattice masses from an arbitrary annual-severity cdf, same
// convention as discretize_severity.
DiscreteDensity discretize_cdf(const std::function<double(double)>& cdf, double step,
                               std::size_t m) {
    DiscreteDensity out;
    out.step = step;
    out.masses.resize(m);
    double prev = cdf(0.5 * step);
    out.masses[0] = std::max(prev, 0.0);
    for (std::size_t n = 1; n < m; ++n) {
        const double cur = cdf((static_cast<double>(n) + 0.5) * step);
        out.masses[n] = std::max(cur - prev, 0.0);
        prev = cur;
    }
    out.tail_mass = std::max(1.0 - prev, 0.0);
    return out;
}

double compound_q999(double lambda, const DiscreteDensity& sev, double theta) {
    const DiscreteDensity h = fft_compound(FrequencyModel::poisson(lambda), sev, theta);
    return discrete_quantile(h, 0.999);
}

BiasPoint run_fraction(double mu, double sigma, double lambda_obs, double psi,
                       BiasVariant variant) {
    BiasPoint out;
    out.fraction = psi;

    const double lambda_true = lambda_obs / (1.0 - psi);
    // Lattice sized off the heavy-tail single-loss value of the true model at
    // the 0.9999 level, with a factor-8 margin; one lattice serves both the
    // true and the misspecified compound so the quantiles share a grid.
    const double z = norm_ppf(1.0 - 1e-4 / lambda_true);
    const double step = 8.0 * std::exp(mu + sigma * z) / static_cast<double>(kGrid / 4);
    const double theta = 20.0 / static_cast<double>(kGrid);

    const SeverityModel true_sev = SeverityModel::lognormal(mu, sigma);
    out.q_true = compound_q999(lambda_true, discretize_severity(true_sev, step, kGrid), theta);

    if (psi == 0.0) {
        // No reporting threshold: every variant's population fit recovers the
        // data law exactly, so the model quantile is the true quantile.
        out.threshold = 0.0;
        out.q_model = out.q_true;
        out.bias = 0.0;
        return out;
    }

    const double log_l = mu + sigma * norm_ppf(psi);
    out.threshold = std::exp(log_l);
    const double hi = mu + 12.0 * sigma;

    // log-amount density of the reported (left-truncated) law
    auto trunc_log_dens = [&](double s) {
        const double zz = (s - mu) / sigma;
        return norm_pdf(zz) / (sigma * (1.0 - psi));
    };

    switch (variant) {
        case BiasVariant::Naive: {
            // fit an untruncated lognormal straight to the reported law
            const NormalFit f = kl_fit_normal(trunc_log_dens, log_l, hi, std::nullopt);
            const SeverityModel sev = SeverityModel::lognormal(f.mu, f.sigma);
            out.q_model = compound_q999(lambda_obs, discretize_severity(sev, step, kGrid), theta);
            break;
        }
        case BiasVariant::Shifted: {
            // fit a lognormal to the threshold-shifted amounts X - L; the
            // model severity is then L plus that lognormal
            auto shifted_log_dens = [&](double v) {
                const double x = out.threshold + std::exp(v);
                const double zz = (std::log(x) - mu) / sigma;
                return norm_pdf(zz) / (sigma * x) * std::exp(v) / (1.0 - psi);
            };
            const NormalFit f = kl_fit_normal(shifted_log_dens, -46.0, hi, std::nullopt);
            auto cdf = [&](double x) {
                if (x <= out.threshold) return 0.0;
                return norm_cdf((std::log(x - out.threshold) - f.mu) / f.sigma);
            };
            out.q_model = compound_q999(lambda_obs, discretize_cdf(cdf, step, kGrid), theta);
            break;
        }
        case BiasVariant::Truncated: {
            // fit the correctly specified left-truncated lognormal, then
            // reconstruct the ground-up law and intensity
            const NormalFit f = kl_fit_normal(trunc_log_dens, log_l, hi, log_l);
            const double tail = norm_cdf((f.mu - log_l) / f.sigma);
            if (!(tail > 0.0))
                throw NumericsError("recovered model puts no mass above the threshold");
            const SeverityModel sev = SeverityModel::lognormal(f.mu, f.sigma);
            out.q_model =
                compound_q999(lambda_obs / tail, discretize_severity(sev, step, kGrid), theta);
            break;
        }
    }

    out.bias = out.q_model / out.q_true - 1.0;
    return out;
}

} // namespace

std::vector<BiasPoint> truncation_bias_experiment(double sigma, double lambda_observed,
                                                  const std::vector<double>& fractions,
                                                  BiasVariant variant, double mu) {
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
    if (!(lambda_observed > 0.0)) throw std::invalid_argument("intensity must be positive");
    if (!std::isfinite(mu)) throw std::invalid_argument("mu must be finite");
    for (double psi : fractions)
        if (!(psi >= 0.0 && psi < 1.0))
            throw std::invalid_argument("truncation fractions must lie in [0, 1)");

    std::vector<BiasPoint> curve;
    curve.reserve(fractions.size());
    for (double psi : fractions) curve.push_back(run_fraction(mu, sigma, lambda_observed, psi, variant));
    return curve;
}

} // namespace lda
