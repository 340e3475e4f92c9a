#include "lda/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "lda/errors.hpp"
#include "lda/optimize.hpp"

namespace lda {

namespace {

void check_counts(const std::vector<int>& counts) {
    for (int n : counts)
        if (n < 0) throw DataError("negative annual count");
}

using quad61 = boost::math::quadrature::gauss_kronrod<double, 61>;

} // namespace

GammaPrior::GammaPrior(double shape, double scale) : alpha(shape), beta(scale) {
    if (!(shape > 0.0) || !std::isfinite(shape) || !(scale > 0.0) || !std::isfinite(scale))
        throw std::invalid_argument("Gamma prior needs positive finite shape and scale");
}

double GammaPrior::vco() const { return 1.0 / std::sqrt(alpha); }

CredibilitySummary poisson_gamma_posterior(const GammaPrior& prior,
                                           const std::vector<int>& counts) {
    check_counts(counts);
    const double t = static_cast<double>(counts.size());
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);

    // fold one period at a time: alpha += n, beta <- beta/(1+beta). This is
    // algebraically alpha + sum(n) and beta/(1+beta*T), and it makes feeding
    // the posterior back in as next year's prior replay the exact same
    // floating-point steps as the batch call — sequential and batch updates
    // agree bit for bit.
    double a = prior.alpha, b = prior.beta;
    for (int n : counts) {
        a += static_cast<double>(n);
        b /= 1.0 + b;
    }

    const GammaPrior post(a, b);
    CredibilitySummary out{post, 0.0, 0.0, prior.mean(), 0.0};
    // evaluate 1-w as 1/(1+beta*T): the subtraction cancels badly when the
    // weight is close to one (vague prior or long history)
    const double complement = 1.0 / (1.0 + prior.beta * t);
    out.weight = prior.beta * t * complement; // = T / (T + 1/beta)
    out.sample_mean = t > 0.0 ? total / t : 0.0;
    out.posterior_mean = out.weight * out.sample_mean + complement * out.prior_mean;

    // tripwire for broken conjugacy arithmetic; the slack term covers the
    // rounding the per-period fold accumulates on long histories
    const double tol = (1e-12 + t * 0x1p-50) * std::max(1.0, std::abs(post.mean()));
    if (std::abs(out.posterior_mean - post.mean()) > tol)
        throw std::logic_error("credibility identity violated");
    return out;
}

GammaPrior elicit_gamma_prior(double mean, double a, double b, double coverage) {
    if (!(a > 0.0) || !(a < mean) || !(mean < b))
        throw std::invalid_argument("need 0 < a < mean < b");
    if (!(coverage > 0.0) || !(coverage < 1.0))
        throw std::invalid_argument("coverage must be in (0,1)");

    auto residual = [&](double alpha) {
        const boost::math::gamma_distribution<double> g(alpha, mean / alpha);
        return boost::math::cdf(g, b) - boost::math::cdf(g, a) - coverage;
    };

    double lo = 1e-4, hi = 1e6;
    double flo = residual(lo), fhi = residual(hi);
    if (flo == 0.0) return GammaPrior(lo, mean / lo);
    if (fhi == 0.0) return GammaPrior(hi, mean / hi);
    if ((flo > 0.0) == (fhi > 0.0))
        throw NumericsError("no Gamma shape in [1e-4, 1e6] attains the requested coverage");

    // bisection in log-shape; the interval collapses long before 200 rounds
    for (int it = 0; it < 200; ++it) {
        const double mid = std::sqrt(lo * hi);
        const double fmid = residual(mid);
        if ((fmid > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
        if (hi - lo <= 1e-12 * hi) break;
    }
    const double alpha = 0.5 * (lo + hi);
    if (std::abs(residual(alpha)) >= 1e-8)
        throw NumericsError("coverage root search did not reach the 1e-8 residual");
    return GammaPrior(alpha, mean / alpha);
}

double eb_marginal_loglik(const std::vector<std::vector<int>>& counts,
                          const std::vector<std::vector<double>>& volumes, double alpha,
                          double beta) {
    if (!(alpha > 0.0) || !(beta > 0.0)) return -std::numeric_limits<double>::infinity();
    if (!volumes.empty() && volumes.size() != counts.size())
        throw DataError("volumes shape does not match counts");

    double ll = 0.0;
    for (std::size_t j = 0; j < counts.size(); ++j) {
        const auto& cell = counts[j];
        const std::vector<double>* vol = volumes.empty() ? nullptr : &volumes[j];
        if (vol && vol->size() != cell.size())
            throw DataError("volumes shape does not match counts");
        double s = 0.0, vtot = 0.0;
        for (std::size_t k = 0; k < cell.size(); ++k) {
            if (cell[k] < 0) throw DataError("negative annual count");
            const double v = vol ? (*vol)[k] : 1.0;
            if (!(v > 0.0)) throw DataError("exposure volumes must be positive");
            const double n = cell[k];
            s += n;
            vtot += v;
            ll += n * std::log(v) - std::lgamma(n + 1.0);
        }
        // integrate the cell intensity out of Poisson(lambda*V) with a
        // Gamma(alpha, beta) mixing law
        ll += std::lgamma(alpha + s) - std::lgamma(alpha) - alpha * std::log(beta) -
              (alpha + s) * std::log(vtot + 1.0 / beta);
    }
    return ll;
}

GammaPrior empirical_bayes_gamma(const std::vector<std::vector<int>>& counts,
                                 const std::vector<std::vector<double>>& volumes) {
    if (counts.size() < 2) throw DataError("empirical Bayes needs at least two cells");

    // moment-matched initials from the per-cell rates
    std::vector<double> rates;
    for (std::size_t j = 0; j < counts.size(); ++j) {
        double s = 0.0, vtot = 0.0;
        for (std::size_t k = 0; k < counts[j].size(); ++k) {
            s += counts[j][k];
            vtot += volumes.empty() ? 1.0 : volumes[j][k];
        }
        if (vtot > 0.0) rates.push_back(s / vtot);
    }
    const double grand =
        std::accumulate(rates.begin(), rates.end(), 0.0) / static_cast<double>(rates.size());
    if (!(grand > 0.0)) throw DataError("no events across cells: nothing to fit a prior to");
    double var = 0.0;
    for (double r : rates) var += (r - grand) * (r - grand);
    var = std::max(var / static_cast<double>(rates.size()), 0.04 * grand * grand);

    double alpha0 = std::clamp(grand * grand / var, 0.05, 1e4);
    const double beta0 = grand / alpha0;

    auto objective = [&](const std::vector<double>& t) {
        if (std::abs(t[0]) > 30.0 || std::abs(t[1]) > 30.0) return 1e100;
        const double ll = eb_marginal_loglik(counts, volumes, std::exp(t[0]), std::exp(t[1]));
        return std::isfinite(ll) ? -ll : 1e100;
    };
    const auto r =
        nelder_mead_multistart(objective, {std::log(alpha0), std::log(beta0)}, {0.5, 0.5});
    if (!r.converged) throw ConvergenceError("marginal-likelihood maximization did not converge");
    return GammaPrior(std::exp(r.x[0]), std::exp(r.x[1]));
}

ExpertOpinions::ExpertOpinions(std::vector<double> ops, double dispersion)
    : opinions(std::move(ops)), xi(dispersion) {
    if (!(xi > 0.0) || !std::isfinite(xi))
        throw std::invalid_argument("expert dispersion must be positive");
    for (double u : opinions)
        if (!(u > 0.0)) throw std::invalid_argument("expert opinions must be positive");
}

GigPosterior::GigPosterior(double nu, double omega, double phi)
    : nu_(nu), omega_(omega), phi_(phi) {
    if (!(omega > 0.0) || !(phi >= 0.0) || !std::isfinite(nu))
        throw std::invalid_argument("need omega > 0 and phi >= 0");
    if (phi == 0.0 && !(nu > -1.0))
        throw NumericsError("posterior is not normalizable: phi = 0 requires nu > -1");
}

double GigPosterior::mode() const {
    // stationary point of nu*ln(l) - omega*l - phi/l; collapses to max(nu,0)/omega at phi=0
    return (nu_ + std::sqrt(nu_ * nu_ + 4.0 * omega_ * phi_)) / (2.0 * omega_);
}

double GigPosterior::log_density_unnormalized(double lambda) const {
    if (!(lambda > 0.0)) return -std::numeric_limits<double>::infinity();
    return nu_ * std::log(lambda) - omega_ * lambda - phi_ / lambda;
}

double GigPosterior::mean() const {
    // integrate on the log axis u = ln(lambda/center): both tails of the
    // transformed integrand decay at least exponentially, and scaling by the
    // exponent at u = 0 keeps everything in range
    const double center = phi_ > 0.0 ? mode() : (nu_ + 1.0) / omega_;
    auto exponent = [&](double u, double extra) {
        const double lam = center * std::exp(u);
        return (nu_ + 1.0 + extra) * std::log(lam) - omega_ * lam -
               (phi_ > 0.0 ? phi_ / lam : 0.0);
    };
    const double scale = exponent(0.0, 0.0);
    const double lo = phi_ > 0.0 ? -60.0 : -std::max(60.0, 140.0 / (nu_ + 1.0));
    const double hi = 60.0;

    const double i0 = quad61::integrate(
        [&](double u) { return std::exp(exponent(u, 0.0) - scale); }, lo, hi, 15, 1e-11);
    const double i1 = quad61::integrate(
        [&](double u) { return std::exp(exponent(u, 1.0) - scale); }, lo, hi, 15, 1e-11);
    if (!(i0 > 0.0) || !std::isfinite(i0) || !std::isfinite(i1))
        throw NumericsError("posterior mean quadrature failed");
    return i1 / i0;
}

GigPosterior three_source_posterior(const GammaPrior& prior, const std::vector<int>& counts,
                                    const ExpertOpinions& experts) {
    check_counts(counts);
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    const double m = static_cast<double>(experts.size());
    const double nu = prior.alpha - 1.0 + total - m * experts.xi;
    const double omega = static_cast<double>(counts.size()) + 1.0 / prior.beta;
    const double phi =
        experts.xi * std::accumulate(experts.opinions.begin(), experts.opinions.end(), 0.0);
    return GigPosterior(nu, omega, phi);
}

CombinedEstimate min_variance_combine(const std::vector<double>& estimates,
                                      const std::vector<double>& variances) {
    if (estimates.empty() || estimates.size() != variances.size())
        throw std::invalid_argument("need matching nonempty estimates and variances");
    for (double v : variances)
        if (!(v > 0.0)) throw std::invalid_argument("variances must be positive");

    double total_precision = 0.0;
    for (double v : variances) total_precision += 1.0 / v;

    CombinedEstimate out;
    out.weights.reserve(estimates.size());
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        const double w = (1.0 / variances[i]) / total_precision;
        out.weights.push_back(w);
        out.value += w * estimates[i];
    }
    out.variance = 1.0 / total_precision;
    return out;
}

} // namespace lda
