#include "lda/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "lda/errors.hpp"
#include "lda/fit.hpp"
#include "lda/optimize.hpp"
#include "lda/special.hpp"

namespace lda {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double cdf_safe(double z) {
    if (std::isinf(z)) return z > 0.0 ? 1.0 : 0.0;
    return norm_cdf(z);
}

// mass the Normal(center, scale) proposal puts on [lo, hi]
double box_mass(double center, double scale, double lo, double hi) {
    const double m = cdf_safe((hi - center) / scale) - cdf_safe((lo - center) / scale);
    return std::max(m, 1e-300);
}

void validate_box(const std::vector<double>& lower, const std::vector<double>& upper,
                  std::size_t d) {
    if (d == 0 || lower.size() != d || upper.size() != d)
        throw std::invalid_argument("bounds do not match the parameter dimension");
    for (std::size_t i = 0; i < d; ++i)
        if (!(lower[i] < upper[i])) throw std::invalid_argument("need lower < upper");
}

} // namespace

double ParamChain::acceptance_rate(std::size_t coord) const {
    return static_cast<double>(accept_count.at(coord)) /
           static_cast<double>(std::max<std::size_t>(iterations(), 1));
}

double ParamChain::mean(std::size_t coord) const {
    if (burn_in >= iterations()) throw std::invalid_argument("no draws past the burn-in");
    double s = 0.0;
    for (std::size_t m = burn_in; m < states.size(); ++m) s += states[m].at(coord);
    return s / static_cast<double>(states.size() - burn_in);
}

double ParamChain::variance(std::size_t coord) const {
    const std::size_t n = iterations() - std::min(burn_in, iterations());
    if (n < 2) throw std::invalid_argument("need at least two draws past the burn-in");
    const double mu = mean(coord);
    double s = 0.0;
    for (std::size_t m = burn_in; m < states.size(); ++m) {
        const double d = states[m].at(coord) - mu;
        s += d * d;
    }
    return s / static_cast<double>(n - 1);
}

ParamChain rw_mh_gibbs(const std::function<double(const std::vector<double>&)>& log_posterior,
                       std::vector<double> lower, std::vector<double> upper,
                       std::vector<double> scales, std::vector<double> init,
                       std::size_t iterations, RngStream& rng,
                       std::optional<std::size_t> burn_in) {
    const std::size_t d = init.size();
    validate_box(lower, upper, d);
    if (scales.size() != d) throw std::invalid_argument("one proposal scale per coordinate");
    for (std::size_t i = 0; i < d; ++i) {
        if (!(scales[i] > 0.0) || !std::isfinite(scales[i]))
            throw std::invalid_argument("proposal scales must be positive and finite");
        if (!(init[i] >= lower[i]) || !(init[i] <= upper[i]))
            throw std::invalid_argument("initial state outside the bounds");
    }
    if (iterations == 0) throw std::invalid_argument("need at least one iteration");
    const std::size_t burn = burn_in.value_or(iterations / 10);
    if (burn >= iterations)
        throw std::invalid_argument("burn-in must leave at least one retained draw");

    double lp_cur = log_posterior(init);
    if (!std::isfinite(lp_cur))
        throw std::invalid_argument("log-posterior is not finite at the initial state");

    ParamChain chain;
    chain.states.reserve(iterations);
    chain.accepted.reserve(iterations);
    chain.accept_count.assign(d, 0);
    chain.scales = scales;
    chain.lower = lower;
    chain.upper = upper;
    chain.burn_in = burn;

    std::vector<double> cur = std::move(init);
    std::vector<double> prop = cur;
    for (std::size_t m = 0; m < iterations; ++m) {
        std::vector<std::uint8_t> acc(d, 0);
        for (std::size_t i = 0; i < d; ++i) {
            // draw the proposal by inverting the truncated-Normal cdf; the
            // two uniforms per coordinate are consumed unconditionally so the
            // stream position never depends on the trajectory
            const double s = scales[i];
            const double fa = cdf_safe((lower[i] - cur[i]) / s);
            const double fb = cdf_safe((upper[i] - cur[i]) / s);
            double p = fa + rng.uniform() * (fb - fa);
            p = std::clamp(p, 1e-300, 1.0 - 1e-16);
            prop[i] = std::clamp(cur[i] + s * norm_ppf(p), lower[i], upper[i]);

            double lp_prop = log_posterior(prop);
            if (std::isnan(lp_prop)) lp_prop = -kInf;
            // q(cur|prop)/q(prop|cur): the Gaussian kernels cancel, only the
            // box normalizers survive
            const double log_ratio = lp_prop - lp_cur +
                                     std::log(box_mass(cur[i], s, lower[i], upper[i])) -
                                     std::log(box_mass(prop[i], s, lower[i], upper[i]));
            const double u = rng.uniform();
            if (std::log(u) <= log_ratio) {
                cur[i] = prop[i];
                lp_cur = lp_prop;
                acc[i] = 1;
                ++chain.accept_count[i];
            } else {
                prop[i] = cur[i];
            }
        }
        chain.states.push_back(cur);
        chain.accepted.push_back(std::move(acc));
    }
    return chain;
}

std::vector<double> tune_proposals(
    const std::function<double(const std::vector<double>&)>& log_posterior,
    const std::vector<double>& lower, const std::vector<double>& upper,
    std::vector<double> scales, const std::vector<double>& init, std::size_t pilot_iterations,
    const RngStream& rng) {
    if (pilot_iterations < 1000)
        throw std::invalid_argument("pilot chains need at least 1000 iterations");

    for (int round = 0; round < 20; ++round) {
        RngStream pilot_rng = rng.substream(static_cast<std::uint64_t>(round));
        const ParamChain pilot = rw_mh_gibbs(log_posterior, lower, upper, scales, init,
                                             pilot_iterations, pilot_rng, 0);
        bool all_in_band = true;
        for (std::size_t i = 0; i < scales.size(); ++i) {
            const double rate = pilot.acceptance_rate(i);
            if (rate >= 0.15 && rate <= 0.35) continue;
            all_in_band = false;
            scales[i] *= std::clamp(rate / 0.234, 0.1, 10.0);
        }
        if (all_in_band) return scales;
    }
    throw ConvergenceError("proposal tuning did not reach the acceptance band in 20 rounds");
}

GaussianApprox gaussian_posterior_approx(
    const std::function<double(const std::vector<double>&)>& log_posterior,
    const std::vector<double>& lower, const std::vector<double>& upper) {
    const std::size_t d = lower.size();
    validate_box(lower, upper, d);
    for (std::size_t i = 0; i < d; ++i)
        if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]))
            throw std::invalid_argument("mode search needs a finite box");

    auto objective = [&](const std::vector<double>& x) {
        for (std::size_t i = 0; i < d; ++i)
            if (x[i] < lower[i] || x[i] > upper[i]) return 1e100;
        const double v = log_posterior(x);
        return std::isfinite(v) ? -v : 1e100;
    };
    std::vector<double> x0(d), step(d);
    for (std::size_t i = 0; i < d; ++i) {
        x0[i] = 0.5 * (lower[i] + upper[i]);
        step[i] = (upper[i] - lower[i]) / 8.0;
    }
    const auto r = nelder_mead_multistart(objective, x0, step);
    if (!r.converged) throw ConvergenceError("posterior mode search did not converge");
    for (std::size_t i = 0; i < d; ++i) {
        const double margin = 1e-6 * (upper[i] - lower[i]);
        if (r.x[i] - lower[i] < margin || upper[i] - r.x[i] < margin)
            throw NumericsError("posterior mode sits on the search boundary");
    }

    auto cov = observed_information(log_posterior, r.x);
    if (!cov) throw NumericsError("log-posterior is not curved downward at the mode");
    return GaussianApprox{r.x, *cov};
}

} // namespace lda
