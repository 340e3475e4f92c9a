#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "lda/rng.hpp"

namespace lda {

// Gamma law in shape/scale form: mean = alpha*beta, Vco = 1/sqrt(alpha).
struct GammaPrior {
    double alpha = 1.0; // shape
    double beta = 1.0;  // scale

    GammaPrior(double shape, double scale);
    double mean() const { return alpha * beta; }
    double variance() const { return alpha * beta * beta; }
    double vco() const;
};

// Conjugate Poisson-Gamma update plus the credibility decomposition of the
// posterior mean: mean = w*Nbar + (1-w)*prior_mean with w = T/(T + 1/beta).
struct CredibilitySummary {
    GammaPrior posterior;
    double weight = 0.0;
    double sample_mean = 0.0;    // Nbar (0 when there is no data)
    double prior_mean = 0.0;     // alpha*beta
    double posterior_mean = 0.0; // equals the credibility combination
};

CredibilitySummary poisson_gamma_posterior(const GammaPrior& prior,
                                           const std::vector<int>& counts);

// Solves alpha*beta = mean and Pr[a <= lambda <= b] = coverage by root search
// in alpha over [1e-4, 1e6]; the residual on the coverage is below 1e-8.
GammaPrior elicit_gamma_prior(double mean, double a, double b, double coverage);

// Marginal log-likelihood of per-cell Poisson counts with Gamma(alpha, beta)
// distributed cell intensities and exposure volumes (lambda integrated out in
// closed form). volumes empty means all exposures are 1.
double eb_marginal_loglik(const std::vector<std::vector<int>>& counts,
                          const std::vector<std::vector<double>>& volumes, double alpha,
                          double beta);

// Maximizes the marginal likelihood over (alpha, beta) by multi-start simplex.
GammaPrior empirical_bayes_gamma(const std::vector<std::vector<int>>& counts,
                                 const std::vector<std::vector<double>>& volumes = {});

// Expert opinions on an intensity, iid Gamma(xi, lambda/xi) given lambda.
struct ExpertOpinions {
    std::vector<double> opinions;
    double xi = 1.0;

    ExpertOpinions(std::vector<double> ops, double dispersion);
    std::size_t size() const { return opinions.size(); }
};

// Density proportional to lambda^nu * exp(-omega*lambda - phi/lambda).
class GigPosterior {
public:
    GigPosterior(double nu, double omega, double phi);

    double nu() const { return nu_; }
    double omega() const { return omega_; }
    double phi() const { return phi_; }

    double mode() const;
    // Posterior mean by adaptive quadrature on a log axis centered at the
    // mode (relative tolerance well inside 1e-8).
    double mean() const;
    double log_density_unnormalized(double lambda) const;

private:
    double nu_, omega_, phi_;
};

// Combines prior, annual counts, and expert opinions into the conjugate
// posterior: nu = alpha - 1 + sum(n) - M*xi, omega = T + 1/beta,
// phi = xi * sum(opinions).
GigPosterior three_source_posterior(const GammaPrior& prior, const std::vector<int>& counts,
                                    const ExpertOpinions& experts);

// --- random-walk Metropolis-Hastings within Gibbs ---------------------------

struct ParamChain {
    std::vector<std::vector<double>> states;         // one row per iteration
    std::vector<std::vector<std::uint8_t>> accepted; // per iteration, per coordinate
    std::vector<std::size_t> accept_count;           // per coordinate
    std::vector<double> scales;
    std::vector<double> lower, upper;
    std::size_t burn_in = 0;

    std::size_t iterations() const { return states.size(); }
    double acceptance_rate(std::size_t coord) const;
    // moments over the post-burn-in part of the chain
    double mean(std::size_t coord) const;
    double variance(std::size_t coord) const;
};

// Coordinate-wise random-walk updates with truncated-Normal proposals on the
// boxes [lower_i, upper_i] (infinite bounds allowed); the acceptance ratio
// carries the forward/backward proposal densities. burn_in defaults to
// iterations/10 and is recorded on the chain, not discarded from it.
ParamChain rw_mh_gibbs(const std::function<double(const std::vector<double>&)>& log_posterior,
                       std::vector<double> lower, std::vector<double> upper,
                       std::vector<double> scales, std::vector<double> init,
                       std::size_t iterations, RngStream& rng,
                       std::optional<std::size_t> burn_in = std::nullopt);

// Repeats pilot runs, scaling each proposal until every per-coordinate
// acceptance rate lies in [0.15, 0.35] (target 0.234). At most 20
// adjustments; tuning draws never feed inference.
std::vector<double> tune_proposals(
    const std::function<double(const std::vector<double>&)>& log_posterior,
    const std::vector<double>& lower, const std::vector<double>& upper,
    std::vector<double> scales, const std::vector<double>& init, std::size_t pilot_iterations,
    const RngStream& rng);

// Second-order expansion of the log-posterior around its mode.
struct GaussianApprox {
    std::vector<double> mode;
    Eigen::MatrixXd covariance;
};

GaussianApprox gaussian_posterior_approx(
    const std::function<double(const std::vector<double>&)>& log_posterior,
    const std::vector<double>& lower, const std::vector<double>& upper);

// Minimum-variance linear pooling of unbiased estimates.
struct CombinedEstimate {
    double value = 0.0;
    double variance = 0.0;
    std::vector<double> weights;
};

CombinedEstimate min_variance_combine(const std::vector<double>& estimates,
                                      const std::vector<double>& variances);

} // namespace lda
