#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "lda/risk_cell.hpp"
#include "lda/rng.hpp"

namespace lda {

// Correlated-uniform generator U = Phi(A z) with A A^T equal to the given
// correlation matrix. Near-singular specifications (|rho| = 1) are handled by
// an eigenvalue factorization; eigenvalues below 1e-10 are clipped to zero
// and the repair is flagged. Each sample consumes exactly dim() uniforms.
class GaussianCopulaSpec {
public:
    explicit GaussianCopulaSpec(Eigen::MatrixXd corr);
    // all off-diagonal correlations equal to rho
    static GaussianCopulaSpec exchangeable(std::size_t dim, double rho);

    std::size_t dim() const { return static_cast<std::size_t>(corr_.rows()); }
    const Eigen::MatrixXd& correlation() const { return corr_; }
    bool repaired() const { return repaired_; }

    void sample(RngStream& rng, std::vector<double>& u) const;
    std::vector<double> sample(RngStream& rng) const;

private:
    Eigen::MatrixXd corr_;
    Eigen::MatrixXd factor_;
    bool repaired_ = false;
};

// n independent uniform vectors from the copula.
std::vector<std::vector<double>> sample_gaussian_copula(const GaussianCopulaSpec& spec,
                                                        std::size_t n, RngStream& rng);

// Factor A with A A^T = corr: Cholesky when positive definite, otherwise an
// eigenvalue factorization with small negative eigenvalues clipped to zero
// (flagged through `repaired`). Throws NumericsError when corr is not
// positive semi-definite within tolerance.
Eigen::MatrixXd correlation_factor(const Eigen::MatrixXd& corr, bool& repaired);

// Simulated annual history across cells; outer index is the cell.
struct AnnualPanel {
    std::vector<std::vector<int>> counts;     // [cell][year]
    std::vector<std::vector<double>> losses;  // [cell][year]
};

// Annual counts N_j = P_j^{-1}(U_j) with (U_1..U_d) drawn from the copula
// once per year; severities are independent across events and cells. Years
// are independent and keyed to per-year substreams, so any thread count
// produces the same panel.
AnnualPanel simulate_freq_copula(const std::vector<RiskCell>& cells,
                                 const GaussianCopulaSpec& spec, std::size_t years,
                                 const RngStream& rng, int threads = 1);

// Couples the k-th inter-arrival times of two Poisson processes through a
// bivariate copula, year by year: the k-th uniform pair converts to
// exponential waits by inversion; a process stops at its first overshoot of
// the year end while the shared index keeps advancing until both are done.
AnnualPanel simulate_interarrival_copula(double lambda1, const SeverityModel& severity1,
                                         double lambda2, const SeverityModel& severity2,
                                         const GaussianCopulaSpec& spec, std::size_t years,
                                         const RngStream& rng, int threads = 1);

// Systematic-factor loadings. Frequency channel: Y_j = rho_j . Omega +
// sqrt(1 - rho_j' C rho_j) W_j with C the factor correlation; the optional
// severity channel applies per-event loadings the same way.
struct FactorLoadings {
    Eigen::MatrixXd frequency;   // cells x K
    Eigen::MatrixXd severity;    // cells x K, 0x0 when absent
    Eigen::MatrixXd factor_corr; // K x K

    // single common factor
    explicit FactorLoadings(const std::vector<double>& freq_rho,
                            const std::vector<double>& sev_rho = {});
    FactorLoadings(Eigen::MatrixXd freq_rho, Eigen::MatrixXd sev_rho, Eigen::MatrixXd omega_corr);

    std::size_t cells() const { return static_cast<std::size_t>(frequency.rows()); }
    std::size_t factors() const { return static_cast<std::size_t>(frequency.cols()); }
    bool has_severity_channel() const { return severity.rows() > 0; }
};

struct FactorPanel {
    std::vector<std::vector<int>> counts;     // [cell][year]
    std::vector<std::vector<double>> losses;  // [cell][year]
    std::vector<std::vector<double>> latent;  // [cell][year] frequency scores Y_j(t)
};

FactorPanel simulate_common_factor(const std::vector<RiskCell>& cells,
                                   const FactorLoadings& loadings, std::size_t years,
                                   const RngStream& rng, int threads = 1);

// Common-shock counts: N_j(t) = idiosyncratic Poisson(lambda_j) plus an
// independent p_j-thinning of a shared Poisson(lambda_common) event stream;
// marginally N_j is Poisson(lambda_j + p_j lambda_common).
std::vector<std::vector<int>> simulate_common_shock(const std::vector<double>& idio_lambda,
                                                    double common_lambda,
                                                    const std::vector<double>& participation,
                                                    std::size_t years, const RngStream& rng,
                                                    int threads = 1);

// Annual risk-profile law for one coordinate (intensity or severity
// location), sampled by inversion.
struct ProfileMarginal {
    enum class Kind { Constant, Gamma, Normal };
    Kind kind = Kind::Constant;
    double p1 = 0.0; // value | shape | mean
    double p2 = 0.0; // unused | scale | sd

    static ProfileMarginal constant(double value);
    static ProfileMarginal gamma(double shape, double scale);
    static ProfileMarginal normal(double mean, double sd);

    double quantile(double u) const;
};

// One cell under stochastic profiles: Poisson(lambda(t)) counts and
// Lognormal(mu(t), log_sd) severities, with (lambda(t), mu(t)) redrawn every
// year from the profile marginals.
struct StochasticCell {
    ProfileMarginal intensity;
    ProfileMarginal log_mean;
    double log_sd = 1.0;
};

// Copula over all profile coordinates, ordered (lambda_1..lambda_J,
// mu_1..mu_J).
struct ProfilePriorSpec {
    std::vector<StochasticCell> cells;
    GaussianCopulaSpec copula;

    ProfilePriorSpec(std::vector<StochasticCell> cs, GaussianCopulaSpec cop);
};

AnnualPanel simulate_stochastic_profiles(const ProfilePriorSpec& spec, std::size_t years,
                                         const RngStream& rng, int threads = 1);

// Rank correlation with average-rank tie handling.
double spearman_rho(const std::vector<double>& x, const std::vector<double>& y);

} // namespace lda
