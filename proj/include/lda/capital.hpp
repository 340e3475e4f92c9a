#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lda/aggregate.hpp"
#include "lda/bayes.hpp"
#include "lda/dependence.hpp"
#include "lda/insurance.hpp"
#include "lda/risk_cell.hpp"
#include "lda/rng.hpp"

namespace lda {

// --- regulatory indicator formulas -----------------------------------------

// 0.15 times the mean of the positive annual gross incomes. Years with
// non-positive income are excluded; all incomes non-positive is an error.
double bia_charge(const std::vector<double>& gross_incomes);

// Standardised-approach charge from an 8-line x 3-year gross-income table:
// (1/3) * sum_years max(sum_lines beta_i GI_i, 0) with the regulatory betas
// (0.18, 0.18, 0.12, 0.15, 0.18, 0.15, 0.12, 0.12).
double tsa_charge(const std::vector<std::vector<double>>& gross_incomes);

// --- capital at fixed (point) parameters ------------------------------------

struct CapitalOptions {
    AggMethod method = AggMethod::MC; // per-cell solver (MC, Panjer or FFT)
    double quantile = 0.999;
    double confidence = 0.95;     // level of the order-statistic bounds (MC)
    std::size_t mc_draws = 100000;
    std::size_t grid_size = 1 << 16; // lattice size for Panjer / FFT
    std::size_t pilot_draws = 20000; // MC pilot for the lattice step rule
    double fft_theta = 0.0;          // tilting constant; 0 = default 20/m
    bool subtract_expected_loss = false; // capital = quantile - expected loss
    int threads = 1;
    // copula between the annual losses of the cells; enables the joint
    // (simulated) total alongside the always-reported perfect-dependence sum
    std::optional<GaussianCopulaSpec> loss_copula;
};

struct CellCapital {
    std::string label;
    AggMethod method = AggMethod::MC;
    QuantileEstimate var;          // net of any per-event cover on the cell
    QuantileEstimate var_gross;    // same solver with the cover stripped
    double expected_loss = 0.0;    // net; empirical (MC) or lattice mean
};

struct CapitalReport {
    double quantile = 0.999;
    std::vector<CellCapital> cells;

    double summed_var = 0.0;       // perfect-dependence total, net of covers
    double summed_var_gross = 0.0;
    std::optional<QuantileEstimate> joint_var; // present iff a loss copula was given
    std::optional<QuantileEstimate> joint_var_gross;

    double expected_loss = 0.0;    // total net expected loss
    bool expected_loss_subtracted = false;

    // headline figure: joint total when a copula was given, else the sum.
    // The insurance reduction is capped at 20% of the gross figure.
    double capital_gross = 0.0;
    double insurance_reduction = 0.0;         // before the cap
    double insurance_reduction_applied = 0.0; // after the cap
    double capital = 0.0;
};

CapitalReport conditional_capital(const std::vector<RiskCell>& cells, const CapitalOptions& opt,
                                  const RngStream& rng);

// --- capital under parameter uncertainty ------------------------------------

// Joint posterior draw: simulation index k plus the stream to consume, out
// come the cells parameterised by the k-th parameter draw.
using JointParameterDraw = std::function<std::vector<RiskCell>(std::size_t, RngStream&)>;

// Post-burn-in row k of a chain, as posterior-draw input. With resample set,
// rows are drawn with replacement (one uniform per call) and k is ignored;
// otherwise running past the end of the chain is an error.
std::vector<double> chain_parameter_draw(const ParamChain& chain, std::size_t k, bool resample,
                                         RngStream& rng);

struct PredictiveOptions {
    double quantile = 0.999;
    double confidence = 0.95;
    int threads = 1;
    // copula over the annual counts of the cells for the one simulated year
    std::optional<GaussianCopulaSpec> count_copula;
};

struct PredictiveResult {
    QuantileEstimate capital; // empirical quantile of the predictive sample
    std::vector<double> samples;
};

// One annual loss per simulation: draw the parameters from the posterior,
// then one year of counts and severities at those parameters (per-event
// covers applied). The quantile of the pooled sample is the capital under
// both process and parameter uncertainty.
PredictiveResult predictive_capital(const JointParameterDraw& draw, std::size_t simulations,
                                    const RngStream& rng, const PredictiveOptions& opt = {});

// Diagnostic alternative: the distribution of the fixed-parameter quantile
// Q_q(theta) over posterior draws, reported as a central interval at a
// caller-chosen level (no default level is endorsed).
struct QuantileOfQuantiles {
    double level = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    std::vector<double> quantiles; // one conditional quantile per outer draw
};

QuantileOfQuantiles quantile_of_quantiles(const JointParameterDraw& draw, std::size_t outer_draws,
                                          std::size_t inner_draws, double q, double level,
                                          const RngStream& rng, int threads = 1);

// --- parameter-uncertainty bias experiment ----------------------------------

struct UncertaintyBiasPoint {
    int years = 0;
    double mean_bias = 0.0; // E[(Q_posterior - Q_mle)] / Q_reference
    double std_error = 0.0; // across replications
};

struct BiasStudyResult {
    double reference_quantile = 0.0; // Q_q at the true parameters (FFT)
    std::vector<UncertaintyBiasPoint> curve;
};

// For each data-history length T: simulate T years from Poisson(lambda0) x
// Lognormal(mu0, sigma0), form the closed-form posterior under constant
// priors, and measure the relative gap between the predictive quantile and
// the fixed-MLE quantile (common random numbers couple the two simulations).
// Averaged over `replications` independent data realisations.
BiasStudyResult parameter_uncertainty_bias(double lambda0, double mu0, double sigma0,
                                           const std::vector<int>& years_grid, int replications,
                                           std::size_t simulations, const RngStream& rng,
                                           int threads = 1);

// --- insurance covers on an event sequence ----------------------------------

enum class CoverMode {
    PerEvent,  // each event recovers independently up to the limit
    Aggregate, // recoveries accrue in event order until the top cover is used
};

struct AggregateCoverResult {
    std::vector<double> recoveries;
    std::vector<double> net;
    double recovered_total = 0.0;
    double net_total = 0.0;
};

// Events must be in within-year time order (recoveries are path-dependent in
// aggregate mode).
AggregateCoverResult apply_aggregate_cover(const std::vector<double>& losses,
                                           const InsurancePolicy& policy, CoverMode mode);

} // namespace lda
