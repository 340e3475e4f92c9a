#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lda/aggregate.hpp"
#include "lda/bayes.hpp"
#include "lda/dependence.hpp"
#include "lda/fit.hpp"
#include "lda/insurance.hpp"

namespace lda {

// One [cell <label>] block: the models, an optional per-event cover, an
// optional loss-data file with its reporting threshold, and (for the
// stochastic-profile study) marginals of the latent parameters.
struct CellConfig {
    std::string label;
    std::optional<FrequencyModel> frequency;
    std::optional<SeverityModel> severity;
    std::optional<InsurancePolicy> policy;
    std::string data_path;
    double threshold = 0.0;
    std::optional<FitSevFamily> family;
    std::optional<ProfileMarginal> intensity;
    std::optional<ProfileMarginal> log_mean;
    double log_sd = 1.0;
};

struct AggregateConfig {
    std::vector<AggMethod> methods = {AggMethod::FFT};
    std::vector<double> quantiles = {0.999};
    std::size_t mc_draws = 100000;
    std::size_t grid = std::size_t{1} << 16;
    double theta = 0.0; // 0 -> default 20/grid tilt
    bool write_density = false;
};

struct CapitalConfig {
    AggMethod method = AggMethod::MC;
    double quantile = 0.999;
    double confidence = 0.95;
    std::size_t mc_draws = 100000;
    std::size_t grid = std::size_t{1} << 16;
    bool subtract_expected_loss = false;
    std::optional<double> loss_rho; // exchangeable copula over annual losses
};

struct DependenceConfig {
    std::string construction = "frequency_copula"; // | interarrival | profiles
    std::string channel = "both"; // profiles: intensity | location | both
    std::vector<double> rhos = {0.0, 0.5, 1.0};
    std::size_t years = 100000;
};

struct BiasConfig {
    double lambda = 10.0;
    double mu = 1.0;
    double sigma = 2.0;
    std::vector<int> years = {5, 10, 20, 40, 80};
    int replications = 100;
    std::size_t simulations = 20000;
};

struct CombineConfig {
    std::optional<GammaPrior> prior;
    std::vector<int> counts;
    std::vector<double> experts;
    double expert_xi = 1.0;
    std::size_t mcmc_iterations = 0; // > 0 additionally exports a chain CSV
};

struct RunConfig {
    std::string command; // fit | aggregate | capital | dependence-study | bias-study | combine
    std::uint64_t seed = 0;
    std::string output = ".";
    int threads = 1;
    std::vector<CellConfig> cells;
    AggregateConfig aggregate;
    CapitalConfig capital;
    DependenceConfig dependence;
    BiasConfig bias;
    CombineConfig combine;
};

// Parses the nested key-value config format:
//   top-level keys, then [section ...] blocks ('#' starts a comment).
// Every unknown section or key is a line-numbered ConfigError; a seed is
// mandatory so every run is reproducible by construction.
RunConfig parse_config(const std::string& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin);

// Loss CSV ingestion. Accepted row layouts (an optional header line first):
//   period,amount            all rows belong to one unlabeled record
//   period,cell,amount       rows grouped per cell label
// Amounts must be positive; rows below the reporting threshold are rejected
// and counted, not errored. Periods need not arrive sorted; missing years
// inside the span become zero-event years.
struct LossIngest {
    std::map<std::string, LossRecord> cells;
    std::size_t accepted = 0;
    std::size_t rejected_below_threshold = 0;
};

LossIngest ingest_losses(const std::string& path, double threshold);
LossIngest ingest_losses_text(const std::string& text, double threshold,
                              const std::string& origin);

} // namespace lda
