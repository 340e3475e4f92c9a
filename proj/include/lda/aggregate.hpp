#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lda/frequency.hpp"
#include "lda/risk_cell.hpp"
#include "lda/rng.hpp"
#include "lda/severity.hpp"

namespace lda {

// Severity (or annual-loss) law on the lattice {0, step, 2*step, ...}.
// masses may sum to less than one; the remainder is recorded in tail_mass.
struct DiscreteDensity {
    double step = 0.0;
    std::vector<double> masses;
    double tail_mass = 0.0;

    std::size_t size() const { return masses.size(); }
};

// Order-statistic quantile estimate from a Monte Carlo sample.
struct QuantileEstimate {
    double point = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double confidence = 0.0;
    std::size_t sample_size = 0;
    bool small_sample = false; // Kq(1-q) below the validity range of the bounds
};

enum class AggMethod { MC, Panjer, FFT, SingleLoss, MomentMatch };

std::string to_string(AggMethod m);

struct QuantileRow {
    double level = 0.0;
    double estimate = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

struct AggDiagnostics {
    double tail_mass = 0.0;
    double clipped_mass = 0.0;   // total negative round-off removed (FFT)
    bool aliasing = false;       // clipped mass beyond round-off tolerance
    double runtime_seconds = 0.0;
};

struct CompoundResult {
    AggMethod method = AggMethod::MC;
    std::vector<QuantileRow> quantiles; // nondecreasing in level
    std::optional<DiscreteDensity> density;
    AggDiagnostics diagnostics;
};

// --- lattice construction -------------------------------------------------

// f0 = F(step/2), f_n = F(n*step + step/2) - F(n*step - step/2). The mass
// beyond the lattice is returned in tail_mass, never silently dropped.
DiscreteDensity discretize_severity(const SeverityModel& model, double step, std::size_t m);

// Same midpoint rule for an arbitrary distribution function on [0, inf)
// (e.g. a severity transformed by an insurance cover).
DiscreteDensity discretize_cdf(const std::function<double(double)>& cdf, double step,
                               std::size_t m);

// Smallest n*step with cumulative mass >= q. Throws when the lattice does not
// reach q (tail_mass >= 1-q): enlarge the grid rather than extrapolate.
double discrete_quantile(const DiscreteDensity& dist, double q);

double discrete_mean(const DiscreteDensity& dist);

// Default grid rule: step = (MC 0.9999-quantile estimate) / (m/4), so the
// lattice extends to about four times the largest quantile of interest.
double choose_step(const RiskCell& cell, std::size_t m, std::size_t pilot_draws,
                   const RngStream& rng, int threads = 1);

// --- exact lattice methods ------------------------------------------------

// Extended (a,b,1) recursion. stop_mass < 1 stops once the accumulated
// compound mass reaches it; the rest is left in tail_mass (the recursion is
// O(M^2), so stopping just past the target quantile is a large saving).
DiscreteDensity panjer_recursion(const FrequencyModel& freq, const DiscreteDensity& sev,
                                 double stop_mass = 1.0);

struct FftStats {
    double clipped_mass = 0.0;
    double max_negative = 0.0;
    bool aliasing = false;
};

// Compound law via the discrete Fourier transform of the exponentially tilted
// severity (tilt theta damps wrap-around). Requires m a power of two.
DiscreteDensity fft_compound(const FrequencyModel& freq, const DiscreteDensity& sev,
                             double theta, FftStats* stats = nullptr);

// --- Monte Carlo ------------------------------------------------------------

// K draws of the annual loss Z = sum of N severities, insurance applied per
// event. Work is split into fixed-size blocks with per-block substreams of
// `rng`, so the result is identical for any thread count.
std::vector<double> mc_compound(const RiskCell& cell, std::size_t k, const RngStream& rng,
                                int threads = 1);

// Nonparametric quantile point estimate and conservative order-statistic
// confidence bounds at level `confidence`.
QuantileEstimate mc_quantile_ci(std::vector<double> samples, double q, double confidence);

// --- closed-form approximations --------------------------------------------

// Heavy-tail single-loss approximation F^{-1}(1 - (1-q)/E[N]).
double single_loss_var(const FrequencyModel& freq, const SeverityModel& sev, double q);

enum class MomentMatchKind { Normal, TranslatedGamma };

// Quantile of a Normal (two moments) or translated Gamma (three moments)
// matched to the compound mean/variance/third cumulant.
double moment_match_quantile(const FrequencyModel& freq, const SeverityModel& sev,
                             MomentMatchKind kind, double q);

} // namespace lda
