#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lda/aggregate.hpp"
#include "lda/errors.hpp"
#include "lda/special.hpp"
#include "lda/tasks.hpp"

namespace lda {

namespace {
// Fixed block size decouples the RNG layout from the worker count: block b
// always uses substream b, whether it runs on one thread or sixteen.
constexpr std::size_t kMcBlock = 8192;

double draw_annual_loss(const RiskCell& cell, RngStream& rng) {
    const int n = cell.frequency.sample(rng);
    double z = 0.0;
    for (int i = 0; i < n; ++i) {
        double x = cell.severity.sample(rng);
        if (cell.policy) x = apply_insurance(x, *cell.policy);
        z += x;
    }
    return z;
}
} // namespace

std::vector<double> mc_compound(const RiskCell& cell, std::size_t k, const RngStream& rng,
                                int threads) {
    if (k < 1) throw std::invalid_argument("mc_compound needs at least one draw");
    std::vector<double> out(k);
    parallel_blocks(k, kMcBlock, threads, [&](std::size_t block, std::size_t begin, std::size_t end) {
        RngStream s = rng.substream(block);
        for (std::size_t i = begin; i < end; ++i) out[i] = draw_annual_loss(cell, s);
    });
    return out;
}

QuantileEstimate mc_quantile_ci(std::vector<double> samples, double q, double confidence) {
    if (!(q > 0.0) || !(q < 1.0)) throw std::domain_error("quantile level must be in (0,1)");
    if (!(confidence >= 0.0) || !(confidence < 1.0))
        throw std::domain_error("confidence must lie in [0,1)");
    const auto k = samples.size();
    if (k == 0) throw DataError("empty sample");

    std::sort(samples.begin(), samples.end());
    const double kq = static_cast<double>(k) * q;

    QuantileEstimate est;
    est.confidence = confidence;
    est.sample_size = k;
    est.small_sample = kq * (1.0 - q) < 50.0;

    // Point estimate: order statistic floor(Kq + 1), 1-based.
    const auto point_idx = static_cast<std::size_t>(std::floor(kq + 1.0));
    if (point_idx < 1 || point_idx > k) throw DataError("sample too small for requested quantile");
    est.point = samples[point_idx - 1];

    const double z = confidence == 0.0 ? 0.0 : norm_ppf(0.5 * (1.0 + confidence));
    const double half = z * std::sqrt(kq * (1.0 - q));
    const double l = kq - half;
    const double u = kq + half;
    const double r = std::floor(l);
    const double s = std::ceil(u);
    if (r < 1.0 || s > static_cast<double>(k))
        throw DataError("sample too small for the requested confidence bounds");
    est.lower = samples[static_cast<std::size_t>(r) - 1];
    est.upper = samples[static_cast<std::size_t>(s) - 1];
    return est;
}

double choose_step(const RiskCell& cell, std::size_t m, std::size_t pilot_draws,
                   const RngStream& rng, int threads) {
    if (m < 8) throw std::invalid_argument("grid too small for the step rule");
    std::vector<double> pilot = mc_compound(cell, pilot_draws, rng, threads);
    const auto idx = static_cast<std::size_t>(
        std::floor(0.9999 * static_cast<double>(pilot_draws)));
    std::nth_element(pilot.begin(), pilot.begin() + static_cast<std::ptrdiff_t>(idx), pilot.end());
    const double q9999 = pilot[idx];
    if (!(q9999 > 0.0)) throw NumericsError("pilot 0.9999 quantile is not positive");
    return q9999 / (static_cast<double>(m) / 4.0);
}

} // namespace lda
