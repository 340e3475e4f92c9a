#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lda/aggregate.hpp"
#include "lda/errors.hpp"

namespace lda {

std::string to_string(AggMethod m) {
    switch (m) {
        case AggMethod::MC: return "mc";
        case AggMethod::Panjer: return "panjer";
        case AggMethod::FFT: return "fft";
        case AggMethod::SingleLoss: return "single-loss";
        case AggMethod::MomentMatch: return "moment-match";
    }
    return "?";
}

DiscreteDensity discretize_cdf(const std::function<double(double)>& cdf, double step,
                               std::size_t m) {
    if (!(step > 0.0)) throw std::invalid_argument("discretization step must be positive");
    if (m < 2) throw std::invalid_argument("discretization needs at least two lattice points");

    DiscreteDensity out;
    out.step = step;
    out.masses.resize(m);
    double prev = cdf(0.5 * step);
    out.masses[0] = prev;
    for (std::size_t n = 1; n < m; ++n) {
        const double cur = cdf((static_cast<double>(n) + 0.5) * step);
        out.masses[n] = std::max(0.0, cur - prev);
        prev = cur;
    }
    out.tail_mass = 1.0 - prev;
    return out;
}

DiscreteDensity discretize_severity(const SeverityModel& model, double step, std::size_t m) {
    const double lo = model.support_min();
    return discretize_cdf([&](double x) { return model.cdf(std::max(x, lo)); }, step, m);
}

double discrete_quantile(const DiscreteDensity& dist, double q) {
    if (!(q > 0.0) || !(q < 1.0)) throw std::domain_error("quantile level must be in (0,1)");
    if (dist.tail_mass >= 1.0 - q)
        throw NumericsError("lattice too short for requested quantile: tail mass " +
                            std::to_string(dist.tail_mass) + " >= " + std::to_string(1.0 - q) +
                            "; enlarge the grid");
    double c = 0.0;
    for (std::size_t n = 0; n < dist.masses.size(); ++n) {
        c += dist.masses[n];
        if (c >= q) return static_cast<double>(n) * dist.step;
    }
    // Unreachable given the tail-mass guard, up to round-off.
    return static_cast<double>(dist.masses.size() - 1) * dist.step;
}

double discrete_mean(const DiscreteDensity& dist) {
    double s = 0.0;
    for (std::size_t n = 0; n < dist.masses.size(); ++n)
        s += static_cast<double>(n) * dist.masses[n];
    return s * dist.step;
}

} // namespace lda
