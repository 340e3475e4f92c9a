#include <cmath>
#include <stdexcept>

#include "lda/aggregate.hpp"
#include "lda/errors.hpp"

namespace lda {

DiscreteDensity panjer_recursion(const FrequencyModel& freq, const DiscreteDensity& sev,
                                 double stop_mass) {
    if (!(stop_mass > 0.0) || stop_mass > 1.0)
        throw std::invalid_argument("stop_mass must lie in (0,1]");

    const PanjerCoeffs c = freq.panjer_coeffs();
    const auto& f = sev.masses;
    const std::size_t m = f.size();

    const double denom = 1.0 - c.a * f[0];
    if (denom == 0.0)
        throw NumericsError("Panjer recursion singular: 1 - a*f0 = 0");

    DiscreteDensity out;
    out.step = sev.step;
    out.masses.assign(m, 0.0);

    // h0 via the pgf at f0 (closed form per family, exact).
    out.masses[0] = freq.pgf(f[0]);
    double acc = out.masses[0];

    // First-mass correction term: zero when p1 = (a+b)p0, i.e. for the pure
    // (a,b,0) members, but kept so zero-modified counts slot in unchanged.
    const double corr = c.p1 - (c.a + c.b) * c.p0;

    for (std::size_t n = 1; n < m && acc < stop_mass; ++n) {
        double s = corr * f[n];
        const double bn = c.b / static_cast<double>(n);
        for (std::size_t j = 1; j <= n; ++j)
            s += (c.a + bn * static_cast<double>(j)) * f[j] * out.masses[n - j];
        const double h = s / denom;
        out.masses[n] = h > 0.0 ? h : 0.0;
        acc += out.masses[n];
    }

    out.tail_mass = 1.0 - acc;
    return out;
}

} // namespace lda
