#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/gamma.hpp>

#include "lda/aggregate.hpp"
#include "lda/errors.hpp"
#include "lda/special.hpp"

namespace lda {

double single_loss_var(const FrequencyModel& freq, const SeverityModel& sev, double q) {
    if (!(q > 0.0) || !(q < 1.0)) throw std::domain_error("quantile level must be in (0,1)");
    if (!sev.subexponential())
        throw std::domain_error(
            "single-loss approximation needs a subexponential severity family");
    const double en = freq.mean();
    if (en <= 0.0) throw std::domain_error("single-loss approximation undefined for E[N] = 0");
    const double target = 1.0 - (1.0 - q) / en;
    if (!(target > 0.0))
        throw std::domain_error("single-loss approximation needs (1-q)/E[N] < 1");
    return sev.quantile(target);
}

namespace {
// First three cumulants of Z from frequency cumulants and severity central
// moments: k1 = kN1*m, k2 = kN1*v + kN2*m^2, k3 = kN1*c3 + 3*kN2*m*v + kN3*m^3.
void compound_cumulants(const FrequencyModel& freq, const SeverityModel& sev, int order,
                        double& k1, double& k2, double& k3) {
    double n1, n2, n3;
    freq.cumulants(n1, n2, n3);
    const double m1 = sev.moment(1);
    const double m2 = sev.moment(2);
    const double v = m2 - m1 * m1;
    k1 = n1 * m1;
    k2 = n1 * v + n2 * m1 * m1;
    k3 = 0.0;
    if (order >= 3) {
        const double m3 = sev.moment(3);
        const double c3 = m3 - 3.0 * m1 * m2 + 2.0 * m1 * m1 * m1;
        k3 = n1 * c3 + 3.0 * n2 * m1 * v + n3 * m1 * m1 * m1;
    }
}
} // namespace

double moment_match_quantile(const FrequencyModel& freq, const SeverityModel& sev,
                             MomentMatchKind kind, double q) {
    if (!(q > 0.0) || !(q < 1.0)) throw std::domain_error("quantile level must be in (0,1)");
    double k1, k2, k3;
    compound_cumulants(freq, sev, kind == MomentMatchKind::Normal ? 2 : 3, k1, k2, k3);
    if (!(k2 > 0.0)) throw NumericsError("compound variance not positive");

    if (kind == MomentMatchKind::Normal) return k1 + std::sqrt(k2) * norm_ppf(q);

    if (!(k3 > 0.0))
        throw NumericsError("translated-Gamma match needs a positive third cumulant");
    const double scale = k3 / (2.0 * k2);
    const double shape = 4.0 * k2 * k2 * k2 / (k3 * k3);
    const double shift = k1 - shape * scale;
    boost::math::gamma_distribution<double> g(shape, scale);
    return shift + boost::math::quantile(g, q);
}

} // namespace lda
