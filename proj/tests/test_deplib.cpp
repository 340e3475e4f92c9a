#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "lda/dependence.hpp"
#include "lda/errors.hpp"
#include "lda/frequency.hpp"
#include "lda/rng.hpp"
#include "lda/severity.hpp"
#include "lda/special.hpp"

using namespace lda;

namespace {

RngStream test_stream(std::uint64_t path) {
    return RngStream::derive(20260815u, StreamDomain::Dependence, {path});
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double mx = mean_of(x), my = mean_of(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

std::vector<double> to_double(const std::vector<int>& v) {
    return {v.begin(), v.end()};
}

double sample_covariance(const std::vector<double>& x, const std::vector<double>& y) {
    const double mx = mean_of(x), my = mean_of(y);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - mx) * (y[i] - my);
    return s / static_cast<double>(x.size() - 1);
}

// Pearson goodness-of-fit statistic against Poisson(lambda): individual bins
// lo+1..hi-1 plus the two merged tails {<=lo} and {>=hi}. Degrees of freedom
// for the comparison: (hi - lo + 1) - 1.
double poisson_chi2(const std::vector<int>& sample, double lambda, int lo, int hi) {
    const FrequencyModel m = FrequencyModel::poisson(lambda);
    const int nbins = hi - lo + 1;
    std::vector<double> prob(static_cast<std::size_t>(nbins), 0.0);
    prob.front() = m.cdf(lo);
    for (int k = lo + 1; k < hi; ++k) prob[static_cast<std::size_t>(k - lo)] = m.pmf(k);
    prob.back() = 1.0 - m.cdf(hi - 1);
    std::vector<double> obs(static_cast<std::size_t>(nbins), 0.0);
    for (int n : sample) obs[static_cast<std::size_t>(std::clamp(n, lo, hi) - lo)] += 1.0;
    const double n = static_cast<double>(sample.size());
    double chi2 = 0.0;
    for (int b = 0; b < nbins; ++b) {
        const double e = n * prob[static_cast<std::size_t>(b)];
        chi2 += (obs[static_cast<std::size_t>(b)] - e) * (obs[static_cast<std::size_t>(b)] - e) / e;
    }
    return chi2;
}

double empirical_quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const auto n = static_cast<double>(v.size());
    const auto idx = static_cast<std::size_t>(
        std::clamp(std::ceil(q * n) - 1.0, 0.0, n - 1.0));
    return v[idx];
}

std::vector<RiskCell> two_lognormal_cells() {
    std::vector<RiskCell> cells;
    cells.emplace_back("cell1", FrequencyModel::poisson(5.0), SeverityModel::lognormal(1.0, 2.0));
    cells.emplace_back("cell2", FrequencyModel::poisson(10.0), SeverityModel::lognormal(1.0, 2.0));
    return cells;
}

// Copula over (lambda_1, lambda_2, mu_1, mu_2) coupling the intensity pair
// and/or the location pair at the same strength, with no cross-block terms.
GaussianCopulaSpec profile_copula(double rho_lambda, double rho_mu) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Identity(4, 4);
    c(0, 1) = c(1, 0) = rho_lambda;
    c(2, 3) = c(3, 2) = rho_mu;
    return GaussianCopulaSpec(c);
}

std::vector<StochasticCell> gamma_normal_cells() {
    return {
        {ProfileMarginal::gamma(2.5, 2.0), ProfileMarginal::normal(1.0, 1.0), 2.0},
        {ProfileMarginal::gamma(5.0, 2.0), ProfileMarginal::normal(1.0, 1.0), 2.0},
    };
}

double profile_loss_rho(double rho_lambda, double rho_mu, std::size_t years, std::uint64_t path) {
    const ProfilePriorSpec spec(gamma_normal_cells(), profile_copula(rho_lambda, rho_mu));
    const RngStream rng = test_stream(path);
    const AnnualPanel panel = simulate_stochastic_profiles(spec, years, rng, 4);
    return spearman_rho(panel.losses[0], panel.losses[1]);
}

// 0.999 quantiles: with fixed seeds a genuine marginal distortion lands orders
// of magnitude above these, while the false-alarm rate across the many
// goodness-of-fit checks below stays negligible.
constexpr double kChi2Crit15 = 37.6973; // 15 dof
constexpr double kChi2Crit18 = 42.3124; // 18 dof

} // namespace

TEST_CASE("gaussian copula: construction, validation, and repair flag") {
    const GaussianCopulaSpec ind(Eigen::MatrixXd::Identity(3, 3));
    CHECK(ind.dim() == 3);
    CHECK_FALSE(ind.repaired());

    const GaussianCopulaSpec ex = GaussianCopulaSpec::exchangeable(4, 0.5);
    CHECK(ex.dim() == 4);
    CHECK(ex.correlation()(0, 1) == 0.5);
    CHECK(ex.correlation()(2, 2) == 1.0);
    CHECK_FALSE(ex.repaired());

    // singular comonotone specification goes through the spectral repair path
    const GaussianCopulaSpec como = GaussianCopulaSpec::exchangeable(2, 1.0);
    CHECK(como.repaired());

    CHECK_THROWS_AS(GaussianCopulaSpec(Eigen::MatrixXd::Identity(2, 3)), std::invalid_argument);
    CHECK_THROWS_AS(GaussianCopulaSpec(Eigen::MatrixXd(0, 0)), std::invalid_argument);

    Eigen::MatrixXd bad_diag = Eigen::MatrixXd::Identity(2, 2);
    bad_diag(0, 0) = 0.9;
    CHECK_THROWS_AS(GaussianCopulaSpec{bad_diag}, std::invalid_argument);

    Eigen::MatrixXd asym = Eigen::MatrixXd::Identity(2, 2);
    asym(0, 1) = 0.3;
    asym(1, 0) = 0.2;
    CHECK_THROWS_AS(GaussianCopulaSpec{asym}, std::invalid_argument);

    CHECK_THROWS_AS(GaussianCopulaSpec::exchangeable(2, 1.5), std::invalid_argument);

    // indefinite matrix (eigenvalues 1.9, 1.9, -0.8): not a correlation matrix
    Eigen::MatrixXd indef(3, 3);
    indef << 1.0, 0.9, 0.9, 0.9, 1.0, -0.9, 0.9, -0.9, 1.0;
    CHECK_THROWS_AS(GaussianCopulaSpec{indef}, NumericsError);
}

TEST_CASE("gaussian copula: every sample consumes exactly dim uniforms") {
    const GaussianCopulaSpec a(Eigen::MatrixXd::Identity(3, 3));
    const GaussianCopulaSpec b = GaussianCopulaSpec::exchangeable(3, 0.7);
    const GaussianCopulaSpec c = GaussianCopulaSpec::exchangeable(3, 1.0); // repaired

    RngStream ra = test_stream(1), rb = test_stream(1), rc = test_stream(1);
    for (int i = 0; i < 10; ++i) {
        (void)a.sample(ra);
        (void)b.sample(rb);
        (void)c.sample(rc);
    }
    const double next_a = ra.uniform();
    CHECK(next_a == rb.uniform());
    CHECK(next_a == rc.uniform());
}

TEST_CASE("gaussian copula: uniform marginals and independence at identity") {
    const GaussianCopulaSpec spec(Eigen::MatrixXd::Identity(3, 3));
    RngStream rng = test_stream(2);
    const std::size_t n = 100000;
    std::vector<std::vector<double>> cols(3, std::vector<double>(n));
    std::vector<double> u;
    for (std::size_t i = 0; i < n; ++i) {
        spec.sample(rng, u);
        for (std::size_t j = 0; j < 3; ++j) cols[j][i] = u[j];
    }
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(std::abs(mean_of(cols[j]) - 0.5) < 0.003);
        CHECK(std::abs(variance_of(cols[j]) - 1.0 / 12.0) < 0.001);
        for (double v : {cols[j][0], cols[j][n - 1]}) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
    }
    CHECK(std::abs(spearman_rho(cols[0], cols[1])) < 0.012);
    CHECK(std::abs(spearman_rho(cols[0], cols[2])) < 0.012);
    CHECK(std::abs(spearman_rho(cols[1], cols[2])) < 0.012);
}

TEST_CASE("gaussian copula: rank correlation matches (6/pi) asin(rho/2)") {
    // closed-form rank correlation of the bivariate gaussian copula
    const std::vector<std::pair<double, double>> cases = {
        {0.25, 0.239358526048609},
        {0.50, 0.482583739530997},
        {0.75, 0.734143761234739},
    };
    const std::size_t n = 400000;
    std::uint64_t path = 3;
    for (const auto& [rho, target] : cases) {
        const GaussianCopulaSpec spec = GaussianCopulaSpec::exchangeable(2, rho);
        RngStream rng = test_stream(path++);
        std::vector<double> x(n), y(n), u;
        for (std::size_t i = 0; i < n; ++i) {
            spec.sample(rng, u);
            x[i] = u[0];
            y[i] = u[1];
        }
        const double est = spearman_rho(x, y);
        CAPTURE(rho);
        CHECK(std::abs(est - target) < 0.008);
    }
}

TEST_CASE("gaussian copula: comonotone limit collapses to a single uniform") {
    const GaussianCopulaSpec spec = GaussianCopulaSpec::exchangeable(2, 1.0);
    RngStream rng = test_stream(6);
    const std::size_t n = 2000;
    std::vector<double> x(n), y(n), u;
    double max_diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        spec.sample(rng, u);
        x[i] = u[0];
        y[i] = u[1];
        max_diff = std::max(max_diff, std::abs(u[0] - u[1]));
    }
    CHECK(max_diff <= 1e-14);
    CHECK(spearman_rho(x, y) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("annual count coupling: dependence bands and monotonicity") {
    const std::vector<RiskCell> cells = two_lognormal_cells();
    const std::size_t n = 400000;

    auto run = [&](double rho, std::uint64_t path) {
        const GaussianCopulaSpec spec = GaussianCopulaSpec::exchangeable(2, rho);
        return simulate_freq_copula(cells, spec, n, test_stream(path), 4);
    };

    SUBCASE("independent cells stay uncorrelated") {
        const AnnualPanel p = run(0.0, 10);
        CHECK(std::abs(pearson(to_double(p.counts[0]), to_double(p.counts[1]))) < 0.008);
        CHECK(std::abs(spearman_rho(p.losses[0], p.losses[1])) < 0.008);
    }

    SUBCASE("half-strength coupling") {
        const AnnualPanel p = run(0.5, 11);
        const double count_corr = pearson(to_double(p.counts[0]), to_double(p.counts[1]));
        const double loss_rho = spearman_rho(p.losses[0], p.losses[1]);
        CHECK(std::abs(count_corr - 0.491230558362334) < 0.008);
        CHECK(std::abs(loss_rho - 0.107871290700082) < 0.008);

        // annual-count marginals are preserved: Poisson gof not rejected at 1%
        CHECK(poisson_chi2(p.counts[0], 5.0, 0, 15) < kChi2Crit15);
        CHECK(poisson_chi2(p.counts[1], 10.0, 2, 20) < kChi2Crit18);
        CHECK(std::abs(mean_of(to_double(p.counts[0])) - 5.0) < 0.02);
        CHECK(std::abs(mean_of(to_double(p.counts[1])) - 10.0) < 0.03);
    }

    SUBCASE("full-strength coupling leaves the annual losses far from comonotone") {
        const AnnualPanel p = run(1.0, 12);
        const double count_corr = pearson(to_double(p.counts[0]), to_double(p.counts[1]));
        const double loss_rho = spearman_rho(p.losses[0], p.losses[1]);
        CHECK(std::abs(count_corr - 0.986797525583852) < 0.005);
        CHECK(std::abs(loss_rho - 0.215943836599839) < 0.008);
        // coupling the counts alone caps the attainable loss dependence well
        // below one: severities stay independent
        CHECK(loss_rho < 0.5);
        CHECK(count_corr < 1.0);
    }

    SUBCASE("loss rank correlation grows with the copula parameter") {
        std::vector<double> est;
        std::uint64_t path = 13;
        for (double rho : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            const GaussianCopulaSpec spec = GaussianCopulaSpec::exchangeable(2, rho);
            const AnnualPanel p = simulate_freq_copula(cells, spec, 200000, test_stream(path++), 4);
            est.push_back(spearman_rho(p.losses[0], p.losses[1]));
        }
        for (std::size_t i = 1; i < est.size(); ++i) CHECK(est[i] > est[i - 1]);
        CHECK(est.back() < 0.5);
    }

    SUBCASE("aggregating dependent cells still diversifies at half strength") {
        const AnnualPanel p = run(0.5, 18);
        std::vector<double> total(n);
        for (std::size_t t = 0; t < n; ++t) total[t] = p.losses[0][t] + p.losses[1][t];
        const double q_total = empirical_quantile(total, 0.999);
        const double q_split =
            empirical_quantile(p.losses[0], 0.999) + empirical_quantile(p.losses[1], 0.999);
        MESSAGE("0.999 quantile of the pooled annual loss: " << q_total
                                                             << "  sum of cell quantiles: " << q_split);
        CHECK(q_total < q_split);
    }

    SUBCASE("validation") {
        CHECK_THROWS_AS(simulate_freq_copula({}, GaussianCopulaSpec::exchangeable(2, 0.5), 10,
                                             test_stream(19)),
                        std::invalid_argument);
        CHECK_THROWS_AS(
            simulate_freq_copula(cells, GaussianCopulaSpec::exchangeable(3, 0.5), 10, test_stream(19)),
            std::invalid_argument);
    }
}

TEST_CASE("annual count coupling: identical panels for any thread count") {
    const std::vector<RiskCell> cells = two_lognormal_cells();
    const GaussianCopulaSpec spec = GaussianCopulaSpec::exchangeable(2, 0.5);
    const AnnualPanel a = simulate_freq_copula(cells, spec, 2500, test_stream(20), 1);
    const AnnualPanel b = simulate_freq_copula(cells, spec, 2500, test_stream(20), 4);
    CHECK(a.counts == b.counts);
    CHECK(a.losses == b.losses);
}

TEST_CASE("inter-arrival coupling: marginals stay Poisson") {
    const SeverityModel sev = SeverityModel::lognormal(1.0, 2.0);
    const GaussianCopulaSpec spec(Eigen::MatrixXd::Identity(2, 2));
    const AnnualPanel p =
        simulate_interarrival_copula(5.0, sev, 10.0, sev, spec, 100000, test_stream(30), 4);

    CHECK(poisson_chi2(p.counts[0], 5.0, 0, 15) < kChi2Crit15);
    CHECK(poisson_chi2(p.counts[1], 10.0, 2, 20) < kChi2Crit18);
    CHECK(std::abs(mean_of(to_double(p.counts[0])) - 5.0) < 0.03);
    CHECK(std::abs(mean_of(to_double(p.counts[1])) - 10.0) < 0.04);
    CHECK(std::abs(pearson(to_double(p.counts[0]), to_double(p.counts[1])))
          < 0.012);
}

TEST_CASE("inter-arrival coupling: full-strength waits vs direct count coupling") {
    const SeverityModel sev = SeverityModel::lognormal(1.0, 2.0);
    const std::size_t n = 200000;
    const GaussianCopulaSpec como = GaussianCopulaSpec::exchangeable(2, 1.0);
    const AnnualPanel p =
        simulate_interarrival_copula(5.0, sev, 10.0, sev, como, n, test_stream(31), 4);

    // marginals survive the coupling
    CHECK(poisson_chi2(p.counts[0], 5.0, 0, 15) < kChi2Crit15);
    CHECK(std::abs(mean_of(to_double(p.counts[0])) - 5.0) < 0.02);
    CHECK(std::abs(mean_of(to_double(p.counts[1])) - 10.0) < 0.03);

    const double count_corr = pearson(to_double(p.counts[0]), to_double(p.counts[1]));
    const double loss_rho = spearman_rho(p.losses[0], p.losses[1]);
    CHECK(std::abs(count_corr - 0.706656812918548) < 0.010);
    CHECK(std::abs(loss_rho - 0.154515630382501) < 0.010);
    CHECK(count_corr > 0.5);

    // coupling the waits transmits less annual dependence than coupling the
    // annual counts directly at the same copula parameter
    const AnnualPanel direct = simulate_freq_copula(two_lognormal_cells(), como, n, test_stream(32), 4);
    const double direct_count_corr =
        pearson(to_double(direct.counts[0]), to_double(direct.counts[1]));
    const double direct_loss_rho = spearman_rho(direct.losses[0], direct.losses[1]);
    MESSAGE("count corr (waits) " << count_corr << " vs (direct) " << direct_count_corr
                                  << "; loss rank corr " << loss_rho << " vs " << direct_loss_rho);
    CHECK(count_corr < direct_count_corr - 0.05);
    CHECK(loss_rho < direct_loss_rho - 0.02);
}

TEST_CASE("inter-arrival coupling: validation and determinism") {
    const SeverityModel sev = SeverityModel::lognormal(0.0, 1.0);
    CHECK_THROWS_AS(simulate_interarrival_copula(5.0, sev, 10.0, sev,
                                                 GaussianCopulaSpec::exchangeable(3, 0.5), 10,
                                                 test_stream(33)),
                    std::invalid_argument);
    CHECK_THROWS_AS(simulate_interarrival_copula(0.0, sev, 10.0, sev,
                                                 GaussianCopulaSpec::exchangeable(2, 0.5), 10,
                                                 test_stream(33)),
                    std::invalid_argument);
    CHECK_THROWS_AS(simulate_interarrival_copula(5.0, sev, -1.0, sev,
                                                 GaussianCopulaSpec::exchangeable(2, 0.5), 10,
                                                 test_stream(33)),
                    std::invalid_argument);

    const GaussianCopulaSpec spec = GaussianCopulaSpec::exchangeable(2, 0.7);
    const AnnualPanel a = simulate_interarrival_copula(5.0, sev, 10.0, sev, spec, 2500,
                                                       test_stream(34), 1);
    const AnnualPanel b = simulate_interarrival_copula(5.0, sev, 10.0, sev, spec, 2500,
                                                       test_stream(34), 4);
    CHECK(a.counts == b.counts);
    CHECK(a.losses == b.losses);
}

TEST_CASE("systematic factor: loadings validation") {
    CHECK_THROWS_AS(FactorLoadings(std::vector<double>{}), std::invalid_argument);
    CHECK_THROWS_AS(FactorLoadings({1.2}), std::invalid_argument);
    CHECK_THROWS_AS(FactorLoadings({0.5, 0.5}, {0.5}), std::invalid_argument);

    Eigen::MatrixXd freq(1, 2);
    freq << 1.0, 1.0;
    Eigen::MatrixXd corr(2, 2);
    corr << 1.0, 0.5, 0.5, 1.0;
    // residual variance 1 - rho' C rho = -2 is infeasible
    CHECK_THROWS_AS(FactorLoadings(freq, Eigen::MatrixXd(), corr), std::invalid_argument);

    Eigen::MatrixXd bad_corr(3, 3);
    bad_corr.setIdentity();
    CHECK_THROWS_AS(FactorLoadings(freq, Eigen::MatrixXd(), bad_corr), std::invalid_argument);

    Eigen::MatrixXd asym(2, 2);
    asym << 1.0, 0.3, 0.2, 1.0;
    Eigen::MatrixXd small(1, 2);
    small << 0.3, 0.3;
    CHECK_THROWS_AS(FactorLoadings(small, Eigen::MatrixXd(), asym), std::invalid_argument);

    const FactorLoadings ok({0.7, 0.4});
    CHECK(ok.cells() == 2);
    CHECK(ok.factors() == 1);
    CHECK_FALSE(ok.has_severity_channel());
    CHECK(ok.frequency(0, 0) == 0.7);
    CHECK(ok.factor_corr(0, 0) == 1.0);

    const FactorLoadings with_sev({0.7, 0.4}, {0.2, 0.9});
    CHECK(with_sev.has_severity_channel());
    CHECK(with_sev.severity(1, 0) == 0.9);
}

TEST_CASE("systematic factor: frequency channel dependence") {
    const std::vector<RiskCell> cells = two_lognormal_cells();
    const std::size_t n = 200000;

    SUBCASE("zero loadings decouple the cells") {
        const FactorLoadings loadings({0.0, 0.0});
        const FactorPanel p = simulate_common_factor(cells, loadings, n, test_stream(40), 4);
        CHECK(std::abs(pearson(to_double(p.counts[0]), to_double(p.counts[1]))) < 0.012);
        CHECK(poisson_chi2(p.counts[0], 5.0, 0, 15) < kChi2Crit15);
    }

    SUBCASE("latent scores correlate as the product of loadings") {
        const FactorLoadings loadings({0.7, 0.7});
        const FactorPanel p = simulate_common_factor(cells, loadings, n, test_stream(41), 4);
        CHECK(std::abs(pearson(p.latent[0], p.latent[1]) - 0.49) < 0.010);
        CHECK(std::abs(mean_of(p.latent[0])) < 0.01);
        CHECK(std::abs(variance_of(p.latent[0]) - 1.0) < 0.012);
        CHECK(pearson(to_double(p.counts[0]), to_double(p.counts[1])) > 0.3);
        // counts keep their marginal law
        CHECK(poisson_chi2(p.counts[0], 5.0, 0, 15) < kChi2Crit15);
        CHECK(poisson_chi2(p.counts[1], 10.0, 2, 20) < kChi2Crit18);
    }

    SUBCASE("unit loadings reproduce the comonotone count coupling") {
        const FactorLoadings loadings({1.0, 1.0});
        const FactorPanel p = simulate_common_factor(cells, loadings, n, test_stream(42), 4);
        double max_diff = 0.0;
        for (std::size_t t = 0; t < n; ++t)
            max_diff = std::max(max_diff, std::abs(p.latent[0][t] - p.latent[1][t]));
        CHECK(max_diff <= 1e-12);
        const double count_corr = pearson(to_double(p.counts[0]), to_double(p.counts[1]));
        CHECK(std::abs(count_corr - 0.986797525583852) < 0.005);
    }

    SUBCASE("two factors with cross-correlation") {
        Eigen::MatrixXd freq(2, 2);
        freq << 0.8, 0.0, 0.0, 0.8;
        Eigen::MatrixXd corr(2, 2);
        corr << 1.0, 0.5, 0.5, 1.0;
        const FactorLoadings loadings(freq, Eigen::MatrixXd(), corr);
        const FactorPanel p = simulate_common_factor(cells, loadings, n, test_stream(43), 4);
        // corr(Y1, Y2) = 0.8 * 0.8 * 0.5
        CHECK(std::abs(pearson(p.latent[0], p.latent[1]) - 0.32) < 0.010);
    }

    SUBCASE("validation") {
        CHECK_THROWS_AS(simulate_common_factor({}, FactorLoadings({0.5}), 10, test_stream(44)),
                        std::invalid_argument);
        CHECK_THROWS_AS(simulate_common_factor(cells, FactorLoadings({0.5}), 10, test_stream(44)),
                        std::invalid_argument);
    }
}

TEST_CASE("systematic factor: severity channel induces loss dependence") {
    std::vector<RiskCell> cells;
    cells.emplace_back("a", FrequencyModel::poisson(20.0), SeverityModel::lognormal(0.0, 1.0));
    cells.emplace_back("b", FrequencyModel::poisson(20.0), SeverityModel::lognormal(0.0, 1.0));
    const std::size_t n = 20000;

    const FactorLoadings coupled({0.0, 0.0}, {0.9, 0.9});
    const FactorPanel with_channel = simulate_common_factor(cells, coupled, n, test_stream(45), 4);
    const double corr_with = pearson(with_channel.losses[0], with_channel.losses[1]);

    const FactorLoadings frequency_only({0.0, 0.0});
    const FactorPanel without = simulate_common_factor(cells, frequency_only, n, test_stream(46), 4);
    const double corr_without = pearson(without.losses[0], without.losses[1]);

    MESSAGE("annual-loss correlation with severity channel " << corr_with << ", without "
                                                             << corr_without);
    CHECK(corr_with > 0.5);
    CHECK(std::abs(corr_without) < 0.05);
    // counts are untouched by the severity channel
    CHECK(std::abs(mean_of(to_double(with_channel.counts[0])) - 20.0) < 0.12);
}

TEST_CASE("systematic factor: identical panels for any thread count") {
    const std::vector<RiskCell> cells = two_lognormal_cells();
    const FactorLoadings loadings({0.6, 0.8}, {0.5, 0.5});
    const FactorPanel a = simulate_common_factor(cells, loadings, 2500, test_stream(47), 1);
    const FactorPanel b = simulate_common_factor(cells, loadings, 2500, test_stream(47), 4);
    CHECK(a.counts == b.counts);
    CHECK(a.losses == b.losses);
    CHECK(a.latent == b.latent);
}

TEST_CASE("common shock: correlation matches lambda_C / sqrt(lambda_1 lambda_2)") {
    // marginal intensities 5 and 10 with a fully shared shock of intensity 2
    const std::size_t n = 1000000;
    const auto counts =
        simulate_common_shock({3.0, 8.0}, 2.0, {1.0, 1.0}, n, test_stream(50), 4);
    const std::vector<double> n1 = to_double(counts[0]), n2 = to_double(counts[1]);

    CHECK(std::abs(pearson(n1, n2) - 0.282842712474619) < 0.005);
    CHECK(std::abs(mean_of(n1) - 5.0) < 0.01);
    CHECK(std::abs(mean_of(n2) - 10.0) < 0.015);
    CHECK(std::abs(variance_of(n1) - 5.0) < 0.05);
    CHECK(std::abs(variance_of(n2) - 10.0) < 0.1);
    // full participation superposes two Poisson streams: marginal is Poisson
    CHECK(poisson_chi2(counts[0], 5.0, 0, 15) < kChi2Crit15);
    CHECK(poisson_chi2(counts[1], 10.0, 2, 20) < kChi2Crit18);
}

TEST_CASE("common shock: structure, thinning, and edge cases") {
    SUBCASE("no shared stream means independent cells") {
        const auto counts =
            simulate_common_shock({5.0, 10.0}, 0.0, {1.0, 1.0}, 200000, test_stream(51), 4);
        CHECK(std::abs(pearson(to_double(counts[0]), to_double(counts[1]))) < 0.012);
        CHECK(std::abs(mean_of(to_double(counts[0])) - 5.0) < 0.02);
    }

    SUBCASE("full participation gives every pair the same covariance") {
        const std::size_t n = 200000;
        const auto counts =
            simulate_common_shock({3.0, 5.0, 7.0}, 1.5, {1.0, 1.0, 1.0}, n, test_stream(52), 4);
        const std::vector<double> a = to_double(counts[0]), b = to_double(counts[1]),
                                  c = to_double(counts[2]);
        CHECK(std::abs(sample_covariance(a, b) - 1.5) < 0.06);
        CHECK(std::abs(sample_covariance(a, c) - 1.5) < 0.06);
        CHECK(std::abs(sample_covariance(b, c) - 1.5) < 0.08);
    }

    SUBCASE("partial participation thins the shared covariance") {
        const std::size_t n = 400000;
        const auto counts =
            simulate_common_shock({2.0, 2.0}, 4.0, {0.5, 0.5}, n, test_stream(53), 4);
        // cov = lambda_C p1 p2 = 1; marginal mean = 2 + 0.5 * 4 = 4
        CHECK(std::abs(sample_covariance(to_double(counts[0]), to_double(counts[1])) - 1.0) < 0.04);
        CHECK(std::abs(mean_of(to_double(counts[0])) - 4.0) < 0.02);
    }

    SUBCASE("zero idiosyncratic intensity is allowed") {
        const auto counts =
            simulate_common_shock({0.0, 3.0}, 2.0, {1.0, 0.0}, 100000, test_stream(54), 4);
        CHECK(std::abs(mean_of(to_double(counts[0])) - 2.0) < 0.02);
        CHECK(std::abs(mean_of(to_double(counts[1])) - 3.0) < 0.03);
    }

    SUBCASE("validation") {
        CHECK_THROWS_AS(simulate_common_shock({}, 1.0, {}, 10, test_stream(55)),
                        std::invalid_argument);
        CHECK_THROWS_AS(simulate_common_shock({1.0}, 1.0, {0.5, 0.5}, 10, test_stream(55)),
                        std::invalid_argument);
        CHECK_THROWS_AS(simulate_common_shock({1.0}, -1.0, {0.5}, 10, test_stream(55)),
                        std::invalid_argument);
        CHECK_THROWS_AS(simulate_common_shock({-1.0}, 1.0, {0.5}, 10, test_stream(55)),
                        std::invalid_argument);
        CHECK_THROWS_AS(simulate_common_shock({1.0}, 1.0, {1.5}, 10, test_stream(55)),
                        std::invalid_argument);
    }

    SUBCASE("identical counts for any thread count") {
        const auto a = simulate_common_shock({3.0, 8.0}, 2.0, {1.0, 0.7}, 2500, test_stream(56), 1);
        const auto b = simulate_common_shock({3.0, 8.0}, 2.0, {1.0, 0.7}, 2500, test_stream(56), 4);
        CHECK(a == b);
    }
}

TEST_CASE("profile marginals: quantile transforms and validation") {
    const ProfileMarginal c = ProfileMarginal::constant(5.0);
    CHECK(c.quantile(0.01) == 5.0);
    CHECK(c.quantile(0.99) == 5.0);

    const ProfileMarginal g = ProfileMarginal::gamma(2.5, 2.0);
    CHECK(g.quantile(0.5) > 0.0);
    // mean of Gamma(2.5, scale 2) is 5; median is below the mean
    CHECK(g.quantile(0.5) < 5.0);
    CHECK(g.quantile(0.99) > g.quantile(0.5));

    const ProfileMarginal nrm = ProfileMarginal::normal(1.0, 1.0);
    CHECK(nrm.quantile(0.5) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(nrm.quantile(norm_cdf(1.0)) == doctest::Approx(2.0).epsilon(1e-10));

    CHECK_THROWS_AS(ProfileMarginal::gamma(0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(ProfileMarginal::gamma(1.0, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(ProfileMarginal::normal(0.0, 0.0), std::invalid_argument);
}

TEST_CASE("stochastic profiles: specification validation") {
    CHECK_THROWS_AS(ProfilePriorSpec({}, GaussianCopulaSpec::exchangeable(2, 0.0)),
                    std::invalid_argument);
    CHECK_THROWS_AS(ProfilePriorSpec(gamma_normal_cells(), GaussianCopulaSpec::exchangeable(2, 0.0)),
                    std::invalid_argument);
    auto cells = gamma_normal_cells();
    cells[0].log_sd = 0.0;
    CHECK_THROWS_AS(ProfilePriorSpec(std::move(cells), GaussianCopulaSpec::exchangeable(4, 0.0)),
                    std::invalid_argument);
}

TEST_CASE("stochastic profiles: constant profiles reduce to fixed cells") {
    const std::vector<StochasticCell> cells = {
        {ProfileMarginal::constant(5.0), ProfileMarginal::constant(1.0), 2.0},
    };
    const ProfilePriorSpec spec(cells, GaussianCopulaSpec(Eigen::MatrixXd::Identity(2, 2)));
    const std::size_t n = 200000;
    const AnnualPanel p = simulate_stochastic_profiles(spec, n, test_stream(60), 4);

    CHECK(poisson_chi2(p.counts[0], 5.0, 0, 15) < kChi2Crit15);
    // E[Z] = lambda exp(mu + sd^2/2) = 5 e^3
    const double target = 5.0 * std::exp(3.0);
    CHECK(std::abs(mean_of(p.losses[0]) - target) < 2.5);
}

TEST_CASE("stochastic profiles: negative intensity draws produce empty years") {
    const std::vector<StochasticCell> cells = {
        {ProfileMarginal::normal(-5.0, 0.1), ProfileMarginal::constant(0.0), 1.0},
    };
    const ProfilePriorSpec spec(cells, GaussianCopulaSpec(Eigen::MatrixXd::Identity(2, 2)));
    const AnnualPanel p = simulate_stochastic_profiles(spec, 500, test_stream(61));
    for (int c : p.counts[0]) CHECK(c == 0);
    for (double z : p.losses[0]) CHECK(z == 0.0);
}

TEST_CASE("stochastic profiles: marginal moments under independent profiles") {
    const ProfilePriorSpec spec(gamma_normal_cells(), profile_copula(0.0, 0.0));
    const std::size_t n = 200000;
    const AnnualPanel p = simulate_stochastic_profiles(spec, n, test_stream(62), 4);
    // E[N] = E[lambda]; Var[N] = E[lambda] + Var[lambda]
    CHECK(std::abs(mean_of(to_double(p.counts[0])) - 5.0) < 0.03);
    CHECK(std::abs(mean_of(to_double(p.counts[1])) - 10.0) < 0.04);
    CHECK(std::abs(variance_of(to_double(p.counts[0])) - 15.0) < 0.4);
    CHECK(std::abs(variance_of(to_double(p.counts[1])) - 30.0) < 0.7);
}

TEST_CASE("stochastic profiles: shared-profile channels drive annual-loss dependence") {
    const std::size_t n = 200000;

    // frozen targets for the three coupling channels at rho in {0, 0.5, 1}
    const std::vector<double> intensity_only = {-0.00179553909498982, 0.102308427449064,
                                                0.201681777340338};
    const std::vector<double> location_only = {-0.00384108414744128, 0.132876718187985,
                                               0.258034920574938};
    const std::vector<double> both_channels = {-0.00179553909498982, 0.233068027818506,
                                               0.468931660777143};
    const double band = 0.012;

    std::vector<double> lam_est, mu_est, both_est;
    std::uint64_t path = 70;
    for (double rho : {0.0, 0.5, 1.0}) {
        lam_est.push_back(profile_loss_rho(rho, 0.0, n, path++));
        mu_est.push_back(profile_loss_rho(0.0, rho, n, path++));
        both_est.push_back(profile_loss_rho(rho, rho, n, path++));
    }

    for (std::size_t i = 0; i < 3; ++i) {
        CAPTURE(i);
        CHECK(std::abs(lam_est[i] - intensity_only[i]) < band);
        CHECK(std::abs(mu_est[i] - location_only[i]) < band);
        CHECK(std::abs(both_est[i] - both_channels[i]) < band);
    }

    // each channel is monotone in the coupling strength
    CHECK(lam_est[0] < lam_est[1]);
    CHECK(lam_est[1] < lam_est[2]);
    CHECK(mu_est[0] < mu_est[1]);
    CHECK(mu_est[1] < mu_est[2]);
    CHECK(both_est[0] < both_est[1]);
    CHECK(both_est[1] < both_est[2]);

    // coupling both channels dominates either single channel
    for (std::size_t i = 1; i < 3; ++i) {
        CHECK(both_est[i] > lam_est[i] + 0.04);
        CHECK(both_est[i] > mu_est[i] + 0.04);
    }
}

TEST_CASE("stochastic profiles: identical panels for any thread count") {
    const ProfilePriorSpec spec(gamma_normal_cells(), profile_copula(0.5, 0.5));
    const AnnualPanel a = simulate_stochastic_profiles(spec, 2500, test_stream(80), 1);
    const AnnualPanel b = simulate_stochastic_profiles(spec, 2500, test_stream(80), 4);
    CHECK(a.counts == b.counts);
    CHECK(a.losses == b.losses);
}

TEST_CASE("rank correlation: exact values, ties, and validation") {
    CHECK(spearman_rho({1.0, 2.0, 5.0, 9.0}, {-3.0, 0.0, 0.5, 100.0}) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(spearman_rho({1.0, 2.0, 5.0, 9.0}, {4.0, 3.0, 2.0, 1.0}) ==
          doctest::Approx(-1.0).epsilon(1e-12));

    // ties get average ranks: ranks {1.5, 1.5, 3} vs {1, 2, 3}
    CHECK(spearman_rho({1.0, 1.0, 2.0}, {1.0, 2.0, 3.0}) ==
          doctest::Approx(std::sqrt(0.75)).epsilon(1e-12));

    RngStream rng = test_stream(90);
    const std::size_t n = 1000000;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.uniform();
        y[i] = rng.uniform();
    }
    CHECK(std::abs(spearman_rho(x, y)) < 0.003);

    CHECK_THROWS_AS(spearman_rho({1.0, 1.0, 1.0}, {1.0, 2.0, 3.0}), DataError);
    CHECK_THROWS_AS(spearman_rho({1.0}, {2.0}), std::invalid_argument);
    CHECK_THROWS_AS(spearman_rho({1.0, 2.0}, {1.0, 2.0, 3.0}), std::invalid_argument);
}
