#include "lda/dependence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>

#include <boost/math/distributions/gamma.hpp>

#include "lda/errors.hpp"
#include "lda/special.hpp"
#include "lda/tasks.hpp"

namespace lda {

namespace {

constexpr std::size_t kYearBlock = 1024;

int sample_poisson_count(double lambda, RngStream& rng) {
    if (!(lambda > 0.0)) return 0;
    return FrequencyModel::poisson(lambda).sample(rng);
}

// residual standard deviations sqrt(1 - rho' C rho), one per cell
std::vector<double> residual_sds(const Eigen::MatrixXd& loadings, const Eigen::MatrixXd& corr) {
    std::vector<double> out;
    for (Eigen::Index j = 0; j < loadings.rows(); ++j) {
        const Eigen::VectorXd row = loadings.row(j).transpose();
        const double resid = 1.0 - row.dot(corr * row);
        if (resid < -1e-9)
            throw std::invalid_argument("factor loadings leave a negative residual variance");
        out.push_back(std::sqrt(std::max(resid, 0.0)));
    }
    return out;
}

} // namespace

AnnualPanel simulate_freq_copula(const std::vector<RiskCell>& cells,
                                 const GaussianCopulaSpec& spec, std::size_t years,
                                 const RngStream& rng, int threads) {
    if (cells.empty()) throw std::invalid_argument("need at least one risk cell");
    if (spec.dim() != cells.size())
        throw std::invalid_argument("copula dimension must equal the number of cells");

    const std::size_t d = cells.size();
    AnnualPanel panel;
    panel.counts.assign(d, std::vector<int>(years, 0));
    panel.losses.assign(d, std::vector<double>(years, 0.0));

    parallel_blocks(years, kYearBlock, static_cast<unsigned>(std::max(threads, 1)),
                    [&](std::size_t, std::size_t begin, std::size_t end) {
                        std::vector<double> u;
                        for (std::size_t t = begin; t < end; ++t) {
                            RngStream year = rng.substream(t);
                            spec.sample(year, u);
                            for (std::size_t j = 0; j < d; ++j) {
                                const int n = cells[j].frequency.quantile(u[j]);
                                RngStream events = year.substream(j + 1);
                                double z = 0.0;
                                for (int k = 0; k < n; ++k)
                                    z += cells[j].severity.sample(events);
                                panel.counts[j][t] = n;
                                panel.losses[j][t] = z;
                            }
                        }
                    });
    return panel;
}

AnnualPanel simulate_interarrival_copula(double lambda1, const SeverityModel& severity1,
                                         double lambda2, const SeverityModel& severity2,
                                         const GaussianCopulaSpec& spec, std::size_t years,
                                         const RngStream& rng, int threads) {
    if (spec.dim() != 2)
        throw std::invalid_argument("inter-arrival coupling is defined for two processes");
    if (!(lambda1 > 0.0) || !(lambda2 > 0.0))
        throw std::invalid_argument("intensities must be positive");

    AnnualPanel panel;
    panel.counts.assign(2, std::vector<int>(years, 0));
    panel.losses.assign(2, std::vector<double>(years, 0.0));

    parallel_blocks(
        years, kYearBlock, static_cast<unsigned>(std::max(threads, 1)),
        [&](std::size_t, std::size_t begin, std::size_t end) {
            std::vector<double> u;
            for (std::size_t t = begin; t < end; ++t) {
                RngStream year = rng.substream(t);
                double s1 = 0.0, s2 = 0.0;
                int k1 = 0, k2 = 0;
                bool done1 = false, done2 = false;
                // the k-th uniform pair couples the k-th waits of both
                // processes; a finished process ignores further pairs but the
                // index keeps advancing until both overshoot the year end
                while (!(done1 && done2)) {
                    spec.sample(year, u);
                    if (!done1) {
                        const double tau = -std::log1p(-u[0]) / lambda1;
                        if (s1 + tau <= 1.0) {
                            s1 += tau;
                            ++k1;
                        } else {
                            done1 = true;
                        }
                    }
                    if (!done2) {
                        const double tau = -std::log1p(-u[1]) / lambda2;
                        if (s2 + tau <= 1.0) {
                            s2 += tau;
                            ++k2;
                        } else {
                            done2 = true;
                        }
                    }
                }
                panel.counts[0][t] = k1;
                panel.counts[1][t] = k2;
                RngStream ev1 = year.substream(1);
                for (int k = 0; k < k1; ++k) panel.losses[0][t] += severity1.sample(ev1);
                RngStream ev2 = year.substream(2);
                for (int k = 0; k < k2; ++k) panel.losses[1][t] += severity2.sample(ev2);
            }
        });
    return panel;
}

FactorLoadings::FactorLoadings(const std::vector<double>& freq_rho,
                               const std::vector<double>& sev_rho) {
    if (freq_rho.empty()) throw std::invalid_argument("need at least one loading");
    if (!sev_rho.empty() && sev_rho.size() != freq_rho.size())
        throw std::invalid_argument("severity loadings must cover every cell");
    const auto j = static_cast<Eigen::Index>(freq_rho.size());
    frequency.resize(j, 1);
    for (Eigen::Index i = 0; i < j; ++i) frequency(i, 0) = freq_rho[static_cast<std::size_t>(i)];
    if (!sev_rho.empty()) {
        severity.resize(j, 1);
        for (Eigen::Index i = 0; i < j; ++i)
            severity(i, 0) = sev_rho[static_cast<std::size_t>(i)];
    }
    factor_corr = Eigen::MatrixXd::Identity(1, 1);
    if (frequency.cwiseAbs().maxCoeff() > 1.0 ||
        (severity.size() > 0 && severity.cwiseAbs().maxCoeff() > 1.0))
        throw std::invalid_argument("loadings must lie in [-1, 1]");
}

FactorLoadings::FactorLoadings(Eigen::MatrixXd freq_rho, Eigen::MatrixXd sev_rho,
                               Eigen::MatrixXd omega_corr)
    : frequency(std::move(freq_rho)), severity(std::move(sev_rho)),
      factor_corr(std::move(omega_corr)) {
    if (frequency.rows() == 0 || frequency.cols() == 0)
        throw std::invalid_argument("need at least one loading");
    if (factor_corr.rows() != frequency.cols() || factor_corr.cols() != frequency.cols())
        throw std::invalid_argument("factor correlation must be K x K");
    for (Eigen::Index i = 0; i < factor_corr.rows(); ++i) {
        if (std::abs(factor_corr(i, i) - 1.0) > 1e-12)
            throw std::invalid_argument("factor correlation needs a unit diagonal");
        for (Eigen::Index j = 0; j < i; ++j)
            if (std::abs(factor_corr(i, j) - factor_corr(j, i)) > 1e-12)
                throw std::invalid_argument("factor correlation must be symmetric");
    }
    if (severity.size() > 0 &&
        (severity.rows() != frequency.rows() || severity.cols() != frequency.cols()))
        throw std::invalid_argument("severity loadings must match the frequency shape");
    if (frequency.cwiseAbs().maxCoeff() > 1.0 ||
        (severity.size() > 0 && severity.cwiseAbs().maxCoeff() > 1.0))
        throw std::invalid_argument("loadings must lie in [-1, 1]");
    // reject loadings whose residual variance would be negative
    (void)residual_sds(frequency, factor_corr);
    if (severity.size() > 0) (void)residual_sds(severity, factor_corr);
}

FactorPanel simulate_common_factor(const std::vector<RiskCell>& cells,
                                   const FactorLoadings& loadings, std::size_t years,
                                   const RngStream& rng, int threads) {
    if (cells.empty()) throw std::invalid_argument("need at least one risk cell");
    if (loadings.cells() != cells.size())
        throw std::invalid_argument("one frequency loading per cell required");

    bool repaired = false;
    const Eigen::MatrixXd mix = correlation_factor(loadings.factor_corr, repaired);
    const std::vector<double> freq_resid = residual_sds(loadings.frequency, loadings.factor_corr);
    const std::vector<double> sev_resid =
        loadings.has_severity_channel()
            ? residual_sds(loadings.severity, loadings.factor_corr)
            : std::vector<double>();

    const std::size_t d = cells.size();
    const auto k = static_cast<Eigen::Index>(loadings.factors());
    FactorPanel panel;
    panel.counts.assign(d, std::vector<int>(years, 0));
    panel.losses.assign(d, std::vector<double>(years, 0.0));
    panel.latent.assign(d, std::vector<double>(years, 0.0));

    parallel_blocks(
        years, kYearBlock, static_cast<unsigned>(std::max(threads, 1)),
        [&](std::size_t, std::size_t begin, std::size_t end) {
            for (std::size_t t = begin; t < end; ++t) {
                RngStream year = rng.substream(t);
                Eigen::VectorXd z(k);
                for (Eigen::Index i = 0; i < k; ++i) z[i] = year.normal();
                const Eigen::VectorXd omega = mix * z;
                for (std::size_t j = 0; j < d; ++j) {
                    const auto jj = static_cast<Eigen::Index>(j);
                    const double y =
                        loadings.frequency.row(jj).dot(omega) + freq_resid[j] * year.normal();
                    panel.latent[j][t] = y;
                    const int n = cells[j].frequency.quantile(norm_cdf(y));
                    panel.counts[j][t] = n;
                    RngStream events = year.substream(j + 1);
                    double loss = 0.0;
                    for (int s = 0; s < n; ++s) {
                        if (loadings.has_severity_channel()) {
                            const double r = loadings.severity.row(jj).dot(omega) +
                                             sev_resid[j] * events.normal();
                            loss += cells[j].severity.quantile(norm_cdf(r));
                        } else {
                            loss += cells[j].severity.sample(events);
                        }
                    }
                    panel.losses[j][t] = loss;
                }
            }
        });
    return panel;
}

std::vector<std::vector<int>> simulate_common_shock(const std::vector<double>& idio_lambda,
                                                    double common_lambda,
                                                    const std::vector<double>& participation,
                                                    std::size_t years, const RngStream& rng,
                                                    int threads) {
    if (idio_lambda.empty() || idio_lambda.size() != participation.size())
        throw std::invalid_argument("need matching idiosyncratic intensities and participations");
    if (!(common_lambda >= 0.0)) throw std::invalid_argument("common intensity must be >= 0");
    for (double l : idio_lambda)
        if (!(l >= 0.0)) throw std::invalid_argument("intensities must be >= 0");
    for (double p : participation)
        if (!(p >= 0.0) || !(p <= 1.0))
            throw std::invalid_argument("participation probabilities must lie in [0, 1]");

    const std::size_t d = idio_lambda.size();
    std::vector<std::vector<int>> counts(d, std::vector<int>(years, 0));

    // intensities are constant across years, so the count models (and their
    // cdf tables) are built once up front
    std::vector<std::optional<FrequencyModel>> idio(d);
    for (std::size_t j = 0; j < d; ++j)
        if (idio_lambda[j] > 0.0) idio[j] = FrequencyModel::poisson(idio_lambda[j]);
    std::optional<FrequencyModel> common;
    if (common_lambda > 0.0) common = FrequencyModel::poisson(common_lambda);

    parallel_blocks(years, kYearBlock, static_cast<unsigned>(std::max(threads, 1)),
                    [&](std::size_t, std::size_t begin, std::size_t end) {
                        for (std::size_t t = begin; t < end; ++t) {
                            RngStream year = rng.substream(t);
                            const int shared = common ? common->sample(year) : 0;
                            for (std::size_t j = 0; j < d; ++j) {
                                RngStream cell = year.substream(j + 1);
                                int n = 0;
                                for (int e = 0; e < shared; ++e)
                                    if (cell.uniform() <= participation[j]) ++n;
                                if (idio[j]) n += idio[j]->sample(cell);
                                counts[j][t] = n;
                            }
                        }
                    });
    return counts;
}

ProfileMarginal ProfileMarginal::constant(double value) {
    ProfileMarginal m;
    m.kind = Kind::Constant;
    m.p1 = value;
    return m;
}

ProfileMarginal ProfileMarginal::gamma(double shape, double scale) {
    if (!(shape > 0.0) || !(scale > 0.0))
        throw std::invalid_argument("gamma profile needs positive shape and scale");
    ProfileMarginal m;
    m.kind = Kind::Gamma;
    m.p1 = shape;
    m.p2 = scale;
    return m;
}

ProfileMarginal ProfileMarginal::normal(double mean, double sd) {
    if (!(sd > 0.0)) throw std::invalid_argument("normal profile needs a positive sd");
    ProfileMarginal m;
    m.kind = Kind::Normal;
    m.p1 = mean;
    m.p2 = sd;
    return m;
}

double ProfileMarginal::quantile(double u) const {
    switch (kind) {
    case Kind::Constant:
        return p1;
    case Kind::Gamma: {
        const boost::math::gamma_distribution<double> g(p1, p2);
        return boost::math::quantile(g, u);
    }
    case Kind::Normal:
        return p1 + p2 * norm_ppf(u);
    }
    throw std::logic_error("unreachable profile kind");
}

ProfilePriorSpec::ProfilePriorSpec(std::vector<StochasticCell> cs, GaussianCopulaSpec cop)
    : cells(std::move(cs)), copula(std::move(cop)) {
    if (cells.empty()) throw std::invalid_argument("need at least one profiled cell");
    if (copula.dim() != 2 * cells.size())
        throw std::invalid_argument(
            "profile copula dimension must be twice the cell count (intensities, then locations)");
    for (const auto& c : cells)
        if (!(c.log_sd > 0.0)) throw std::invalid_argument("severity log-sd must be positive");
}

AnnualPanel simulate_stochastic_profiles(const ProfilePriorSpec& spec, std::size_t years,
                                         const RngStream& rng, int threads) {
    const std::size_t d = spec.cells.size();
    AnnualPanel panel;
    panel.counts.assign(d, std::vector<int>(years, 0));
    panel.losses.assign(d, std::vector<double>(years, 0.0));

    parallel_blocks(
        years, kYearBlock, static_cast<unsigned>(std::max(threads, 1)),
        [&](std::size_t, std::size_t begin, std::size_t end) {
            std::vector<double> u;
            for (std::size_t t = begin; t < end; ++t) {
                RngStream year = rng.substream(t);
                spec.copula.sample(year, u);
                for (std::size_t j = 0; j < d; ++j) {
                    const StochasticCell& cell = spec.cells[j];
                    const double lambda = cell.intensity.quantile(u[j]);
                    const double mu = cell.log_mean.quantile(u[d + j]);
                    RngStream events = year.substream(j + 1);
                    const int n = sample_poisson_count(lambda, events);
                    double loss = 0.0;
                    for (int s = 0; s < n; ++s)
                        loss += std::exp(mu + cell.log_sd * events.normal());
                    panel.counts[j][t] = n;
                    panel.losses[j][t] = loss;
                }
            }
        });
    return panel;
}

double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("need two samples of equal length >= 2");

    const auto ranks = [](const std::vector<double>& v) {
        const std::size_t n = v.size();
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
        std::vector<double> r(n);
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
            const double avg = 0.5 * static_cast<double>(i + j) + 1.0; // average 1-based rank
            for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
            i = j + 1;
        }
        return r;
    };

    const std::vector<double> rx = ranks(x), ry = ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (!(sxx > 0.0) || !(syy > 0.0))
        throw DataError("rank correlation undefined: a sample has zero rank variance");
    return sxy / std::sqrt(sxx * syy);
}

} // namespace lda
