#include "lda/capital.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/gamma.hpp>

#include "lda/errors.hpp"
#include "lda/tasks.hpp"

namespace lda {

namespace {

constexpr std::array<double, 8> kTsaBetas = {0.18, 0.18, 0.12, 0.15, 0.18, 0.15, 0.12, 0.12};

double empirical_mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// inverse of the empirical distribution of a sorted sample
double sorted_quantile_at(const std::vector<double>& sorted, double u) {
    auto idx = static_cast<std::size_t>(u * static_cast<double>(sorted.size()));
    if (idx >= sorted.size()) idx = sorted.size() - 1;
    return sorted[idx];
}

RiskCell strip_policy(const RiskCell& cell) {
    RiskCell out = cell;
    out.policy.reset();
    return out;
}

QuantileEstimate point_only(double value) {
    QuantileEstimate est;
    est.point = value;
    est.lower = value;
    est.upper = value;
    return est;
}

// annual count by inversion; the cdf recurrence avoids building a lattice
// table for every fresh intensity
int poisson_count(double lambda, RngStream& rng) {
    if (!(lambda > 0.0)) return 0;
    if (lambda > 30.0) return FrequencyModel::poisson(lambda).sample(rng);
    const double u = rng.uniform();
    double p = std::exp(-lambda);
    double c = p;
    int k = 0;
    while (c < u) {
        ++k;
        p *= lambda / k;
        c += p;
        if (p < 1e-18 && c > 0.5) break; // u sits in the round-off tail
    }
    return k;
}

// one simulated year across cells, per-event covers applied
double simulate_year(const std::vector<RiskCell>& cells, RngStream& rng,
                     const std::optional<GaussianCopulaSpec>& count_copula,
                     std::vector<double>& u) {
    if (count_copula) {
        if (count_copula->dim() != cells.size())
            throw std::invalid_argument("count copula dimension must equal the number of cells");
        count_copula->sample(rng, u);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < cells.size(); ++j) {
        const int n =
            count_copula ? cells[j].frequency.quantile(u[j]) : cells[j].frequency.sample(rng);
        for (int i = 0; i < n; ++i) {
            double x = cells[j].severity.sample(rng);
            if (cells[j].policy) x = apply_insurance(x, *cells[j].policy);
            z += x;
        }
    }
    return z;
}

// 0.999 quantile of the compound law at the true parameters, on a converged
// tilted-FFT lattice
double reference_quantile_fft(double lambda0, double mu0, double sigma0) {
    const FrequencyModel freq = FrequencyModel::poisson(lambda0);
    const SeverityModel sev = SeverityModel::lognormal(mu0, sigma0);
    const std::size_t m = std::size_t{1} << 17;
    const double top = sev.quantile(1.0 - 1e-4 / lambda0);
    const double step = 4.0 * top / static_cast<double>(m);
    const DiscreteDensity lattice = discretize_severity(sev, step, m);
    const DiscreteDensity compound = fft_compound(freq, lattice, 20.0 / static_cast<double>(m));
    return discrete_quantile(compound, 0.999);
}

// one data realisation of the bias experiment: closed-form posterior under
// constant priors, then the predictive and fixed-MLE annual-loss quantiles
// from simulations coupled by common random numbers
double bias_replication(int t_years, std::size_t k_sims, double lambda0, double mu0, double sigma0,
                        double q_ref, RngStream& rng) {
    const FrequencyModel freq0 = FrequencyModel::poisson(lambda0);
    long long events = 0;
    for (int t = 0; t < t_years; ++t) events += freq0.sample(rng);
    if (events < 5)
        throw DataError("a replication produced fewer than 5 events; the closed-form "
                        "posterior needs more data");
    const double n = static_cast<double>(events);

    std::vector<double> logs(static_cast<std::size_t>(events));
    for (double& v : logs) v = mu0 + sigma0 * rng.normal();
    const double xbar = empirical_mean(logs);
    double s2 = 0.0;
    for (double v : logs) s2 += (v - xbar) * (v - xbar);
    s2 /= n - 1.0;
    if (!(s2 > 0.0)) throw DataError("degenerate severity sample in a replication");

    const double lambda_hat = n / static_cast<double>(t_years);
    const double sigma_hat = std::sqrt(s2 * (n - 1.0) / n);

    // constant priors: lambda | data ~ Gamma(n+1, scale 1/T);
    // sigma^2 | data ~ InvGamma(n/2 - 1, (n-1)s^2/2); mu | sigma^2 ~ N(xbar, sigma^2/n)
    const boost::math::gamma_distribution<double> lambda_post(n + 1.0,
                                                              1.0 / static_cast<double>(t_years));
    const boost::math::gamma_distribution<double> precision_post(0.5 * n - 1.0,
                                                                 2.0 / ((n - 1.0) * s2));

    std::vector<double> z_post(k_sims), z_mle(k_sims);
    for (std::size_t k = 0; k < k_sims; ++k) {
        const double lambda_d = boost::math::quantile(lambda_post, rng.uniform());
        const double sg2_d = 1.0 / boost::math::quantile(precision_post, rng.uniform());
        const double mu_d = xbar + std::sqrt(sg2_d / n) * rng.normal();
        const double sigma_d = std::sqrt(sg2_d);

        const int n_post = poisson_count(lambda_d, rng);
        const int n_mle = poisson_count(lambda_hat, rng);
        const int shared = std::max(n_post, n_mle);
        double zb = 0.0, zm = 0.0;
        for (int i = 0; i < shared; ++i) {
            const double z = rng.normal();
            if (i < n_post) zb += std::exp(mu_d + sigma_d * z);
            if (i < n_mle) zm += std::exp(xbar + sigma_hat * z);
        }
        z_post[k] = zb;
        z_mle[k] = zm;
    }
    const double qb = mc_quantile_ci(std::move(z_post), 0.999, 0.0).point;
    const double qm = mc_quantile_ci(std::move(z_mle), 0.999, 0.0).point;
    return (qb - qm) / q_ref;
}

} // namespace

double bia_charge(const std::vector<double>& gross_incomes) {
    if (gross_incomes.empty())
        throw std::invalid_argument("need at least one year of gross income");
    double sum = 0.0;
    int positive = 0;
    for (double gi : gross_incomes)
        if (gi > 0.0) {
            sum += gi;
            ++positive;
        }
    if (positive == 0)
        throw DataError("basic-indicator charge undefined: no positive gross income");
    return 0.15 * sum / positive;
}

double tsa_charge(const std::vector<std::vector<double>>& gross_incomes) {
    if (gross_incomes.size() != kTsaBetas.size())
        throw std::invalid_argument("standardised approach needs 8 business lines");
    for (const auto& line : gross_incomes)
        if (line.size() != 3)
            throw std::invalid_argument("standardised approach needs 3 years per line");
    double charge = 0.0;
    for (std::size_t year = 0; year < 3; ++year) {
        double weighted = 0.0;
        for (std::size_t i = 0; i < kTsaBetas.size(); ++i)
            weighted += kTsaBetas[i] * gross_incomes[i][year];
        charge += std::max(weighted, 0.0);
    }
    return charge / 3.0;
}

CapitalReport conditional_capital(const std::vector<RiskCell>& cells, const CapitalOptions& opt,
                                  const RngStream& rng) {
    if (cells.empty()) throw std::invalid_argument("need at least one risk cell");
    if (!(opt.quantile > 0.0) || !(opt.quantile < 1.0))
        throw std::invalid_argument("quantile level must be in (0,1)");
    if (opt.method != AggMethod::MC && opt.method != AggMethod::Panjer &&
        opt.method != AggMethod::FFT)
        throw ConfigError("capital solver must be one of mc, panjer, fft");
    if (opt.mc_draws == 0) throw std::invalid_argument("need at least one simulation");
    if (opt.loss_copula && opt.loss_copula->dim() != cells.size())
        throw std::invalid_argument("loss copula dimension must equal the number of cells");

    const bool joint = opt.loss_copula.has_value();
    const bool need_mc = opt.method == AggMethod::MC || joint;

    CapitalReport rep;
    rep.quantile = opt.quantile;
    rep.expected_loss_subtracted = opt.subtract_expected_loss;

    std::vector<std::vector<double>> sorted_net, sorted_gross; // for the joint mapping
    double el_gross_total = 0.0;

    for (std::size_t j = 0; j < cells.size(); ++j) {
        const RiskCell& cell = cells[j];
        const bool insured = cell.policy.has_value();
        RngStream cell_rng = rng.substream(j + 1);

        CellCapital cc;
        cc.label = cell.label;
        cc.method = opt.method;

        std::vector<double> net_samples, gross_samples;
        if (need_mc) {
            // the same stream drives both runs, so the gross and the net
            // figures see identical simulated events
            net_samples = mc_compound(cell, opt.mc_draws, cell_rng, opt.threads);
            gross_samples = insured
                                ? mc_compound(strip_policy(cell), opt.mc_draws, cell_rng, opt.threads)
                                : net_samples;
        }

        if (opt.method == AggMethod::MC) {
            cc.var = mc_quantile_ci(net_samples, opt.quantile, opt.confidence);
            cc.var_gross =
                insured ? mc_quantile_ci(gross_samples, opt.quantile, opt.confidence) : cc.var;
            cc.expected_loss = empirical_mean(net_samples);
            el_gross_total += insured ? empirical_mean(gross_samples) : cc.expected_loss;
        } else {
            const RiskCell gross = insured ? strip_policy(cell) : cell;
            const double step = choose_step(gross, opt.grid_size, opt.pilot_draws,
                                            cell_rng.substream(9001), opt.threads);
            const DiscreteDensity sev_gross =
                discretize_severity(gross.severity, step, opt.grid_size);
            DiscreteDensity sev_net = sev_gross;
            if (insured) {
                const SeverityModel& sev = cell.severity;
                const double d = cell.policy->deductible;
                const double u = cell.policy->limit;
                // net of a per-event cover: below the deductible nothing is
                // recovered; past it the distribution shifts by the limit
                sev_net = discretize_cdf(
                    [&](double y) { return y < d ? sev.cdf(y) : sev.cdf(y + u); }, step,
                    opt.grid_size);
            }
            const double theta =
                opt.fft_theta > 0.0 ? opt.fft_theta : 20.0 / static_cast<double>(opt.grid_size);
            const auto solve = [&](const DiscreteDensity& sev_lattice) {
                const DiscreteDensity compound =
                    opt.method == AggMethod::Panjer
                        ? panjer_recursion(cell.frequency, sev_lattice)
                        : fft_compound(cell.frequency, sev_lattice, theta);
                return discrete_quantile(compound, opt.quantile);
            };
            const double q_net = solve(sev_net);
            cc.var = point_only(q_net);
            cc.var_gross = insured ? point_only(solve(sev_gross)) : cc.var;
            cc.expected_loss = cell.frequency.mean() * discrete_mean(sev_net);
            el_gross_total += cell.frequency.mean() * discrete_mean(sev_gross);
        }

        rep.summed_var += cc.var.point;
        rep.summed_var_gross += cc.var_gross.point;
        rep.expected_loss += cc.expected_loss;

        if (joint) {
            std::sort(net_samples.begin(), net_samples.end());
            if (insured) {
                std::sort(gross_samples.begin(), gross_samples.end());
            } else {
                gross_samples = net_samples;
            }
            sorted_net.push_back(std::move(net_samples));
            sorted_gross.push_back(std::move(gross_samples));
        }
        rep.cells.push_back(std::move(cc));
    }

    if (joint) {
        RngStream copula_rng = rng.substream(0);
        std::vector<double> total_net(opt.mc_draws), total_gross(opt.mc_draws);
        std::vector<double> u;
        for (std::size_t k = 0; k < opt.mc_draws; ++k) {
            opt.loss_copula->sample(copula_rng, u);
            double tn = 0.0, tg = 0.0;
            for (std::size_t j = 0; j < cells.size(); ++j) {
                tn += sorted_quantile_at(sorted_net[j], u[j]);
                tg += sorted_quantile_at(sorted_gross[j], u[j]);
            }
            total_net[k] = tn;
            total_gross[k] = tg;
        }
        rep.joint_var = mc_quantile_ci(std::move(total_net), opt.quantile, opt.confidence);
        rep.joint_var_gross = mc_quantile_ci(std::move(total_gross), opt.quantile, opt.confidence);
    }

    // headline figure and the 20% insurance cap
    const double q_net = joint ? rep.joint_var->point : rep.summed_var;
    const double q_gross = joint ? rep.joint_var_gross->point : rep.summed_var_gross;
    const double capital_net =
        opt.subtract_expected_loss ? q_net - rep.expected_loss : q_net;
    rep.capital_gross = opt.subtract_expected_loss ? q_gross - el_gross_total : q_gross;
    rep.insurance_reduction = rep.capital_gross - capital_net;
    rep.insurance_reduction_applied =
        std::min(rep.insurance_reduction, 0.2 * rep.capital_gross);
    rep.capital = rep.capital_gross - rep.insurance_reduction_applied;
    return rep;
}

std::vector<double> chain_parameter_draw(const ParamChain& chain, std::size_t k, bool resample,
                                         RngStream& rng) {
    const std::size_t total = chain.iterations();
    if (chain.burn_in >= total) throw DataError("chain has no post-burn-in draws");
    const std::size_t available = total - chain.burn_in;
    std::size_t idx;
    if (resample) {
        idx = chain.burn_in +
              std::min(available - 1,
                       static_cast<std::size_t>(rng.uniform() * static_cast<double>(available)));
    } else {
        if (k >= available)
            throw DataError("posterior chain exhausted after " + std::to_string(available) +
                            " draws; run a longer chain or enable resampling");
        idx = chain.burn_in + k;
    }
    return chain.states[idx];
}

PredictiveResult predictive_capital(const JointParameterDraw& draw, std::size_t simulations,
                                    const RngStream& rng, const PredictiveOptions& opt) {
    if (!draw) throw std::invalid_argument("a posterior draw callback is required");
    if (simulations == 0) throw std::invalid_argument("need at least one simulation");
    if (!(opt.quantile > 0.0) || !(opt.quantile < 1.0))
        throw std::invalid_argument("quantile level must be in (0,1)");

    std::vector<double> samples(simulations);
    parallel_blocks(simulations, 1024, static_cast<unsigned>(std::max(opt.threads, 1)),
                    [&](std::size_t, std::size_t begin, std::size_t end) {
                        std::vector<double> u;
                        for (std::size_t k = begin; k < end; ++k) {
                            RngStream ks = rng.substream(k);
                            const std::vector<RiskCell> cells = draw(k, ks);
                            if (cells.empty())
                                throw DataError("posterior draw produced no cells");
                            samples[k] = simulate_year(cells, ks, opt.count_copula, u);
                        }
                    });

    PredictiveResult out;
    out.capital = mc_quantile_ci(samples, opt.quantile, opt.confidence);
    out.samples = std::move(samples);
    return out;
}

QuantileOfQuantiles quantile_of_quantiles(const JointParameterDraw& draw, std::size_t outer_draws,
                                          std::size_t inner_draws, double q, double level,
                                          const RngStream& rng, int threads) {
    if (!draw) throw std::invalid_argument("a posterior draw callback is required");
    if (outer_draws < 2) throw std::invalid_argument("need at least two posterior draws");
    if (inner_draws < 100)
        throw std::invalid_argument("need at least 100 simulations per conditional quantile");
    if (!(q > 0.0) || !(q < 1.0)) throw std::invalid_argument("quantile level must be in (0,1)");
    if (!(level > 0.0) || !(level < 1.0))
        throw std::invalid_argument("interval level must be in (0,1)");

    std::vector<double> quantiles(outer_draws);
    parallel_blocks(outer_draws, 4, static_cast<unsigned>(std::max(threads, 1)),
                    [&](std::size_t, std::size_t begin, std::size_t end) {
                        std::vector<double> u;
                        for (std::size_t k = begin; k < end; ++k) {
                            RngStream ks = rng.substream(k);
                            const std::vector<RiskCell> cells = draw(k, ks);
                            if (cells.empty())
                                throw DataError("posterior draw produced no cells");
                            std::vector<double> z(inner_draws);
                            for (double& zi : z) zi = simulate_year(cells, ks, std::nullopt, u);
                            quantiles[k] = mc_quantile_ci(std::move(z), q, 0.0).point;
                        }
                    });

    std::vector<double> sorted = quantiles;
    std::sort(sorted.begin(), sorted.end());
    QuantileOfQuantiles out;
    out.level = level;
    out.lower = sorted_quantile_at(sorted, 0.5 * (1.0 - level));
    out.upper = sorted_quantile_at(sorted, 0.5 * (1.0 + level));
    out.quantiles = std::move(quantiles);
    return out;
}

BiasStudyResult parameter_uncertainty_bias(double lambda0, double mu0, double sigma0,
                                           const std::vector<int>& years_grid, int replications,
                                           std::size_t simulations, const RngStream& rng,
                                           int threads) {
    if (!(lambda0 > 0.0) || !(sigma0 > 0.0) || !std::isfinite(mu0))
        throw std::invalid_argument("true parameters must satisfy lambda > 0, sigma > 0");
    if (years_grid.empty()) throw std::invalid_argument("years grid must not be empty");
    for (int t : years_grid)
        if (t < 1) throw std::invalid_argument("every grid entry needs at least one year");
    if (replications < 10) throw std::invalid_argument("need at least 10 replications");
    if (simulations < 1000)
        throw std::invalid_argument("need at least 1000 simulations per replication");

    BiasStudyResult out;
    out.reference_quantile = reference_quantile_fft(lambda0, mu0, sigma0);

    for (std::size_t gi = 0; gi < years_grid.size(); ++gi) {
        const int t_years = years_grid[gi];
        const RngStream grid_rng = rng.substream(gi + 1);
        std::vector<double> biases(static_cast<std::size_t>(replications));
        parallel_blocks(biases.size(), 1, static_cast<unsigned>(std::max(threads, 1)),
                        [&](std::size_t, std::size_t begin, std::size_t end) {
                            for (std::size_t r = begin; r < end; ++r) {
                                RngStream rep_rng = grid_rng.substream(r);
                                biases[r] = bias_replication(t_years, simulations, lambda0, mu0,
                                                             sigma0, out.reference_quantile,
                                                             rep_rng);
                            }
                        });
        const double mean = empirical_mean(biases);
        double var = 0.0;
        for (double b : biases) var += (b - mean) * (b - mean);
        var /= static_cast<double>(biases.size() - 1);
        out.curve.push_back(
            {t_years, mean, std::sqrt(var / static_cast<double>(biases.size()))});
    }
    return out;
}

AggregateCoverResult apply_aggregate_cover(const std::vector<double>& losses,
                                           const InsurancePolicy& policy, CoverMode mode) {
    AggregateCoverResult out;
    out.recoveries.reserve(losses.size());
    out.net.reserve(losses.size());
    double remaining = policy.limit;
    for (double x : losses) {
        if (!(x >= 0.0)) throw std::invalid_argument("event losses must be non-negative");
        double rec = insurance_recovery(x, policy);
        if (mode == CoverMode::Aggregate) {
            rec = std::min(rec, remaining);
            remaining -= rec;
        }
        out.recoveries.push_back(rec);
        out.net.push_back(x - rec);
        out.recovered_total += rec;
        out.net_total += x - rec;
    }
    return out;
}

} // namespace lda
