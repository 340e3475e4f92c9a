#include "lda/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "lda/capital.hpp"
#include "lda/errors.hpp"

namespace fs = std::filesystem;

namespace lda {

namespace {

// task indices of the master-seed fan-out: (seed, cli domain, command, task)
enum : std::uint64_t {
    kTaskFit = 1,
    kTaskAggregate = 2,
    kTaskCapital = 3,
    kTaskDependence = 4,
    kTaskBias = 5,
    kTaskCombine = 6,
};

std::ofstream open_artifact(const RunConfig& cfg, const std::string& name) {
    fs::create_directories(cfg.output);
    const fs::path path = fs::path(cfg.output) / name;
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out.precision(17); // doubles round-trip exactly
    return out;
}

const FrequencyModel& need_frequency(const CellConfig& c) {
    if (!c.frequency)
        throw ConfigError("cell '" + c.label + "' needs a frequency model");
    return *c.frequency;
}

const SeverityModel& need_severity(const CellConfig& c) {
    if (!c.severity) throw ConfigError("cell '" + c.label + "' needs a severity model");
    return *c.severity;
}

RiskCell build_cell(const CellConfig& c) {
    RiskCell cell(c.label, need_frequency(c), need_severity(c));
    cell.policy = c.policy;
    return cell;
}

// net-of-cover severity lattice shared by the lattice solvers
DiscreteDensity net_severity_lattice(const RiskCell& cell, double step, std::size_t m) {
    if (!cell.policy) return discretize_severity(cell.severity, step, m);
    const double d = cell.policy->deductible;
    const double u = cell.policy->limit;
    const SeverityModel& sev = cell.severity;
    return discretize_cdf([&](double y) { return y < d ? sev.cdf(y) : sev.cdf(y + u); }, step,
                          m);
}

// --- fit ---------------------------------------------------------------------

void cmd_fit(const RunConfig& cfg, std::ostream& log) {
    if (cfg.cells.empty()) throw ConfigError("fit needs at least one [cell] with data");
    for (const CellConfig& cc : cfg.cells) {
        if (cc.data_path.empty())
            throw ConfigError("cell '" + cc.label + "' needs data = <losses.csv>");
        if (!cc.family)
            throw ConfigError("cell '" + cc.label + "' needs family = <severity family>");
        const LossIngest ingest = ingest_losses(cc.data_path, cc.threshold);
        log << "cell " << cc.label << ": " << ingest.accepted << " rows ingested, "
            << ingest.rejected_below_threshold << " below the reporting threshold\n";
        if (ingest.cells.empty()) {
            log << "warning: '" << cc.data_path << "' holds no usable rows; nothing to fit\n";
            continue;
        }
        auto it = ingest.cells.find(cc.label);
        if (it == ingest.cells.end()) it = ingest.cells.find(std::string{});
        if (it == ingest.cells.end())
            throw DataError("'" + cc.data_path + "' has no rows for cell '" + cc.label + "'");

        const FitResult fit = fit_truncated_mle(it->second, cc.threshold, *cc.family);
        std::ofstream csv = open_artifact(cfg, "fit_" + cc.label + ".csv");
        csv << "parameter,estimate,std_error\n";
        for (std::size_t i = 0; i < fit.names.size(); ++i) {
            csv << fit.names[i] << ',' << fit.params[i] << ',';
            if (fit.covariance)
                csv << std::sqrt((*fit.covariance)(static_cast<Eigen::Index>(i),
                                                   static_cast<Eigen::Index>(i)));
            else
                csv << "nan";
            csv << '\n';
        }
        log << "cell " << cc.label << ": loglik " << fit.loglik << ", converged "
            << (fit.converged ? "yes" : "no") << ", truncated mass " << fit.truncation_prob
            << '\n';
    }
}

// --- aggregate -----------------------------------------------------------------

void cmd_aggregate(const RunConfig& cfg, std::ostream& log) {
    if (cfg.cells.empty()) throw ConfigError("aggregate needs at least one [cell]");
    const AggregateConfig& a = cfg.aggregate;
    const RngStream root = RngStream::derive(cfg.seed, StreamDomain::Cli, {kTaskAggregate});

    for (std::size_t j = 0; j < cfg.cells.size(); ++j) {
        const RiskCell cell = build_cell(cfg.cells[j]);
        const RngStream cell_rng = root.substream(j + 1);
        std::ofstream csv = open_artifact(cfg, "aggregate_" + cell.label + ".csv");
        csv << "method,q,estimate,lo,hi\n";

        std::optional<double> step;
        std::optional<DiscreteDensity> net_lattice;
        const auto ensure_lattice = [&]() {
            if (step) return;
            RiskCell gross = cell;
            gross.policy.reset();
            step = choose_step(gross, a.grid, 20000, cell_rng.substream(99), cfg.threads);
            net_lattice = net_severity_lattice(cell, *step, a.grid);
        };

        for (const AggMethod method : a.methods) {
            switch (method) {
            case AggMethod::MC: {
                const std::vector<double> samples =
                    mc_compound(cell, a.mc_draws, cell_rng.substream(1), cfg.threads);
                for (const double q : a.quantiles) {
                    const QuantileEstimate est = mc_quantile_ci(samples, q, 0.95);
                    csv << to_string(method) << ',' << q << ',' << est.point << ','
                        << est.lower << ',' << est.upper << '\n';
                }
                if (a.write_density) {
                    std::ofstream den =
                        open_artifact(cfg, "samples_" + cell.label + ".csv");
                    den << "grid_point_or_sample,mass_or_value\n";
                    for (std::size_t k = 0; k < samples.size(); ++k)
                        den << k << ',' << samples[k] << '\n';
                }
                break;
            }
            case AggMethod::Panjer:
            case AggMethod::FFT: {
                ensure_lattice();
                const double theta =
                    a.theta > 0.0 ? a.theta : 20.0 / static_cast<double>(a.grid);
                const DiscreteDensity compound =
                    method == AggMethod::Panjer
                        ? panjer_recursion(cell.frequency, *net_lattice)
                        : fft_compound(cell.frequency, *net_lattice, theta);
                for (const double q : a.quantiles) {
                    const double est = discrete_quantile(compound, q);
                    csv << to_string(method) << ',' << q << ',' << est << ',' << est << ','
                        << est << '\n';
                }
                if (a.write_density) {
                    std::ofstream den = open_artifact(
                        cfg, "density_" + cell.label + "_" + to_string(method) + ".csv");
                    den << "grid_point_or_sample,mass_or_value\n";
                    for (std::size_t i = 0; i < compound.masses.size(); ++i)
                        den << static_cast<double>(i) * compound.step << ','
                            << compound.masses[i] << '\n';
                }
                break;
            }
            case AggMethod::SingleLoss: {
                for (const double q : a.quantiles) {
                    const double est = single_loss_var(cell.frequency, cell.severity, q);
                    csv << to_string(method) << ',' << q << ',' << est << ',' << est << ','
                        << est << '\n';
                }
                break;
            }
            case AggMethod::MomentMatch: {
                for (const double q : a.quantiles) {
                    const double est = moment_match_quantile(
                        cell.frequency, cell.severity, MomentMatchKind::TranslatedGamma, q);
                    csv << to_string(method) << ',' << q << ',' << est << ',' << est << ','
                        << est << '\n';
                }
                break;
            }
            }
        }
        log << "cell " << cell.label << ": aggregate quantiles written\n";
    }
}

// --- capital -------------------------------------------------------------------

void write_quantile_row(std::ofstream& csv, const std::string& scope,
                        const std::string& method, double q, const QuantileEstimate& est) {
    csv << scope << ',' << method << ',' << q << ',' << est.point << ',' << est.lower << ','
        << est.upper << '\n';
}

void write_scalar_row(std::ofstream& csv, const std::string& scope, double q, double value) {
    csv << scope << ",report," << q << ',' << value << ',' << value << ',' << value << '\n';
}

void cmd_capital(const RunConfig& cfg, std::ostream& log) {
    if (cfg.cells.empty()) throw ConfigError("capital needs at least one [cell]");
    std::vector<RiskCell> cells;
    cells.reserve(cfg.cells.size());
    bool any_policy = false;
    for (const CellConfig& cc : cfg.cells) {
        cells.push_back(build_cell(cc));
        any_policy = any_policy || cc.policy.has_value();
    }

    CapitalOptions opt;
    opt.method = cfg.capital.method;
    opt.quantile = cfg.capital.quantile;
    opt.confidence = cfg.capital.confidence;
    opt.mc_draws = cfg.capital.mc_draws;
    opt.grid_size = cfg.capital.grid;
    opt.subtract_expected_loss = cfg.capital.subtract_expected_loss;
    opt.threads = cfg.threads;
    if (cfg.capital.loss_rho)
        opt.loss_copula =
            GaussianCopulaSpec::exchangeable(cells.size(), *cfg.capital.loss_rho);

    const RngStream rng = RngStream::derive(cfg.seed, StreamDomain::Cli, {kTaskCapital});
    const CapitalReport rep = conditional_capital(cells, opt, rng);

    std::ofstream csv = open_artifact(cfg, "capital.csv");
    csv << "scope,method,quantile,estimate,ci_lower,ci_upper\n";
    for (const CellCapital& cc : rep.cells) {
        write_quantile_row(csv, cc.label, to_string(cc.method), rep.quantile, cc.var);
        if (any_policy)
            write_quantile_row(csv, cc.label + ":gross", to_string(cc.method), rep.quantile,
                               cc.var_gross);
    }
    write_scalar_row(csv, "summed", rep.quantile, rep.summed_var);
    if (any_policy) write_scalar_row(csv, "summed:gross", rep.quantile, rep.summed_var_gross);
    if (rep.joint_var) {
        write_quantile_row(csv, "joint", "mc", rep.quantile, *rep.joint_var);
        if (any_policy)
            write_quantile_row(csv, "joint:gross", "mc", rep.quantile, *rep.joint_var_gross);
    }
    write_scalar_row(csv, "expected_loss", rep.quantile, rep.expected_loss);
    write_scalar_row(csv, "capital_gross", rep.quantile, rep.capital_gross);
    write_scalar_row(csv, "insurance_reduction", rep.quantile, rep.insurance_reduction);
    write_scalar_row(csv, "insurance_reduction_applied", rep.quantile,
                     rep.insurance_reduction_applied);
    write_scalar_row(csv, "capital", rep.quantile, rep.capital);

    std::ofstream txt = open_artifact(cfg, "capital_summary.txt");
    txt.precision(10);
    txt << "operational risk capital report\n";
    txt << "quantile level: " << rep.quantile << "\n\n";
    for (const CellCapital& cc : rep.cells) {
        txt << "cell " << cc.label << " (" << to_string(cc.method) << "): VaR " << cc.var.point
            << " [" << cc.var.lower << ", " << cc.var.upper << "]";
        if (any_policy)
            txt << ", gross " << cc.var_gross.point << " [" << cc.var_gross.lower << ", "
                << cc.var_gross.upper << "]";
        txt << ", expected loss " << cc.expected_loss << '\n';
    }
    txt << "summed VaR: " << rep.summed_var << " (gross " << rep.summed_var_gross << ")\n";
    if (rep.joint_var)
        txt << "joint VaR (gaussian copula, mc): " << rep.joint_var->point << " ["
            << rep.joint_var->lower << ", " << rep.joint_var->upper << "]\n";
    txt << "expected loss: " << rep.expected_loss
        << (rep.expected_loss_subtracted ? " (subtracted)" : " (not subtracted)") << '\n';
    txt << "pre-insurance capital: " << rep.capital_gross << '\n';
    txt << "insurance reduction: " << rep.insurance_reduction << " (applied "
        << rep.insurance_reduction_applied << ", cap 20% of pre-insurance capital)\n";
    txt << "capital: " << rep.capital << '\n';

    log << "capital " << rep.capital << " (pre-insurance " << rep.capital_gross << ")\n";
}

// --- dependence-study ------------------------------------------------------------

double block_std_error(const std::vector<double>& a, const std::vector<double>& b,
                       std::size_t blocks) {
    const std::size_t n = a.size();
    if (blocks < 2 || n / blocks < 4) return std::numeric_limits<double>::quiet_NaN();
    const std::size_t len = n / blocks;
    std::vector<double> estimates;
    for (std::size_t k = 0; k < blocks; ++k) {
        const auto begin = static_cast<std::ptrdiff_t>(k * len);
        const auto end = static_cast<std::ptrdiff_t>((k + 1) * len);
        try {
            estimates.push_back(
                spearman_rho(std::vector<double>(a.begin() + begin, a.begin() + end),
                             std::vector<double>(b.begin() + begin, b.begin() + end)));
        } catch (const DataError&) {
            // a degenerate block (all-equal losses) carries no rank information
        }
    }
    if (estimates.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const double mean = std::accumulate(estimates.begin(), estimates.end(), 0.0) /
                        static_cast<double>(estimates.size());
    double var = 0.0;
    for (const double e : estimates) var += (e - mean) * (e - mean);
    var /= static_cast<double>(estimates.size() - 1);
    return std::sqrt(var / static_cast<double>(estimates.size()));
}

GaussianCopulaSpec profile_copula(const std::string& channel, double rho) {
    Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(4, 4);
    if (channel == "intensity" || channel == "both") corr(0, 1) = corr(1, 0) = rho;
    if (channel == "location" || channel == "both") corr(2, 3) = corr(3, 2) = rho;
    return GaussianCopulaSpec(corr);
}

void cmd_dependence(const RunConfig& cfg, std::ostream& log) {
    if (cfg.cells.size() != 2)
        throw ConfigError("dependence-study needs exactly two [cell] blocks");
    const DependenceConfig& d = cfg.dependence;

    std::ofstream csv = open_artifact(cfg, "dependence.csv");
    csv << "construction,copula_param,rho_S_estimate,mc_std_error\n";

    for (std::size_t i = 0; i < d.rhos.size(); ++i) {
        const double rho = d.rhos[i];
        const RngStream rng =
            RngStream::derive(cfg.seed, StreamDomain::Cli, {kTaskDependence, i});
        AnnualPanel panel;
        if (d.construction == "profiles") {
            std::vector<StochasticCell> cells;
            for (const CellConfig& cc : cfg.cells) {
                if (!cc.intensity || !cc.log_mean)
                    throw ConfigError("cell '" + cc.label +
                                      "' needs intensity = ... and log_mean = ... for the "
                                      "profile study");
                cells.push_back(StochasticCell{*cc.intensity, *cc.log_mean, cc.log_sd});
            }
            const ProfilePriorSpec spec(std::move(cells), profile_copula(d.channel, rho));
            panel = simulate_stochastic_profiles(spec, d.years, rng, cfg.threads);
        } else {
            const std::vector<RiskCell> cells = {build_cell(cfg.cells[0]),
                                                 build_cell(cfg.cells[1])};
            const GaussianCopulaSpec spec = GaussianCopulaSpec::exchangeable(2, rho);
            if (d.construction == "interarrival") {
                for (const RiskCell& cell : cells)
                    if (cell.frequency.family() != FreqFamily::Poisson)
                        throw ConfigError("the inter-arrival construction couples Poisson "
                                          "processes; cell '" +
                                          cell.label + "' is not Poisson");
                panel = simulate_interarrival_copula(cells[0].frequency.mean(),
                                                     cells[0].severity,
                                                     cells[1].frequency.mean(),
                                                     cells[1].severity, spec, d.years, rng,
                                                     cfg.threads);
            } else {
                panel = simulate_freq_copula(cells, spec, d.years, rng, cfg.threads);
            }
        }
        const double rho_s = spearman_rho(panel.losses[0], panel.losses[1]);
        const double se = block_std_error(panel.losses[0], panel.losses[1], 20);
        const std::string tag = d.construction == "profiles"
                                    ? d.construction + ":" + d.channel
                                    : d.construction;
        csv << tag << ',' << rho << ',' << rho_s << ',' << se << '\n';
        log << tag << " rho=" << rho << " rho_S=" << rho_s << " se=" << se << '\n';
    }
}

// --- bias-study ------------------------------------------------------------------

void cmd_bias(const RunConfig& cfg, std::ostream& log) {
    const BiasConfig& b = cfg.bias;
    const RngStream rng = RngStream::derive(cfg.seed, StreamDomain::Cli, {kTaskBias});
    const BiasStudyResult res = parameter_uncertainty_bias(
        b.lambda, b.mu, b.sigma, b.years, b.replications, b.simulations, rng, cfg.threads);

    std::ofstream csv = open_artifact(cfg, "bias.csv");
    csv << "T,mean_bias,std_error\n";
    for (const UncertaintyBiasPoint& p : res.curve)
        csv << p.years << ',' << p.mean_bias << ',' << p.std_error << '\n';
    log << "reference quantile: " << res.reference_quantile << '\n';
    for (const UncertaintyBiasPoint& p : res.curve)
        log << "T=" << p.years << " bias " << p.mean_bias << " se " << p.std_error << '\n';
}

// --- combine ---------------------------------------------------------------------

void cmd_combine(const RunConfig& cfg, std::ostream& log) {
    const CombineConfig& c = cfg.combine;
    if (!c.prior) throw ConfigError("combine needs prior = gamma(shape, scale) or elicit(...)");
    if (c.counts.empty()) throw ConfigError("combine needs counts = <annual counts>");

    const bool with_experts = !c.experts.empty();
    std::ofstream csv = open_artifact(cfg, "combine.csv");
    csv << (with_experts ? "year,mle,two_source,three_source\n" : "year,mle,two_source\n");

    for (std::size_t t = 1; t <= c.counts.size(); ++t) {
        const std::vector<int> seen(c.counts.begin(),
                                    c.counts.begin() + static_cast<std::ptrdiff_t>(t));
        const double mle =
            std::accumulate(seen.begin(), seen.end(), 0.0) / static_cast<double>(t);
        const CredibilitySummary two = poisson_gamma_posterior(*c.prior, seen);
        csv << t << ',' << mle << ',' << two.posterior_mean;
        if (with_experts) {
            const ExpertOpinions experts(c.experts, c.expert_xi);
            csv << ',' << three_source_posterior(*c.prior, seen, experts).mean();
        }
        csv << '\n';
    }
    log << "combine: " << c.counts.size() << " years written\n";

    if (c.mcmc_iterations > 0) {
        // posterior of the intensity given all counts, sampled for diagnostics
        const double shape =
            c.prior->alpha + std::accumulate(c.counts.begin(), c.counts.end(), 0.0);
        const double rate = 1.0 / c.prior->beta + static_cast<double>(c.counts.size());
        const auto log_post = [shape, rate](const std::vector<double>& theta) {
            return (shape - 1.0) * std::log(theta[0]) - rate * theta[0];
        };
        const double post_mean = shape / rate;
        const double post_sd = std::sqrt(shape) / rate;
        const std::vector<double> lower = {0.0};
        const std::vector<double> upper = {std::numeric_limits<double>::infinity()};
        const RngStream rng =
            RngStream::derive(cfg.seed, StreamDomain::Cli, {kTaskCombine});
        const std::vector<double> scales = tune_proposals(
            log_post, lower, upper, {post_sd}, {post_mean}, 2000, rng.substream(1));
        RngStream chain_rng = rng.substream(2);
        const ParamChain chain = rw_mh_gibbs(log_post, lower, upper, scales, {post_mean},
                                             c.mcmc_iterations, chain_rng);
        std::ofstream chain_csv = open_artifact(cfg, "chain.csv");
        chain_csv << "iteration,lambda,accepted_lambda\n";
        for (std::size_t i = 0; i < chain.iterations(); ++i)
            chain_csv << i << ',' << chain.states[i][0] << ','
                      << static_cast<int>(chain.accepted[i][0]) << '\n';
        log << "chain: " << chain.iterations() << " iterations, acceptance "
            << chain.acceptance_rate(0) << '\n';
    }
}

} // namespace

void run_command(const RunConfig& cfg, std::ostream& log) {
    if (cfg.command == "fit")
        cmd_fit(cfg, log);
    else if (cfg.command == "aggregate")
        cmd_aggregate(cfg, log);
    else if (cfg.command == "capital")
        cmd_capital(cfg, log);
    else if (cfg.command == "dependence-study")
        cmd_dependence(cfg, log);
    else if (cfg.command == "bias-study")
        cmd_bias(cfg, log);
    else if (cfg.command == "combine")
        cmd_combine(cfg, log);
    else
        throw ConfigError("unknown command '" + cfg.command + "'");
}

} // namespace lda
