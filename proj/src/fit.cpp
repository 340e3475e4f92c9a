#include "lda/fit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "lda/errors.hpp"
#include "lda/optimize.hpp"
#include "lda/tasks.hpp"

namespace lda {

std::size_t LossRecord::total_count() const {
    std::size_t n = 0;
    for (const auto& y : amounts) n += y.size();
    return n;
}

std::vector<double> LossRecord::pooled() const {
    std::vector<double> out;
    out.reserve(total_count());
    for (const auto& y : amounts) out.insert(out.end(), y.begin(), y.end());
    return out;
}

namespace {

// Maps an unconstrained optimizer vector to severity parameters and back.
struct SevParam {
    FitSevFamily family;

    std::size_t dim() const {
        switch (family) {
            case FitSevFamily::Lognormal: return 2;
            case FitSevFamily::GPD: return 2;
            case FitSevFamily::GB2: return 4;
            case FitSevFamily::GCD: return 3;
            case FitSevFamily::GandH: return 4;
        }
        return 0;
    }

    SeverityModel make(const std::vector<double>& t) const {
        switch (family) {
            case FitSevFamily::Lognormal:
                return SeverityModel::lognormal(t[0], std::exp(t[1]));
            case FitSevFamily::GPD:
                return SeverityModel::gpd(std::exp(t[0]), std::exp(t[1]));
            case FitSevFamily::GB2:
                return SeverityModel::gb2(std::exp(t[0]), std::exp(t[1]), std::exp(t[2]),
                                          std::exp(t[3]));
            case FitSevFamily::GCD:
                return SeverityModel::gcd(std::exp(t[0]), std::exp(t[1]), std::exp(t[2]));
            case FitSevFamily::GandH:
                return SeverityModel::g_and_h(t[0], std::exp(t[1]), t[2], std::exp(t[3]));
        }
        throw std::logic_error("unreachable");
    }

    std::vector<double> natural(const std::vector<double>& t) const {
        std::vector<double> v = t;
        switch (family) {
            case FitSevFamily::Lognormal: v[1] = std::exp(t[1]); break;
            case FitSevFamily::GPD:
            case FitSevFamily::GCD:
                for (auto& x : v) x = std::exp(x);
                break;
            case FitSevFamily::GB2:
                for (auto& x : v) x = std::exp(x);
                break;
            case FitSevFamily::GandH:
                v[1] = std::exp(t[1]);
                v[3] = std::exp(t[3]);
                break;
        }
        return v;
    }

    std::vector<double> transformed(const std::vector<double>& v) const {
        std::vector<double> t = v;
        switch (family) {
            case FitSevFamily::Lognormal: t[1] = std::log(v[1]); break;
            case FitSevFamily::GPD:
            case FitSevFamily::GCD:
                for (auto& x : t) x = std::log(x);
                break;
            case FitSevFamily::GB2:
                for (auto& x : t) x = std::log(x);
                break;
            case FitSevFamily::GandH:
                t[1] = std::log(v[1]);
                t[3] = std::log(v[3]);
                break;
        }
        return t;
    }

    std::vector<std::string> names() const {
        switch (family) {
            case FitSevFamily::Lognormal: return {"mu", "sigma"};
            case FitSevFamily::GPD: return {"xi", "beta"};
            case FitSevFamily::GB2: return {"a", "b", "p", "q"};
            case FitSevFamily::GCD: return {"alpha", "m", "c"};
            case FitSevFamily::GandH: return {"a", "b", "g", "h"};
        }
        return {};
    }
};

constexpr double kBadValue = 1e100;

// Negative truncated log-likelihood of the amounts: -sum log[f(x)/(1-F(L))].
double neg_marginal_ll(const SevParam& par, const std::vector<double>& t,
                       const std::vector<double>& xs, double L) {
    try {
        SeverityModel m = par.make(t);
        const double fl = L > m.support_min() ? m.cdf(L) : 0.0;
        if (fl >= 1.0 - 1e-14) return kBadValue;
        const double logtail = std::log1p(-fl);
        double ll = 0.0;
        for (double x : xs) {
            const double d = m.density(x);
            if (!(d > 0.0) || !std::isfinite(d)) return kBadValue;
            ll += std::log(d) - logtail;
        }
        return std::isfinite(ll) ? -ll : kBadValue;
    } catch (const std::exception&) {
        return kBadValue;
    }
}

std::vector<double> initial_guess(const SevParam& par, const std::vector<double>& xs, double L) {
    std::vector<double> logs;
    logs.reserve(xs.size());
    for (double x : xs) logs.push_back(std::log(std::max(x, 1e-300)));
    const double mlog = std::accumulate(logs.begin(), logs.end(), 0.0) /
                        static_cast<double>(logs.size());
    double vlog = 0.0;
    for (double l : logs) vlog += (l - mlog) * (l - mlog);
    vlog = std::max(vlog / static_cast<double>(logs.size()), 1e-4);

    std::vector<double> sorted = xs;
    std::sort(sorted.begin(), sorted.end());
    const double med = sorted[sorted.size() / 2];

    switch (par.family) {
        case FitSevFamily::Lognormal:
            return {mlog, 0.5 * std::log(vlog)};
        case FitSevFamily::GPD: {
            // exceedances y = x - L; moment initials from mean/variance ratio
            double m1 = 0.0, m2 = 0.0;
            for (double x : xs) {
                const double y = std::max(x - L, 1e-12);
                m1 += y;
                m2 += y * y;
            }
            m1 /= static_cast<double>(xs.size());
            m2 /= static_cast<double>(xs.size());
            const double v = std::max(m2 - m1 * m1, 1e-12);
            double xi = 0.5 * (1.0 - m1 * m1 / v);
            xi = std::min(std::max(xi, 0.05), 0.9);
            const double beta = std::max(m1 * (1.0 - xi), 1e-8);
            return {std::log(xi), std::log(beta)};
        }
        case FitSevFamily::GB2:
            return {std::log(1.5), std::log(std::max(med, 1e-8)), std::log(1.0), std::log(2.0)};
        case FitSevFamily::GCD:
            return {std::log(1.5), std::log(std::max(med, 1e-8)),
                    std::log(std::max(0.5 * med, 1e-8))};
        case FitSevFamily::GandH:
            return {med, 0.5 * std::log(vlog), 0.1, std::log(0.1)};
    }
    return {};
}

// g-and-h has no closed density: match four spread quantiles instead.
std::vector<double> fit_gandh_quantiles(const std::vector<double>& xs) {
    std::vector<double> sorted = xs;
    std::sort(sorted.begin(), sorted.end());
    const double qs[4] = {0.1, 0.5, 0.9, 0.99};
    double target[4];
    for (int i = 0; i < 4; ++i) {
        const double idx = qs[i] * static_cast<double>(sorted.size());
        auto j = std::min(sorted.size() - 1,
                          static_cast<std::size_t>(std::ceil(idx - 1e-9)) -
                              (idx > 1.0 ? 1 : 0));
        target[i] = sorted[j];
    }
    const double scale = std::max(target[2] - target[0], 1e-8);

    SevParam par{FitSevFamily::GandH};
    auto obj = [&](const std::vector<double>& t) {
        try {
            SeverityModel m = par.make(t);
            double s = 0.0;
            for (int i = 0; i < 4; ++i) {
                const double d = (m.quantile(qs[i]) - target[i]) / scale;
                s += d * d;
            }
            return std::isfinite(s) ? s : kBadValue;
        } catch (const std::exception&) {
            return kBadValue;
        }
    };
    std::vector<double> x0 = {target[1], std::log(scale / 2.56), 0.0, std::log(0.05)};
    auto r = nelder_mead_multistart(obj, x0, {0.2 * scale, 0.3, 0.2, 0.5});
    if (!r.converged) throw ConvergenceError("g-and-h quantile match did not converge");
    return r.x;
}

} // namespace

SeverityModel FitResult::severity() const {
    // params[0] is lambda; the rest are the severity parameters
    std::vector<double> b(params.begin() + 1, params.end());
    if (names.size() >= 3 && names[1] == "mu") return SeverityModel::lognormal(b[0], b[1]);
    if (names.size() >= 3 && names[1] == "xi") return SeverityModel::gpd(b[0], b[1]);
    if (names.size() == 5 && names[1] == "a" && names[3] == "p")
        return SeverityModel::gb2(b[0], b[1], b[2], b[3]);
    if (names.size() == 4 && names[1] == "alpha") return SeverityModel::gcd(b[0], b[1], b[2]);
    if (names.size() == 5 && names[1] == "a") return SeverityModel::g_and_h(b[0], b[1], b[2], b[3]);
    throw std::logic_error("unrecognized parameter layout");
}

FitResult fit_truncated_mle(const LossRecord& data, double L, FitSevFamily family,
                            FreqFamily freq) {
    if (freq != FreqFamily::Poisson)
        throw std::invalid_argument(
            "truncated fitting reconstructs the ground-up intensity via Poisson thinning; "
            "other count families are not supported here");
    if (!(L >= 0.0)) throw std::invalid_argument("threshold must be >= 0");
    if (family == FitSevFamily::GandH && L > 0.0)
        throw std::invalid_argument("g-and-h fitting is quantile-based and untruncated only");
    if (data.n_periods() == 0) throw DataError("loss record has no periods");

    const std::vector<double> xs = data.pooled();
    if (xs.size() < 2) throw DataError("need at least two severity observations");
    const bool real_support = family == FitSevFamily::GandH; // support is the whole line
    for (double x : xs) {
        if (L > 0.0 && !(x >= L)) throw DataError("loss amount below the reporting threshold");
        if (!real_support && !(x > 0.0))
            throw DataError("amounts must be positive for this severity family");
    }

    const SevParam par{family};

    std::vector<double> t_hat;
    bool converged = true;
    if (family == FitSevFamily::Lognormal && L <= 0.0) {
        // untruncated lognormal MLE in closed form
        double m = 0.0;
        for (double x : xs) m += std::log(x);
        m /= static_cast<double>(xs.size());
        double v = 0.0;
        for (double x : xs) v += (std::log(x) - m) * (std::log(x) - m);
        v /= static_cast<double>(xs.size());
        t_hat = {m, 0.5 * std::log(v)};
    } else if (family == FitSevFamily::GandH) {
        t_hat = fit_gandh_quantiles(xs);
    } else {
        // GPD is fit to exceedances above L (its own support starts at 0)
        std::vector<double> ys = xs;
        double thr = L;
        if (family == FitSevFamily::GPD) {
            for (auto& y : ys) y -= L;
            thr = 0.0;
        }
        auto obj = [&](const std::vector<double>& t) { return neg_marginal_ll(par, t, ys, thr); };
        const auto x0 = initial_guess(par, ys, thr);
        std::vector<double> step(x0.size(), 0.25);
        auto r = nelder_mead_multistart(obj, x0, step);
        if (!r.converged || r.fx >= kBadValue)
            throw ConvergenceError("severity fit did not converge after multi-start");
        t_hat = r.x;
        converged = r.converged;
    }

    SeverityModel sev = par.make(t_hat);
    const double fl =
        family == FitSevFamily::GPD ? 0.0 : (L > sev.support_min() ? sev.cdf(L) : 0.0);
    if (fl >= 1.0 - 1e-12)
        throw NumericsError("fitted model puts almost no mass above the threshold");

    const double t_periods = static_cast<double>(data.n_periods());
    const double lambda_obs = static_cast<double>(xs.size()) / t_periods;
    const double lambda_hat = lambda_obs / (1.0 - fl);

    FitResult out;
    out.names = {"lambda"};
    for (const auto& n : par.names()) out.names.push_back(n);
    out.params = {lambda_hat};
    for (double v : par.natural(t_hat)) out.params.push_back(v);
    out.converged = converged;
    out.truncation_prob = fl;
    out.lambda_observed = lambda_obs;
    out.threshold = L;

    // Full joint log-likelihood of counts and amounts (counts are thinned
    // Poisson with mean lambda*(1-F(L))): used for the information matrix
    // and reported at the optimum.
    const bool exceedance = family == FitSevFamily::GPD;
    auto joint_ll = [&, xs, t_periods](const std::vector<double>& theta) -> double {
        const double lam = theta[0];
        if (!(lam > 0.0)) return -kBadValue;
        try {
            std::vector<double> nat(theta.begin() + 1, theta.end());
            SeverityModel m = par.make(par.transformed(nat));
            const double thr = exceedance ? 0.0 : L;
            const double p = exceedance || thr <= m.support_min() ? 0.0 : m.cdf(thr);
            if (p >= 1.0 - 1e-14) return -kBadValue;
            const double rate = lam * (1.0 - p);
            double ll = 0.0;
            for (const auto& year : data.amounts) {
                const double n = static_cast<double>(year.size());
                ll += n * std::log(rate) - rate - std::lgamma(n + 1.0);
            }
            const double logtail = std::log1p(-p);
            for (double x : xs) {
                const double d = m.density(exceedance ? x - L : x);
                if (!(d > 0.0)) return -kBadValue;
                ll += std::log(d) - logtail;
            }
            return std::isfinite(ll) ? ll : -kBadValue;
        } catch (const std::exception&) {
            return -kBadValue;
        }
    };
    out.loglik = joint_ll(out.params);
    out.covariance = observed_information(joint_ll, out.params);
    return out;
}

std::optional<Eigen::MatrixXd> observed_information(
    const std::function<double(const std::vector<double>&)>& loglik,
    const std::vector<double>& theta) {
    const auto n = static_cast<Eigen::Index>(theta.size());
    std::vector<double> h(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i)
        h[i] = std::max(1e-5, 1e-5 * std::abs(theta[i]));

    Eigen::MatrixXd hess(n, n);
    const double f0 = loglik(theta);
    for (std::size_t i = 0; i < theta.size(); ++i) {
        for (std::size_t j = i; j < theta.size(); ++j) {
            auto at = [&](double di, double dj) {
                std::vector<double> x = theta;
                x[i] += di;
                x[j] += dj;
                return loglik(x);
            };
            double v;
            if (i == j) {
                v = (at(h[i], 0.0) - 2.0 * f0 + at(-h[i], 0.0)) / (h[i] * h[i]);
            } else {
                v = (at(h[i], h[j]) - at(h[i], -h[j]) - at(-h[i], h[j]) + at(-h[i], -h[j])) /
                    (4.0 * h[i] * h[j]);
            }
            hess(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
            hess(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
        }
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(-hess);
    if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
        return std::nullopt; // saddle point or boundary: no Gaussian uncertainty
    Eigen::MatrixXd cov = (-hess).inverse();
    cov = 0.5 * (cov + cov.transpose()); // enforce exact symmetry
    return cov;
}

BootstrapResult bootstrap(const LossRecord& data,
                          const std::function<std::vector<double>(const LossRecord&)>& fit,
                          std::size_t replicates, const RngStream& rng, int threads) {
    if (replicates < 1) throw std::invalid_argument("need at least one replicate");
    const std::size_t t = data.n_periods();
    if (t == 0) throw DataError("loss record has no periods");

    std::vector<std::optional<std::vector<double>>> rows(replicates);
    parallel_blocks(replicates, 1, threads, [&](std::size_t block, std::size_t, std::size_t) {
        RngStream s = rng.substream(block);
        LossRecord rep;
        rep.amounts.reserve(t);
        for (std::size_t i = 0; i < t; ++i) {
            const auto pick = static_cast<std::size_t>(s.uniform() * static_cast<double>(t));
            rep.amounts.push_back(data.amounts[std::min(pick, t - 1)]);
        }
        try {
            rows[block] = fit(rep);
        } catch (const std::exception&) {
            rows[block] = std::nullopt; // replicate skipped, counted below
        }
    });

    BootstrapResult out;
    for (auto& r : rows) {
        if (r)
            out.params.push_back(std::move(*r));
        else
            ++out.failures;
    }
    return out;
}

double ks_statistic(std::vector<double> sample, const SeverityModel& model) {
    if (sample.empty()) throw DataError("empty sample");
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = model.cdf(sample[i]);
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
        d = std::max(d, std::abs(static_cast<double>(i) / n - f));
    }
    return d;
}

} // namespace lda
