#include "lda/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lda {

namespace {
double safe_eval(const std::function<double(const std::vector<double>&)>& f,
                 const std::vector<double>& x) {
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::max();
}
} // namespace

NmResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                     const std::vector<double>& x0, const std::vector<double>& step,
                     const NmOptions& opt) {
    const std::size_t n = x0.size();
    std::vector<std::vector<double>> xs(n + 1, x0);
    std::vector<double> fs(n + 1);
    for (std::size_t i = 0; i < n; ++i) xs[i + 1][i] += step[i];
    for (std::size_t i = 0; i <= n; ++i) fs[i] = safe_eval(f, xs[i]);

    std::vector<std::size_t> ord(n + 1);
    NmResult res;
    int it = 0;
    for (; it < opt.max_iter; ++it) {
        for (std::size_t i = 0; i <= n; ++i) ord[i] = i;
        std::sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
        const std::size_t best = ord[0], worst = ord[n], second = ord[n - 1];

        double xspread = 0.0, xscale = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            xspread = std::max(xspread, std::abs(xs[worst][i] - xs[best][i]));
            xscale = std::max(xscale, std::abs(xs[best][i]));
        }
        const double fspread = fs[worst] - fs[best];
        if (fspread <= opt.ftol * (std::abs(fs[best]) + opt.ftol) &&
            xspread <= opt.xtol * (1.0 + xscale)) {
            res.converged = true;
            break;
        }

        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t j = 0; j < n; ++j) centroid[j] += xs[i][j];
        }
        for (double& c : centroid) c /= static_cast<double>(n);

        auto blend = [&](double t) {
            std::vector<double> x(n);
            for (std::size_t j = 0; j < n; ++j)
                x[j] = centroid[j] + t * (xs[worst][j] - centroid[j]);
            return x;
        };

        auto xr = blend(-1.0); // reflection
        const double fr = safe_eval(f, xr);
        if (fr < fs[best]) {
            auto xe = blend(-2.0); // expansion
            const double fe = safe_eval(f, xe);
            if (fe < fr) {
                xs[worst] = std::move(xe);
                fs[worst] = fe;
            } else {
                xs[worst] = std::move(xr);
                fs[worst] = fr;
            }
            continue;
        }
        if (fr < fs[second]) {
            xs[worst] = std::move(xr);
            fs[worst] = fr;
            continue;
        }
        auto xc = blend(fr < fs[worst] ? -0.5 : 0.5); // contraction
        const double fc = safe_eval(f, xc);
        if (fc < std::min(fr, fs[worst])) {
            xs[worst] = std::move(xc);
            fs[worst] = fc;
            continue;
        }
        // shrink toward the best vertex
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == best) continue;
            for (std::size_t j = 0; j < n; ++j)
                xs[i][j] = xs[best][j] + 0.5 * (xs[i][j] - xs[best][j]);
            fs[i] = safe_eval(f, xs[i]);
        }
    }

    std::size_t bi = 0;
    for (std::size_t i = 1; i <= n; ++i)
        if (fs[i] < fs[bi]) bi = i;
    res.x = xs[bi];
    res.fx = fs[bi];
    res.iterations = it;
    return res;
}

NmResult nelder_mead_multistart(const std::function<double(const std::vector<double>&)>& f,
                                const std::vector<double>& x0, const std::vector<double>& step,
                                int starts, const NmOptions& opt) {
    // fixed perturbation fan (no RNG) around the supplied initial point
    static const double fan[5][4] = {{0.0, 0.0, 0.0, 0.0},
                                     {1.7, -1.3, 0.9, -0.6},
                                     {-1.1, 1.9, -1.4, 0.8},
                                     {0.6, 0.7, -1.8, 1.2},
                                     {-1.9, -0.8, 1.1, 1.6}};
    NmResult best;
    bool have = false;
    for (int s = 0; s < starts && s < 5; ++s) {
        std::vector<double> x = x0;
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += step[i] * fan[s][i % 4];
        NmResult r = nelder_mead(f, x, step, opt);
        if (!have || std::make_pair(!r.converged, r.fx) < std::make_pair(!best.converged, best.fx)) {
            best = std::move(r);
            have = true;
        }
    }
    return best;
}

} // namespace lda
