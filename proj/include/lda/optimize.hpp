#pragma once

#include <functional>
#include <vector>

namespace lda {

struct NmOptions {
    int max_iter = 4000;
    double ftol = 1e-12;
    double xtol = 1e-10;
};

struct NmResult {
    std::vector<double> x;
    double fx = 0.0;
    bool converged = false;
    int iterations = 0;
};

// Derivative-free simplex minimizer (Nelder-Mead with standard coefficients).
// `step` sets the initial simplex edge per coordinate.
NmResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                     const std::vector<double>& x0, const std::vector<double>& step,
                     const NmOptions& opt = {});

// Runs the simplex search from x0 plus a fixed fan of perturbed starting
// points (deterministic — no RNG) and keeps the best minimum found.
NmResult nelder_mead_multistart(const std::function<double(const std::vector<double>&)>& f,
                                const std::vector<double>& x0, const std::vector<double>& step,
                                int starts = 5, const NmOptions& opt = {});

} // namespace lda
