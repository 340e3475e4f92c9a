#include "lda/dependence.hpp"

#include <cmath>
#include <stdexcept>

#include "lda/errors.hpp"
#include "lda/special.hpp"

namespace lda {

Eigen::MatrixXd correlation_factor(const Eigen::MatrixXd& corr, bool& repaired) {
    repaired = false;
    Eigen::LLT<Eigen::MatrixXd> llt(corr);
    if (llt.info() == Eigen::Success) return llt.matrixL();

    // singular or slightly indefinite: rebuild from the spectrum
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(corr);
    if (es.info() != Eigen::Success)
        throw NumericsError("correlation eigendecomposition failed");
    const Eigen::VectorXd& ev = es.eigenvalues();
    if (ev.minCoeff() < -1e-8 * std::max(1.0, ev.maxCoeff()))
        throw NumericsError("correlation matrix is not positive semi-definite");
    Eigen::VectorXd clipped = ev;
    for (Eigen::Index i = 0; i < clipped.size(); ++i)
        if (clipped[i] < 1e-10) {
            repaired = true;
            clipped[i] = 0.0;
        }
    return es.eigenvectors() * clipped.cwiseSqrt().asDiagonal();
}

GaussianCopulaSpec::GaussianCopulaSpec(Eigen::MatrixXd corr) : corr_(std::move(corr)) {
    if (corr_.rows() == 0 || corr_.rows() != corr_.cols())
        throw std::invalid_argument("correlation matrix must be square and nonempty");
    for (Eigen::Index i = 0; i < corr_.rows(); ++i) {
        if (std::abs(corr_(i, i) - 1.0) > 1e-12)
            throw std::invalid_argument("correlation matrix needs a unit diagonal");
        for (Eigen::Index j = 0; j < i; ++j) {
            if (std::abs(corr_(i, j) - corr_(j, i)) > 1e-12)
                throw std::invalid_argument("correlation matrix must be symmetric");
            if (std::abs(corr_(i, j)) > 1.0 + 1e-12)
                throw std::invalid_argument("correlations must lie in [-1, 1]");
        }
    }
    factor_ = correlation_factor(corr_, repaired_);
}

GaussianCopulaSpec GaussianCopulaSpec::exchangeable(std::size_t dim, double rho) {
    const auto d = static_cast<Eigen::Index>(dim);
    Eigen::MatrixXd c = Eigen::MatrixXd::Constant(d, d, rho);
    c.diagonal().setOnes();
    return GaussianCopulaSpec(std::move(c));
}

void GaussianCopulaSpec::sample(RngStream& rng, std::vector<double>& u) const {
    const auto d = static_cast<Eigen::Index>(dim());
    Eigen::VectorXd z(d);
    for (Eigen::Index i = 0; i < d; ++i) z[i] = rng.normal();
    const Eigen::VectorXd x = factor_ * z;
    u.resize(dim());
    for (Eigen::Index i = 0; i < d; ++i) u[static_cast<std::size_t>(i)] = norm_cdf(x[i]);
}

std::vector<double> GaussianCopulaSpec::sample(RngStream& rng) const {
    std::vector<double> u;
    sample(rng, u);
    return u;
}

std::vector<std::vector<double>> sample_gaussian_copula(const GaussianCopulaSpec& spec,
                                                        std::size_t n, RngStream& rng) {
    std::vector<std::vector<double>> out(n);
    for (auto& row : out) spec.sample(rng, row);
    return out;
}

} // namespace lda
