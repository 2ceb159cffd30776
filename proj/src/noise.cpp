#include "dsmpc/noise.hpp"

#include "dsmpc/tightening.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace dsmpc {

void NoiseSpec::validate() const {
    if (covariance.rows() != covariance.cols())
        throw std::invalid_argument("noise covariance must be square");
    if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-10)
        throw NonSymmetric();
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(covariance));
    if (es.eigenvalues().minCoeff() < -1e-10)
        throw std::invalid_argument("noise covariance must be PSD");
    if (family == NoiseFamily::Laplace) {
        Matrix offDiag = covariance;
        offDiag.diagonal().setZero();
        if (offDiag.cwiseAbs().maxCoeff() > 1e-12) throw NonDiagonalLaplace();
    }
}

NoiseSampler::NoiseSampler(const NoiseSpec& spec) : spec_(spec) {
    spec_.validate();
    const int n = static_cast<int>(spec_.covariance.rows());
    if (spec_.family == NoiseFamily::Gaussian) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(spec_.covariance));
        Vector d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        sqrtCov_ = es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
    } else {
        beta_.resize(n);
        for (int i = 0; i < n; ++i)
            beta_(i) = std::sqrt(std::max(0.0, spec_.covariance(i, i)) / 2.0);
    }
}

double uniform_open(std::mt19937_64& rng) {
    const std::uint64_t bits = rng() >> 11;  // 53 bits
    return (static_cast<double>(bits) + 0.5) * 0x1p-53;
}

Vector NoiseSampler::sample(std::mt19937_64& rng) const {
    const int n = static_cast<int>(spec_.covariance.rows());
    Vector w(n);
    if (spec_.family == NoiseFamily::Gaussian) {
        Vector z(n);
        for (int i = 0; i < n; ++i) z(i) = normal_quantile(uniform_open(rng));
        w = sqrtCov_ * z;
    } else {
        for (int i = 0; i < n; ++i) {
            const double u = uniform_open(rng) - 0.5;
            const double mag = -std::log(1.0 - 2.0 * std::abs(u));
            w(i) = (u < 0.0 ? -1.0 : 1.0) * beta_(i) * mag;
        }
    }
    return w;
}

}  // namespace dsmpc
