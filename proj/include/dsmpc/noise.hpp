#pragma once

#include "dsmpc/linalg.hpp"

#include <cstdint>
#include <random>

namespace dsmpc {

enum class NoiseFamily { Gaussian, Laplace };

struct NonDiagonalLaplace : std::runtime_error {
    NonDiagonalLaplace()
        : std::runtime_error("Laplace noise requires a diagonal covariance") {}
};

struct NoiseSpec {
    NoiseFamily family = NoiseFamily::Gaussian;
    Matrix covariance;  // n_w x n_w target per-step covariance

    void validate() const;
};

class NoiseSampler {
  public:
    explicit NoiseSampler(const NoiseSpec& spec);

    /// One disturbance draw (dimension n_w); deterministic given the
    /// generator state. Uses inverse-CDF transforms so the stream does not
    /// depend on library-specific distribution implementations.
    Vector sample(std::mt19937_64& rng) const;

  private:
    NoiseSpec spec_;
    Matrix sqrtCov_;  // Gaussian: symmetric square root of the covariance
    Vector beta_;     // Laplace: per-component scale
};

/// Uniform draw in the open interval (0, 1) from 53 random bits.
double uniform_open(std::mt19937_64& rng);

}  // namespace dsmpc
