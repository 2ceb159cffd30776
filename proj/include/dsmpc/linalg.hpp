#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace dsmpc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct NotSchurStable : std::runtime_error {
    explicit NotSchurStable(double rho)
        : std::runtime_error("matrix is not Schur stable (spectral radius " +
                             std::to_string(rho) + ")"),
          spectral_radius(rho) {}
    double spectral_radius;
};

struct NonSymmetric : std::runtime_error {
    NonSymmetric() : std::runtime_error("matrix is not symmetric") {}
};

struct SynthesisFailed : std::runtime_error {
    explicit SynthesisFailed(const std::string& what) : std::runtime_error(what) {}
};

/// (X + X^T)/2, used on every computed covariance/weight to suppress drift.
inline Matrix symmetrize(const Matrix& X) { return 0.5 * (X + X.transpose()); }

double spectral_radius(const Matrix& M);

/// Solves M^T S M - S = -C for Schur-stable M and symmetric C.
Matrix solve_discrete_lyapunov(const Matrix& M, const Matrix& C);

/// Infinite-horizon discrete LQR gain K such that A+BK is Schur stable
/// (u = Kx convention).
Matrix synthesize_gain(const Matrix& A, const Matrix& B, const Matrix& Q,
                       const Matrix& R);

/// Sigma_{l+1} = Acl Sigma_l Acl^T + W, returning Sigma_0..Sigma_N.
std::vector<Matrix> propagate_covariance(const Matrix& Sigma0, const Matrix& Acl,
                                         const Matrix& W, int N);

/// Fixed point of Sigma = Acl Sigma Acl^T + W.
Matrix steady_state_covariance(const Matrix& Acl, const Matrix& W);

/// True iff P <= Q in the Loewner order: lambda_min(Q - P) >= -tol.
bool loewner_leq(const Matrix& P, const Matrix& Q, double tol);

struct SystemModel {
    Matrix A;   // n_x x n_x
    Matrix B;   // n_x x n_u
    Matrix E;   // n_x x n_w noise channel
    Matrix Wd;  // n_w x n_w disturbance covariance

    int nx() const { return static_cast<int>(A.rows()); }
    int nu() const { return static_cast<int>(B.cols()); }
    int nw() const { return static_cast<int>(E.cols()); }
    Matrix W() const { return symmetrize(E * Wd * E.transpose()); }

    void validate() const;
};

struct CostSpec {
    Matrix Q;  // positive definite
    Matrix R;  // positive definite
    int N = 1;

    void validate(int nx, int nu) const;
};

struct SynthesisArtifacts {
    Matrix K;                   // n_u x n_x feedback gain
    Matrix S;                   // terminal weight
    std::vector<Matrix> Sigma;  // Sigma_0..Sigma_N from Sigma_0 = 0
    Matrix SigmaBar;            // steady-state covariance
    double spectralRadius = 0.0;

    Matrix Acl;  // A + B K, cached
};

/// Runs gain synthesis (or takes overrides), the terminal-weight Lyapunov
/// solve and the covariance recursion for the given model and cost.
SynthesisArtifacts synthesize(const SystemModel& model, const CostSpec& cost,
                              const Matrix* K_override = nullptr,
                              const Matrix* S_override = nullptr);

}  // namespace dsmpc
