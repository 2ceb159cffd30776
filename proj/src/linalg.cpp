#include "dsmpc/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace dsmpc {

double spectral_radius(const Matrix& M) {
    if (M.rows() != M.cols()) throw std::invalid_argument("spectral_radius: matrix not square");
    if (M.size() == 0) return 0.0;
    Eigen::EigenSolver<Matrix> es(M, /*computeEigenvectors=*/false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

Matrix solve_discrete_lyapunov(const Matrix& M, const Matrix& C) {
    const int n = static_cast<int>(M.rows());
    if (M.cols() != n || C.rows() != n || C.cols() != n)
        throw std::invalid_argument("solve_discrete_lyapunov: dimension mismatch");
    if ((C - C.transpose()).cwiseAbs().maxCoeff() > 1e-10) throw NonSymmetric();
    const double rho = spectral_radius(M);
    if (rho >= 1.0 - 1e-9) throw NotSchurStable(rho);

    Matrix S;
    if (n <= 8) {
        // vec(M^T S M - S) = (M^T kron M^T) vec(S) - vec(S) = -vec(C)
        const int n2 = n * n;
        Matrix Mt = M.transpose();
        Matrix Kp(n2, n2);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                Kp.block(i * n, j * n, n, n) = Mt(i, j) * Mt;
        Matrix lhs = Matrix::Identity(n2, n2) - Kp;
        Vector rhs = Eigen::Map<const Vector>(C.data(), n2);
        Vector vecS = lhs.partialPivLu().solve(rhs);
        S = Eigen::Map<Matrix>(vecS.data(), n, n);
    } else {
        // fixed-point iteration S <- M^T S M + C
        S = C;
        Matrix term = C;
        for (int k = 0; k < 100000; ++k) {
            term = (M.transpose() * term * M).eval();
            S += term;
            if (term.cwiseAbs().maxCoeff() < 1e-12 * std::max(1.0, C.cwiseAbs().maxCoeff()))
                break;
        }
    }
    return symmetrize(S);
}

Matrix synthesize_gain(const Matrix& A, const Matrix& B, const Matrix& Q,
                       const Matrix& R) {
    const int n = static_cast<int>(A.rows());
    Matrix P = Q;
    const int max_iters = 10000;
    bool converged = false;
    for (int it = 0; it < max_iters; ++it) {
        Matrix BtPB = R + B.transpose() * P * B;
        Matrix BtPA = B.transpose() * P * A;
        Matrix Pn = symmetrize(Q + A.transpose() * P * A -
                               BtPA.transpose() * BtPB.ldlt().solve(BtPA));
        double rel = (Pn - P).cwiseAbs().maxCoeff() /
                     std::max(1.0, Pn.cwiseAbs().maxCoeff());
        P = Pn;
        if (rel <= 1e-12) {
            converged = true;
            break;
        }
        if (!P.allFinite())
            throw SynthesisFailed("Riccati iteration diverged");
    }
    if (!converged) throw SynthesisFailed("Riccati iteration did not converge");
    Matrix K = -(R + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
    if (spectral_radius(A + B * K) >= 1.0 - 1e-9)
        throw SynthesisFailed("Riccati gain does not stabilize the pair (A, B)");
    (void)n;
    return K;
}

std::vector<Matrix> propagate_covariance(const Matrix& Sigma0, const Matrix& Acl,
                                         const Matrix& W, int N) {
    std::vector<Matrix> out;
    out.reserve(N + 1);
    out.push_back(symmetrize(Sigma0));
    for (int l = 0; l < N; ++l)
        out.push_back(symmetrize(Acl * out.back() * Acl.transpose() + W));
    return out;
}

Matrix steady_state_covariance(const Matrix& Acl, const Matrix& W) {
    // Sigma = Acl Sigma Acl^T + W  <=>  M^T Sigma M - Sigma = -W with M = Acl^T
    return solve_discrete_lyapunov(Acl.transpose(), W);
}

bool loewner_leq(const Matrix& P, const Matrix& Q, double tol) {
    if (P.rows() != Q.rows() || P.cols() != Q.cols())
        throw std::invalid_argument("loewner_leq: dimension mismatch");
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(Q - P));
    return es.eigenvalues().minCoeff() >= -tol;
}

void SystemModel::validate() const {
    if (A.rows() != A.cols()) throw std::invalid_argument("A must be square");
    if (B.rows() != A.rows()) throw std::invalid_argument("B row count must match A");
    if (E.rows() != A.rows()) throw std::invalid_argument("E row count must match A");
    if (Wd.rows() != Wd.cols() || Wd.rows() != E.cols())
        throw std::invalid_argument("Wd must be n_w x n_w");
    if ((Wd - Wd.transpose()).cwiseAbs().maxCoeff() > 1e-10) throw NonSymmetric();
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(Wd));
    if (es.eigenvalues().minCoeff() < -1e-10)
        throw std::invalid_argument("Wd must be positive semidefinite");
}

void CostSpec::validate(int nx, int nu) const {
    if (Q.rows() != nx || Q.cols() != nx) throw std::invalid_argument("Q must be n_x x n_x");
    if (R.rows() != nu || R.cols() != nu) throw std::invalid_argument("R must be n_u x n_u");
    if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-10 ||
        (R - R.transpose()).cwiseAbs().maxCoeff() > 1e-10)
        throw NonSymmetric();
    if (Eigen::LLT<Matrix>(Q).info() != Eigen::Success)
        throw std::invalid_argument("Q must be positive definite");
    if (Eigen::LLT<Matrix>(R).info() != Eigen::Success)
        throw std::invalid_argument("R must be positive definite");
    if (N < 1) throw std::invalid_argument("horizon N must be >= 1");
}

SynthesisArtifacts synthesize(const SystemModel& model, const CostSpec& cost,
                              const Matrix* K_override, const Matrix* S_override) {
    model.validate();
    cost.validate(model.nx(), model.nu());

    SynthesisArtifacts art;
    art.K = K_override ? *K_override
                       : synthesize_gain(model.A, model.B, cost.Q, cost.R);
    art.Acl = model.A + model.B * art.K;
    art.spectralRadius = spectral_radius(art.Acl);
    if (art.spectralRadius >= 1.0 - 1e-9) throw NotSchurStable(art.spectralRadius);

    art.S = S_override
                ? symmetrize(*S_override)
                : solve_discrete_lyapunov(art.Acl,
                                          cost.Q + art.K.transpose() * cost.R * art.K);
    const Matrix W = model.W();
    art.Sigma = propagate_covariance(Matrix::Zero(model.nx(), model.nx()), art.Acl,
                                     W, cost.N);
    art.SigmaBar = steady_state_covariance(art.Acl, W);
    return art;
}

}  // namespace dsmpc
