#pragma once

#include "dsmpc/linalg.hpp"

#include <string>
#include <vector>

namespace dsmpc {

// Conic quadratic program
//   minimize   (1/2) x^T P x + q^T x
//   subject to A x = b
//              G x + s = h,  s in K
// where K is the product of a nonnegative orthant of dimension nLin and
// second-order cones of the listed dimensions (t first: ||u|| <= t).
struct ConeSpec {
    int nLin = 0;
    std::vector<int> socDims;

    int totalDim() const {
        int m = nLin;
        for (int d : socDims) m += d;
        return m;
    }
    // barrier degree: one per linear row, one per cone
    int degree() const { return nLin + static_cast<int>(socDims.size()); }
};

struct ConeProblem {
    Matrix P;  // n x n PSD (may be zero for LPs)
    Vector q;
    Matrix A;  // p x n (may have zero rows)
    Vector b;
    Matrix G;  // m x n
    Vector h;
    ConeSpec cones;
};

enum class SolveStatus { Optimal, Infeasible, SolverError };

struct ConeSolution {
    SolveStatus status = SolveStatus::SolverError;
    Vector x, y, z, s;
    double objective = 0.0;  // (1/2) x^T P x + q^T x at the returned x
    double gap = 0.0;
    double relGap = 0.0;
    double primalRes = 0.0;
    double dualRes = 0.0;
    int iterations = 0;
    std::string message;
};

struct SolverOptions {
    int maxIters = 100;
    double feasTol = 1e-8;
    double absTol = 1e-9;
    double relTol = 1e-9;
    // accept the iterate as Optimal if it reaches this looser level even
    // when the target tolerances stall
    double acceptFeasTol = 5e-7;
};

/// Primal-dual interior-point method with Nesterov-Todd scaling.
ConeSolution solve_cone_qp(const ConeProblem& prob, const SolverOptions& opts = {});

}  // namespace dsmpc
