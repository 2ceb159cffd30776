#pragma once

#include "dsmpc/cone_solver.hpp"
#include "dsmpc/linalg.hpp"
#include "dsmpc/tightening.hpp"

#include <optional>
#include <vector>

namespace dsmpc {

// One finite-horizon solve: everything the program depends on. The
// covariance sequence is recomputed from Sigma0 by the caller (it differs
// between the two initialization strategies).
struct OcpInstance {
    SystemModel model;
    CostSpec cost;
    std::vector<TwoSidedConstraint> stateConstraints;
    std::vector<TwoSidedConstraint> inputConstraints;
    Matrix K;
    Matrix S;
    std::vector<Matrix> Sigma;  // Sigma_0..Sigma_N for this solve
    Matrix SigmaBar;
    Vector x0bar;
    Method method = Method::DR;
};

struct VariableLayout {
    int N = 0, nx = 0, nu = 0, nsc = 0, nic = 0;
    int numVars = 0;

    int idxU(int l) const { return l * nu; }
    int idxX(int l) const { return N * nu + l * nx; }
    int idxStateAux(int i, int l) const {  // (y, lambda) pair
        return N * nu + (N + 1) * nx + 2 * (l * nsc + i);
    }
    int idxInputAux(int j, int l) const {
        return N * nu + (N + 1) * nx + 2 * nsc * N + 2 * (l * nic + j);
    }
    int idxTermAux(int i) const {
        return N * nu + (N + 1) * nx + 2 * nsc * N + 2 * nic * N + 2 * i;
    }
};

// The Theorem-1 conic form: quadratic objective over (u, x, y, lambda)
// with nominal-dynamics equalities, absolute-value rows, auxiliary bounds
// and one 3-dimensional second-order cone per constraint per stage.
struct ConicProgram {
    ConeProblem problem;
    VariableLayout layout;
    double traceConstant = 0.0;
    Matrix stateSigmas;  // sigma (std dev) per state constraint x stage
    Matrix inputSigmas;
    Vector termSigmas;
};

// The condensed slab form: same objective over (u, x) with the SOC rows
// replaced by precomputed per-stage radii. Used as the cross-check oracle.
struct CondensedProgram {
    ConeProblem problem;
    VariableLayout layout;  // aux counts zero
    double traceConstant = 0.0;
    StageRadii radii;
};

enum class OcpStatus { Optimal, Infeasible, SolverError };

struct OcpSolution {
    OcpStatus status = OcpStatus::SolverError;
    std::vector<Vector> nominalInputs;  // u_0..u_{N-1}
    std::vector<Vector> nominalStates;  // x_0..x_N
    Vector auxiliaries;                 // conic form only
    double cost = 0.0;                  // includes the trace constant
    double infeasibilityMargin = 0.0;   // phase-1 certificate when Infeasible
    double solverGap = 0.0;
    double solverPrimalRes = 0.0;
    double solverDualRes = 0.0;
    int iterations = 0;
};

ConicProgram build_program(const OcpInstance& inst);
CondensedProgram build_condensed(const OcpInstance& inst);

/// Phase-1 feasibility margin of the condensed polytope: minimal uniform
/// relaxation t of all slab rows admitting a dynamically consistent
/// trajectory. Negative means strictly feasible.
double feasibility_margin(const OcpInstance& inst, const StageRadii& radii);

enum class OcpForm { Conic, Condensed };

/// Full solve: radius precomputation (early StageInfeasible exit), phase-1
/// feasibility decision, then the interior-point solve of the chosen form.
OcpSolution solve_ocp(const OcpInstance& inst, OcpForm form = OcpForm::Conic);

/// Nominal quadratic cost plus the trace constants for the given sequence.
double evaluate_cost(const std::vector<Vector>& states,
                     const std::vector<Vector>& inputs, const CostSpec& cost,
                     const Matrix& S, const Matrix& K,
                     const std::vector<Matrix>& Sigma);

double trace_constant(const CostSpec& cost, const Matrix& S, const Matrix& K,
                      const std::vector<Matrix>& Sigma);

}  // namespace dsmpc
