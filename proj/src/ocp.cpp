#include "dsmpc/ocp.hpp"

#include <cmath>

namespace dsmpc {

namespace {

constexpr double kFeasDecisionTol = 1e-7;

Matrix objective_hessian(const VariableLayout& L, const CostSpec& cost,
                         const Matrix& S, int numVars) {
    Matrix P = Matrix::Zero(numVars, numVars);
    for (int l = 0; l < L.N; ++l) {
        P.block(L.idxU(l), L.idxU(l), L.nu, L.nu) = 2.0 * cost.R;
        P.block(L.idxX(l), L.idxX(l), L.nx, L.nx) = 2.0 * cost.Q;
    }
    P.block(L.idxX(L.N), L.idxX(L.N), L.nx, L.nx) = 2.0 * S;
    return P;
}

void fill_equalities(const VariableLayout& L, const OcpInstance& inst, Matrix& A,
                     Vector& b) {
    const int nEq = (L.N + 1) * L.nx;
    A = Matrix::Zero(nEq, L.numVars);
    b = Vector::Zero(nEq);
    A.block(0, L.idxX(0), L.nx, L.nx) = Matrix::Identity(L.nx, L.nx);
    b.head(L.nx) = inst.x0bar;
    for (int l = 0; l < L.N; ++l) {
        const int r = (l + 1) * L.nx;
        A.block(r, L.idxX(l + 1), L.nx, L.nx) = Matrix::Identity(L.nx, L.nx);
        A.block(r, L.idxX(l), L.nx, L.nx) = -inst.model.A;
        A.block(r, L.idxU(l), L.nx, L.nu) = -inst.model.B;
    }
}

}  // namespace

double trace_constant(const CostSpec& cost, const Matrix& S, const Matrix& K,
                      const std::vector<Matrix>& Sigma) {
    const Matrix QKRK = cost.Q + K.transpose() * cost.R * K;
    double c = 0.0;
    for (int l = 0; l < cost.N; ++l) c += (QKRK * Sigma[l]).trace();
    c += (S * Sigma[cost.N]).trace();
    return c;
}

double evaluate_cost(const std::vector<Vector>& states,
                     const std::vector<Vector>& inputs, const CostSpec& cost,
                     const Matrix& S, const Matrix& K,
                     const std::vector<Matrix>& Sigma) {
    double J = 0.0;
    for (int l = 0; l < cost.N; ++l) {
        J += states[l].dot(cost.Q * states[l]);
        J += inputs[l].dot(cost.R * inputs[l]);
    }
    J += states[cost.N].dot(S * states[cost.N]);
    return J + trace_constant(cost, S, K, Sigma);
}

ConicProgram build_program(const OcpInstance& inst) {
    ConicProgram prog;
    VariableLayout& L = prog.layout;
    L.N = inst.cost.N;
    L.nx = inst.model.nx();
    L.nu = inst.model.nu();
    L.nsc = static_cast<int>(inst.stateConstraints.size());
    L.nic = static_cast<int>(inst.inputConstraints.size());
    L.numVars = L.N * L.nu + (L.N + 1) * L.nx + 2 * L.nsc * L.N + 2 * L.nic * L.N +
                2 * L.nsc;

    prog.stateSigmas.resize(L.nsc, L.N);
    for (int l = 0; l < L.N; ++l)
        for (int i = 0; i < L.nsc; ++i) {
            const auto& c = inst.stateConstraints[i];
            prog.stateSigmas(i, l) =
                std::sqrt(std::max(0.0, c.direction.dot(inst.Sigma[l] * c.direction)));
        }
    prog.inputSigmas.resize(L.nic, L.N);
    for (int l = 0; l < L.N; ++l) {
        const Matrix KSK = inst.K * inst.Sigma[l] * inst.K.transpose();
        for (int j = 0; j < L.nic; ++j) {
            const auto& c = inst.inputConstraints[j];
            prog.inputSigmas(j, l) =
                std::sqrt(std::max(0.0, c.direction.dot(KSK * c.direction)));
        }
    }
    prog.termSigmas.resize(L.nsc);
    for (int i = 0; i < L.nsc; ++i) {
        const auto& c = inst.stateConstraints[i];
        prog.termSigmas(i) =
            std::sqrt(std::max(0.0, c.direction.dot(inst.SigmaBar * c.direction)));
    }

    ConeProblem& cp = prog.problem;
    cp.P = objective_hessian(L, inst.cost, inst.S, L.numVars);
    cp.q = Vector::Zero(L.numVars);
    fill_equalities(L, inst, cp.A, cp.b);

    // 5 linear rows + one 3-dim SOC per (constraint, stage) instance
    const int nInst = L.nsc * L.N + L.nic * L.N + L.nsc;
    const int nLin = 5 * nInst;
    const int mTot = nLin + 3 * nInst;
    cp.G = Matrix::Zero(mTot, L.numVars);
    cp.h = Vector::Zero(mTot);
    cp.cones.nLin = nLin;
    cp.cones.socDims.assign(nInst, 3);

    int linRow = 0;
    int socRow = nLin;
    auto addInstance = [&](const Vector& dirRow, int dirBase, int auxIdx, double bound,
                           double eps, double sigma) {
        const int iy = auxIdx, il = auxIdx + 1;
        // dir^T v - y - lambda <= 0 ; -dir^T v - y - lambda <= 0
        cp.G.block(linRow, dirBase, 1, dirRow.size()) = dirRow.transpose();
        cp.G(linRow, iy) = -1.0;
        cp.G(linRow, il) = -1.0;
        ++linRow;
        cp.G.block(linRow, dirBase, 1, dirRow.size()) = -dirRow.transpose();
        cp.G(linRow, iy) = -1.0;
        cp.G(linRow, il) = -1.0;
        ++linRow;
        cp.G(linRow++, iy) = -1.0;             // y >= 0
        cp.G(linRow++, il) = -1.0;             // lambda >= 0
        cp.G(linRow, il) = 1.0;                // lambda <= bound
        cp.h(linRow++) = bound;
        // SOC: || (y, sigma) || <= sqrt(eps) (bound - lambda)
        const double se = std::sqrt(eps);
        cp.G(socRow, il) = se;
        cp.h(socRow) = se * bound;
        cp.G(socRow + 1, iy) = -1.0;
        cp.h(socRow + 2) = sigma;
        socRow += 3;
    };

    for (int l = 0; l < L.N; ++l)
        for (int i = 0; i < L.nsc; ++i) {
            const auto& c = inst.stateConstraints[i];
            addInstance(c.direction, L.idxX(l), L.idxStateAux(i, l), c.bound,
                        c.epsilon, prog.stateSigmas(i, l));
        }
    for (int l = 0; l < L.N; ++l)
        for (int j = 0; j < L.nic; ++j) {
            const auto& c = inst.inputConstraints[j];
            addInstance(c.direction, L.idxU(l), L.idxInputAux(j, l), c.bound,
                        c.epsilon, prog.inputSigmas(j, l));
        }
    for (int i = 0; i < L.nsc; ++i) {
        const auto& c = inst.stateConstraints[i];
        addInstance(c.direction, L.idxX(L.N), L.idxTermAux(i), c.bound, c.epsilon,
                    prog.termSigmas(i));
    }

    prog.traceConstant = trace_constant(inst.cost, inst.S, inst.K, inst.Sigma);
    return prog;
}

CondensedProgram build_condensed(const OcpInstance& inst) {
    CondensedProgram prog;
    VariableLayout& L = prog.layout;
    L.N = inst.cost.N;
    L.nx = inst.model.nx();
    L.nu = inst.model.nu();
    L.nsc = 0;  // no auxiliaries in this form
    L.nic = 0;
    L.numVars = L.N * L.nu + (L.N + 1) * L.nx;

    prog.radii = stage_radii(inst.stateConstraints, inst.inputConstraints, inst.K,
                             inst.Sigma, inst.SigmaBar, inst.method);

    ConeProblem& cp = prog.problem;
    cp.P = objective_hessian(L, inst.cost, inst.S, L.numVars);
    cp.q = Vector::Zero(L.numVars);
    fill_equalities(L, inst, cp.A, cp.b);

    const int nsc = static_cast<int>(inst.stateConstraints.size());
    const int nic = static_cast<int>(inst.inputConstraints.size());
    const int mTot = 2 * (nsc * L.N + nic * L.N + nsc);
    cp.G = Matrix::Zero(mTot, L.numVars);
    cp.h = Vector::Zero(mTot);
    cp.cones.nLin = mTot;

    int row = 0;
    auto addSlab = [&](const Vector& dir, int base, double r) {
        cp.G.block(row, base, 1, dir.size()) = dir.transpose();
        cp.h(row++) = r;
        cp.G.block(row, base, 1, dir.size()) = -dir.transpose();
        cp.h(row++) = r;
    };
    for (int l = 0; l < L.N; ++l)
        for (int i = 0; i < nsc; ++i)
            addSlab(inst.stateConstraints[i].direction, L.idxX(l),
                    prog.radii.stateRadii(i, l));
    for (int l = 0; l < L.N; ++l)
        for (int j = 0; j < nic; ++j)
            addSlab(inst.inputConstraints[j].direction, L.idxU(l),
                    prog.radii.inputRadii(j, l));
    for (int i = 0; i < nsc; ++i)
        addSlab(inst.stateConstraints[i].direction, L.idxX(L.N),
                prog.radii.terminalRadii(i));

    prog.traceConstant = trace_constant(inst.cost, inst.S, inst.K, inst.Sigma);
    return prog;
}

double feasibility_margin(const OcpInstance& inst, const StageRadii& radii) {
    const int N = inst.cost.N;
    const int nx = inst.model.nx();
    const int nu = inst.model.nu();
    const int nsc = static_cast<int>(inst.stateConstraints.size());
    const int nic = static_cast<int>(inst.inputConstraints.size());
    const int nv = N * nu + (N + 1) * nx + 1;  // trailing slack t
    const int it = nv - 1;

    VariableLayout L;
    L.N = N;
    L.nx = nx;
    L.nu = nu;
    L.numVars = nv;

    ConeProblem lp;
    lp.P = Matrix::Zero(nv, nv);
    lp.q = Vector::Zero(nv);
    lp.q(it) = 1.0;
    {
        Matrix A;
        Vector b;
        OcpInstance tmp = inst;
        VariableLayout Lfull = L;
        fill_equalities(Lfull, tmp, A, b);
        lp.A = Matrix::Zero(A.rows(), nv);
        lp.A.leftCols(nv - 1) = A.leftCols(nv - 1);
        lp.b = b;
    }
    const int mTot = 2 * (nsc * N + nic * N + nsc);
    if (mTot == 0) return 0.0;  // no slab rows: minimizing the slack is unbounded
    lp.G = Matrix::Zero(mTot, nv);
    lp.h = Vector::Zero(mTot);
    lp.cones.nLin = mTot;
    int row = 0;
    auto addSlab = [&](const Vector& dir, int base, double r) {
        lp.G.block(row, base, 1, dir.size()) = dir.transpose();
        lp.G(row, it) = -1.0;
        lp.h(row++) = r;
        lp.G.block(row, base, 1, dir.size()) = -dir.transpose();
        lp.G(row, it) = -1.0;
        lp.h(row++) = r;
    };
    for (int l = 0; l < N; ++l)
        for (int i = 0; i < nsc; ++i)
            addSlab(inst.stateConstraints[i].direction, L.idxX(l),
                    radii.stateRadii(i, l));
    for (int l = 0; l < N; ++l)
        for (int j = 0; j < nic; ++j)
            addSlab(inst.inputConstraints[j].direction, L.idxU(l),
                    radii.inputRadii(j, l));
    for (int i = 0; i < nsc; ++i)
        addSlab(inst.stateConstraints[i].direction, L.idxX(N),
                radii.terminalRadii(i));

    SolverOptions opts;
    ConeSolution sol = solve_cone_qp(lp, opts);
    if (sol.status != SolveStatus::Optimal)
        throw std::runtime_error("phase-1 feasibility LP did not converge");
    return sol.objective;
}

OcpSolution solve_ocp(const OcpInstance& inst, OcpForm form) {
    OcpSolution out;
    StageRadii radii;
    try {
        radii = stage_radii(inst.stateConstraints, inst.inputConstraints, inst.K,
                            inst.Sigma, inst.SigmaBar, inst.method);
    } catch (const StageInfeasible&) {
        out.status = OcpStatus::Infeasible;
        out.infeasibilityMargin = std::numeric_limits<double>::infinity();
        return out;
    }

    double margin;
    try {
        margin = feasibility_margin(inst, radii);
    } catch (const std::runtime_error&) {
        out.status = OcpStatus::SolverError;
        return out;
    }
    out.infeasibilityMargin = margin;
    if (margin > kFeasDecisionTol) {
        out.status = OcpStatus::Infeasible;
        return out;
    }

    ConeProblem* problem;
    ConicProgram conic;
    CondensedProgram condensed;
    double traceConst;
    VariableLayout layout;
    if (form == OcpForm::Conic && inst.method == Method::DR) {
        conic = build_program(inst);
        problem = &conic.problem;
        traceConst = conic.traceConstant;
        layout = conic.layout;
    } else {
        condensed = build_condensed(inst);
        problem = &condensed.problem;
        traceConst = condensed.traceConstant;
        layout = condensed.layout;
    }

    ConeSolution sol = solve_cone_qp(*problem);
    if (sol.status != SolveStatus::Optimal) {
        out.status = OcpStatus::SolverError;
        return out;
    }

    out.status = OcpStatus::Optimal;
    out.cost = sol.objective + traceConst;
    out.solverGap = sol.gap;
    out.solverPrimalRes = sol.primalRes;
    out.solverDualRes = sol.dualRes;
    out.iterations = sol.iterations;
    out.nominalInputs.clear();
    out.nominalStates.clear();
    for (int l = 0; l < layout.N; ++l)
        out.nominalInputs.push_back(sol.x.segment(layout.idxU(l), layout.nu));
    for (int l = 0; l <= layout.N; ++l)
        out.nominalStates.push_back(sol.x.segment(layout.idxX(l), layout.nx));
    const int nAux = layout.numVars - layout.N * layout.nu - (layout.N + 1) * layout.nx;
    if (nAux > 0)
        out.auxiliaries = sol.x.tail(nAux);
    return out;
}

}  // namespace dsmpc
