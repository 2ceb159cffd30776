#include "dsmpc/controller.hpp"

namespace dsmpc {

Controller::Controller(SystemModel model, CostSpec cost,
                       std::vector<TwoSidedConstraint> stateConstraints,
                       std::vector<TwoSidedConstraint> inputConstraints,
                       SynthesisArtifacts artifacts, Method method, OcpForm form)
    : model_(std::move(model)),
      cost_(std::move(cost)),
      stateConstraints_(std::move(stateConstraints)),
      inputConstraints_(std::move(inputConstraints)),
      artifacts_(std::move(artifacts)),
      method_(method),
      form_(form) {
    if (artifacts_.spectralRadius >= 1.0 - 1e-9)
        throw NotSchurStable(artifacts_.spectralRadius);
}

OcpInstance Controller::make_instance(const Vector& xbar, const Matrix& Sigma0) const {
    OcpInstance inst;
    inst.model = model_;
    inst.cost = cost_;
    inst.stateConstraints = stateConstraints_;
    inst.inputConstraints = inputConstraints_;
    inst.K = artifacts_.K;
    inst.S = artifacts_.S;
    inst.Sigma = propagate_covariance(Sigma0, artifacts_.Acl, model_.W(), cost_.N);
    inst.SigmaBar = artifacts_.SigmaBar;
    inst.x0bar = xbar;
    inst.method = method_;
    return inst;
}

OcpSolution Controller::solve_at(const Vector& xbar, const Matrix& Sigma0) const {
    return solve_ocp(make_instance(xbar, Sigma0), form_);
}

ControllerState Controller::init(const Vector& x0) const {
    const Matrix zero = Matrix::Zero(model_.nx(), model_.nx());
    OcpSolution sol = solve_at(x0, zero);
    if (sol.status != OcpStatus::Optimal) throw InitialInfeasible();
    ControllerState state;
    state.k = 0;
    state.xbar = x0;
    state.Sigma0 = zero;
    state.method = method_;
    return state;
}

Strategy Controller::select(bool feasibleS1, bool feasibleS2, double costS1,
                            double costS2) {
    if (!feasibleS1) return Strategy::S2;
    if (!feasibleS2) return Strategy::S1;
    return costS1 > costS2 ? Strategy::S2 : Strategy::S1;  // ties go to S1
}

std::pair<StepOutcome, ControllerState> Controller::step(const ControllerState& state,
                                                         const Vector& xk) const {
    const Matrix zero = Matrix::Zero(model_.nx(), model_.nx());
    StepOutcome out;

    // Strategy 1: reset the nominal state to the measurement
    OcpSolution s1 = solve_at(xk, zero);
    out.feasibleS1 = (s1.status == OcpStatus::Optimal);
    out.costS1 = s1.cost;

    // Strategy 2: propagate the previous plan (unavailable at k = 0)
    OcpSolution s2;
    Matrix sigma0S2;
    bool haveS2 = false;
    if (state.lastSolution) {
        sigma0S2 = symmetrize(artifacts_.Acl * state.Sigma0 * artifacts_.Acl.transpose() +
                              model_.W());
        s2 = solve_at(state.xbar, sigma0S2);
        haveS2 = true;
        out.feasibleS2 = (s2.status == OcpStatus::Optimal);
        out.costS2 = s2.cost;
    }

    if (!out.feasibleS1 && !out.feasibleS2)
        throw BothInfeasible(s1.infeasibilityMargin,
                             haveS2 ? s2.infeasibilityMargin
                                    : std::numeric_limits<double>::infinity());

    out.strategy = select(out.feasibleS1, out.feasibleS2, out.costS1, out.costS2);
    const OcpSolution& chosen = (out.strategy == Strategy::S1) ? s1 : s2;
    const Vector& xbarChosen = (out.strategy == Strategy::S1) ? xk : state.xbar;
    const Matrix& sigma0Chosen = (out.strategy == Strategy::S1) ? zero : sigma0S2;

    out.cost = chosen.cost;
    out.input = artifacts_.K * (xk - xbarChosen) + chosen.nominalInputs[0];

    ControllerState next;
    next.k = state.k + 1;
    next.xbar = model_.A * xbarChosen + model_.B * chosen.nominalInputs[0];
    next.Sigma0 = sigma0Chosen;
    next.lastSolution = chosen;
    next.lastStrategy = out.strategy;
    next.method = method_;
    return {out, next};
}

}  // namespace dsmpc
