#pragma once

#include "dsmpc/ocp.hpp"

#include <optional>

namespace dsmpc {

struct InitialInfeasible : std::runtime_error {
    InitialInfeasible() : std::runtime_error("initial state is infeasible") {}
};

struct BothInfeasible : std::runtime_error {
    BothInfeasible(double m1, double m2)
        : std::runtime_error("both initialization strategies are infeasible"),
          marginS1(m1), marginS2(m2) {}
    double marginS1;  // phase-1 certificates
    double marginS2;
};

enum class Strategy { S1, S2 };

struct ControllerState {
    int k = 0;
    Vector xbar;    // nominal state carried to the next step
    Matrix Sigma0;  // covariance of the initial prediction error
    std::optional<OcpSolution> lastSolution;
    Strategy lastStrategy = Strategy::S1;
    Method method = Method::DR;
};

struct StepOutcome {
    Vector input;  // applied u_k
    Strategy strategy = Strategy::S1;
    double cost = 0.0;
    bool feasibleS1 = false;
    bool feasibleS2 = false;
    double costS1 = 0.0;
    double costS2 = 0.0;
};

class Controller {
  public:
    Controller(SystemModel model, CostSpec cost,
               std::vector<TwoSidedConstraint> stateConstraints,
               std::vector<TwoSidedConstraint> inputConstraints,
               SynthesisArtifacts artifacts, Method method, OcpForm form = OcpForm::Conic);

    /// Checks Strategy-1 feasibility at x0 and returns the step-0 state.
    /// Throws InitialInfeasible when the first program cannot be solved.
    ControllerState init(const Vector& x0) const;

    /// One receding-horizon step: solve both strategies, pick per the
    /// comparison rule (ties go to Strategy 1), apply the tube feedback law.
    std::pair<StepOutcome, ControllerState> step(const ControllerState& state,
                                                 const Vector& xk) const;

    /// Pure selection rule, exposed for exhaustive testing.
    static Strategy select(bool feasibleS1, bool feasibleS2, double costS1,
                           double costS2);

    OcpSolution solve_at(const Vector& xbar, const Matrix& Sigma0) const;

    const SynthesisArtifacts& artifacts() const { return artifacts_; }
    const SystemModel& model() const { return model_; }
    const CostSpec& cost() const { return cost_; }
    Method method() const { return method_; }

  private:
    OcpInstance make_instance(const Vector& xbar, const Matrix& Sigma0) const;

    SystemModel model_;
    CostSpec cost_;
    std::vector<TwoSidedConstraint> stateConstraints_;
    std::vector<TwoSidedConstraint> inputConstraints_;
    SynthesisArtifacts artifacts_;
    Method method_;
    OcpForm form_;
};

}  // namespace dsmpc
