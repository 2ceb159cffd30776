#pragma once

#include "dsmpc/linalg.hpp"

#include <optional>
#include <vector>

namespace dsmpc {

enum class ConstraintKind { State, Input };

// Pr[|direction^T v| <= bound] >= 1 - epsilon
struct TwoSidedConstraint {
    Vector direction;
    double bound = 0.0;
    double epsilon = 0.0;
    ConstraintKind kind = ConstraintKind::State;

    void validate() const;
};

enum class Method { DR, Gaussian, Cantelli };

struct StageInfeasible : std::runtime_error {
    StageInfeasible(ConstraintKind k, int idx, int stage_)
        : std::runtime_error("tightened constraint infeasible (constraint " +
                             std::to_string(idx) + ", stage " + std::to_string(stage_) + ")"),
          kind(k), index(idx), stage(stage_) {}
    ConstraintKind kind;
    int index;
    int stage;  // -1 for the terminal stage
};

/// Largest |m| admitted by the exact SOC reformulation of the two-sided
/// distributionally robust constraint: max over lambda in [0,b] of
/// lambda + sqrt(epsilon (b-lambda)^2 - variance). Empty iff
/// variance > epsilon * bound^2.
std::optional<double> slab_radius_dr(double variance, double bound, double epsilon);

/// True iff (y, lambda) witnesses membership of nominal value m in the SOC set.
bool soc_membership(double nominal, double variance, double bound, double epsilon,
                    double y, double lambda);

/// Gaussian-quantile baseline with the symmetric per-side split epsilon/2.
std::optional<double> slab_radius_gaussian(double variance, double bound, double epsilon);

/// Cantelli/Boole baseline with uniform per-side budget epsilon/2.
std::optional<double> slab_radius_cantelli(double variance, double bound, double epsilon);

std::optional<double> slab_radius(Method method, double variance, double bound,
                                  double epsilon);

/// Standard normal quantile.
double normal_quantile(double p);

/// Brute-force lower bound on sup Pr[|m + w| > b] over all zero-mean
/// distributions with variance `variance`, via three-point supported
/// distributions with gridded violating atoms. Strict violation: atoms at
/// the boundary count as satisfied.
double worst_case_violation(double nominal, double variance, double bound);

struct StageRadii {
    // stateRadii(i, l): state constraint i at stage l = 0..N-1
    Matrix stateRadii;
    // inputRadii(j, l): input constraint j at stage l = 0..N-1
    Matrix inputRadii;
    Vector terminalRadii;       // per state constraint, from SigmaBar
    Vector terminalInputRadii;  // per input constraint, from SigmaBar
};

/// Per-stage tightened radii. State constraint i at stage l uses
/// sigma^2 = a_i^T Sigma_l a_i; input constraint j uses
/// sigma^2 = c_j^T (K Sigma_l K^T) c_j; terminal radii use SigmaBar.
/// Throws StageInfeasible when a radius does not exist.
StageRadii stage_radii(const std::vector<TwoSidedConstraint>& stateConstraints,
                       const std::vector<TwoSidedConstraint>& inputConstraints,
                       const Matrix& K, const std::vector<Matrix>& Sigma,
                       const Matrix& SigmaBar, Method method);

struct TerminalSet {
    std::vector<Vector> directions;
    Vector radii;
    Matrix SigmaBar;
};

TerminalSet make_terminal_set(const std::vector<TwoSidedConstraint>& stateConstraints,
                              const Matrix& SigmaBar, Method method);

enum class Admissibility { Yes, No, Unbounded };

struct TerminalReport {
    bool invariant = false;
    Admissibility inputAdmissible = Admissibility::Unbounded;
    double worstInvarianceMargin = 0.0;  // max_j (max |a_j^T Acl x| - r_j)
    double worstInputMargin = 0.0;
};

/// Certifies invariance of the terminal slab intersection under Acl and
/// admissibility of the terminal control law u = Kx, by linear programming
/// over the slab intersection. A failing certificate is a valid report.
TerminalReport certify_terminal(const Matrix& K, const Matrix& Acl,
                                const TerminalSet& terminal,
                                const std::vector<TwoSidedConstraint>& inputConstraints,
                                const Vector& terminalInputRadii);

}  // namespace dsmpc
