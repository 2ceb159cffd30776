#include "dsmpc/tightening.hpp"

#include "dsmpc/cone_solver.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>

namespace dsmpc {

void TwoSidedConstraint::validate() const {
    if (direction.size() == 0 || direction.norm() == 0.0)
        throw std::invalid_argument("constraint direction must be nonzero");
    if (bound <= 0.0) throw std::invalid_argument("constraint bound must be positive");
    if (epsilon <= 0.0 || epsilon >= 1.0)
        throw std::invalid_argument("violation probability must lie in (0, 1)");
}

double normal_quantile(double p) {
    boost::math::normal_distribution<double> nd;
    return boost::math::quantile(nd, p);
}

std::optional<double> slab_radius_dr(double variance, double bound, double epsilon) {
    if (variance > epsilon * bound * bound) return std::nullopt;
    if (variance <= 0.0) return bound;

    // maximize f(l) = l + sqrt(epsilon (b-l)^2 - variance) over [0, lmax],
    // lmax = b - sigma/sqrt(epsilon); f is concave there.
    const double sigma = std::sqrt(variance);
    const double lmax = bound - sigma / std::sqrt(epsilon);
    if (lmax <= 0.0) return 0.0;
    auto f = [&](double l) {
        double arg = epsilon * (bound - l) * (bound - l) - variance;
        return l + std::sqrt(std::max(arg, 0.0));
    };
    // golden-section search
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = 0.0, b = lmax;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > 1e-10 * std::max(1.0, lmax)) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    double lstar = 0.5 * (a + b);
    double r = std::max({f(lstar), f(0.0), f(lmax)});
    return std::min(r, bound);
}

bool soc_membership(double nominal, double variance, double bound, double epsilon,
                    double y, double lambda) {
    if (y < 0.0 || lambda < 0.0 || lambda > bound) return false;
    if (y * y + variance > epsilon * (bound - lambda) * (bound - lambda)) return false;
    return std::abs(nominal) <= y + lambda;
}

std::optional<double> slab_radius_gaussian(double variance, double bound, double epsilon) {
    if (variance <= 0.0) return bound;
    double r = bound - normal_quantile(1.0 - epsilon / 2.0) * std::sqrt(variance);
    if (r < 0.0) return std::nullopt;
    return r;
}

std::optional<double> slab_radius_cantelli(double variance, double bound, double epsilon) {
    if (variance <= 0.0) return bound;
    double r = bound - std::sqrt(variance) * std::sqrt((2.0 - epsilon) / epsilon);
    if (r < 0.0) return std::nullopt;
    return r;
}

std::optional<double> slab_radius(Method method, double variance, double bound,
                                  double epsilon) {
    switch (method) {
        case Method::DR: return slab_radius_dr(variance, bound, epsilon);
        case Method::Gaussian: return slab_radius_gaussian(variance, bound, epsilon);
        case Method::Cantelli: return slab_radius_cantelli(variance, bound, epsilon);
    }
    return std::nullopt;
}

namespace {

// Best total violating mass for a three-point distribution with violating
// atoms w1 (upper side), w2 (lower side) and mixing ratio alpha of the
// violating mass placed on w1. The satisfying atom's position follows from
// the moment equations. Returns 0 when the configuration is infeasible.
double three_point_mass(double m, double var, double b, double w1, double w2,
                        double alpha) {
    const double mbar = alpha * w1 + (1.0 - alpha) * w2;
    const double sbar = alpha * w1 * w1 + (1.0 - alpha) * w2 * w2;
    // (sbar - mbar^2) t^2 - (var + sbar) t + var = 0, take the root in (0, 1]
    const double a2 = sbar - mbar * mbar;
    double t;
    if (a2 < 1e-300) {
        t = var / (var + sbar);
    } else {
        const double bq = var + sbar;
        double disc = bq * bq - 4.0 * a2 * var;
        if (disc < 0.0) return 0.0;
        // smaller root in the cancellation-free conjugate form; the naive
        // (bq - sqrt(disc)) / (2 a2) loses all precision as a2 -> 0
        t = 2.0 * var / (bq + std::sqrt(disc));
    }
    if (!(t > 0.0)) return 0.0;
    t = std::min(t, 1.0);
    const double p3 = 1.0 - t;
    if (p3 > 1e-14) {
        const double w3 = -t * mbar / p3;
        if (std::abs(m + w3) > b) return 0.0;  // third atom must satisfy
    } else {
        // two violating atoms must meet the moments on their own
        if (std::abs(t * mbar) > 1e-9 * (std::abs(w1) + std::abs(w2)) ||
            std::abs(t * sbar - var) > 1e-9 * std::max(1.0, var))
            return 0.0;
    }
    return t;
}

}  // namespace

double worst_case_violation(double nominal, double variance, double bound) {
    const double m = nominal, b = bound;
    if (std::abs(m) > b) return 1.0;
    if (variance <= 0.0) return 0.0;
    const double sigma = std::sqrt(variance);

    // violating atom offsets from the boundaries, in units of sigma
    const double up0 = b - m;    // w1 >= up0 violates the upper side
    const double lo0 = -b - m;   // w2 <= lo0 violates the lower side
    const double edge = 1e-9 * sigma;

    double bestT = 0.0, bestU = 0.0, bestV = 0.0, bestA = 1.0;
    auto scan = [&](double uLo, double uHi, double du, double vLo, double vHi,
                    double dv, double aLo, double aHi, double da) {
        for (double uu = uLo; uu <= uHi + 1e-12; uu += du) {
            const double w1 = up0 + std::max(uu, 0.0) * sigma + edge;
            for (double vv = vLo; vv <= vHi + 1e-12; vv += dv) {
                const double w2 = lo0 - std::max(vv, 0.0) * sigma - edge;
                for (double aa = aLo; aa <= aHi + 1e-12; aa += da) {
                    const double al = std::min(std::max(aa, 0.0), 1.0);
                    double t = three_point_mass(m, variance, b, w1, w2, al);
                    if (t > bestT) {
                        bestT = t;
                        bestU = uu;
                        bestV = vv;
                        bestA = al;
                    }
                }
            }
        }
    };

    // coarse pass over [0, 10 sigma] offsets, then a refinement pass at
    // step sigma/200 around the best cell
    scan(0.0, 10.0, 0.05, 0.0, 10.0, 0.05, 0.0, 1.0, 0.05);
    scan(std::max(0.0, bestU - 0.05), bestU + 0.05, 0.005,
         std::max(0.0, bestV - 0.05), bestV + 0.05, 0.005,
         std::max(0.0, bestA - 0.05), std::min(1.0, bestA + 0.05), 0.0025);
    return std::min(bestT, 1.0);
}

StageRadii stage_radii(const std::vector<TwoSidedConstraint>& stateConstraints,
                       const std::vector<TwoSidedConstraint>& inputConstraints,
                       const Matrix& K, const std::vector<Matrix>& Sigma,
                       const Matrix& SigmaBar, Method method) {
    const int N = static_cast<int>(Sigma.size()) - 1;
    StageRadii out;
    out.stateRadii.resize(stateConstraints.size(), std::max(N, 0));
    out.inputRadii.resize(inputConstraints.size(), std::max(N, 0));
    out.terminalRadii.resize(stateConstraints.size());
    out.terminalInputRadii.resize(inputConstraints.size());

    for (int l = 0; l < N; ++l) {
        for (size_t i = 0; i < stateConstraints.size(); ++i) {
            const auto& c = stateConstraints[i];
            double var = c.direction.dot(Sigma[l] * c.direction);
            auto r = slab_radius(method, std::max(var, 0.0), c.bound, c.epsilon);
            if (!r) throw StageInfeasible(ConstraintKind::State, static_cast<int>(i), l);
            out.stateRadii(static_cast<int>(i), l) = *r;
        }
        const Matrix KSigmaKt = K * Sigma[l] * K.transpose();
        for (size_t j = 0; j < inputConstraints.size(); ++j) {
            const auto& c = inputConstraints[j];
            double var = c.direction.dot(KSigmaKt * c.direction);
            auto r = slab_radius(method, std::max(var, 0.0), c.bound, c.epsilon);
            if (!r) throw StageInfeasible(ConstraintKind::Input, static_cast<int>(j), l);
            out.inputRadii(static_cast<int>(j), l) = *r;
        }
    }
    for (size_t i = 0; i < stateConstraints.size(); ++i) {
        const auto& c = stateConstraints[i];
        double var = c.direction.dot(SigmaBar * c.direction);
        auto r = slab_radius(method, std::max(var, 0.0), c.bound, c.epsilon);
        if (!r) throw StageInfeasible(ConstraintKind::State, static_cast<int>(i), -1);
        out.terminalRadii(static_cast<int>(i)) = *r;
    }
    const Matrix KSbKt = K * SigmaBar * K.transpose();
    for (size_t j = 0; j < inputConstraints.size(); ++j) {
        const auto& c = inputConstraints[j];
        double var = c.direction.dot(KSbKt * c.direction);
        auto r = slab_radius(method, std::max(var, 0.0), c.bound, c.epsilon);
        if (!r) throw StageInfeasible(ConstraintKind::Input, static_cast<int>(j), -1);
        out.terminalInputRadii(static_cast<int>(j)) = *r;
    }
    return out;
}

TerminalSet make_terminal_set(const std::vector<TwoSidedConstraint>& stateConstraints,
                              const Matrix& SigmaBar, Method method) {
    TerminalSet ts;
    ts.SigmaBar = SigmaBar;
    ts.radii.resize(stateConstraints.size());
    for (size_t i = 0; i < stateConstraints.size(); ++i) {
        const auto& c = stateConstraints[i];
        double var = c.direction.dot(SigmaBar * c.direction);
        auto r = slab_radius(method, std::max(var, 0.0), c.bound, c.epsilon);
        if (!r) throw StageInfeasible(ConstraintKind::State, static_cast<int>(i), -1);
        ts.directions.push_back(c.direction);
        ts.radii(static_cast<int>(i)) = *r;
    }
    return ts;
}

namespace {

// max g^T x over { |a_i^T x| <= r_i }. Returns nullopt when unbounded.
std::optional<double> slab_lp_max(const Matrix& D, const Vector& r, const Vector& g) {
    const int n = static_cast<int>(D.cols());
    const int mrows = static_cast<int>(D.rows());
    if (g.norm() == 0.0) return 0.0;

    // unbounded iff g has a component in the nullspace of D
    Eigen::JacobiSVD<Matrix> svd(D, Eigen::ComputeFullV);
    Vector gProj = Vector::Zero(n);
    double tolSv = 1e-12 * std::max(1.0, svd.singularValues().size() > 0
                                             ? svd.singularValues()(0)
                                             : 1.0);
    int rank = 0;
    for (int i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > tolSv) ++rank;
    for (int i = rank; i < n; ++i) {
        Vector v = svd.matrixV().col(i);
        gProj += g.dot(v) * v;
    }
    if (gProj.norm() > 1e-9 * g.norm()) return std::nullopt;

    ConeProblem lp;
    lp.P = Matrix::Zero(n, n);
    lp.q = -g;
    lp.A = Matrix::Zero(0, n);
    lp.b = Vector::Zero(0);
    lp.G.resize(2 * mrows, n);
    lp.G.topRows(mrows) = D;
    lp.G.bottomRows(mrows) = -D;
    lp.h.resize(2 * mrows);
    lp.h.head(mrows) = r;
    lp.h.tail(mrows) = r;
    lp.cones.nLin = 2 * mrows;
    ConeSolution sol = solve_cone_qp(lp);
    if (sol.status != SolveStatus::Optimal)
        throw std::runtime_error("terminal certification LP failed");
    return -sol.objective;
}

}  // namespace

TerminalReport certify_terminal(const Matrix& K, const Matrix& Acl,
                                const TerminalSet& terminal,
                                const std::vector<TwoSidedConstraint>& inputConstraints,
                                const Vector& terminalInputRadii) {
    TerminalReport report;
    const int nc = static_cast<int>(terminal.directions.size());
    const int n = nc > 0 ? static_cast<int>(terminal.directions[0].size()) : 0;
    Matrix D(nc, n);
    for (int i = 0; i < nc; ++i) D.row(i) = terminal.directions[i].transpose();

    // invariance: max |a_j^T Acl x| over the slab intersection vs r_j
    report.invariant = true;
    double worst = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < nc; ++j) {
        Vector g = Acl.transpose() * terminal.directions[j];
        auto mx = slab_lp_max(D, terminal.radii, g);
        if (!mx) {
            report.invariant = false;
            worst = std::numeric_limits<double>::infinity();
            break;
        }
        worst = std::max(worst, *mx - terminal.radii(j));
        if (*mx > terminal.radii(j) + 1e-7) report.invariant = false;
    }
    report.worstInvarianceMargin = worst;

    // input admissibility of u = Kx over the slab intersection
    report.inputAdmissible = Admissibility::Yes;
    double worstIn = -std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < inputConstraints.size(); ++j) {
        Vector g = K.transpose() * inputConstraints[j].direction;
        auto mx = slab_lp_max(D, terminal.radii, g);
        if (!mx) {
            report.inputAdmissible = Admissibility::Unbounded;
            worstIn = std::numeric_limits<double>::infinity();
            break;
        }
        worstIn = std::max(worstIn, *mx - terminalInputRadii(static_cast<int>(j)));
        if (*mx > terminalInputRadii(static_cast<int>(j)) + 1e-7)
            report.inputAdmissible = Admissibility::No;
    }
    report.worstInputMargin = worstIn;
    return report;
}

}  // namespace dsmpc
