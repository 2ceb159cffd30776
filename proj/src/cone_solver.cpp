#include "dsmpc/cone_solver.hpp"

#include <cmath>
#include <limits>

namespace dsmpc {
namespace {

constexpr double kStepFrac = 0.99;

// Nesterov-Todd scaling for the product cone. W is symmetric positive
// definite block-diagonal with lambda = W z = W^{-1} s.
struct Scaling {
    Vector wLin;                 // per linear row: w_i = sqrt(s_i / z_i)
    std::vector<Matrix> wSoc;    // dense per-cone scaling block
    std::vector<Matrix> wSocInv;
    const ConeSpec* spec = nullptr;

    Vector apply(const Vector& v) const {  // W v
        Vector out(v.size());
        out.head(spec->nLin) = wLin.cwiseProduct(v.head(spec->nLin));
        int off = spec->nLin;
        for (size_t k = 0; k < spec->socDims.size(); ++k) {
            int d = spec->socDims[k];
            out.segment(off, d) = wSoc[k] * v.segment(off, d);
            off += d;
        }
        return out;
    }
    Vector applyInv(const Vector& v) const {  // W^{-1} v
        Vector out(v.size());
        out.head(spec->nLin) = v.head(spec->nLin).cwiseQuotient(wLin);
        int off = spec->nLin;
        for (size_t k = 0; k < spec->socDims.size(); ++k) {
            int d = spec->socDims[k];
            out.segment(off, d) = wSocInv[k] * v.segment(off, d);
            off += d;
        }
        return out;
    }
    // W^T W v = W^2 v (W symmetric)
    Vector applySquared(const Vector& v) const { return apply(apply(v)); }
};

double jnorm(const Eigen::Ref<const Vector>& u) {
    double t = u(0) * u(0) - u.tail(u.size() - 1).squaredNorm();
    return std::sqrt(std::max(t, 0.0));
}

bool compute_scaling(const Vector& s, const Vector& z, const ConeSpec& spec,
                     Scaling& W, Vector& lambda) {
    W.spec = &spec;
    W.wLin.resize(spec.nLin);
    lambda.resize(spec.totalDim());
    for (int i = 0; i < spec.nLin; ++i) {
        if (s(i) <= 0.0 || z(i) <= 0.0) return false;
        W.wLin(i) = std::sqrt(s(i) / z(i));
        lambda(i) = std::sqrt(s(i) * z(i));
    }
    W.wSoc.clear();
    W.wSocInv.clear();
    int off = spec.nLin;
    for (int d : spec.socDims) {
        auto sk = s.segment(off, d);
        auto zk = z.segment(off, d);
        double js = jnorm(sk), jz = jnorm(zk);
        if (js <= 0.0 || jz <= 0.0 || sk(0) <= 0.0 || zk(0) <= 0.0) return false;
        Vector sb = sk / js, zb = zk / jz;
        double gamma = std::sqrt((1.0 + sb.dot(zb)) / 2.0);
        Vector wb(d);
        wb(0) = (sb(0) + zb(0)) / (2.0 * gamma);
        wb.tail(d - 1) = (sb.tail(d - 1) - zb.tail(d - 1)) / (2.0 * gamma);
        double eta = std::sqrt(js / jz);

        Matrix Wk(d, d);
        Wk(0, 0) = wb(0);
        Wk.block(0, 1, 1, d - 1) = wb.tail(d - 1).transpose();
        Wk.block(1, 0, d - 1, 1) = wb.tail(d - 1);
        Wk.block(1, 1, d - 1, d - 1) =
            Matrix::Identity(d - 1, d - 1) +
            wb.tail(d - 1) * wb.tail(d - 1).transpose() / (1.0 + wb(0));
        Wk *= eta;

        Matrix WkInv(d, d);
        WkInv(0, 0) = wb(0);
        WkInv.block(0, 1, 1, d - 1) = -wb.tail(d - 1).transpose();
        WkInv.block(1, 0, d - 1, 1) = -wb.tail(d - 1);
        WkInv.block(1, 1, d - 1, d - 1) =
            Matrix::Identity(d - 1, d - 1) +
            wb.tail(d - 1) * wb.tail(d - 1).transpose() / (1.0 + wb(0));
        WkInv /= eta;

        W.wSoc.push_back(Wk);
        W.wSocInv.push_back(WkInv);
        lambda.segment(off, d) = Wk * zk;
        off += d;
    }
    return true;
}

// Jordan product u o v on the product cone.
Vector jprod(const Vector& u, const Vector& v, const ConeSpec& spec) {
    Vector out(u.size());
    out.head(spec.nLin) = u.head(spec.nLin).cwiseProduct(v.head(spec.nLin));
    int off = spec.nLin;
    for (int d : spec.socDims) {
        auto uk = u.segment(off, d);
        auto vk = v.segment(off, d);
        out(off) = uk.dot(vk);
        out.segment(off + 1, d - 1) =
            uk(0) * vk.tail(d - 1) + vk(0) * uk.tail(d - 1);
        off += d;
    }
    return out;
}

// Solve lambda o u = v for u.
Vector jdiv(const Vector& lambda, const Vector& v, const ConeSpec& spec) {
    Vector out(v.size());
    out.head(spec.nLin) = v.head(spec.nLin).cwiseQuotient(lambda.head(spec.nLin));
    int off = spec.nLin;
    for (int d : spec.socDims) {
        auto lk = lambda.segment(off, d);
        auto vk = v.segment(off, d);
        // inverse of the arrow matrix L(lk)
        double det = lk(0) * lk(0) - lk.tail(d - 1).squaredNorm();
        double a = lk.tail(d - 1).dot(vk.tail(d - 1));
        out(off) = (lk(0) * vk(0) - a) / det;
        // lk1 * u0 + lk0 * u1 = v1  =>  u1 = (v1 - u0 lk1)/lk0
        out.segment(off + 1, d - 1) =
            (vk.tail(d - 1) - out(off) * lk.tail(d - 1)) / lk(0);
        off += d;
    }
    return out;
}

Vector cone_identity(const ConeSpec& spec) {
    Vector e = Vector::Zero(spec.totalDim());
    e.head(spec.nLin).setOnes();
    int off = spec.nLin;
    for (int d : spec.socDims) {
        e(off) = 1.0;
        off += d;
    }
    return e;
}

// Largest t such that u + a*du stays in the cone for all a in [0, t]
// (may be +inf).
double max_step(const Vector& u, const Vector& du, const ConeSpec& spec) {
    double t = std::numeric_limits<double>::infinity();
    for (int i = 0; i < spec.nLin; ++i)
        if (du(i) < 0.0) t = std::min(t, -u(i) / du(i));
    int off = spec.nLin;
    for (int d : spec.socDims) {
        auto uk = u.segment(off, d);
        auto dk = du.segment(off, d);
        // roots of (u0+a d0)^2 - ||u1+a d1||^2 = 0 with u0+a d0 >= 0
        double aa = dk(0) * dk(0) - dk.tail(d - 1).squaredNorm();
        double bb = 2.0 * (uk(0) * dk(0) - uk.tail(d - 1).dot(dk.tail(d - 1)));
        double cc = uk(0) * uk(0) - uk.tail(d - 1).squaredNorm();
        double bound = std::numeric_limits<double>::infinity();
        auto consider = [&](double r) {
            if (r > 0.0 && uk(0) + r * dk(0) >= -1e-300) bound = std::min(bound, r);
        };
        if (std::abs(aa) < 1e-300) {
            if (bb < 0.0) consider(-cc / bb);
        } else {
            double disc = bb * bb - 4.0 * aa * cc;
            if (disc >= 0.0) {
                double sq = std::sqrt(disc);
                consider((-bb - sq) / (2.0 * aa));
                consider((-bb + sq) / (2.0 * aa));
            }
        }
        if (dk(0) < 0.0) bound = std::min(bound, -uk(0) / dk(0));
        t = std::min(t, bound);
        off += d;
    }
    return t;
}

// Distance by which u lies outside the cone (0 if inside).
double outside_by(const Vector& u, const ConeSpec& spec) {
    double t = 0.0;
    for (int i = 0; i < spec.nLin; ++i) t = std::max(t, -u(i));
    int off = spec.nLin;
    for (int d : spec.socDims) {
        t = std::max(t, u.segment(off + 1, d - 1).norm() - u(off));
        off += d;
    }
    return t;
}

struct KktSolver {
    const ConeProblem* prob;
    int n, p, m;
    Eigen::PartialPivLU<Matrix> lu;
    Matrix kkt;

    // Factor [P + G^T W^{-2} G, A^T; A, 0] with static diagonal
    // regularization; directions that touch neither the objective nor any
    // cone row make the unregularized matrix exactly singular. The bias is
    // removed by iterative refinement against the true matrix in solve().
    void factor(const Scaling& W) {
        Matrix GW(m, n);  // W^{-1} G
        for (int j = 0; j < n; ++j) GW.col(j) = W.applyInv(prob->G.col(j));
        kkt.resize(n + p, n + p);
        kkt.topLeftCorner(n, n) = prob->P + GW.transpose() * GW;
        kkt.topRightCorner(n, p) = prob->A.transpose();
        kkt.bottomLeftCorner(p, n) = prob->A;
        kkt.bottomRightCorner(p, p).setZero();
        Matrix reg = kkt;
        reg.diagonal().head(n).array() += 1e-11;
        reg.diagonal().tail(p).array() -= 1e-11;
        lu.compute(reg);
    }

    // Solve the Newton system for rhs (bx, by, bz):
    //   P dx + A^T dy + G^T dz = bx
    //   A dx                   = by
    //   G dx - W^2 dz          = bz
    void solve(const Scaling& W, const Vector& bx, const Vector& by,
               const Vector& bz, Vector& dx, Vector& dy, Vector& dz) const {
        Vector rhs(n + p);
        rhs.head(n) = bx + prob->G.transpose() * W.applyInv(W.applyInv(bz));
        rhs.tail(p) = by;
        Vector sol = lu.solve(rhs);
        // refinement against the unregularized matrix removes both the LU
        // rounding error and the static-regularization bias
        double prev = std::numeric_limits<double>::infinity();
        for (int round = 0; round < 4; ++round) {
            Vector resid = rhs - kkt * sol;
            const double rn = resid.norm();
            if (rn >= prev || rn <= 1e-14 * std::max(1.0, rhs.norm())) break;
            prev = rn;
            sol += lu.solve(resid);
        }
        dx = sol.head(n);
        dy = sol.tail(p);
        dz = W.applyInv(W.applyInv(prob->G * dx - bz));
    }
};

}  // namespace

ConeSolution solve_cone_qp(const ConeProblem& prob, const SolverOptions& opts) {
    const int n = static_cast<int>(prob.q.size());
    const int p = static_cast<int>(prob.b.size());
    const int m = prob.cones.totalDim();
    const ConeSpec& spec = prob.cones;

    ConeSolution sol;
    if (prob.G.rows() != m || prob.G.cols() != n || prob.A.cols() != n ||
        prob.A.rows() != p || prob.h.size() != m || prob.P.rows() != n) {
        sol.message = "dimension mismatch";
        return sol;
    }

    if (m == 0) {
        // pure equality-constrained QP
        Matrix kkt(n + p, n + p);
        kkt.topLeftCorner(n, n) = prob.P;
        kkt.topRightCorner(n, p) = prob.A.transpose();
        kkt.bottomLeftCorner(p, n) = prob.A;
        kkt.bottomRightCorner(p, p).setZero();
        Vector rhs(n + p);
        rhs.head(n) = -prob.q;
        rhs.tail(p) = prob.b;
        Vector xy = kkt.fullPivLu().solve(rhs);
        sol.x = xy.head(n);
        sol.y = xy.tail(p);
        sol.z.resize(0);
        sol.s.resize(0);
        sol.objective = 0.5 * sol.x.dot(prob.P * sol.x) + prob.q.dot(sol.x);
        sol.primalRes = p > 0 ? (prob.A * sol.x - prob.b).norm() /
                                    std::max(1.0, prob.b.norm())
                              : 0.0;
        sol.dualRes = (prob.P * sol.x + prob.q + prob.A.transpose() * sol.y).norm() /
                      std::max(1.0, prob.q.norm());
        sol.status = (sol.primalRes < opts.acceptFeasTol && sol.dualRes < opts.acceptFeasTol)
                         ? SolveStatus::Optimal
                         : SolveStatus::SolverError;
        return sol;
    }

    KktSolver kktSolver{&prob, n, p, m, {}, {}};
    Scaling W;
    Vector lambda;

    // --- initialization: identity scaling ---
    {
        W.spec = &spec;
        W.wLin = Vector::Ones(spec.nLin);
        for (int d : spec.socDims) {
            W.wSoc.push_back(Matrix::Identity(d, d));
            W.wSocInv.push_back(Matrix::Identity(d, d));
        }
        kktSolver.factor(W);
    }
    Vector x, y, z, s;
    {
        Vector dx, dy, dz;
        kktSolver.solve(W, -prob.q, prob.b, -prob.h, dx, dy, dz);
        x = dx;
        y = dy;
        z = dz;
        s = -(prob.G * x - prob.h);  // = -z residual form => G x + s = h
        const Vector e = cone_identity(spec);
        double ts = outside_by(s, spec);
        if (ts > 0.0) s += (1.0 + ts) * e;
        double tz = outside_by(z, spec);
        if (tz > 0.0) z += (1.0 + tz) * e;
        // keep strictly inside
        if (outside_by(s, spec) >= 0.0 && s.head(spec.nLin).minCoeff() <= 0.0)
            s += e;
        if (outside_by(z, spec) >= 0.0 && spec.nLin > 0 && z.head(spec.nLin).minCoeff() <= 0.0)
            z += e;
    }

    const double deg = static_cast<double>(spec.degree());
    const Vector e = cone_identity(spec);

    double bestScore = std::numeric_limits<double>::infinity();
    ConeSolution best;
    best.status = SolveStatus::SolverError;
    best.message = "did not converge";

    for (int iter = 0; iter <= opts.maxIters; ++iter) {
        const Vector Px = prob.P * x;
        Vector rx = Px + prob.q + prob.A.transpose() * y + prob.G.transpose() * z;
        Vector ry = prob.A * x - prob.b;
        Vector rz = prob.G * x + s - prob.h;
        double gap = s.dot(z);
        double pcost = 0.5 * x.dot(Px) + prob.q.dot(x);
        // residuals are measured relative to the largest term entering them,
        // so purely quadratic objectives with large solutions are not held to
        // an absolute scale
        const double dScale =
            std::max({1.0, prob.q.norm(), Px.norm(),
                      (prob.A.transpose() * y).norm(), (prob.G.transpose() * z).norm()});
        const double pScaleY = std::max({1.0, prob.b.norm(), (prob.A * x).norm()});
        const double pScaleZ =
            std::max({1.0, prob.h.norm(), (prob.G * x).norm(), s.norm()});
        double pres = std::max(ry.norm() / pScaleY, rz.norm() / pScaleZ);
        double dres = rx.norm() / dScale;
        double relgap = gap / std::max(1.0, std::abs(pcost));

        double score = std::max({pres, dres, relgap});
        if (score < bestScore) {
            bestScore = score;
            best.x = x;
            best.y = y;
            best.z = z;
            best.s = s;
            best.objective = pcost;
            best.gap = gap;
            best.relGap = relgap;
            best.primalRes = pres;
            best.dualRes = dres;
            best.iterations = iter;
        }

        if (pres <= opts.feasTol && dres <= opts.feasTol &&
            (gap <= opts.absTol || relgap <= opts.relTol))
            break;
        if (iter == opts.maxIters) break;

        if (!compute_scaling(s, z, spec, W, lambda)) break;
        kktSolver.factor(W);

        double mu = gap / deg;

        // affine direction
        Vector da = jprod(lambda, lambda, spec);
        Vector bz_a = -rz + W.apply(jdiv(lambda, da, spec));
        Vector dxa, dya, dza;
        kktSolver.solve(W, -rx, -ry, bz_a, dxa, dya, dza);
        Vector dsa = -W.apply(jdiv(lambda, da, spec)) - W.applySquared(dza);

        double aS = max_step(s, dsa, spec);
        double aZ = max_step(z, dza, spec);
        double alphaAff = std::min({1.0, aS, aZ});
        double muAff = (s + alphaAff * dsa).dot(z + alphaAff * dza) / deg;
        double sigma = std::pow(std::max(0.0, muAff / mu), 3.0);

        // combined direction with Mehrotra correction in scaled space
        Vector corr = jprod(W.applyInv(dsa), W.apply(dza), spec);
        Vector dc = da + corr - sigma * mu * e;
        Vector bz_c = -rz + W.apply(jdiv(lambda, dc, spec));
        Vector dx, dy, dz;
        kktSolver.solve(W, -rx, -ry, bz_c, dx, dy, dz);
        Vector ds = -W.apply(jdiv(lambda, dc, spec)) - W.applySquared(dz);

        double step = std::min({1.0, kStepFrac * max_step(s, ds, spec),
                                kStepFrac * max_step(z, dz, spec)});
        if (!std::isfinite(step) || step <= 0.0) break;

        x += step * dx;
        y += step * dy;
        z += step * dz;
        s += step * ds;
        if (!x.allFinite() || !s.allFinite() || !z.allFinite()) break;
    }

    sol = best;
    bool accept = sol.primalRes <= opts.acceptFeasTol &&
                  sol.dualRes <= opts.acceptFeasTol &&
                  (sol.gap <= 1e-6 || sol.relGap <= 1e-6);
    sol.status = accept ? SolveStatus::Optimal : SolveStatus::SolverError;
    if (accept) sol.message = "optimal";
    return sol;
}

}  // namespace dsmpc
