#include <doctest.h>

#include "dsmpc/cone_solver.hpp"

#include <cmath>
#include <random>

using namespace dsmpc;

namespace {

Matrix random_matrix(std::mt19937_64& rng, int r, int c) {
    std::normal_distribution<double> nd;
    Matrix M(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) M(i, j) = nd(rng);
    return M;
}

Vector random_vector(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> nd;
    Vector v(n);
    for (int i = 0; i < n; ++i) v(i) = nd(rng);
    return v;
}

// distance of z to the dual cone (= the cone itself, self-dual)
double cone_violation(const Vector& z, const ConeSpec& cones) {
    double v = 0.0;
    for (int i = 0; i < cones.nLin; ++i) v = std::max(v, -z(i));
    int off = cones.nLin;
    for (int d : cones.socDims) {
        v = std::max(v, z.segment(off + 1, d - 1).norm() - z(off));
        off += d;
    }
    return v;
}

// first-order optimality residuals, evaluated independently of the solver
void check_kkt(const ConeProblem& p, const ConeSolution& sol, double tol) {
    const double scale = std::max(1.0, p.q.norm());
    Vector dual = p.P * sol.x + p.q + p.G.transpose() * sol.z;
    if (p.A.rows() > 0) dual += p.A.transpose() * sol.y;
    CHECK(dual.norm() <= tol * scale);
    if (p.A.rows() > 0) CHECK((p.A * sol.x - p.b).norm() <= tol * std::max(1.0, p.b.norm()));
    CHECK((p.G * sol.x + sol.s - p.h).norm() <= tol * std::max(1.0, p.h.norm()));
    CHECK(cone_violation(sol.s, p.cones) <= tol);
    CHECK(cone_violation(sol.z, p.cones) <= tol);
    CHECK(std::abs(sol.s.dot(sol.z)) <= 100 * tol * scale);
}

}  // namespace

TEST_CASE("equality-constrained QP matches the direct KKT solve") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 6);
        const int m = 1 + static_cast<int>(rng() % n);
        Matrix L = random_matrix(rng, n, n);
        ConeProblem p;
        p.P = L * L.transpose() + Matrix::Identity(n, n);
        p.q = random_vector(rng, n);
        p.A = random_matrix(rng, m, n);
        p.b = random_vector(rng, m);
        p.G = Matrix::Zero(0, n);
        p.h = Vector::Zero(0);

        ConeSolution sol = solve_cone_qp(p);
        REQUIRE(sol.status == SolveStatus::Optimal);

        Matrix KKT(n + m, n + m);
        KKT.setZero();
        KKT.topLeftCorner(n, n) = p.P;
        KKT.topRightCorner(n, m) = p.A.transpose();
        KKT.bottomLeftCorner(m, n) = p.A;
        Vector rhs(n + m);
        rhs.head(n) = -p.q;
        rhs.tail(m) = p.b;
        Vector ref = KKT.fullPivLu().solve(rhs);
        CHECK((sol.x - ref.head(n)).norm() <= 1e-7 * std::max(1.0, ref.head(n).norm()));
    }
}

TEST_CASE("box LP has the sign solution") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 8);
        ConeProblem p;
        p.P = Matrix::Zero(n, n);
        p.q = random_vector(rng, n);
        for (int i = 0; i < n; ++i)
            if (std::abs(p.q(i)) < 0.1) p.q(i) = 0.5;  // keep the solution strict
        p.A = Matrix::Zero(0, n);
        p.b = Vector::Zero(0);
        p.G.resize(2 * n, n);
        p.G.topRows(n) = Matrix::Identity(n, n);
        p.G.bottomRows(n) = -Matrix::Identity(n, n);
        p.h = Vector::Ones(2 * n);
        p.cones.nLin = 2 * n;

        ConeSolution sol = solve_cone_qp(p);
        REQUIRE(sol.status == SolveStatus::Optimal);
        for (int i = 0; i < n; ++i)
            CHECK(sol.x(i) == doctest::Approx(p.q(i) > 0 ? -1.0 : 1.0).epsilon(1e-6));
        CHECK(sol.objective == doctest::Approx(-p.q.cwiseAbs().sum()).epsilon(1e-7));
    }
}

TEST_CASE("projection onto a second-order cone") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 3 + static_cast<int>(rng() % 4);
        Vector v = 3.0 * random_vector(rng, n);

        ConeProblem p;
        p.P = Matrix::Identity(n, n);
        p.q = -v;
        p.A = Matrix::Zero(0, n);
        p.b = Vector::Zero(0);
        p.G = -Matrix::Identity(n, n);
        p.h = Vector::Zero(n);
        p.cones.socDims = {n};

        ConeSolution sol = solve_cone_qp(p);
        REQUIRE(sol.status == SolveStatus::Optimal);

        // analytic projection
        const double t = v(0);
        const double u = v.tail(n - 1).norm();
        Vector proj(n);
        if (u <= t) {
            proj = v;
        } else if (u <= -t) {
            proj.setZero();
        } else {
            const double a = 0.5 * (t + u);
            proj(0) = a;
            proj.tail(n - 1) = (a / u) * v.tail(n - 1);
        }
        CHECK((sol.x - proj).norm() <= 1e-6 * std::max(1.0, proj.norm()));
    }
}

TEST_CASE("random mixed-cone QPs satisfy independent KKT checks") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 3 + static_cast<int>(rng() % 8);
        const int nLin = 2 + static_cast<int>(rng() % 6);
        const int nSoc = static_cast<int>(rng() % 3);
        const int mEq = static_cast<int>(rng() % 3);

        ConeProblem p;
        Matrix L = random_matrix(rng, n, n);
        p.P = L * L.transpose() + 0.1 * Matrix::Identity(n, n);
        p.q = random_vector(rng, n);
        p.cones.nLin = nLin;
        for (int k = 0; k < nSoc; ++k) p.cones.socDims.push_back(3);
        const int m = p.cones.totalDim();
        p.G = random_matrix(rng, m, n);

        // build h so that a known point is strictly feasible
        Vector x0 = random_vector(rng, n);
        Vector slack(m);
        for (int i = 0; i < nLin; ++i) slack(i) = 0.5 + std::abs(random_vector(rng, 1)(0));
        int off = nLin;
        for (int k = 0; k < nSoc; ++k) {
            Vector u = random_vector(rng, 2);
            slack(off) = u.norm() + 1.0;
            slack.segment(off + 1, 2) = u;
            off += 3;
        }
        p.h = p.G * x0 + slack;
        p.A = random_matrix(rng, mEq, n);
        p.b = mEq > 0 ? Vector(p.A * x0) : Vector::Zero(0);

        ConeSolution sol = solve_cone_qp(p);
        REQUIRE(sol.status == SolveStatus::Optimal);
        check_kkt(p, sol, 1e-6);
    }
}

TEST_CASE("tolerances and diagnostics are reported") {
    ConeProblem p;
    p.P = Matrix{{2.0}};
    p.q = Vector{{-2.0}};
    p.A = Matrix::Zero(0, 1);
    p.b = Vector::Zero(0);
    p.G = Matrix{{1.0}};
    p.h = Vector{{0.5}};
    p.cones.nLin = 1;
    ConeSolution sol = solve_cone_qp(p);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.x(0) == doctest::Approx(0.5).epsilon(1e-7));
    CHECK(sol.objective == doctest::Approx(2.0 * 0.25 * 0.5 - 1.0).epsilon(1e-7));
    CHECK(sol.iterations > 0);
    CHECK(sol.primalRes <= 1e-7);
    CHECK(sol.dualRes <= 1e-7);
}
