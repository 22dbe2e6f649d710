#pragma once

// Small dense convex QP solver:
//   min 1/2 x^T H x + f^T x   s.t.  A x <= b,  C x = d
// Primal active-set method. H must be PSD with a positive-definite reduced
// Hessian on the active constraint null space (true for the flex charging
// QP, where the SOC coordinates are pinned by the dynamics equalities).

#include <algorithm>
#include <sstream>
#include <vector>

#include "evstation/common.hpp"

namespace evstation {

struct QpSettings {
    double tol = 1e-9;       // KKT residual tolerance
    int max_iters = 1000;    // active-set changes
    Vector x0;               // optional feasible start (size 0 = absent)
};

struct QpResult {
    Vector x;
    Vector mu_ineq;  // multipliers for A x <= b, zero where inactive
    Vector nu_eq;    // multipliers for C x = d
    int iterations = 0;
    double stationarity = 0.0;
    double primal_violation = 0.0;
    double complementarity = 0.0;
};

namespace detail {

inline bool qp_feasible(const Vector& x, const Matrix& A, const Vector& b,
                        const Matrix& C, const Vector& d, double tol) {
    if (C.rows() > 0 && (C * x - d).cwiseAbs().maxCoeff() > tol) return false;
    if (A.rows() > 0 && (A * x - b).maxCoeff() > tol) return false;
    return true;
}

/// Alternating projection onto the equality affine set and violated
/// halfspaces. Adequate for the tiny problems this solver targets.
inline Vector qp_phase1(const Matrix& A, const Vector& b, const Matrix& C,
                        const Vector& d, Eigen::Index n, double tol) {
    Vector x = Vector::Zero(n);
    Matrix proj = Matrix::Identity(n, n);
    if (C.rows() > 0) {
        auto cod = C.completeOrthogonalDecomposition();
        x = cod.solve(d);
        if ((C * x - d).cwiseAbs().maxCoeff() > tol * (1.0 + d.cwiseAbs().maxCoeff()))
            throw InfeasibleError("qp_solve: equality system C x = d is inconsistent");
        proj -= cod.pseudoInverse() * C;
    }
    if (A.rows() == 0) return x;
    const int cap = 500 * static_cast<int>(A.rows() + 1);
    for (int it = 0; it < cap; ++it) {
        Eigen::Index worst = 0;
        const double viol = (A * x - b).maxCoeff(&worst);
        if (viol <= tol) return x;
        const Vector dir = proj * A.row(worst).transpose();
        const double denom = A.row(worst).dot(dir);
        if (denom <= 1e-14)
            throw InfeasibleError("qp_solve: inequality row " + std::to_string(worst) +
                                  " incompatible with the equality constraints");
        x -= ((viol + 1e-12) / denom) * dir;
    }
    std::ostringstream msg;
    msg << "qp_solve: phase-1 did not reach feasibility, max violation "
        << (A * x - b).maxCoeff();
    throw InfeasibleError(msg.str());
}

} // namespace detail

inline QpResult qp_solve(const Matrix& H, const Vector& f, const Matrix& A,
                         const Vector& b, const Matrix& C, const Vector& d,
                         const QpSettings& settings = {}) {
    const Eigen::Index n = H.rows();
    if (H.cols() != n || f.size() != n) throw ArgumentError("qp_solve: H/f dimension mismatch");
    if (A.rows() != b.size() || (A.rows() > 0 && A.cols() != n))
        throw ArgumentError("qp_solve: A/b dimension mismatch");
    if (C.rows() != d.size() || (C.rows() > 0 && C.cols() != n))
        throw ArgumentError("qp_solve: C/d dimension mismatch");

    const double feas_tol = std::max(settings.tol, 1e-10);
    Vector x;
    if (settings.x0.size() == n && detail::qp_feasible(settings.x0, A, b, C, d, feas_tol)) {
        x = settings.x0;
    } else {
        x = detail::qp_phase1(A, b, C, d, n, feas_tol);
    }

    const Eigen::Index me = C.rows();
    const Eigen::Index mi = A.rows();
    std::vector<Eigen::Index> active;
    // Start with the working set empty; constraints join as they block steps.

    Vector mu = Vector::Zero(mi);
    Vector nu = Vector::Zero(me);
    int iter = 0;
    for (; iter < settings.max_iters; ++iter) {
        const Eigen::Index mw = static_cast<Eigen::Index>(active.size());
        const Eigen::Index dim = n + me + mw;
        Matrix kkt = Matrix::Zero(dim, dim);
        kkt.topLeftCorner(n, n) = H;
        if (me > 0) {
            kkt.block(n, 0, me, n) = C;
            kkt.block(0, n, n, me) = C.transpose();
        }
        for (Eigen::Index j = 0; j < mw; ++j) {
            kkt.block(n + me + j, 0, 1, n) = A.row(active[j]);
            kkt.block(0, n + me + j, n, 1) = A.row(active[j]).transpose();
        }
        Vector rhs = Vector::Zero(dim);
        const Vector grad = H * x + f;
        rhs.head(n) = -grad;

        Eigen::FullPivLU<Matrix> lu(kkt);
        const Vector sol = lu.solve(rhs);
        if ((kkt * sol - rhs).cwiseAbs().maxCoeff() >
            1e-7 * (1.0 + rhs.cwiseAbs().maxCoeff()))
            throw ConvergenceError("qp_solve: singular KKT system (degenerate problem)");
        const Vector p = sol.head(n);

        if (p.cwiseAbs().maxCoeff() <= 1e-11 * (1.0 + x.cwiseAbs().maxCoeff())) {
            nu = sol.segment(n, me);
            mu.setZero();
            double most_negative = -feas_tol;
            Eigen::Index drop = -1;
            for (Eigen::Index j = 0; j < mw; ++j) {
                mu[active[j]] = sol[n + me + j];
                if (sol[n + me + j] < most_negative) {
                    most_negative = sol[n + me + j];
                    drop = j;
                }
            }
            if (drop < 0) break; // KKT satisfied
            active.erase(active.begin() + drop);
            continue;
        }

        double alpha = 1.0;
        Eigen::Index blocking = -1;
        for (Eigen::Index i = 0; i < mi; ++i) {
            if (std::find(active.begin(), active.end(), i) != active.end()) continue;
            const double s = A.row(i).dot(p);
            if (s <= 1e-12) continue;
            const double t = (b[i] - A.row(i).dot(x)) / s;
            if (t < alpha) {
                alpha = std::max(t, 0.0);
                blocking = i;
            }
        }
        x += alpha * p;
        if (blocking >= 0) active.push_back(blocking);
    }
    if (iter >= settings.max_iters) {
        std::ostringstream msg;
        msg << "qp_solve: active-set iteration cap reached, |grad|="
            << (H * x + f).cwiseAbs().maxCoeff();
        throw ConvergenceError(msg.str());
    }

    QpResult res;
    res.x = x;
    res.mu_ineq = mu;
    res.nu_eq = nu;
    res.iterations = iter + 1;
    Vector stat = H * x + f;
    if (me > 0) stat += C.transpose() * nu;
    if (mi > 0) stat += A.transpose() * mu;
    res.stationarity = stat.cwiseAbs().maxCoeff();
    double pv = 0.0;
    if (me > 0) pv = (C * x - d).cwiseAbs().maxCoeff();
    if (mi > 0) pv = std::max(pv, std::max(0.0, (A * x - b).maxCoeff()));
    res.primal_violation = pv;
    double cs = 0.0;
    for (Eigen::Index i = 0; i < mi; ++i)
        cs = std::max(cs, std::abs(mu[i] * (A.row(i).dot(x) - b[i])));
    res.complementarity = cs;

    const double scale = 1.0 + f.cwiseAbs().maxCoeff();
    if (res.stationarity > settings.tol * scale ||
        res.primal_violation > settings.tol * scale ||
        res.complementarity > settings.tol * scale) {
        std::ostringstream msg;
        msg << "qp_solve: KKT residuals above tolerance (stat=" << res.stationarity
            << ", primal=" << res.primal_violation << ", compl=" << res.complementarity << ")";
        throw ConvergenceError(msg.str());
    }
    return res;
}

} // namespace evstation
