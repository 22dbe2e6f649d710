#pragma once

// Three-block multi-convex reformulation of the expected-cost pricing problem
// and its Block Coordinate Descent solver. Blocks:
//   x  flex charging profile (convex QP),
//   z  incentive vector over a box (projected gradient on a smooth convex
//      objective),
//   v  choice distribution over the simplex (closed-form softmax).
// The monitored objective is F(z,x,v) = v^T h(z,x) + mu * fy_gap(theta z, v);
// each block update is a descent step on F, so the trace is non-increasing
// for fixed mu.

#include <vector>

#include "evstation/behavior.hpp"
#include "evstation/station.hpp"

namespace evstation {

struct SolveConfig {
    double mu = 10.0;        // Fenchel-Young penalty weight
    double epsilon = 1e-3;   // required Fenchel-Young gap at convergence
    double stop_tol = 1e-5;  // |F(i+1) - F(i)| threshold
    int max_iters = 200;     // sweeps per mu phase
    double mu_growth = 2.0;  // mu multiplier per restart; restarts drive the
    int max_restarts = 6;    // gap below epsilon when a fixed mu is too loose
    IncentiveBounds bounds;
    IncentiveVector z0{0.45, 0.45, 3.0};
    double lambda_u = 1e-2;
    double lambda_g = 1.0;
    QpSettings qp;
    double pg_tol = 1e-7;    // projected-gradient residual for the z block
    int pg_max_iters = 2000;

    void validate() const {
        if (mu <= 0.0 || epsilon <= 0.0 || stop_tol <= 0.0)
            throw ArgumentError("solve config: mu, epsilon, stop_tol must be positive");
        if (max_iters < 1) throw ArgumentError("solve config: max_iters must be >= 1");
        if (bounds.y_lo <= 0.0) throw ArgumentError("solve config: y_lo must be positive");
    }
};

struct TracePoint {
    double mu = 0.0;
    double objective = 0.0; // penalized F
};

struct SolveResult {
    IncentiveVector z_star;
    Vector x_star;
    Vector v_star;
    double objective = 0.0; // v^T h(z*, x*)
    double fy_gap = 0.0;
    Vector model_probs; // softmax(theta_eff z*)
    std::vector<TracePoint> trace;
    bool converged = false;
    int iterations = 0;
};

class PricingProblem {
public:
    PricingProblem(const ChargingSession& session, const TouTariff& tariff,
                   const DcmParams& params, const ExogenousFeatures& features,
                   const OverstayModel& overstay, const SolveConfig& config)
        : session_(session), tariff_(tariff), overstay_(overstay), config_(config) {
        config_.validate();
        features.validate();
        overstay_.validate();
        theta_eff_ = params.effective_theta(features);
        qp_ = build_flex_qp(session_, tariff_, 0.0, config_.lambda_u);
        const Eigen::Index N = qp_.n_steps;
        step_cost_ = Vector(N);
        for (Eigen::Index k = 0; k < N; ++k)
            step_cost_[k] = tariff_.prices[session_.arrival_step + k];
        n_asap_ = asap_steps(session_, tariff_);
        asap_energy_ = static_cast<double>(n_asap_) * session_.u_nom * tariff_.step_hours;
        h_leave_ = leave_cost(session_, tariff_);
    }

    const Matrix& theta_eff() const { return theta_eff_; }
    Eigen::Index flex_steps() const { return qp_.n_steps; }

    Vector initial_x() const { return initial_flex_profile(session_, tariff_); }

    Vector cost_vector(const IncentiveVector& z, const Vector& x) const {
        const double over = config_.lambda_g * expected_overstay(overstay_, z.y);
        Vector h(kNumAlternatives);
        h[0] = flex_objective(z.z_flex, x) + over;
        h[1] = h_leave_ - z.z_asap * asap_energy_ + over;
        h[2] = h_leave_;
        return h;
    }

    /// argmin_x v_flex * h_flex(z, x) over the flex feasible set. Constant in
    /// x when v_flex = 0, in which case the previous iterate is kept.
    Vector x_update(const IncentiveVector& z, const Vector& v, const Vector& x_prev) const {
        if (v[0] <= 1e-14) return x_prev;
        Vector f = qp_.f;
        const Eigen::Index N = qp_.n_steps;
        for (Eigen::Index k = 0; k < N; ++k)
            f[N + 1 + k] = (step_cost_[k] - z.z_flex) * tariff_.step_hours;
        QpSettings qs = config_.qp;
        qs.x0 = x_prev;
        return qp_solve(qp_.H, f, qp_.A, qp_.b, qp_.C, qp_.d, qs).x;
    }

    /// Minimizes phi(z) = v^T h(z, x) + mu (lse(theta z) - v^T theta z) over
    /// the incentive box with the constant coordinate pinned. Projected
    /// gradient with Armijo backtracking.
    IncentiveVector z_update(IncentiveVector z, const Vector& x, const Vector& v,
                             double mu) const {
        z = config_.bounds.clamp(z);
        double phi = z_objective(z, x, v, mu);
        double t = 1.0;
        for (int it = 0; it < config_.pg_max_iters; ++it) {
            const Vector g = z_gradient(z, x, v, mu);
            const IncentiveVector stat = project(z, g, 1.0);
            const double residual = std::max({std::abs(stat.z_flex - z.z_flex),
                                              std::abs(stat.z_asap - z.z_asap),
                                              std::abs(stat.y - z.y)});
            if (residual <= config_.pg_tol) return z;
            while (true) {
                const IncentiveVector zn = project(z, g, t);
                const Vector dz = zn.to_vector() - z.to_vector();
                const double phin = z_objective(zn, x, v, mu);
                if (phin <= phi + g.dot(dz.head(3)) + dz.squaredNorm() / (2.0 * t) + 1e-15) {
                    z = zn;
                    phi = phin;
                    t *= 2.0;
                    break;
                }
                t *= 0.5;
                if (t < 1e-18) return z; // step underflow: at numerical stationarity
            }
        }
        // Iteration cap on an ill-conditioned instance: every accepted step
        // decreased the objective, so the iterate is still a valid descent
        // point for the outer sweep.
        return z;
    }

    /// Closed-form v block: stationarity of v^T h + mu (lse*(v) - v^T theta z)
    /// over the simplex gives v = softmax(theta z - h / mu).
    Vector v_update(const IncentiveVector& z, const Vector& x, double mu) const {
        const Vector h = cost_vector(z, x);
        return softmax(theta_eff_ * z.to_vector() - h / mu);
    }

    double penalized_objective(const IncentiveVector& z, const Vector& x, const Vector& v,
                               double mu) const {
        const Vector h = cost_vector(z, x);
        return v.dot(h) + mu * fenchel_young_gap(theta_eff_ * z.to_vector(), v);
    }

    SolveResult solve() const {
        double mu = config_.mu;
        IncentiveVector z = config_.bounds.clamp(config_.z0);
        Vector x = initial_x();
        Vector v = softmax(theta_eff_ * z.to_vector());
        double F = penalized_objective(z, x, v, mu);

        SolveResult result;
        result.trace.push_back({mu, F});
        bool inner_converged = false;
        for (int restart = 0; restart <= config_.max_restarts; ++restart) {
            inner_converged = false;
            for (int it = 0; it < config_.max_iters; ++it) {
                x = x_update(z, v, x);
                z = z_update(z, x, v, mu);
                v = v_update(z, x, mu);
                const double F_new = penalized_objective(z, x, v, mu);
                result.trace.push_back({mu, F_new});
                ++result.iterations;
                const bool done = std::abs(F_new - F) <= config_.stop_tol;
                F = F_new;
                if (done) {
                    inner_converged = true;
                    break;
                }
            }
            const double gap = fenchel_young_gap(theta_eff_ * z.to_vector(), v);
            if (!inner_converged || gap <= config_.epsilon) break;
            mu *= config_.mu_growth;
            F = penalized_objective(z, x, v, mu);
            result.trace.push_back({mu, F});
        }

        result.z_star = z;
        result.x_star = x;
        result.v_star = v;
        const Vector h = cost_vector(z, x);
        result.objective = v.dot(h);
        result.fy_gap = fenchel_young_gap(theta_eff_ * z.to_vector(), v);
        result.model_probs = softmax(theta_eff_ * z.to_vector());
        result.converged = inner_converged && result.fy_gap <= config_.epsilon;
        return result;
    }

private:
    double flex_objective(double z_flex, const Vector& x) const {
        const Eigen::Index N = qp_.n_steps;
        double cost = 0.0;
        for (Eigen::Index k = 0; k < N; ++k) {
            const double u = x[N + 1 + k];
            cost += u * (step_cost_[k] - z_flex) * tariff_.step_hours +
                    config_.lambda_u * u * u;
        }
        return cost;
    }

    double z_objective(const IncentiveVector& z, const Vector& x, const Vector& v,
                       double mu) const {
        const Vector h = cost_vector(z, x);
        const Vector u = theta_eff_ * z.to_vector();
        return v.dot(h) + mu * (lse(u) - v.dot(u));
    }

    // Gradient of the z objective in the three free coordinates.
    Vector z_gradient(const IncentiveVector& z, const Vector& x, const Vector& v,
                      double mu) const {
        const Eigen::Index N = qp_.n_steps;
        double flex_energy = 0.0;
        for (Eigen::Index k = 0; k < N; ++k) flex_energy += x[N + 1 + k] * tariff_.step_hours;
        const double d_over = -config_.lambda_g * overstay_.lambda_hat * overstay_.y_hat /
                              (z.y * z.y);
        Vector g(3);
        g[0] = -v[0] * flex_energy;
        g[1] = -v[1] * asap_energy_;
        g[2] = (v[0] + v[1]) * d_over;
        const Vector zv = z.to_vector();
        const Vector penalty = theta_eff_.transpose() * (softmax(theta_eff_ * zv) - v);
        g += mu * penalty.head(3);
        return g;
    }

    IncentiveVector project(const IncentiveVector& z, const Vector& g, double t) const {
        return config_.bounds.clamp(
            IncentiveVector{z.z_flex - t * g[0], z.z_asap - t * g[1], z.y - t * g[2]});
    }

    ChargingSession session_;
    TouTariff tariff_;
    OverstayModel overstay_;
    SolveConfig config_;
    Matrix theta_eff_;
    FlexQpData qp_;
    Vector step_cost_;
    Eigen::Index n_asap_ = 0;
    double asap_energy_ = 0.0;
    double h_leave_ = 0.0;
};

inline SolveResult bcd_solve(const ChargingSession& session, const TouTariff& tariff,
                             const DcmParams& params, const ExogenousFeatures& features,
                             const OverstayModel& overstay, const SolveConfig& config) {
    return PricingProblem(session, tariff, params, features, overstay, config).solve();
}

} // namespace evstation
