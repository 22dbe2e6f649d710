#pragma once

// Per-session cost models for the three alternatives: the charging-flexibility
// QP, closed-form asap and leave costs, and the inverse-proportional overstay
// expectation, assembled into the cost vector h(z, x).

#include <cmath>
#include <sstream>

#include "evstation/behavior.hpp"
#include "evstation/qp.hpp"

namespace evstation {

/// Time-of-use tariff over the operating hours, one price per step.
struct TouTariff {
    double step_hours = 0.25;
    Vector prices;          // $/kWh per step
    double day_start = 7.0; // clock hours
    double day_end = 22.0;

    Eigen::Index steps() const { return prices.size(); }

    void validate() const {
        if (step_hours <= 0.0) throw ArgumentError("tariff: step_hours must be positive");
        if (prices.size() == 0 || prices.minCoeff() < 0.0)
            throw ArgumentError("tariff: prices must be nonnegative and non-empty");
        const double expected = (day_end - day_start) / step_hours;
        if (std::abs(expected - static_cast<double>(prices.size())) > 1e-9)
            throw ArgumentError("tariff: price count does not cover the operating hours");
    }

    Eigen::Index step_of_time(double clock_hours) const {
        const auto k = static_cast<Eigen::Index>(std::floor((clock_hours - day_start) / step_hours));
        return std::clamp<Eigen::Index>(k, 0, steps() - 1);
    }
};

/// One driver request as seen by the controller.
struct ChargingSession {
    Eigen::Index arrival_step = 0;
    Eigen::Index horizon_steps = 1; // N; parking duration = N * step_hours
    double soc_init = 0.0;
    double soc_need = 0.0;
    double battery_capacity = 24.0; // kWh
    double efficiency = 1.0;        // eta in (0, 1]
    double p_min = 0.0;             // kW
    double p_max = 7.2;             // kW
    double u_nom = 7.2;             // kW

    void validate() const {
        if (soc_init < 0.0 || soc_init > soc_need || soc_need > 1.0)
            throw ArgumentError("session: require 0 <= soc_init <= soc_need <= 1");
        if (horizon_steps < 1) throw ArgumentError("session: horizon_steps must be >= 1");
        if (efficiency <= 0.0 || efficiency > 1.0)
            throw ArgumentError("session: efficiency must be in (0, 1]");
        if (p_min > p_max) throw ArgumentError("session: p_min > p_max");
        if (u_nom <= 0.0 || u_nom > p_max) throw ArgumentError("session: require 0 < u_nom <= p_max");
        if (battery_capacity <= 0.0) throw ArgumentError("session: battery_capacity must be positive");
    }
};

/// Sessions reaching past the end of operating hours are cut at day_end.
inline Eigen::Index effective_horizon(const ChargingSession& s, const TouTariff& tariff) {
    return std::min(s.horizon_steps, tariff.steps() - s.arrival_step);
}

struct OverstayModel {
    double lambda_hat = 1.0; // baseline expected overstay, hours
    double y_hat = 3.0;      // baseline penalty, $/hour

    void validate() const {
        if (lambda_hat < 0.0 || y_hat <= 0.0)
            throw ArgumentError("overstay model: require lambda_hat >= 0 and y_hat > 0");
    }
};

/// Expected overstay duration under penalty y: scales inversely with y
/// around the baseline point (y_hat, lambda_hat).
inline double expected_overstay(const OverstayModel& model, double y) {
    model.validate();
    if (y <= 0.0) throw ArgumentError("expected_overstay: y must be positive");
    return model.lambda_hat * model.y_hat / y;
}

/// QP data for the flex alternative. Decision vector
/// x = [SOC_0 .. SOC_N, u_0 .. u_{N-1}], dimension 2N+1.
struct FlexQpData {
    Matrix H; // quadratic term (1/2 x^T H x form)
    Vector f; // linear term
    Matrix A;
    Vector b;
    Matrix C;
    Vector d;
    Eigen::Index n_steps = 0; // effective N

    double objective(const Vector& x) const {
        return 0.5 * x.dot(H * x) + f.dot(x);
    }
};

inline FlexQpData build_flex_qp(const ChargingSession& session, const TouTariff& tariff,
                                double z_flex, double lambda_u) {
    session.validate();
    tariff.validate();
    if (session.arrival_step < 0 || session.arrival_step >= tariff.steps())
        throw ArgumentError("session arrival_step outside the tariff grid");
    const Eigen::Index N = effective_horizon(session, tariff);
    const double dk = tariff.step_hours;
    const double rate = dk * session.efficiency / session.battery_capacity; // SOC per kW

    const double reachable = session.soc_init + static_cast<double>(N) * rate * session.p_max;
    if (reachable < session.soc_need - 1e-12) {
        std::ostringstream msg;
        msg << "flex QP infeasible: max reachable SOC " << reachable << " < soc_need "
            << session.soc_need << " over " << N << " steps";
        throw InfeasibleError(msg.str());
    }

    const Eigen::Index n = 2 * N + 1;
    FlexQpData qp;
    qp.n_steps = N;
    qp.H = Matrix::Zero(n, n);
    qp.f = Vector::Zero(n);
    for (Eigen::Index k = 0; k < N; ++k) {
        qp.H(N + 1 + k, N + 1 + k) = 2.0 * lambda_u;
        qp.f[N + 1 + k] = (tariff.prices[session.arrival_step + k] - z_flex) * dk;
    }

    // Initial condition plus one dynamics row per step.
    qp.C = Matrix::Zero(N + 1, n);
    qp.d = Vector::Zero(N + 1);
    qp.C(0, 0) = 1.0;
    qp.d[0] = session.soc_init;
    for (Eigen::Index k = 0; k < N; ++k) {
        qp.C(k + 1, k) = -1.0;
        qp.C(k + 1, k + 1) = 1.0;
        qp.C(k + 1, N + 1 + k) = -rate;
    }

    // SOC_k <= 1 (all k), -SOC_N <= -soc_need, u_k <= p_max, -u_k <= -p_min.
    const Eigen::Index m = (N + 1) + 1 + 2 * N;
    qp.A = Matrix::Zero(m, n);
    qp.b = Vector::Zero(m);
    for (Eigen::Index k = 0; k <= N; ++k) {
        qp.A(k, k) = 1.0;
        qp.b[k] = 1.0;
    }
    qp.A(N + 1, N) = -1.0;
    qp.b[N + 1] = -session.soc_need;
    for (Eigen::Index k = 0; k < N; ++k) {
        qp.A(N + 2 + k, N + 1 + k) = 1.0;
        qp.b[N + 2 + k] = session.p_max;
        qp.A(N + 2 + N + k, N + 1 + k) = -1.0;
        qp.b[N + 2 + N + k] = -session.p_min;
    }
    return qp;
}

/// Feasible "nominal-power until the target is met" profile, used as the QP
/// warm start and as the BCD initial x.
inline Vector initial_flex_profile(const ChargingSession& session, const TouTariff& tariff) {
    const Eigen::Index N = effective_horizon(session, tariff);
    const double dk = tariff.step_hours;
    const double rate = dk * session.efficiency / session.battery_capacity;
    Vector x = Vector::Zero(2 * N + 1);
    double soc = session.soc_init;
    x[0] = soc;
    for (Eigen::Index k = 0; k < N; ++k) {
        double u = 0.0;
        if (soc < session.soc_need - 1e-15) {
            u = std::min(session.p_max, (session.soc_need - soc) / rate);
        }
        u = std::clamp(u, session.p_min, session.p_max);
        soc += rate * u;
        x[N + 1 + k] = u;
        x[k + 1] = soc;
    }
    return x;
}

struct FlexSolution {
    double cost = 0.0;
    Vector x;
};

inline FlexSolution flex_cost(const ChargingSession& session, const TouTariff& tariff,
                              double z_flex, double lambda_u, QpSettings qp_settings = {}) {
    FlexQpData qp = build_flex_qp(session, tariff, z_flex, lambda_u);
    if (qp_settings.x0.size() == 0) qp_settings.x0 = initial_flex_profile(session, tariff);
    const QpResult res = qp_solve(qp.H, qp.f, qp.A, qp.b, qp.C, qp.d, qp_settings);
    return FlexSolution{qp.objective(res.x), res.x};
}

/// Steps of nominal-power charging needed to meet the energy target. A
/// partial step occupies the charger for a full step, hence the ceiling.
inline Eigen::Index energy_steps_needed(const ChargingSession& session, double step_hours) {
    session.validate();
    const double exact = (session.soc_need - session.soc_init) * session.battery_capacity /
                         (step_hours * session.efficiency * session.u_nom);
    return static_cast<Eigen::Index>(std::ceil(exact - 1e-9));
}

inline Eigen::Index asap_steps(const ChargingSession& session, const TouTariff& tariff) {
    const Eigen::Index n_hat = energy_steps_needed(session, tariff.step_hours);
    return std::min(n_hat, tariff.steps() - session.arrival_step);
}

inline double asap_cost(const ChargingSession& session, const TouTariff& tariff, double z_asap) {
    tariff.validate();
    const Eigen::Index n = asap_steps(session, tariff);
    double cost = 0.0;
    for (Eigen::Index k = 0; k < n; ++k)
        cost += (tariff.prices[session.arrival_step + k] - z_asap) * session.u_nom *
                tariff.step_hours;
    return cost;
}

/// Opportunity cost of a lost customer: the asap provisioning cost with zero
/// charging revenue.
inline double leave_cost(const ChargingSession& session, const TouTariff& tariff) {
    return asap_cost(session, tariff, 0.0);
}

struct CostVector {
    double h_flex = 0.0;
    double h_asap = 0.0;
    double h_leave = 0.0;

    Vector to_vector() const {
        Vector v(kNumAlternatives);
        v << h_flex, h_asap, h_leave;
        return v;
    }
};

inline CostVector assemble_cost_vector(const ChargingSession& session, const TouTariff& tariff,
                                       const IncentiveVector& z, const Vector& x,
                                       const OverstayModel& model, double lambda_u,
                                       double lambda_g) {
    const FlexQpData qp = build_flex_qp(session, tariff, z.z_flex, lambda_u);
    if (x.size() != qp.H.rows()) throw ArgumentError("assemble_cost_vector: x dimension mismatch");
    const double overstay = lambda_g * expected_overstay(model, z.y);
    CostVector h;
    h.h_flex = qp.objective(x) + overstay;
    h.h_asap = asap_cost(session, tariff, z.z_asap) + overstay;
    h.h_leave = leave_cost(session, tariff);
    return h;
}

} // namespace evstation
