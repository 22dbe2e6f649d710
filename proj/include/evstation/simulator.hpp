#pragma once

// Agent-based discrete-event simulation of a multi-pole charging station:
// arrivals resampled from an empirical event pool, per-arrival pricing via
// the BCD controller (or a fixed-price baseline), sampled driver choices and
// overstay, and profit / overstay / quality-of-service accounting. Paired
// Monte Carlo and pole-count sensitivity studies sit on top.

#include <optional>
#include <vector>

#include "evstation/solver.hpp"

namespace evstation {

struct EventRecord {
    double arrival_time = 0.0;      // clock hours
    double parking_duration = 0.0;  // hours
    double energy_requested = 0.0;  // kWh
    double battery_capacity = 24.0; // kWh
};

struct EmpiricalDemand {
    std::vector<EventRecord> pool;
    double daily_mean = 0.0;             // mean arrivals per day
    double arrival_jitter = 0.25;        // hours (sigma)
    double duration_jitter = 10.0 / 60.0;

    void validate() const {
        if (pool.empty()) throw ArgumentError("demand: event pool is empty");
        if (daily_mean < 0.0) throw ArgumentError("demand: daily_mean must be >= 0");
    }

    double mean_parking_duration() const {
        double s = 0.0;
        for (const auto& e : pool) s += e.parking_duration;
        return s / static_cast<double>(pool.size());
    }

    double mean_energy() const {
        double s = 0.0;
        for (const auto& e : pool) s += e.energy_requested;
        return s / static_cast<double>(pool.size());
    }
};

struct StationConfig {
    int poles = 6;
    double p_max = 7.2;
    double u_nom = 7.2;
    double efficiency = 1.0;
    double default_soc_init = 0.2;
};

/// Controller model plus the model generating simulated choices. They are
/// identical unless a mismatch is injected for robustness experiments.
struct BehaviorModel {
    DcmParams controller;
    std::optional<DcmParams> actual; // empty: no mismatch
    OverstayModel overstay;
    IncentiveVector baseline{0.45, 0.45, 3.0};

    const DcmParams& actual_params() const { return actual ? *actual : controller; }
};

enum class OperationMode { controlled, baseline };

struct EpisodeMetrics {
    double net_profit = 0.0;
    double overstay_hours = 0.0;
    int services_fulfilled = 0;
    int arrivals = 0;
    int dropped = 0;
    int leaves = 0;
    int degraded = 0; // events priced at baseline after a solver failure
    // Per-step series over the tariff grid.
    std::vector<double> power;        // aggregate kW
    std::vector<double> occupancy;    // occupied poles
    std::vector<double> cum_overstay; // hours
    std::vector<double> cum_services;
    std::vector<double> cum_profit;   // $
};

/// Default coefficient matrix satisfying the qualitative behavior
/// constraints: asap preferred at baseline, flex preference rising as its
/// price discount grows, leave preference rising with prices and penalty,
/// flex preference rising with parking duration.
inline DcmParams default_dcm_params() {
    DcmParams p;
    p.theta = Matrix(kNumAlternatives, IncentiveVector::kDim);
    p.theta << -3.0, 1.5, -0.01, 0.0,
                1.0, -3.0, -0.03, 0.0,
                0.3, 0.3, 0.01, 0.0;
    p.gamma = Matrix::Zero(kNumAlternatives, ExogenousFeatures::kDim);
    p.gamma(0, 1) = 0.25; // flex utility grows with parking duration
    p.beta0 = Vector(kNumAlternatives);
    p.beta0 << 0.0, 1.8, -2.0;
    return p;
}

/// Checks the four qualitative constraints at the given baseline point.
inline bool dcm_bullets_hold(const DcmParams& params, const IncentiveVector& baseline,
                             const ExogenousFeatures& typical) {
    const double delta = 1e-4;
    const auto probs = [&](const IncentiveVector& z, const ExogenousFeatures& w) {
        return choice_probabilities(params, z, w).to_vector();
    };
    const Vector p0 = probs(baseline, typical);
    if (!(p0[1] > p0[0])) return false; // asap preferred by default
    IncentiveVector widened = baseline;  // widen the asap-minus-flex price gap
    widened.z_flex -= delta;
    widened.z_asap += delta;
    if (!(probs(widened, typical)[0] > p0[0])) return false;
    for (int coord = 0; coord < 3; ++coord) { // leave rises with each control
        IncentiveVector up = baseline;
        if (coord == 0) up.z_flex += delta;
        if (coord == 1) up.z_asap += delta;
        if (coord == 2) up.y += delta;
        if (!(probs(up, typical)[2] > p0[2])) return false;
    }
    ExogenousFeatures longer = typical; // flex rises with parking duration
    longer.parking_duration += delta;
    if (!(probs(baseline, longer)[0] > p0[0])) return false;
    return true;
}

/// Seeded jitter around the default coefficients, re-checked against the
/// qualitative constraints (resampled on a failed check).
inline DcmParams synthesize_dcm_params(std::uint64_t seed,
                                       const IncentiveVector& baseline = {0.45, 0.45, 3.0},
                                       const ExogenousFeatures& typical = {12.0, 3.25, 24.0,
                                                                           0.2, 0.8}) {
    const DcmParams base = default_dcm_params();
    Rng rng(substream_seed(seed, 0x0dc3));
    std::uniform_real_distribution<double> jitter(-0.05, 0.05);
    for (int attempt = 0; attempt < 64; ++attempt) {
        DcmParams p = base;
        for (Eigen::Index i = 0; i < p.theta.rows(); ++i)
            for (Eigen::Index j = 0; j < p.theta.cols(); ++j)
                p.theta(i, j) *= 1.0 + jitter(rng);
        for (Eigen::Index i = 0; i < p.gamma.rows(); ++i)
            for (Eigen::Index j = 0; j < p.gamma.cols(); ++j)
                p.gamma(i, j) *= 1.0 + jitter(rng);
        for (Eigen::Index i = 0; i < p.beta0.size(); ++i) p.beta0[i] *= 1.0 + jitter(rng);
        if (dcm_bullets_hold(p, baseline, typical)) return p;
    }
    throw ConvergenceError("synthesize_dcm_params: no jittered sample passed the checks");
}

/// Bootstrap one day of arrivals: Poisson count, pool resampling with
/// truncated-Gaussian jitter on arrival time and duration, sorted by arrival.
inline std::vector<EventRecord> sample_day(const EmpiricalDemand& demand,
                                           const TouTariff& tariff, Rng& rng) {
    demand.validate();
    std::poisson_distribution<int> count_dist(demand.daily_mean);
    const int count = count_dist(rng);
    std::uniform_int_distribution<std::size_t> pick(0, demand.pool.size() - 1);
    std::normal_distribution<double> arrival_noise(0.0, demand.arrival_jitter);
    std::normal_distribution<double> duration_noise(0.0, demand.duration_jitter);
    std::vector<EventRecord> day;
    day.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        EventRecord e = demand.pool[pick(rng)];
        e.arrival_time = std::clamp(e.arrival_time + arrival_noise(rng), tariff.day_start,
                                    tariff.day_end - tariff.step_hours);
        e.parking_duration = std::max(tariff.step_hours, e.parking_duration + duration_noise(rng));
        day.push_back(e);
    }
    std::sort(day.begin(), day.end(),
              [](const EventRecord& a, const EventRecord& b) { return a.arrival_time < b.arrival_time; });
    return day;
}

namespace detail {

inline ChargingSession make_session(const EventRecord& ev, const TouTariff& tariff,
                                    const StationConfig& station) {
    ChargingSession s;
    s.arrival_step = tariff.step_of_time(ev.arrival_time);
    s.horizon_steps = std::max<Eigen::Index>(
        1, static_cast<Eigen::Index>(std::ceil(ev.parking_duration / tariff.step_hours - 1e-9)));
    s.battery_capacity = ev.battery_capacity;
    s.efficiency = station.efficiency;
    s.p_max = station.p_max;
    s.u_nom = station.u_nom;
    s.soc_init = station.default_soc_init;
    s.soc_need = std::min(1.0, s.soc_init + ev.energy_requested / ev.battery_capacity);
    // Requests beyond what the parking window can deliver are trimmed to the
    // reachable target.
    const Eigen::Index n_eff = std::min(s.horizon_steps, tariff.steps() - s.arrival_step);
    const double rate = tariff.step_hours * s.efficiency / s.battery_capacity;
    const double reachable = s.soc_init + static_cast<double>(n_eff) * rate * s.p_max;
    s.soc_need = std::min(s.soc_need, reachable);
    return s;
}

inline ExogenousFeatures make_features(const EventRecord& ev, const ChargingSession& s) {
    ExogenousFeatures w;
    w.time_of_day = ev.arrival_time;
    w.parking_duration = ev.parking_duration;
    w.battery_capacity = ev.battery_capacity;
    w.soc_init = s.soc_init;
    w.soc_need = s.soc_need;
    return w;
}

/// Hours of [t0, t1] overlapping tariff step k.
inline double step_overlap(const TouTariff& tariff, Eigen::Index k, double t0, double t1) {
    const double lo = tariff.day_start + static_cast<double>(k) * tariff.step_hours;
    const double hi = lo + tariff.step_hours;
    return std::max(0.0, std::min(t1, hi) - std::max(t0, lo));
}

} // namespace detail

inline EpisodeMetrics run_episode(const std::vector<EventRecord>& events, const TouTariff& tariff,
                                  const StationConfig& station, const BehaviorModel& behavior,
                                  const SolveConfig& solver_config, OperationMode mode,
                                  std::uint64_t episode_seed) {
    if (station.poles < 1) throw ArgumentError("run_episode: pole count must be >= 1");
    tariff.validate();
    const Eigen::Index steps = tariff.steps();
    EpisodeMetrics m;
    m.power.assign(static_cast<std::size_t>(steps), 0.0);
    m.occupancy.assign(static_cast<std::size_t>(steps), 0.0);
    std::vector<double> overstay_by_step(static_cast<std::size_t>(steps), 0.0);
    std::vector<double> services_by_step(static_cast<std::size_t>(steps), 0.0);
    std::vector<double> profit_by_step(static_cast<std::size_t>(steps), 0.0);

    std::vector<double> pole_free_at(static_cast<std::size_t>(station.poles), tariff.day_start);

    for (std::size_t i = 0; i < events.size(); ++i) {
        const EventRecord& ev = events[i];
        ++m.arrivals;

        int pole = -1;
        for (int p = 0; p < station.poles; ++p) {
            if (pole_free_at[static_cast<std::size_t>(p)] <= ev.arrival_time + 1e-9) {
                pole = p;
                break;
            }
        }
        if (pole < 0) {
            ++m.dropped;
            continue;
        }

        const ChargingSession session = detail::make_session(ev, tariff, station);
        const ExogenousFeatures features = detail::make_features(ev, session);
        const Eigen::Index n_eff = effective_horizon(session, tariff);

        IncentiveVector z = behavior.baseline;
        Vector flex_profile; // u_0..u_{n_eff-1}
        if (mode == OperationMode::controlled) {
            bool solved = false;
            try {
                const SolveResult res =
                    bcd_solve(session, tariff, behavior.controller, features, behavior.overstay,
                              solver_config);
                if (res.converged) {
                    z = res.z_star;
                    flex_profile = res.x_star.tail(n_eff);
                    solved = true;
                }
            } catch (const std::exception&) {
                solved = false;
            }
            if (!solved) ++m.degraded; // fall back to baseline prices
        }

        const ChoiceDistribution dist =
            choice_probabilities(behavior.actual_params(), z, features);
        Rng choice_rng(substream_seed(episode_seed, i, 1));
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        const double draw = unif(choice_rng);
        Alternative choice;
        if (mode == OperationMode::baseline) {
            // The baseline offers no leave option: renormalize over flex/asap.
            const double p_flex = dist.p_flex / (dist.p_flex + dist.p_asap);
            choice = draw < p_flex ? Alternative::flex : Alternative::asap;
        } else {
            choice = draw < dist.p_flex
                         ? Alternative::flex
                         : (draw < dist.p_flex + dist.p_asap ? Alternative::asap
                                                             : Alternative::leave);
        }
        if (choice == Alternative::leave) {
            ++m.leaves;
            continue;
        }
        ++m.services_fulfilled;

        // Charging profile per step, relative to the arrival step.
        const double rate = tariff.step_hours * session.efficiency / session.battery_capacity;
        Vector u;
        if (choice == Alternative::flex) {
            if (flex_profile.size() == 0) {
                // Baseline (or degraded) flex execution: cost-optimal
                // schedule at the fixed flex price.
                const FlexSolution sol =
                    flex_cost(session, tariff, z.z_flex, solver_config.lambda_u,
                              solver_config.qp);
                flex_profile = sol.x.tail(n_eff);
            }
            u = flex_profile;
        } else {
            u = Vector::Zero(n_eff);
            double soc = session.soc_init;
            for (Eigen::Index k = 0; k < n_eff; ++k) {
                if (soc >= session.soc_need - 1e-12) break;
                u[k] = std::min(session.u_nom, (session.soc_need - soc) / rate);
                soc += rate * u[k];
            }
        }
        Eigen::Index last_charge_step = -1;
        for (Eigen::Index k = 0; k < n_eff; ++k)
            if (u[k] > 1e-9) last_charge_step = k;
        const double full_time =
            ev.arrival_time + static_cast<double>(last_charge_step + 1) * tariff.step_hours;

        // Overstay realization: exponential with mean Lambda(y), truncated at
        // close of operations. A common uniform draws it in both modes so
        // paired runs differ only through the penalty level.
        const double mean_overstay = expected_overstay(behavior.overstay, z.y);
        Rng overstay_rng(substream_seed(episode_seed, i, 2));
        const double u_draw = unif(overstay_rng);
        const double extra =
            mean_overstay > 0.0 ? -mean_overstay * std::log(1.0 - u_draw) : 0.0;
        const double declared_end = ev.arrival_time + ev.parking_duration;
        const double departure = std::min(declared_end + extra, tariff.day_end);

        // Flex overstay billing starts after the declared duration; asap
        // billing starts once the vehicle is full.
        const double billable_from =
            choice == Alternative::flex ? declared_end : std::max(full_time, ev.arrival_time);
        const double billable = std::max(0.0, departure - billable_from);
        m.overstay_hours += billable;

        pole_free_at[static_cast<std::size_t>(pole)] = departure;

        // Accounting.
        double delivered = 0.0;
        double grid_cost = 0.0;
        const double z_used = choice == Alternative::flex ? z.z_flex : z.z_asap;
        for (Eigen::Index k = 0; k < n_eff; ++k) {
            const double energy = u[k] * tariff.step_hours;
            delivered += energy;
            grid_cost += tariff.prices[session.arrival_step + k] * energy;
            const auto idx = static_cast<std::size_t>(session.arrival_step + k);
            m.power[idx] += u[k];
            profit_by_step[idx] +=
                (z_used - tariff.prices[session.arrival_step + k]) * energy;
        }
        m.net_profit += z_used * delivered + z.y * billable - grid_cost;

        services_by_step[static_cast<std::size_t>(session.arrival_step)] += 1.0;
        for (Eigen::Index k = 0; k < steps; ++k) {
            const auto idx = static_cast<std::size_t>(k);
            m.occupancy[idx] +=
                detail::step_overlap(tariff, k, ev.arrival_time, departure) > 1e-12 ? 1.0 : 0.0;
            const double over = detail::step_overlap(tariff, k, billable_from, departure);
            overstay_by_step[idx] += over;
            profit_by_step[idx] += z.y * over;
        }
    }

    m.cum_overstay.resize(static_cast<std::size_t>(steps));
    m.cum_services.resize(static_cast<std::size_t>(steps));
    m.cum_profit.resize(static_cast<std::size_t>(steps));
    double co = 0.0, cs = 0.0, cp = 0.0;
    for (std::size_t k = 0; k < static_cast<std::size_t>(steps); ++k) {
        co += overstay_by_step[k];
        cs += services_by_step[k];
        cp += profit_by_step[k];
        m.cum_overstay[k] = co;
        m.cum_services[k] = cs;
        m.cum_profit[k] = cp;
    }
    return m;
}

struct MetricStats {
    double mean = 0.0;
    double stddev = 0.0;
};

struct MonteCarloSummary {
    int episodes = 0;
    std::vector<EpisodeMetrics> controlled;
    std::vector<EpisodeMetrics> baseline;
    MetricStats profit_controlled, profit_baseline;
    MetricStats overstay_controlled, overstay_baseline;
    MetricStats services_controlled, services_baseline;
    double profit_improvement_pct = 0.0;
    double overstay_improvement_pct = 0.0;
    double services_improvement_pct = 0.0;
    // Fraction of episodes whose paired difference agrees with the mean sign.
    double profit_sign_consistency = 0.0;
    double overstay_sign_consistency = 0.0;
    double services_sign_consistency = 0.0;
};

namespace detail {

inline MetricStats stats_of(const std::vector<double>& xs) {
    MetricStats s;
    if (xs.empty()) return s;
    double sum = 0.0;
    for (double x : xs) sum += x;
    s.mean = sum / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.stddev = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
    return s;
}

inline double improvement_pct(double controlled, double baseline) {
    if (std::abs(baseline) < 1e-12) return 0.0;
    return (controlled / baseline - 1.0) * 100.0;
}

inline double sign_consistency(const std::vector<double>& c, const std::vector<double>& b) {
    if (c.empty()) return 0.0;
    double mean_diff = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) mean_diff += c[i] - b[i];
    int agree = 0;
    for (std::size_t i = 0; i < c.size(); ++i)
        if ((c[i] - b[i]) * mean_diff >= 0.0) ++agree;
    return static_cast<double>(agree) / static_cast<double>(c.size());
}

} // namespace detail

/// Paired controlled/baseline episodes on common random numbers.
inline MonteCarloSummary monte_carlo(const EmpiricalDemand& demand, const TouTariff& tariff,
                                     const StationConfig& station, const BehaviorModel& behavior,
                                     const SolveConfig& solver_config, int episodes,
                                     std::uint64_t seed) {
    if (episodes < 1) throw ArgumentError("monte_carlo: episodes must be >= 1");
    MonteCarloSummary s;
    s.episodes = episodes;
    std::vector<double> pc, pb, oc, ob, sc, sb;
    for (int e = 0; e < episodes; ++e) {
        Rng day_rng(substream_seed(seed, static_cast<std::uint64_t>(e), 0));
        const std::vector<EventRecord> day = sample_day(demand, tariff, day_rng);
        const std::uint64_t ep_seed = substream_seed(seed, static_cast<std::uint64_t>(e), 7);
        EpisodeMetrics c = run_episode(day, tariff, station, behavior, solver_config,
                                       OperationMode::controlled, ep_seed);
        EpisodeMetrics b = run_episode(day, tariff, station, behavior, solver_config,
                                       OperationMode::baseline, ep_seed);
        pc.push_back(c.net_profit);
        pb.push_back(b.net_profit);
        oc.push_back(c.overstay_hours);
        ob.push_back(b.overstay_hours);
        sc.push_back(static_cast<double>(c.services_fulfilled));
        sb.push_back(static_cast<double>(b.services_fulfilled));
        s.controlled.push_back(std::move(c));
        s.baseline.push_back(std::move(b));
    }
    s.profit_controlled = detail::stats_of(pc);
    s.profit_baseline = detail::stats_of(pb);
    s.overstay_controlled = detail::stats_of(oc);
    s.overstay_baseline = detail::stats_of(ob);
    s.services_controlled = detail::stats_of(sc);
    s.services_baseline = detail::stats_of(sb);
    s.profit_improvement_pct =
        detail::improvement_pct(s.profit_controlled.mean, s.profit_baseline.mean);
    s.overstay_improvement_pct =
        detail::improvement_pct(s.overstay_controlled.mean, s.overstay_baseline.mean);
    s.services_improvement_pct =
        detail::improvement_pct(s.services_controlled.mean, s.services_baseline.mean);
    s.profit_sign_consistency = detail::sign_consistency(pc, pb);
    s.overstay_sign_consistency = detail::sign_consistency(oc, ob);
    s.services_sign_consistency = detail::sign_consistency(sc, sb);
    return s;
}

struct SensitivityRow {
    int poles = 0;
    MonteCarloSummary summary;
};

inline std::vector<SensitivityRow> sensitivity_sweep(const std::vector<int>& pole_counts,
                                                     const EmpiricalDemand& demand,
                                                     const TouTariff& tariff,
                                                     StationConfig station,
                                                     const BehaviorModel& behavior,
                                                     const SolveConfig& solver_config,
                                                     int episodes, std::uint64_t seed) {
    std::vector<SensitivityRow> rows;
    for (int poles : pole_counts) {
        if (poles < 1) throw ArgumentError("sensitivity_sweep: pole counts must be >= 1");
        station.poles = poles;
        rows.push_back(
            {poles, monte_carlo(demand, tariff, station, behavior, solver_config, episodes, seed)});
    }
    return rows;
}

} // namespace evstation
