// Command-line front end: price a single arrival, run one day, run a Monte
// Carlo study, or sweep the pole count. Emits CSV/JSON results and static
// SVG plots. Exit codes: 0 success, 2 parse/config error, 3 infeasible,
// 4 non-convergence.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "evstation/io.hpp"
#include "evstation/plot.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace evstation;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitNoConvergence = 4;

struct Scenario {
    ScenarioConfig config;
    TouTariff tariff;
    EmpiricalDemand demand;
    BehaviorModel behavior;
};

std::string resolve_path(const std::string& path, const std::string& config_path) {
    fs::path p(path);
    if (p.is_absolute() || config_path.empty()) return path;
    return (fs::path(config_path).parent_path() / p).string();
}

Scenario load_scenario(const std::string& config_path) {
    Scenario s;
    s.config = config_path.empty() ? ScenarioConfig{} : ScenarioConfig::from_file(config_path);
    s.tariff = load_tariff(resolve_path(s.config.tariff_path, config_path),
                           s.config.step_hours, s.config.day_start, s.config.day_end);
    s.demand = load_events(resolve_path(s.config.events_path, config_path),
                           s.config.days_in_pool);
    s.demand.arrival_jitter = s.config.arrival_jitter;
    s.demand.duration_jitter = s.config.duration_jitter;
    s.config.finalize(s.tariff);
    s.behavior = s.config.behavior_model();
    return s;
}

std::string output_dir(const std::string& flag_value) {
    std::string dir = flag_value;
    if (dir.empty()) {
        if (const char* env = std::getenv("EVSTATION_OUT")) dir = env;
    }
    if (dir.empty()) dir = ".";
    fs::create_directories(dir);
    return dir;
}

std::vector<double> time_grid(const TouTariff& tariff) {
    std::vector<double> t(static_cast<std::size_t>(tariff.steps()));
    for (std::size_t k = 0; k < t.size(); ++k)
        t[k] = tariff.day_start + (static_cast<double>(k) + 0.5) * tariff.step_hours;
    return t;
}

void write_day_outputs(const std::string& dir, const std::string& tag, const TouTariff& tariff,
                       const EpisodeMetrics& m) {
    CsvTable table;
    table.header = {"time",          "net_power_kw", "occupancy",
                    "cum_overstay_h", "cum_services", "cum_profit"};
    const auto t = time_grid(tariff);
    for (std::size_t k = 0; k < t.size(); ++k)
        table.rows.push_back({t[k], m.power[k], m.occupancy[k], m.cum_overstay[k],
                              m.cum_services[k], m.cum_profit[k]});
    write_csv(dir + "/day_" + tag + ".csv", table);
}

void write_day_plots(const std::string& dir, const TouTariff& tariff,
                     const EpisodeMetrics& controlled, const EpisodeMetrics& baseline) {
    const auto t = time_grid(tariff);
    const auto both = [&](auto getter) {
        return std::vector<PlotSeries>{{"controlled", getter(controlled)},
                                       {"baseline", getter(baseline)}};
    };
    write_line_chart(dir + "/day_power.svg", "Aggregate net power", "hour", "kW", t,
                     both([](const EpisodeMetrics& m) { return m.power; }));
    write_line_chart(dir + "/day_occupancy.svg", "Pole occupancy", "hour", "poles", t,
                     both([](const EpisodeMetrics& m) { return m.occupancy; }));
    write_line_chart(dir + "/day_overstay.svg", "Cumulative overstay", "hour", "hours", t,
                     both([](const EpisodeMetrics& m) { return m.cum_overstay; }));
    write_line_chart(dir + "/day_services.svg", "Cumulative services", "hour", "count", t,
                     both([](const EpisodeMetrics& m) { return m.cum_services; }));
    write_line_chart(dir + "/day_profit.svg", "Cumulative profit", "hour", "$", t,
                     both([](const EpisodeMetrics& m) { return m.cum_profit; }));
}

std::vector<double> histogram(const std::vector<double>& values, double lo, double hi, int bins) {
    std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
    const double width = (hi - lo) / bins;
    for (double v : values) {
        int b = width > 0 ? static_cast<int>((v - lo) / width) : 0;
        b = std::clamp(b, 0, bins - 1);
        counts[static_cast<std::size_t>(b)] += 1.0;
    }
    return counts;
}

void write_mc_histogram(const std::string& path, const std::string& title,
                        const std::vector<double>& controlled,
                        const std::vector<double>& baseline) {
    double lo = controlled[0], hi = controlled[0];
    for (double v : controlled) { lo = std::min(lo, v); hi = std::max(hi, v); }
    for (double v : baseline) { lo = std::min(lo, v); hi = std::max(hi, v); }
    if (hi - lo < 1e-12) hi = lo + 1.0;
    const int bins = 12;
    std::vector<std::string> labels;
    for (int b = 0; b < bins; ++b) {
        std::ostringstream os;
        os << std::setprecision(3) << lo + (hi - lo) * (b + 0.5) / bins;
        labels.push_back(os.str());
    }
    write_bar_chart(path, title, "value", "episodes", labels,
                    {{"controlled", histogram(controlled, lo, hi, bins)},
                     {"baseline", histogram(baseline, lo, hi, bins)}});
}

json stats_json(const MetricStats& s) { return json{{"mean", s.mean}, {"stddev", s.stddev}}; }

json summary_json(const MonteCarloSummary& s, int poles, std::uint64_t seed) {
    json j;
    j["episodes"] = s.episodes;
    j["poles"] = poles;
    j["seed"] = seed;
    j["improvements"] = {{"profit_pct", s.profit_improvement_pct},
                         {"overstay_pct", s.overstay_improvement_pct},
                         {"services_pct", s.services_improvement_pct}};
    j["controlled"] = {{"profit", stats_json(s.profit_controlled)},
                       {"overstay_hours", stats_json(s.overstay_controlled)},
                       {"services", stats_json(s.services_controlled)}};
    j["baseline"] = {{"profit", stats_json(s.profit_baseline)},
                     {"overstay_hours", stats_json(s.overstay_baseline)},
                     {"services", stats_json(s.services_baseline)}};
    j["sign_consistency"] = {{"profit", s.profit_sign_consistency},
                             {"overstay", s.overstay_sign_consistency},
                             {"services", s.services_sign_consistency}};
    return j;
}

std::vector<double> metric_values(const std::vector<EpisodeMetrics>& ms, double (*get)(const EpisodeMetrics&)) {
    std::vector<double> v;
    v.reserve(ms.size());
    for (const auto& m : ms) v.push_back(get(m));
    return v;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"EV charging station pricing controller and simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_flag;
    std::uint64_t seed_flag = 0;
    int poles_flag = 0;
    int episodes_flag = 0;
    app.add_option("--config", config_path, "Scenario config file (INI)");
    app.add_option("--seed", seed_flag, "Override the simulation seed");
    app.add_option("--poles", poles_flag, "Override the pole count");
    app.add_option("--episodes", episodes_flag, "Override the episode count");
    app.add_option("--out", out_flag, "Output directory (also: EVSTATION_OUT)");

    auto* price = app.add_subcommand("price-event", "Solve the pricing problem for one arrival");
    double arrival = 9.0, duration = 4.0, soc_init = 0.2, soc_need = 0.8, battery = 24.0;
    price->add_option("--arrival", arrival, "Arrival time, clock hours");
    price->add_option("--duration", duration, "Declared parking duration, hours");
    price->add_option("--soc-init", soc_init, "Initial state of charge");
    price->add_option("--soc-need", soc_need, "Needed state of charge");
    price->add_option("--battery", battery, "Battery capacity, kWh");

    auto* simulate = app.add_subcommand("simulate", "Run one day, controlled and baseline");
    auto* montecarlo = app.add_subcommand("montecarlo", "Run paired Monte Carlo episodes");
    auto* sensitivity = app.add_subcommand("sensitivity", "Sweep the pole count");
    std::string counts_flag = "2,3,4,5,6,8";
    sensitivity->add_option("--counts", counts_flag, "Comma-separated pole counts");

    CLI11_PARSE(app, argc, argv);

    try {
        Scenario sc = load_scenario(config_path);
        if (seed_flag != 0) sc.config.seed = seed_flag;
        if (poles_flag != 0) sc.config.station.poles = poles_flag;
        if (episodes_flag != 0) sc.config.episodes = episodes_flag;
        const std::string dir = output_dir(out_flag);

        if (price->parsed()) {
            EventRecord ev{arrival, duration, (soc_need - soc_init) * battery, battery};
            StationConfig station = sc.config.station;
            station.default_soc_init = soc_init;
            const ChargingSession session = evstation::detail::make_session(ev, sc.tariff, station);
            const ExogenousFeatures features = evstation::detail::make_features(ev, session);
            const SolveResult res = bcd_solve(session, sc.tariff, sc.behavior.controller,
                                              features, sc.behavior.overstay, sc.config.solver);
            const PricingProblem problem(session, sc.tariff, sc.behavior.controller, features,
                                         sc.behavior.overstay, sc.config.solver);
            const Vector h = problem.cost_vector(res.z_star, res.x_star);
            json j;
            j["z_flex"] = res.z_star.z_flex;
            j["z_asap"] = res.z_star.z_asap;
            j["y"] = res.z_star.y;
            j["probabilities"] = {{"flex", res.model_probs[0]},
                                  {"asap", res.model_probs[1]},
                                  {"leave", res.model_probs[2]}};
            j["costs"] = {{"flex", h[0]}, {"asap", h[1]}, {"leave", h[2]}};
            j["objective"] = res.objective;
            j["fy_gap"] = res.fy_gap;
            j["iterations"] = res.iterations;
            j["converged"] = res.converged;
            const std::string text = j.dump(2) + "\n";
            std::cout << text;
            std::ofstream(dir + "/price_event.json") << text;
            return res.converged ? kExitOk : kExitNoConvergence;
        }

        if (simulate->parsed()) {
            Rng day_rng(substream_seed(sc.config.seed, 0, 0));
            const auto day = sample_day(sc.demand, sc.tariff, day_rng);
            const std::uint64_t ep_seed = substream_seed(sc.config.seed, 0, 7);
            const EpisodeMetrics controlled =
                run_episode(day, sc.tariff, sc.config.station, sc.behavior, sc.config.solver,
                            OperationMode::controlled, ep_seed);
            const EpisodeMetrics baseline =
                run_episode(day, sc.tariff, sc.config.station, sc.behavior, sc.config.solver,
                            OperationMode::baseline, ep_seed);
            write_day_outputs(dir, "controlled", sc.tariff, controlled);
            write_day_outputs(dir, "baseline", sc.tariff, baseline);
            write_day_plots(dir, sc.tariff, controlled, baseline);
            std::cout << "simulate: " << day.size() << " arrivals, controlled profit "
                      << controlled.net_profit << " $, baseline profit " << baseline.net_profit
                      << " $\n";
            return kExitOk;
        }

        if (montecarlo->parsed()) {
            const MonteCarloSummary s =
                monte_carlo(sc.demand, sc.tariff, sc.config.station, sc.behavior,
                            sc.config.solver, sc.config.episodes, sc.config.seed);
            CsvTable table;
            table.header = {"episode",    "profit_controlled",  "profit_baseline",
                            "overstay_controlled", "overstay_baseline", "services_controlled",
                            "services_baseline"};
            for (int e = 0; e < s.episodes; ++e) {
                const auto i = static_cast<std::size_t>(e);
                table.rows.push_back({static_cast<double>(e), s.controlled[i].net_profit,
                                      s.baseline[i].net_profit, s.controlled[i].overstay_hours,
                                      s.baseline[i].overstay_hours,
                                      static_cast<double>(s.controlled[i].services_fulfilled),
                                      static_cast<double>(s.baseline[i].services_fulfilled)});
            }
            write_csv(dir + "/montecarlo.csv", table);
            const json j = summary_json(s, sc.config.station.poles, sc.config.seed);
            std::ofstream(dir + "/montecarlo_summary.json") << j.dump(2) << "\n";
            const auto profit = [](const EpisodeMetrics& m) { return m.net_profit; };
            const auto overstay = [](const EpisodeMetrics& m) { return m.overstay_hours; };
            const auto services = [](const EpisodeMetrics& m) {
                return static_cast<double>(m.services_fulfilled);
            };
            write_mc_histogram(dir + "/mc_profit.svg", "Net profit per episode",
                               metric_values(s.controlled, profit), metric_values(s.baseline, profit));
            write_mc_histogram(dir + "/mc_overstay.svg", "Overstay hours per episode",
                               metric_values(s.controlled, overstay),
                               metric_values(s.baseline, overstay));
            write_mc_histogram(dir + "/mc_services.svg", "Services per episode",
                               metric_values(s.controlled, services),
                               metric_values(s.baseline, services));
            std::cout << j.dump(2) << "\n";
            return kExitOk;
        }

        if (sensitivity->parsed()) {
            std::vector<int> counts;
            for (const auto& c : evstation::detail::split(counts_flag, ','))
                counts.push_back(std::stoi(c));
            const auto rows = sensitivity_sweep(counts, sc.demand, sc.tariff, sc.config.station,
                                                sc.behavior, sc.config.solver, sc.config.episodes,
                                                sc.config.seed);
            CsvTable table;
            table.header = {"poles", "profit_improvement_pct", "overstay_improvement_pct"};
            std::vector<std::string> labels;
            std::vector<double> profit_imp, overstay_imp;
            for (const auto& row : rows) {
                table.rows.push_back({static_cast<double>(row.poles),
                                      row.summary.profit_improvement_pct,
                                      row.summary.overstay_improvement_pct});
                labels.push_back(std::to_string(row.poles));
                profit_imp.push_back(row.summary.profit_improvement_pct);
                overstay_imp.push_back(row.summary.overstay_improvement_pct);
            }
            write_csv(dir + "/sensitivity.csv", table);
            write_bar_chart(dir + "/sensitivity.svg", "Improvement vs pole count", "poles",
                            "improvement %", labels,
                            {{"profit", profit_imp}, {"overstay", overstay_imp}});
            std::cout << "sensitivity: wrote " << rows.size() << " rows to " << dir
                      << "/sensitivity.csv\n";
            return kExitOk;
        }
    } catch (const ParseError& e) {
        std::cerr << "config/parse error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ArgumentError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const ConvergenceError& e) {
        std::cerr << "no convergence: " << e.what() << "\n";
        return kExitNoConvergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
