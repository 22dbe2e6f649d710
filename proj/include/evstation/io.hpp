#pragma once

// File formats: the scenario config (INI-style sections), the events and
// tariff tables (CSV), and CSV output helpers.

#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "evstation/simulator.hpp"

namespace evstation {

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    if (!s.empty() && s.back() == sep) out.push_back("");
    return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ParseError("expected a number at " + where + ", got '" + s + "'");
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// INI-style config files: [section] headers, key = value lines, # comments.

using IniData = std::map<std::string, std::map<std::string, std::string>>;

inline IniData parse_ini(std::istream& in, const std::string& name = "<config>") {
    IniData data;
    std::string section;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto comment = line.find('#');
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ParseError(name + ":" + std::to_string(lineno) + ": unterminated section");
            section = detail::trim(line.substr(1, line.size() - 2));
            data[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(name + ":" + std::to_string(lineno) + ": expected key = value");
        data[section][detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
    }
    return data;
}

inline IniData parse_ini_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file: " + path);
    return parse_ini(in, path);
}

// ---------------------------------------------------------------------------
// Events table: CSV with header arrival_time,duration_h,energy_kwh,battery_kwh

inline EmpiricalDemand load_events(const std::string& path, double days_in_pool = 7.0) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open events file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    const std::vector<std::string> header = detail::split(line, ',');
    const std::vector<std::string> expected = {"arrival_time", "duration_h", "energy_kwh",
                                               "battery_kwh"};
    if (header != expected)
        throw ParseError(path + ":1: expected header arrival_time,duration_h,energy_kwh,battery_kwh");
    EmpiricalDemand demand;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split(line, ',');
        if (cells.size() != expected.size())
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected 4 columns, got " +
                             std::to_string(cells.size()));
        EventRecord e;
        const std::string where = path + ":" + std::to_string(lineno);
        e.arrival_time = detail::parse_double(cells[0], where + " column arrival_time");
        e.parking_duration = detail::parse_double(cells[1], where + " column duration_h");
        e.energy_requested = detail::parse_double(cells[2], where + " column energy_kwh");
        e.battery_capacity = detail::parse_double(cells[3], where + " column battery_kwh");
        if (e.parking_duration <= 0.0)
            throw ParseError(where + ": duration_h must be positive");
        if (e.energy_requested < 0.0)
            throw ParseError(where + ": energy_kwh must be nonnegative");
        if (e.battery_capacity <= 0.0)
            throw ParseError(where + ": battery_kwh must be positive");
        demand.pool.push_back(e);
    }
    if (demand.pool.empty()) throw ParseError(path + ": no event rows");
    demand.daily_mean = static_cast<double>(demand.pool.size()) / days_in_pool;
    return demand;
}

// ---------------------------------------------------------------------------
// Tariff table: CSV with header time,price_per_kwh, one row per step.

inline TouTariff load_tariff(const std::string& path, double step_hours, double day_start,
                             double day_end) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open tariff file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    if (detail::split(line, ',') != std::vector<std::string>{"time", "price_per_kwh"})
        throw ParseError(path + ":1: expected header time,price_per_kwh");
    std::vector<double> times, prices;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split(line, ',');
        const std::string where = path + ":" + std::to_string(lineno);
        if (cells.size() != 2) throw ParseError(where + ": expected 2 columns");
        times.push_back(detail::parse_double(cells[0], where + " column time"));
        prices.push_back(detail::parse_double(cells[1], where + " column price_per_kwh"));
    }
    TouTariff tariff;
    tariff.step_hours = step_hours;
    tariff.day_start = day_start;
    tariff.day_end = day_end;
    tariff.prices = Eigen::Map<Vector>(prices.data(), static_cast<Eigen::Index>(prices.size()));
    for (std::size_t k = 0; k < times.size(); ++k) {
        const double expected = day_start + static_cast<double>(k) * step_hours;
        if (std::abs(times[k] - expected) > 1e-6)
            throw ParseError(path + ":" + std::to_string(k + 2) + ": time " +
                             std::to_string(times[k]) + " does not match the step grid");
    }
    tariff.validate();
    return tariff;
}

// ---------------------------------------------------------------------------
// Scenario config.

struct ScenarioConfig {
    StationConfig station;
    double step_hours = 0.25;
    double day_start = 7.0;
    double day_end = 22.0;
    SolveConfig solver;
    bool bounds_given = false; // else derived from y_hat at finalize()
    OverstayModel overstay;
    std::uint64_t theta_seed = 1;
    bool theta_explicit = false;
    DcmParams explicit_params;
    double baseline_markup = 0.10; // $/kWh over the TOU mean
    bool baseline_given = false;
    IncentiveVector baseline;
    int episodes = 50;
    std::uint64_t seed = 1;
    double days_in_pool = 7.0;
    double arrival_jitter = 0.25;
    double duration_jitter = 10.0 / 60.0;
    std::string tariff_path = "data/tariff.csv";
    std::string events_path = "data/events.csv";

    static ScenarioConfig from_ini(const IniData& ini);
    static ScenarioConfig from_file(const std::string& path) {
        return from_ini(parse_ini_file(path));
    }
    void save(const std::string& path) const;

    /// Resolves derived quantities against the loaded tariff.
    void finalize(const TouTariff& tariff) {
        if (!baseline_given) {
            const double z_hat = tariff.prices.mean() + baseline_markup;
            baseline = IncentiveVector{z_hat, z_hat, overstay.y_hat};
        }
        if (!bounds_given) {
            solver.bounds.y_lo = 0.1 * overstay.y_hat;
            solver.bounds.y_hi = 10.0 * overstay.y_hat;
        }
        solver.z0 = solver.bounds.clamp(baseline);
    }

    BehaviorModel behavior_model() const {
        BehaviorModel b;
        b.controller = theta_explicit ? explicit_params : synthesize_dcm_params(theta_seed);
        b.overstay = overstay;
        b.baseline = baseline;
        return b;
    }
};

namespace detail {

inline std::string get(const IniData& ini, const std::string& sec, const std::string& key,
                       const std::string& fallback) {
    const auto s = ini.find(sec);
    if (s == ini.end()) return fallback;
    const auto k = s->second.find(key);
    return k == s->second.end() ? fallback : k->second;
}

inline bool has(const IniData& ini, const std::string& sec, const std::string& key) {
    const auto s = ini.find(sec);
    return s != ini.end() && s->second.count(key) > 0;
}

inline double get_num(const IniData& ini, const std::string& sec, const std::string& key,
                      double fallback) {
    if (!has(ini, sec, key)) return fallback;
    return parse_double(get(ini, sec, key, ""), "[" + sec + "] " + key);
}

inline Vector parse_vector(const std::string& s, Eigen::Index expected,
                           const std::string& where) {
    const auto cells = split(s, ',');
    if (static_cast<Eigen::Index>(cells.size()) != expected)
        throw ParseError(where + ": expected " + std::to_string(expected) + " comma-separated values");
    Vector v(expected);
    for (Eigen::Index i = 0; i < expected; ++i)
        v[i] = parse_double(cells[static_cast<std::size_t>(i)], where);
    return v;
}

} // namespace detail

inline ScenarioConfig ScenarioConfig::from_ini(const IniData& ini) {
    ScenarioConfig c;
    c.station.poles = static_cast<int>(detail::get_num(ini, "station", "poles", c.station.poles));
    c.station.p_max = detail::get_num(ini, "station", "p_max", c.station.p_max);
    c.station.u_nom = detail::get_num(ini, "station", "u_nom", c.station.u_nom);
    c.station.efficiency = detail::get_num(ini, "station", "efficiency", c.station.efficiency);
    c.station.default_soc_init =
        detail::get_num(ini, "station", "default_soc_init", c.station.default_soc_init);
    c.step_hours = detail::get_num(ini, "station", "step_hours", c.step_hours);
    c.day_start = detail::get_num(ini, "station", "day_start", c.day_start);
    c.day_end = detail::get_num(ini, "station", "day_end", c.day_end);

    c.solver.mu = detail::get_num(ini, "solver", "mu", c.solver.mu);
    c.solver.epsilon = detail::get_num(ini, "solver", "epsilon", c.solver.epsilon);
    c.solver.stop_tol = detail::get_num(ini, "solver", "stop_tol", c.solver.stop_tol);
    c.solver.max_iters =
        static_cast<int>(detail::get_num(ini, "solver", "max_iters", c.solver.max_iters));
    c.solver.mu_growth = detail::get_num(ini, "solver", "mu_growth", c.solver.mu_growth);
    c.solver.max_restarts =
        static_cast<int>(detail::get_num(ini, "solver", "max_restarts", c.solver.max_restarts));
    c.solver.lambda_u = detail::get_num(ini, "solver", "lambda_u", c.solver.lambda_u);
    c.solver.lambda_g = detail::get_num(ini, "solver", "lambda_g", c.solver.lambda_g);
    c.solver.bounds.z_lo = detail::get_num(ini, "solver", "z_lo", c.solver.bounds.z_lo);
    c.solver.bounds.z_hi = detail::get_num(ini, "solver", "z_hi", c.solver.bounds.z_hi);
    if (detail::has(ini, "solver", "y_lo") || detail::has(ini, "solver", "y_hi")) {
        c.bounds_given = true;
        c.solver.bounds.y_lo = detail::get_num(ini, "solver", "y_lo", c.solver.bounds.y_lo);
        c.solver.bounds.y_hi = detail::get_num(ini, "solver", "y_hi", c.solver.bounds.y_hi);
    }

    c.overstay.lambda_hat =
        detail::get_num(ini, "behavior", "lambda_hat", c.overstay.lambda_hat);
    c.overstay.y_hat = detail::get_num(ini, "behavior", "y_hat", c.overstay.y_hat);
    c.theta_seed = static_cast<std::uint64_t>(
        detail::get_num(ini, "behavior", "theta_seed", static_cast<double>(c.theta_seed)));
    if (detail::has(ini, "behavior", "theta")) {
        c.theta_explicit = true;
        const Vector t = detail::parse_vector(detail::get(ini, "behavior", "theta", ""), 12,
                                              "[behavior] theta");
        c.explicit_params.theta = Eigen::Map<const Matrix>(t.data(), 4, 3).transpose();
        if (detail::has(ini, "behavior", "gamma")) {
            const Vector g = detail::parse_vector(detail::get(ini, "behavior", "gamma", ""), 15,
                                                  "[behavior] gamma");
            c.explicit_params.gamma = Eigen::Map<const Matrix>(g.data(), 5, 3).transpose();
        } else {
            c.explicit_params.gamma = Matrix::Zero(kNumAlternatives, ExogenousFeatures::kDim);
        }
        c.explicit_params.beta0 = detail::parse_vector(
            detail::get(ini, "behavior", "beta0", "0,0,0"), 3, "[behavior] beta0");
    }
    c.baseline_markup = detail::get_num(ini, "behavior", "baseline_markup", c.baseline_markup);
    if (detail::has(ini, "behavior", "baseline_z")) {
        c.baseline_given = true;
        const double z = detail::get_num(ini, "behavior", "baseline_z", 0.45);
        c.baseline = IncentiveVector{z, z, c.overstay.y_hat};
    }

    c.episodes = static_cast<int>(detail::get_num(ini, "simulation", "episodes", c.episodes));
    c.seed = static_cast<std::uint64_t>(
        detail::get_num(ini, "simulation", "seed", static_cast<double>(c.seed)));
    c.days_in_pool = detail::get_num(ini, "simulation", "days_in_pool", c.days_in_pool);
    c.arrival_jitter = detail::get_num(ini, "simulation", "arrival_jitter", c.arrival_jitter);
    c.duration_jitter = detail::get_num(ini, "simulation", "duration_jitter", c.duration_jitter);

    c.tariff_path = detail::get(ini, "files", "tariff", c.tariff_path);
    c.events_path = detail::get(ini, "files", "events", c.events_path);
    return c;
}

inline void ScenarioConfig::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write config file: " + path);
    out << std::setprecision(17);
    out << "[station]\n"
        << "poles = " << station.poles << "\n"
        << "p_max = " << station.p_max << "\n"
        << "u_nom = " << station.u_nom << "\n"
        << "efficiency = " << station.efficiency << "\n"
        << "default_soc_init = " << station.default_soc_init << "\n"
        << "step_hours = " << step_hours << "\n"
        << "day_start = " << day_start << "\n"
        << "day_end = " << day_end << "\n\n";
    out << "[solver]\n"
        << "mu = " << solver.mu << "\n"
        << "epsilon = " << solver.epsilon << "\n"
        << "stop_tol = " << solver.stop_tol << "\n"
        << "max_iters = " << solver.max_iters << "\n"
        << "mu_growth = " << solver.mu_growth << "\n"
        << "max_restarts = " << solver.max_restarts << "\n"
        << "lambda_u = " << solver.lambda_u << "\n"
        << "lambda_g = " << solver.lambda_g << "\n"
        << "z_lo = " << solver.bounds.z_lo << "\n"
        << "z_hi = " << solver.bounds.z_hi << "\n";
    if (bounds_given)
        out << "y_lo = " << solver.bounds.y_lo << "\n"
            << "y_hi = " << solver.bounds.y_hi << "\n";
    out << "\n[behavior]\n"
        << "lambda_hat = " << overstay.lambda_hat << "\n"
        << "y_hat = " << overstay.y_hat << "\n"
        << "theta_seed = " << theta_seed << "\n"
        << "baseline_markup = " << baseline_markup << "\n";
    if (theta_explicit) {
        const auto write_row_major = [&out](const char* key, const Matrix& mat) {
            out << key << " = ";
            for (Eigen::Index i = 0; i < mat.rows(); ++i)
                for (Eigen::Index j = 0; j < mat.cols(); ++j)
                    out << ((i == 0 && j == 0) ? "" : ",") << mat(i, j);
            out << "\n";
        };
        write_row_major("theta", explicit_params.theta);
        write_row_major("gamma", explicit_params.gamma);
        out << "beta0 = " << explicit_params.beta0[0] << "," << explicit_params.beta0[1] << ","
            << explicit_params.beta0[2] << "\n";
    }
    if (baseline_given) out << "baseline_z = " << baseline.z_flex << "\n";
    out << "\n[simulation]\n"
        << "episodes = " << episodes << "\n"
        << "seed = " << seed << "\n"
        << "days_in_pool = " << days_in_pool << "\n"
        << "arrival_jitter = " << arrival_jitter << "\n"
        << "duration_jitter = " << duration_jitter << "\n";
    out << "\n[files]\n"
        << "tariff = " << tariff_path << "\n"
        << "events = " << events_path << "\n";
}

// ---------------------------------------------------------------------------
// CSV output.

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

inline void write_csv(const std::string& path, const CsvTable& table) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write CSV file: " + path);
    out << std::setprecision(15);
    for (std::size_t i = 0; i < table.header.size(); ++i)
        out << (i ? "," : "") << table.header[i];
    out << "\n";
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << "\n";
    }
}

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open CSV file: " + path);
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    table.header = detail::split(line, ',');
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split(line, ',');
        if (cells.size() != table.header.size())
            throw ParseError(path + ":" + std::to_string(lineno) + ": column count mismatch");
        std::vector<double> row;
        for (std::size_t i = 0; i < cells.size(); ++i)
            row.push_back(detail::parse_double(cells[i], path + ":" + std::to_string(lineno)));
        table.rows.push_back(std::move(row));
    }
    return table;
}

} // namespace evstation
