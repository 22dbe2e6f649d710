#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "evstation/io.hpp"

using namespace evstation;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name, const std::string& content) : path(name) {
        std::ofstream out(path);
        out << content;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

std::string data_path(const std::string& name) {
    return std::string(EVSTATION_DATA_DIR) + "/" + name;
}

} // namespace

TEST_CASE("parse_ini") {
    std::istringstream in("# top comment\n"
                          "[station]\n"
                          "poles = 4   # trailing comment\n"
                          "p_max=6.6\n"
                          "\n"
                          "[files]\n"
                          "tariff = data/tariff.csv\n");
    const IniData ini = parse_ini(in);
    CHECK(ini.at("station").at("poles") == "4");
    CHECK(ini.at("station").at("p_max") == "6.6");
    CHECK(ini.at("files").at("tariff") == "data/tariff.csv");

    std::istringstream bad_section("[station\npoles = 4\n");
    CHECK_THROWS_WITH_AS(parse_ini(bad_section, "cfg"), "cfg:1: unterminated section",
                         ParseError);
    std::istringstream bad_line("[station]\njust some words\n");
    CHECK_THROWS_AS(parse_ini(bad_line), ParseError);
}

TEST_CASE("load_events") {
    SUBCASE("small inline table") {
        const TempFile f("tmp_events_ok.csv",
                         "arrival_time,duration_h,energy_kwh,battery_kwh\n"
                         "8.0,2.0,7.2,24\n"
                         "9.5,3.5,10.8,40\n"
                         "\n"
                         "11.0,1.0,3.6,24\n");
        const EmpiricalDemand d = load_events(f.path, 1.0);
        REQUIRE(d.pool.size() == 3);
        CHECK(d.daily_mean == doctest::Approx(3.0));
        CHECK(d.pool[1].battery_capacity == 40.0);
        CHECK(d.mean_parking_duration() == doctest::Approx((2.0 + 3.5 + 1.0) / 3));
        CHECK(d.mean_energy() == doctest::Approx((7.2 + 10.8 + 3.6) / 3));
    }

    SUBCASE("bad header is rejected") {
        const TempFile f("tmp_events_hdr.csv", "time,duration,energy,battery\n8,2,7.2,24\n");
        CHECK_THROWS_AS(load_events(f.path), ParseError);
    }

    SUBCASE("row diagnostics name the line and column") {
        const TempFile f("tmp_events_bad.csv",
                         "arrival_time,duration_h,energy_kwh,battery_kwh\n"
                         "8.0,2.0,7.2,24\n"
                         "9.0,oops,7.2,24\n");
        try {
            load_events(f.path);
            FAIL("expected a ParseError");
        } catch (const ParseError& e) {
            const std::string msg = e.what();
            CHECK(msg.find(":3") != std::string::npos);
            CHECK(msg.find("duration_h") != std::string::npos);
        }
    }

    SUBCASE("nonpositive duration is rejected") {
        const TempFile f("tmp_events_dur.csv",
                         "arrival_time,duration_h,energy_kwh,battery_kwh\n8.0,0.0,7.2,24\n");
        CHECK_THROWS_AS(load_events(f.path), ParseError);
    }

    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_events("no_such_file.csv"), ParseError);
    }

    SUBCASE("bundled pool loads with the documented mean duration") {
        const EmpiricalDemand d = load_events(data_path("events.csv"), 7.0);
        CHECK(d.pool.size() > 100);
        CHECK(d.daily_mean == doctest::Approx(d.pool.size() / 7.0));
        CHECK(d.mean_parking_duration() == doctest::Approx(3.25).epsilon(1e-6));
    }
}

TEST_CASE("load_tariff") {
    SUBCASE("small inline table") {
        const TempFile f("tmp_tariff_ok.csv",
                         "time,price_per_kwh\n7.0,0.2\n7.25,0.2\n7.5,0.4\n7.75,0.4\n");
        const TouTariff t = load_tariff(f.path, 0.25, 7.0, 8.0);
        CHECK(t.steps() == 4);
        CHECK(t.prices[2] == 0.4);
        CHECK(t.step_of_time(7.6) == 2);
    }

    SUBCASE("grid mismatch is rejected") {
        const TempFile f("tmp_tariff_grid.csv", "time,price_per_kwh\n7.0,0.2\n7.3,0.2\n");
        CHECK_THROWS_AS(load_tariff(f.path, 0.25, 7.0, 7.5), ParseError);
    }

    SUBCASE("row count must cover the operating hours") {
        const TempFile f("tmp_tariff_rows.csv", "time,price_per_kwh\n7.0,0.2\n7.25,0.2\n");
        CHECK_THROWS_AS(load_tariff(f.path, 0.25, 7.0, 9.0), ArgumentError);
    }

    SUBCASE("bundled tariff covers 7:00 to 22:00") {
        const TouTariff t = load_tariff(data_path("tariff.csv"), 0.25, 7.0, 22.0);
        CHECK(t.steps() == 60);
        CHECK(t.prices[t.step_of_time(14.0)] > t.prices[t.step_of_time(7.0)]); // peak pricing
    }
}

TEST_CASE("scenario config") {
    SUBCASE("defaults load from an empty config") {
        std::istringstream in("");
        ScenarioConfig c = ScenarioConfig::from_ini(parse_ini(in));
        CHECK(c.station.poles == 6);
        CHECK(c.episodes == 50);
        TouTariff t;
        t.prices = Vector::Constant(60, 0.25);
        c.finalize(t);
        CHECK(c.baseline.z_flex == doctest::Approx(0.35)); // mean price + markup
        CHECK(c.solver.bounds.y_lo == doctest::Approx(0.3));
        CHECK(c.solver.bounds.y_hi == doctest::Approx(30.0));
        CHECK(c.solver.z0.z_flex == doctest::Approx(0.35));
    }

    SUBCASE("explicit values override the defaults") {
        std::istringstream in("[station]\npoles = 3\n"
                              "[solver]\ny_lo = 1.0\ny_hi = 5.0\n"
                              "[behavior]\nbaseline_z = 0.5\ny_hat = 2.0\n"
                              "[simulation]\nepisodes = 7\nseed = 99\n");
        ScenarioConfig c = ScenarioConfig::from_ini(parse_ini(in));
        CHECK(c.station.poles == 3);
        CHECK(c.episodes == 7);
        CHECK(c.seed == 99);
        TouTariff t;
        t.prices = Vector::Constant(60, 0.25);
        c.finalize(t);
        CHECK(c.baseline.z_flex == 0.5);
        CHECK(c.baseline.y == 2.0);
        CHECK(c.solver.bounds.y_lo == 1.0);
        CHECK(c.solver.bounds.y_hi == 5.0);
    }

    SUBCASE("explicit coefficient matrices round-trip through save and reload") {
        ScenarioConfig c;
        c.theta_explicit = true;
        c.explicit_params = default_dcm_params();
        c.baseline_given = true;
        c.baseline = IncentiveVector{0.5, 0.5, 3.0};
        c.bounds_given = true;
        c.solver.bounds.y_lo = 0.7;
        c.solver.bounds.y_hi = 7.0;
        c.episodes = 12;
        c.seed = 4242;
        c.overstay.lambda_hat = 0.8;
        const TempFile f("tmp_scenario.ini", "");
        c.save(f.path);
        const ScenarioConfig r = ScenarioConfig::from_file(f.path);
        CHECK(r.theta_explicit);
        CHECK((r.explicit_params.theta - c.explicit_params.theta).cwiseAbs().maxCoeff() <= 1e-15);
        CHECK((r.explicit_params.gamma - c.explicit_params.gamma).cwiseAbs().maxCoeff() <= 1e-15);
        CHECK((r.explicit_params.beta0 - c.explicit_params.beta0).cwiseAbs().maxCoeff() <= 1e-15);
        CHECK(r.baseline_given);
        CHECK(r.baseline.z_flex == c.baseline.z_flex);
        CHECK(r.bounds_given);
        CHECK(r.solver.bounds.y_lo == 0.7);
        CHECK(r.episodes == 12);
        CHECK(r.seed == 4242);
        CHECK(r.overstay.lambda_hat == 0.8);
    }

    SUBCASE("a reloaded config reproduces the original run exactly") {
        ScenarioConfig c = ScenarioConfig::from_file(data_path("scenario.ini"));
        TouTariff t;
        t.step_hours = c.step_hours;
        t.day_start = c.day_start;
        t.day_end = 12.0;
        t.prices = Vector::Constant(20, 0.25);
        c.day_end = 12.0;
        c.finalize(t);
        const TempFile f("tmp_roundtrip.ini", "");
        c.save(f.path);
        ScenarioConfig r = ScenarioConfig::from_file(f.path);
        r.finalize(t);
        const std::vector<EventRecord> day = {{8.0, 2.0, 3.6, 24.0}, {9.0, 3.0, 7.2, 24.0}};
        const EpisodeMetrics a = run_episode(day, t, c.station, c.behavior_model(), c.solver,
                                             OperationMode::controlled, c.seed);
        const EpisodeMetrics b = run_episode(day, t, r.station, r.behavior_model(), r.solver,
                                             OperationMode::controlled, r.seed);
        CHECK(a.net_profit == b.net_profit);
        CHECK(a.overstay_hours == b.overstay_hours);
        CHECK(a.services_fulfilled == b.services_fulfilled);
        for (std::size_t k = 0; k < a.power.size(); ++k) CHECK(a.power[k] == b.power[k]);
    }

    SUBCASE("bundled scenario file parses and finalizes") {
        const ScenarioConfig c = ScenarioConfig::from_file(data_path("scenario.ini"));
        CHECK(c.station.poles >= 1);
        CHECK(c.episodes >= 1);
    }

    SUBCASE("theta must have 12 entries") {
        std::istringstream in("[behavior]\ntheta = 1,2,3\n");
        CHECK_THROWS_AS(ScenarioConfig::from_ini(parse_ini(in)), ParseError);
    }
}

TEST_CASE("csv round trip") {
    CsvTable t;
    t.header = {"step", "power_kw", "profit"};
    t.rows = {{0, 7.2, -1.25}, {1, 3.6, 0.5}, {2, 0, 2.875}};
    const TempFile f("tmp_table.csv", "");
    write_csv(f.path, t);
    const CsvTable r = read_csv(f.path);
    REQUIRE(r.header == t.header);
    REQUIRE(r.rows.size() == t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i)
        for (std::size_t j = 0; j < t.rows[i].size(); ++j)
            CHECK(r.rows[i][j] == doctest::Approx(t.rows[i][j]).epsilon(1e-12));

    const TempFile bad("tmp_table_bad.csv", "a,b\n1,2\n3\n");
    CHECK_THROWS_AS(read_csv(bad.path), ParseError);
}
