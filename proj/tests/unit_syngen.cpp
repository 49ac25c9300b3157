#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "timing/data/dataset.hpp"
#include "timing/syn/analysis.hpp"
#include "timing/syn/generate.hpp"
#include "timing/util/rng.hpp"

#ifndef TIMING_REPO_ROOT
#define TIMING_REPO_ROOT "."
#endif

using namespace timing;
using namespace timing::syn;

namespace {

GeneratorConfig tiny_config() {
    GeneratorConfig cfg;
    cfg.num_users = 2;
    cfg.num_devices = 2;
    cfg.num_controls = 2;
    cfg.target_instances = 40;
    cfg.start_day = 100;
    cfg.end_day = 140;
    cfg.seed = 5;
    return cfg;
}

std::vector<RoutineSpec> tiny_bank() {
    RoutineTemplate morning;
    morning.device = 0;
    morning.control = 0;
    morning.anchor_mean = 27000;
    morning.anchor_sigma = 600;
    morning.probability = 1.0;
    RoutineTemplate evening;
    evening.device = 1;
    evening.control = 1;
    evening.anchor_mean = 70000;
    evening.anchor_sigma = 600;
    evening.probability = 1.0;

    RoutineSpec u0;
    u0.user = 0;
    u0.routines = {morning, evening};
    u0.noise_rate = 0.2;
    RoutineSpec u1;
    u1.user = 1;
    u1.routines = {evening, morning};
    u1.noise_rate = 0.2;
    return {u0, u1};
}

}  // namespace

TEST_CASE("single daily routine stays within the gaussian envelope") {
    GeneratorConfig cfg;
    cfg.num_users = 1;
    cfg.num_devices = 1;
    cfg.num_controls = 1;
    cfg.target_instances = 10;
    cfg.start_day = 100;
    cfg.end_day = 127;
    cfg.seed = 3;

    RoutineTemplate t;
    t.device = 0;
    t.control = 0;
    t.anchor_mean = 27000;
    t.anchor_sigma = 600;
    t.probability = 1.0;
    RoutineSpec spec;
    spec.user = 0;
    spec.routines = {t};
    spec.noise_rate = 0.0;

    data::Dataset ds = generate(cfg, {spec});
    CHECK(ds.sessions.size() == 10);
    for (const auto& s : ds.sessions)
        for (const auto& a : s.actions) {
            CHECK(a.time >= 27000 - 4 * 600);
            CHECK(a.time <= 27000 + 4 * 600);
        }
}

TEST_CASE("degenerate banks are rejected") {
    GeneratorConfig cfg = tiny_config();
    RoutineSpec empty;
    empty.user = 0;
    RoutineSpec other;
    other.user = 1;
    // no routines, no noise: device/control coverage is impossible
    CHECK_THROWS(generate(cfg, {empty, other}));
    CHECK_THROWS(generate(cfg, {}));

    // feasible bank, unreachable target
    GeneratorConfig greedy = tiny_config();
    greedy.target_instances = 1000000;
    CHECK_THROWS_WITH_AS(generate(greedy, tiny_bank()), doctest::Contains("target"),
                         std::runtime_error);
}

TEST_CASE("generation is deterministic and seed sensitive") {
    GeneratorConfig cfg = tiny_config();
    auto bank = tiny_bank();
    data::Dataset a = generate(cfg, bank);
    data::Dataset b = generate(cfg, bank);
    REQUIRE(a.sessions.size() == b.sessions.size());
    bool identical = true;
    for (std::size_t i = 0; i < a.sessions.size(); ++i)
        for (std::size_t j = 0; j < a.sessions[i].actions.size(); ++j) {
            const auto& x = a.sessions[i].actions[j];
            const auto& y = b.sessions[i].actions[j];
            identical = identical && x.day == y.day && x.time == y.time && x.device == y.device &&
                        x.control == y.control && x.user == y.user;
        }
    CHECK(identical);

    cfg.seed = 6;
    data::Dataset c = generate(cfg, bank);
    bool any_diff = c.sessions.size() != a.sessions.size();
    for (std::size_t i = 0; !any_diff && i < a.sessions.size(); ++i)
        for (std::size_t j = 0; !any_diff && j < a.sessions[i].actions.size(); ++j)
            any_diff = a.sessions[i].actions[j].time != c.sessions[i].actions[j].time;
    CHECK(any_diff);
}

TEST_CASE("every generated session passes datamodel validation") {
    GeneratorConfig cfg = tiny_config();
    data::Dataset ds = generate(cfg, tiny_bank());
    for (std::size_t i = 0; i < ds.sessions.size(); ++i)
        CHECK_NOTHROW(data::validate_session(ds.sessions[i], ds, i));
}

TEST_CASE("users overlap consecutive windows by nine actions") {
    GeneratorConfig cfg = tiny_config();
    data::Dataset ds = generate(cfg, tiny_bank());
    // collect sessions per user in emitted order; consecutive windows of one
    // user share 9 actions
    for (int user = 0; user < cfg.num_users; ++user) {
        std::vector<const data::Session*> mine;
        for (const auto& s : ds.sessions)
            if (s.user == user) mine.push_back(&s);
        REQUIRE(mine.size() > 1);
        for (std::size_t i = 1; i < mine.size(); ++i) {
            bool overlap = true;
            for (int j = 0; j < 9; ++j) {
                const auto& prev = mine[i - 1]->actions[static_cast<std::size_t>(j + 1)];
                const auto& cur = mine[i]->actions[static_cast<std::size_t>(j)];
                overlap = overlap && prev.day == cur.day && prev.time == cur.time &&
                          prev.device == cur.device && prev.control == cur.control;
            }
            CHECK(overlap);
        }
    }
}

TEST_CASE("default configuration reproduces the dataset shape") {
    GeneratorConfig cfg;  // defaults
    auto bank = default_routine_bank(cfg);
    data::Dataset ds = generate(cfg, bank);
    CHECK(ds.sessions.size() == 11665);
    std::set<int> devices, controls, users;
    for (const auto& s : ds.sessions)
        for (const auto& a : s.actions) {
            devices.insert(a.device);
            controls.insert(a.control);
            users.insert(a.user);
        }
    CHECK(devices.size() == 16);
    CHECK(controls.size() == 121);
    CHECK(users.size() == 39);
}

TEST_CASE("shipped routine bank file matches the procedural default") {
    GeneratorConfig cfg;
    auto procedural = default_routine_bank(cfg);
    const std::string path = std::string(TIMING_REPO_ROOT) + "/configs/routines_an.json";
    auto shipped = load_routine_bank(path);
    REQUIRE(shipped.size() == procedural.size());
    for (std::size_t u = 0; u < shipped.size(); ++u) {
        CHECK(shipped[u].user == procedural[u].user);
        CHECK(shipped[u].noise_rate == doctest::Approx(procedural[u].noise_rate));
        REQUIRE(shipped[u].routines.size() == procedural[u].routines.size());
        for (std::size_t r = 0; r < shipped[u].routines.size(); ++r) {
            const auto& a = shipped[u].routines[r];
            const auto& b = procedural[u].routines[r];
            CHECK(a.device == b.device);
            CHECK(a.control == b.control);
            CHECK(a.anchor_mean == b.anchor_mean);
            CHECK(a.anchor_sigma == b.anchor_sigma);
            CHECK(a.day_mask == b.day_mask);
            CHECK(a.probability == doctest::Approx(b.probability));
        }
    }
}

TEST_CASE("routine bank save/load round trip") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "timing_bank_test";
    fs::create_directories(dir);
    const std::string path = (dir / "bank.json").string();
    auto bank = tiny_bank();
    save_routine_bank(bank, path);
    auto loaded = load_routine_bank(path);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].routines[0].anchor_mean == 27000);
    CHECK(loaded[1].routines[0].anchor_mean == 70000);
    fs::remove_all(dir);
}

TEST_CASE("time diff histogram counts known gaps") {
    data::Session s;
    s.schema = data::Schema::kAn;
    s.user = 0;
    for (int i = 0; i < 10; ++i) {
        data::ActionRecord a;
        a.day = 100;
        a.time = 10000 + i * 900;
        a.user = 0;
        s.actions.push_back(a);
    }

    SUBCASE("uniform 900 second gaps all land in one bucket") {
        auto hist = analyze_time_diffs({s});
        CHECK(hist.total == 9);
        // 900 lands in [900, 1800)
        CHECK(hist.counts[3] == 9);
        CHECK(hist.max_fraction() == 1.0);
    }

    SUBCASE("identical timestamps put all mass at zero") {
        for (auto& a : s.actions) a.time = 5000;
        auto hist = analyze_time_diffs({s});
        CHECK(hist.counts[0] == 9);
    }

    SUBCASE("empty input gives an empty histogram") {
        auto hist = analyze_time_diffs({});
        CHECK(hist.total == 0);
        CHECK(hist.max_fraction() == 0.0);
    }

    SUBCASE("table rendering has one row per bucket") {
        auto hist = analyze_time_diffs({s});
        auto table = hist.to_table();
        CHECK(table.rows().size() == default_diff_edges().size());
        CHECK(table.columns().size() == 4);
    }
}

TEST_CASE("generated default data has a spread-out diff spectrum") {
    GeneratorConfig cfg;
    auto ds = generate(cfg, default_routine_bank(cfg));
    auto hist = analyze_time_diffs(ds.sessions);
    CHECK(hist.max_fraction() < 0.40);
}

TEST_CASE("device frequency report") {
    data::Session s;
    s.schema = data::Schema::kAn;
    s.user = 0;
    for (int i = 0; i < 10; ++i) {
        data::ActionRecord a;
        a.day = 100;
        a.time = 1000 + i;
        a.device = 4;
        a.user = 0;
        s.actions.push_back(a);
    }

    SUBCASE("single-device session counts ten at every position") {
        auto report = analyze_device_frequency({s}, 1);
        REQUIRE(report.top_devices.size() == 1);
        CHECK(report.top_devices[0] == 4);
        for (long long c : report.counts[0]) CHECK(c == 1);
        CHECK(report.total_actions == 10);
        CHECK(report.top_share == 1.0);
    }

    SUBCASE("uniform random devices give near-uniform counts") {
        timing::util::Rng rng(71);
        std::vector<data::Session> sessions;
        for (int n = 0; n < 2000; ++n) {
            data::Session r = s;
            for (auto& a : r.actions) a.device = static_cast<int>(rng.below(4));
            sessions.push_back(r);
        }
        auto report = analyze_device_frequency(sessions, 4);
        // chi-square against uniform over 4 devices x 20000 actions
        double chi2 = 0.0;
        const double expected = 20000.0 / 4.0;
        for (std::size_t i = 0; i < report.counts.size(); ++i) {
            double device_total = 0;
            for (long long c : report.counts[i]) device_total += static_cast<double>(c);
            chi2 += (device_total - expected) * (device_total - expected) / expected;
        }
        CHECK(chi2 < 16.27);  // 3 dof, p = 0.001
    }

    SUBCASE("default generation keeps the top devices dominant but not exclusive") {
        GeneratorConfig cfg;
        auto ds = generate(cfg, default_routine_bank(cfg));
        auto report = analyze_device_frequency(ds.sessions);
        CHECK(report.top_share >= 0.20);
        CHECK(report.top_share <= 0.80);
        auto table = report.to_table();
        CHECK(table.rows().size() == 2);
        CHECK(table.columns().size() == 1 + 10 + 1);
    }
}
