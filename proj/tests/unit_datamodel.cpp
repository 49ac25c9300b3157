#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "timing/data/dataset.hpp"
#include "timing/data/split.hpp"
#include "timing/util/rng.hpp"

using namespace timing::data;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    TempDir() : path(fs::temp_directory_path() / "timing_data_test") { fs::create_directories(path); }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
    fs::path path;
};

Session make_an_session(int user, int day, int start_time, int step = 600) {
    Session s;
    s.schema = Schema::kAn;
    s.user = user;
    for (int i = 0; i < kActionsPerSession; ++i) {
        ActionRecord a;
        a.day = day;
        a.time = start_time + i * step;
        a.device = i % 3;
        a.control = i % 5;
        a.user = user;
        s.actions.push_back(a);
    }
    return s;
}

Dataset small_an() {
    Dataset d;
    d.schema = Schema::kAn;
    d.num_devices = 3;
    d.num_controls = 5;
    d.num_users = 2;
    d.sessions.push_back(make_an_session(0, 100, 30000));
    d.sessions.push_back(make_an_session(1, 101, 40000));
    return d;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream out;
    out << f.rdbuf();
    return out.str();
}

}  // namespace

TEST_CASE("binning arithmetic") {
    BinningScheme k96(96);
    CHECK(k96.bin_width == 900);
    CHECK(time_to_bin(0, k96) == 0);
    CHECK(time_to_bin(45000, k96) == 50);
    CHECK(time_to_bin(86399, BinningScheme(288)) == 287);
    CHECK_THROWS(time_to_bin(-1, k96));
    CHECK_THROWS(time_to_bin(86400, k96));
    CHECK_THROWS(BinningScheme(100));

    CHECK(bin_to_representative_time(0, k96) == 450.0);
    CHECK(bin_to_representative_time(95, k96) == 85950.0);
    CHECK_THROWS(bin_to_representative_time(96, k96));

    BinningScheme k8(8);
    CHECK(coarsen_bin(0, k96, k8) == 0);
    CHECK(coarsen_bin(95, k96, k8) == 7);
    CHECK_THROWS(coarsen_bin(0, k8, BinningScheme(12)));

    SUBCASE("representative time maps back to its own bin, every scheme") {
        for (int k : BinningScheme::supported()) {
            BinningScheme scheme(k);
            for (int b = 0; b < k; ++b)
                CHECK(time_to_bin(static_cast<int>(bin_to_representative_time(b, scheme)), scheme) ==
                      b);
        }
    }

    SUBCASE("coarsening 96 to 8 agrees with rebinning the representative time") {
        for (int b = 0; b < 96; ++b)
            CHECK(coarsen_bin(b, k96, k8) ==
                  time_to_bin(static_cast<int>(bin_to_representative_time(b, k96)), k8));
    }

    SUBCASE("representative time lies within half a bin width of the source time") {
        timing::util::Rng rng(23);
        for (int i = 0; i < 10000; ++i) {
            const int t = static_cast<int>(rng.below(86400));
            const double rep = bin_to_representative_time(time_to_bin(t, k96), k96);
            CHECK(std::abs(rep - t) <= 450.0);
        }
    }
}

TEST_CASE("time diff feature has a leading zero and day carry") {
    Session s = make_an_session(0, 100, 30000, 900);
    s.actions[5].day = 101;  // jump to the next day, same clock time pattern
    for (std::size_t i = 6; i < s.actions.size(); ++i) s.actions[i].day = 101;
    auto diffs = time_diff_feature(s);
    REQUIRE(diffs.size() == kActionsPerSession - 1);
    CHECK(diffs[0] == 0.0);
    CHECK(diffs[1] == 900.0);
    CHECK(diffs[5] == 86400.0 + 900.0);  // crossing midnight adds a whole day to the gap
    Session bad = make_an_session(0, 100, 30000);
    std::swap(bad.actions[2], bad.actions[3]);
    CHECK_THROWS(time_diff_feature(bad));

    SUBCASE("3-hour-range schema uses minimal non-negative range steps") {
        Session ss;
        ss.schema = Schema::kSmartSense;
        ss.user = -1;
        for (int i = 0; i < 5; ++i) {
            ActionRecord a;
            a.device = 0;
            a.control = 0;
            a.device_control = 0;
            ss.actions.push_back(a);
        }
        ss.actions[0].day = 2, ss.actions[0].time = 3;
        ss.actions[1].day = 2, ss.actions[1].time = 5;  // +2 ranges
        ss.actions[2].day = 3, ss.actions[2].time = 1;  // +4 ranges across midnight
        ss.actions[3].day = 0, ss.actions[3].time = 1;  // wraps the week: 32 ranges
        ss.actions[4].day = 0, ss.actions[4].time = 2;  // target, not part of the diffs
        auto g = time_diff_feature(ss);
        REQUIRE(g.size() == 4);
        CHECK(g[0] == 0.0);
        CHECK(g[1] == 2 * 10800.0);
        CHECK(g[2] == 4 * 10800.0);
        CHECK(g[3] == 32 * 10800.0);
    }
}

TEST_CASE("an save/load round trip is byte identical") {
    TempDir dir;
    Dataset d = small_an();
    const std::string p1 = dir.file("a.an");
    const std::string p2 = dir.file("b.an");
    save_dataset(d, p1);
    Dataset loaded = load_an(p1);
    CHECK(loaded.sessions.size() == 2);
    CHECK(loaded.num_users == 2);
    CHECK(loaded.sessions[1].user == 1);
    save_dataset(loaded, p2);
    CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("loader rejects malformed input with the row index") {
    TempDir dir;
    Dataset d = small_an();
    const std::string path = dir.file("bad.an");

    SUBCASE("out-of-range time") {
        d.sessions[0].actions[3].time = 90000;
        save_dataset(d, path);
        CHECK_THROWS_WITH_AS(load_an(path), doctest::Contains("row 4"), std::runtime_error);
    }
    SUBCASE("time going backwards") {
        d.sessions[1].actions[4].time = 1;
        save_dataset(d, path);
        CHECK_THROWS_WITH_AS(load_an(path), doctest::Contains("backwards"), std::runtime_error);
    }
    SUBCASE("wrong column count") {
        std::ofstream f(path);
        f << R"({"schema":"an","devices":3,"controls":5,"users":2,"actions_per_session":10})" << "\n";
        f << "1 2 3 4\n";
        f.close();
        CHECK_THROWS_WITH_AS(load_an(path), doctest::Contains("5 integer columns"),
                             std::runtime_error);
    }
    SUBCASE("rows not divisible into sessions") {
        std::ofstream f(path);
        f << R"({"schema":"an","devices":3,"controls":5,"users":2,"actions_per_session":10})" << "\n";
        for (int i = 0; i < 12; ++i) f << "100 " << 1000 + i << " 0 0 0\n";
        f.close();
        CHECK_THROWS_WITH_AS(load_an(path), doctest::Contains("group into sessions"),
                             std::runtime_error);
    }
    SUBCASE("schema mismatch") {
        save_dataset(d, path);
        CHECK_THROWS_WITH_AS(load_smartsense(path), doctest::Contains("expected 'smartsense'"),
                             std::runtime_error);
    }
}

TEST_CASE("smartsense load validates ranges and combined-id consistency") {
    TempDir dir;
    const std::string path = dir.file("s.ss");
    auto write_rows = [&](int hour_bin, int second_dc) {
        std::ofstream f(path);
        f << R"({"schema":"smartsense","devices":2,"controls":3,"device_controls":6,"actions_per_session":2})"
          << "\n";
        f << "6 " << hour_bin << " 1 2 5\n";
        f << "0 3 1 2 " << second_dc << "\n";
    };

    write_rows(7, 5);
    Dataset d = load_smartsense(path);
    CHECK(d.sessions.size() == 1);
    CHECK(d.sessions[0].actions[0].device_control == 5);

    write_rows(8, 5);
    CHECK_THROWS_WITH_AS(load_smartsense(path), doctest::Contains("hour_range"), std::runtime_error);

    write_rows(7, 4);  // same (device, control) mapped to a different combined id
    CHECK_THROWS_WITH_AS(load_smartsense(path), doctest::Contains("contradicts"),
                         std::runtime_error);
}

TEST_CASE("down-conversion to smartsense keeps the coarse time structure") {
    Dataset an = small_an();
    Dataset ss = to_smartsense(an);
    CHECK(ss.schema == Schema::kSmartSense);
    CHECK(ss.num_device_controls == an.num_devices * an.num_controls);
    for (std::size_t i = 0; i < an.sessions.size(); ++i) {
        for (std::size_t j = 0; j < an.sessions[i].actions.size(); ++j) {
            const ActionRecord& a = an.sessions[i].actions[j];
            const ActionRecord& b = ss.sessions[i].actions[j];
            CHECK(b.day == a.day % 7);
            CHECK(b.time == a.time / 10800);
            CHECK(b.device_control == a.device * an.num_controls + a.control);
        }
    }

    TempDir dir;
    const std::string path = dir.file("conv.ss");
    save_dataset(ss, path);
    Dataset loaded = load_smartsense(path);
    CHECK(loaded.sessions.size() == an.sessions.size());
    for (std::size_t i = 0; i < loaded.sessions.size(); ++i)
        for (std::size_t j = 0; j < loaded.sessions[i].actions.size(); ++j)
            CHECK(loaded.sessions[i].actions[j].time ==
                  an.sessions[i].actions[j].time / 10800);
}

TEST_CASE("vocab sidecar lists every id") {
    TempDir dir;
    const std::string path = dir.file("vocab.json");
    save_vocab_sidecar(small_an(), path);
    const std::string text = slurp(path);
    CHECK(text.find("\"device_0\": 0") != std::string::npos);
    CHECK(text.find("\"control_4\": 4") != std::string::npos);
    CHECK(text.find("\"user_1\": 1") != std::string::npos);
}

TEST_CASE("split ratios, determinism, and disjointness") {
    std::vector<Session> sessions;
    for (int i = 0; i < 10; ++i) {
        Session s = make_an_session(0, 100 + i, 20000);
        sessions.push_back(s);
    }
    DatasetSplit split = split_sessions(sessions, {}, 42);
    CHECK(split.train.size() == 7);
    CHECK(split.val.size() == 1);
    CHECK(split.test().size() == 2);

    DatasetSplit again = split_sessions(sessions, {}, 42);
    for (std::size_t i = 0; i < split.train.size(); ++i)
        CHECK(split.train[i].actions[0].day == again.train[i].actions[0].day);

    // disjoint and exhaustive: day stamps were made unique above
    std::vector<int> seen;
    for (const auto& s : split.train) seen.push_back(s.actions[0].day);
    for (const auto& s : split.val) seen.push_back(s.actions[0].day);
    for (const auto& s : split.test()) seen.push_back(s.actions[0].day);
    std::sort(seen.begin(), seen.end());
    CHECK(std::unique(seen.begin(), seen.end()) == seen.end());
    CHECK(seen.size() == 10);

    CHECK_THROWS(split_sessions({sessions[0]}, {}, 1));  // fewer sessions than ratio parts
    CHECK_THROWS(split_sessions(sessions, SplitRatios{0, 1, 2}, 1));
}

TEST_CASE("split of 11665 sessions lands on 8165/1166/2334") {
    // Size arithmetic only; sessions can be dummies.
    std::vector<Session> sessions(11665, make_an_session(0, 100, 20000));
    DatasetSplit split = split_sessions(sessions, {}, 0);
    CHECK(split.train.size() == 8165);
    CHECK(split.val.size() == 1166);
    CHECK(split.test().size() == 2334);
}

TEST_CASE("test access counting") {
    std::vector<Session> sessions(10, make_an_session(0, 100, 20000));
    DatasetSplit split = split_sessions(sessions, {}, 0);
    const std::size_t before = split.test_access_count();
    (void)split.test();
    CHECK(split.test_access_count() == before + 1);
}
