#include <doctest.h>

#include <cmath>
#include <sstream>

#include "homeauth/error.hpp"
#include "homeauth/rng.hpp"
#include "homeauth/sessions.hpp"
#include "support.hpp"

using namespace homeauth;

namespace {

SessionLog session(double start, double minutes, std::string user = "u1", std::string id = "s1") {
    return SessionLog{std::move(id), std::move(user), start, start + minutes * 60.0};
}

}  // namespace

TEST_CASE("window counts") {
    CHECK(generate_windows(session(0, 30), 300, 60).size() == 26);
    CHECK(generate_windows(session(1000, 3), 300, 60).size() == 1);
    CHECK(generate_windows(session(1000, 5), 300, 60).size() == 1);
    const auto short_session = generate_windows(session(1000, 3), 300, 60);
    CHECK(short_session[0].t_start == 1000);
    CHECK(short_session[0].t_end == 1180);
    CHECK(short_session[0].label == "u1");
    CHECK(window_count(30 * 60, 300, 60) == 26);
    CHECK(window_count(3 * 60, 300, 60) == 1);
}

TEST_CASE("window count matches the closed form") {
    Rng rng(3);
    for (int i = 0; i < 500; ++i) {
        const double delta = 60.0 * static_cast<double>(1 + rng.below(30));
        const double stride = 10.0 * static_cast<double>(1 + rng.below(12));
        const double dur = rng.uniform(1.0, 4000.0);
        const auto ws = generate_windows(session(1614592800.0, dur / 60.0), delta, stride);
        CHECK(ws.size() == window_count(dur, delta, stride));
        for (const auto& w : ws) {
            CHECK(w.t_start >= 1614592800.0);
            CHECK(w.t_end <= 1614592800.0 + dur + 1e-6);
            CHECK(w.t_end - w.t_start <= delta);
        }
    }
}

TEST_CASE("window arguments are validated") {
    CHECK_THROWS_AS(generate_windows(session(0, 30), 0, 60), ArgumentError);
    CHECK_THROWS_AS(generate_windows(session(0, 30), 300, -1), ArgumentError);
}

TEST_CASE("assign_records uses half-open intervals") {
    std::vector<PacketRecord> rs{testing::record(100, "a"), testing::record(399.999, "a"), testing::record(400, "a"),
                                 testing::record(2000, "a")};
    auto ws = generate_windows(SessionLog{"s", "u", 100, 700}, rs, 300, 300);
    REQUIRE(ws.size() == 2);
    CHECK(ws[0].records.size() == 2);
    CHECK(ws[1].records.size() == 1);
    CHECK(ws[1].records[0].timestamp == 400);
}

TEST_CASE("window contents equal a brute-force interval filter") {
    Rng rng(11);
    std::vector<PacketRecord> rs;
    for (int i = 0; i < 3000; ++i) rs.push_back(testing::record(rng.uniform(0, 4000), "d"));
    sort_by_time(rs);
    const std::vector<SessionLog> sessions{{"a", "u1", 0, 1500}, {"b", "u2", 2000, 2200}, {"c", "u1", 2500, 3900}};
    for (const auto& s : sessions) {
        for (const auto& w : generate_windows(s, rs, 600, 60)) {
            std::vector<PacketRecord> brute;
            for (const auto& r : rs) {
                if (r.timestamp >= w.t_start && r.timestamp < w.t_end) brute.push_back(r);
            }
            CHECK(w.records == brute);
        }
    }
    // A record between sessions lands in no window.
    std::vector<PacketRecord> gap{testing::record(1800, "d")};
    for (const auto& s : sessions) {
        for (const auto& w : generate_windows(s, gap, 600, 60)) CHECK(w.records.empty());
    }
}

TEST_CASE("session validation") {
    CHECK_THROWS_AS(validate_sessions(std::vector<SessionLog>{{"a", "u", 10, 10}}), DataError);
    CHECK_THROWS_AS(validate_sessions(std::vector<SessionLog>{{"a", "u", 0, 100}, {"b", "u", 50, 150}}), DataError);
    CHECK_NOTHROW(validate_sessions(std::vector<SessionLog>{{"a", "u", 0, 100}, {"b", "v", 50, 150}}));
}

TEST_CASE("ISO-8601 parsing and formatting") {
    CHECK(parse_iso8601("2021-03-01T10:00:00Z") == 1614592800.0);
    CHECK(parse_iso8601("2021-03-01 10:00:00") == 1614592800.0);
    CHECK(parse_iso8601("2021-03-01T12:00:00+02:00") == 1614592800.0);
    CHECK(parse_iso8601("2021-03-01T10:00:00.250000Z") == 1614592800.25);
    CHECK(format_iso8601(1614592800.0) == "2021-03-01T10:00:00Z");
    CHECK(std::abs(parse_iso8601(format_iso8601(1614592800.123456)) - 1614592800.123456) < 1e-6);
    CHECK_THROWS_AS(parse_iso8601("yesterday"), DataError);
}

TEST_CASE("session CSV round trip") {
    const std::vector<SessionLog> s{{"s1", "alice", 1614592800.0, 1614594600.0}, {"s2", "bob", 1614600000.5, 1614601000.0}};
    std::stringstream ss;
    write_sessions(ss, s);
    CHECK(ss.str().rfind("session_id,user,start,end\n", 0) == 0);
    CHECK(read_sessions(ss) == s);
    std::istringstream bad("session_id,user,start,end\ns1,alice,2021-03-01T10:00:00Z\n");
    CHECK_THROWS_AS(read_sessions(bad), DataError);
}
