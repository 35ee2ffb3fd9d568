#include <doctest.h>

#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

#include "homeauth/error.hpp"
#include "homeauth/simulate.hpp"
#include "support.hpp"

using namespace homeauth;
using nlohmann::json;

namespace {

CorpusSpec small_spec(std::uint64_t seed, Separation sep = Separation::Medium, int users = 3) {
    CorpusSpec spec;
    spec.profiles = preset_profiles(users, sep, seed);
    spec.sessions_per_user = 2;
    spec.min_duration_min = 5;
    spec.max_duration_min = 8;
    spec.seed = seed;
    return spec;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const SessionLog* owner(const std::vector<SessionLog>& sessions, double t) {
    for (const auto& s : sessions) {
        if (t >= s.start && t < s.end) return &s;
    }
    return nullptr;
}

}  // namespace

TEST_CASE("same spec and seed give byte-identical corpora") {
    const auto spec = small_spec(21);
    const auto a = generate_corpus(spec);
    const auto b = generate_corpus(spec);
    CHECK(a.records == b.records);
    CHECK(a.sessions == b.sessions);
    CHECK(a.ground_truth.dump() == b.ground_truth.dump());

    testing::TempDir d1, d2;
    write_corpus(a, spec, d1.path());
    write_corpus(b, spec, d2.path());
    for (const char* f : {"records.jsonl", "sessions.csv", "registry.json", "ground_truth.json", "spec.json"}) {
        CHECK(slurp(d1 / f) == slurp(d2 / f));
        CHECK_FALSE(slurp(d1 / f).empty());
    }
    const auto other = generate_corpus(small_spec(22));
    CHECK_FALSE(other.records == a.records);
}

TEST_CASE("zero-weight device never appears") {
    auto spec = small_spec(3);
    auto& usage = spec.profiles[1].devices.at("apple_tv");
    usage.weight = 0.0;
    const auto c = generate_corpus(spec);
    std::size_t tv_other = 0;
    for (const auto& r : c.records) {
        const auto* s = owner(c.sessions, r.timestamp);
        REQUIRE(s != nullptr);
        if (r.device != "apple_tv") continue;
        CHECK(s->user != spec.profiles[1].user);
        ++tv_other;
    }
    CHECK(tv_other > 0);
    CHECK_FALSE(c.ground_truth["users"][spec.profiles[1].user]["devices"].contains("apple_tv"));
}

TEST_CASE("outgoing length means match the profile lognormal") {
    CorpusSpec spec;
    spec.profiles = preset_profiles(6, Separation::Medium, 42);
    spec.sessions_per_user = 10;
    spec.seed = 42;
    const auto c = generate_corpus(spec);
    CHECK(c.records.size() > 100000);
    CHECK(c.records.size() < 1000000);
    CHECK(c.ground_truth["records"] == c.records.size());

    std::map<std::pair<UserId, DeviceId>, std::pair<double, std::size_t>> sums;
    for (const auto& r : c.records) {
        if (r.direction != Direction::Outgoing) continue;
        auto& acc = sums[{owner(c.sessions, r.timestamp)->user, r.device}];
        acc.first += r.length;
        ++acc.second;
    }
    int checked = 0;
    for (const auto& p : spec.profiles) {
        for (const auto& [dev, u] : p.devices) {
            const auto it = sums.find({p.user, dev});
            if (it == sums.end() || it->second.second < 2000) continue;
            const double mean = it->second.first / static_cast<double>(it->second.second);
            CHECK(std::abs(mean - u.out_len.mean()) <= 0.05 * u.out_len.mean());
            ++checked;
        }
    }
    CHECK(checked >= 6);
}

TEST_CASE("session boundaries bound their packets") {
    const auto c = generate_corpus(small_spec(8));
    std::map<std::string, std::size_t> per_session;
    std::map<std::string, double> last_per_device;
    for (const auto& r : c.records) {
        const auto* s = owner(c.sessions, r.timestamp);
        REQUIRE(s != nullptr);
        ++per_session[s->session_id];
        CHECK(r.timestamp > last_per_device[r.device]);
        last_per_device[r.device] = r.timestamp;
        CHECK_NOTHROW(validate(r));
    }
    for (const auto& st : c.ground_truth["sessions"]) CHECK(per_session[st["session_id"]] == st["records"]);
    CHECK_NOTHROW(validate_sessions(c.sessions));
    CHECK(c.sessions.size() == 6);
    for (const auto& s : c.sessions) {
        CHECK(s.duration() >= 5 * 60 - 1);
        CHECK(s.duration() <= 8 * 60 + 1);
    }
}

TEST_CASE("high separation favorites are disjoint") {
    for (int n : {2, 3, 6}) {
        const auto ps = preset_profiles(n, Separation::High, 5);
        for (std::size_t i = 0; i < ps.size(); ++i) {
            for (std::size_t j = i + 1; j < ps.size(); ++j) {
                const auto a = favorite_devices(ps[i]);
                const auto b = favorite_devices(ps[j]);
                CHECK_FALSE(a.empty());
                for (const auto& d : a) CHECK(std::find(b.begin(), b.end(), d) == b.end());
            }
        }
    }
}

TEST_CASE("low separation device weights are close in total variation") {
    const auto ps = preset_profiles(6, Separation::Low, 9);
    auto normalized = [](const UserProfile& p) {
        std::map<DeviceId, double> w;
        double total = 0;
        for (const auto& [d, u] : p.devices) total += u.weight;
        for (const auto& [d, u] : p.devices) w[d] = u.weight / total;
        return w;
    };
    for (std::size_t i = 0; i < ps.size(); ++i) {
        for (std::size_t j = i + 1; j < ps.size(); ++j) {
            auto a = normalized(ps[i]), b = normalized(ps[j]);
            std::set<DeviceId> keys;
            for (const auto& [d, w] : a) keys.insert(d);
            for (const auto& [d, w] : b) keys.insert(d);
            double tv = 0;
            for (const auto& d : keys) tv += std::abs(a[d] - b[d]);
            CHECK(tv / 2.0 <= 0.1);
        }
    }
}

TEST_CASE("invalid specs are rejected before output") {
    CHECK_THROWS_AS(preset_profiles(1, Separation::High, 0), ArgumentError);
    CHECK_THROWS_AS(preset_profiles(11, Separation::High, 0), ArgumentError);

    auto spec = small_spec(1);
    spec.profiles.resize(1);
    CHECK_THROWS_AS(generate_corpus(spec), ArgumentError);

    spec = small_spec(1);
    spec.profiles[0].devices.begin()->second.out_len.sigma = 0.0;
    CHECK_THROWS_AS(generate_corpus(spec), ArgumentError);

    spec = small_spec(1);
    spec.profiles[0].tcp = 0.9;
    CHECK_THROWS_AS(generate_corpus(spec), ArgumentError);

    spec = small_spec(1);
    for (auto& [d, u] : spec.profiles[0].devices) u.weight = 0.0;
    CHECK_THROWS_AS(generate_corpus(spec), ArgumentError);

    spec = small_spec(1);
    spec.min_duration_min = 0;
    CHECK_THROWS_AS(generate_corpus(spec), ArgumentError);
}

TEST_CASE("records survive a JSONL round trip") {
    const auto c = generate_corpus(small_spec(12));
    std::stringstream ss;
    write_records(ss, c.records);
    CHECK(read_records(ss) == c.records);
}

TEST_CASE("spec JSON forms") {
    const auto spec = small_spec(4);
    const auto back = CorpusSpec::from_json(spec.to_json());
    CHECK(back.to_json() == spec.to_json());

    const auto preset = load_corpus_spec(
        json{{"preset", {{"users", 4}, {"separation", "high"}}}, {"seed", 11}, {"sessions_per_user", 3}});
    CHECK(preset.profiles.size() == 4);
    CHECK(preset.sessions_per_user == 3);
    CHECK(preset.seed == 11);
    CHECK(preset.profiles[0].user == "user1");
    CHECK_THROWS_AS(load_corpus_spec(json{{"preset", {{"users", 4}, {"separation", "extreme"}}}}), ArgumentError);
}
