#include <doctest.h>

#include "homeauth/ensemble.hpp"
#include "homeauth/error.hpp"
#include "support.hpp"

using namespace homeauth;

namespace {

const std::vector<UserId> kUsers{"u1", "u2", "u3", "u4", "u5", "u6"};

AuthScore peaked(std::size_t top, double p, double t = 0.0) {
    std::vector<double> v(kUsers.size(), (1.0 - p) / static_cast<double>(kUsers.size() - 1));
    v[top] = p;
    return make_score(t, kUsers, v);
}

AuthScore random_score(Rng& rng) {
    std::vector<double> v(kUsers.size());
    double s = 0;
    for (auto& x : v) s += x = rng.exponential(1.0);
    for (auto& x : v) x /= s;
    return make_score(rng.uniform(0, 100), kUsers, v);
}

std::vector<EnsembleDecision> decisions(std::size_t agreed, std::size_t total) {
    std::vector<EnsembleDecision> out;
    for (std::size_t i = 0; i < total; ++i) out.push_back(combine_scores(peaked(2, 0.9), peaked(i < agreed ? 2 : 5, 0.7)));
    return out;
}

}  // namespace

TEST_CASE("agreement averages the two vectors") {
    const auto d = combine_scores(peaked(2, 0.9), peaked(2, 0.7));
    REQUIRE(d.agreed());
    CHECK(d.combined->argmax_user() == "u3");
    CHECK(d.combined->score("u3") == doctest::Approx(0.8).epsilon(1e-12));
    double s = 0;
    for (double p : d.combined->probs) s += p;
    CHECK(std::abs(s - 1.0) <= 1e-9);
    CHECK(d.dev_scores.score("u3") == 0.9);
    CHECK(d.dom_scores.score("u3") == 0.7);
}

TEST_CASE("disagreement abstains") {
    const auto d = combine_scores(peaked(2, 0.9), peaked(5, 0.7));
    CHECK_FALSE(d.agreed());
    CHECK_FALSE(d.combined.has_value());
    const auto j = to_json(d);
    CHECK(j.at("outcome") == "abstain");
    CHECK(j.at("user").is_null());
    CHECK(j.at("scores").is_null());
    CHECK(j.at("dev_scores").at("scores").at("u3") == 0.9);
}

TEST_CASE("uniform scores agree on the first user") {
    const std::vector<double> flat(6, 1.0 / 6.0);
    const auto d = combine_scores(make_score(0, kUsers, flat), make_score(0, kUsers, flat));
    REQUIRE(d.agreed());
    CHECK(d.combined->argmax_user() == "u1");
    CHECK(to_json(d).at("user") == "u1");
}

TEST_CASE("minimum confidence floor") {
    CHECK(combine_scores(peaked(1, 0.9), peaked(1, 0.7), 0.75).agreed());
    CHECK_FALSE(combine_scores(peaked(1, 0.9), peaked(1, 0.5), 0.75).agreed());
}

TEST_CASE("coverage") {
    CHECK(coverage(decisions(73, 105)) == doctest::Approx(0.695).epsilon(1e-3));
    CHECK(coverage(decisions(75, 91)) == doctest::Approx(0.824).epsilon(1e-3));
    CHECK(coverage(decisions(0, 10)) == 0.0);
    CHECK(coverage(73, 105) == 73.0 / 105.0);
    CHECK_THROWS_AS(coverage(std::vector<EnsembleDecision>{}), ArgumentError);
    CHECK_THROWS_AS(coverage(0, 0), ArgumentError);
}

TEST_CASE("agreed predictions equal each member and outcomes are symmetric") {
    Rng rng(31);
    std::size_t agreed = 0, abstained = 0;
    for (int i = 0; i < 2000; ++i) {
        const auto a = random_score(rng);
        const auto b = rng.bernoulli(0.5) ? random_score(rng) : a;
        const auto ab = combine_scores(a, b);
        const auto ba = combine_scores(b, a);
        CHECK(ab.outcome == ba.outcome);
        if (ab.agreed()) {
            ++agreed;
            CHECK(ab.combined->argmax == a.argmax);
            CHECK(ab.combined->argmax == b.argmax);
            CHECK(ba.combined->argmax == ab.combined->argmax);
        } else {
            ++abstained;
            CHECK(a.argmax != b.argmax);
        }
    }
    CHECK(agreed + abstained == 2000);
    CHECK(agreed > 0);
    CHECK(abstained > 0);
}

TEST_CASE("ensemble members are validated and applied to windows") {
    const std::vector<DeviceId> devices{"tv", "hue"};
    const auto dev_schema = std::make_shared<const FeatureSchema>(Representation::DeviceOnly, devices,
                                                                  std::vector<std::string>{"a.com", "b.com"});
    const auto dom_schema = std::make_shared<const FeatureSchema>(dev_schema->with_kind(Representation::DomainOnly));

    // tv traffic to a.com belongs to alice, hue traffic to b.com to bob.
    std::vector<ObservationWindow> ws;
    for (int i = 0; i < 20; ++i) {
        const bool alice = i % 2 == 0;
        ObservationWindow w;
        w.t_end = 100;
        w.label = alice ? "alice" : "bob";
        for (int k = 0; k < 3 + i % 4; ++k)
            w.records.push_back(testing::record(k, alice ? "tv" : "hue", Direction::Outgoing, Protocol::Tcp,
                                                static_cast<std::uint32_t>(100 + k), alice ? "a.com" : "b.com"));
        ws.push_back(std::move(w));
    }
    const auto dev = fit_random_forest(make_training_set(extract(ws, dev_schema)), ForestParams{10, 1});
    const auto dom = fit_random_forest(make_training_set(extract(ws, dom_schema)), ForestParams{10, 1});
    const EnsembleModel ens(dev, dom);
    const auto d = ensemble_predict(ens, ws[0]);
    REQUIRE(d.agreed());
    CHECK(d.combined->argmax_user() == "alice");
    CHECK(d.t == 100);
    CHECK(ensemble_predict(ens, ws[1]).combined->argmax_user() == "bob");

    CHECK_THROWS_AS(EnsembleModel(dom, dev), SchemaError);
    auto other = ws;
    other[0].label = "carol";
    const auto dom3 = fit_random_forest(make_training_set(extract(other, dom_schema)), ForestParams{3, 1});
    CHECK_THROWS_AS(EnsembleModel(dev, dom3), SchemaError);
}
