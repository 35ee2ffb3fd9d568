#include <doctest.h>

#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

#include "cli.hpp"
#include "homeauth/pcap.hpp"
#include "homeauth/simulate.hpp"
#include "fixtures/pcap_fixtures.hpp"
#include "support.hpp"

using namespace homeauth;
using nlohmann::json;

namespace {

struct Result {
    int code;
    std::string out;
};

/// Runs the CLI in-process with stdout and stderr captured.
Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "homeauth");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    struct Restore {
        std::streambuf* out;
        std::streambuf* err;
        ~Restore() {
            std::cout.rdbuf(out);
            std::cerr.rdbuf(err);
        }
    } restore{std::cout.rdbuf(out.rdbuf()), std::cerr.rdbuf(err.rdbuf())};
    const int code = cli::run(static_cast<int>(argv.size()), argv.data());
    return {code, out.str() + err.str()};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t line_count(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) ++n;
    return n;
}

void write(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

template <std::size_t N>
void write_bytes(const std::filesystem::path& p, const unsigned char (&bytes)[N]) {
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes), N);
}

/// One 30-minute session of simulated traffic, plus a two-user corpus.
struct Workspace {
    testing::TempDir dir;
    Workspace() {
        write(dir / "spec.json", json{{"preset", {{"users", 3}, {"separation", "high"}}},
                                      {"seed", 5},
                                      {"sessions_per_user", 2},
                                      {"min_duration_min", 30},
                                      {"max_duration_min", 30}}
                                     .dump());
        REQUIRE(run({"simulate", "--spec", (dir / "spec.json").string(), "--out-dir", (dir / "corpus").string()})
                    .code == 0);
    }
    std::string p(const std::string& name) const { return (dir / name).string(); }
    std::string corpus(const std::string& name) const { return (dir / "corpus" / name).string(); }
};

}  // namespace

TEST_CASE("help and usage errors") {
    CHECK(run({"--help"}).code == cli::kOk);
    CHECK(run({"extract", "--help"}).code == cli::kOk);
    CHECK(run({}).code == cli::kUsage);
    CHECK(run({"frobnicate"}).code == cli::kUsage);
    CHECK(run({"train", "--model", "rf"}).code == cli::kUsage);
}

TEST_CASE("convert") {
    testing::TempDir dir;
    write(dir / "registry.json",
          R"({"02:00:00:00:00:01":"echo_dot","02:00:00:00:00:02":"smart_tv","device_order":["echo_dot","smart_tv"]})");
    write_bytes(dir / "le.pcap", fixtures::kLittleEndianMicro);
    const auto r = run({"convert", "--pcap", (dir / "le.pcap").string(), "--registry", (dir / "registry.json").string(),
                        "--out", (dir / "out.jsonl").string(), "--dns-out", (dir / "dns.json").string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("unregistered=1") != std::string::npos);
    const auto expect = parse_pcap(dir / "le.pcap", DeviceRegistry::load(dir / "registry.json"));
    CHECK(line_count(dir / "out.jsonl") == expect.records.size());
    const auto records = read_records(dir / "out.jsonl");
    REQUIRE(records.size() > 1);
    CHECK(records[1].domain == "amazon.com");
    CHECK(json::parse(slurp(dir / "dns.json")).size() == 2);

    // Header only: no records, success.
    std::string header(reinterpret_cast<const char*>(fixtures::kLittleEndianMicro), 24);
    write(dir / "empty.pcap", header);
    CHECK(run({"convert", "--pcap", (dir / "empty.pcap").string(), "--registry", (dir / "registry.json").string(),
               "--out", (dir / "empty.jsonl").string()})
              .code == 0);
    CHECK(slurp(dir / "empty.jsonl").empty());

    header[0] = 'X';
    write(dir / "bad.pcap", header);
    const auto bad = run({"convert", "--pcap", (dir / "bad.pcap").string(), "--registry",
                          (dir / "registry.json").string(), "--out", (dir / "bad.jsonl").string()});
    CHECK(bad.code == cli::kData);
    CHECK(bad.out.find("magic") != std::string::npos);
}

TEST_CASE("extract, train and score") {
    Workspace ws;
    // One 30-minute session, five-minute windows.
    {
        std::ifstream in(ws.corpus("sessions.csv"));
        std::string header, first;
        std::getline(in, header);
        std::getline(in, first);
        write(ws.dir / "one.csv", header + "\n" + first + "\n");
    }
    auto r = run({"extract", "--records", ws.corpus("records.jsonl"), "--sessions", ws.p("one.csv"), "--delta", "5",
                  "--repr", "device", "--registry", ws.corpus("registry.json"), "--out", ws.p("one.csv.features")});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("rows=26 cols=420") != std::string::npos);

    r = run({"extract", "--records", ws.corpus("records.jsonl"), "--sessions", ws.corpus("sessions.csv"), "--delta",
             "5", "--repr", "colors", "--out", ws.p("x.csv")});
    CHECK(r.code == cli::kUsage);

    for (const char* rep : {"device", "domain", "both"}) {
        r = run({"extract", "--records", ws.corpus("records.jsonl"), "--sessions", ws.corpus("sessions.csv"), "--delta",
                 "5", "--repr", rep, "--registry", ws.corpus("registry.json"), "--out", ws.p(std::string(rep) + ".csv")});
        REQUIRE(r.code == 0);
    }
    const auto dev = FeatureSchema::load(ws.dir / "device.schema.json");
    const auto dom = FeatureSchema::load(ws.dir / "domain.schema.json");
    const auto both = FeatureSchema::load(ws.dir / "both.schema.json");
    CHECK(both.width() == dev.width() + dom.width());

    write(ws.dir / "rf.json", R"({"n_trees": 20, "seed": 3})");
    for (const char* out : {"m1.json", "m2.json"}) {
        REQUIRE(run({"train", "--features", ws.p("device.csv"), "--model", "rf", "--config", ws.p("rf.json"), "--out",
                     ws.p(out)})
                    .code == 0);
    }
    CHECK(slurp(ws.dir / "m1.json") == slurp(ws.dir / "m2.json"));

    write(ws.dir / "rf2000.json", R"({"n_trees": 2000})");
    REQUIRE(run({"train", "--features", ws.p("one.csv.features"), "--model", "rf", "--config", ws.p("rf2000.json"),
                 "--schema", ws.p("one.csv.schema.json"), "--out", ws.p("single.json")})
                .code == cli::kData);

    REQUIRE(run({"train", "--features", ws.p("domain.csv"), "--model", "rf", "--config", ws.p("rf2000.json"), "--out",
                 ws.p("big.json")})
                .code == 0);
    CHECK(json::parse(slurp(ws.dir / "big.json"))["parameters"]["trees"].size() == 2000);
    CHECK(run({"train", "--features", ws.p("device.csv"), "--model", "svm", "--out", ws.p("svm.json")}).code ==
          cli::kUsage);

    REQUIRE(run({"train", "--features", ws.p("domain.csv"), "--model", "gb", "--out", ws.p("dom.json"), "--seed", "1"})
                .code == 0);
    r = run({"score", "--model", ws.p("m1.json"), "--records", ws.corpus("records.jsonl"), "--delta", "5", "--out",
             ws.p("scores.jsonl")});
    REQUIRE(r.code == 0);
    CHECK(line_count(ws.dir / "scores.jsonl") > 100);
    r = run({"score", "--ensemble", ws.p("m1.json"), ws.p("dom.json"), "--records", ws.corpus("records.jsonl"),
             "--delta", "5", "--out", ws.p("decisions.jsonl")});
    REQUIRE(r.code == 0);
    std::ifstream dec(ws.dir / "decisions.jsonl");
    std::string first;
    std::getline(dec, first);
    CHECK(json::parse(first).contains("outcome"));
    CHECK(run({"score", "--model", ws.p("m1.json"), "--records", ws.corpus("records.jsonl"), "--delta", "5", "--repr"})
              .code == cli::kUsage);
    CHECK(run({"score", "--ensemble", ws.p("dom.json"), ws.p("m1.json"), "--records", ws.corpus("records.jsonl"),
               "--delta", "5"})
              .code == cli::kData);
}

TEST_CASE("simulate and evaluate") {
    Workspace ws;
    const auto gt = json::parse(slurp(ws.dir / "corpus" / "ground_truth.json"));
    CHECK(line_count(ws.dir / "corpus" / "records.jsonl") == gt["records"].get<std::size_t>());
    REQUIRE(run({"simulate", "--spec", ws.p("spec.json"), "--out-dir", ws.p("again")}).code == 0);
    CHECK(slurp(ws.dir / "again" / "records.jsonl") == slurp(ws.dir / "corpus" / "records.jsonl"));

    write(ws.dir / "bad_spec.json", R"({"preset": {"users": 1, "separation": "high"}})");
    CHECK(run({"simulate", "--spec", ws.p("bad_spec.json"), "--out-dir", ws.p("bad")}).code == cli::kUsage);

    write(ws.dir / "exp.json", json{{"records", "corpus/records.jsonl"},
                                    {"sessions", "corpus/sessions.csv"},
                                    {"registry", "corpus/registry.json"},
                                    {"representations", {"device", "domain"}},
                                    {"deltas_min", {5, 10, 15}},
                                    {"models", {"rf"}},
                                    {"ensembles", json::array({json::array({"rf", "rf"})})},
                                    {"k", 2},
                                    {"seed", 1},
                                    {"hyperparameters", {{"rf", {{"n_trees", 5}}}}}}
                                       .dump());
    REQUIRE(run({"evaluate", "--config", ws.p("exp.json"), "--out", ws.p("report")}).code == 0);
    CHECK(line_count(ws.dir / "report" / "metrics.csv") == 1 + 3 * (2 * 1 + 1));
    CHECK(std::filesystem::exists(ws.dir / "report" / "confusion_device_d10_rf.csv"));
    CHECK(std::filesystem::exists(ws.dir / "report" / "roc_domain_d15_rf.csv"));
    CHECK(std::filesystem::exists(ws.dir / "report" / "summary.json"));
    std::ifstream metrics(ws.dir / "report" / "metrics.csv");
    std::string header;
    std::getline(metrics, header);
    CHECK(header.find(",coverage,") != std::string::npos);

    write(ws.dir / "broken.json", "{\"records\": ");
    CHECK(run({"evaluate", "--config", ws.p("broken.json"), "--out", ws.p("r2")}).code == cli::kUsage);
}
