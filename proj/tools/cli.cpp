#include "cli.hpp"

#include <signal.h>

#include <fstream>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "homeauth/ensemble.hpp"
#include "homeauth/error.hpp"
#include "homeauth/eval.hpp"
#include "homeauth/features.hpp"
#include "homeauth/ingest.hpp"
#include "homeauth/log.hpp"
#include "homeauth/models.hpp"
#include "homeauth/pcap.hpp"
#include "homeauth/server.hpp"
#include "homeauth/sessions.hpp"
#include "homeauth/simulate.hpp"
#include "homeauth/stream.hpp"

namespace homeauth::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kExitCodes =
    "Exit codes: 0 ok, 1 usage error, 2 data error, 3 internal error.\n"
    "Set HOMEAUTH_LOG=trace|debug|info|warn|error|off to change log verbosity.";

json read_json_file(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw DataError("cannot open " + p.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError(p.string() + " is not valid JSON: " + e.what());
    }
}

Representation repr_arg(const std::string& s) {
    auto r = parse_representation(s);
    if (!r) throw ArgumentError("unknown representation '" + s + "' (expected device, domain or both)");
    return *r;
}

struct ConvertOpts {
    std::string pcap, registry, out, dns_out;
};

int do_convert(const ConvertOpts& o) {
    const auto registry = DeviceRegistry::load(o.registry);
    auto result = parse_pcap(fs::path(o.pcap), registry);
    auto records = annotate_domains(std::move(result.records), result.dns);
    write_records(fs::path(o.out), records);
    if (!o.dns_out.empty()) {
        std::ofstream dns(o.dns_out);
        if (!dns) throw DataError("cannot write " + o.dns_out);
        dns << result.dns.to_json().dump(2) << '\n';
    }
    const auto& c = result.counters;
    std::cout << "packets=" << c.packets << " records=" << c.records << " unregistered=" << c.unregistered
              << " malformed=" << c.malformed << " non_ip=" << c.non_ip << " dns_answers=" << c.dns_answers << '\n';
    return kOk;
}

struct ExtractOpts {
    std::string records, sessions, repr = "device", out, registry, schema;
    double delta = 25.0;
    double stride = kDefaultStrideSeconds;
};

int do_extract(const ExtractOpts& o) {
    const auto rep = repr_arg(o.repr);
    if (!(o.delta > 0.0)) throw ArgumentError("--delta must be positive");
    auto records = read_records(fs::path(o.records));
    sort_by_time(records);
    const auto sessions = read_sessions(fs::path(o.sessions));
    validate_sessions(sessions);

    std::vector<ObservationWindow> windows;
    for (const auto& s : sessions) {
        auto w = generate_windows(s, records, o.delta * 60.0, o.stride);
        std::move(w.begin(), w.end(), std::back_inserter(windows));
    }
    SchemaPtr schema;
    if (!o.schema.empty()) {
        auto frozen = FeatureSchema::load(o.schema);
        schema = std::make_shared<const FeatureSchema>(frozen.with_kind(rep));
    } else {
        std::vector<DeviceId> order;
        if (!o.registry.empty()) {
            order = DeviceRegistry::load(o.registry).device_order();
        } else {
            std::set<DeviceId> seen;
            for (const auto& r : records) seen.insert(r.device);
            order.assign(seen.begin(), seen.end());
        }
        schema = std::make_shared<const FeatureSchema>(rep, std::move(order), build_domain_vocab(windows));
    }
    const auto m = extract(windows, schema);
    write_feature_csv(fs::path(o.out), m);
    schema->save(schema_path_for(o.out));
    std::cout << "rows=" << m.rows << " cols=" << m.cols << '\n';
    return kOk;
}

struct TrainOpts {
    std::string features, model, config, out, schema;
    std::optional<std::uint64_t> seed;
};

int do_train(const TrainOpts& o) {
    const auto kind = parse_model_kind(o.model);
    if (!kind) throw ArgumentError("unknown model '" + o.model + "' (expected logreg, rf or gb)");
    const fs::path schema_path = o.schema.empty() ? schema_path_for(o.features) : fs::path(o.schema);
    auto schema = std::make_shared<const FeatureSchema>(FeatureSchema::load(schema_path));
    const auto m = read_feature_csv(fs::path(o.features), schema);
    auto train = make_training_set(m);
    if (train.user_set.size() < 2) throw DataError("training needs at least 2 distinct users in the labels");

    json hyper = json::object();
    if (!o.config.empty()) {
        const json cfg = read_json_file(o.config);
        if (!cfg.is_object()) throw ArgumentError("training config must be a JSON object");
        if (auto k = cfg.find("kind"); k != cfg.end() && k->get<std::string>() != o.model) {
            spdlog::warn("config kind '{}' ignored; --model {} wins", k->get<std::string>(), o.model);
        }
        if (auto h = cfg.find("hyperparameters"); h != cfg.end()) {
            hyper = *h;
            if (auto s = cfg.find("seed"); s != cfg.end() && !hyper.contains("seed")) hyper["seed"] = *s;
        } else {
            hyper = cfg;
            hyper.erase("kind");
        }
    }
    if (o.seed) hyper["seed"] = *o.seed;
    const auto model = fit_model(*kind, train, hyper);
    save_model(model, o.out);
    std::cout << "trained " << to_string(*kind) << " on " << train.rows << " rows, " << train.user_set.size()
              << " users\n";
    return kOk;
}

struct EvaluateOpts {
    std::string config, out;
    bool serial = false;
};

int do_evaluate(const EvaluateOpts& o) {
    const auto cfg = ExperimentConfig::load(o.config);
    const auto report = run_experiment(cfg, o.serial ? Exec::Serial : Exec::Parallel);
    write_report(report, cfg, o.out);
    for (const auto& c : report.cells) {
        std::cout << c.name << " session_f1=" << c.session_metrics.micro.f1
                  << " coverage=" << c.session_metrics.coverage << '\n';
    }
    return kOk;
}

struct SimulateOpts {
    std::string spec, out_dir;
};

int do_simulate(const SimulateOpts& o) {
    const auto spec = load_corpus_spec(read_json_file(o.spec));
    const auto corpus = generate_corpus(spec);
    write_corpus(corpus, spec, o.out_dir);
    std::cout << "records=" << corpus.records.size() << " sessions=" << corpus.sessions.size() << '\n';
    return kOk;
}

struct ModelOpts {
    std::string model;
    std::vector<std::string> ensemble;
    double min_confidence = 0.0;
    double delta = 25.0;
    double stride = kDefaultStrideSeconds;
    double tolerance = 1.0;
    std::optional<double> origin;
};

StreamConfig stream_config(const ModelOpts& o) {
    StreamConfig c;
    c.delta_s = o.delta * 60.0;
    c.stride_s = o.stride;
    c.reorder_tolerance_s = o.tolerance;
    c.origin = o.origin;
    return c;
}

void require_one_model(const ModelOpts& o) {
    if (o.model.empty() == o.ensemble.empty()) throw ArgumentError("give exactly one of --model or --ensemble");
}

std::shared_ptr<const EnsembleModel> load_ensemble(const ModelOpts& o) {
    return std::make_shared<const EnsembleModel>(load_model(o.ensemble.at(0)), load_model(o.ensemble.at(1)),
                                                 o.min_confidence);
}

struct ScoreOpts {
    ModelOpts m;
    std::string records, out;
    std::optional<double> end_time;
};

int do_score(const ScoreOpts& o) {
    require_one_model(o.m);
    auto records = read_records(fs::path(o.records));
    std::vector<StreamOutput> outs;
    if (o.m.model.empty()) {
        outs = score_stream(records, load_ensemble(o.m), stream_config(o.m), o.end_time);
    } else {
        outs = score_stream(records, std::make_shared<const TrainedModel>(load_model(o.m.model)), stream_config(o.m),
                            o.end_time);
    }
    std::ofstream file;
    if (!o.out.empty()) {
        file.open(o.out);
        if (!file) throw DataError("cannot write " + o.out);
    }
    std::ostream& out = o.out.empty() ? std::cout : file;
    for (const auto& s : outs) out << to_json(s).dump() << '\n';
    return kOk;
}

struct ServeOpts {
    ModelOpts m;
    std::string listen = "127.0.0.1:7878";
    double idle_timeout_s = 300.0;
};

int do_serve(const ServeOpts& o) {
    require_one_model(o.m);
    ServerConfig cfg;
    const auto colon = o.listen.rfind(':');
    if (colon == std::string::npos) throw ArgumentError("--listen expects host:port");
    cfg.host = o.listen.substr(0, colon);
    try {
        const int port = std::stoi(o.listen.substr(colon + 1));
        if (port < 0 || port > 65535) throw std::out_of_range("port");
        cfg.port = static_cast<std::uint16_t>(port);
    } catch (const std::exception&) {
        throw ArgumentError("invalid port in --listen '" + o.listen + "'");
    }
    cfg.stream = stream_config(o.m);
    cfg.idle_timeout = std::chrono::milliseconds(static_cast<std::int64_t>(o.idle_timeout_s * 1000.0));

    // Block termination signals in every thread; the main thread waits for them.
    sigset_t sigs;
    sigemptyset(&sigs);
    sigaddset(&sigs, SIGINT);
    sigaddset(&sigs, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &sigs, nullptr);

    std::unique_ptr<ScoreServer> server;
    if (o.m.model.empty()) server = std::make_unique<ScoreServer>(load_ensemble(o.m), cfg);
    else server = std::make_unique<ScoreServer>(std::make_shared<const TrainedModel>(load_model(o.m.model)), cfg);
    server->start();
    std::cout << "listening on " << cfg.host << ':' << server->port() << std::endl;
    int sig = 0;
    sigwait(&sigs, &sig);
    spdlog::info("signal {}, shutting down", sig);
    server->stop();
    return kOk;
}

void add_model_opts(CLI::App* cmd, ModelOpts& m) {
    cmd->add_option("--model", m.model, "Trained model file");
    cmd->add_option("--ensemble", m.ensemble, "Device model and domain model files")->expected(2);
    cmd->add_option("--min-confidence", m.min_confidence, "Ensemble floor on the agreed score")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--delta", m.delta, "Window length in minutes")->required()->check(CLI::PositiveNumber);
    cmd->add_option("--stride", m.stride, "Stride in seconds")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--tolerance", m.tolerance, "Reorder tolerance in seconds")->capture_default_str();
    cmd->add_option("--origin", m.origin, "First window start (epoch seconds); default first record");
}

}  // namespace

int run(int argc, char** argv) {
    init_logging();
    CLI::App app{"Behavioral authentication from smart-home network traffic"};
    app.footer(kExitCodes);
    app.require_subcommand(1);

    ConvertOpts convert;
    auto* c = app.add_subcommand("convert", "Decode a pcap into PacketRecord JSONL");
    c->add_option("--pcap", convert.pcap, "Input pcap")->required()->check(CLI::ExistingFile);
    c->add_option("--registry", convert.registry, "MAC-to-device registry JSON")->required()->check(CLI::ExistingFile);
    c->add_option("--out", convert.out, "Output JSONL")->required();
    c->add_option("--dns-out", convert.dns_out, "Write the mined DNS map as JSON");

    ExtractOpts ext;
    auto* e = app.add_subcommand("extract", "Window sessions and write a feature CSV (plus its schema)");
    e->add_option("--records", ext.records, "PacketRecord JSONL")->required()->check(CLI::ExistingFile);
    e->add_option("--sessions", ext.sessions, "Session CSV")->required()->check(CLI::ExistingFile);
    e->add_option("--delta", ext.delta, "Window length in minutes")->required();
    e->add_option("--repr", ext.repr, "device, domain or both")->capture_default_str();
    e->add_option("--out", ext.out, "Output CSV")->required();
    e->add_option("--stride", ext.stride, "Stride in seconds")->capture_default_str();
    e->add_option("--registry", ext.registry, "Registry JSON fixing the device column order")
        ->check(CLI::ExistingFile);
    e->add_option("--schema", ext.schema, "Reuse a saved schema (device order and domain vocabulary)")
        ->check(CLI::ExistingFile);

    TrainOpts tr;
    auto* t = app.add_subcommand("train", "Fit a classifier on a feature CSV");
    t->add_option("--features", tr.features, "Feature CSV from extract")->required()->check(CLI::ExistingFile);
    t->add_option("--model", tr.model, "logreg, rf or gb")->required();
    t->add_option("--config", tr.config, "Hyperparameter JSON")->check(CLI::ExistingFile);
    t->add_option("--out", tr.out, "Output model JSON")->required();
    t->add_option("--schema", tr.schema, "Schema JSON (default: next to the CSV)");
    t->add_option("--seed", tr.seed, "Training seed (overrides the config)");

    EvaluateOpts ev;
    auto* v = app.add_subcommand("evaluate", "Run a cross-validated experiment grid");
    v->add_option("--config", ev.config, "Experiment JSON")->required()->check(CLI::ExistingFile);
    v->add_option("--out", ev.out, "Report directory")->required();
    v->add_flag("--serial", ev.serial, "Disable parallel kernels");

    SimulateOpts sim;
    auto* s = app.add_subcommand("simulate", "Generate a synthetic labeled corpus");
    s->add_option("--spec", sim.spec, "Corpus spec JSON")->required()->check(CLI::ExistingFile);
    s->add_option("--out-dir", sim.out_dir, "Output directory")->required();

    ScoreOpts sc;
    auto* so = app.add_subcommand("score", "Stream-score a JSONL file offline");
    add_model_opts(so, sc.m);
    so->add_option("--records", sc.records, "PacketRecord JSONL")->required()->check(CLI::ExistingFile);
    so->add_option("--out", sc.out, "Output JSONL (default stdout)");
    so->add_option("--end-time", sc.end_time, "Advance the clock to this time after the last record");

    ServeOpts sv;
    auto* se = app.add_subcommand("serve", "Serve NDJSON scores over TCP");
    add_model_opts(se, sv.m);
    se->add_option("--listen", sv.listen, "host:port (port 0 picks one)")->capture_default_str();
    se->add_option("--idle-timeout", sv.idle_timeout_s, "Seconds before an idle connection is closed")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int rc = app.exit(err);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*c) return do_convert(convert);
        if (*e) return do_extract(ext);
        if (*t) return do_train(tr);
        if (*v) return do_evaluate(ev);
        if (*s) return do_simulate(sim);
        if (*so) return do_score(sc);
        if (*se) return do_serve(sv);
        return kUsage;
    } catch (const ArgumentError& err) {
        std::cerr << "error: " << err.what() << '\n';
        return kUsage;
    } catch (const DataError& err) {
        std::cerr << "error: " << err.what() << '\n';
        return kData;
    } catch (const TrainingError& err) {
        std::cerr << "error: " << err.what() << '\n';
        return kData;
    } catch (const std::exception& err) {
        std::cerr << "internal error: " << err.what() << '\n';
        return kInternal;
    }
}

}  // namespace homeauth::cli
