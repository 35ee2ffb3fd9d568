#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "homeauth/ensemble.hpp"
#include "homeauth/error.hpp"
#include "homeauth/eval.hpp"
#include "homeauth/ingest.hpp"
#include "homeauth/rng.hpp"
#include "homeauth/simulate.hpp"

namespace homeauth {

using nlohmann::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

ModelKind model_kind(const std::string& s) {
    auto k = parse_model_kind(s);
    if (!k) throw ArgumentError("unknown model '" + s + "' (expected logreg, rf or gb)");
    return *k;
}

std::string delta_tag(double delta_min) {
    if (delta_min == std::floor(delta_min)) return fmt::format("{}", static_cast<long long>(delta_min));
    return fmt::format("{}", delta_min);
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw ArgumentError("experiment config must be a JSON object");
    ExperimentConfig c;
    try {
        if (auto it = j.find("simulate"); it != j.end()) c.simulate = *it;
        if (auto it = j.find("records"); it != j.end()) c.records = resolve(base_dir, it->get<std::string>());
        if (auto it = j.find("sessions"); it != j.end()) c.sessions = resolve(base_dir, it->get<std::string>());
        if (auto it = j.find("registry"); it != j.end()) c.registry = resolve(base_dir, it->get<std::string>());
        if (!c.simulate && (c.records.empty() || c.sessions.empty())) {
            throw ArgumentError("experiment config needs 'records' and 'sessions', or 'simulate'");
        }
        if (auto it = j.find("representations"); it != j.end()) {
            c.representations.clear();
            for (const auto& r : *it) {
                auto rep = parse_representation(r.get<std::string>());
                if (!rep) throw ArgumentError("unknown representation '" + r.get<std::string>() + "'");
                c.representations.push_back(*rep);
            }
        }
        if (auto it = j.find("deltas_min"); it != j.end()) c.deltas_min = it->get<std::vector<double>>();
        if (auto it = j.find("models"); it != j.end()) {
            c.models.clear();
            for (const auto& m : *it) c.models.push_back(model_kind(m.get<std::string>()));
        }
        if (auto it = j.find("ensembles"); it != j.end()) {
            for (const auto& e : *it) {
                EnsembleSpec spec;
                if (e.is_array() && e.size() == 2) {
                    spec.dev_model = model_kind(e[0].get<std::string>());
                    spec.dom_model = model_kind(e[1].get<std::string>());
                } else if (e.is_object()) {
                    spec.dev_model = model_kind(e.value("dev", std::string("gb")));
                    spec.dom_model = model_kind(e.value("dom", std::string("gb")));
                } else {
                    throw ArgumentError("ensemble entries are [dev, dom] pairs or {\"dev\":..,\"dom\":..}");
                }
                c.ensembles.push_back(spec);
            }
        }
        c.k = j.value("k", c.k);
        c.seed = j.value("seed", c.seed);
        c.min_sessions = j.value("min_sessions", c.min_sessions);
        c.stride_s = j.value("stride_s", c.stride_s);
        if (auto it = j.find("hyperparameters"); it != j.end()) c.hyperparameters = *it;
    } catch (const json::exception& e) {
        throw ArgumentError(std::string("experiment config: ") + e.what());
    }
    if (c.k < 2) throw ArgumentError("k must be >= 2");
    if (c.deltas_min.empty()) throw ArgumentError("deltas_min must not be empty");
    for (double d : c.deltas_min) {
        if (!(d > 0.0)) throw ArgumentError("deltas must be positive");
    }
    if (c.models.empty() && c.ensembles.empty()) throw ArgumentError("config lists no models or ensembles");
    if (!(c.stride_s > 0.0)) throw ArgumentError("stride_s must be positive");
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ArgumentError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return from_json(j, path.parent_path());
}

const CellResult* ExperimentReport::find(const std::string& name) const {
    for (const auto& c : cells) {
        if (c.name == name) return &c;
    }
    return nullptr;
}

namespace {

struct CellAccum {
    std::string name, representation, model;
    double delta = 0.0;
    bool ensemble = false;
    ConfusionMatrix sessions;
    ConfusionMatrix windows;
    std::vector<std::size_t> truth;
    std::vector<AuthScore> scores;
};

template <class F>
auto in_cell(const std::string& cell, F&& f) {
    try {
        return f();
    } catch (const SchemaError& e) {
        throw SchemaError("cell " + cell + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError("cell " + cell + ": " + e.what());
    } catch (const ArgumentError& e) {
        throw ArgumentError("cell " + cell + ": " + e.what());
    } catch (const TrainingError& e) {
        throw TrainingError("cell " + cell + ": " + e.what());
    }
}

json model_config(const ExperimentConfig& c, ModelKind kind, std::uint64_t fold_seed) {
    json cfg = json::object();
    if (auto it = c.hyperparameters.find(std::string(to_string(kind))); it != c.hyperparameters.end()) cfg = *it;
    if (!cfg.contains("seed")) cfg["seed"] = fold_seed;
    return cfg;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config, const std::vector<PacketRecord>& records_in,
                                const std::vector<SessionLog>& sessions_in, const std::vector<DeviceId>& device_order_in,
                                Exec exec) {
    validate_sessions(sessions_in);
    std::map<UserId, std::size_t> per_user;
    for (const auto& s : sessions_in) ++per_user[s.user];
    std::vector<SessionLog> sessions;
    for (const auto& s : sessions_in) {
        if (per_user[s.user] >= config.min_sessions) sessions.push_back(s);
    }
    std::vector<UserId> users;
    for (const auto& [u, n] : per_user) {
        if (n >= config.min_sessions) users.push_back(u);
        else spdlog::info("dropping {} ({} sessions < {})", u, n, config.min_sessions);
    }
    if (users.size() < 2) throw ArgumentError("experiment needs at least two users");
    std::map<UserId, std::size_t> user_index;
    for (std::size_t i = 0; i < users.size(); ++i) user_index[users[i]] = i;

    std::vector<PacketRecord> records = records_in;
    if (!std::is_sorted(records.begin(), records.end(),
                        [](const PacketRecord& a, const PacketRecord& b) { return a.timestamp < b.timestamp; })) {
        sort_by_time(records);
    }
    std::vector<DeviceId> device_order = device_order_in;
    if (device_order.empty()) {
        std::set<DeviceId> seen;
        for (const auto& r : records) seen.insert(r.device);
        device_order.assign(seen.begin(), seen.end());
    }

    const auto folds = kfold_by_session(sessions, config.k, config.seed);
    ExperimentReport report;
    report.users = users;
    report.sessions = sessions.size();

    for (double delta_min : config.deltas_min) {
        const std::string dtag = "d" + delta_tag(delta_min);
        std::vector<std::vector<ObservationWindow>> windows(sessions.size());
        for (std::size_t s = 0; s < sessions.size(); ++s) {
            windows[s] = generate_windows(sessions[s], records, delta_min * 60.0, config.stride_s);
        }

        std::vector<CellAccum> cells;
        std::map<std::string, std::size_t> cell_ix;
        auto cell = [&](const std::string& rep, const std::string& model, bool ens) -> CellAccum& {
            const std::string name = rep + "_" + dtag + "_" + model;
            auto [it, fresh] = cell_ix.emplace(name, cells.size());
            if (fresh) {
                cells.push_back(CellAccum{name, rep, model, delta_min, ens, ConfusionMatrix(users),
                                          ConfusionMatrix(users), {}, {}});
            }
            return cells[it->second];
        };
        for (auto rep : config.representations) {
            for (auto kind : config.models) cell(std::string(to_string(rep)), std::string(to_string(kind)), false);
        }
        for (const auto& e : config.ensembles) {
            cell("ensemble", std::string(to_string(e.dev_model)) + "+" + std::string(to_string(e.dom_model)), true);
        }

        for (std::size_t f = 0; f < folds.size(); ++f) {
            const auto& fold = folds[f];
            spdlog::info("delta {} min, fold {}/{}", delta_min, f + 1, folds.size());
            std::vector<ObservationWindow> train_windows;
            for (auto s : fold.train) train_windows.insert(train_windows.end(), windows[s].begin(), windows[s].end());
            if (train_windows.empty()) throw DataError("fold " + std::to_string(f) + " has no training windows");
            const auto vocab = build_domain_vocab(train_windows);
            const std::uint64_t fold_seed = derive_seed(config.seed, f);

            std::map<std::pair<Representation, ModelKind>, TrainedModel> fitted;
            std::map<Representation, SchemaPtr> schemas;
            std::map<Representation, TrainingSet> train_sets;
            auto get_model = [&](Representation rep, ModelKind kind) -> const TrainedModel& {
                auto key = std::make_pair(rep, kind);
                if (auto it = fitted.find(key); it != fitted.end()) return it->second;
                if (!schemas.count(rep)) {
                    schemas[rep] = std::make_shared<const FeatureSchema>(rep, device_order, vocab);
                    train_sets.emplace(rep, make_training_set(extract(train_windows, schemas[rep], exec), users));
                }
                auto model = fit_model(kind, train_sets.at(rep), model_config(config, kind, fold_seed), exec);
                return fitted.emplace(key, std::move(model)).first->second;
            };
            // Window scores per test session for one model.
            auto score_sessions = [&](const TrainedModel& model) {
                std::vector<std::vector<AuthScore>> out;
                for (auto s : fold.test) {
                    std::vector<AuthScore> scores;
                    for (const auto& w : windows[s]) scores.push_back(predict_proba(model, extract_one(w, model.schema())));
                    out.push_back(std::move(scores));
                }
                return out;
            };

            for (auto rep : config.representations) {
                for (auto kind : config.models) {
                    auto& c = cell(std::string(to_string(rep)), std::string(to_string(kind)), false);
                    in_cell(c.name, [&] {
                        const auto scored = score_sessions(get_model(rep, kind));
                        for (std::size_t i = 0; i < fold.test.size(); ++i) {
                            const std::size_t truth = user_index.at(sessions[fold.test[i]].user);
                            c.sessions.add(truth, session_prediction(scored[i]));
                            for (const auto& s : scored[i]) {
                                c.windows.add(truth, s.argmax);
                                c.truth.push_back(truth);
                                c.scores.push_back(s);
                            }
                        }
                        return 0;
                    });
                }
            }
            for (const auto& e : config.ensembles) {
                auto& c = cell("ensemble",
                               std::string(to_string(e.dev_model)) + "+" + std::string(to_string(e.dom_model)), true);
                in_cell(c.name, [&] {
                    const auto dev = score_sessions(get_model(Representation::DeviceOnly, e.dev_model));
                    const auto dom = score_sessions(get_model(Representation::DomainOnly, e.dom_model));
                    for (std::size_t i = 0; i < fold.test.size(); ++i) {
                        const std::size_t truth = user_index.at(sessions[fold.test[i]].user);
                        const std::size_t a = session_prediction(dev[i]);
                        const std::size_t b = session_prediction(dom[i]);
                        if (a == b) c.sessions.add(truth, a);
                        else c.sessions.add_abstain(truth);
                        for (std::size_t w = 0; w < dev[i].size(); ++w) {
                            const auto d = combine_scores(dev[i][w], dom[i][w]);
                            if (d.agreed()) c.windows.add(truth, d.combined->argmax);
                            else c.windows.add_abstain(truth);
                        }
                    }
                    return 0;
                });
            }
        }

        for (auto& c : cells) {
            CellResult r{c.name,
                         c.representation,
                         c.delta,
                         c.model,
                         c.sessions,
                         c.windows,
                         compute_metrics(c.sessions),
                         compute_metrics(c.windows),
                         {}};
            if (!c.ensemble) r.roc = roc_curves(c.truth, c.scores);
            report.cells.push_back(std::move(r));
        }
    }
    return report;
}

ExperimentReport run_experiment(const ExperimentConfig& config, Exec exec) {
    if (config.simulate) {
        const auto spec = load_corpus_spec(*config.simulate);
        const auto corpus = generate_corpus(spec);
        return run_experiment(config, corpus.records, corpus.sessions, corpus.registry.device_order(), exec);
    }
    auto records = read_records(config.records);
    auto sessions = read_sessions(config.sessions);
    std::vector<DeviceId> order;
    if (!config.registry.empty()) order = DeviceRegistry::load(config.registry).device_order();
    return run_experiment(config, records, sessions, order, exec);
}

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw DataError("cannot write " + p.string());
    return out;
}

json roc_json(const RocCurve& c) {
    if (!c.defined) return nullptr;
    return c.auc;
}

}  // namespace

void write_report(const ExperimentReport& report, const ExperimentConfig& config, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());

    auto metrics = open_out(dir / "metrics.csv");
    metrics << "cell,representation,delta_min,model,sessions_evaluated,sessions_abstained,coverage,"
               "session_precision,session_recall,session_f1,session_macro_f1,session_weighted_f1,"
               "windows_evaluated,windows_abstained,window_coverage,window_precision,window_recall,window_f1,"
               "window_macro_f1,micro_auc\n";
    json cells = json::object();
    for (const auto& c : report.cells) {
        const auto& s = c.session_metrics;
        const auto& w = c.window_metrics;
        const bool has_roc = c.roc.micro.defined;
        metrics << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", c.name,
                               c.representation, c.delta_min, c.model, s.evaluated, s.abstained, s.coverage,
                               s.micro.precision, s.micro.recall, s.micro.f1, s.macro.f1, s.weighted.f1, w.evaluated,
                               w.abstained, w.coverage, w.micro.precision, w.micro.recall, w.micro.f1, w.macro.f1,
                               has_roc ? fmt::format("{}", c.roc.micro.auc) : std::string());

        auto cm = open_out(dir / ("confusion_" + c.name + ".csv"));
        c.session_confusion.write_csv(cm);
        auto cmw = open_out(dir / ("confusion_" + c.name + "_windows.csv"));
        c.window_confusion.write_csv(cmw);

        json auc = json::object();
        if (!c.roc.per_user.empty()) {
            auto roc = open_out(dir / ("roc_" + c.name + ".csv"));
            roc << "curve,fpr,tpr\n";
            auto emit = [&](const RocCurve& curve) {
                for (const auto& p : curve.points) roc << fmt::format("{},{},{}\n", curve.label, p.fpr, p.tpr);
                auc[curve.label] = roc_json(curve);
            };
            for (const auto& curve : c.roc.per_user) emit(curve);
            emit(c.roc.micro);
        }
        cells[c.name] = json{{"representation", c.representation},
                             {"delta_min", c.delta_min},
                             {"model", c.model},
                             {"session", c.session_metrics.to_json()},
                             {"window", c.window_metrics.to_json()},
                             {"session_confusion", c.session_confusion.to_json()},
                             {"auc", auc}};
    }

    json reps = json::array();
    for (auto r : config.representations) reps.push_back(std::string(to_string(r)));
    json models = json::array();
    for (auto m : config.models) models.push_back(std::string(to_string(m)));
    json ens = json::array();
    for (const auto& e : config.ensembles) ens.push_back({std::string(to_string(e.dev_model)), std::string(to_string(e.dom_model))});
    json summary{{"users", report.users},
                 {"sessions", report.sessions},
                 {"config",
                  {{"representations", reps},
                   {"deltas_min", config.deltas_min},
                   {"models", models},
                   {"ensembles", ens},
                   {"k", config.k},
                   {"seed", config.seed},
                   {"min_sessions", config.min_sessions},
                   {"stride_s", config.stride_s},
                   {"hyperparameters", config.hyperparameters}}},
                 {"cells", cells}};
    auto out = open_out(dir / "summary.json");
    out << summary.dump(2) << '\n';
}

}  // namespace homeauth
