#include "homeauth/models.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "homeauth/error.hpp"
#include "homeauth/rng.hpp"
#include "tree_builder.hpp"

namespace homeauth {

using nlohmann::json;

std::string_view to_string(ModelKind k) noexcept {
    switch (k) {
        case ModelKind::LogRegL1: return "logreg";
        case ModelKind::RandomForest: return "rf";
        case ModelKind::GradBoost: return "gb";
    }
    return "?";
}

std::optional<ModelKind> parse_model_kind(std::string_view s) noexcept {
    if (s == "logreg" || s == "lr") return ModelKind::LogRegL1;
    if (s == "rf") return ModelKind::RandomForest;
    if (s == "gb") return ModelKind::GradBoost;
    return std::nullopt;
}

TrainingSet make_training_set(const FeatureMatrix& m, std::vector<UserId> user_set) {
    if (m.rows == 0) throw DataError("training set is empty");
    if (user_set.empty()) {
        std::set<UserId> distinct;
        for (const auto& l : m.labels) {
            if (l) distinct.insert(*l);
        }
        user_set.assign(distinct.begin(), distinct.end());
    }
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < user_set.size(); ++i) {
        if (!index.emplace(user_set[i], i).second) throw ArgumentError("duplicate user in user set: " + user_set[i]);
    }
    TrainingSet t;
    t.schema = m.schema;
    t.user_set = std::move(user_set);
    t.rows = m.rows;
    t.cols = m.cols;
    t.x = m.values;
    t.y.reserve(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) {
        if (!m.labels[i]) throw DataError("row " + std::to_string(i) + " has no label");
        auto it = index.find(*m.labels[i]);
        if (it == index.end()) throw DataError("label '" + *m.labels[i] + "' is not in the user set");
        t.y.push_back(it->second);
    }
    return t;
}

double AuthScore::score(std::string_view user) const {
    for (std::size_t i = 0; i < users.size(); ++i) {
        if (users[i] == user) return probs[i];
    }
    return 0.0;
}

std::size_t argmax_index(std::span<const double> v) noexcept {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

AuthScore make_score(double t, std::vector<UserId> users, std::vector<double> probs) {
    AuthScore s;
    s.t = t;
    s.argmax = argmax_index(probs);
    s.users = std::move(users);
    s.probs = std::move(probs);
    return s;
}

json to_json(const AuthScore& s) {
    json scores = json::object();
    for (std::size_t i = 0; i < s.users.size(); ++i) scores[s.users[i]] = s.probs[i];
    return json{{"t", s.t}, {"user", s.argmax_user()}, {"scores", std::move(scores)}};
}

namespace {

void softmax_inplace(std::span<double> z) {
    const double mx = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (auto& v : z) {
        v = std::exp(v - mx);
        total += v;
    }
    for (auto& v : z) v /= total;
}

void require_width(const TrainingSet& t) {
    if (t.rows == 0) throw ArgumentError("training set is empty");
    if (t.cols == 0) throw ArgumentError("training set has no feature columns");
    if (t.user_set.empty()) throw ArgumentError("training set has an empty user set");
    if (t.schema && t.schema->width() != t.cols) throw ArgumentError("training width differs from schema width");
}

}  // namespace

TrainedModel::TrainedModel(ModelKind kind, std::vector<UserId> user_set, SchemaPtr schema, json hyperparameters,
                           std::uint64_t seed, Parameters params)
    : kind_(kind),
      users_(std::move(user_set)),
      schema_(std::move(schema)),
      hyper_(std::move(hyperparameters)),
      seed_(seed),
      params_(std::move(params)) {
    if (!schema_) throw ArgumentError("model requires a schema");
}

std::vector<double> TrainedModel::probabilities(std::span<const double> x) const {
    const std::size_t d = schema_->width();
    if (x.size() != d) {
        throw SchemaError("feature width mismatch: model expects " + std::to_string(d) + ", got " +
                          std::to_string(x.size()));
    }
    const std::size_t m = users_.size();
    std::vector<double> out(m, 0.0);
    if (const auto* lin = std::get_if<Linear>(&params_)) {
        std::vector<double> z(d);
        for (std::size_t j = 0; j < d; ++j) z[j] = lin->scale[j] > 0.0 ? (x[j] - lin->mean[j]) / lin->scale[j] : 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            double s = lin->bias[k];
            const double* w = lin->weights.data() + k * d;
            for (std::size_t j = 0; j < d; ++j) s += w[j] * z[j];
            out[k] = s;
        }
        softmax_inplace(out);
    } else if (const auto* forest = std::get_if<Forest>(&params_)) {
        for (const auto& tree : forest->trees) {
            auto leaf = tree.evaluate(x);
            for (std::size_t k = 0; k < m; ++k) out[k] += leaf[k];
        }
        double total = 0.0;
        for (double v : out) total += v;
        for (auto& v : out) v /= total;
    } else {
        const auto& boost = std::get<Boost>(params_);
        out = boost.init;
        for (const auto& stage : boost.stages) {
            for (std::size_t k = 0; k < m; ++k) out[k] += boost.learning_rate * stage[k].evaluate(x)[0];
        }
        softmax_inplace(out);
    }
    return out;
}

json TrainedModel::to_json() const {
    json j;
    j["format"] = "homeauth-model";
    j["version"] = kModelFormatVersion;
    j["kind"] = std::string(to_string(kind_));
    j["user_set"] = users_;
    j["schema"] = schema_->to_json();
    j["hyperparameters"] = hyper_;
    j["seed"] = seed_;
    j["rng"] = kRngName;
    if (const auto* lin = std::get_if<Linear>(&params_)) {
        j["normalization"] = json{{"type", "zscore"}, {"mean", lin->mean}, {"std", lin->scale}};
        j["parameters"] = json{{"weights", lin->weights}, {"bias", lin->bias}};
    } else if (const auto* forest = std::get_if<Forest>(&params_)) {
        j["normalization"] = json{{"type", "identity"}};
        json trees = json::array();
        for (const auto& t : forest->trees) trees.push_back(t.to_json());
        j["parameters"] = json{{"trees", std::move(trees)}};
    } else {
        const auto& boost = std::get<Boost>(params_);
        j["normalization"] = json{{"type", "identity"}};
        json stages = json::array();
        for (const auto& stage : boost.stages) {
            json per_class = json::array();
            for (const auto& t : stage) per_class.push_back(t.to_json());
            stages.push_back(std::move(per_class));
        }
        j["parameters"] = json{{"init", boost.init}, {"learning_rate", boost.learning_rate}, {"stages", std::move(stages)}};
    }
    return j;
}

namespace {

const json& field(const json& j, const char* name, const char* where = "model") {
    if (!j.is_object()) throw SchemaError(std::string(where) + ": expected an object");
    auto it = j.find(name);
    if (it == j.end()) throw SchemaError(std::string(where) + ": missing field '" + name + "'");
    return *it;
}

}  // namespace

TrainedModel TrainedModel::from_json(const json& j) {
    try {
        const int version = field(j, "version").get<int>();
        if (version != kModelFormatVersion) {
            throw SchemaError("unsupported model version " + std::to_string(version) + " (expected " +
                              std::to_string(kModelFormatVersion) + ")");
        }
        const auto kind_name = field(j, "kind").get<std::string>();
        const auto kind = parse_model_kind(kind_name);
        if (!kind) throw SchemaError("model: unknown kind '" + kind_name + "'");
        auto users = field(j, "user_set").get<std::vector<UserId>>();
        if (users.empty()) throw SchemaError("model: empty user_set");
        auto schema = std::make_shared<const FeatureSchema>(FeatureSchema::from_json(field(j, "schema")));
        const std::size_t d = schema->width();
        const std::size_t m = users.size();
        const json& hyper = field(j, "hyperparameters");
        const auto seed = field(j, "seed").get<std::uint64_t>();
        const json& norm = field(j, "normalization");
        const json& params = field(j, "parameters");

        Parameters p;
        switch (*kind) {
            case ModelKind::LogRegL1: {
                Linear lin;
                lin.mean = field(norm, "mean", "normalization").get<std::vector<double>>();
                lin.scale = field(norm, "std", "normalization").get<std::vector<double>>();
                lin.weights = field(params, "weights", "parameters").get<std::vector<double>>();
                lin.bias = field(params, "bias", "parameters").get<std::vector<double>>();
                if (lin.mean.size() != d || lin.scale.size() != d || lin.weights.size() != m * d ||
                    lin.bias.size() != m) {
                    throw SchemaError("model: linear parameter sizes do not match schema and user_set");
                }
                p = std::move(lin);
                break;
            }
            case ModelKind::RandomForest: {
                Forest forest;
                for (const auto& t : field(params, "trees", "parameters")) forest.trees.push_back(DecisionTree::from_json(t, m));
                if (forest.trees.empty()) throw SchemaError("model: forest has no trees");
                p = std::move(forest);
                break;
            }
            case ModelKind::GradBoost: {
                Boost boost;
                boost.init = field(params, "init", "parameters").get<std::vector<double>>();
                boost.learning_rate = field(params, "learning_rate", "parameters").get<double>();
                if (boost.init.size() != m) throw SchemaError("model: boost init size does not match user_set");
                for (const auto& stage : field(params, "stages", "parameters")) {
                    if (stage.size() != m) throw SchemaError("model: boost stage has wrong class count");
                    std::vector<DecisionTree> trees;
                    for (const auto& t : stage) trees.push_back(DecisionTree::from_json(t, 1));
                    boost.stages.push_back(std::move(trees));
                }
                p = std::move(boost);
                break;
            }
        }
        // Reject split indices beyond the schema so prediction cannot read out of range.
        auto check = [&](const DecisionTree& t) {
            for (const auto& n : t.nodes()) {
                if (n.feature >= 0 && static_cast<std::size_t>(n.feature) >= d) {
                    throw SchemaError("model: tree feature index out of range");
                }
            }
        };
        if (auto* f = std::get_if<Forest>(&p)) std::for_each(f->trees.begin(), f->trees.end(), check);
        if (auto* b = std::get_if<Boost>(&p)) {
            for (const auto& s : b->stages) std::for_each(s.begin(), s.end(), check);
        }
        return TrainedModel(*kind, std::move(users), std::move(schema), hyper, seed, std::move(p));
    } catch (const json::exception& e) {
        throw SchemaError(std::string("model: ") + e.what());
    }
}

namespace logreg {

double smooth_loss(std::span<const double> x, std::size_t rows, std::size_t cols, std::span<const std::size_t> y,
                   std::size_t classes, std::span<const double> params, std::vector<double>* grad) {
    const std::size_t stride = cols + 1;
    if (grad) grad->assign(classes * stride, 0.0);
    std::vector<double> p(classes);
    double loss = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        const double* xi = x.data() + i * cols;
        for (std::size_t k = 0; k < classes; ++k) {
            const double* w = params.data() + k * stride;
            double s = w[cols];
            for (std::size_t j = 0; j < cols; ++j) s += w[j] * xi[j];
            p[k] = s;
        }
        const double mx = *std::max_element(p.begin(), p.end());
        double total = 0.0;
        for (auto& v : p) total += std::exp(v - mx);
        const double lse = mx + std::log(total);
        loss += lse - p[y[i]];
        if (grad) {
            for (std::size_t k = 0; k < classes; ++k) {
                const double r = std::exp(p[k] - lse) - (y[i] == k ? 1.0 : 0.0);
                double* g = grad->data() + k * stride;
                for (std::size_t j = 0; j < cols; ++j) g[j] += r * xi[j];
                g[cols] += r;
            }
        }
    }
    const double n = static_cast<double>(rows);
    if (grad) {
        for (auto& g : *grad) g /= n;
    }
    return loss / n;
}

}  // namespace logreg

TrainedModel fit_logreg_l1(const TrainingSet& train, const LogRegParams& p) {
    require_width(train);
    if (!(p.lambda >= 0.0)) throw ArgumentError("lambda must be >= 0");
    if (p.epochs < 1) throw ArgumentError("epochs must be >= 1");
    if (!(p.learning_rate > 0.0)) throw ArgumentError("learning rate must be > 0");
    const std::size_t n = train.rows, d = train.cols, m = train.user_set.size();

    TrainedModel::Linear lin;
    lin.mean.assign(d, 0.0);
    lin.scale.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) lin.mean[j] += train.x[i * d + j];
    }
    for (auto& v : lin.mean) v /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            const double c = train.x[i * d + j] - lin.mean[j];
            lin.scale[j] += c * c;
        }
    }
    for (auto& v : lin.scale) {
        v = std::sqrt(v / static_cast<double>(n));
        if (v < 1e-12) v = 0.0;
    }
    std::vector<double> z(n * d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            z[i * d + j] = lin.scale[j] > 0.0 ? (train.x[i * d + j] - lin.mean[j]) / lin.scale[j] : 0.0;
        }
    }

    const std::size_t stride = d + 1;
    std::vector<double> params(m * stride, 0.0);
    std::vector<double> grad;
    const double shrink = p.learning_rate * p.lambda;
    auto diverged = [&] {
        throw TrainingError("logistic regression diverged (non-finite loss); try a smaller learning rate");
    };
    for (int epoch = 0; epoch < p.epochs; ++epoch) {
        const double loss = logreg::smooth_loss(z, n, d, train.y, m, params, &grad);
        if (!std::isfinite(loss)) diverged();
        for (std::size_t k = 0; k < m; ++k) {
            double* w = params.data() + k * stride;
            const double* g = grad.data() + k * stride;
            for (std::size_t j = 0; j < d; ++j) {
                const double v = w[j] - p.learning_rate * g[j];
                w[j] = v > shrink ? v - shrink : (v < -shrink ? v + shrink : 0.0);
            }
            w[d] -= p.learning_rate * g[d];
        }
    }
    const double final_loss = logreg::smooth_loss(z, n, d, train.y, m, params, nullptr);
    if (!std::isfinite(final_loss)) diverged();
    spdlog::debug("logreg: final loss {:.6f}", final_loss);

    lin.weights.resize(m * d);
    lin.bias.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
        std::copy_n(params.data() + k * stride, d, lin.weights.data() + k * d);
        lin.bias[k] = params[k * stride + d];
    }
    json hyper{{"lambda", p.lambda}, {"epochs", p.epochs}, {"learning_rate", p.learning_rate}};
    return TrainedModel(ModelKind::LogRegL1, train.user_set, train.schema, std::move(hyper), p.seed, std::move(lin));
}

TrainedModel fit_random_forest(const TrainingSet& train, const ForestParams& p, Exec exec) {
    require_width(train);
    if (p.n_trees < 1) throw ArgumentError("n_trees must be >= 1");
    const std::size_t n = train.rows, d = train.cols, m = train.user_set.size();
    const auto max_features = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));

    TrainedModel::Forest forest;
    forest.trees.resize(static_cast<std::size_t>(p.n_trees));
    auto grow = [&](std::size_t t) {
        Rng rng(derive_seed(p.seed, t));
        std::vector<std::size_t> sample(n);
        for (auto& s : sample) s = rng.below(n);
        forest.trees[t] = detail::grow_classification_tree(train.x, d, train.y, m, std::move(sample), max_features, rng);
    };
    const auto count = static_cast<std::int64_t>(forest.trees.size());
    if (exec == Exec::Serial) {
        for (std::int64_t t = 0; t < count; ++t) grow(static_cast<std::size_t>(t));
    } else {
        std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
        for (std::int64_t t = 0; t < count; ++t) {
            try {
                grow(static_cast<std::size_t>(t));
            } catch (...) {
#pragma omp critical
                if (!failure) failure = std::current_exception();
            }
        }
        if (failure) std::rethrow_exception(failure);
    }
    json hyper{{"n_trees", p.n_trees}, {"max_features", max_features}, {"criterion", "gini"}};
    return TrainedModel(ModelKind::RandomForest, train.user_set, train.schema, std::move(hyper), p.seed,
                        std::move(forest));
}

namespace {

double deviance(std::span<const double> raw, std::span<const std::size_t> y, std::size_t m) {
    double loss = 0.0;
    const std::size_t n = y.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double* r = raw.data() + i * m;
        const double mx = *std::max_element(r, r + m);
        double total = 0.0;
        for (std::size_t k = 0; k < m; ++k) total += std::exp(r[k] - mx);
        loss += mx + std::log(total) - r[y[i]];
    }
    return loss / static_cast<double>(n);
}

}  // namespace

TrainedModel fit_grad_boost(const TrainingSet& train, const BoostParams& p, Exec exec, std::vector<double>* loss_trace) {
    require_width(train);
    if (p.n_stages < 1) throw ArgumentError("n_stages must be >= 1");
    if (!(p.learning_rate > 0.0 && p.learning_rate <= 1.0)) throw ArgumentError("learning rate must be in (0, 1]");
    if (p.max_depth < 1) throw ArgumentError("max_depth must be >= 1");
    const std::size_t n = train.rows, d = train.cols, m = train.user_set.size();

    TrainedModel::Boost boost;
    boost.learning_rate = p.learning_rate;
    boost.init.assign(m, 0.0);
    {
        std::vector<double> counts(m, 0.0);
        for (auto y : train.y) counts[y] += 1.0;
        for (std::size_t k = 0; k < m; ++k) {
            boost.init[k] = std::log(std::max(counts[k] / static_cast<double>(n), 1e-12));
        }
    }
    std::vector<double> raw(n * m);
    for (std::size_t i = 0; i < n; ++i) std::copy(boost.init.begin(), boost.init.end(), raw.begin() + i * m);
    if (loss_trace) {
        loss_trace->clear();
        loss_trace->push_back(deviance(raw, train.y, m));
    }

    const detail::PresortedColumns sorted(train.x, n, d);
    const double factor = static_cast<double>(m - 1) / static_cast<double>(m);
    std::vector<double> prob(n * m);
    boost.stages.reserve(static_cast<std::size_t>(p.n_stages));

    for (int s = 0; s < p.n_stages; ++s) {
        for (std::size_t i = 0; i < n; ++i) {
            std::copy_n(raw.data() + i * m, m, prob.data() + i * m);
            softmax_inplace(std::span<double>(prob.data() + i * m, m));
        }
        std::vector<DecisionTree> stage(m);
        auto fit_class = [&](std::size_t k) {
            std::vector<double> residual(n);
            for (std::size_t i = 0; i < n; ++i) residual[i] = (train.y[i] == k ? 1.0 : 0.0) - prob[i * m + k];
            const detail::LeafValueFn leaf = [&](std::span<const std::size_t> samples) {
                double num = 0.0, den = 0.0;
                for (auto i : samples) {
                    const double r = residual[i];
                    num += r;
                    den += std::abs(r) * (1.0 - std::abs(r));
                }
                if (std::abs(den) < 1e-150) return 0.0;
                return factor * num / den;
            };
            stage[k] = detail::grow_regression_tree(train.x, n, d, sorted, residual, p.max_depth, leaf);
        };
        const auto classes = static_cast<std::int64_t>(m);
        if (exec == Exec::Serial || m == 1) {
            for (std::int64_t k = 0; k < classes; ++k) fit_class(static_cast<std::size_t>(k));
        } else {
            std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
            for (std::int64_t k = 0; k < classes; ++k) {
                try {
                    fit_class(static_cast<std::size_t>(k));
                } catch (...) {
#pragma omp critical
                    if (!failure) failure = std::current_exception();
                }
            }
            if (failure) std::rethrow_exception(failure);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = train.row(i);
            for (std::size_t k = 0; k < m; ++k) raw[i * m + k] += p.learning_rate * stage[k].evaluate(row)[0];
        }
        boost.stages.push_back(std::move(stage));
        if (loss_trace) loss_trace->push_back(deviance(raw, train.y, m));
    }

    json hyper{{"n_stages", p.n_stages}, {"learning_rate", p.learning_rate}, {"max_depth", p.max_depth}};
    return TrainedModel(ModelKind::GradBoost, train.user_set, train.schema, std::move(hyper), p.seed, std::move(boost));
}

namespace {

template <class T>
void read_opt(const json& cfg, std::initializer_list<const char*> keys, T& out) {
    for (const char* k : keys) {
        if (auto it = cfg.find(k); it != cfg.end()) {
            try {
                out = it->get<T>();
            } catch (const json::exception&) {
                throw ArgumentError(std::string("hyperparameter '") + k + "' has the wrong type");
            }
            return;
        }
    }
}

void warn_unknown(const json& cfg, std::initializer_list<const char*> known) {
    for (auto it = cfg.begin(); it != cfg.end(); ++it) {
        bool ok = it.key() == "kind";
        for (const char* k : known) ok = ok || it.key() == k;
        if (!ok) spdlog::warn("ignoring unknown hyperparameter '{}'", it.key());
    }
}

}  // namespace

TrainedModel fit_model(ModelKind kind, const TrainingSet& train, const json& config, Exec exec) {
    const json cfg = config.is_null() ? json::object() : config;
    if (!cfg.is_object()) throw ArgumentError("hyperparameters must be a JSON object");
    switch (kind) {
        case ModelKind::LogRegL1: {
            LogRegParams p;
            read_opt(cfg, {"lambda"}, p.lambda);
            read_opt(cfg, {"epochs"}, p.epochs);
            read_opt(cfg, {"learning_rate", "lr"}, p.learning_rate);
            read_opt(cfg, {"seed"}, p.seed);
            warn_unknown(cfg, {"lambda", "epochs", "learning_rate", "lr", "seed"});
            return fit_logreg_l1(train, p);
        }
        case ModelKind::RandomForest: {
            ForestParams p;
            read_opt(cfg, {"n_trees", "n_estimators"}, p.n_trees);
            read_opt(cfg, {"seed"}, p.seed);
            warn_unknown(cfg, {"n_trees", "n_estimators", "seed"});
            return fit_random_forest(train, p, exec);
        }
        case ModelKind::GradBoost: {
            BoostParams p;
            read_opt(cfg, {"n_stages", "n_estimators"}, p.n_stages);
            read_opt(cfg, {"learning_rate", "lr"}, p.learning_rate);
            read_opt(cfg, {"max_depth"}, p.max_depth);
            read_opt(cfg, {"seed"}, p.seed);
            warn_unknown(cfg, {"n_stages", "n_estimators", "learning_rate", "lr", "max_depth", "seed"});
            return fit_grad_boost(train, p, exec);
        }
    }
    throw InternalError("unknown model kind");
}

AuthScore predict_proba(const TrainedModel& model, const FeatureVector& x) {
    if (x.schema && !(*x.schema == *model.schema())) {
        throw SchemaError("feature schema mismatch: model expects width " + std::to_string(model.schema()->width()) +
                          " (" + std::string(to_string(model.schema()->kind())) + "), got width " +
                          std::to_string(x.schema->width()) + " (" + std::string(to_string(x.schema->kind())) + ")");
    }
    return make_score(x.t, model.user_set(), model.probabilities(x.values));
}

std::string serialize_model(const TrainedModel& model) { return model.to_json().dump(); }

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write model file " + path.string());
    out << serialize_model(model) << '\n';
    if (!out) throw DataError("failed writing model file " + path.string());
}

TrainedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError("model file " + path.string() + " is not valid JSON: " + e.what());
    }
    return TrainedModel::from_json(j);
}

}  // namespace homeauth
