#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "homeauth/exec.hpp"
#include "homeauth/features.hpp"
#include "homeauth/record.hpp"

namespace homeauth {

enum class ModelKind { LogRegL1, RandomForest, GradBoost };

/// "logreg", "rf", "gb"
std::string_view to_string(ModelKind k) noexcept;
std::optional<ModelKind> parse_model_kind(std::string_view s) noexcept;

/// Labeled rows ready for fitting. Labels are indices into user_set.
struct TrainingSet {
    SchemaPtr schema;
    std::vector<UserId> user_set;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> x;
    std::vector<std::size_t> y;

    std::span<const double> row(std::size_t i) const { return {x.data() + i * cols, cols}; }
};

/// Builds a training set from labeled feature rows. An empty `user_set`
/// means the sorted distinct labels. Throws DataError on unlabeled rows,
/// labels outside user_set, or no rows.
TrainingSet make_training_set(const FeatureMatrix& m, std::vector<UserId> user_set = {});

/// Per-user probabilities at time t. `argmax` is the lowest index attaining
/// the maximum.
struct AuthScore {
    double t = 0.0;
    std::vector<UserId> users;
    std::vector<double> probs;
    std::size_t argmax = 0;

    const UserId& argmax_user() const { return users.at(argmax); }
    double score(std::string_view user) const;
    bool operator==(const AuthScore&) const = default;
};

std::size_t argmax_index(std::span<const double> v) noexcept;
AuthScore make_score(double t, std::vector<UserId> users, std::vector<double> probs);
/// {"t":..,"user":..,"scores":{user:p}}
nlohmann::json to_json(const AuthScore& s);

/// Binary CART tree stored flat. Leaves hold `leaf_width` values: a class
/// distribution for forests, one raw-score increment for boosting.
class DecisionTree {
public:
    struct Node {
        std::int32_t feature = -1;  ///< -1 marks a leaf
        double threshold = 0.0;     ///< x[feature] <= threshold goes left
        std::int32_t left = -1;
        std::int32_t right = -1;
        std::uint32_t leaf = 0;  ///< leaf slot when feature == -1
    };

    DecisionTree() = default;
    explicit DecisionTree(std::size_t leaf_width) : leaf_width_(leaf_width) {}

    std::size_t leaf_width() const noexcept { return leaf_width_; }
    std::size_t node_count() const noexcept { return nodes_.size(); }
    std::size_t leaf_count() const noexcept { return leaf_width_ ? leaves_.size() / leaf_width_ : 0; }
    std::size_t depth() const;

    std::span<const double> evaluate(std::span<const double> x) const;

    /// Appends a leaf, returns its node index.
    std::int32_t add_leaf(std::span<const double> values);
    /// Appends a split with unset children, returns its node index.
    std::int32_t add_split(std::int32_t feature, double threshold);
    void set_children(std::int32_t node, std::int32_t left, std::int32_t right);

    const std::vector<Node>& nodes() const noexcept { return nodes_; }

    /// Nested {"feature","threshold","left","right"} / {"leaf":[..]} or {"value":v}.
    nlohmann::json to_json() const;
    static DecisionTree from_json(const nlohmann::json& j, std::size_t leaf_width);

private:
    std::size_t leaf_width_ = 0;
    std::vector<Node> nodes_;
    std::vector<double> leaves_;
};

struct LogRegParams {
    double lambda = 1e-3;
    int epochs = 300;
    double learning_rate = 0.1;
    std::uint64_t seed = 0;
};

struct ForestParams {
    int n_trees = 200;
    std::uint64_t seed = 0;
};

struct BoostParams {
    int n_stages = 200;
    double learning_rate = 0.01;
    int max_depth = 3;
    std::uint64_t seed = 0;
};

/// Fitted classifier with everything needed to score a feature vector:
/// user set, schema, normalization state and parameters. Immutable once built.
class TrainedModel {
public:
    struct Linear {
        std::vector<double> mean;     ///< per-column training mean
        std::vector<double> scale;    ///< per-column training std, 0 for constant columns
        std::vector<double> weights;  ///< m x d, row-major
        std::vector<double> bias;     ///< m
    };
    struct Forest {
        std::vector<DecisionTree> trees;
    };
    struct Boost {
        std::vector<double> init;  ///< initial raw score per class (log prior)
        double learning_rate = 0.01;
        std::vector<std::vector<DecisionTree>> stages;  ///< stages[s][class]
    };
    using Parameters = std::variant<Linear, Forest, Boost>;

    TrainedModel(ModelKind kind, std::vector<UserId> user_set, SchemaPtr schema, nlohmann::json hyperparameters,
                 std::uint64_t seed, Parameters params);

    ModelKind kind() const noexcept { return kind_; }
    const std::vector<UserId>& user_set() const noexcept { return users_; }
    const SchemaPtr& schema() const noexcept { return schema_; }
    const nlohmann::json& hyperparameters() const noexcept { return hyper_; }
    std::uint64_t seed() const noexcept { return seed_; }
    const Parameters& parameters() const noexcept { return params_; }

    /// Probability vector over user_set. Throws SchemaError on width mismatch.
    std::vector<double> probabilities(std::span<const double> x) const;

    nlohmann::json to_json() const;
    static TrainedModel from_json(const nlohmann::json& j);

private:
    ModelKind kind_;
    std::vector<UserId> users_;
    SchemaPtr schema_;
    nlohmann::json hyper_;
    std::uint64_t seed_;
    Parameters params_;
};

inline constexpr int kModelFormatVersion = 1;

TrainedModel fit_logreg_l1(const TrainingSet& train, const LogRegParams& p);
TrainedModel fit_random_forest(const TrainingSet& train, const ForestParams& p, Exec exec = Exec::Parallel);
/// `loss_trace`, when given, receives the training multinomial deviance
/// before the first stage and after every stage.
TrainedModel fit_grad_boost(const TrainingSet& train, const BoostParams& p, Exec exec = Exec::Parallel,
                            std::vector<double>* loss_trace = nullptr);

/// Fits any kind from a JSON hyperparameter object (missing keys take defaults).
TrainedModel fit_model(ModelKind kind, const TrainingSet& train, const nlohmann::json& config,
                       Exec exec = Exec::Parallel);

/// Scores one feature vector. The vector's schema must equal the model's.
AuthScore predict_proba(const TrainedModel& model, const FeatureVector& x);

void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);
/// Canonical serialized form (sorted keys, compact); identical models give identical bytes.
std::string serialize_model(const TrainedModel& model);

namespace logreg {

/// Mean cross-entropy of softmax(W x + b) and, if `grad` is non-null, its
/// gradient. `params` is m rows of (d weights, bias).
double smooth_loss(std::span<const double> x, std::size_t rows, std::size_t cols, std::span<const std::size_t> y,
                   std::size_t classes, std::span<const double> params, std::vector<double>* grad);

}  // namespace logreg

}  // namespace homeauth
