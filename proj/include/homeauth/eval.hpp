#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "homeauth/features.hpp"
#include "homeauth/models.hpp"
#include "homeauth/sessions.hpp"

namespace homeauth {

/// One cross-validation split, as indices into the session list.
struct Fold {
    std::vector<std::size_t> test;
    std::vector<std::size_t> train;
};

/// Each fold tests exactly one session per user, picked round-robin from a
/// seeded per-user shuffle; users with fewer than k sessions reuse them.
/// Every other session trains.
std::vector<Fold> kfold_by_session(std::span<const SessionLog> sessions, int k, std::uint64_t seed);

/// Majority vote over window argmaxes; ties go to the larger summed
/// probability, then to user-set order. Returns an index into the user set.
std::size_t session_prediction(std::span<const AuthScore> window_scores);

/// Rows are true users, columns predicted users; abstentions counted apart.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::vector<UserId> users);
    ConfusionMatrix(std::vector<UserId> users, std::vector<std::vector<std::size_t>> counts);

    void add(std::size_t truth, std::size_t predicted, std::size_t n = 1);
    void add_abstain(std::size_t truth, std::size_t n = 1);

    const std::vector<UserId>& users() const noexcept { return users_; }
    std::size_t size() const noexcept { return users_.size(); }
    std::size_t at(std::size_t truth, std::size_t predicted) const { return counts_.at(truth * size() + predicted); }
    std::size_t abstained(std::size_t truth) const { return abstain_.at(truth); }
    std::size_t row_sum(std::size_t truth) const;
    std::size_t column_sum(std::size_t predicted) const;
    std::size_t total() const;
    std::size_t total_abstained() const;

    void write_csv(std::ostream& out) const;
    nlohmann::json to_json() const;

private:
    std::vector<UserId> users_;
    std::vector<std::size_t> counts_;
    std::vector<std::size_t> abstain_;
};

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;  ///< evaluated (non-abstained) units with this true user
};

/// Per-user and pooled metrics. Abstained units are excluded from every
/// ratio and reported through coverage.
struct MetricReport {
    std::vector<UserId> users;
    std::vector<ClassMetrics> per_user;
    ClassMetrics micro;
    ClassMetrics macro;
    ClassMetrics weighted;  ///< support-weighted mean of per-user values
    double accuracy = 0.0;
    double coverage = 1.0;
    std::size_t evaluated = 0;
    std::size_t abstained = 0;

    nlohmann::json to_json() const;
};

MetricReport compute_metrics(const ConfusionMatrix& cm);

/// Harmonic mean, 0 when both inputs are 0.
double f1_score(double precision, double recall) noexcept;

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

struct RocCurve {
    std::string label;
    bool defined = false;  ///< needs at least one positive and one negative
    std::size_t positives = 0;
    std::size_t negatives = 0;
    std::vector<RocPoint> points;
    double auc = 0.0;
};

struct RocSet {
    std::vector<RocCurve> per_user;
    RocCurve micro;
};

/// Threshold sweep, tied scores processed as one block, trapezoidal AUC.
RocCurve roc_curve(std::span<const double> scores, std::span<const std::uint8_t> positive, std::string label = {});

/// One-vs-rest curve per user plus the micro curve over all (score, indicator) pairs.
RocSet roc_curves(std::span<const std::size_t> truth, std::span<const AuthScore> scores);

// ---------------------------------------------------------------------------
// Experiments

struct EnsembleSpec {
    ModelKind dev_model = ModelKind::GradBoost;
    ModelKind dom_model = ModelKind::GradBoost;
};

/// Parsed experiment configuration. See docs/formats.md for the JSON layout.
struct ExperimentConfig {
    std::filesystem::path records;
    std::filesystem::path sessions;
    std::filesystem::path registry;        ///< optional: device order
    std::optional<nlohmann::json> simulate;  ///< corpus spec used instead of files
    std::vector<Representation> representations{Representation::DeviceOnly};
    std::vector<double> deltas_min{25.0};
    std::vector<ModelKind> models{ModelKind::RandomForest};
    std::vector<EnsembleSpec> ensembles;
    int k = 7;
    std::uint64_t seed = 0;
    std::size_t min_sessions = 0;
    double stride_s = kDefaultStrideSeconds;
    nlohmann::json hyperparameters = nlohmann::json::object();  ///< {"rf":{..},"gb":{..},"logreg":{..}}

    static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    static ExperimentConfig load(const std::filesystem::path& path);
};

/// Scores of one configuration on the test sessions of every fold.
struct CellResult {
    std::string name;  ///< e.g. "device_d25_rf", "ensemble_d25_gb+gb"
    std::string representation;
    double delta_min = 0.0;
    std::string model;
    ConfusionMatrix session_confusion;
    ConfusionMatrix window_confusion;
    MetricReport session_metrics;
    MetricReport window_metrics;
    RocSet roc;  ///< window level; empty for ensembles
};

struct ExperimentReport {
    std::vector<UserId> users;
    std::size_t sessions = 0;
    std::vector<CellResult> cells;

    const CellResult* find(const std::string& name) const;
};

/// Runs the full grid (representation x delta x model, plus ensembles) under
/// session-wise k-fold cross-validation.
ExperimentReport run_experiment(const ExperimentConfig& config, const std::vector<PacketRecord>& records,
                                const std::vector<SessionLog>& sessions, const std::vector<DeviceId>& device_order,
                                Exec exec = Exec::Parallel);
/// Loads or simulates the dataset named by the config, then runs it.
ExperimentReport run_experiment(const ExperimentConfig& config, Exec exec = Exec::Parallel);

/// metrics.csv, confusion_<cell>.csv, confusion_<cell>_windows.csv,
/// roc_<cell>.csv, summary.json.
void write_report(const ExperimentReport& report, const ExperimentConfig& config, const std::filesystem::path& dir);

}  // namespace homeauth
