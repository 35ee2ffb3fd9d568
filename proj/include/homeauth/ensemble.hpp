#pragma once

#include <optional>
#include <span>

#include <json.hpp>

#include "homeauth/models.hpp"
#include "homeauth/sessions.hpp"

namespace homeauth {

/// Two classifiers over disjoint feature sets: one on device features,
/// one on domain features, sharing a user set.
class EnsembleModel {
public:
    /// Throws SchemaError unless `dev` is DeviceOnly, `dom` is DomainOnly and
    /// both have the same user set.
    EnsembleModel(TrainedModel dev, TrainedModel dom, double min_confidence = 0.0);

    const TrainedModel& dev() const noexcept { return dev_; }
    const TrainedModel& dom() const noexcept { return dom_; }
    double min_confidence() const noexcept { return min_confidence_; }

private:
    TrainedModel dev_;
    TrainedModel dom_;
    double min_confidence_;
};

enum class EnsembleOutcome { Agreed, Abstain };

struct EnsembleDecision {
    double t = 0.0;
    EnsembleOutcome outcome = EnsembleOutcome::Abstain;
    std::optional<AuthScore> combined;  ///< set iff Agreed
    AuthScore dev_scores;
    AuthScore dom_scores;

    bool agreed() const noexcept { return outcome == EnsembleOutcome::Agreed; }
};

/// Agreed iff both argmax users match (and the averaged top score reaches
/// `min_confidence`); the combined vector is the renormalized mean.
EnsembleDecision combine_scores(const AuthScore& dev, const AuthScore& dom, double min_confidence = 0.0);

EnsembleDecision ensemble_predict(const EnsembleModel& ens, const ObservationWindow& window);

/// Fraction of agreed decisions. Throws ArgumentError on an empty list.
double coverage(std::span<const EnsembleDecision> decisions);
double coverage(std::size_t agreed, std::size_t total);

/// {"t","outcome","user","scores","dev_scores","dom_scores"}; user and
/// scores are null on abstention.
nlohmann::json to_json(const EnsembleDecision& d);

}  // namespace homeauth
