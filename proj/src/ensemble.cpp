#include "homeauth/ensemble.hpp"

#include "homeauth/error.hpp"

namespace homeauth {

using nlohmann::json;

EnsembleModel::EnsembleModel(TrainedModel dev, TrainedModel dom, double min_confidence)
    : dev_(std::move(dev)), dom_(std::move(dom)), min_confidence_(min_confidence) {
    if (dev_.schema()->kind() != Representation::DeviceOnly) {
        throw SchemaError("ensemble: first model must use the device representation, got " +
                          std::string(to_string(dev_.schema()->kind())));
    }
    if (dom_.schema()->kind() != Representation::DomainOnly) {
        throw SchemaError("ensemble: second model must use the domain representation, got " +
                          std::string(to_string(dom_.schema()->kind())));
    }
    if (dev_.user_set() != dom_.user_set()) throw SchemaError("ensemble: models have different user sets");
    if (!(min_confidence_ >= 0.0 && min_confidence_ <= 1.0)) {
        throw ArgumentError("ensemble: min_confidence must be in [0, 1]");
    }
}

EnsembleDecision combine_scores(const AuthScore& dev, const AuthScore& dom, double min_confidence) {
    if (dev.users != dom.users) throw SchemaError("ensemble: score vectors over different user sets");
    EnsembleDecision d;
    d.t = dev.t;
    d.dev_scores = dev;
    d.dom_scores = dom;
    if (dev.argmax != dom.argmax) return d;

    std::vector<double> mean(dev.probs.size());
    double total = 0.0;
    for (std::size_t i = 0; i < mean.size(); ++i) {
        mean[i] = (dev.probs[i] + dom.probs[i]) / 2.0;
        total += mean[i];
    }
    for (auto& v : mean) v /= total;
    if (mean[dev.argmax] < min_confidence) return d;

    AuthScore combined;
    combined.t = dev.t;
    combined.users = dev.users;
    combined.probs = std::move(mean);
    // The agreed user stays the argmax even if rounding creates a tie.
    combined.argmax = dev.argmax;
    d.combined = std::move(combined);
    d.outcome = EnsembleOutcome::Agreed;
    return d;
}

EnsembleDecision ensemble_predict(const EnsembleModel& ens, const ObservationWindow& window) {
    const auto dev = predict_proba(ens.dev(), extract_one(window, ens.dev().schema()));
    const auto dom = predict_proba(ens.dom(), extract_one(window, ens.dom().schema()));
    return combine_scores(dev, dom, ens.min_confidence());
}

double coverage(std::size_t agreed, std::size_t total) {
    if (total == 0) throw ArgumentError("coverage of an empty decision list");
    if (agreed > total) throw ArgumentError("agreed count exceeds total");
    return static_cast<double>(agreed) / static_cast<double>(total);
}

double coverage(std::span<const EnsembleDecision> decisions) {
    std::size_t agreed = 0;
    for (const auto& d : decisions) agreed += d.agreed() ? 1 : 0;
    return coverage(agreed, decisions.size());
}

json to_json(const EnsembleDecision& d) {
    json j{{"t", d.t},
           {"outcome", d.agreed() ? "agreed" : "abstain"},
           {"dev_scores", to_json(d.dev_scores)},
           {"dom_scores", to_json(d.dom_scores)}};
    if (d.combined) {
        json s = to_json(*d.combined);
        j["user"] = s["user"];
        j["scores"] = s["scores"];
    } else {
        j["user"] = nullptr;
        j["scores"] = nullptr;
    }
    return j;
}

}  // namespace homeauth
