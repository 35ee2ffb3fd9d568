#include "homeauth/stream.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "homeauth/error.hpp"

namespace homeauth {

using nlohmann::json;

json to_json(const StreamOutput& out) {
    return std::visit([](const auto& v) { return to_json(v); }, out);
}

namespace {

void check_config(const StreamConfig& c) {
    if (!(c.delta_s > 0.0)) throw ArgumentError("stream window length must be positive");
    if (!(c.stride_s > 0.0)) throw ArgumentError("stream stride must be positive");
    if (!(c.reorder_tolerance_s >= 0.0)) throw ArgumentError("reorder tolerance must be >= 0");
}

}  // namespace

StreamScorer::StreamScorer(std::shared_ptr<const TrainedModel> model, StreamConfig config)
    : model_(std::move(model)), cfg_(config) {
    if (!model_) throw ArgumentError("stream scorer needs a model");
    check_config(cfg_);
    if (cfg_.origin) set_origin(*cfg_.origin);
}

StreamScorer::StreamScorer(std::shared_ptr<const EnsembleModel> ensemble, StreamConfig config)
    : ensemble_(std::move(ensemble)), cfg_(config) {
    if (!ensemble_) throw ArgumentError("stream scorer needs an ensemble");
    check_config(cfg_);
    if (cfg_.origin) set_origin(*cfg_.origin);
}

void StreamScorer::set_origin(double t) {
    if (!std::isfinite(t)) throw ArgumentError("stream origin must be finite");
    origin_ = t;
}

double StreamScorer::window_start(std::size_t k) const {
    // Same expression as the batch window generator, so boundaries match bit for bit.
    return *origin_ + static_cast<double>(k) * cfg_.stride_s;
}

std::vector<StreamOutput> StreamScorer::push(const PacketRecord& record) {
    validate(record);
    if (!origin_) set_origin(record.timestamp);
    if (record.timestamp < watermark_) {
        ++dropped_;
        spdlog::warn("dropping record at {:.6f}: older than watermark {:.6f}", record.timestamp, watermark_);
        return {};
    }
    auto pos = std::upper_bound(buffer_.begin(), buffer_.end(), record.timestamp,
                                [](double t, const PacketRecord& r) { return t < r.timestamp; });
    buffer_.insert(pos, record);
    max_seen_ = std::max(max_seen_, record.timestamp);
    watermark_ = std::max(watermark_, max_seen_ - cfg_.reorder_tolerance_s);
    return drain();
}

std::vector<StreamOutput> StreamScorer::advance_to(double clock) {
    if (!std::isfinite(clock)) throw ArgumentError("clock must be finite");
    watermark_ = std::max(watermark_, clock);
    if (!origin_) return {};
    return drain();
}

std::vector<StreamOutput> StreamScorer::drain() {
    std::vector<StreamOutput> out;
    for (;;) {
        const double t_start = window_start(next_k_);
        const double t_end = t_start + cfg_.delta_s;
        if (t_end > watermark_) break;
        out.push_back(score_window(t_start, t_end));
        ++next_k_;
    }
    const double keep_from = window_start(next_k_);
    while (!buffer_.empty() && buffer_.front().timestamp < keep_from) buffer_.pop_front();
    return out;
}

StreamOutput StreamScorer::score_window(double t_start, double t_end) const {
    ObservationWindow w;
    w.t_start = t_start;
    w.t_end = t_end;
    auto first = std::lower_bound(buffer_.begin(), buffer_.end(), t_start,
                                  [](const PacketRecord& r, double t) { return r.timestamp < t; });
    auto last = std::lower_bound(first, buffer_.end(), t_end,
                                 [](const PacketRecord& r, double t) { return r.timestamp < t; });
    w.records.assign(first, last);
    if (ensemble_) return ensemble_predict(*ensemble_, w);
    return predict_proba(*model_, extract_one(w, model_->schema()));
}

namespace {

template <class M>
std::vector<StreamOutput> run(std::span<const PacketRecord> records, std::shared_ptr<const M> m, StreamConfig config,
                              std::optional<double> end_time) {
    StreamScorer scorer(std::move(m), config);
    std::vector<StreamOutput> out;
    for (const auto& r : records) {
        auto produced = scorer.push(r);
        std::move(produced.begin(), produced.end(), std::back_inserter(out));
    }
    if (end_time) {
        auto produced = scorer.advance_to(*end_time);
        std::move(produced.begin(), produced.end(), std::back_inserter(out));
    }
    return out;
}

}  // namespace

std::vector<StreamOutput> score_stream(std::span<const PacketRecord> records, std::shared_ptr<const TrainedModel> model,
                                       StreamConfig config, std::optional<double> end_time) {
    return run(records, std::move(model), config, end_time);
}

std::vector<StreamOutput> score_stream(std::span<const PacketRecord> records,
                                       std::shared_ptr<const EnsembleModel> ensemble, StreamConfig config,
                                       std::optional<double> end_time) {
    return run(records, std::move(ensemble), config, end_time);
}

}  // namespace homeauth
