#pragma once

#include <deque>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <json.hpp>

#include "homeauth/ensemble.hpp"
#include "homeauth/models.hpp"
#include "homeauth/record.hpp"

namespace homeauth {

struct StreamConfig {
    double delta_s = 25.0 * 60.0;
    double stride_s = 60.0;
    double reorder_tolerance_s = 1.0;
    std::optional<double> origin;  ///< first window start; defaults to the first timestamp seen
};

using StreamOutput = std::variant<AuthScore, EnsembleDecision>;

nlohmann::json to_json(const StreamOutput& out);

/// Continuous scorer over the most recent window. Emits one output per
/// stride boundary t = origin + k*stride + delta once every record before t
/// can have arrived, computed over [t - delta, t). Nothing is emitted during
/// the first delta of observation.
class StreamScorer {
public:
    StreamScorer(std::shared_ptr<const TrainedModel> model, StreamConfig config);
    StreamScorer(std::shared_ptr<const EnsembleModel> ensemble, StreamConfig config);

    /// Buffers the record and returns any outputs it completes. Records older
    /// than the watermark are dropped and counted.
    std::vector<StreamOutput> push(const PacketRecord& record);
    /// Declares that every record before `clock` has been delivered.
    std::vector<StreamOutput> advance_to(double clock);

    std::size_t buffered() const noexcept { return buffer_.size(); }
    std::size_t dropped() const noexcept { return dropped_; }
    std::size_t emitted() const noexcept { return next_k_; }
    double watermark() const noexcept { return watermark_; }

private:
    void set_origin(double t);
    std::vector<StreamOutput> drain();
    double window_start(std::size_t k) const;
    StreamOutput score_window(double t_start, double t_end) const;

    std::shared_ptr<const TrainedModel> model_;
    std::shared_ptr<const EnsembleModel> ensemble_;
    StreamConfig cfg_;
    std::optional<double> origin_;
    double max_seen_ = -std::numeric_limits<double>::infinity();
    double watermark_ = -std::numeric_limits<double>::infinity();
    std::size_t next_k_ = 0;
    std::size_t dropped_ = 0;
    std::deque<PacketRecord> buffer_;  // sorted by timestamp, arrival order on ties
};

/// Offline driver: pushes every record, then advances the clock to
/// `end_time` when given.
std::vector<StreamOutput> score_stream(std::span<const PacketRecord> records,
                                       std::shared_ptr<const TrainedModel> model, StreamConfig config,
                                       std::optional<double> end_time = std::nullopt);
std::vector<StreamOutput> score_stream(std::span<const PacketRecord> records,
                                       std::shared_ptr<const EnsembleModel> ensemble, StreamConfig config,
                                       std::optional<double> end_time = std::nullopt);

}  // namespace homeauth
