#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "homeauth/exec.hpp"
#include "homeauth/record.hpp"
#include "homeauth/sessions.hpp"

namespace homeauth {

/// count, sum, min, max, population std, mean, median. All zero when empty.
struct StatSummary {
    double count = 0.0;
    double sum = 0.0;
    double min = 0.0;
    double max = 0.0;
    double std = 0.0;
    double mean = 0.0;
    double median = 0.0;

    static constexpr std::size_t kWidth = 7;
    static constexpr std::array<std::string_view, kWidth> kNames = {"count", "sum", "min", "max",
                                                                     "std", "mean", "median"};
    std::array<double, kWidth> as_array() const { return {count, sum, min, max, std, mean, median}; }
    bool operator==(const StatSummary&) const = default;
};

StatSummary compute_stats(std::span<const double> values);

/// Consecutive differences of an ascending sequence. Throws ArgumentError
/// when the input is not sorted.
std::vector<double> inter_event_times(std::span<const double> sorted_timestamps);

enum class Representation { DeviceOnly, DomainOnly, Both };

std::string_view to_string(Representation r) noexcept;
/// Accepts "device", "domain", "both".
std::optional<Representation> parse_representation(std::string_view s) noexcept;

/// Columns per device: in-length stats, out-length stats, inter-event stats,
/// tcp/udp/icmp counts split by direction, distinct domain count.
inline constexpr std::size_t kDeviceBlockWidth = 28;
/// Columns per domain: the device layout without the distinct-domain column.
inline constexpr std::size_t kDomainBlockWidth = 27;
/// Name of the catch-all domain block appended after the vocabulary.
inline constexpr std::string_view kOtherDomain = "__other__";

/// Offsets inside one entity block.
namespace block {
inline constexpr std::size_t kInLen = 0;
inline constexpr std::size_t kOutLen = 7;
inline constexpr std::size_t kInterEvent = 14;
inline constexpr std::size_t kTcpIn = 21;
inline constexpr std::size_t kTcpOut = 22;
inline constexpr std::size_t kUdpIn = 23;
inline constexpr std::size_t kUdpOut = 24;
inline constexpr std::size_t kIcmpIn = 25;
inline constexpr std::size_t kIcmpOut = 26;
inline constexpr std::size_t kDistinctDomains = 27;
}  // namespace block

/// Deterministic column layout of a feature vector. Device blocks come first
/// (in device order), then one block per vocabulary domain, then OTHER.
class FeatureSchema {
public:
    FeatureSchema(Representation kind, std::vector<DeviceId> device_order, std::vector<std::string> domain_vocab);

    Representation kind() const noexcept { return kind_; }
    const std::vector<DeviceId>& device_order() const noexcept { return devices_; }
    const std::vector<std::string>& domain_vocab() const noexcept { return vocab_; }

    bool has_devices() const noexcept { return kind_ != Representation::DomainOnly; }
    bool has_domains() const noexcept { return kind_ != Representation::DeviceOnly; }

    std::size_t device_width() const noexcept { return has_devices() ? kDeviceBlockWidth * devices_.size() : 0; }
    std::size_t domain_width() const noexcept { return has_domains() ? kDomainBlockWidth * (vocab_.size() + 1) : 0; }
    std::size_t width() const noexcept { return device_width() + domain_width(); }

    std::optional<std::size_t> device_index(std::string_view id) const;
    /// Vocabulary index, or vocab size (the OTHER block) when absent.
    std::size_t domain_index(std::string_view domain) const;

    std::vector<std::string> column_names() const;

    /// Same layout with a different kind (shares devices and vocabulary).
    FeatureSchema with_kind(Representation kind) const;

    nlohmann::json to_json() const;
    static FeatureSchema from_json(const nlohmann::json& j);
    static FeatureSchema load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    bool operator==(const FeatureSchema& o) const {
        return kind_ == o.kind_ && devices_ == o.devices_ && vocab_ == o.vocab_;
    }

private:
    Representation kind_;
    std::vector<DeviceId> devices_;
    std::vector<std::string> vocab_;
    std::unordered_map<std::string, std::size_t> device_ix_;
    std::unordered_map<std::string, std::size_t> domain_ix_;
};

using SchemaPtr = std::shared_ptr<const FeatureSchema>;

struct FeatureVector {
    SchemaPtr schema;
    std::vector<double> values;
    std::optional<UserId> label;
    double t = 0.0;  ///< window end
};

/// Device-only slice (28 columns per device in schema order).
std::vector<double> device_features(const ObservationWindow& window, const FeatureSchema& schema);
/// Domain-only slice (27 columns per vocabulary domain, then OTHER).
std::vector<double> domain_features(const ObservationWindow& window, const FeatureSchema& schema);

FeatureVector extract_one(const ObservationWindow& window, const SchemaPtr& schema);

/// Sorted set of second-level domains seen in the windows.
std::vector<std::string> build_domain_vocab(std::span<const ObservationWindow> windows);

/// Row-major feature matrix with per-row label and window end.
struct FeatureMatrix {
    SchemaPtr schema;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;
    std::vector<std::optional<UserId>> labels;
    std::vector<double> t_end;

    std::span<const double> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
    FeatureVector vector(std::size_t i) const;
};

/// Maps every window through the schema; row order equals window order.
FeatureMatrix extract(std::span<const ObservationWindow> windows, const SchemaPtr& schema,
                      Exec exec = Exec::Parallel);

/// Header of column names plus "label","t_end".
void write_feature_csv(std::ostream& out, const FeatureMatrix& m);
void write_feature_csv(const std::filesystem::path& path, const FeatureMatrix& m);
/// The CSV header must match the schema's column names exactly.
FeatureMatrix read_feature_csv(std::istream& in, const SchemaPtr& schema);
FeatureMatrix read_feature_csv(const std::filesystem::path& path, const SchemaPtr& schema);

/// "features.csv" -> "features.schema.json"
std::filesystem::path schema_path_for(const std::filesystem::path& csv_path);

}  // namespace homeauth
