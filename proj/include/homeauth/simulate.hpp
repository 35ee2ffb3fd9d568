#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "homeauth/ingest.hpp"
#include "homeauth/record.hpp"
#include "homeauth/sessions.hpp"

namespace homeauth {

struct Lognormal {
    double mu = 6.0;
    double sigma = 0.5;
    double mean() const;
};

/// How one user drives one device.
struct DeviceUsage {
    double weight = 0.0;          ///< relative usage intensity; 0 disables the device
    double rate_per_min = 0.0;    ///< outgoing events per active minute at weight 1
    Lognormal out_len;
    Lognormal in_len;
    std::map<std::string, double> domains;  ///< second-level domain -> mixture weight
};

struct UserProfile {
    UserId user;
    std::map<DeviceId, DeviceUsage> devices;
    double tcp = 0.8;   ///< protocol mixture
    double udp = 0.18;
    double icmp = 0.02;
    double pause_prob = 0.1;  ///< chance a minute has no user activity

    /// Throws ArgumentError on negative weights, no active device,
    /// mixtures not summing to 1, or sigma <= 0.
    void validate() const;
};

struct CorpusSpec {
    std::vector<UserProfile> profiles;
    std::vector<DeviceId> devices;  ///< registry order; empty means the built-in catalog
    int sessions_per_user = 10;
    double min_duration_min = 20.0;
    double max_duration_min = 30.0;
    double gap_min = 5.0;  ///< idle time between consecutive sessions
    double start_epoch = 1614592800.0;  ///< 2021-03-01T10:00:00Z
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static CorpusSpec from_json(const nlohmann::json& j);
};

enum class Separation { High, Medium, Low };
std::optional<Separation> parse_separation(std::string_view s) noexcept;
std::string_view to_string(Separation s) noexcept;

/// The fifteen smart-home devices of the built-in catalog.
const std::vector<DeviceId>& catalog_devices();
/// Candidate second-level domains a catalog device talks to.
const std::vector<std::string>& catalog_domains(std::string_view device);

/// Household profiles with controlled divergence: High gives disjoint
/// favorite devices, Medium overlapping devices with distinct domain and
/// length mixtures, Low near-identical profiles. 2 <= n_users <= 10.
std::vector<UserProfile> preset_profiles(int n_users, Separation separation, std::uint64_t seed);

/// Devices whose weight is at least half the user's largest weight.
std::vector<DeviceId> favorite_devices(const UserProfile& p);

struct Corpus {
    std::vector<PacketRecord> records;  ///< time-ordered
    std::vector<SessionLog> sessions;
    DeviceRegistry registry;
    nlohmann::json ground_truth;
};

/// Deterministic given spec.seed. Throws ArgumentError before generating
/// anything when the corpus spec is invalid.
Corpus generate_corpus(const CorpusSpec& spec);

/// records.jsonl, sessions.csv, registry.json, ground_truth.json, spec.json
void write_corpus(const Corpus& corpus, const CorpusSpec& spec, const std::filesystem::path& dir);

/// Spec file: either a full CorpusSpec, or {"preset":{"users":n,"separation":..},...}
/// with the CorpusSpec scalars alongside.
CorpusSpec load_corpus_spec(const nlohmann::json& j);

}  // namespace homeauth
