#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "homeauth/record.hpp"

namespace homeauth {

using MacAddress = std::array<std::uint8_t, 6>;

/// Accepts "aa:bb:cc:dd:ee:ff" or "AA-BB-...", any case.
std::optional<MacAddress> parse_mac(std::string_view text) noexcept;
/// Canonical lower-case colon form.
std::string format_mac(const MacAddress& mac);

/// MAC -> device mapping plus the device order that fixes feature columns.
///
/// On disk this is a JSON object whose keys are MAC addresses mapped to
/// device ids, plus a "device_order" array listing every device exactly once.
/// Devices may appear in the order without a MAC (their columns stay zero).
class DeviceRegistry {
public:
    DeviceRegistry() = default;
    DeviceRegistry(const std::map<std::string, DeviceId>& mac_to_device,
                   std::vector<DeviceId> device_order);

    static DeviceRegistry from_json(const nlohmann::json& j);
    static DeviceRegistry load(const std::filesystem::path& path);
    nlohmann::json to_json() const;
    void save(const std::filesystem::path& path) const;

    const DeviceId* find(const MacAddress& mac) const;
    const std::vector<DeviceId>& device_order() const noexcept { return order_; }
    bool contains_device(std::string_view id) const;

private:
    std::map<MacAddress, DeviceId> by_mac_;
    std::vector<DeviceId> order_;
};

/// IP -> FQDN mapping mined from DNS answers, aware of when each answer
/// was first seen.
class DnsMap {
public:
    struct Entry {
        double first_seen = 0.0;
        std::string ip;
        std::string fqdn;
        bool operator==(const Entry&) const = default;
    };

    void add(double first_seen, std::string ip, std::string fqdn);

    /// FQDN of the latest entry with first_seen <= t; failing that the latest
    /// entry for the ip at any time; failing that nullopt.
    std::optional<std::string> lookup(std::string_view ip, double t) const;

    const std::vector<Entry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }

    nlohmann::json to_json() const;
    static DnsMap from_json(const nlohmann::json& j);

private:
    struct Timed {
        double first_seen;
        std::string fqdn;
    };
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::vector<Timed>> by_ip_;  // sorted by first_seen
};

/// Two-label public suffixes that push the registrable domain one label left.
const std::vector<std::string>& default_suffix_exceptions();

/// Registrable tail of an FQDN: last two labels, or last three when the last
/// two are in `exceptions`. Lower-cased with a trailing dot stripped.
/// Single-label input is returned unchanged.
std::string second_level_domain(std::string_view fqdn,
                                std::span<const std::string> exceptions = default_suffix_exceptions());

/// Sets each record's domain from the DNS map (sentinel when unresolved).
std::vector<PacketRecord> annotate_domains(std::vector<PacketRecord> records, const DnsMap& dns,
                                           std::span<const std::string> exceptions = default_suffix_exceptions());

}  // namespace homeauth
