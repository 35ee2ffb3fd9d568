#include "homeauth/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>

#include "homeauth/error.hpp"

namespace homeauth {

using nlohmann::json;

std::optional<MacAddress> parse_mac(std::string_view text) noexcept {
    MacAddress mac{};
    std::size_t pos = 0;
    for (std::size_t i = 0; i < 6; ++i) {
        if (i > 0) {
            if (pos >= text.size() || (text[pos] != ':' && text[pos] != '-')) return std::nullopt;
            ++pos;
        }
        if (pos + 2 > text.size()) return std::nullopt;
        int value = 0;
        for (int k = 0; k < 2; ++k) {
            const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(text[pos++])));
            int nibble;
            if (c >= '0' && c <= '9') nibble = c - '0';
            else if (c >= 'a' && c <= 'f') nibble = c - 'a' + 10;
            else return std::nullopt;
            value = value * 16 + nibble;
        }
        mac[i] = static_cast<std::uint8_t>(value);
    }
    if (pos != text.size()) return std::nullopt;
    return mac;
}

std::string format_mac(const MacAddress& mac) {
    char buf[18];
    std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x", mac[0], mac[1], mac[2], mac[3], mac[4], mac[5]);
    return buf;
}

DeviceRegistry::DeviceRegistry(const std::map<std::string, DeviceId>& mac_to_device,
                               std::vector<DeviceId> device_order)
    : order_(std::move(device_order)) {
    std::set<DeviceId> in_order;
    for (const auto& d : order_) {
        if (d.empty()) throw SchemaError("registry: empty device id in device_order");
        if (!in_order.insert(d).second) throw SchemaError("registry: device '" + d + "' repeated in device_order");
    }
    std::set<DeviceId> mapped;
    for (const auto& [text, device] : mac_to_device) {
        auto mac = parse_mac(text);
        if (!mac) throw SchemaError("registry: invalid MAC address '" + text + "'");
        if (!by_mac_.emplace(*mac, device).second) throw SchemaError("registry: duplicate MAC " + format_mac(*mac));
        if (!mapped.insert(device).second) throw SchemaError("registry: device '" + device + "' has two MACs");
        if (!in_order.count(device)) throw SchemaError("registry: device '" + device + "' missing from device_order");
    }
}

DeviceRegistry DeviceRegistry::from_json(const json& j) {
    if (!j.is_object()) throw SchemaError("registry: expected a JSON object");
    auto order_it = j.find("device_order");
    if (order_it == j.end() || !order_it->is_array()) throw SchemaError("registry: missing \"device_order\" array");
    std::vector<DeviceId> order;
    for (const auto& d : *order_it) {
        if (!d.is_string()) throw SchemaError("registry: device_order entries must be strings");
        order.push_back(d.get<std::string>());
    }
    std::map<std::string, DeviceId> macs;
    for (const auto& [key, value] : j.items()) {
        if (key == "device_order") continue;
        if (!value.is_string()) throw SchemaError("registry: value for '" + key + "' must be a device id string");
        macs.emplace(key, value.get<std::string>());
    }
    return DeviceRegistry(macs, std::move(order));
}

DeviceRegistry DeviceRegistry::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open registry " + path.string());
    try {
        return from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw DataError("registry " + path.string() + ": " + e.what());
    }
}

json DeviceRegistry::to_json() const {
    json j = json::object();
    for (const auto& [mac, device] : by_mac_) j[format_mac(mac)] = device;
    j["device_order"] = order_;
    return j;
}

void DeviceRegistry::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << to_json().dump(2) << '\n';
}

const DeviceId* DeviceRegistry::find(const MacAddress& mac) const {
    auto it = by_mac_.find(mac);
    return it == by_mac_.end() ? nullptr : &it->second;
}

bool DeviceRegistry::contains_device(std::string_view id) const {
    return std::find(order_.begin(), order_.end(), id) != order_.end();
}

void DnsMap::add(double first_seen, std::string ip, std::string fqdn) {
    auto& list = by_ip_[ip];
    auto pos = std::upper_bound(list.begin(), list.end(), first_seen,
                                [](double t, const Timed& e) { return t < e.first_seen; });
    list.insert(pos, Timed{first_seen, fqdn});
    entries_.push_back(Entry{first_seen, std::move(ip), std::move(fqdn)});
}

std::optional<std::string> DnsMap::lookup(std::string_view ip, double t) const {
    auto it = by_ip_.find(std::string(ip));
    if (it == by_ip_.end() || it->second.empty()) return std::nullopt;
    const auto& list = it->second;
    auto pos = std::upper_bound(list.begin(), list.end(), t, [](double v, const Timed& e) { return v < e.first_seen; });
    if (pos != list.begin()) return std::prev(pos)->fqdn;
    return list.back().fqdn;
}

json DnsMap::to_json() const {
    json arr = json::array();
    for (const auto& e : entries_) arr.push_back({{"first_seen", e.first_seen}, {"ip", e.ip}, {"fqdn", e.fqdn}});
    return arr;
}

DnsMap DnsMap::from_json(const json& j) {
    if (!j.is_array()) throw SchemaError("dns map: expected an array");
    DnsMap m;
    for (const auto& e : j) {
        try {
            m.add(e.at("first_seen").get<double>(), e.at("ip").get<std::string>(), e.at("fqdn").get<std::string>());
        } catch (const json::exception& ex) {
            throw SchemaError(std::string("dns map entry: ") + ex.what());
        }
    }
    return m;
}

const std::vector<std::string>& default_suffix_exceptions() {
    static const std::vector<std::string> list = {
        "co.uk", "org.uk", "ac.uk", "gov.uk", "me.uk", "com.au", "net.au", "org.au", "co.jp",  "ne.jp",
        "co.nz", "com.br", "com.cn", "co.in",  "co.kr", "com.mx", "co.za",  "com.tr", "com.sg",
    };
    return list;
}

std::string second_level_domain(std::string_view fqdn, std::span<const std::string> exceptions) {
    std::string name(fqdn);
    while (!name.empty() && name.back() == '.') name.pop_back();
    if (name.find('.') == std::string::npos) return std::string(fqdn);
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });

    std::vector<std::string_view> labels;
    std::string_view rest = name;
    for (auto dot = rest.find('.'); dot != std::string_view::npos; dot = rest.find('.')) {
        labels.push_back(rest.substr(0, dot));
        rest.remove_prefix(dot + 1);
    }
    labels.push_back(rest);

    const std::size_t n = labels.size();
    std::string last_two = std::string(labels[n - 2]) + "." + std::string(labels[n - 1]);
    const bool is_exception =
        std::any_of(exceptions.begin(), exceptions.end(), [&](const std::string& s) { return s == last_two; });
    if (is_exception && n >= 3) return std::string(labels[n - 3]) + "." + last_two;
    return last_two;
}

std::vector<PacketRecord> annotate_domains(std::vector<PacketRecord> records, const DnsMap& dns,
                                           std::span<const std::string> exceptions) {
    for (auto& r : records) {
        auto fqdn = dns.lookup(r.remote_ip, r.timestamp);
        r.domain = fqdn ? second_level_domain(*fqdn, exceptions) : std::string(kUnknownDomain);
        if (r.domain.empty()) r.domain = std::string(kUnknownDomain);
    }
    return records;
}

}  // namespace homeauth
