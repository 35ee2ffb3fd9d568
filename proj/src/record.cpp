#include "homeauth/record.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "homeauth/error.hpp"

namespace homeauth {

using nlohmann::json;

std::string_view to_string(Direction d) noexcept { return d == Direction::Outgoing ? "out" : "in"; }

std::string_view to_string(Protocol p) noexcept {
    switch (p) {
        case Protocol::Tcp: return "tcp";
        case Protocol::Udp: return "udp";
        case Protocol::Icmp: return "icmp";
    }
    return "tcp";
}

std::optional<Direction> parse_direction(std::string_view s) noexcept {
    if (s == "out") return Direction::Outgoing;
    if (s == "in") return Direction::Incoming;
    return std::nullopt;
}

std::optional<Protocol> parse_protocol(std::string_view s) noexcept {
    if (s == "tcp") return Protocol::Tcp;
    if (s == "udp") return Protocol::Udp;
    if (s == "icmp") return Protocol::Icmp;
    return std::nullopt;
}

void validate(const PacketRecord& r) {
    if (!std::isfinite(r.timestamp)) throw DataError("field 'timestamp': not finite");
    if (r.device.empty()) throw DataError("field 'device': empty");
    if (r.protocol == Protocol::Icmp && (r.src_port || r.dst_port))
        throw DataError("field 'src_port'/'dst_port': must be null for icmp");
    if (r.domain.empty()) throw DataError("field 'domain': empty");
}

json to_json(const PacketRecord& r) {
    json j;
    j["timestamp"] = r.timestamp;
    j["device"] = r.device;
    j["direction"] = to_string(r.direction);
    j["protocol"] = to_string(r.protocol);
    j["length"] = r.length;
    j["src_port"] = r.src_port ? json(*r.src_port) : json(nullptr);
    j["dst_port"] = r.dst_port ? json(*r.dst_port) : json(nullptr);
    j["remote_ip"] = r.remote_ip;
    j["domain"] = r.domain;
    return j;
}

namespace {

const json& required(const json& j, const char* field) {
    auto it = j.find(field);
    if (it == j.end()) throw SchemaError(std::string("field '") + field + "': missing");
    return *it;
}

std::string string_field(const json& j, const char* field) {
    const json& v = required(j, field);
    if (!v.is_string()) throw SchemaError(std::string("field '") + field + "': expected string");
    return v.get<std::string>();
}

std::optional<std::uint16_t> port_field(const json& j, const char* field) {
    auto it = j.find(field);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_number_integer()) throw SchemaError(std::string("field '") + field + "': expected integer or null");
    const auto v = it->get<std::int64_t>();
    if (v < 0 || v > 65535) throw SchemaError(std::string("field '") + field + "': out of range [0, 65535]");
    return static_cast<std::uint16_t>(v);
}

}  // namespace

PacketRecord record_from_json(const json& j) {
    if (!j.is_object()) throw SchemaError("expected a JSON object");
    PacketRecord r;

    const json& ts = required(j, "timestamp");
    if (!ts.is_number()) throw SchemaError("field 'timestamp': expected number");
    r.timestamp = ts.get<double>();
    if (!std::isfinite(r.timestamp)) throw SchemaError("field 'timestamp': not finite");

    r.device = string_field(j, "device");
    if (r.device.empty()) throw SchemaError("field 'device': empty");

    auto dir = parse_direction(string_field(j, "direction"));
    if (!dir) throw SchemaError("field 'direction': expected \"out\" or \"in\"");
    r.direction = *dir;

    auto proto = parse_protocol(string_field(j, "protocol"));
    if (!proto) throw SchemaError("field 'protocol': expected \"tcp\", \"udp\" or \"icmp\"");
    r.protocol = *proto;

    const json& len = required(j, "length");
    if (!len.is_number_integer()) throw SchemaError("field 'length': expected integer");
    const auto length = len.get<std::int64_t>();
    if (length < 0) throw SchemaError("field 'length': must be non-negative");
    if (length > 0xffffffffLL) throw SchemaError("field 'length': too large");
    r.length = static_cast<std::uint32_t>(length);

    r.src_port = port_field(j, "src_port");
    r.dst_port = port_field(j, "dst_port");
    if (r.protocol == Protocol::Icmp && (r.src_port || r.dst_port))
        throw SchemaError("field 'src_port': ports must be null for icmp");

    r.remote_ip = string_field(j, "remote_ip");
    if (auto it = j.find("domain"); it != j.end() && !it->is_null()) {
        if (!it->is_string() || it->get_ref<const std::string&>().empty())
            throw SchemaError("field 'domain': expected non-empty string");
        r.domain = it->get<std::string>();
    }
    return r;
}

std::string to_jsonl(const PacketRecord& r) { return to_json(r).dump(); }

std::optional<PacketRecord> RecordReader::next() {
    std::string line;
    while (std::getline(*in_, line)) {
        ++line_;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            return record_from_json(json::parse(line));
        } catch (const json::parse_error& e) {
            throw DataError("line " + std::to_string(line_) + ": invalid JSON: " + e.what());
        } catch (const DataError& e) {
            throw SchemaError("line " + std::to_string(line_) + ": " + e.what());
        }
    }
    return std::nullopt;
}

std::vector<PacketRecord> read_records(std::istream& in) {
    RecordReader reader(in);
    std::vector<PacketRecord> out;
    while (auto r = reader.next()) out.push_back(std::move(*r));
    return out;
}

std::vector<PacketRecord> read_records(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open records file " + path.string());
    return read_records(in);
}

void write_records(std::ostream& out, std::span<const PacketRecord> records) {
    for (const auto& r : records) out << to_jsonl(r) << '\n';
}

void write_records(const std::filesystem::path& path, std::span<const PacketRecord> records) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    write_records(out, records);
}

void sort_by_time(std::vector<PacketRecord>& records) {
    std::stable_sort(records.begin(), records.end(),
                     [](const PacketRecord& a, const PacketRecord& b) { return a.timestamp < b.timestamp; });
}

}  // namespace homeauth
