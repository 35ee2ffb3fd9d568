#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace homeauth {

using DeviceId = std::string;
using UserId = std::string;

enum class Direction : std::uint8_t { Outgoing, Incoming };
enum class Protocol : std::uint8_t { Tcp, Udp, Icmp };

/// Domain sentinel for packets whose remote address never resolved.
inline constexpr std::string_view kUnknownDomain = "unknown";

std::string_view to_string(Direction d) noexcept;
std::string_view to_string(Protocol p) noexcept;
std::optional<Direction> parse_direction(std::string_view s) noexcept;
std::optional<Protocol> parse_protocol(std::string_view s) noexcept;

/// Header metadata of one transport packet seen on a registered device.
struct PacketRecord {
    double timestamp = 0.0;  ///< seconds since epoch, microsecond precision
    DeviceId device;
    Direction direction = Direction::Outgoing;
    Protocol protocol = Protocol::Tcp;
    std::uint32_t length = 0;  ///< frame length in bytes
    std::optional<std::uint16_t> src_port;
    std::optional<std::uint16_t> dst_port;
    std::string remote_ip;
    std::string domain{kUnknownDomain};

    bool operator==(const PacketRecord&) const = default;
};

/// Throws DataError if the record breaks a structural invariant
/// (ICMP with ports, non-finite timestamp, empty device).
void validate(const PacketRecord& r);

nlohmann::json to_json(const PacketRecord& r);

/// Converts one JSONL object; errors name the offending field.
PacketRecord record_from_json(const nlohmann::json& j);

/// One compact JSON line without the trailing newline.
std::string to_jsonl(const PacketRecord& r);

/// Incremental reader over a PacketRecord JSONL stream. Blank lines are
/// skipped; errors carry the 1-based line number and the field name.
class RecordReader {
public:
    explicit RecordReader(std::istream& in) : in_(&in) {}

    std::optional<PacketRecord> next();
    std::size_t line_number() const noexcept { return line_; }

private:
    std::istream* in_;
    std::size_t line_ = 0;
};

std::vector<PacketRecord> read_records(const std::filesystem::path& path);
std::vector<PacketRecord> read_records(std::istream& in);

void write_records(std::ostream& out, std::span<const PacketRecord> records);
void write_records(const std::filesystem::path& path, std::span<const PacketRecord> records);

/// Stable sort by timestamp; ties keep input order.
void sort_by_time(std::vector<PacketRecord>& records);

}  // namespace homeauth
