#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "homeauth/ingest.hpp"
#include "homeauth/record.hpp"

namespace homeauth {

struct PcapCounters {
    std::size_t packets = 0;       ///< per-packet headers read
    std::size_t records = 0;       ///< records emitted
    std::size_t unregistered = 0;  ///< IP packets with no registered MAC on either side
    std::size_t malformed = 0;     ///< truncated or undecodable packets
    std::size_t non_ip = 0;        ///< non-IP or non-TCP/UDP/ICMP frames
    std::size_t dns_answers = 0;   ///< A/AAAA answers added to the DNS map
};

struct PcapResult {
    std::vector<PacketRecord> records;
    DnsMap dns;
    PcapCounters counters;
};

/// Decodes a classic libpcap capture (either byte order, Ethernet link type).
/// Records carry domain "unknown"; run annotate_domains afterwards.
/// Throws DataError on a bad global header or unsupported link type.
PcapResult parse_pcap(std::span<const std::byte> bytes, const DeviceRegistry& registry);
PcapResult parse_pcap(const std::filesystem::path& path, const DeviceRegistry& registry);

}  // namespace homeauth
