#include "homeauth/pcap.hpp"

#include <arpa/inet.h>

#include <fstream>
#include <iterator>
#include <string>

#include <spdlog/spdlog.h>

#include "homeauth/error.hpp"

namespace homeauth {

namespace {

constexpr std::uint32_t kMagicMicro = 0xa1b2c3d4;
constexpr std::uint32_t kMagicNano = 0xa1b23c4d;
constexpr std::uint32_t kLinkEthernet = 1;
constexpr std::size_t kGlobalHeader = 24;
constexpr std::size_t kRecordHeader = 16;

constexpr std::uint16_t kEtherIpv4 = 0x0800;
constexpr std::uint16_t kEtherIpv6 = 0x86dd;
constexpr std::uint16_t kEtherVlan = 0x8100;

constexpr std::uint8_t kIpIcmp = 1;
constexpr std::uint8_t kIpTcp = 6;
constexpr std::uint8_t kIpUdp = 17;
constexpr std::uint8_t kIpIcmpv6 = 58;

std::uint16_t be16(const std::uint8_t* p) { return static_cast<std::uint16_t>((p[0] << 8) | p[1]); }
std::uint32_t be32(const std::uint8_t* p) {
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}
std::uint32_t le32(const std::uint8_t* p) {
    return (std::uint32_t{p[3]} << 24) | (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[1]} << 8) | p[0];
}

std::string ip_text(int family, const std::uint8_t* addr) {
    char buf[INET6_ADDRSTRLEN] = {};
    inet_ntop(family, addr, buf, sizeof buf);
    return buf;
}

/// Minimal RFC 1035 reader over one UDP payload.
class DnsReader {
public:
    explicit DnsReader(std::span<const std::uint8_t> msg) : msg_(msg) {}

    /// Reads a possibly-compressed name at `pos`, advancing it past the
    /// in-place encoding. Returns false on malformed input.
    bool name(std::size_t& pos, std::string& out) const {
        out.clear();
        std::size_t p = pos;
        bool jumped = false;
        int hops = 0;
        while (true) {
            if (p >= msg_.size()) return false;
            const std::uint8_t len = msg_[p];
            if ((len & 0xc0) == 0xc0) {
                if (p + 1 >= msg_.size() || ++hops > 32) return false;
                const std::size_t target = ((len & 0x3f) << 8) | msg_[p + 1];
                if (!jumped) pos = p + 2;
                jumped = true;
                p = target;
                continue;
            }
            if (len & 0xc0) return false;
            if (len == 0) {
                if (!jumped) pos = p + 1;
                return true;
            }
            if (p + 1 + len > msg_.size()) return false;
            if (!out.empty()) out.push_back('.');
            out.append(reinterpret_cast<const char*>(msg_.data() + p + 1), len);
            p += 1 + len;
        }
    }

    std::span<const std::uint8_t> bytes() const { return msg_; }

private:
    std::span<const std::uint8_t> msg_;
};

/// Adds A/AAAA answers of a DNS response to the map. Returns answers added.
std::size_t mine_dns(std::span<const std::uint8_t> payload, double ts, DnsMap& dns) {
    if (payload.size() < 12) return 0;
    const std::uint8_t* h = payload.data();
    if (!(be16(h + 2) & 0x8000)) return 0;  // query, not response
    const std::uint16_t qdcount = be16(h + 4);
    const std::uint16_t ancount = be16(h + 6);
    DnsReader reader(payload);
    std::size_t pos = 12;
    std::string qname;
    std::string scratch;
    for (std::uint16_t i = 0; i < qdcount; ++i) {
        if (!reader.name(pos, i == 0 ? qname : scratch)) return 0;
        pos += 4;
        if (pos > payload.size()) return 0;
    }
    std::size_t added = 0;
    std::string owner;
    for (std::uint16_t i = 0; i < ancount; ++i) {
        if (!reader.name(pos, owner)) return added;
        if (pos + 10 > payload.size()) return added;
        const std::uint16_t type = be16(h + pos);
        const std::uint16_t rdlength = be16(h + pos + 8);
        pos += 10;
        if (pos + rdlength > payload.size()) return added;
        const std::string& fqdn = qname.empty() ? owner : qname;
        if (type == 1 && rdlength == 4) {
            dns.add(ts, ip_text(AF_INET, h + pos), fqdn);
            ++added;
        } else if (type == 28 && rdlength == 16) {
            dns.add(ts, ip_text(AF_INET6, h + pos), fqdn);
            ++added;
        }
        pos += rdlength;
    }
    return added;
}

}  // namespace

PcapResult parse_pcap(std::span<const std::byte> raw, const DeviceRegistry& registry) {
    const auto* data = reinterpret_cast<const std::uint8_t*>(raw.data());
    const std::size_t size = raw.size();
    if (size < kGlobalHeader) throw DataError("pcap: file shorter than the 24-byte global header");

    bool big_endian = false;
    bool nanos = false;
    const std::uint32_t magic = le32(data);
    if (magic == kMagicMicro || magic == kMagicNano) {
        nanos = magic == kMagicNano;
    } else if (be32(data) == kMagicMicro || be32(data) == kMagicNano) {
        big_endian = true;
        nanos = be32(data) == kMagicNano;
    } else {
        throw DataError("pcap: bad magic number");
    }
    auto u32 = [big_endian](const std::uint8_t* p) { return big_endian ? be32(p) : le32(p); };
    const std::uint32_t link = u32(data + 20);
    if (link != kLinkEthernet) throw DataError("pcap: unsupported link type " + std::to_string(link));

    PcapResult result;
    auto& counters = result.counters;
    std::size_t off = kGlobalHeader;
    while (off < size) {
        if (off + kRecordHeader > size) {
            ++counters.malformed;
            spdlog::warn("pcap: truncated packet header at offset {}", off);
            break;
        }
        const std::uint8_t* rh = data + off;
        const std::uint32_t ts_sec = u32(rh);
        const std::uint32_t ts_frac = u32(rh + 4);
        const std::uint32_t incl_len = u32(rh + 8);
        const std::uint32_t orig_len = u32(rh + 12);
        off += kRecordHeader;
        ++counters.packets;
        if (incl_len > size - off) {
            ++counters.malformed;
            spdlog::warn("pcap: packet {} truncated ({} of {} bytes present)", counters.packets, size - off, incl_len);
            break;
        }
        const std::uint8_t* frame = data + off;
        const std::size_t flen = incl_len;
        off += incl_len;
        const double ts = static_cast<double>(ts_sec) + static_cast<double>(ts_frac) / (nanos ? 1e9 : 1e6);

        if (flen < 14) {
            ++counters.malformed;
            continue;
        }
        MacAddress dst_mac, src_mac;
        std::copy(frame, frame + 6, dst_mac.begin());
        std::copy(frame + 6, frame + 12, src_mac.begin());
        std::size_t l3 = 14;
        std::uint16_t ethertype = be16(frame + 12);
        if (ethertype == kEtherVlan) {
            if (flen < 18) {
                ++counters.malformed;
                continue;
            }
            ethertype = be16(frame + 16);
            l3 = 18;
        }

        const DeviceId* device = registry.find(src_mac);
        Direction direction = Direction::Outgoing;
        if (!device) {
            device = registry.find(dst_mac);
            direction = Direction::Incoming;
        }
        if (!device) {
            ++counters.unregistered;
            continue;
        }

        std::uint8_t proto = 0;
        std::string src_ip, dst_ip;
        std::size_t l4 = 0;
        if (ethertype == kEtherIpv4) {
            if (flen < l3 + 20) {
                ++counters.malformed;
                continue;
            }
            const std::uint8_t* ip = frame + l3;
            const std::size_t ihl = static_cast<std::size_t>(ip[0] & 0x0f) * 4;
            if ((ip[0] >> 4) != 4 || ihl < 20 || flen < l3 + ihl) {
                ++counters.malformed;
                continue;
            }
            if (be16(ip + 6) & 0x1fff) {  // non-first fragment: no transport header
                ++counters.non_ip;
                continue;
            }
            proto = ip[9];
            src_ip = ip_text(AF_INET, ip + 12);
            dst_ip = ip_text(AF_INET, ip + 16);
            l4 = l3 + ihl;
        } else if (ethertype == kEtherIpv6) {
            if (flen < l3 + 40) {
                ++counters.malformed;
                continue;
            }
            const std::uint8_t* ip = frame + l3;
            proto = ip[6];
            src_ip = ip_text(AF_INET6, ip + 8);
            dst_ip = ip_text(AF_INET6, ip + 24);
            l4 = l3 + 40;
        } else {
            ++counters.non_ip;
            continue;
        }

        PacketRecord r;
        r.timestamp = ts;
        r.device = *device;
        r.direction = direction;
        r.length = orig_len;
        r.remote_ip = direction == Direction::Outgoing ? dst_ip : src_ip;

        if (proto == kIpTcp || proto == kIpUdp) {
            const std::size_t min_header = proto == kIpTcp ? 20 : 8;
            if (flen < l4 + min_header) {
                ++counters.malformed;
                continue;
            }
            r.protocol = proto == kIpTcp ? Protocol::Tcp : Protocol::Udp;
            r.src_port = be16(frame + l4);
            r.dst_port = be16(frame + l4 + 2);
            if (proto == kIpUdp && *r.src_port == 53) {
                counters.dns_answers +=
                    mine_dns(std::span<const std::uint8_t>(frame + l4 + 8, flen - l4 - 8), ts, result.dns);
            }
        } else if (proto == kIpIcmp || proto == kIpIcmpv6) {
            r.protocol = Protocol::Icmp;
        } else {
            ++counters.non_ip;
            continue;
        }
        result.records.push_back(std::move(r));
        ++counters.records;
    }
    return result;
}

PcapResult parse_pcap(const std::filesystem::path& path, const DeviceRegistry& registry) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open pcap " + path.string());
    std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_pcap(std::as_bytes(std::span<const char>(buf)), registry);
}

}  // namespace homeauth
