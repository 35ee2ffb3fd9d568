#include <doctest.h>

#include <cstring>
#include <sstream>

#include "fixtures/pcap_fixtures.hpp"
#include "homeauth/error.hpp"
#include "homeauth/ingest.hpp"
#include "homeauth/pcap.hpp"
#include "homeauth/record.hpp"
#include "support.hpp"

using namespace homeauth;
using nlohmann::json;

namespace {

DeviceRegistry fixture_registry() {
    return DeviceRegistry({{"02:00:00:00:00:01", "echo_dot"}, {"02:00:00:00:00:02", "smart_tv"}},
                          {"echo_dot", "smart_tv"});
}

template <std::size_t N>
std::span<const std::byte> bytes_of(const unsigned char (&a)[N]) {
    return std::as_bytes(std::span<const unsigned char>(a, N));
}

PacketRecord expected(double t, const char* dev, Direction d, Protocol p, std::uint32_t len,
                      std::optional<std::uint16_t> sp, std::optional<std::uint16_t> dp, const char* ip,
                      const char* domain) {
    PacketRecord r;
    r.timestamp = t;
    r.device = dev;
    r.direction = d;
    r.protocol = p;
    r.length = len;
    r.src_port = sp;
    r.dst_port = dp;
    r.remote_ip = ip;
    r.domain = domain;
    return r;
}

// Hand-built little-endian pcap with one UDP frame of `frame_len` bytes.
std::vector<std::byte> single_udp_pcap(std::size_t frame_len) {
    std::vector<std::uint8_t> b;
    auto le32 = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    };
    auto le16 = [&](std::uint16_t v) {
        b.push_back(static_cast<std::uint8_t>(v));
        b.push_back(static_cast<std::uint8_t>(v >> 8));
    };
    le32(0xa1b2c3d4);
    le16(2);
    le16(4);
    le32(0);
    le32(0);
    le32(65535);
    le32(1);
    le32(100);
    le32(250000);
    le32(static_cast<std::uint32_t>(frame_len));
    le32(static_cast<std::uint32_t>(frame_len));
    std::vector<std::uint8_t> f(frame_len, 0);
    const std::uint8_t dst[6] = {0xaa, 0xbb, 0xcc, 0xdd, 0xee, 0xff};
    const std::uint8_t src[6] = {0x02, 0, 0, 0, 0, 0x01};
    std::memcpy(f.data(), dst, 6);
    std::memcpy(f.data() + 6, src, 6);
    f[12] = 0x08;
    f[14] = 0x45;
    const auto ip_len = static_cast<std::uint16_t>(frame_len - 14);
    f[16] = static_cast<std::uint8_t>(ip_len >> 8);
    f[17] = static_cast<std::uint8_t>(ip_len);
    f[22] = 64;
    f[23] = 17;
    const std::uint8_t sip[4] = {192, 168, 1, 10}, dip[4] = {93, 184, 216, 34};
    std::memcpy(f.data() + 26, sip, 4);
    std::memcpy(f.data() + 30, dip, 4);
    f[34] = 0xc3;  // 50000
    f[35] = 0x50;
    f[36] = 0x01;  // 443
    f[37] = 0xbb;
    b.insert(b.end(), f.begin(), f.end());
    std::vector<std::byte> out(b.size());
    std::memcpy(out.data(), b.data(), b.size());
    return out;
}

}  // namespace

TEST_CASE("record JSONL example maps field by field") {
    std::istringstream in(
        R"({"timestamp":10.0,"device":"echo_dot","direction":"out","protocol":"tcp","length":310,"src_port":50000,"dst_port":443,"remote_ip":"1.2.3.4","domain":"spotify.com"})"
        "\n");
    const auto rs = read_records(in);
    REQUIRE(rs.size() == 1);
    CHECK(rs[0] == expected(10.0, "echo_dot", Direction::Outgoing, Protocol::Tcp, 310, 50000, 443, "1.2.3.4",
                            "spotify.com"));
}

TEST_CASE("empty JSONL gives no records") {
    std::istringstream in("");
    CHECK(read_records(in).empty());
}

TEST_CASE("negative length is a schema error naming line and field") {
    std::istringstream in(
        "\n"
        R"({"timestamp":1,"device":"d","direction":"in","protocol":"udp","length":-5,"remote_ip":"x"})"
        "\n");
    try {
        read_records(in);
        FAIL("expected a schema error");
    } catch (const SchemaError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 2") != std::string::npos);
        CHECK(msg.find("length") != std::string::npos);
    }
}

TEST_CASE("record validation") {
    auto bad = [](const std::string& line) {
        std::istringstream in(line + "\n");
        CHECK_THROWS_AS(read_records(in), DataError);
    };
    bad(R"({"timestamp":1,"device":"d","direction":"in","protocol":"icmp","length":5,"src_port":1,"remote_ip":"x"})");
    bad(R"({"timestamp":1,"device":"d","direction":"sideways","protocol":"tcp","length":5,"remote_ip":"x"})");
    bad(R"({"timestamp":1,"device":"d","direction":"in","protocol":"tcp","length":5,"src_port":70000,"remote_ip":"x"})");
    bad(R"({"device":"d","direction":"in","protocol":"tcp","length":5,"remote_ip":"x"})");
    bad("{not json");
}

TEST_CASE("records round-trip through JSONL, including null ports and default domain") {
    std::vector<PacketRecord> rs{testing::record(1.000001, "a"),
                                 testing::record(2.5, "b", Direction::Incoming, Protocol::Icmp, 64)};
    rs[0].domain = "spotify.com";
    std::stringstream ss;
    write_records(ss, rs);
    CHECK(ss.str().find("\"src_port\":null") != std::string::npos);
    CHECK(read_records(ss) == rs);
}

TEST_CASE("sort_by_time is stable") {
    std::vector<PacketRecord> rs{testing::record(2, "a"), testing::record(1, "b"), testing::record(2, "c"),
                                 testing::record(1, "d")};
    sort_by_time(rs);
    CHECK(rs[0].device == "b");
    CHECK(rs[1].device == "d");
    CHECK(rs[2].device == "a");
    CHECK(rs[3].device == "c");
}

TEST_CASE("second-level domains") {
    CHECK(second_level_domain("music.spotify.com") == "spotify.com");
    CHECK(second_level_domain("sounds.kwimer.com") == "kwimer.com");
    CHECK(second_level_domain("cdn.media.example.co.uk") == "example.co.uk");
    CHECK(second_level_domain("Music.Spotify.COM.") == "spotify.com");
    CHECK(second_level_domain("localhost") == "localhost");
    CHECK(second_level_domain("spotify.com") == "spotify.com");
    const std::vector<std::string> none;
    CHECK(second_level_domain("cdn.media.example.co.uk", none) == "co.uk");
    for (const char* s : {"a.b.c.d.e", "x.co.uk", "co.uk", "www.bbc.co.uk", "A.B.COM."}) {
        const auto once = second_level_domain(s);
        CHECK(second_level_domain(once) == once);
    }
}

TEST_CASE("MAC parsing and formatting") {
    auto mac = parse_mac("02:AB:cd:00:10:ff");
    REQUIRE(mac);
    CHECK(format_mac(*mac) == "02:ab:cd:00:10:ff");
    CHECK(parse_mac("02-ab-cd-00-10-ff"));
    CHECK_FALSE(parse_mac("02:ab:cd:00:10"));
    CHECK_FALSE(parse_mac("02:ab:cd:00:10:fg"));
}

TEST_CASE("registry validation and JSON round trip") {
    const auto reg = fixture_registry();
    CHECK(DeviceRegistry::from_json(reg.to_json()).device_order() == reg.device_order());
    CHECK(*DeviceRegistry::from_json(reg.to_json()).find(*parse_mac("02:00:00:00:00:02")) == "smart_tv");
    CHECK_THROWS_AS(DeviceRegistry({{"02:00:00:00:00:01", "a"}, {"02:00:00:00:00:02", "a"}}, {"a"}), SchemaError);
    CHECK_THROWS_AS(DeviceRegistry({{"02:00:00:00:00:01", "a"}}, {"b"}), SchemaError);
    CHECK_THROWS_AS(DeviceRegistry({}, {"a", "a"}), SchemaError);
    CHECK_THROWS_AS(DeviceRegistry::from_json(json{{"02:00:00:00:00:01", "a"}}), SchemaError);
}

TEST_CASE("DNS lookup uses the latest entry at or before t") {
    DnsMap dns;
    dns.add(10, "13.33.74.1", "x.com");
    dns.add(40, "13.33.74.1", "y.com");
    CHECK(dns.lookup("13.33.74.1", 45) == "y.com");
    CHECK(dns.lookup("13.33.74.1", 20) == "x.com");
    CHECK(dns.lookup("13.33.74.1", 5) == "y.com");
    CHECK_FALSE(dns.lookup("9.9.9.9", 5));
    CHECK(DnsMap::from_json(dns.to_json()).entries() == dns.entries());
}

TEST_CASE("annotate_domains") {
    DnsMap dns;
    dns.add(10, "13.33.74.1", "a.b.iheart.com");
    auto r = testing::record(50, "echo");
    r.remote_ip = "13.33.74.1";
    auto u = testing::record(51, "echo");
    u.remote_ip = "8.8.4.4";
    auto out = annotate_domains({r, u}, dns);
    CHECK(out[0].domain == "iheart.com");
    CHECK(out[1].domain == "unknown");
    CHECK(annotate_domains(out, dns) == out);
}

TEST_CASE("pcap fixture decodes to the exact record stream") {
    const auto result = parse_pcap(bytes_of(fixtures::kLittleEndianMicro), fixture_registry());
    const std::vector<PacketRecord> want{
        expected(1614592800.000001, "echo_dot", Direction::Incoming, Protocol::Udp, 146, 53, 50000, "192.168.1.1",
                 "unknown"),
        expected(1614592800.5, "echo_dot", Direction::Outgoing, Protocol::Tcp, 154, 50001, 443, "52.1.2.3",
                 "unknown"),
        expected(1614592800.75, "echo_dot", Direction::Incoming, Protocol::Tcp, 454, 443, 50001, "52.1.2.3",
                 "unknown"),
        expected(1614592801.25, "smart_tv", Direction::Outgoing, Protocol::Icmp, 46, std::nullopt, std::nullopt,
                 "8.8.8.8", "unknown"),
    };
    CHECK(result.records == want);
    CHECK(result.counters.packets == 5);
    CHECK(result.counters.records == 4);
    CHECK(result.counters.unregistered == 1);
    CHECK(result.counters.malformed == 0);
    CHECK(result.counters.dns_answers == 2);
    const std::vector<DnsMap::Entry> dns_want{{1614592800.000001, "52.1.2.3", "api.amazon.com"},
                                              {1614592800.000001, "2600:1f18::5", "api.amazon.com"}};
    CHECK(result.dns.entries() == dns_want);

    const auto annotated = annotate_domains(result.records, result.dns);
    CHECK(annotated[0].domain == "unknown");
    CHECK(annotated[1].domain == "amazon.com");
    CHECK(annotated[2].domain == "amazon.com");
}

TEST_CASE("pcap byte order and timestamp resolution do not change the stream") {
    const auto reg = fixture_registry();
    const auto le = parse_pcap(bytes_of(fixtures::kLittleEndianMicro), reg);
    const auto be = parse_pcap(bytes_of(fixtures::kBigEndianMicro), reg);
    const auto ns = parse_pcap(bytes_of(fixtures::kLittleEndianNano), reg);
    CHECK(le.records == be.records);
    CHECK(le.records == ns.records);
    CHECK(le.dns.entries() == be.dns.entries());
}

TEST_CASE("hand-built single UDP frame") {
    const auto bytes = single_udp_pcap(120);
    const auto r = parse_pcap(bytes, fixture_registry());
    REQUIRE(r.records.size() == 1);
    CHECK(r.records[0].direction == Direction::Outgoing);
    CHECK(r.records[0].protocol == Protocol::Udp);
    CHECK(r.records[0].length == 120);
    CHECK(r.records[0].remote_ip == "93.184.216.34");
    CHECK(r.records[0].dst_port == 443);
    CHECK(r.records[0].timestamp == 100.25);
}

TEST_CASE("pcap error handling") {
    const auto reg = fixture_registry();
    auto bytes = single_udp_pcap(120);
    SUBCASE("header only") {
        bytes.resize(24);
        const auto r = parse_pcap(bytes, reg);
        CHECK(r.records.empty());
        CHECK(r.counters.packets == 0);
    }
    SUBCASE("bad magic") {
        bytes[0] = std::byte{0};
        CHECK_THROWS_AS(parse_pcap(bytes, reg), DataError);
    }
    SUBCASE("short global header") {
        bytes.resize(10);
        CHECK_THROWS_AS(parse_pcap(bytes, reg), DataError);
    }
    SUBCASE("unknown link type") {
        bytes[20] = std::byte{101};
        CHECK_THROWS_AS(parse_pcap(bytes, reg), DataError);
    }
    SUBCASE("truncated packet") {
        bytes.resize(bytes.size() - 10);
        const auto r = parse_pcap(bytes, reg);
        CHECK(r.records.empty());
        CHECK(r.counters.malformed == 1);
    }
    SUBCASE("no registered MACs") {
        const DeviceRegistry empty({}, {"nobody"});
        const auto r = parse_pcap(bytes_of(fixtures::kLittleEndianMicro), empty);
        CHECK(r.records.empty());
        CHECK(r.counters.unregistered == r.counters.packets);
        CHECK(r.dns.size() == 0);
    }
}
