#include "homeauth/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "homeauth/error.hpp"
#include "homeauth/rng.hpp"

namespace homeauth {

using nlohmann::json;

double Lognormal::mean() const { return std::exp(mu + sigma * sigma / 2.0); }

void UserProfile::validate() const {
    if (user.empty()) throw ArgumentError("profile has an empty user id");
    const std::string who = "profile '" + user + "': ";
    bool active = false;
    for (const auto& [dev, u] : devices) {
        if (!(u.weight >= 0.0)) throw ArgumentError(who + "negative weight for " + dev);
        if (!(u.rate_per_min >= 0.0)) throw ArgumentError(who + "negative rate for " + dev);
        if (!(u.out_len.sigma > 0.0) || !(u.in_len.sigma > 0.0)) throw ArgumentError(who + "sigma must be > 0 for " + dev);
        if (u.weight > 0.0 && u.rate_per_min > 0.0) {
            active = true;
            double total = 0.0;
            for (const auto& [d, w] : u.domains) {
                if (!(w >= 0.0)) throw ArgumentError(who + "negative domain weight for " + dev);
                total += w;
            }
            if (std::abs(total - 1.0) > 1e-6) throw ArgumentError(who + "domain mixture for " + dev + " must sum to 1");
        }
    }
    if (!active) throw ArgumentError(who + "no device has positive weight");
    if (tcp < 0.0 || udp < 0.0 || icmp < 0.0 || std::abs(tcp + udp + icmp - 1.0) > 1e-6) {
        throw ArgumentError(who + "protocol mixture must be non-negative and sum to 1");
    }
    if (!(pause_prob >= 0.0 && pause_prob < 1.0)) throw ArgumentError(who + "pause_prob must be in [0, 1)");
}

void CorpusSpec::validate() const {
    if (profiles.size() < 2) throw ArgumentError("corpus needs at least 2 profiles");
    if (sessions_per_user < 1) throw ArgumentError("sessions_per_user must be >= 1");
    if (!(min_duration_min > 0.0) || !(max_duration_min >= min_duration_min)) {
        throw ArgumentError("session durations must satisfy 0 < min <= max");
    }
    if (!(gap_min >= 0.0)) throw ArgumentError("gap_min must be >= 0");
    const auto& devs = devices.empty() ? catalog_devices() : devices;
    const std::set<DeviceId> known(devs.begin(), devs.end());
    if (known.size() != devs.size()) throw ArgumentError("duplicate device in corpus device list");
    std::set<UserId> users;
    for (const auto& p : profiles) {
        p.validate();
        if (!users.insert(p.user).second) throw ArgumentError("duplicate profile user '" + p.user + "'");
        for (const auto& [dev, u] : p.devices) {
            if (!known.count(dev)) throw ArgumentError("profile '" + p.user + "' uses unknown device " + dev);
        }
    }
}

namespace {

json lognormal_json(const Lognormal& l) { return json{{"mu", l.mu}, {"sigma", l.sigma}}; }

Lognormal lognormal_from(const json& j) { return Lognormal{j.at("mu").get<double>(), j.at("sigma").get<double>()}; }

}  // namespace

json CorpusSpec::to_json() const {
    json ps = json::array();
    for (const auto& p : profiles) {
        json devs = json::object();
        for (const auto& [id, u] : p.devices) {
            devs[id] = json{{"weight", u.weight},
                            {"rate_per_min", u.rate_per_min},
                            {"out_len", lognormal_json(u.out_len)},
                            {"in_len", lognormal_json(u.in_len)},
                            {"domains", u.domains}};
        }
        ps.push_back(json{{"user", p.user},
                          {"devices", devs},
                          {"tcp", p.tcp},
                          {"udp", p.udp},
                          {"icmp", p.icmp},
                          {"pause_prob", p.pause_prob}});
    }
    return json{{"profiles", ps},
                {"devices", devices},
                {"sessions_per_user", sessions_per_user},
                {"min_duration_min", min_duration_min},
                {"max_duration_min", max_duration_min},
                {"gap_min", gap_min},
                {"start_epoch", start_epoch},
                {"seed", seed},
                {"rng", kRngName}};
}

namespace {

void read_scalars(const json& j, CorpusSpec& s) {
    if (auto it = j.find("sessions_per_user"); it != j.end()) s.sessions_per_user = it->get<int>();
    if (auto it = j.find("min_duration_min"); it != j.end()) s.min_duration_min = it->get<double>();
    if (auto it = j.find("max_duration_min"); it != j.end()) s.max_duration_min = it->get<double>();
    if (auto it = j.find("gap_min"); it != j.end()) s.gap_min = it->get<double>();
    if (auto it = j.find("start_epoch"); it != j.end()) s.start_epoch = it->get<double>();
    if (auto it = j.find("seed"); it != j.end()) s.seed = it->get<std::uint64_t>();
    if (auto it = j.find("devices"); it != j.end()) s.devices = it->get<std::vector<DeviceId>>();
}

}  // namespace

CorpusSpec CorpusSpec::from_json(const json& j) {
    try {
        CorpusSpec s;
        s.devices = catalog_devices();
        read_scalars(j, s);
        for (const auto& pj : j.at("profiles")) {
            UserProfile p;
            p.user = pj.at("user").get<std::string>();
            p.tcp = pj.value("tcp", p.tcp);
            p.udp = pj.value("udp", p.udp);
            p.icmp = pj.value("icmp", p.icmp);
            p.pause_prob = pj.value("pause_prob", p.pause_prob);
            for (const auto& [id, dj] : pj.at("devices").items()) {
                DeviceUsage u;
                u.weight = dj.at("weight").get<double>();
                u.rate_per_min = dj.at("rate_per_min").get<double>();
                u.out_len = lognormal_from(dj.at("out_len"));
                u.in_len = lognormal_from(dj.at("in_len"));
                u.domains = dj.at("domains").get<std::map<std::string, double>>();
                p.devices.emplace(id, std::move(u));
            }
            s.profiles.push_back(std::move(p));
        }
        return s;
    } catch (const json::exception& e) {
        throw ArgumentError(std::string("corpus spec: ") + e.what());
    }
}

std::optional<Separation> parse_separation(std::string_view s) noexcept {
    if (s == "high") return Separation::High;
    if (s == "medium") return Separation::Medium;
    if (s == "low") return Separation::Low;
    return std::nullopt;
}

std::string_view to_string(Separation s) noexcept {
    switch (s) {
        case Separation::High: return "high";
        case Separation::Medium: return "medium";
        case Separation::Low: return "low";
    }
    return "?";
}

namespace {

struct CatalogEntry {
    DeviceId id;
    bool interactive;
    double rate;  // outgoing events per minute at weight 1
    double out_mu;
    double in_mu;
    std::vector<std::string> domains;
};

const std::vector<CatalogEntry>& catalog() {
    static const std::vector<CatalogEntry> entries{
        {"echo_dot", true, 14, 5.2, 5.9, {"amazon.com", "amazonaws.com", "amazonalexa.com"}},
        {"echo_show", true, 18, 5.4, 6.4, {"amazon.com", "amazonaws.com", "amazonvideo.com", "cloudfront.net"}},
        {"fire_tv", true, 30, 5.0, 6.9, {"amazon.com", "amazonvideo.com", "cloudfront.net", "hulu.com", "netflix.com"}},
        {"roku_tv", true, 28, 5.1, 6.8, {"hulu.com", "netflix.com", "pandora.com", "roku.com", "youtube.com"}},
        {"chromecast", true, 26, 4.9, 6.9, {"google.com", "googlevideo.com", "spotify.com", "youtube.com"}},
        {"google_home", true, 12, 5.3, 5.8, {"google.com", "googleapis.com", "gstatic.com", "spotify.com"}},
        {"apple_tv", true, 24, 5.0, 6.7, {"apple.com", "icloud.com", "mzstatic.com", "netflix.com"}},
        {"sonos_speaker", true, 16, 4.8, 6.5, {"pandora.com", "sonos.com", "spotify.com", "tunein.com"}},
        {"xbox", true, 34, 5.6, 6.3, {"live.com", "microsoft.com", "twitch.tv", "xboxlive.com"}},
        {"ipad", true, 22, 5.7, 6.6, {"apple.com", "bbc.co.uk", "facebook.com", "icloud.com", "instagram.com", "youtube.com"}},
        {"nest_thermostat", false, 3, 5.5, 5.3, {"googleapis.com", "nest.com"}},
        {"ring_doorbell", false, 6, 6.2, 5.0, {"amazonaws.com", "ring.com"}},
        {"hue_bridge", false, 4, 4.6, 4.9, {"meethue.com", "philips.com"}},
        {"wemo_plug", false, 2, 4.5, 4.7, {"belkin.com", "wemo.com"}},
        {"smartthings_hub", false, 3, 5.0, 5.1, {"samsung.com", "smartthings.com"}},
    };
    return entries;
}

const CatalogEntry& entry(std::string_view id) {
    for (const auto& e : catalog()) {
        if (e.id == id) return e;
    }
    throw ArgumentError("unknown catalog device " + std::string(id));
}

std::map<std::string, double> normalized(std::map<std::string, double> w) {
    double total = 0.0;
    for (const auto& [k, v] : w) total += v;
    for (auto& [k, v] : w) v /= total;
    return w;
}

std::map<std::string, double> uniform_mixture(const CatalogEntry& e) {
    std::map<std::string, double> w;
    for (const auto& d : e.domains) w[d] = 1.0;
    return normalized(std::move(w));
}

/// Random mixture concentrated on a user-specific lead domain.
std::map<std::string, double> skewed_mixture(const CatalogEntry& e, std::size_t lead, double boost, Rng& rng) {
    std::map<std::string, double> w;
    for (std::size_t i = 0; i < e.domains.size(); ++i) {
        w[e.domains[i]] = (i == lead % e.domains.size() ? boost : 0.0) + rng.uniform(0.05, 1.0);
    }
    return normalized(std::move(w));
}

DeviceUsage base_usage(const CatalogEntry& e, double weight) {
    DeviceUsage u;
    u.weight = weight;
    u.rate_per_min = e.rate;
    u.out_len = {e.out_mu, 0.5};
    u.in_len = {e.in_mu, 0.5};
    u.domains = uniform_mixture(e);
    return u;
}

}  // namespace

const std::vector<DeviceId>& catalog_devices() {
    static const std::vector<DeviceId> ids = [] {
        std::vector<DeviceId> v;
        for (const auto& e : catalog()) v.push_back(e.id);
        return v;
    }();
    return ids;
}

const std::vector<std::string>& catalog_domains(std::string_view device) { return entry(device).domains; }

std::vector<DeviceId> favorite_devices(const UserProfile& p) {
    double top = 0.0;
    for (const auto& [id, u] : p.devices) top = std::max(top, u.weight);
    std::vector<DeviceId> out;
    if (top <= 0.0) return out;
    for (const auto& [id, u] : p.devices) {
        if (u.weight >= top / 2.0) out.push_back(id);
    }
    return out;
}

std::vector<UserProfile> preset_profiles(int n_users, Separation separation, std::uint64_t seed) {
    if (n_users < 2 || n_users > 10) throw ArgumentError("preset profiles need 2 to 10 users");
    Rng rng(derive_seed(seed, 0x70726f66));
    std::vector<const CatalogEntry*> interactive, background;
    for (const auto& e : catalog()) (e.interactive ? interactive : background).push_back(&e);
    const auto n = static_cast<std::size_t>(n_users);
    const std::size_t ni = interactive.size();

    std::vector<UserProfile> out;
    for (std::size_t u = 0; u < n; ++u) {
        UserProfile p;
        p.user = "user" + std::to_string(u + 1);
        for (const auto* e : background) p.devices[e->id] = base_usage(*e, 0.15);
        switch (separation) {
            case Separation::High: {
                for (std::size_t i = 0; i < ni; ++i) {
                    const auto& e = *interactive[i];
                    if (i % n == u) {
                        auto usage = base_usage(e, rng.uniform(0.8, 1.0));
                        usage.domains = skewed_mixture(e, u, 4.0, rng);
                        usage.out_len.mu += rng.uniform(-0.3, 0.3);
                        usage.in_len.mu += rng.uniform(-0.3, 0.3);
                        p.devices[e.id] = std::move(usage);
                    } else {
                        p.devices[e.id] = base_usage(e, 0.0);
                    }
                }
                break;
            }
            case Separation::Medium: {
                // Four favorites each; neighbouring users share two of them.
                std::set<std::size_t> favorites;
                for (std::size_t j = 0; j < 4; ++j) favorites.insert((2 * u + j) % ni);
                for (std::size_t i = 0; i < ni; ++i) {
                    const auto& e = *interactive[i];
                    const double w = favorites.count(i) ? rng.uniform(0.5, 1.0) : rng.uniform(0.0, 0.3);
                    auto usage = base_usage(e, w);
                    usage.rate_per_min *= rng.uniform(0.85, 1.15);
                    usage.domains = skewed_mixture(e, u + i, 1.0, rng);
                    usage.out_len.mu += rng.uniform(-0.15, 0.15);
                    usage.in_len.mu += rng.uniform(-0.15, 0.15);
                    usage.out_len.sigma = rng.uniform(0.4, 0.6);
                    usage.in_len.sigma = rng.uniform(0.4, 0.6);
                    p.devices[e.id] = std::move(usage);
                }
                p.udp = rng.uniform(0.1, 0.25);
                p.icmp = 0.02;
                p.tcp = 1.0 - p.udp - p.icmp;
                break;
            }
            case Separation::Low: {
                for (std::size_t i = 0; i < ni; ++i) {
                    const auto& e = *interactive[i];
                    p.devices[e.id] = base_usage(e, 0.5 * rng.uniform(0.95, 1.05));
                    p.devices[e.id].rate_per_min *= rng.uniform(0.95, 1.05);
                }
                break;
            }
        }
        out.push_back(std::move(p));
    }
    return out;
}

namespace {

std::string remote_ip_for(std::string_view domain) {
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : domain) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
    return "198.18." + std::to_string((h >> 8) & 0xff) + "." + std::to_string(h & 0xff);
}

std::uint32_t draw_length(const Lognormal& l, Rng& rng) {
    const double v = std::round(rng.lognormal(l.mu, l.sigma));
    return static_cast<std::uint32_t>(std::clamp(v, 40.0, 65535.0));
}

struct Event {
    std::int64_t us;
    PacketRecord rec;
};

}  // namespace

Corpus generate_corpus(const CorpusSpec& spec) {
    spec.validate();
    Corpus c;

    const auto& devices = spec.devices.empty() ? catalog_devices() : spec.devices;
    std::map<std::string, DeviceId> macs;
    for (std::size_t i = 0; i < devices.size(); ++i) {
        char buf[18];
        std::snprintf(buf, sizeof buf, "02:00:00:00:%02x:%02x", static_cast<unsigned>((i + 1) >> 8),
                      static_cast<unsigned>((i + 1) & 0xff));
        macs[buf] = devices[i];
    }
    c.registry = DeviceRegistry(macs, devices);

    Rng layout(derive_seed(spec.seed, 1));
    const auto n_users = spec.profiles.size();
    std::int64_t cursor_us = static_cast<std::int64_t>(std::llround(spec.start_epoch * 1e6));
    const auto gap_us = static_cast<std::int64_t>(std::llround(spec.gap_min * 60e6));

    json per_user = json::object();
    json session_truth = json::array();
    for (int s = 0; s < spec.sessions_per_user; ++s) {
        for (std::size_t ui = 0; ui < n_users; ++ui) {
            const auto& profile = spec.profiles[ui];
            const double minutes = layout.uniform(spec.min_duration_min, spec.max_duration_min);
            const auto dur_us = std::max<std::int64_t>(1'000'000, std::llround(minutes * 60.0) * 1'000'000);
            const std::int64_t start_us = cursor_us;
            const std::int64_t end_us = start_us + dur_us;
            cursor_us = end_us + gap_us;

            SessionLog log;
            char sid[32];
            std::snprintf(sid, sizeof sid, "%s_s%02d", profile.user.c_str(), s + 1);
            log.session_id = sid;
            log.user = profile.user;
            log.start = static_cast<double>(start_us) / 1e6;
            log.end = static_cast<double>(end_us) / 1e6;
            c.sessions.push_back(log);

            Rng rng(derive_seed(spec.seed, 1000 + static_cast<std::uint64_t>(s) * n_users + ui));
            std::vector<Event> events;
            const std::int64_t minutes_total = (dur_us + 59'999'999) / 60'000'000;
            std::map<DeviceId, double> jitter;
            for (const auto& [id, u] : profile.devices) jitter[id] = rng.lognormal(0.0, 0.35);
            for (std::int64_t m = 0; m < minutes_total; ++m) {
                if (rng.bernoulli(profile.pause_prob)) continue;
                const double minute_start = static_cast<double>(start_us) / 1e6 + 60.0 * static_cast<double>(m);
                for (const auto& [id, u] : profile.devices) {
                    const double rate = u.weight * u.rate_per_min * jitter[id] / 60.0;  // per second
                    if (rate <= 0.0) continue;
                    std::vector<double> dom_w;
                    std::vector<const std::string*> dom_names;
                    for (const auto& [d, w] : u.domains) {
                        dom_names.push_back(&d);
                        dom_w.push_back(w);
                    }
                    double t = rng.exponential(rate);
                    while (t < 60.0) {
                        const auto at_us = static_cast<std::int64_t>(std::llround((minute_start + t) * 1e6));
                        t += rng.exponential(rate);
                        const double pr = rng.uniform();
                        const Protocol proto =
                            pr < profile.tcp ? Protocol::Tcp : (pr < profile.tcp + profile.udp ? Protocol::Udp : Protocol::Icmp);
                        const std::string& domain =
                            dom_names.empty() ? std::string(kUnknownDomain) : *dom_names[rng.categorical(dom_w)];
                        PacketRecord out;
                        out.device = id;
                        out.direction = Direction::Outgoing;
                        out.protocol = proto;
                        out.length = draw_length(u.out_len, rng);
                        out.remote_ip = remote_ip_for(domain);
                        out.domain = domain;
                        PacketRecord in = out;
                        in.direction = Direction::Incoming;
                        in.length = draw_length(u.in_len, rng);
                        if (proto != Protocol::Icmp) {
                            const auto eph = static_cast<std::uint16_t>(49152 + rng.below(16384));
                            out.src_port = eph;
                            out.dst_port = 443;
                            in.src_port = 443;
                            in.dst_port = eph;
                        }
                        const auto lag_us = 1000 + static_cast<std::int64_t>(std::llround(rng.exponential(20.0) * 1e6));
                        if (at_us >= end_us) continue;
                        events.push_back({at_us, std::move(out)});
                        if (at_us + lag_us < end_us) events.push_back({at_us + lag_us, std::move(in)});
                    }
                }
            }
            // Per device, force strictly increasing microsecond stamps.
            std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
                return a.rec.device != b.rec.device ? a.rec.device < b.rec.device : a.us < b.us;
            });
            std::vector<Event> kept;
            kept.reserve(events.size());
            for (std::size_t i = 0; i < events.size(); ++i) {
                auto e = std::move(events[i]);
                if (!kept.empty() && kept.back().rec.device == e.rec.device && e.us <= kept.back().us) {
                    e.us = kept.back().us + 1;
                }
                if (e.us >= end_us) continue;
                kept.push_back(std::move(e));
            }
            std::stable_sort(kept.begin(), kept.end(), [](const Event& a, const Event& b) { return a.us < b.us; });

            json& ut = per_user[profile.user];
            if (ut.is_null()) ut = json{{"sessions", 0}, {"records", 0}, {"devices", json::object()}};
            ut["sessions"] = ut["sessions"].get<int>() + 1;
            ut["records"] = ut["records"].get<std::size_t>() + kept.size();
            for (auto& e : kept) {
                e.rec.timestamp = static_cast<double>(e.us) / 1e6;
                json& dt = ut["devices"][e.rec.device];
                if (dt.is_null()) dt = json{{"out", 0}, {"in", 0}, {"out_bytes", 0}, {"in_bytes", 0}};
                const char* key = e.rec.direction == Direction::Outgoing ? "out" : "in";
                const char* bytes = e.rec.direction == Direction::Outgoing ? "out_bytes" : "in_bytes";
                dt[key] = dt[key].get<std::uint64_t>() + 1;
                dt[bytes] = dt[bytes].get<std::uint64_t>() + e.rec.length;
                c.records.push_back(std::move(e.rec));
            }
            session_truth.push_back(json{{"session_id", log.session_id},
                                         {"user", log.user},
                                         {"start", log.start},
                                         {"end", log.end},
                                         {"records", kept.size()}});
        }
    }
    c.ground_truth = json{{"seed", spec.seed},
                          {"rng", kRngName},
                          {"records", c.records.size()},
                          {"sessions", session_truth},
                          {"users", per_user}};
    return c;
}

void write_corpus(const Corpus& corpus, const CorpusSpec& spec, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
    write_records(dir / "records.jsonl", corpus.records);
    write_sessions(dir / "sessions.csv", corpus.sessions);
    corpus.registry.save(dir / "registry.json");
    auto dump = [&](const std::filesystem::path& p, const json& j) {
        std::ofstream out(p, std::ios::binary);
        if (!out) throw DataError("cannot write " + p.string());
        out << j.dump(2) << '\n';
    };
    dump(dir / "ground_truth.json", corpus.ground_truth);
    dump(dir / "spec.json", spec.to_json());
}

CorpusSpec load_corpus_spec(const json& j) {
    if (!j.is_object()) throw ArgumentError("corpus spec must be a JSON object");
    auto preset = j.find("preset");
    if (preset == j.end()) return CorpusSpec::from_json(j);
    try {
        CorpusSpec s;
        s.devices = catalog_devices();
        read_scalars(j, s);
        const int users = preset->value("users", 6);
        const auto sep_name = preset->value("separation", std::string("medium"));
        const auto sep = parse_separation(sep_name);
        if (!sep) throw ArgumentError("unknown separation '" + sep_name + "' (expected high, medium or low)");
        s.profiles = preset_profiles(users, *sep, preset->value("seed", s.seed));
        return s;
    } catch (const json::exception& e) {
        throw ArgumentError(std::string("corpus spec: ") + e.what());
    }
}

}  // namespace homeauth
