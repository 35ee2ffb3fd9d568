#include "homeauth/sessions.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "homeauth/error.hpp"

namespace homeauth {

void validate_sessions(std::span<const SessionLog> sessions) {
    std::set<std::string> ids;
    std::map<UserId, std::vector<const SessionLog*>> by_user;
    for (const auto& s : sessions) {
        if (s.session_id.empty()) throw DataError("session with empty id");
        if (s.user.empty()) throw DataError("session " + s.session_id + ": empty user");
        if (!(s.end > s.start)) throw DataError("session " + s.session_id + ": end must be after start");
        if (!ids.insert(s.session_id).second) throw DataError("duplicate session id " + s.session_id);
        by_user[s.user].push_back(&s);
    }
    for (auto& [user, list] : by_user) {
        std::sort(list.begin(), list.end(), [](auto* a, auto* b) { return a->start < b->start; });
        for (std::size_t i = 1; i < list.size(); ++i) {
            if (list[i]->start < list[i - 1]->end)
                throw DataError("sessions " + list[i - 1]->session_id + " and " + list[i]->session_id + " of user " +
                                user + " overlap");
        }
    }
}

std::vector<ObservationWindow> generate_windows(const SessionLog& session, double delta, double stride) {
    if (!(delta > 0.0)) throw ArgumentError("window length must be positive");
    if (!(stride > 0.0)) throw ArgumentError("stride must be positive");
    std::vector<ObservationWindow> out;
    if (session.end - session.start < delta) {
        out.push_back(ObservationWindow{session.start, session.end, session.user, session.session_id, {}});
        return out;
    }
    for (std::size_t k = 0;; ++k) {
        const double t_start = session.start + static_cast<double>(k) * stride;
        const double t_end = t_start + delta;
        if (t_end > session.end) break;
        out.push_back(ObservationWindow{t_start, t_end, session.user, session.session_id, {}});
    }
    return out;
}

std::vector<ObservationWindow> generate_windows(const SessionLog& session, std::span<const PacketRecord> sorted_records,
                                                double delta, double stride) {
    auto windows = generate_windows(session, delta, stride);
    assign_records(windows, sorted_records);
    return windows;
}

void assign_records(std::span<ObservationWindow> windows, std::span<const PacketRecord> sorted_records) {
    auto by_time = [](const PacketRecord& r, double t) { return r.timestamp < t; };
    for (auto& w : windows) {
        auto first = std::lower_bound(sorted_records.begin(), sorted_records.end(), w.t_start, by_time);
        auto last = std::lower_bound(first, sorted_records.end(), w.t_end, by_time);
        w.records.assign(first, last);
    }
}

std::size_t window_count(double duration, double delta, double stride) {
    if (!(delta > 0.0) || !(stride > 0.0)) throw ArgumentError("window length and stride must be positive");
    if (duration < delta) return 1;
    return static_cast<std::size_t>(std::floor((duration - delta) / stride)) + 1;
}

double parse_iso8601(std::string_view text) {
    const std::string s(text);
    int y, mo, d, h, mi;
    int consumed = 0;
    if (std::sscanf(s.c_str(), "%4d-%2d-%2d%*1[T ]%2d:%2d:%n", &y, &mo, &d, &h, &mi, &consumed) != 5 || consumed == 0)
        throw DataError("invalid ISO-8601 time '" + s + "'");
    std::size_t pos = static_cast<std::size_t>(consumed);
    std::size_t end = pos;
    while (end < s.size() && (std::isdigit(static_cast<unsigned char>(s[end])) || s[end] == '.')) ++end;
    double seconds;
    try {
        seconds = std::stod(s.substr(pos, end - pos));
    } catch (const std::exception&) {
        throw DataError("invalid ISO-8601 seconds in '" + s + "'");
    }
    double offset = 0.0;
    if (end < s.size()) {
        const char z = s[end];
        if (z == 'Z' && end + 1 == s.size()) {
            offset = 0.0;
        } else if ((z == '+' || z == '-') && s.size() - end == 6 && s[end + 3] == ':') {
            const int oh = std::stoi(s.substr(end + 1, 2));
            const int om = std::stoi(s.substr(end + 4, 2));
            offset = (z == '+' ? 1.0 : -1.0) * (oh * 3600.0 + om * 60.0);
        } else {
            throw DataError("invalid ISO-8601 zone in '" + s + "'");
        }
    }
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || seconds >= 61.0) throw DataError("invalid ISO-8601 date '" + s + "'");
    const auto days = sys_days{ymd}.time_since_epoch().count();
    return static_cast<double>(days) * 86400.0 + h * 3600.0 + mi * 60.0 + seconds - offset;
}

std::string format_iso8601(double epoch_seconds) {
    using namespace std::chrono;
    const long long total_us = std::llround(epoch_seconds * 1e6);
    long long secs = total_us / 1000000;
    long long us = total_us % 1000000;
    if (us < 0) {
        us += 1000000;
        secs -= 1;
    }
    const sys_seconds tp{seconds{secs}};
    const auto dp = floor<days>(tp);
    const year_month_day ymd{dp};
    const hh_mm_ss hms{tp - dp};
    char buf[64];
    int n = std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                          static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                          static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                          static_cast<int>(hms.seconds().count()));
    if (us != 0) n += std::snprintf(buf + n, sizeof buf - n, ".%06lld", us);
    std::snprintf(buf + n, sizeof buf - n, "Z");
    return buf;
}

std::vector<SessionLog> read_sessions(std::istream& in) {
    std::vector<SessionLog> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        if (lineno == 1 && line.rfind("session_id", 0) == 0) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() != 4) throw DataError("sessions line " + std::to_string(lineno) + ": expected 4 fields");
        try {
            out.push_back(SessionLog{fields[0], fields[1], parse_iso8601(fields[2]), parse_iso8601(fields[3])});
        } catch (const DataError& e) {
            throw DataError("sessions line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    validate_sessions(out);
    return out;
}

std::vector<SessionLog> read_sessions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open sessions file " + path.string());
    return read_sessions(in);
}

void write_sessions(std::ostream& out, std::span<const SessionLog> sessions) {
    out << "session_id,user,start,end\n";
    for (const auto& s : sessions)
        out << s.session_id << ',' << s.user << ',' << format_iso8601(s.start) << ',' << format_iso8601(s.end) << '\n';
}

void write_sessions(const std::filesystem::path& path, std::span<const SessionLog> sessions) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    write_sessions(out, sessions);
}

}  // namespace homeauth
