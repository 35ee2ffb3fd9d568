#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "homeauth/record.hpp"

namespace homeauth {

inline constexpr double kDefaultStrideSeconds = 60.0;

/// A labeled interval during which one known user was in the home.
struct SessionLog {
    std::string session_id;
    UserId user;
    double start = 0.0;
    double end = 0.0;

    double duration() const noexcept { return end - start; }
    bool operator==(const SessionLog&) const = default;
};

/// Records with t_start <= timestamp < t_end, optionally labeled.
struct ObservationWindow {
    double t_start = 0.0;
    double t_end = 0.0;
    std::optional<UserId> label;
    std::string session_id;
    std::vector<PacketRecord> records;
};

/// Throws DataError if a session has end <= start or two sessions of the
/// same user overlap, or session ids repeat.
void validate_sessions(std::span<const SessionLog> sessions);

/// Windows anchored at session.start advancing by `stride` while
/// start + delta <= end; a session shorter than delta yields a single window
/// covering it. Records are not attached.
std::vector<ObservationWindow> generate_windows(const SessionLog& session, double delta,
                                                double stride = kDefaultStrideSeconds);

/// generate_windows followed by assign_records.
std::vector<ObservationWindow> generate_windows(const SessionLog& session,
                                                std::span<const PacketRecord> sorted_records,
                                                double delta, double stride = kDefaultStrideSeconds);

/// Copies into each window every record in its half-open interval.
/// `sorted_records` must be ordered by timestamp.
void assign_records(std::span<ObservationWindow> windows, std::span<const PacketRecord> sorted_records);

/// Number of windows generate_windows produces for a duration.
std::size_t window_count(double duration, double delta, double stride = kDefaultStrideSeconds);

/// ISO-8601 "YYYY-MM-DDTHH:MM:SS[.ffffff](Z|+HH:MM)" <-> epoch seconds.
double parse_iso8601(std::string_view text);
std::string format_iso8601(double epoch_seconds);

/// CSV with header "session_id,user,start,end" and ISO-8601 times.
std::vector<SessionLog> read_sessions(std::istream& in);
std::vector<SessionLog> read_sessions(const std::filesystem::path& path);
void write_sessions(std::ostream& out, std::span<const SessionLog> sessions);
void write_sessions(const std::filesystem::path& path, std::span<const SessionLog> sessions);

}  // namespace homeauth
