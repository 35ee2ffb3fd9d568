#include "homeauth/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "homeauth/error.hpp"

namespace homeauth {

using nlohmann::json;

StatSummary compute_stats(std::span<const double> values) {
    StatSummary s;
    const std::size_t n = values.size();
    if (n == 0) return s;
    s.count = static_cast<double>(n);
    s.min = values[0];
    s.max = values[0];
    for (double v : values) {
        s.sum += v;
        s.min = std::min(s.min, v);
        s.max = std::max(s.max, v);
    }
    s.mean = s.sum / s.count;
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / s.count);

    std::vector<double> sorted(values.begin(), values.end());
    const std::size_t mid = n / 2;
    std::nth_element(sorted.begin(), sorted.begin() + mid, sorted.end());
    const double upper = sorted[mid];
    if (n % 2 == 1) {
        s.median = upper;
    } else {
        const double lower = *std::max_element(sorted.begin(), sorted.begin() + mid);
        s.median = (lower + upper) / 2.0;
    }
    // Clamp rounding drift so min <= mean <= max always holds.
    s.mean = std::clamp(s.mean, s.min, s.max);
    return s;
}

std::vector<double> inter_event_times(std::span<const double> ts) {
    std::vector<double> out;
    if (ts.size() < 2) return out;
    out.reserve(ts.size() - 1);
    for (std::size_t i = 1; i < ts.size(); ++i) {
        if (ts[i] < ts[i - 1]) throw ArgumentError("inter_event_times: timestamps not sorted");
        out.push_back(ts[i] - ts[i - 1]);
    }
    return out;
}

std::string_view to_string(Representation r) noexcept {
    switch (r) {
        case Representation::DeviceOnly: return "device";
        case Representation::DomainOnly: return "domain";
        case Representation::Both: return "both";
    }
    return "device";
}

std::optional<Representation> parse_representation(std::string_view s) noexcept {
    if (s == "device") return Representation::DeviceOnly;
    if (s == "domain") return Representation::DomainOnly;
    if (s == "both") return Representation::Both;
    return std::nullopt;
}

FeatureSchema::FeatureSchema(Representation kind, std::vector<DeviceId> device_order,
                             std::vector<std::string> domain_vocab)
    : kind_(kind), devices_(std::move(device_order)), vocab_(std::move(domain_vocab)) {
    for (std::size_t i = 0; i < devices_.size(); ++i) {
        if (!device_ix_.emplace(devices_[i], i).second)
            throw SchemaError("feature schema: device '" + devices_[i] + "' repeated");
    }
    for (std::size_t i = 0; i < vocab_.size(); ++i) {
        if (vocab_[i] == kOtherDomain) throw SchemaError("feature schema: vocabulary may not contain the OTHER name");
        if (!domain_ix_.emplace(vocab_[i], i).second)
            throw SchemaError("feature schema: domain '" + vocab_[i] + "' repeated");
    }
}

std::optional<std::size_t> FeatureSchema::device_index(std::string_view id) const {
    auto it = device_ix_.find(std::string(id));
    if (it == device_ix_.end()) return std::nullopt;
    return it->second;
}

std::size_t FeatureSchema::domain_index(std::string_view domain) const {
    auto it = domain_ix_.find(std::string(domain));
    return it == domain_ix_.end() ? vocab_.size() : it->second;
}

namespace {

std::vector<std::string> block_columns(bool with_domains) {
    std::vector<std::string> names;
    for (const char* prefix : {"in_len_", "out_len_", "iet_"})
        for (auto stat : StatSummary::kNames) names.push_back(std::string(prefix) + std::string(stat));
    for (const char* c : {"tcp_in", "tcp_out", "udp_in", "udp_out", "icmp_in", "icmp_out"}) names.emplace_back(c);
    if (with_domains) names.emplace_back("distinct_domains");
    return names;
}

}  // namespace

std::vector<std::string> FeatureSchema::column_names() const {
    std::vector<std::string> names;
    names.reserve(width());
    if (has_devices()) {
        const auto cols = block_columns(true);
        for (const auto& d : devices_)
            for (const auto& c : cols) names.push_back("dev." + d + "." + c);
    }
    if (has_domains()) {
        const auto cols = block_columns(false);
        auto add = [&](const std::string& dom) {
            for (const auto& c : cols) names.push_back("dom." + dom + "." + c);
        };
        for (const auto& d : vocab_) add(d);
        add(std::string(kOtherDomain));
    }
    return names;
}

FeatureSchema FeatureSchema::with_kind(Representation kind) const { return FeatureSchema(kind, devices_, vocab_); }

json FeatureSchema::to_json() const {
    return json{{"kind", to_string(kind_)}, {"device_order", devices_}, {"domain_vocab", vocab_}, {"width", width()}};
}

FeatureSchema FeatureSchema::from_json(const json& j) {
    try {
        auto kind = parse_representation(j.at("kind").get<std::string>());
        if (!kind) throw SchemaError("feature schema: unknown kind");
        FeatureSchema s(*kind, j.at("device_order").get<std::vector<std::string>>(),
                        j.at("domain_vocab").get<std::vector<std::string>>());
        if (auto w = j.find("width"); w != j.end() && w->get<std::size_t>() != s.width())
            throw SchemaError("feature schema: stored width " + std::to_string(w->get<std::size_t>()) +
                              " does not match layout width " + std::to_string(s.width()));
        return s;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("feature schema: ") + e.what());
    }
}

FeatureSchema FeatureSchema::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open schema " + path.string());
    try {
        return from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw DataError("schema " + path.string() + ": " + e.what());
    }
}

void FeatureSchema::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << to_json().dump(2) << '\n';
}

namespace {

/// Everything aggregated for one device or one domain inside a window.
struct EntityAccum {
    std::vector<double> in_len;
    std::vector<double> out_len;
    std::vector<double> times;
    std::array<double, 6> proto{};  // tcp_in, tcp_out, udp_in, udp_out, icmp_in, icmp_out
    std::vector<std::string_view> domains;

    void add(const PacketRecord& r, bool track_domains) {
        const bool out = r.direction == Direction::Outgoing;
        (out ? out_len : in_len).push_back(static_cast<double>(r.length));
        times.push_back(r.timestamp);
        proto[static_cast<std::size_t>(r.protocol) * 2 + (out ? 1 : 0)] += 1.0;
        if (track_domains) domains.push_back(r.domain);
    }
};

void write_stats(const StatSummary& s, double* out) {
    const auto a = s.as_array();
    std::copy(a.begin(), a.end(), out);
}

void fill_block(EntityAccum& acc, double* out, bool with_domains) {
    write_stats(compute_stats(acc.in_len), out + block::kInLen);
    write_stats(compute_stats(acc.out_len), out + block::kOutLen);
    if (!std::is_sorted(acc.times.begin(), acc.times.end())) std::stable_sort(acc.times.begin(), acc.times.end());
    write_stats(compute_stats(inter_event_times(acc.times)), out + block::kInterEvent);
    std::copy(acc.proto.begin(), acc.proto.end(), out + block::kTcpIn);
    if (with_domains) {
        std::sort(acc.domains.begin(), acc.domains.end());
        out[block::kDistinctDomains] =
            static_cast<double>(std::unique(acc.domains.begin(), acc.domains.end()) - acc.domains.begin());
    }
}

void device_block_into(const ObservationWindow& w, const FeatureSchema& schema, double* out) {
    const std::size_t n = schema.device_order().size();
    std::vector<EntityAccum> acc(n);
    for (const auto& r : w.records) {
        auto ix = schema.device_index(r.device);
        if (!ix) throw InternalError("window contains unregistered device '" + r.device + "'");
        acc[*ix].add(r, true);
    }
    for (std::size_t i = 0; i < n; ++i) fill_block(acc[i], out + i * kDeviceBlockWidth, true);
}

void domain_block_into(const ObservationWindow& w, const FeatureSchema& schema, double* out) {
    const std::size_t n = schema.domain_vocab().size() + 1;
    std::vector<EntityAccum> acc(n);
    for (const auto& r : w.records) acc[schema.domain_index(r.domain)].add(r, false);
    for (std::size_t i = 0; i < n; ++i) fill_block(acc[i], out + i * kDomainBlockWidth, false);
}

void extract_into(const ObservationWindow& w, const FeatureSchema& schema, double* out) {
    std::fill(out, out + schema.width(), 0.0);
    if (schema.has_devices()) device_block_into(w, schema, out);
    if (schema.has_domains()) domain_block_into(w, schema, out + schema.device_width());
}

}  // namespace

std::vector<double> device_features(const ObservationWindow& window, const FeatureSchema& schema) {
    std::vector<double> out(kDeviceBlockWidth * schema.device_order().size(), 0.0);
    device_block_into(window, schema, out.data());
    return out;
}

std::vector<double> domain_features(const ObservationWindow& window, const FeatureSchema& schema) {
    std::vector<double> out(kDomainBlockWidth * (schema.domain_vocab().size() + 1), 0.0);
    domain_block_into(window, schema, out.data());
    return out;
}

FeatureVector extract_one(const ObservationWindow& window, const SchemaPtr& schema) {
    FeatureVector v;
    v.schema = schema;
    v.values.assign(schema->width(), 0.0);
    extract_into(window, *schema, v.values.data());
    v.label = window.label;
    v.t = window.t_end;
    return v;
}

std::vector<std::string> build_domain_vocab(std::span<const ObservationWindow> windows) {
    std::set<std::string> seen;
    for (const auto& w : windows)
        for (const auto& r : w.records)
            if (r.domain != kOtherDomain) seen.insert(r.domain);
    return {seen.begin(), seen.end()};
}

FeatureVector FeatureMatrix::vector(std::size_t i) const {
    FeatureVector v;
    v.schema = schema;
    auto r = row(i);
    v.values.assign(r.begin(), r.end());
    v.label = labels.at(i);
    v.t = t_end.at(i);
    return v;
}

FeatureMatrix extract(std::span<const ObservationWindow> windows, const SchemaPtr& schema, Exec exec) {
    FeatureMatrix m;
    m.schema = schema;
    m.rows = windows.size();
    m.cols = schema->width();
    m.values.assign(m.rows * m.cols, 0.0);
    m.labels.resize(m.rows);
    m.t_end.resize(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) {
        m.labels[i] = windows[i].label;
        m.t_end[i] = windows[i].t_end;
    }

    const auto n = static_cast<std::ptrdiff_t>(m.rows);
    if (exec == Exec::Serial) {
        for (std::ptrdiff_t i = 0; i < n; ++i) extract_into(windows[i], *schema, m.values.data() + i * m.cols);
        return m;
    }

    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            extract_into(windows[i], *schema, m.values.data() + i * m.cols);
        } catch (...) {
#pragma omp critical(homeauth_extract_error)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return m;
}

namespace {

void append_double(std::string& line, double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    line.append(buf, res.ptr);
}

}  // namespace

void write_feature_csv(std::ostream& out, const FeatureMatrix& m) {
    std::string line;
    for (const auto& name : m.schema->column_names()) {
        line += name;
        line += ',';
    }
    line += "label,t_end\n";
    out << line;
    for (std::size_t i = 0; i < m.rows; ++i) {
        line.clear();
        for (double v : m.row(i)) {
            append_double(line, v);
            line += ',';
        }
        line += m.labels[i].value_or("");
        line += ',';
        append_double(line, m.t_end[i]);
        line += '\n';
        out << line;
    }
}

void write_feature_csv(const std::filesystem::path& path, const FeatureMatrix& m) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    write_feature_csv(out, m);
}

FeatureMatrix read_feature_csv(std::istream& in, const SchemaPtr& schema) {
    FeatureMatrix m;
    m.schema = schema;
    m.cols = schema->width();
    std::string line;
    if (!std::getline(in, line)) throw DataError("feature csv: missing header");
    {
        auto expected = schema->column_names();
        expected.emplace_back("label");
        expected.emplace_back("t_end");
        std::vector<std::string> header;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) header.push_back(f);
        if (header != expected)
            throw SchemaError("feature csv: header does not match schema (" + std::to_string(header.size()) +
                              " columns, expected " + std::to_string(expected.size()) + ")");
    }
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        for (std::size_t c = 0; c < m.cols; ++c) {
            double v;
            auto res = std::from_chars(p, end, v);
            if (res.ec != std::errc() || res.ptr == end || *res.ptr != ',')
                throw DataError("feature csv line " + std::to_string(lineno) + ": bad value in column " +
                                std::to_string(c + 1));
            m.values.push_back(v);
            p = res.ptr + 1;
        }
        const char* comma = std::find(p, end, ',');
        if (comma == end) throw DataError("feature csv line " + std::to_string(lineno) + ": missing t_end");
        std::string label(p, comma);
        m.labels.push_back(label.empty() ? std::nullopt : std::optional<UserId>(label));
        double t;
        auto res = std::from_chars(comma + 1, end, t);
        if (res.ec != std::errc()) throw DataError("feature csv line " + std::to_string(lineno) + ": bad t_end");
        m.t_end.push_back(t);
        ++m.rows;
    }
    return m;
}

FeatureMatrix read_feature_csv(const std::filesystem::path& path, const SchemaPtr& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open feature csv " + path.string());
    return read_feature_csv(in, schema);
}

std::filesystem::path schema_path_for(const std::filesystem::path& csv_path) {
    auto p = csv_path;
    p.replace_extension(".schema.json");
    return p;
}

}  // namespace homeauth
