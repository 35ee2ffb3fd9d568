#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "homeauth/features.hpp"
#include "homeauth/models.hpp"
#include "homeauth/record.hpp"
#include "homeauth/rng.hpp"

namespace testing {

/// Fresh directory removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("homeauth_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline homeauth::PacketRecord record(double t, std::string device, homeauth::Direction dir = homeauth::Direction::Outgoing,
                                     homeauth::Protocol proto = homeauth::Protocol::Tcp, std::uint32_t length = 100,
                                     std::string domain = "unknown") {
    homeauth::PacketRecord r;
    r.timestamp = t;
    r.device = std::move(device);
    r.direction = dir;
    r.protocol = proto;
    r.length = length;
    if (proto != homeauth::Protocol::Icmp) {
        r.src_port = 50000;
        r.dst_port = 443;
    }
    r.remote_ip = "1.2.3.4";
    r.domain = std::move(domain);
    return r;
}

/// Schema of plain numbered columns, used to wrap raw matrices.
inline homeauth::SchemaPtr plain_schema(std::size_t device_blocks) {
    std::vector<homeauth::DeviceId> devs;
    for (std::size_t i = 0; i < device_blocks; ++i) devs.push_back("dev" + std::to_string(i));
    return std::make_shared<const homeauth::FeatureSchema>(homeauth::Representation::DeviceOnly, devs,
                                                           std::vector<std::string>{});
}

/// Training set of `rows` random rows (device width 28 * blocks), labels from a
/// noisy linear rule over `classes` users.
inline homeauth::TrainingSet random_training_set(std::size_t rows, std::size_t blocks, std::size_t classes,
                                                 std::uint64_t seed) {
    homeauth::Rng rng(seed);
    homeauth::TrainingSet t;
    t.schema = plain_schema(blocks);
    t.cols = t.schema->width();
    t.rows = rows;
    for (std::size_t k = 0; k < classes; ++k) t.user_set.push_back("u" + std::to_string(k));
    t.x.resize(rows * t.cols);
    for (auto& v : t.x) v = rng.normal();
    for (std::size_t i = 0; i < rows; ++i) {
        const double s = t.x[i * t.cols] + 0.5 * t.x[i * t.cols + 1] + 0.3 * rng.normal();
        auto k = static_cast<std::size_t>(std::clamp((s + 2.0) / 4.0 * static_cast<double>(classes), 0.0,
                                                     static_cast<double>(classes) - 1.0));
        t.y.push_back(k);
    }
    // Every class present at least once.
    for (std::size_t k = 0; k < classes && k < rows; ++k) t.y[k] = k;
    return t;
}

inline homeauth::FeatureVector vector_of(const homeauth::SchemaPtr& schema, std::vector<double> values) {
    homeauth::FeatureVector v;
    v.schema = schema;
    v.values = std::move(values);
    return v;
}

}  // namespace testing
