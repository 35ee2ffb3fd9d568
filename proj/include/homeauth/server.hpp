#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "homeauth/stream.hpp"

namespace homeauth {

struct ServerConfig {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;  ///< 0 picks an ephemeral port
    StreamConfig stream;
    std::chrono::milliseconds idle_timeout{std::chrono::minutes(5)};
};

/// NDJSON-over-TCP scoring service. Each connection owns a StreamScorer;
/// clients send PacketRecord lines (or {"clock":t} to advance time) and
/// receive score or decision lines. A malformed line yields
/// {"error":..,"line":n} and the connection stays open.
class ScoreServer {
public:
    ScoreServer(std::shared_ptr<const TrainedModel> model, ServerConfig config);
    ScoreServer(std::shared_ptr<const EnsembleModel> ensemble, ServerConfig config);
    ~ScoreServer();

    ScoreServer(const ScoreServer&) = delete;
    ScoreServer& operator=(const ScoreServer&) = delete;

    /// Binds and starts accepting. Throws Error if the socket cannot bind.
    void start();
    /// Closes the listener and every connection, then joins all threads.
    void stop();
    /// Blocks until stop() is called from another thread or a signal.
    void wait();

    std::uint16_t port() const noexcept { return port_; }
    std::size_t connections_served() const noexcept { return served_.load(); }

private:
    void accept_loop();
    void serve_connection(int fd);
    StreamScorer make_scorer() const;

    std::shared_ptr<const TrainedModel> model_;
    std::shared_ptr<const EnsembleModel> ensemble_;
    ServerConfig cfg_;
    int listen_fd_ = -1;
    int wake_pipe_[2] = {-1, -1};
    std::uint16_t port_ = 0;
    std::atomic<bool> running_{false};
    std::atomic<std::size_t> served_{0};
    std::thread acceptor_;
    std::mutex mu_;
    std::condition_variable stopped_cv_;
    bool stopped_ = false;
    std::list<std::thread> workers_;
    std::list<int> client_fds_;
};

}  // namespace homeauth
