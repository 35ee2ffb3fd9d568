#include "homeauth/server.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include <spdlog/spdlog.h>

#include "homeauth/error.hpp"

namespace homeauth {

using nlohmann::json;

namespace {

bool send_all(int fd, const std::string& data) {
    std::size_t off = 0;
    while (off < data.size()) {
        const ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        off += static_cast<std::size_t>(n);
    }
    return true;
}

std::string sys_error(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

}  // namespace

ScoreServer::ScoreServer(std::shared_ptr<const TrainedModel> model, ServerConfig config)
    : model_(std::move(model)), cfg_(std::move(config)) {
    if (!model_) throw ArgumentError("server needs a model");
    make_scorer();  // validates the stream config early
}

ScoreServer::ScoreServer(std::shared_ptr<const EnsembleModel> ensemble, ServerConfig config)
    : ensemble_(std::move(ensemble)), cfg_(std::move(config)) {
    if (!ensemble_) throw ArgumentError("server needs an ensemble");
    make_scorer();
}

ScoreServer::~ScoreServer() { stop(); }

StreamScorer ScoreServer::make_scorer() const {
    if (ensemble_) return StreamScorer(ensemble_, cfg_.stream);
    return StreamScorer(model_, cfg_.stream);
}

void ScoreServer::start() {
    if (running_) return;
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(cfg_.port);
    if (::inet_pton(AF_INET, cfg_.host.c_str(), &addr.sin_addr) != 1) {
        throw ArgumentError("invalid listen address '" + cfg_.host + "'");
    }
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (listen_fd_ < 0) throw Error(sys_error("socket"));
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
        const auto msg = sys_error("bind");
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw Error(msg);
    }
    if (::listen(listen_fd_, 16) < 0) {
        const auto msg = sys_error("listen");
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw Error(msg);
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    if (::pipe2(wake_pipe_, O_CLOEXEC) < 0) throw Error(sys_error("pipe"));
    {
        std::lock_guard lock(mu_);
        stopped_ = false;
    }
    running_ = true;
    acceptor_ = std::thread([this] { accept_loop(); });
    spdlog::info("listening on {}:{}", cfg_.host, port_);
}

void ScoreServer::accept_loop() {
    while (running_) {
        pollfd fds[2] = {{listen_fd_, POLLIN, 0}, {wake_pipe_[0], POLLIN, 0}};
        if (::poll(fds, 2, -1) < 0) {
            if (errno == EINTR) continue;
            spdlog::error("{}", sys_error("poll"));
            break;
        }
        if (fds[1].revents || !running_) break;
        if (!(fds[0].revents & POLLIN)) continue;
        const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
        if (fd < 0) {
            if (errno != EINTR && errno != ECONNABORTED) spdlog::warn("{}", sys_error("accept"));
            continue;
        }
        std::lock_guard lock(mu_);
        client_fds_.push_back(fd);
        workers_.emplace_back([this, fd] { serve_connection(fd); });
    }
}

void ScoreServer::serve_connection(int fd) {
    ++served_;
    std::size_t line_no = 0;
    std::string pending;
    char buf[65536];
    try {
        StreamScorer scorer = make_scorer();
        const int timeout = static_cast<int>(std::min<std::int64_t>(cfg_.idle_timeout.count(), INT32_MAX));
        bool open = true;
        while (open && running_) {
            pollfd fds[2] = {{fd, POLLIN, 0}, {wake_pipe_[0], POLLIN, 0}};
            const int ready = ::poll(fds, 2, timeout);
            if (ready < 0) {
                if (errno == EINTR) continue;
                break;
            }
            if (ready == 0) {
                spdlog::info("closing idle connection");
                break;
            }
            if (fds[1].revents) break;
            const ssize_t n = ::recv(fd, buf, sizeof buf, 0);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) break;
            pending.append(buf, static_cast<std::size_t>(n));
            std::size_t start = 0;
            std::string reply;
            for (std::size_t nl; (nl = pending.find('\n', start)) != std::string::npos; start = nl + 1) {
                ++line_no;
                std::string_view line(pending.data() + start, nl - start);
                if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
                if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
                try {
                    const json j = json::parse(line);
                    std::vector<StreamOutput> outs;
                    if (j.is_object() && j.contains("clock") && !j.contains("timestamp")) {
                        outs = scorer.advance_to(j.at("clock").get<double>());
                    } else {
                        outs = scorer.push(record_from_json(j));
                    }
                    for (const auto& o : outs) reply += to_json(o).dump() + "\n";
                } catch (const json::exception& e) {
                    reply += json{{"error", std::string("malformed JSON: ") + e.what()}, {"line", line_no}}.dump() + "\n";
                } catch (const DataError& e) {
                    reply += json{{"error", e.what()}, {"line", line_no}}.dump() + "\n";
                } catch (const ArgumentError& e) {
                    reply += json{{"error", e.what()}, {"line", line_no}}.dump() + "\n";
                }
            }
            pending.erase(0, start);
            if (!reply.empty() && !send_all(fd, reply)) open = false;
        }
    } catch (const std::exception& e) {
        spdlog::error("connection failed: {}", e.what());
        send_all(fd, json{{"error", e.what()}, {"line", line_no}}.dump() + "\n");
    }
    std::lock_guard lock(mu_);
    client_fds_.remove(fd);
    ::close(fd);
}

void ScoreServer::stop() {
    if (!running_.exchange(false)) return;
    if (wake_pipe_[1] >= 0) {
        const char c = 'x';
        [[maybe_unused]] auto r = ::write(wake_pipe_[1], &c, 1);
    }
    if (acceptor_.joinable()) acceptor_.join();
    std::list<std::thread> workers;
    {
        std::lock_guard lock(mu_);
        for (int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
        workers.swap(workers_);
    }
    for (auto& t : workers) t.join();
    ::close(listen_fd_);
    listen_fd_ = -1;
    for (int& p : wake_pipe_) {
        ::close(p);
        p = -1;
    }
    {
        std::lock_guard lock(mu_);
        stopped_ = true;
    }
    stopped_cv_.notify_all();
}

void ScoreServer::wait() {
    std::unique_lock lock(mu_);
    stopped_cv_.wait(lock, [this] { return stopped_ || !running_; });
}

}  // namespace homeauth
