/*
 * Copyright 2026 The autolrs Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "autolrs/server.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>
#include <variant>

#include "autolrs/controller.hpp"
#include "line_channel.hpp"

namespace autolrs {

namespace {

std::optional<TrainerMessage> as_trainer_message(const Message& m) {
    return std::visit(
        [](const auto& v) -> std::optional<TrainerMessage> {
            if constexpr (std::is_constructible_v<TrainerMessage, decltype(v)>) {
                return TrainerMessage{v};
            } else {
                return std::nullopt;
            }
        },
        m);
}

std::string peer_name(const sockaddr_storage& addr) {
    char host[NI_MAXHOST];
    char serv[NI_MAXSERV];
    if (::getnameinfo(reinterpret_cast<const sockaddr*>(&addr), sizeof(addr), host, sizeof(host),
                      serv, sizeof(serv), NI_NUMERICHOST | NI_NUMERICSERV) != 0) {
        return "unknown";
    }
    return std::string(host) + ":" + serv;
}

}  // namespace

Server::Server(ServerOptions options) : options_(std::move(options)) {
    options_.config.validate();
    if (options_.port < 0 || options_.port > 65535) {
        throw std::runtime_error("port out of range: " + std::to_string(options_.port));
    }
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE | AI_NUMERICHOST;
    addrinfo* res = nullptr;
    const std::string service = std::to_string(options_.port);
    if (int rc = ::getaddrinfo(options_.bind_address.c_str(), service.c_str(), &hints, &res);
        rc != 0) {
        throw std::runtime_error("invalid bind address " + options_.bind_address + ": " +
                                 ::gai_strerror(rc));
    }
    int err = 0;
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) {
            err = errno;
            continue;
        }
        int one = 1;
        ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 64) == 0) {
            listen_fd_ = fd;
            break;
        }
        err = errno;
        ::close(fd);
    }
    ::freeaddrinfo(res);
    if (listen_fd_ < 0) {
        throw std::runtime_error("cannot listen on " + options_.bind_address + ":" + service +
                                 ": " + std::strerror(err));
    }
    sockaddr_storage addr{};
    socklen_t len = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = addr.ss_family == AF_INET6 ? ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port)
                                       : ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
    if (::pipe(wake_pipe_) != 0) {
        ::close(listen_fd_);
        throw std::runtime_error("pipe failed");
    }
}

Server::~Server() {
    stop();
    reap(true);
    if (listen_fd_ >= 0) ::close(listen_fd_);
    for (int fd : wake_pipe_) {
        if (fd >= 0) ::close(fd);
    }
}

void Server::stop() {
    if (stopping_.exchange(true)) return;
    const char byte = 1;
    // the pipe is never drained, so every poller sees it readable from now on
    [[maybe_unused]] auto n = ::write(wake_pipe_[1], &byte, 1);
}

void Server::reap(bool all) {
    std::list<Worker> finished;
    {
        std::lock_guard lock(workers_mutex_);
        for (auto it = workers_.begin(); it != workers_.end();) {
            if (all || it->done.load()) {
                auto next = std::next(it);
                finished.splice(finished.end(), workers_, it);
                it = next;
            } else {
                ++it;
            }
        }
    }
    for (auto& w : finished) {
        if (w.thread.joinable()) w.thread.join();
    }
}

void Server::run() {
    while (!stopping_.load()) {
        pollfd fds[2] = {{listen_fd_, POLLIN, 0}, {wake_pipe_[0], POLLIN, 0}};
        int rc = ::poll(fds, 2, 1000);
        reap(false);
        if (rc < 0) {
            if (errno == EINTR) continue;
            break;
        }
        if (rc == 0 || (fds[1].revents & POLLIN)) continue;
        if (!(fds[0].revents & POLLIN)) continue;
        sockaddr_storage addr{};
        socklen_t len = sizeof(addr);
        int fd = ::accept(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
        if (fd < 0) continue;
        std::lock_guard lock(workers_mutex_);
        Worker& w = workers_.emplace_back();
        w.thread = std::thread([this, fd, peer = peer_name(addr), &w] {
            serve(fd, peer);
            w.done.store(true);
        });
    }
    reap(true);
}

void Server::serve(int fd, std::string peer) {
    net::LineChannel channel(fd, options_.max_line_bytes, wake_pipe_[0]);
    Controller controller(options_.config);
    SessionSummary summary;
    summary.peer = std::move(peer);

    auto shutdown = [&](const std::string& reason) {
        channel.write_all(protocol::encode(ControllerMessage{Shutdown{reason}}));
        summary.stop_reason = reason;
    };

    int malformed = 0;
    std::string line;
    for (;;) {
        const net::ReadStatus status = channel.read_line(line, options_.idle_timeout);
        if (status == net::ReadStatus::Interrupted) {
            shutdown("server shutting down");
            break;
        }
        if (status == net::ReadStatus::Timeout) {
            shutdown("idle timeout");
            break;
        }
        if (status == net::ReadStatus::Closed) {
            summary.stop_reason = "connection closed";
            break;
        }
        std::optional<TrainerMessage> event;
        if (status == net::ReadStatus::TooLong) {
            ++malformed;
        } else {
            auto decoded = protocol::decode(line, options_.max_line_bytes);
            if (auto* m = std::get_if<Message>(&decoded)) {
                event = as_trainer_message(*m);
                if (!event) {
                    summary.error = "controller message sent by trainer";
                    shutdown("protocol violation: " + *summary.error);
                    break;
                }
            } else {
                ++malformed;
            }
        }
        if (!event) {
            if (malformed >= options_.max_malformed_lines) {
                shutdown("too many malformed lines");
                break;
            }
            continue;
        }
        malformed = 0;
        bool ok = true;
        for (const auto& cmd : controller.handle(*event)) {
            if (!channel.write_all(protocol::encode(cmd))) {
                ok = false;
                break;
            }
        }
        if (!ok) {
            summary.stop_reason = "connection closed";
            break;
        }
        if (controller.stopped() || controller.error()) {
            summary.stop_reason = controller.state().stop_reason;
            summary.error = controller.error();
            if (summary.error) summary.stop_reason = "protocol violation: " + *summary.error;
            break;
        }
    }
    channel.close();
    summary.schedule = controller.schedule();
    if (options_.on_session_end) options_.on_session_end(summary);
}

}  // namespace autolrs
