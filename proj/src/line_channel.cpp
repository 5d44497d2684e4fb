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

#include "line_channel.hpp"

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>

namespace autolrs::net {

LineChannel::LineChannel(int fd, std::size_t max_line, int wake_fd)
    : fd_(fd), wake_fd_(wake_fd), max_line_(max_line) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

LineChannel::~LineChannel() { close(); }

void LineChannel::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

bool LineChannel::fill(std::chrono::milliseconds timeout, ReadStatus& status) {
    pollfd fds[2] = {{fd_, POLLIN, 0}, {wake_fd_, POLLIN, 0}};
    const nfds_t n = wake_fd_ >= 0 ? 2 : 1;
    int rc;
    do {
        rc = ::poll(fds, n, static_cast<int>(timeout.count()));
    } while (rc < 0 && errno == EINTR);
    if (rc < 0) {
        status = ReadStatus::Closed;
        return false;
    }
    if (rc == 0) {
        status = ReadStatus::Timeout;
        return false;
    }
    if (n == 2 && (fds[1].revents & POLLIN)) {
        status = ReadStatus::Interrupted;
        return false;
    }
    char chunk[65536];
    ssize_t got;
    do {
        got = ::recv(fd_, chunk, sizeof(chunk), 0);
    } while (got < 0 && errno == EINTR);
    if (got <= 0) {
        status = ReadStatus::Closed;
        return false;
    }
    buffer_.append(chunk, static_cast<std::size_t>(got));
    return true;
}

ReadStatus LineChannel::read_line(std::string& line, std::chrono::milliseconds timeout) {
    if (fd_ < 0) return ReadStatus::Closed;
    std::size_t scanned = 0;
    for (;;) {
        const std::size_t nl = buffer_.find('\n', scanned);
        if (nl != std::string::npos) {
            if (discarding_) {
                buffer_.erase(0, nl + 1);
                discarding_ = false;
                scanned = 0;
                continue;
            }
            if (nl + 1 > max_line_) {
                buffer_.erase(0, nl + 1);
                return ReadStatus::TooLong;
            }
            line.assign(buffer_, 0, nl + 1);
            buffer_.erase(0, nl + 1);
            return ReadStatus::Line;
        }
        if (discarding_) {
            buffer_.clear();
        } else if (buffer_.size() > max_line_) {
            buffer_.clear();
            discarding_ = true;
            return ReadStatus::TooLong;
        }
        scanned = buffer_.size();
        ReadStatus status;
        if (!fill(timeout, status)) return status;
    }
}

bool LineChannel::write_all(const std::string& data) {
    std::size_t sent = 0;
    while (sent < data.size()) {
        const ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        sent += static_cast<std::size_t>(n);
    }
    return true;
}

int connect_tcp(const std::string& host, int port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string service = std::to_string(port);
    if (int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
        throw std::runtime_error("cannot resolve " + host + ": " + ::gai_strerror(rc));
    }
    int fd = -1;
    int err = 0;
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        err = errno;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) {
        throw std::runtime_error("cannot connect to " + host + ":" + service + ": " +
                                 std::strerror(err));
    }
    return fd;
}

}  // namespace autolrs::net
