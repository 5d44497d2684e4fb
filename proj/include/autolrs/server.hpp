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

#pragma once

// TCP front end for the controller. Each accepted connection is one trainer
// session served by its own thread and its own Controller.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <list>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "autolrs/config.hpp"
#include "autolrs/protocol.hpp"
#include "autolrs/schedule.hpp"

namespace autolrs {

inline constexpr int kDefaultPort = 7461;

struct SessionSummary {
    std::string peer;
    ScheduleRecord schedule;
    std::string stop_reason;
    /// Set when the session ended on a protocol violation.
    std::optional<std::string> error;
};

struct ServerOptions {
    std::string bind_address = "127.0.0.1";
    /// 0 picks an ephemeral port; see Server::port().
    int port = kDefaultPort;
    SearchConfig config;
    std::chrono::milliseconds idle_timeout = std::chrono::seconds(600);
    std::size_t max_line_bytes = protocol::kMaxLineBytes;
    /// Consecutive undecodable lines tolerated before the session is closed.
    int max_malformed_lines = 3;
    /// Called from the session thread when a session ends.
    std::function<void(const SessionSummary&)> on_session_end;
};

class Server {
public:
    /// Binds and listens; throws std::runtime_error if the address is unusable.
    explicit Server(ServerOptions options);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    int port() const { return port_; }

    /// Accepts connections until stop(); then shuts down live sessions and
    /// joins their threads.
    void run();

    /// Thread-safe and async-signal-safe.
    void stop();

private:
    void serve(int fd, std::string peer);
    void reap(bool all);

    ServerOptions options_;
    int listen_fd_ = -1;
    int wake_pipe_[2] = {-1, -1};
    int port_ = 0;
    std::atomic<bool> stopping_{false};

    struct Worker {
        std::thread thread;
        std::atomic<bool> done{false};
    };
    std::mutex workers_mutex_;
    std::list<Worker> workers_;
};

}  // namespace autolrs
