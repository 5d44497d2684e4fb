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

// Blocking line-oriented I/O over a connected socket. Internal to the library.

#include <chrono>
#include <cstddef>
#include <string>

namespace autolrs::net {

enum class ReadStatus { Line, TooLong, Closed, Timeout, Interrupted };

class LineChannel {
public:
    /// Takes ownership of `fd`. `wake_fd`, if >= 0, interrupts reads when it
    /// becomes readable.
    LineChannel(int fd, std::size_t max_line, int wake_fd = -1);
    ~LineChannel();
    LineChannel(const LineChannel&) = delete;
    LineChannel& operator=(const LineChannel&) = delete;

    /// Reads one '\n'-terminated line into `line` (terminator kept). An
    /// over-long line is discarded up to its terminator and reported once.
    ReadStatus read_line(std::string& line, std::chrono::milliseconds timeout);

    /// Writes all bytes; false if the peer is gone.
    bool write_all(const std::string& data);

    void close();

private:
    bool fill(std::chrono::milliseconds timeout, ReadStatus& status);

    int fd_;
    int wake_fd_;
    std::size_t max_line_;
    std::string buffer_;
    bool discarding_ = false;
};

/// Connects to host:port over TCP; throws std::runtime_error on failure.
int connect_tcp(const std::string& host, int port);

}  // namespace autolrs::net
