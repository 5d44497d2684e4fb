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

// Trainer side of the wire protocol: connects to a controller, sends Hello and
// hands each command to a callback whose returned events are sent back.

#include <chrono>
#include <functional>
#include <string>
#include <vector>

#include "autolrs/config.hpp"
#include "autolrs/messages.hpp"

namespace autolrs {

using CommandHandler = std::function<std::vector<TrainerMessage>(const ControllerMessage&)>;

struct ClientOptions {
    std::string host = "127.0.0.1";
    int port = 7461;
    Json config_overrides = Json::object();
    std::string protocol_version = kProtocolVersion;
    std::chrono::milliseconds read_timeout = std::chrono::seconds(600);
};

/// Runs one session to completion and returns the controller's Shutdown
/// reason (the handler also receives the Shutdown). Throws ProtocolError if
/// the connection drops or the controller sends something undecodable.
std::string run_client(const ClientOptions& options, const CommandHandler& handler);

}  // namespace autolrs
