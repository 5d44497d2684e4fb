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

#include "autolrs/client.hpp"

#include "autolrs/errors.hpp"
#include "autolrs/protocol.hpp"
#include "line_channel.hpp"

namespace autolrs {

namespace {

std::optional<ControllerMessage> as_controller_message(const Message& m) {
    return std::visit(
        [](const auto& v) -> std::optional<ControllerMessage> {
            if constexpr (std::is_constructible_v<ControllerMessage, decltype(v)>) {
                return ControllerMessage{v};
            } else {
                return std::nullopt;
            }
        },
        m);
}

}  // namespace

std::string run_client(const ClientOptions& options, const CommandHandler& handler) {
    net::LineChannel channel(net::connect_tcp(options.host, options.port),
                             protocol::kMaxLineBytes);
    if (!channel.write_all(protocol::encode(
            TrainerMessage{Hello{options.protocol_version, options.config_overrides}}))) {
        throw ProtocolError("connection closed while sending hello");
    }
    std::string line;
    for (;;) {
        switch (channel.read_line(line, options.read_timeout)) {
            case net::ReadStatus::Line: break;
            case net::ReadStatus::Timeout: throw ProtocolError("timed out waiting for controller");
            case net::ReadStatus::TooLong: throw ProtocolError("over-long line from controller");
            default: throw ProtocolError("connection closed by controller");
        }
        auto decoded = protocol::decode(line);
        if (const auto* err = std::get_if<protocol::DecodeError>(&decoded)) {
            throw ProtocolError("undecodable line from controller: " +
                                protocol::to_string(err->kind) + " (" + err->detail + ")");
        }
        auto cmd = as_controller_message(std::get<Message>(decoded));
        if (!cmd) throw ProtocolError("trainer message received from controller");
        auto events = handler(*cmd);
        if (const auto* s = std::get_if<Shutdown>(&*cmd)) return s->reason;
        for (const auto& e : events) {
            if (!channel.write_all(protocol::encode(e))) {
                throw ProtocolError("connection closed by controller");
            }
        }
    }
}

}  // namespace autolrs
