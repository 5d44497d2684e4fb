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

// Messages exchanged between the controller and a trainer. The controller's
// transition function consumes TrainerMessage events and emits
// ControllerMessage commands; the wire codec lives in protocol.hpp.

#include <cstdint>
#include <string>
#include <variant>

#include "autolrs/config.hpp"

namespace autolrs {

inline constexpr const char* kProtocolVersion = "autolrs/1";

// trainer -> controller

struct Hello {
    std::string protocol_version = kProtocolVersion;
    Json config_overrides = Json::object();
    bool operator==(const Hello&) const = default;
};

/// One loss measurement; +inf marks a diverged model. `step` counts the
/// optimizer steps applied to the parameters the loss was measured on.
struct LossReport {
    std::int64_t step = 0;
    double value = 0.0;
    LossSource source = LossSource::Train;
    bool operator==(const LossReport&) const = default;
};

struct CommandDone {
    std::int64_t command_id = 0;
    bool operator==(const CommandDone&) const = default;
};

struct TrainerError {
    std::string message;
    bool operator==(const TrainerError&) const = default;
};

struct Stop {
    bool operator==(const Stop&) const = default;
};

// controller -> trainer

struct SetLr {
    double lr = 0.0;
    bool operator==(const SetLr&) const = default;
};

struct SaveCkpt {
    bool operator==(const SaveCkpt&) const = default;
};

struct RestoreCkpt {
    bool operator==(const RestoreCkpt&) const = default;
};

/// Run `steps` optimizer steps, then answer with CommandDone{command_id}.
/// Before the j-th update (j = 0, 1, ...), if j is a multiple of
/// `report_every`, report `loss_source` for the current parameters (0: no
/// reports). A diverged model reports +inf once and stops early.
struct Train {
    std::int64_t steps = 0;
    LossSource loss_source = LossSource::Train;
    std::int64_t report_every = 1;
    std::int64_t command_id = 0;
    bool operator==(const Train&) const = default;
};

struct EvalConfig {
    std::int64_t val_minibatches = 10;
    std::int64_t val_every = 50;
    bool operator==(const EvalConfig&) const = default;
};

struct Shutdown {
    std::string reason;
    bool operator==(const Shutdown&) const = default;
};

using TrainerMessage = std::variant<Hello, LossReport, CommandDone, TrainerError, Stop>;
using ControllerMessage = std::variant<SetLr, SaveCkpt, RestoreCkpt, Train, EvalConfig, Shutdown>;
using Message = std::variant<Hello, LossReport, CommandDone, TrainerError, Stop, SetLr, SaveCkpt,
                             RestoreCkpt, Train, EvalConfig, Shutdown>;

inline Message to_message(const TrainerMessage& m) {
    return std::visit([](const auto& v) -> Message { return v; }, m);
}
inline Message to_message(const ControllerMessage& m) {
    return std::visit([](const auto& v) -> Message { return v; }, m);
}

}  // namespace autolrs
