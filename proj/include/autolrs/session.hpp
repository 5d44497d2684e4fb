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

// Glue between the controller and the simulated trainers: a trainer endpoint
// that executes controller commands against a SimModel, an in-process session
// loop, and schedule replay.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "autolrs/config.hpp"
#include "autolrs/messages.hpp"
#include "autolrs/schedule.hpp"
#include "autolrs/simtrainer.hpp"

namespace autolrs {

/// Executes controller commands on a simulated model and produces the trainer
/// events a real training loop would send.
class SimTrainerEndpoint {
public:
    explicit SimTrainerEndpoint(sim::SimModel model);

    std::vector<TrainerMessage> execute(const ControllerMessage& command);

    bool finished() const { return finished_; }
    const std::string& shutdown_reason() const { return shutdown_reason_; }
    const sim::SimModel& model() const { return model_; }
    /// Every optimizer step taken, exploration included.
    std::int64_t total_steps() const { return total_steps_; }

private:
    std::vector<TrainerMessage> train(const Train& cmd);

    sim::SimModel model_;
    std::optional<sim::Checkpoint> checkpoint_;
    double lr_ = 0.0;
    std::int64_t val_every_ = 50;
    std::int64_t total_steps_ = 0;
    bool finished_ = false;
    std::string shutdown_reason_;
};

struct SessionResult {
    ScheduleRecord schedule;
    std::string stop_reason;
    std::optional<std::string> error;
    std::int64_t total_steps = 0;
};

/// Runs a full session without a network: Hello, then commands and events
/// passed by direct call until the controller shuts down.
SessionResult run_in_process(const SearchConfig& config, sim::SimModel model,
                             const Json& overrides = Json::object());

/// Same session through a real server and client on an ephemeral loopback port.
SessionResult run_over_loopback(const SearchConfig& config, sim::SimModel model,
                                const Json& overrides = Json::object());

struct TracePoint {
    std::int64_t step;
    double lr;
    double validation_loss;
};

/// Applies the schedule step by step to `model` for `steps` steps (the last
/// rate is held past the end of the schedule) and records the validation loss
/// after every `every` steps and at the end.
std::vector<TracePoint> replay(const ScheduleRecord& schedule, sim::SimModel model,
                               std::int64_t steps, std::int64_t every);

/// Validation loss after `steps` steps at a constant rate; +inf if diverged.
double constant_lr_loss(sim::SimModel model, double lr, std::int64_t steps);

}  // namespace autolrs
