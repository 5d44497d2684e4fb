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

// Per-stage learning-rate search as an event-driven state machine.
//
// Each stage: save a checkpoint, then for k candidates pick log10(lr) by LCB
// minimization, train tau' steps while collecting losses, forecast the loss at
// tau, add the forecast to the GP and restore the checkpoint. Finally apply the
// candidate with the lowest forecast for tau steps. tau starts at tau_initial
// and doubles per stage up to tau_max; losses come from training mini-batches
// until tau reaches tau_max and from the validation subset afterwards.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "autolrs/config.hpp"
#include "autolrs/forecast.hpp"
#include "autolrs/gp.hpp"
#include "autolrs/messages.hpp"
#include "autolrs/schedule.hpp"

namespace autolrs {

struct StagePlan {
    int stage_index = 0;
    std::int64_t tau = 0;
    std::int64_t tau_prime = 0;
    LossSource loss_source = LossSource::Train;
    /// Loss-report cadence requested during exploration.
    std::int64_t report_every = 1;
    bool operator==(const StagePlan&) const = default;
};

/// Curriculum: tau = min(tau_initial * 2^stage, tau_max), tau' = round(tau * ratio).
StagePlan stage_plan(const SearchConfig& config, int stage_index);

/// Explored candidate with minimal forecast; ties by smaller posterior mean,
/// then smaller log10(lr).
double select_best(const std::vector<gp::Observation<double>>& candidates,
                   const gp::Posterior<double>& posterior);

enum class Phase { AwaitingHello, Warmup, Exploring, Applying, Stopped };

std::string to_string(Phase phase);

struct ControllerState {
    SearchConfig config;
    Phase phase = Phase::AwaitingHello;

    StagePlan plan;
    std::int64_t stage_start_step = 0;
    int candidate_index = 0;
    double current_lr = 0.0;
    gp::Posterior<double> posterior;
    /// (log10 lr, forecast loss) pairs of the current stage.
    std::vector<gp::Observation<double>> candidates_explored;
    std::vector<CandidateRecord> stage_candidates;
    forecast::LossSeries<double> current_series;
    bool candidate_diverged = false;

    /// The Train command awaiting CommandDone, if any.
    std::optional<Train> outstanding;
    std::int64_t next_command_id = 1;
    /// Applied model steps so far (warmup included, exploration excluded).
    std::int64_t global_step = 0;
    double worst_loss = 0.0;

    ScheduleRecord schedule;
    std::string stop_reason;
    /// Description of the last rejected event.
    std::string last_error;
};

struct Transition {
    ControllerState state;
    std::vector<ControllerMessage> commands;
    /// Set when the event violated the protocol; the state is returned as it
    /// was before the event and the commands hold a single Shutdown.
    std::optional<std::string> error;
};

ControllerState initial_state(const SearchConfig& config);

/// The transition function. Takes the state by value; move it in.
Transition next_command(ControllerState state, const TrainerMessage& event);

/// Owning wrapper around the transition function for one session.
class Controller {
public:
    explicit Controller(SearchConfig config);

    /// Feeds one trainer event and returns the commands to send, in order.
    /// Protocol violations yield a Shutdown and leave `error()` set.
    std::vector<ControllerMessage> handle(const TrainerMessage& event);

    const ControllerState& state() const { return state_; }
    const ScheduleRecord& schedule() const { return state_.schedule; }
    bool stopped() const { return state_.phase == Phase::Stopped; }
    const std::optional<std::string>& error() const { return error_; }

private:
    ControllerState state_;
    std::optional<std::string> error_;
};

}  // namespace autolrs
