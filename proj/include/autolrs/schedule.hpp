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

// The exported learning-rate schedule and per-stage search metadata.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "autolrs/config.hpp"

namespace autolrs {

struct ScheduleEntry {
    std::int64_t step = 0;
    double lr = 0.0;
    bool warmup = false;
    bool operator==(const ScheduleEntry&) const = default;
};

struct CandidateRecord {
    double lr = 0.0;
    double forecast = 0.0;
    bool diverged = false;
    bool operator==(const CandidateRecord&) const = default;
};

struct StageRecord {
    int stage_index = 0;
    std::int64_t start_step = 0;
    std::int64_t tau = 0;
    std::int64_t tau_prime = 0;
    LossSource loss_source = LossSource::Train;
    std::vector<CandidateRecord> candidates;
    double chosen_lr = 0.0;
    double chosen_forecast = 0.0;
    bool operator==(const StageRecord&) const = default;
};

struct ScheduleRecord {
    SearchConfig config;
    std::vector<ScheduleEntry> entries;
    std::vector<StageRecord> stages;
    bool operator==(const ScheduleRecord&) const = default;
};

struct StepAccounting {
    std::int64_t applied_steps = 0;
    std::int64_t exploration_steps = 0;
};

/// Applied steps sum the stage lengths; exploration steps sum
/// candidates * tau' per stage. Warmup counts toward neither.
StepAccounting step_accounting(const ScheduleRecord& schedule);

Json to_json(const ScheduleRecord& schedule);
ScheduleRecord schedule_from_json(const Json& doc);

/// Two-column text: a "step,lr" header then one row per entry.
void write_schedule_csv(const ScheduleRecord& schedule, std::ostream& out);
std::string schedule_csv(const ScheduleRecord& schedule);

/// Learning rate in effect at `step` (the last entry at or before it).
double lr_at(const ScheduleRecord& schedule, std::int64_t step);

}  // namespace autolrs
