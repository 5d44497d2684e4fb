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

#include "autolrs/schedule.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "autolrs/errors.hpp"

namespace autolrs {

StepAccounting step_accounting(const ScheduleRecord& schedule) {
    StepAccounting acc;
    for (const auto& stage : schedule.stages) {
        acc.applied_steps += stage.tau;
        acc.exploration_steps += static_cast<std::int64_t>(stage.candidates.size()) * stage.tau_prime;
    }
    return acc;
}

Json to_json(const ScheduleRecord& schedule) {
    Json doc;
    doc["config"] = to_json(schedule.config);
    Json entries = Json::array();
    for (const auto& e : schedule.entries) {
        Json row;
        row["step"] = e.step;
        row["lr"] = e.lr;
        row["warmup"] = e.warmup;
        entries.push_back(std::move(row));
    }
    doc["entries"] = std::move(entries);
    Json stages = Json::array();
    for (const auto& s : schedule.stages) {
        Json row;
        row["stage_index"] = s.stage_index;
        row["start_step"] = s.start_step;
        row["tau"] = s.tau;
        row["tau_prime"] = s.tau_prime;
        row["loss_source"] = to_string(s.loss_source);
        Json cands = Json::array();
        for (const auto& c : s.candidates) {
            Json cand;
            cand["lr"] = c.lr;
            cand["forecast"] = c.forecast;
            cand["diverged"] = c.diverged;
            cands.push_back(std::move(cand));
        }
        row["candidates"] = std::move(cands);
        row["chosen_lr"] = s.chosen_lr;
        row["chosen_forecast"] = s.chosen_forecast;
        stages.push_back(std::move(row));
    }
    doc["stages"] = std::move(stages);
    const auto acc = step_accounting(schedule);
    doc["applied_steps"] = acc.applied_steps;
    doc["exploration_steps"] = acc.exploration_steps;
    return doc;
}

ScheduleRecord schedule_from_json(const Json& doc) {
    try {
        ScheduleRecord out;
        out.config = apply_overrides(SearchConfig{}, doc.at("config"));
        for (const auto& row : doc.at("entries")) {
            out.entries.push_back({row.at("step").get<std::int64_t>(), row.at("lr").get<double>(),
                                   row.value("warmup", false)});
        }
        for (const auto& row : doc.at("stages")) {
            StageRecord s;
            s.stage_index = row.at("stage_index").get<int>();
            s.start_step = row.at("start_step").get<std::int64_t>();
            s.tau = row.at("tau").get<std::int64_t>();
            s.tau_prime = row.at("tau_prime").get<std::int64_t>();
            s.loss_source = parse_loss_source(row.at("loss_source").get<std::string>());
            for (const auto& c : row.at("candidates")) {
                s.candidates.push_back({c.at("lr").get<double>(), c.at("forecast").get<double>(),
                                        c.value("diverged", false)});
            }
            s.chosen_lr = row.at("chosen_lr").get<double>();
            s.chosen_forecast = row.at("chosen_forecast").get<double>();
            out.stages.push_back(std::move(s));
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed schedule document: ") + e.what());
    }
}

void write_schedule_csv(const ScheduleRecord& schedule, std::ostream& out) {
    out << "step,lr\n";
    char buf[64];
    for (const auto& e : schedule.entries) {
        std::snprintf(buf, sizeof buf, "%.17g", e.lr);
        out << e.step << ',' << buf << '\n';
    }
}

std::string schedule_csv(const ScheduleRecord& schedule) {
    std::ostringstream os;
    write_schedule_csv(schedule, os);
    return os.str();
}

double lr_at(const ScheduleRecord& schedule, std::int64_t step) {
    auto it = std::upper_bound(schedule.entries.begin(), schedule.entries.end(), step,
                               [](std::int64_t s, const ScheduleEntry& e) { return s < e.step; });
    if (it == schedule.entries.begin()) throw InvalidArgument("lr_at: step precedes the schedule");
    return std::prev(it)->lr;
}

}  // namespace autolrs
