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

#include "autolrs/session.hpp"

#include <cmath>
#include <deque>
#include <future>
#include <limits>
#include <thread>
#include <utility>

#include "autolrs/client.hpp"
#include "autolrs/controller.hpp"
#include "autolrs/errors.hpp"
#include "autolrs/server.hpp"

namespace autolrs {

SimTrainerEndpoint::SimTrainerEndpoint(sim::SimModel model) : model_(std::move(model)) {}

std::vector<TrainerMessage> SimTrainerEndpoint::execute(const ControllerMessage& command) {
    if (finished_) return {};
    if (const auto* c = std::get_if<SetLr>(&command)) {
        lr_ = c->lr;
    } else if (std::holds_alternative<SaveCkpt>(command)) {
        checkpoint_ = model_.save();
    } else if (std::holds_alternative<RestoreCkpt>(command)) {
        if (!checkpoint_) return {TrainerError{"restore without a saved checkpoint"}};
        model_.restore(*checkpoint_);
    } else if (const auto* c = std::get_if<Train>(&command)) {
        return train(*c);
    } else if (const auto* c = std::get_if<EvalConfig>(&command)) {
        val_every_ = c->val_every;
    } else if (const auto* c = std::get_if<Shutdown>(&command)) {
        finished_ = true;
        shutdown_reason_ = c->reason;
    }
    return {};
}

std::vector<TrainerMessage> SimTrainerEndpoint::train(const Train& cmd) {
    std::vector<TrainerMessage> events;
    for (std::int64_t j = 0; j < cmd.steps; ++j) {
        const std::int64_t step = model_.step();
        const bool report = cmd.report_every > 0 && j % cmd.report_every == 0;
        // validation is measured on the same parameters the train loss sees
        const double val = report && cmd.loss_source == LossSource::Validation
                               ? model_.validation_loss()
                               : 0.0;
        const sim::StepResult r = model_.sgd_step(lr_);
        ++total_steps_;
        if (r.diverged) {
            events.push_back(
                LossReport{step, std::numeric_limits<double>::infinity(), cmd.loss_source});
            break;
        }
        if (report) {
            events.push_back(
                LossReport{step, cmd.loss_source == LossSource::Train ? r.loss : val, cmd.loss_source});
        }
    }
    events.push_back(CommandDone{cmd.command_id});
    return events;
}

SessionResult run_in_process(const SearchConfig& config, sim::SimModel model,
                             const Json& overrides) {
    Controller controller(config);
    SimTrainerEndpoint trainer(std::move(model));
    std::deque<TrainerMessage> inbox;
    inbox.push_back(Hello{kProtocolVersion, overrides});
    while (!inbox.empty() && !controller.stopped()) {
        const TrainerMessage event = std::move(inbox.front());
        inbox.pop_front();
        for (const auto& cmd : controller.handle(event)) {
            for (auto& e : trainer.execute(cmd)) inbox.push_back(std::move(e));
        }
    }
    SessionResult result;
    result.schedule = controller.schedule();
    result.stop_reason = controller.state().stop_reason;
    result.error = controller.error();
    result.total_steps = trainer.total_steps();
    return result;
}

SessionResult run_over_loopback(const SearchConfig& config, sim::SimModel model,
                                const Json& overrides) {
    std::promise<SessionSummary> ended;
    ServerOptions options;
    options.port = 0;
    options.config = config;
    options.on_session_end = [&](const SessionSummary& s) { ended.set_value(s); };
    Server server(options);
    std::thread acceptor([&] { server.run(); });

    SimTrainerEndpoint trainer(std::move(model));
    ClientOptions client;
    client.port = server.port();
    client.config_overrides = overrides;
    try {
        run_client(client, [&](const ControllerMessage& cmd) { return trainer.execute(cmd); });
    } catch (...) {
        server.stop();
        acceptor.join();
        throw;
    }
    SessionSummary summary = ended.get_future().get();
    server.stop();
    acceptor.join();

    SessionResult result;
    result.schedule = std::move(summary.schedule);
    result.stop_reason = summary.stop_reason;
    result.error = summary.error;
    result.total_steps = trainer.total_steps();
    return result;
}

std::vector<TracePoint> replay(const ScheduleRecord& schedule, sim::SimModel model,
                               std::int64_t steps, std::int64_t every) {
    if (steps < 0) throw InvalidArgument("replay: negative step count");
    if (every <= 0) throw InvalidArgument("replay: every must be positive");
    std::vector<TracePoint> trace;
    double lr = 0.0;
    for (std::int64_t s = 0; s < steps; ++s) {
        lr = lr_at(schedule, s);
        model.sgd_step(lr);
        const std::int64_t done = s + 1;
        if (done % every == 0 || done == steps) {
            trace.push_back({done, lr, model.validation_loss()});
        }
    }
    return trace;
}

double constant_lr_loss(sim::SimModel model, double lr, std::int64_t steps) {
    for (std::int64_t s = 0; s < steps && !model.diverged(); ++s) model.sgd_step(lr);
    return model.diverged() ? std::numeric_limits<double>::infinity() : model.validation_loss();
}

}  // namespace autolrs
