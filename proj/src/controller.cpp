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

#include "autolrs/controller.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "autolrs/errors.hpp"

namespace autolrs {

std::string to_string(Phase phase) {
    switch (phase) {
        case Phase::AwaitingHello: return "awaiting-hello";
        case Phase::Warmup: return "warmup";
        case Phase::Exploring: return "exploring";
        case Phase::Applying: return "applying";
        case Phase::Stopped: return "stopped";
    }
    return "unknown";
}

StagePlan stage_plan(const SearchConfig& config, int stage_index) {
    if (stage_index < 0) throw InvalidArgument("stage_plan: negative stage index");
    StagePlan plan;
    plan.stage_index = stage_index;
    plan.tau = config.tau_initial;
    for (int i = 0; i < stage_index && plan.tau < config.tau_max; ++i) {
        plan.tau = std::min(plan.tau * 2, config.tau_max);
    }
    plan.tau = std::min(plan.tau, config.tau_max);
    plan.tau_prime = std::max<std::int64_t>(
        1, std::llround(static_cast<double>(plan.tau) * config.tau_prime_ratio));
    plan.loss_source = plan.tau >= config.tau_max ? LossSource::Validation : LossSource::Train;
    plan.report_every = plan.loss_source == LossSource::Train
                            ? 1
                            : std::min(config.val_every, plan.tau_prime);
    return plan;
}

double select_best(const std::vector<gp::Observation<double>>& candidates,
                   const gp::Posterior<double>& posterior) {
    if (candidates.empty()) throw InvalidArgument("select_best: no candidates");
    const gp::Observation<double>* best = &candidates.front();
    double best_mean = posterior.mean(best->x);
    for (const auto& c : candidates) {
        if (&c == best) continue;
        const double mean = posterior.mean(c.x);
        const bool better =
            c.y < best->y ||
            (c.y == best->y && (mean < best_mean || (mean == best_mean && c.x < best->x)));
        if (better) {
            best = &c;
            best_mean = mean;
        }
    }
    return best->x;
}

namespace {

constexpr double kNoLossSentinel = 1e6;
// A candidate whose loss grows past this multiple of its first loss is diverging.
constexpr double kDivergenceRatio = 1e3;

double to_lr(const SearchConfig& config, double log_lr) {
    return std::clamp(std::pow(10.0, log_lr), config.lr_min, config.lr_max);
}

gp::Posterior<double> refit(const ControllerState& s) {
    std::vector<gp::Observation<double>> obs = s.candidates_explored;
    if (s.config.standardize_targets && obs.size() > 1) {
        double mean = 0.0;
        for (const auto& o : obs) mean += o.y;
        mean /= static_cast<double>(obs.size());
        double var = 0.0;
        for (const auto& o : obs) var += (o.y - mean) * (o.y - mean);
        const double sd = std::sqrt(var / static_cast<double>(obs.size()));
        for (auto& o : obs) o.y = sd > 0.0 ? (o.y - mean) / sd : 0.0;
    }
    return gp::fit_posterior(obs, s.config.noise_variance);
}

class Machine {
public:
    explicit Machine(ControllerState& s) : s_(s) {}

    std::vector<ControllerMessage> take() { return std::move(out_); }

    void stop(std::string reason) {
        s_.phase = Phase::Stopped;
        s_.outstanding.reset();
        s_.stop_reason = reason;
        out_.push_back(Shutdown{std::move(reason)});
    }

    void on_hello(const Hello& hello) {
        if (hello.protocol_version != kProtocolVersion) {
            stop("version mismatch");
            return;
        }
        try {
            s_.config = apply_overrides(s_.config, hello.config_overrides);
        } catch (const InvalidArgument& e) {
            stop(e.what());
            return;
        }
        s_.schedule.config = s_.config;
        out_.push_back(EvalConfig{s_.config.val_minibatches, s_.config.val_every});
        if (s_.config.warmup_steps > 0) {
            s_.phase = Phase::Warmup;
            warmup_step();
        } else {
            begin_stage();
        }
    }

    void on_loss(const LossReport& report) {
        if (s_.phase != Phase::Exploring) {
            if (std::isfinite(report.value)) s_.worst_loss = std::max(s_.worst_loss, report.value);
            return;
        }
        if (s_.candidate_diverged) return;
        const auto& pts = s_.current_series.points;
        if (!std::isfinite(report.value) ||
            (!pts.empty() && report.value > kDivergenceRatio * std::abs(pts.front().loss))) {
            s_.candidate_diverged = true;
            return;
        }
        s_.worst_loss = std::max(s_.worst_loss, report.value);
        s_.current_series.points.push_back({report.step - s_.stage_start_step, report.value});
    }

    void on_done() {
        const Train finished = *s_.outstanding;
        s_.outstanding.reset();
        switch (s_.phase) {
            case Phase::Warmup:
                s_.global_step += finished.steps;
                if (s_.global_step < s_.config.warmup_steps) {
                    warmup_step();
                } else {
                    begin_stage();
                }
                break;
            case Phase::Exploring:
                finish_candidate();
                break;
            case Phase::Applying:
                s_.global_step += finished.steps;
                begin_stage();
                break;
            default:
                break;
        }
    }

private:
    std::int64_t remaining() const {
        if (s_.config.budget_steps == 0) return std::numeric_limits<std::int64_t>::max();
        return s_.config.budget_steps - s_.global_step;
    }

    void train(std::int64_t steps, LossSource source, std::int64_t report_every) {
        Train cmd{steps, source, report_every, s_.next_command_id++};
        s_.outstanding = cmd;
        out_.push_back(cmd);
    }

    void warmup_step() {
        if (remaining() <= 0) {
            stop("budget exhausted");
            return;
        }
        const double lr = s_.config.warmup_peak_lr * static_cast<double>(s_.global_step + 1) /
                          static_cast<double>(s_.config.warmup_steps);
        s_.current_lr = lr;
        s_.schedule.entries.push_back({s_.global_step, lr, true});
        out_.push_back(SetLr{lr});
        train(1, LossSource::Train, 1);
    }

    void begin_stage() {
        const std::int64_t left = remaining();
        if (left <= 0) {
            stop("budget exhausted");
            return;
        }
        StagePlan plan = stage_plan(s_.config, static_cast<int>(s_.schedule.stages.size()));
        if (plan.tau > left) {
            plan.tau = left;
            plan.tau_prime = std::max<std::int64_t>(
                1, std::llround(static_cast<double>(left) * s_.config.tau_prime_ratio));
            plan.report_every = std::min(plan.report_every, plan.tau_prime);
        }
        s_.plan = plan;
        s_.phase = Phase::Exploring;
        s_.stage_start_step = s_.global_step;
        s_.candidate_index = 0;
        s_.candidates_explored.clear();
        s_.stage_candidates.clear();
        s_.posterior = gp::fit_posterior(std::vector<gp::Observation<double>>{}, s_.config.noise_variance);
        out_.push_back(SaveCkpt{});
        start_candidate();
    }

    void start_candidate() {
        const double x = gp::lcb_argmin(s_.posterior, s_.config.kappa, std::log10(s_.config.lr_min),
                                        std::log10(s_.config.lr_max));
        s_.current_lr = to_lr(s_.config, x);
        s_.current_series = {};
        s_.current_series.horizon_tau = s_.plan.tau;
        s_.current_series.observed_tau_prime = s_.plan.tau_prime;
        s_.candidate_diverged = false;
        out_.push_back(SetLr{s_.current_lr});
        train(s_.plan.tau_prime, s_.plan.loss_source, s_.plan.report_every);
    }

    void finish_candidate() {
        double y;
        if (s_.candidate_diverged) {
            y = s_.worst_loss > 0.0 ? 10.0 * s_.worst_loss : kNoLossSentinel;
        } else {
            forecast::SmoothingParams smoothing;
            smoothing.iterations = s_.config.smoothing_iterations;
            smoothing.drop_fraction = s_.config.smoothing_drop_fraction;
            y = forecast::evaluate_candidate(s_.current_series, smoothing);
        }
        s_.candidates_explored.push_back({std::log10(s_.current_lr), y});
        s_.stage_candidates.push_back({s_.current_lr, y, s_.candidate_diverged});
        try {
            s_.posterior = refit(s_);
        } catch (const NumericalFailure& e) {
            stop(std::string("numerical failure: ") + e.what());
            return;
        }
        out_.push_back(RestoreCkpt{});
        ++s_.candidate_index;
        if (s_.candidate_index < s_.config.k) {
            start_candidate();
        } else {
            apply_best();
        }
    }

    void apply_best() {
        const double x = select_best(s_.candidates_explored, s_.posterior);
        const double lr = to_lr(s_.config, x);
        double forecast = 0.0;
        for (const auto& c : s_.candidates_explored) {
            if (c.x == x) {
                forecast = c.y;
                break;
            }
        }
        StageRecord record;
        record.stage_index = s_.plan.stage_index;
        record.start_step = s_.stage_start_step;
        record.tau = s_.plan.tau;
        record.tau_prime = s_.plan.tau_prime;
        record.loss_source = s_.plan.loss_source;
        record.chosen_lr = lr;
        record.chosen_forecast = forecast;
        record.candidates = s_.stage_candidates;
        s_.schedule.stages.push_back(std::move(record));
        s_.schedule.entries.push_back({s_.global_step, lr, false});
        s_.current_lr = lr;
        s_.phase = Phase::Applying;
        out_.push_back(SetLr{lr});
        train(s_.plan.tau, s_.plan.loss_source, s_.plan.report_every);
    }

    ControllerState& s_;
    std::vector<ControllerMessage> out_;
};

}  // namespace

ControllerState initial_state(const SearchConfig& config) {
    config.validate();
    ControllerState s;
    s.config = config;
    s.schedule.config = config;
    return s;
}

Transition next_command(ControllerState state, const TrainerMessage& event) {
    auto reject = [&](std::string why) {
        state.last_error = why;
        Transition t{std::move(state), {Shutdown{"protocol violation: " + why}}, why};
        return t;
    };

    if (std::holds_alternative<Stop>(event)) {
        if (state.phase == Phase::Stopped) return reject("event after stop");
        Machine m(state);
        m.stop("stopped by trainer");
        auto cmds = m.take();
        return {std::move(state), std::move(cmds), std::nullopt};
    }
    if (const auto* err = std::get_if<TrainerError>(&event)) {
        if (state.phase == Phase::Stopped) return reject("event after stop");
        Machine m(state);
        m.stop("trainer error: " + err->message);
        auto cmds = m.take();
        return {std::move(state), std::move(cmds), std::nullopt};
    }
    if (state.phase == Phase::Stopped) return reject("event after stop");

    if (const auto* hello = std::get_if<Hello>(&event)) {
        if (state.phase != Phase::AwaitingHello) return reject("duplicate hello");
        Machine m(state);
        m.on_hello(*hello);
        auto cmds = m.take();
        return {std::move(state), std::move(cmds), std::nullopt};
    }
    if (state.phase == Phase::AwaitingHello) return reject("expected hello");

    if (const auto* loss = std::get_if<LossReport>(&event)) {
        if (!state.outstanding) return reject("loss report without an outstanding train command");
        if (loss->source != state.outstanding->loss_source) return reject("loss source mismatch");
        if (state.phase == Phase::Exploring && !state.candidate_diverged) {
            const std::int64_t rel = loss->step - state.stage_start_step;
            const std::int64_t last =
                state.current_series.points.empty() ? -1 : state.current_series.points.back().step;
            if (rel <= last || rel >= state.plan.tau_prime) {
                return reject("loss report step out of range");
            }
        }
        Machine m(state);
        m.on_loss(*loss);
        return {std::move(state), {}, std::nullopt};
    }
    if (const auto* done = std::get_if<CommandDone>(&event)) {
        if (!state.outstanding || state.outstanding->command_id != done->command_id) {
            return reject("unexpected command_id");
        }
        if (state.phase == Phase::Exploring && !state.candidate_diverged &&
            state.current_series.points.empty()) {
            return reject("no loss reports for candidate");
        }
        Machine m(state);
        m.on_done();
        auto cmds = m.take();
        return {std::move(state), std::move(cmds), std::nullopt};
    }
    return reject("unexpected event");
}

Controller::Controller(SearchConfig config) : state_(initial_state(config)) {}

std::vector<ControllerMessage> Controller::handle(const TrainerMessage& event) {
    auto t = next_command(std::move(state_), event);
    state_ = std::move(t.state);
    if (t.error) error_ = t.error;
    return std::move(t.commands);
}

}  // namespace autolrs
