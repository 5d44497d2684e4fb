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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "autolrs/cli.hpp"
#include "autolrs/controller.hpp"
#include "autolrs/forecast.hpp"
#include "autolrs/gp.hpp"
#include "autolrs/protocol.hpp"
#include "autolrs/session.hpp"
#include "oracles.hpp"

using namespace autolrs;
namespace fc = autolrs::forecast;

namespace {

struct Verdict {
    bool pass;
    std::string detail;
};

int failures = 0;

void criterion(const char* name, double limit_seconds, const std::function<Verdict()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
        v = body();
    } catch (const std::exception& e) {
        v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > limit_seconds) {
        v.pass = false;
        v.detail += " (over time limit)";
    }
    if (!v.pass) ++failures;
    std::printf("%s %-30s %7.2fs  %s\n", v.pass ? "PASS" : "FAIL", name, secs, v.detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), f, args...);
    return buf;
}

fc::LossSeries<double> sample(int first, int last, std::int64_t tau_prime, std::int64_t tau,
                              const std::function<double(double)>& f) {
    fc::LossSeries<double> s;
    s.observed_tau_prime = tau_prime;
    s.horizon_tau = tau;
    for (int t = first; t <= last; ++t) s.points.push_back({t, f(t)});
    return s;
}

double dip_rise_decay(double t) {
    const double base = 0.8 + 1.2 * std::exp(-0.02 * t);
    const double dip = -0.35 * std::exp(-std::pow((t - 6.0) / 4.0, 2.0));
    const double bump = 0.25 * std::exp(-std::pow((t - 24.0) / 9.0, 2.0));
    return base + dip + bump;
}

/// First reported loss of every exploration Train, grouped by stage.
std::vector<std::vector<double>> first_candidate_losses(const SearchConfig& config,
                                                        sim::SimModel model) {
    Controller controller(config);
    SimTrainerEndpoint trainer(std::move(model));
    std::vector<std::vector<double>> out;
    std::deque<TrainerMessage> inbox{Hello{}};
    bool awaiting = false;
    std::size_t stage = 0;
    while (!inbox.empty() && !controller.stopped()) {
        const TrainerMessage e = inbox.front();
        inbox.pop_front();
        if (const auto* r = std::get_if<LossReport>(&e); r && awaiting) {
            if (out.size() <= stage) out.resize(stage + 1);
            out[stage].push_back(r->value);
            awaiting = false;
        }
        for (const auto& cmd : controller.handle(e)) {
            if (std::holds_alternative<Train>(cmd) && controller.state().phase == Phase::Exploring) {
                awaiting = true;
                stage = controller.schedule().stages.size();
            }
            for (auto& ev : trainer.execute(cmd)) inbox.push_back(std::move(ev));
        }
    }
    return out;
}

sim::SimModel advance(const ScheduleRecord& schedule, sim::SimModel model, std::int64_t steps) {
    for (std::int64_t s = 0; s < steps; ++s) model.sgd_step(lr_at(schedule, s));
    return model;
}

std::string read_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

int main() {
    criterion("kernel-oracle", 1.0, [] {
        double worst = 0.0;
        for (int i = 0; i < 100; ++i) {
            const double r = 1e-3 * std::pow(1e4, i / 99.0);
            const double bessel = oracles::matern_bessel(r, 2.5, 1.0);
            worst = std::max(worst, std::abs(gp::matern_kernel(0.0, r) - bessel) / bessel);
        }
        return Verdict{worst <= 1e-9, fmt("max rel err %.2e over 100 distances", worst)};
    });

    criterion("gp-oracle", 5.0, [] {
        std::mt19937_64 rng(2024);
        std::uniform_int_distribution<int> size(1, 20);
        std::uniform_real_distribution<double> xs(-3.0, 0.0);
        std::uniform_real_distribution<double> ys(0.0, 3.0);
        std::uniform_real_distribution<double> noise(1e-4, 1e-1);
        double worst = 0.0;
        for (int p = 0; p < 50; ++p) {
            std::vector<gp::Observation<double>> obs;
            const int n = size(rng);
            for (int i = 0; i < n; ++i) obs.push_back({xs(rng), ys(rng)});
            const double sigma2 = noise(rng);
            const auto post = gp::fit_posterior(obs, sigma2);
            for (int q = 0; q < 20; ++q) {
                const double x = xs(rng);
                const auto mine = post.predict(x);
                const auto ref = oracles::dense_predict(obs, sigma2 + post.jitter(), x);
                worst = std::max({worst, std::abs(mine.mean - ref.mean),
                                  std::abs(mine.stddev - ref.stddev)});
            }
        }
        return Verdict{worst <= 1e-8, fmt("max abs err %.2e on 50 problems", worst)};
    });

    criterion("fit-recovery", 10.0, [] {
        const auto truth = [](double t) { return 2.0 * std::exp(-0.01 * t) + 0.5; };
        const auto fit = fc::fit_exponential(sample(1, 100, 100, 1000, truth));
        const double ea = std::abs(fit.a - 2.0) / 2.0;
        const double eb = std::abs(fit.b + 0.01) / 0.01;
        const double ec = std::abs(fit.c - 0.5) / 0.5;
        const double ef = std::abs(fc::forecast_loss(fit, 1000.0) - truth(1000)) / truth(1000);
        std::vector<double> errs;
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            std::mt19937_64 rng(seed);
            std::normal_distribution<double> noise(0.0, 0.01);
            const auto f = fc::fit_exponential(
                sample(1, 100, 100, 1000, [&](double t) { return truth(t) + noise(rng); }));
            errs.push_back(std::abs(f.c - 0.5));
        }
        std::sort(errs.begin(), errs.end());
        const double p95 = errs[94];
        const bool ok = ea < 1e-3 && eb < 1e-3 && ec < 1e-3 && ef <= 1e-2 && p95 <= 0.05;
        return Verdict{ok, fmt("rel err a=%.1e b=%.1e c=%.1e forecast=%.1e; noisy p95|dc|=%.4f",
                               ea, eb, ec, ef, p95)};
    });

    criterion("exponential-realizability", 5.0, [] {
        double worst = 0.0;
        for (double curvature : {0.01, 0.1, 0.6}) {
            for (double lr : {0.05, 0.3, 1.0}) {
                if (lr * curvature >= 1.0) continue;
                sim::Quadratic q;
                q.curvatures = Eigen::VectorXd::Constant(1, curvature);
                q.optimum = Eigen::VectorXd::Zero(1);
                sim::SimModel m(q, Eigen::VectorXd::Ones(1), 0);
                fc::LossSeries<double> s;
                s.observed_tau_prime = 100;
                s.horizon_tau = 1000;
                for (int t = 0; t < 100; ++t) s.points.push_back({t, m.sgd_step(lr).loss});
                const auto fit = fc::fit_exponential(s);
                const double expect = 2.0 * std::log(std::abs(1.0 - lr * curvature));
                if (fit.degenerate) return Verdict{false, "degenerate fit"};
                worst = std::max(worst, std::abs(fit.b - expect));
            }
        }
        return Verdict{worst <= 1e-6, fmt("max |b - 2 ln|1 - lr*lambda|| = %.2e", worst)};
    });

    criterion("smoothing-efficacy", 5.0, [] {
        auto s = sample(1, 100, 100, 1000, dip_rise_decay);
        const std::vector<std::int64_t> spikes{9, 23, 38, 47};
        for (auto step : spikes) s.points[static_cast<std::size_t>(step - 1)].loss += 0.6;
        const double truth = dip_rise_decay(1000);
        const double raw = fc::forecast_loss(fc::fit_exponential(s), 1000.0);
        fc::SmoothingParams params;
        params.iterations = 10;
        const auto smoothed = fc::forecast_candidate(s, params);
        const double err_raw = std::abs(raw - truth);
        const double err_smooth = std::abs(smoothed.value - truth);
        const auto& removed = smoothed.smoothing->removed_steps;
        bool all_removed = true;
        for (auto step : spikes) {
            all_removed = all_removed && std::find(removed.begin(), removed.end(), step) != removed.end();
        }
        return Verdict{err_smooth < err_raw && all_removed,
                       fmt("|err| raw=%.4f smoothed=%.4f; spikes removed: %s", err_raw, err_smooth,
                           all_removed ? "all" : "not all")};
    });

    criterion("greedy-stage-optimality", 30.0, [] {
        SearchConfig c;
        c.lr_min = 1e-3;
        c.lr_max = 1.5;
        const sim::SimModel start = sim::make_preset("quadratic", 0);
        const auto floor = std::get<sim::Quadratic>(start.landscape()).floor;
        const auto r = run_in_process(c, start);
        double worst = 0.0;
        for (const auto& stage : r.schedule.stages) {
            const sim::SimModel at = advance(r.schedule, start, stage.start_step);
            const auto oracle = sim::oracle_best_lr(at, c.lr_min, c.lr_max, stage.tau, 256);
            const double chosen = constant_lr_loss(at, stage.chosen_lr, stage.tau);
            worst = std::max(worst, (chosen - floor) / (oracle.best_loss - floor) - 1.0);
        }
        return Verdict{!r.schedule.stages.empty() && worst <= 0.05,
                       fmt("%zu stages; worst excess over oracle %.3f%%", r.schedule.stages.size(),
                           100.0 * worst)};
    });

    criterion("curriculum-accounting", 60.0, [] {
        std::string detail;
        bool ok = true;
        for (std::int64_t budget : {15000, 39000}) {
            for (const char* preset : {"quadratic", "logistic"}) {
                SearchConfig c;
                c.budget_steps = budget;
                const auto r = run_in_process(c, sim::make_preset(preset, 0));
                std::int64_t start = 0;
                for (std::size_t i = 0; i < r.schedule.stages.size(); ++i) {
                    const auto& s = r.schedule.stages[i];
                    const std::int64_t expect = std::min<std::int64_t>(1000LL << std::min<std::size_t>(i, 3), 8000);
                    ok = ok && s.tau == expect && s.start_step == start;
                    start += s.tau;
                }
                const auto acc = step_accounting(r.schedule);
                ok = ok && acc.applied_steps == budget && acc.exploration_steps == acc.applied_steps;
                detail += fmt("%s/%lld: %zu stages, applied=%lld explore=%lld; ", preset,
                              static_cast<long long>(budget), r.schedule.stages.size(),
                              static_cast<long long>(acc.applied_steps),
                              static_cast<long long>(acc.exploration_steps));
            }
        }
        return Verdict{ok, detail};
    });

    criterion("checkpoint-comparability", 60.0, [] {
        SearchConfig c;
        int stages = 0;
        int candidates = 0;
        bool ok = true;
        for (const auto& preset : sim::preset_names()) {
            const auto losses = first_candidate_losses(c, sim::make_preset(preset, 0));
            ok = ok && !losses.empty();
            for (const auto& stage : losses) {
                ++stages;
                candidates += static_cast<int>(stage.size());
                ok = ok && stage.size() == static_cast<std::size_t>(c.k);
                for (double v : stage) ok = ok && std::memcmp(&v, &stage.front(), sizeof(v)) == 0;
            }
        }
        return Verdict{ok, fmt("%d stages, %d candidates across all landscapes", stages, candidates)};
    });

    criterion("end-to-end-improvement", 300.0, [] {
        SearchConfig c;
        c.budget_steps = 20000;
        const sim::SimModel start = sim::make_preset("logistic", 0);
        const auto r = run_in_process(c, start);
        const auto oracle = sim::oracle_best_lr(start, c.lr_min, c.lr_max, 20000, 256);
        const double target = oracle.best_loss * 1.02;
        const auto trace = replay(r.schedule, start, 20000, 1);
        std::int64_t reached = -1;
        for (const auto& p : trace) {
            if (p.validation_loss <= target) {
                reached = p.step;
                break;
            }
        }
        const double final_loss = trace.back().validation_loss;
        const double at_min = constant_lr_loss(start, c.lr_min, 20000);
        const double at_max = constant_lr_loss(start, c.lr_max, 20000);
        const std::int64_t applied = step_accounting(r.schedule).applied_steps;
        const bool ok = reached > 0 && applied <= 20000 && final_loss < at_min && final_loss < at_max;
        return Verdict{ok, fmt("target %.4f (oracle lr %.3g) reached at step %lld; final %.4f vs "
                               "lr_min %.4f, lr_max %.4f",
                               target, oracle.best_lr, static_cast<long long>(reached), final_loss,
                               at_min, at_max)};
    });

    criterion("determinism", 60.0, [] {
        const auto dir = std::filesystem::temp_directory_path() /
                         ("autolrs-acceptance-" + std::to_string(::getpid()));
        std::filesystem::create_directories(dir);
        bool ok = true;
        for (const char* landscape : {"quadratic", "noisy-quadratic", "logistic"}) {
            std::string files[2];
            for (int i = 0; i < 2; ++i) {
                const auto path = (dir / (std::string(landscape) + std::to_string(i) + ".json")).string();
                const char* argv[] = {"autolrs", "simulate", "--landscape", landscape, "--seed", "7",
                                      "--output", path.c_str()};
                std::ostringstream out;
                std::ostringstream err;
                ok = ok && cli::run(8, argv, out, err) == 0;
                files[i] = read_bytes(path);
            }
            ok = ok && !files[0].empty() && files[0] == files[1];
        }
        std::filesystem::remove_all(dir);
        return Verdict{ok, "simulate twice per landscape, ScheduleRecord files byte-compared"};
    });

    criterion("protocol-totality", 120.0, [] {
        std::mt19937_64 rng(1);
        std::uniform_int_distribution<int> len(0, 200);
        std::uniform_int_distribution<int> byte(0, 255);
        static const std::string alphabet = "{}[]\":,.-+eE0123456789 truefalsnl\\typestepvalue";
        std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
        const std::vector<Message> variants = {
            Hello{"autolrs/1", Json{{"k", 4}}}, LossReport{3, 0.25, LossSource::Validation},
            LossReport{4, HUGE_VAL, LossSource::Train}, CommandDone{9}, TrainerError{"x\ny"},
            Stop{}, SetLr{0.1}, SaveCkpt{}, RestoreCkpt{}, Train{100, LossSource::Train, 1, 2},
            EvalConfig{10, 50}, Shutdown{"done"}};
        std::size_t decoded = 0;
        for (int i = 0; i < 1000000; ++i) {
            std::string line;
            switch (i % 3) {
                case 0:
                    for (int n = len(rng); n > 0; --n) line.push_back(static_cast<char>(byte(rng)));
                    break;
                case 1:
                    for (int n = len(rng); n > 0; --n) line.push_back(alphabet[pick(rng)]);
                    break;
                default: {
                    line = protocol::encode(variants[static_cast<std::size_t>(i) % variants.size()]);
                    std::uniform_int_distribution<std::size_t> at(0, line.size() - 1);
                    line[at(rng)] = static_cast<char>(byte(rng));
                }
            }
            decoded += std::holds_alternative<Message>(protocol::decode(line));
        }
        bool round_trip = true;
        for (const auto& m : variants) {
            const auto r = protocol::decode(protocol::encode(m));
            round_trip = round_trip && std::holds_alternative<Message>(r) && std::get<Message>(r) == m;
        }
        bool transparent = true;
        for (const char* preset : {"quadratic", "logistic"}) {
            SearchConfig c;
            const auto direct = run_in_process(c, sim::make_preset(preset, 3));
            const auto net = run_over_loopback(c, sim::make_preset(preset, 3));
            transparent = transparent && !net.error &&
                          to_json(direct.schedule).dump() == to_json(net.schedule).dump();
        }
        return Verdict{round_trip && transparent,
                       fmt("1e6 fuzz lines decoded without crash (%zu accepted); round-trip %s; "
                           "network == in-process: %s",
                           decoded, round_trip ? "ok" : "BROKEN", transparent ? "yes" : "no")};
    });

    std::printf("%s: %d failing criteria\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
