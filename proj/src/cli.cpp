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

#include "autolrs/cli.hpp"

#include <atomic>
#include <csignal>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <vector>

#include "CLI11.hpp"
#include "autolrs/errors.hpp"
#include "autolrs/forecast.hpp"
#include "autolrs/server.hpp"
#include "autolrs/session.hpp"
#include "autolrs/simtrainer.hpp"

namespace autolrs::cli {

namespace {

/// Input problems that map to exit code 1.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Json read_json(const std::string& path) {
    Json doc = Json::parse(read_file(path), nullptr, false);
    if (doc.is_discarded()) throw UsageError(path + ": not valid JSON");
    return doc;
}

/// Runs `fn` against a file stream, or `out` when path is empty or "-".
void write_output(const std::string& path, std::ostream& out,
                  const std::function<void(std::ostream&)>& fn) {
    if (path.empty() || path == "-") {
        fn(out);
        return;
    }
    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot write " + path);
    fn(file);
    if (!file.flush()) throw std::runtime_error("cannot write " + path);
}

/// SearchConfig flags shared by serve and simulate. Values given explicitly
/// win over the config file, which wins over the defaults.
class ConfigFlags {
public:
    void attach(CLI::App* app) {
        add(app, "--lr-min", "Lower end of the learning-rate search interval", flags_.lr_min,
            [](SearchConfig& c, const SearchConfig& f) { c.lr_min = f.lr_min; });
        add(app, "--lr-max", "Upper end of the learning-rate search interval", flags_.lr_max,
            [](SearchConfig& c, const SearchConfig& f) { c.lr_max = f.lr_max; });
        add(app, "--k", "Candidates explored per stage", flags_.k,
            [](SearchConfig& c, const SearchConfig& f) { c.k = f.k; });
        add(app, "--tau-initial", "Length of the first stage in steps", flags_.tau_initial,
            [](SearchConfig& c, const SearchConfig& f) { c.tau_initial = f.tau_initial; });
        add(app, "--tau-max", "Longest stage; reached by doubling", flags_.tau_max,
            [](SearchConfig& c, const SearchConfig& f) { c.tau_max = f.tau_max; });
        add(app, "--tau-prime-ratio", "Exploration length as a fraction of the stage",
            flags_.tau_prime_ratio,
            [](SearchConfig& c, const SearchConfig& f) { c.tau_prime_ratio = f.tau_prime_ratio; });
        add(app, "--kappa", "Exploration weight of the LCB acquisition", flags_.kappa,
            [](SearchConfig& c, const SearchConfig& f) { c.kappa = f.kappa; });
        add(app, "--warmup-steps", "Linear warmup steps before the first stage",
            flags_.warmup_steps,
            [](SearchConfig& c, const SearchConfig& f) { c.warmup_steps = f.warmup_steps; });
        add(app, "--warmup-peak-lr", "Learning rate reached at the end of warmup",
            flags_.warmup_peak_lr,
            [](SearchConfig& c, const SearchConfig& f) { c.warmup_peak_lr = f.warmup_peak_lr; });
        add(app, "--val-minibatches", "Validation mini-batches per evaluation",
            flags_.val_minibatches,
            [](SearchConfig& c, const SearchConfig& f) { c.val_minibatches = f.val_minibatches; });
        add(app, "--val-every", "Validation cadence in steps", flags_.val_every,
            [](SearchConfig& c, const SearchConfig& f) { c.val_every = f.val_every; });
        add(app, "--noise-variance", "Observation noise of the GP surrogate",
            flags_.noise_variance,
            [](SearchConfig& c, const SearchConfig& f) { c.noise_variance = f.noise_variance; });
        add(app, "--seed", "Seed of the simulated trainer", flags_.seed,
            [](SearchConfig& c, const SearchConfig& f) { c.seed = f.seed; });
        add(app, "--budget-steps", "Applied-step budget, warmup included (0: unlimited)",
            flags_.budget_steps,
            [](SearchConfig& c, const SearchConfig& f) { c.budget_steps = f.budget_steps; });
        app->add_option("--config", config_path_, "JSON file with SearchConfig keys");
    }

    SearchConfig resolve() const {
        SearchConfig config;
        if (!config_path_.empty()) {
            Json doc = read_json(config_path_);
            if (!doc.is_object()) throw UsageError(config_path_ + ": expected a JSON object");
            try {
                config = apply_overrides(config, doc);
            } catch (const InvalidArgument& e) {
                throw UsageError(config_path_ + ": " + e.what());
            }
        }
        for (const auto& [opt, apply] : bindings_) {
            if (opt->count() > 0) apply(config, flags_);
        }
        try {
            config.validate();
        } catch (const InvalidArgument& e) {
            throw UsageError(e.what());
        }
        return config;
    }

private:
    using Apply = std::function<void(SearchConfig&, const SearchConfig&)>;

    template <typename T>
    void add(CLI::App* app, const std::string& name, const std::string& help, T& field,
             Apply apply) {
        CLI::Option* opt = app->add_option(name, field, help)->capture_default_str();
        bindings_.emplace_back(opt, std::move(apply));
    }

    SearchConfig flags_;
    std::string config_path_;
    std::vector<std::pair<CLI::Option*, Apply>> bindings_;
};

std::atomic<Server*> g_server{nullptr};

extern "C" void on_signal(int) {
    if (Server* s = g_server.load()) s->stop();
}

std::vector<forecast::LossPoint<double>> read_loss_csv(const std::string& path) {
    std::istringstream in(read_file(path));
    std::vector<forecast::LossPoint<double>> points;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw UsageError(path + ":" + std::to_string(lineno) + ": expected step,loss");
        }
        try {
            std::size_t used = 0;
            const long long step = std::stoll(line.substr(0, comma), &used);
            const std::string rest = line.substr(comma + 1);
            std::size_t used_loss = 0;
            const double loss = std::stod(rest, &used_loss);
            if (rest.find_first_not_of(" \t", used_loss) != std::string::npos) {
                throw std::invalid_argument("trailing characters");
            }
            points.push_back({step, loss});
        } catch (const std::logic_error&) {
            if (lineno == 1 && points.empty()) continue;  // header
            throw UsageError(path + ":" + std::to_string(lineno) + ": expected step,loss");
        }
    }
    if (points.empty()) throw UsageError(path + ": no data");
    return points;
}

Json fit_to_json(const forecast::CandidateForecast<double>& result,
                 const forecast::LossSeries<double>& series) {
    Json doc;
    doc["tau"] = series.horizon_tau;
    doc["tau_prime"] = series.observed_tau_prime;
    doc["points"] = series.points.size();
    if (result.fit) {
        const auto& f = *result.fit;
        doc["a"] = f.a;
        doc["b"] = f.b;
        doc["c"] = f.c;
        doc["sse"] = f.sse;
        doc["degenerate"] = f.degenerate;
        doc["degenerate_reason"] = f.reason;
    } else {
        doc["a"] = nullptr;
        doc["b"] = nullptr;
        doc["c"] = nullptr;
        doc["sse"] = nullptr;
        doc["degenerate"] = nullptr;
        doc["degenerate_reason"] = nullptr;
    }
    doc["forecast"] = result.value;
    doc["fallback"] = result.fallback;
    Json removed = Json::array();
    if (result.smoothing) {
        for (auto s : result.smoothing->removed_steps) removed.push_back(s);
    }
    doc["removed_steps"] = removed;
    Json curve = Json::array();
    if (result.fit && !result.fit->degenerate) {
        const std::int64_t n = 10;
        for (std::int64_t i = 1; i <= n; ++i) {
            const std::int64_t t = series.horizon_tau * i / n;
            curve.push_back({{"step", t},
                             {"loss", forecast::forecast_loss(*result.fit, static_cast<double>(t))}});
        }
    }
    doc["forecasts"] = curve;
    return doc;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"autolrs: learning-rate schedule search", "autolrs"};
    app.require_subcommand(1);

    // serve
    CLI::App* serve = app.add_subcommand("serve", "Run the controller as a TCP service");
    ConfigFlags serve_flags;
    serve_flags.attach(serve);
    std::string bind = "127.0.0.1";
    int port = kDefaultPort;
    double idle_timeout = 600;
    serve->add_option("--bind", bind, "Address to listen on")->capture_default_str();
    serve->add_option("--port", port, "TCP port")
        ->envname("AUTOLRS_PORT")
        ->check(CLI::Range(0, 65535))
        ->capture_default_str();
    serve->add_option("--idle-timeout", idle_timeout, "Seconds of silence before a session closes")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    // simulate
    CLI::App* simulate = app.add_subcommand("simulate", "Run a full session on a simulated trainer");
    ConfigFlags sim_flags;
    sim_flags.attach(simulate);
    std::string landscape = "quadratic";
    std::string schedule_out;
    std::string csv_out;
    std::string trace_out;
    std::int64_t trace_every = 100;
    bool loopback = false;
    simulate->add_option("--landscape", landscape, "Simulated landscape")
        ->check(CLI::IsMember(sim::preset_names()))
        ->capture_default_str();
    simulate->add_option("--output", schedule_out, "ScheduleRecord JSON (default: stdout)");
    simulate->add_option("--csv-out", csv_out, "Schedule as step,lr CSV");
    simulate->add_option("--trace-out", trace_out, "Validation-loss trace of the schedule as CSV");
    simulate->add_option("--trace-every", trace_every, "Trace resolution in steps")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    simulate->add_flag("--loopback", loopback, "Run the session through a local TCP server");

    // fit
    CLI::App* fit = app.add_subcommand("fit", "Smooth a loss curve and fit a exp(b t) + c");
    std::string fit_input;
    std::string fit_output;
    std::int64_t tau_prime = 0;
    std::int64_t tau = 0;
    forecast::SmoothingParams smoothing;
    fit->add_option("--input", fit_input, "CSV with step,loss rows")->required();
    fit->add_option("--output", fit_output, "Result JSON (default: stdout)");
    fit->add_option("--tau-prime", tau_prime, "Observed horizon (default: last step)");
    fit->add_option("--tau", tau, "Forecast horizon (default: 10 x tau')");
    fit->add_option("--iterations", smoothing.iterations, "Smoothing rounds")->capture_default_str();
    fit->add_option("--drop-fraction", smoothing.drop_fraction, "Fraction dropped per round")
        ->capture_default_str();

    // export
    CLI::App* exp = app.add_subcommand("export", "Convert a ScheduleRecord to step,lr CSV");
    std::string export_input;
    std::string export_output;
    exp->add_option("--input", export_input, "ScheduleRecord JSON")->required();
    exp->add_option("--output", export_output, "CSV file (default: stdout)");

    // oracle
    CLI::App* oracle = app.add_subcommand("oracle", "Brute-force constant learning rates");
    std::string oracle_landscape = "quadratic";
    std::string oracle_output;
    std::uint64_t oracle_seed = 0;
    double oracle_lr_min = 1e-3;
    double oracle_lr_max = 1.0;
    std::int64_t oracle_tau = 1000;
    std::size_t grid_size = 256;
    oracle->add_option("--landscape", oracle_landscape, "Simulated landscape")
        ->check(CLI::IsMember(sim::preset_names()))
        ->capture_default_str();
    oracle->add_option("--seed", oracle_seed, "Seed of the simulated trainer")->capture_default_str();
    oracle->add_option("--lr-min", oracle_lr_min, "Smallest rate")->capture_default_str();
    oracle->add_option("--lr-max", oracle_lr_max, "Largest rate")->capture_default_str();
    oracle->add_option("--tau", oracle_tau, "Steps per rate")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    oracle->add_option("--grid-size", grid_size, "Number of rates")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    oracle->add_option("--output", oracle_output, "CSV file (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help("", CLI::AppFormatMode::All);
            return 0;
        }
        err << "autolrs: " << e.what() << "\n";
        return 1;
    }

    try {
        if (serve->parsed()) {
            ServerOptions options;
            options.bind_address = bind;
            options.port = port;
            options.config = serve_flags.resolve();
            options.idle_timeout = std::chrono::milliseconds(static_cast<long long>(idle_timeout * 1000));
            std::mutex log_mutex;
            options.on_session_end = [&](const SessionSummary& s) {
                std::lock_guard lock(log_mutex);
                Json line;
                line["peer"] = s.peer;
                line["stop_reason"] = s.stop_reason;
                line["stages"] = s.schedule.stages.size();
                line["schedule"] = to_json(s.schedule);
                out << line.dump() << std::endl;
            };
            Server server(options);
            err << "autolrs: listening on " << bind << ":" << server.port() << std::endl;
            g_server.store(&server);
            auto old_int = std::signal(SIGINT, on_signal);
            auto old_term = std::signal(SIGTERM, on_signal);
            server.run();
            std::signal(SIGINT, old_int);
            std::signal(SIGTERM, old_term);
            g_server.store(nullptr);
            return 0;
        }
        if (simulate->parsed()) {
            const SearchConfig config = sim_flags.resolve();
            sim::SimModel model = sim::make_preset(landscape, config.seed);
            SessionResult result = loopback ? run_over_loopback(config, model)
                                            : run_in_process(config, model);
            if (result.error) throw std::runtime_error("session failed: " + *result.error);
            write_output(schedule_out, out,
                         [&](std::ostream& o) { o << to_json(result.schedule).dump(2) << "\n"; });
            if (!csv_out.empty()) {
                write_output(csv_out, out,
                             [&](std::ostream& o) { write_schedule_csv(result.schedule, o); });
            }
            if (!trace_out.empty()) {
                const auto steps = step_accounting(result.schedule).applied_steps +
                                   config.warmup_steps;
                const auto trace = replay(result.schedule, model, steps, trace_every);
                write_output(trace_out, out, [&](std::ostream& o) {
                    o << "step,lr,validation_loss\n";
                    char buf[96];
                    for (const auto& p : trace) {
                        std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g\n",
                                      static_cast<long long>(p.step), p.lr, p.validation_loss);
                        o << buf;
                    }
                });
            }
            return 0;
        }
        if (fit->parsed()) {
            forecast::LossSeries<double> series;
            series.points = read_loss_csv(fit_input);
            series.observed_tau_prime = tau_prime > 0 ? tau_prime : series.points.back().step;
            series.horizon_tau = tau > 0 ? tau : 10 * series.observed_tau_prime;
            try {
                forecast::validate(series);
                forecast::validate(smoothing);
            } catch (const InvalidArgument& e) {
                throw UsageError(e.what());
            }
            const auto result = forecast::forecast_candidate(series, smoothing);
            write_output(fit_output, out, [&](std::ostream& o) {
                o << fit_to_json(result, series).dump(2) << "\n";
            });
            return 0;
        }
        if (exp->parsed()) {
            ScheduleRecord record;
            try {
                record = schedule_from_json(read_json(export_input));
            } catch (const InvalidArgument& e) {
                throw UsageError(export_input + ": " + e.what());
            }
            write_output(export_output, out, [&](std::ostream& o) { write_schedule_csv(record, o); });
            return 0;
        }
        if (oracle->parsed()) {
            if (!(oracle_lr_min > 0.0 && oracle_lr_min < oracle_lr_max)) {
                throw UsageError("oracle: require 0 < lr-min < lr-max");
            }
            const sim::SimModel model = sim::make_preset(oracle_landscape, oracle_seed);
            const auto result =
                sim::oracle_best_lr(model, oracle_lr_min, oracle_lr_max, oracle_tau, grid_size);
            write_output(oracle_output, out, [&](std::ostream& o) {
                o << "lr,loss\n";
                char buf[80];
                for (const auto& e : result.table) {
                    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", e.lr, e.loss);
                    o << buf;
                }
            });
            err << "best lr " << result.best_lr << " loss " << result.best_loss << "\n";
            return 0;
        }
    } catch (const UsageError& e) {
        err << "autolrs: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "autolrs: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

}  // namespace autolrs::cli
