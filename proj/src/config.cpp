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

#include "autolrs/config.hpp"

#include <cmath>

#include "autolrs/errors.hpp"

namespace autolrs {

std::string to_string(LossSource source) {
    return source == LossSource::Train ? "train" : "validation";
}

LossSource parse_loss_source(const std::string& text) {
    if (text == "train") return LossSource::Train;
    if (text == "validation") return LossSource::Validation;
    throw InvalidArgument("unknown loss source: " + text);
}

void SearchConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw InvalidArgument(std::string("invalid config: ") + what);
    };
    require(std::isfinite(lr_min) && std::isfinite(lr_max) && lr_min > 0.0 && lr_min < lr_max,
            "require 0 < lr_min < lr_max");
    require(k >= 1, "k must be >= 1");
    require(tau_initial >= 1, "tau_initial must be >= 1");
    require(tau_initial <= tau_max, "tau_initial must not exceed tau_max");
    require(tau_prime_ratio > 0.0 && tau_prime_ratio <= 1.0, "tau_prime_ratio must lie in (0, 1]");
    require(std::isfinite(kappa) && kappa > 0.0, "kappa must be positive");
    require(warmup_steps >= 0, "warmup_steps must be >= 0");
    require(std::isfinite(warmup_peak_lr) && warmup_peak_lr >= 0.0, "warmup_peak_lr must be >= 0");
    require(warmup_steps == 0 || warmup_peak_lr > 0.0, "warmup needs warmup_peak_lr > 0");
    require(val_minibatches >= 1, "val_minibatches must be >= 1");
    require(val_every >= 1, "val_every must be >= 1");
    require(std::isfinite(noise_variance) && noise_variance >= 0.0, "noise_variance must be >= 0");
    require(smoothing_iterations >= 1, "smoothing_iterations must be >= 1");
    require(smoothing_drop_fraction >= 0.0 && smoothing_drop_fraction < 0.5,
            "smoothing_drop_fraction must lie in [0, 0.5)");
    require(budget_steps >= 0, "budget_steps must be >= 0");
}

Json to_json(const SearchConfig& c) {
    Json j;
    j["lr_min"] = c.lr_min;
    j["lr_max"] = c.lr_max;
    j["k"] = c.k;
    j["tau_initial"] = c.tau_initial;
    j["tau_max"] = c.tau_max;
    j["tau_prime_ratio"] = c.tau_prime_ratio;
    j["kappa"] = c.kappa;
    j["warmup_steps"] = c.warmup_steps;
    j["warmup_peak_lr"] = c.warmup_peak_lr;
    j["val_minibatches"] = c.val_minibatches;
    j["val_every"] = c.val_every;
    j["noise_variance"] = c.noise_variance;
    j["standardize_targets"] = c.standardize_targets;
    j["smoothing_iterations"] = c.smoothing_iterations;
    j["smoothing_drop_fraction"] = c.smoothing_drop_fraction;
    j["seed"] = c.seed;
    j["budget_steps"] = c.budget_steps;
    return j;
}

namespace {

template <typename T>
void assign(const Json& value, const std::string& key, T& out) {
    if constexpr (std::is_same_v<T, bool>) {
        if (!value.is_boolean()) throw InvalidArgument("config key " + key + ": expected boolean");
        out = value.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
        if (!value.is_number_integer()) throw InvalidArgument("config key " + key + ": expected integer");
        if constexpr (std::is_unsigned_v<T>) {
            if (value.is_number_unsigned()) {
                out = value.get<T>();
            } else {
                const auto v = value.get<std::int64_t>();
                if (v < 0) throw InvalidArgument("config key " + key + ": must be >= 0");
                out = static_cast<T>(v);
            }
        } else {
            out = value.get<T>();
        }
    } else {
        if (!value.is_number()) throw InvalidArgument("config key " + key + ": expected number");
        out = value.get<T>();
    }
}

}  // namespace

SearchConfig apply_overrides(SearchConfig c, const Json& patch) {
    if (patch.is_null()) {
        c.validate();
        return c;
    }
    if (!patch.is_object()) throw InvalidArgument("config overrides must be a JSON object");
    for (const auto& [key, value] : patch.items()) {
        if (key == "lr_min") assign(value, key, c.lr_min);
        else if (key == "lr_max") assign(value, key, c.lr_max);
        else if (key == "k") assign(value, key, c.k);
        else if (key == "tau_initial") assign(value, key, c.tau_initial);
        else if (key == "tau_max") assign(value, key, c.tau_max);
        else if (key == "tau_prime_ratio") assign(value, key, c.tau_prime_ratio);
        else if (key == "kappa") assign(value, key, c.kappa);
        else if (key == "warmup_steps") assign(value, key, c.warmup_steps);
        else if (key == "warmup_peak_lr") assign(value, key, c.warmup_peak_lr);
        else if (key == "val_minibatches") assign(value, key, c.val_minibatches);
        else if (key == "val_every") assign(value, key, c.val_every);
        else if (key == "noise_variance") assign(value, key, c.noise_variance);
        else if (key == "standardize_targets") assign(value, key, c.standardize_targets);
        else if (key == "smoothing_iterations") assign(value, key, c.smoothing_iterations);
        else if (key == "smoothing_drop_fraction") assign(value, key, c.smoothing_drop_fraction);
        else if (key == "seed") assign(value, key, c.seed);
        else if (key == "budget_steps") assign(value, key, c.budget_steps);
        else throw InvalidArgument("unknown config key: " + key);
    }
    c.validate();
    return c;
}

}  // namespace autolrs
