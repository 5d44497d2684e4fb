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

#include <cstdint>
#include <string>

#include "json.hpp"

namespace autolrs {

/// Key order is preserved so documents serialize canonically.
using Json = nlohmann::ordered_json;

enum class LossSource { Train, Validation };

std::string to_string(LossSource source);
/// Parses "train" / "validation"; throws InvalidArgument otherwise.
LossSource parse_loss_source(const std::string& text);

/// Hyperparameters of the schedule search plus the simulated-run budget.
struct SearchConfig {
    double lr_min = 1e-3;
    double lr_max = 1.0;
    int k = 10;
    std::int64_t tau_initial = 1000;
    std::int64_t tau_max = 8000;
    double tau_prime_ratio = 0.1;
    double kappa = 1000.0;
    std::int64_t warmup_steps = 0;
    double warmup_peak_lr = 0.0;
    std::int64_t val_minibatches = 10;
    std::int64_t val_every = 50;
    double noise_variance = 1e-4;
    bool standardize_targets = false;
    int smoothing_iterations = 10;
    double smoothing_drop_fraction = 0.03;
    std::uint64_t seed = 0;
    /// Total applied training steps, warmup included; 0 runs until the trainer stops.
    std::int64_t budget_steps = 15000;

    /// Throws InvalidArgument describing the first violated invariant.
    void validate() const;

    bool operator==(const SearchConfig&) const = default;
};

Json to_json(const SearchConfig& config);
/// Applies the keys present in `patch` on top of `base`. Unknown keys and
/// ill-typed values raise InvalidArgument; the result is validated.
SearchConfig apply_overrides(SearchConfig base, const Json& patch);

}  // namespace autolrs
