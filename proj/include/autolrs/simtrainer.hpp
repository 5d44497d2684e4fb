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

// Deterministic simulated trainers.
//
// Each SimModel runs plain SGD, theta <- theta - lr * grad, on a synthetic
// landscape whose learning-rate behaviour is known in closed form or cheap to
// brute-force. All randomness comes from an rng that is part of the checkpoint,
// so restoring a checkpoint replays trajectories bit-exactly.

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace autolrs::sim {

/// Full-batch quadratic: loss = 1/2 sum_i curvature_i (theta_i - optimum_i)^2 + floor.
struct Quadratic {
    Eigen::VectorXd curvatures;
    Eigen::VectorXd optimum;
    double floor = 0.0;
};

/// Quadratic with additive Gaussian gradient noise.
struct NoisyQuadratic {
    Quadratic base;
    double noise_std = 0.01;
};

/// Two Gaussian classes, logistic regression with bias, mini-batch SGD.
struct LogisticBlobs {
    int dim = 10;
    int train_size = 4096;
    double separation = 1.5;
    double min_feature_scale = 0.3;
    double max_feature_scale = 3.0;
    int batch_size = 32;
    int val_minibatches = 10;
    std::uint64_t data_seed = 1;
};

/// Quadratic regimes switched by step; each entry starts at its step.
struct PiecewiseRegime {
    std::vector<std::pair<std::int64_t, Quadratic>> regimes;
};

using Landscape = std::variant<Quadratic, NoisyQuadratic, LogisticBlobs, PiecewiseRegime>;

struct StepResult {
    /// Loss before the update (mini-batch loss for LogisticBlobs); +inf once diverged.
    double loss;
    bool diverged;
};

struct Checkpoint {
    Eigen::VectorXd theta;
    std::mt19937_64 rng;
    std::normal_distribution<double> normal;
    std::int64_t step = 0;
};

struct BlobData;

class SimModel {
public:
    SimModel(Landscape landscape, Eigen::VectorXd theta0, std::uint64_t seed);

    StepResult sgd_step(double lr);
    /// Mean loss over the held-out set (for quadratics, identical to the loss).
    double validation_loss() const;
    /// Full-data training objective at the current parameters.
    double train_loss() const;

    Checkpoint save() const;
    void restore(const Checkpoint& checkpoint);

    std::int64_t step() const { return step_; }
    const Eigen::VectorXd& theta() const { return theta_; }
    bool diverged() const { return !theta_.allFinite(); }
    const Landscape& landscape() const { return landscape_; }

private:
    const Quadratic& active_quadratic() const;

    Landscape landscape_;
    std::shared_ptr<const BlobData> blobs_;
    Eigen::VectorXd theta_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_;
    std::int64_t step_ = 0;
};

/// Quadratic loss at theta; 1/2 sum curvature (theta - optimum)^2 + floor.
double quadratic_loss(const Quadratic& q, const Eigen::VectorXd& theta);

struct OracleEntry {
    double lr;
    double loss;
};

struct OracleResult {
    double best_lr;
    double best_loss;
    std::vector<OracleEntry> table;
};

/// Brute-force constant-lr search: for each of grid_size log-uniform rates in
/// [lr_min, lr_max], run tau steps from a copy of `start` and record the
/// validation loss (+inf when diverged). Ties go to the smaller rate.
OracleResult oracle_best_lr(const SimModel& start, double lr_min, double lr_max, std::int64_t tau,
                            std::size_t grid_size);

/// Log-uniform grid with exact endpoints.
std::vector<double> log_grid(double lo, double hi, std::size_t n);

/// Named presets used by the CLI and the acceptance suite.
SimModel make_preset(const std::string& name, std::uint64_t seed);
std::vector<std::string> preset_names();

}  // namespace autolrs::sim
