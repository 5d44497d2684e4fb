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

#include "autolrs/simtrainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "autolrs/errors.hpp"

namespace autolrs::sim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double finite_or_inf(double v) { return std::isfinite(v) ? v : kInf; }

// Numerically stable binary cross-entropy for logit z and label y in {0, 1}.
double bce(double z, double y) {
    return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

void check_quadratic(const Quadratic& q, Eigen::Index dim) {
    if (q.curvatures.size() != dim || q.optimum.size() != dim) {
        throw InvalidArgument("quadratic landscape: dimension mismatch with theta");
    }
    if ((q.curvatures.array() < 0.0).any()) {
        throw InvalidArgument("quadratic landscape: curvatures must be >= 0");
    }
}

}  // namespace

struct BlobData {
    // rows are samples; last column is the constant 1 for the bias
    Eigen::MatrixXd train_x;
    Eigen::VectorXd train_y;
    Eigen::MatrixXd val_x;
    Eigen::VectorXd val_y;
};

namespace {

std::shared_ptr<const BlobData> make_blobs(const LogisticBlobs& cfg) {
    if (cfg.dim < 1 || cfg.train_size < 2 || cfg.batch_size < 1 || cfg.val_minibatches < 1) {
        throw InvalidArgument("logistic blobs: invalid sizes");
    }
    std::mt19937_64 rng(cfg.data_seed);
    std::normal_distribution<double> normal;
    std::bernoulli_distribution coin(0.5);

    Eigen::VectorXd scale(cfg.dim);
    for (int j = 0; j < cfg.dim; ++j) {
        const double frac = cfg.dim == 1 ? 0.0 : static_cast<double>(j) / (cfg.dim - 1);
        scale(j) = cfg.min_feature_scale *
                   std::pow(cfg.max_feature_scale / cfg.min_feature_scale, frac);
    }
    const double shift = 0.5 * cfg.separation / std::sqrt(static_cast<double>(cfg.dim));

    auto draw = [&](int n, Eigen::MatrixXd& x, Eigen::VectorXd& y) {
        x.resize(n, cfg.dim + 1);
        y.resize(n);
        for (int i = 0; i < n; ++i) {
            const bool positive = coin(rng);
            y(i) = positive ? 1.0 : 0.0;
            for (int j = 0; j < cfg.dim; ++j) {
                x(i, j) = scale(j) * ((positive ? shift : -shift) + normal(rng));
            }
            x(i, cfg.dim) = 1.0;
        }
    };
    auto data = std::make_shared<BlobData>();
    draw(cfg.train_size, data->train_x, data->train_y);
    draw(cfg.val_minibatches * cfg.batch_size, data->val_x, data->val_y);
    return data;
}

double mean_bce(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& theta) {
    const Eigen::VectorXd logits = x * theta;
    double total = 0.0;
    for (Eigen::Index i = 0; i < logits.size(); ++i) total += bce(logits(i), y(i));
    return total / static_cast<double>(logits.size());
}

}  // namespace

double quadratic_loss(const Quadratic& q, const Eigen::VectorXd& theta) {
    const Eigen::ArrayXd d = (theta - q.optimum).array();
    return 0.5 * (q.curvatures.array() * d * d).sum() + q.floor;
}

SimModel::SimModel(Landscape landscape, Eigen::VectorXd theta0, std::uint64_t seed)
    : landscape_(std::move(landscape)), theta_(std::move(theta0)), rng_(seed) {
    const auto dim = theta_.size();
    std::visit(
        [&](const auto& l) {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, Quadratic>) {
                check_quadratic(l, dim);
            } else if constexpr (std::is_same_v<L, NoisyQuadratic>) {
                check_quadratic(l.base, dim);
                if (!(l.noise_std >= 0.0)) throw InvalidArgument("noisy quadratic: noise_std < 0");
            } else if constexpr (std::is_same_v<L, LogisticBlobs>) {
                if (dim != l.dim + 1) {
                    throw InvalidArgument("logistic blobs: theta must have dim + 1 entries");
                }
                blobs_ = make_blobs(l);
            } else {
                if (l.regimes.empty() || l.regimes.front().first != 0) {
                    throw InvalidArgument("piecewise regime: first regime must start at step 0");
                }
                for (std::size_t i = 0; i < l.regimes.size(); ++i) {
                    check_quadratic(l.regimes[i].second, dim);
                    if (i > 0 && l.regimes[i].first <= l.regimes[i - 1].first) {
                        throw InvalidArgument("piecewise regime: start steps must increase");
                    }
                }
            }
        },
        landscape_);
}

const Quadratic& SimModel::active_quadratic() const {
    if (const auto* q = std::get_if<Quadratic>(&landscape_)) return *q;
    if (const auto* nq = std::get_if<NoisyQuadratic>(&landscape_)) return nq->base;
    const auto& regimes = std::get<PiecewiseRegime>(landscape_).regimes;
    auto it = std::upper_bound(regimes.begin(), regimes.end(), step_,
                               [](std::int64_t s, const auto& r) { return s < r.first; });
    return std::prev(it)->second;
}

StepResult SimModel::sgd_step(double lr) {
    if (!(lr > 0.0) || !std::isfinite(lr)) throw InvalidArgument("sgd_step: lr must be positive");
    if (diverged()) {
        ++step_;
        return {kInf, true};
    }

    double loss = 0.0;
    if (const auto* cfg = std::get_if<LogisticBlobs>(&landscape_)) {
        const auto& data = *blobs_;
        std::uniform_int_distribution<Eigen::Index> pick(0, data.train_x.rows() - 1);
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta_.size());
        for (int b = 0; b < cfg->batch_size; ++b) {
            const Eigen::Index i = pick(rng_);
            const double z = data.train_x.row(i).dot(theta_);
            loss += bce(z, data.train_y(i));
            grad += (sigmoid(z) - data.train_y(i)) * data.train_x.row(i).transpose();
        }
        loss /= cfg->batch_size;
        theta_ -= lr / cfg->batch_size * grad;
    } else {
        const Quadratic& q = active_quadratic();
        loss = quadratic_loss(q, theta_);
        Eigen::VectorXd grad = q.curvatures.cwiseProduct(theta_ - q.optimum);
        if (const auto* nq = std::get_if<NoisyQuadratic>(&landscape_); nq && nq->noise_std > 0.0) {
            for (Eigen::Index i = 0; i < grad.size(); ++i) grad(i) += nq->noise_std * normal_(rng_);
        }
        theta_ -= lr * grad;
    }
    ++step_;
    loss = finite_or_inf(loss);
    const bool div = diverged();
    return {div ? kInf : loss, div || !std::isfinite(loss)};
}

double SimModel::validation_loss() const {
    if (diverged()) return kInf;
    if (blobs_) return finite_or_inf(mean_bce(blobs_->val_x, blobs_->val_y, theta_));
    return finite_or_inf(quadratic_loss(active_quadratic(), theta_));
}

double SimModel::train_loss() const {
    if (diverged()) return kInf;
    if (blobs_) return finite_or_inf(mean_bce(blobs_->train_x, blobs_->train_y, theta_));
    return finite_or_inf(quadratic_loss(active_quadratic(), theta_));
}

Checkpoint SimModel::save() const { return {theta_, rng_, normal_, step_}; }

void SimModel::restore(const Checkpoint& checkpoint) {
    if (checkpoint.theta.size() != theta_.size()) {
        throw InvalidArgument("restore: checkpoint dimension mismatch");
    }
    theta_ = checkpoint.theta;
    rng_ = checkpoint.rng;
    normal_ = checkpoint.normal;
    step_ = checkpoint.step;
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
    if (!(lo > 0.0) || !(hi > lo) || n < 2) throw InvalidArgument("log_grid: need 0 < lo < hi, n >= 2");
    std::vector<double> grid(n);
    const double a = std::log10(lo);
    const double b = std::log10(hi);
    for (std::size_t j = 0; j < n; ++j) {
        grid[j] = std::pow(10.0, a + (b - a) * static_cast<double>(j) / static_cast<double>(n - 1));
    }
    grid.front() = lo;
    grid.back() = hi;
    return grid;
}

OracleResult oracle_best_lr(const SimModel& start, double lr_min, double lr_max, std::int64_t tau,
                            std::size_t grid_size) {
    if (grid_size < 2) throw InvalidArgument("oracle_best_lr: grid_size must be >= 2");
    if (tau < 1) throw InvalidArgument("oracle_best_lr: tau must be >= 1");
    OracleResult result{lr_min, kInf, {}};
    for (double lr : log_grid(lr_min, lr_max, grid_size)) {
        SimModel model = start;
        bool diverged = false;
        for (std::int64_t s = 0; s < tau && !diverged; ++s) diverged = model.sgd_step(lr).diverged;
        const double loss = diverged ? kInf : model.validation_loss();
        result.table.push_back({lr, loss});
        if (loss < result.best_loss) {
            result.best_loss = loss;
            result.best_lr = lr;
        }
    }
    return result;
}

namespace {

Quadratic spread_quadratic(int dim, double lo, double hi, double floor) {
    Quadratic q;
    q.curvatures.resize(dim);
    for (int i = 0; i < dim; ++i) {
        q.curvatures(i) = lo * std::pow(hi / lo, static_cast<double>(i) / (dim - 1));
    }
    q.optimum = Eigen::VectorXd::Zero(dim);
    q.floor = floor;
    return q;
}

}  // namespace

std::vector<std::string> preset_names() {
    return {"quadratic", "noisy-quadratic", "logistic", "piecewise"};
}

SimModel make_preset(const std::string& name, std::uint64_t seed) {
    constexpr int kDim = 16;
    // Curvatures stay below 1/1.5, so every rate up to 1.5 contracts each mode monotonically.
    const Quadratic quad = spread_quadratic(kDim, 1e-4, 0.6, 0.0);
    if (name == "quadratic") {
        return SimModel(quad, Eigen::VectorXd::Ones(kDim), seed);
    }
    if (name == "noisy-quadratic") {
        return SimModel(NoisyQuadratic{quad, 0.01}, Eigen::VectorXd::Ones(kDim), seed);
    }
    if (name == "logistic") {
        LogisticBlobs blobs;
        blobs.data_seed = seed ^ 0x9E3779B97F4A7C15ULL;
        return SimModel(blobs, Eigen::VectorXd::Zero(blobs.dim + 1), seed);
    }
    if (name == "piecewise") {
        PiecewiseRegime pw;
        pw.regimes.emplace_back(0, quad);
        Quadratic shifted = quad;
        shifted.optimum = Eigen::VectorXd::Constant(kDim, 0.5);
        pw.regimes.emplace_back(3000, shifted);
        return SimModel(pw, Eigen::VectorXd::Ones(kDim), seed);
    }
    throw InvalidArgument("unknown landscape preset: " + name);
}

}  // namespace autolrs::sim
