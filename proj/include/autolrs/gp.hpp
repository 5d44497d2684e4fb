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

// Gaussian-process surrogate over log10 learning rate.
//
// Zero-mean prior, Matern nu=5/2 covariance with unit signal variance, and
// Gaussian observation noise. Everything is templated on the scalar type so
// the kernel and posterior can be instantiated for float, double or long
// double; the controller uses double.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>
#include <utility>
#include <vector>

#include "autolrs/errors.hpp"

namespace autolrs::gp {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr std::size_t kDefaultGridSize = 1024;
inline constexpr double kDefaultNoiseVariance = 1e-4;
inline constexpr double kInitialJitter = 1e-10;
inline constexpr double kMaxJitter = 1e-4;

template <typename Scalar = double>
struct KernelParams {
    Scalar nu = Scalar(2.5);
    Scalar length_scale = Scalar(1);
};

/// One explored point: x is log10(lr), y the forecast loss at the stage horizon.
template <typename Scalar = double>
struct Observation {
    Scalar x;
    Scalar y;
};

template <typename Scalar = double>
struct Prediction {
    Scalar mean;
    Scalar stddev;
};

template <typename Scalar>
void validate(const KernelParams<Scalar>& params) {
    if (params.nu != Scalar(2.5)) {
        throw InvalidArgument("matern kernel: only nu = 2.5 is supported");
    }
    if (!(params.length_scale > Scalar(0)) || !std::isfinite(params.length_scale)) {
        throw InvalidArgument("matern kernel: length_scale must be positive and finite");
    }
}

/// Matern-5/2 covariance in closed form:
///   k(r) = (1 + sqrt(5) r / l + 5 r^2 / (3 l^2)) exp(-sqrt(5) r / l),  r = |xi - xj|.
template <typename Scalar>
Scalar matern_kernel(Scalar xi, Scalar xj, const KernelParams<Scalar>& params = {}) {
    if (!std::isfinite(xi) || !std::isfinite(xj)) {
        throw InvalidArgument("matern kernel: non-finite input");
    }
    using std::abs;
    using std::exp;
    using std::sqrt;
    const Scalar z = sqrt(Scalar(5)) * abs(xi - xj) / params.length_scale;
    return (Scalar(1) + z + z * z / Scalar(3)) * exp(-z);
}

/// Gram matrix of the kernel over the given abscissae.
template <typename Scalar>
MatrixX<Scalar> kernel_matrix(std::span<const Observation<Scalar>> observations,
                              const KernelParams<Scalar>& params) {
    const auto n = static_cast<Eigen::Index>(observations.size());
    MatrixX<Scalar> gram(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        gram(i, i) = Scalar(1);
        for (Eigen::Index j = 0; j < i; ++j) {
            gram(i, j) = matern_kernel(observations[i].x, observations[j].x, params);
            gram(j, i) = gram(i, j);
        }
    }
    return gram;
}

/// Posterior of f given noisy observations. Immutable once built.
template <typename Scalar = double>
class Posterior {
public:
    Posterior() = default;

    const std::vector<Observation<Scalar>>& observations() const { return observations_; }
    Scalar noise_variance() const { return noise_variance_; }
    Scalar jitter() const { return jitter_; }
    const KernelParams<Scalar>& kernel() const { return params_; }
    /// Lower-triangular Cholesky factor of K + (noise + jitter) I.
    const MatrixX<Scalar>& factor() const { return factor_; }
    /// (K + (noise + jitter) I)^{-1} y.
    const VectorX<Scalar>& alpha() const { return alpha_; }
    std::size_t size() const { return observations_.size(); }

    Prediction<Scalar> predict(Scalar x) const {
        if (!std::isfinite(x)) {
            throw InvalidArgument("predict: non-finite query");
        }
        const Scalar prior_var = matern_kernel(x, x, params_);
        if (observations_.empty()) {
            return {Scalar(0), std::sqrt(prior_var)};
        }
        const auto n = static_cast<Eigen::Index>(observations_.size());
        VectorX<Scalar> cross(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            cross(i) = matern_kernel(x, observations_[i].x, params_);
        }
        const Scalar mean = cross.dot(alpha_);
        const VectorX<Scalar> v =
            factor_.template triangularView<Eigen::Lower>().solve(cross);
        Scalar var = prior_var - v.squaredNorm();
        if (var < Scalar(0)) var = Scalar(0);
        return {mean, std::sqrt(var)};
    }

    Scalar mean(Scalar x) const { return predict(x).mean; }
    Scalar stddev(Scalar x) const { return predict(x).stddev; }

private:
    template <typename S>
    friend Posterior<S> fit_posterior(std::span<const Observation<S>>, S,
                                      const KernelParams<S>&);

    std::vector<Observation<Scalar>> observations_;
    Scalar noise_variance_ = Scalar(0);
    Scalar jitter_ = Scalar(0);
    KernelParams<Scalar> params_;
    MatrixX<Scalar> factor_;
    VectorX<Scalar> alpha_;
};

namespace detail {

template <typename Scalar>
double condition_estimate(const MatrixX<Scalar>& sym) {
    Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(sym, Eigen::EigenvaluesOnly);
    const auto& ev = eig.eigenvalues();
    if (ev.size() == 0) return 1.0;
    const double lo = static_cast<double>(ev.minCoeff());
    const double hi = static_cast<double>(ev.maxCoeff());
    return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
}

}  // namespace detail

/// Condition the zero-mean prior on the observations.
///
/// The diagonal receives noise_variance plus a jitter that starts at 1e-10 and
/// grows tenfold up to 1e-4 until the Cholesky factorization succeeds.
template <typename Scalar>
Posterior<Scalar> fit_posterior(std::span<const Observation<Scalar>> observations,
                                Scalar noise_variance,
                                const KernelParams<Scalar>& params = {}) {
    validate(params);
    if (!(noise_variance >= Scalar(0)) || !std::isfinite(noise_variance)) {
        throw InvalidArgument("fit_posterior: noise_variance must be finite and >= 0");
    }
    for (const auto& o : observations) {
        if (!std::isfinite(o.x) || !std::isfinite(o.y)) {
            throw InvalidArgument("fit_posterior: non-finite observation");
        }
    }

    Posterior<Scalar> post;
    post.observations_.assign(observations.begin(), observations.end());
    post.noise_variance_ = noise_variance;
    post.params_ = params;
    if (observations.empty()) {
        return post;
    }

    const auto n = static_cast<Eigen::Index>(observations.size());
    const MatrixX<Scalar> gram = kernel_matrix(observations, params);
    VectorX<Scalar> y(n);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = observations[i].y;

    for (Scalar jitter = Scalar(kInitialJitter); jitter <= Scalar(kMaxJitter) * Scalar(1.0001);
         jitter *= Scalar(10)) {
        MatrixX<Scalar> cov = gram;
        cov.diagonal().array() += noise_variance + jitter;
        Eigen::LLT<MatrixX<Scalar>> llt(cov);
        if (llt.info() != Eigen::Success) continue;
        MatrixX<Scalar> factor = llt.matrixL();
        if ((factor.diagonal().array() <= Scalar(0)).any()) continue;
        post.jitter_ = jitter;
        post.alpha_ = llt.solve(y);
        post.factor_ = std::move(factor);
        return post;
    }

    MatrixX<Scalar> cov = gram;
    cov.diagonal().array() += noise_variance;
    const double cond = detail::condition_estimate(cov);
    std::ostringstream msg;
    msg << "fit_posterior: Cholesky failed after jitter escalation to " << kMaxJitter
        << " (condition estimate " << cond << ")";
    throw NumericalFailure(msg.str(), cond);
}

template <typename Scalar>
Posterior<Scalar> fit_posterior(const std::vector<Observation<Scalar>>& observations,
                                Scalar noise_variance,
                                const KernelParams<Scalar>& params = {}) {
    return fit_posterior(std::span<const Observation<Scalar>>(observations), noise_variance,
                         params);
}

/// Lower confidence bound mu(x) - kappa sigma(x).
template <typename Scalar>
Scalar lcb(const Posterior<Scalar>& posterior, Scalar kappa, Scalar x) {
    const auto p = posterior.predict(x);
    return p.mean - kappa * p.stddev;
}

/// Minimizer of the LCB over [lo, hi] on a uniform grid (endpoints included).
/// Ties resolve to the smaller abscissa.
template <typename Scalar>
Scalar lcb_argmin(const Posterior<Scalar>& posterior, Scalar kappa, Scalar lo, Scalar hi,
                  std::size_t grid_size = kDefaultGridSize) {
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
        throw InvalidArgument("lcb_argmin: require finite lo < hi");
    }
    if (!(kappa >= Scalar(0)) || !std::isfinite(kappa)) {
        throw InvalidArgument("lcb_argmin: kappa must be finite and >= 0");
    }
    if (grid_size < 2) {
        throw InvalidArgument("lcb_argmin: grid_size must be >= 2");
    }
    const Scalar step = (hi - lo) / static_cast<Scalar>(grid_size - 1);
    Scalar best_x = lo;
    Scalar best_u = std::numeric_limits<Scalar>::infinity();
    for (std::size_t j = 0; j < grid_size; ++j) {
        const Scalar x = j + 1 == grid_size ? hi : lo + static_cast<Scalar>(j) * step;
        const Scalar u = lcb(posterior, kappa, x);
        if (u < best_u) {
            best_u = u;
            best_x = x;
        }
    }
    return best_x;
}

}  // namespace autolrs::gp
