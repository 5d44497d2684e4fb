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

// Short-horizon loss forecasting.
//
// A loss series observed for tau' steps is cleaned by iterative least-squares
// quadratic spline smoothing (early outliers are dropped round by round), then
// fitted with L(t) = a exp(b t) + c, b < 0, and extrapolated to the stage
// horizon tau. The fit is separable: for fixed b the optimal (a, c) is a 2x2
// linear least-squares problem, and the remaining 1-D problem in
// b' = ln(-b) is solved by multi-start gradient descent.

#include <Eigen/Dense>
#include <Eigen/QR>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "autolrs/errors.hpp"

namespace autolrs::forecast {

template <typename Scalar = double>
struct LossPoint {
    std::int64_t step;
    Scalar loss;
};

/// Loss observations of one candidate; steps are relative to the stage start.
template <typename Scalar = double>
struct LossSeries {
    std::vector<LossPoint<Scalar>> points;
    std::int64_t horizon_tau = 0;
    std::int64_t observed_tau_prime = 0;
};

struct SmoothingParams {
    int iterations = 10;
    double drop_fraction = 0.03;
    /// Only points with step <= protected_after may be removed. Defaults to tau'/2.
    std::optional<std::int64_t> protected_after;
    /// Interior knot count is max(min_interior_knots, n / points_per_knot).
    int min_interior_knots = 4;
    int points_per_knot = 10;
};

template <typename Scalar = double>
struct ExponentialFit {
    Scalar a = 0;
    Scalar b = 0;
    Scalar c = 0;
    Scalar sse = 0;
    bool degenerate = false;
    std::string reason;
};

inline constexpr std::size_t kMinSmoothingPoints = 8;
inline constexpr std::size_t kMinFitPoints = 4;
inline constexpr std::array<double, 8> kInitialRates = {-1.0,  -0.3,  -0.1,   -0.03,
                                                       -0.01, -0.003, -0.001, -0.0003};
inline constexpr int kMaxDescentIterations = 500;
inline constexpr double kRelativeStopTolerance = 1e-10;

template <typename Scalar>
void validate(const LossSeries<Scalar>& series) {
    if (series.observed_tau_prime <= 0 || series.observed_tau_prime > series.horizon_tau) {
        throw InvalidArgument("loss series: require 0 < tau' <= tau");
    }
    for (std::size_t i = 0; i < series.points.size(); ++i) {
        const auto& p = series.points[i];
        if (!std::isfinite(p.loss)) {
            throw InvalidArgument("loss series: non-finite loss at step " + std::to_string(p.step));
        }
        if (p.step < 0) {
            throw InvalidArgument("loss series: negative step");
        }
        if (i > 0 && p.step <= series.points[i - 1].step) {
            throw InvalidArgument("loss series: steps must be strictly increasing");
        }
    }
}

inline void validate(const SmoothingParams& params) {
    if (params.iterations < 1) throw InvalidArgument("smoothing: iterations must be >= 1");
    if (!(params.drop_fraction >= 0.0 && params.drop_fraction < 0.5)) {
        throw InvalidArgument("smoothing: drop_fraction must lie in [0, 0.5)");
    }
    if (params.min_interior_knots < 1 || params.points_per_knot < 1) {
        throw InvalidArgument("smoothing: knot controls must be positive");
    }
}

// ---------------------------------------------------------------------------
// Quadratic B-spline

/// Clamped quadratic B-spline with uniform interior knots on [lo, hi].
template <typename Scalar = double>
class QuadraticSpline {
public:
    static constexpr int kDegree = 2;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    QuadraticSpline() = default;

    QuadraticSpline(Scalar lo, Scalar hi, int interior_knots) {
        if (!(lo < hi)) throw InvalidArgument("spline: empty domain");
        if (interior_knots < 0) throw InvalidArgument("spline: negative knot count");
        const int segments = interior_knots + 1;
        knots_.reserve(static_cast<std::size_t>(segments + 1 + 2 * kDegree));
        for (int i = 0; i < kDegree; ++i) knots_.push_back(lo);
        for (int i = 0; i <= segments; ++i) {
            knots_.push_back(i == segments ? hi : lo + (hi - lo) * Scalar(i) / Scalar(segments));
        }
        for (int i = 0; i < kDegree; ++i) knots_.push_back(hi);
        coefficients_ = Vector::Zero(basis_size());
    }

    Eigen::Index basis_size() const {
        return static_cast<Eigen::Index>(knots_.size()) - kDegree - 1;
    }
    const std::vector<Scalar>& knots() const { return knots_; }
    const Vector& coefficients() const { return coefficients_; }
    Scalar lo() const { return knots_.front(); }
    Scalar hi() const { return knots_.back(); }

    /// Values of all basis functions at t (Cox-de Boor).
    Vector basis(Scalar t) const {
        const Eigen::Index m = basis_size();
        t = std::clamp(t, lo(), hi());
        // Knot span index s with knots[s] <= t < knots[s+1]; last span is closed.
        auto s = static_cast<Eigen::Index>(kDegree);
        while (s < m - 1 && t >= knots_[static_cast<std::size_t>(s + 1)]) ++s;

        std::array<Scalar, kDegree + 1> n{};
        n[0] = Scalar(1);
        std::array<Scalar, kDegree + 1> left{};
        std::array<Scalar, kDegree + 1> right{};
        for (int j = 1; j <= kDegree; ++j) {
            left[j] = t - knots_[static_cast<std::size_t>(s + 1 - j)];
            right[j] = knots_[static_cast<std::size_t>(s + j)] - t;
            Scalar saved = 0;
            for (int r = 0; r < j; ++r) {
                const Scalar denom = right[r + 1] + left[j - r];
                const Scalar temp = denom == Scalar(0) ? Scalar(0) : n[r] / denom;
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        Vector out = Vector::Zero(m);
        for (int j = 0; j <= kDegree; ++j) out(s - kDegree + j) = n[j];
        return out;
    }

    Scalar operator()(Scalar t) const { return basis(t).dot(coefficients_); }

    /// Least-squares coefficients for the given samples; rank-deficient
    /// systems (empty knot spans) get the minimum-norm solution.
    void fit(const std::vector<Scalar>& t, const std::vector<Scalar>& y) {
        const auto n = static_cast<Eigen::Index>(t.size());
        Matrix design(n, basis_size());
        Vector rhs(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            design.row(i) = basis(t[static_cast<std::size_t>(i)]).transpose();
            rhs(i) = y[static_cast<std::size_t>(i)];
        }
        coefficients_ = Eigen::CompleteOrthogonalDecomposition<Matrix>(design).solve(rhs);
    }

private:
    std::vector<Scalar> knots_;
    Vector coefficients_;
};

template <typename Scalar = double>
struct SmoothingResult {
    LossSeries<Scalar> smoothed;
    QuadraticSpline<Scalar> spline;
    std::vector<std::int64_t> removed_steps;
};

/// Iterative spline smoothing. Each round fits the spline to the surviving
/// points and drops the ceil(drop_fraction * survivors) largest-residual points
/// among those at step <= protected_after. Later points are never dropped. The
/// result is the spline refitted on the final survivors, evaluated there.
template <typename Scalar>
SmoothingResult<Scalar> spline_smooth(const LossSeries<Scalar>& series,
                                      const SmoothingParams& params = {}) {
    validate(series);
    validate(params);
    if (series.points.size() < kMinSmoothingPoints) {
        throw InvalidArgument("spline_smooth: need at least 8 points");
    }
    const std::int64_t bound = params.protected_after.value_or(series.observed_tau_prime / 2);

    const std::size_t n = series.points.size();
    const int interior =
        std::max(params.min_interior_knots, static_cast<int>(n) / params.points_per_knot);
    QuadraticSpline<Scalar> spline(static_cast<Scalar>(series.points.front().step),
                                   static_cast<Scalar>(series.points.back().step), interior);

    std::vector<std::size_t> alive(n);
    std::iota(alive.begin(), alive.end(), std::size_t{0});
    std::vector<std::int64_t> removed;

    auto refit = [&] {
        std::vector<Scalar> t;
        std::vector<Scalar> y;
        t.reserve(alive.size());
        y.reserve(alive.size());
        for (auto i : alive) {
            t.push_back(static_cast<Scalar>(series.points[i].step));
            y.push_back(series.points[i].loss);
        }
        spline.fit(t, y);
    };

    for (int round = 0; round < params.iterations; ++round) {
        refit();
        const auto drop = static_cast<std::size_t>(
            std::ceil(params.drop_fraction * static_cast<double>(alive.size())));
        if (drop == 0) continue;

        std::vector<std::pair<Scalar, std::size_t>> eligible;
        for (std::size_t k = 0; k < alive.size(); ++k) {
            const auto& p = series.points[alive[k]];
            if (p.step > bound) continue;
            using std::abs;
            eligible.emplace_back(abs(p.loss - spline(static_cast<Scalar>(p.step))), k);
        }
        const std::size_t take = std::min(drop, eligible.size());
        if (take == 0) continue;
        std::partial_sort(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(take),
                          eligible.end(), [](const auto& l, const auto& r) {
                              return l.first > r.first || (l.first == r.first && l.second < r.second);
                          });
        std::vector<bool> kill(alive.size(), false);
        for (std::size_t j = 0; j < take; ++j) kill[eligible[j].second] = true;
        std::vector<std::size_t> next;
        next.reserve(alive.size() - take);
        for (std::size_t k = 0; k < alive.size(); ++k) {
            if (kill[k]) {
                removed.push_back(series.points[alive[k]].step);
            } else {
                next.push_back(alive[k]);
            }
        }
        alive = std::move(next);
    }
    refit();

    SmoothingResult<Scalar> out;
    out.smoothed.horizon_tau = series.horizon_tau;
    out.smoothed.observed_tau_prime = series.observed_tau_prime;
    out.smoothed.points.reserve(alive.size());
    for (auto i : alive) {
        const auto step = series.points[i].step;
        out.smoothed.points.push_back({step, spline(static_cast<Scalar>(step))});
    }
    std::sort(removed.begin(), removed.end());
    out.spline = std::move(spline);
    out.removed_steps = std::move(removed);
    return out;
}

// ---------------------------------------------------------------------------
// Exponential model

/// Inner solution for a fixed rate b, with the derivative of the profiled
/// objective g(b) = min_{a,c} sse.
template <typename Scalar = double>
struct ProfiledObjective {
    Scalar a;
    Scalar c;
    Scalar sse;
    Scalar dsse_db;
};

/// Closed-form (a, c) for fixed b. By the envelope theorem dg/db equals the
/// partial derivative of the sse at the optimal (a, c).
template <typename Scalar>
ProfiledObjective<Scalar> profile_rate(const LossSeries<Scalar>& series, Scalar b) {
    const auto& pts = series.points;
    const auto n = static_cast<Scalar>(pts.size());
    Scalar mean_e = 0;
    Scalar mean_y = 0;
    std::vector<Scalar> e(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        e[i] = std::exp(b * static_cast<Scalar>(pts[i].step));
        mean_e += e[i];
        mean_y += pts[i].loss;
    }
    mean_e /= n;
    mean_y /= n;
    Scalar see = 0;
    Scalar sey = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        see += (e[i] - mean_e) * (e[i] - mean_e);
        sey += (e[i] - mean_e) * (pts[i].loss - mean_y);
    }
    Scalar a = 0;
    if (see > Scalar(0)) a = sey / see;
    const Scalar c = mean_y - a * mean_e;
    Scalar sse = 0;
    Scalar grad = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Scalar r = a * e[i] + c - pts[i].loss;
        sse += r * r;
        grad += Scalar(2) * r * a * static_cast<Scalar>(pts[i].step) * e[i];
    }
    return {a, c, sse, grad};
}

namespace detail {

template <typename Scalar>
ExponentialFit<Scalar> classify(const LossSeries<Scalar>& series, ExponentialFit<Scalar> fit) {
    Scalar lo = std::numeric_limits<Scalar>::infinity();
    Scalar hi = -lo;
    for (const auto& p : series.points) {
        lo = std::min(lo, p.loss);
        hi = std::max(hi, p.loss);
    }
    using std::abs;
    if (abs(fit.a) < Scalar(1e-8) * (hi - lo + Scalar(1e-12))) {
        fit.degenerate = true;
        fit.reason = "amplitude below threshold";
    } else if (!(fit.b < Scalar(-1e-12))) {
        fit.degenerate = true;
        fit.reason = "rate not negative";
    } else if (!std::isfinite(fit.a) || !std::isfinite(fit.c)) {
        fit.degenerate = true;
        fit.reason = "non-finite parameters";
    }
    return fit;
}

template <typename Scalar>
std::optional<ExponentialFit<Scalar>> flat_series(const LossSeries<Scalar>& series) {
    Scalar lo = std::numeric_limits<Scalar>::infinity();
    Scalar hi = -lo;
    Scalar sum = 0;
    for (const auto& p : series.points) {
        lo = std::min(lo, p.loss);
        hi = std::max(hi, p.loss);
        sum += p.loss;
    }
    const Scalar mean = sum / static_cast<Scalar>(series.points.size());
    using std::abs;
    if (hi - lo > Scalar(1e-12) * std::max(Scalar(1), abs(mean))) return std::nullopt;
    ExponentialFit<Scalar> fit;
    fit.a = 0;
    fit.b = 0;
    fit.c = mean;
    for (const auto& p : series.points) fit.sse += (p.loss - mean) * (p.loss - mean);
    fit.degenerate = true;
    fit.reason = "flat series";
    return fit;
}

template <typename Scalar>
void validate_for_fit(const LossSeries<Scalar>& series) {
    for (const auto& p : series.points) {
        if (!std::isfinite(p.loss)) throw InvalidArgument("fit_exponential: non-finite loss");
    }
    if (series.points.size() < kMinFitPoints) {
        throw InvalidArgument("fit_exponential: need at least 4 points");
    }
    for (std::size_t i = 1; i < series.points.size(); ++i) {
        if (series.points[i].step <= series.points[i - 1].step) {
            throw InvalidArgument("fit_exponential: steps must be strictly increasing");
        }
    }
}

}  // namespace detail

/// Gradient descent on b' = ln(-b) from one starting rate, with backtracking
/// (Armijo) line search and Barzilai-Borwein trial steps. Returns the raw,
/// unclassified fit.
template <typename Scalar>
ExponentialFit<Scalar> descend_from(const LossSeries<Scalar>& series, Scalar initial_b) {
    if (!(initial_b < Scalar(0))) throw InvalidArgument("descend_from: initial b must be < 0");
    constexpr Scalar kMinLogRate = Scalar(-40);
    constexpr Scalar kMaxLogRate = Scalar(6);

    auto eval = [&](Scalar log_rate) {
        const Scalar b = -std::exp(log_rate);
        auto prof = profile_rate(series, b);
        // chain rule: db/db' = b
        return std::pair{prof, prof.dsse_db * b};
    };

    Scalar x = std::log(-initial_b);
    auto [prof, grad] = eval(x);
    Scalar prev_x = x;
    Scalar prev_grad = grad;
    bool have_prev = false;

    for (int it = 0; it < kMaxDescentIterations; ++it) {
        if (prof.sse == Scalar(0) || grad == Scalar(0) || !std::isfinite(grad)) break;
        Scalar step;
        const Scalar dx = x - prev_x;
        const Scalar dg = grad - prev_grad;
        if (have_prev && dx * dg > Scalar(0)) {
            step = dx * dx / (dx * dg);
        } else {
            using std::abs;
            step = std::min(Scalar(1), Scalar(0.5) / abs(grad));
        }
        bool accepted = false;
        Scalar next_x = x;
        ProfiledObjective<Scalar> next_prof = prof;
        Scalar next_grad = grad;
        for (int halving = 0; halving < 60; ++halving) {
            next_x = std::clamp(x - step * grad, kMinLogRate, kMaxLogRate);
            auto [p, g] = eval(next_x);
            if (std::isfinite(p.sse) &&
                p.sse <= prof.sse - Scalar(1e-4) * step * grad * grad) {
                next_prof = p;
                next_grad = g;
                accepted = true;
                break;
            }
            step *= Scalar(0.5);
        }
        if (!accepted || next_x == x) break;
        const Scalar change = prof.sse - next_prof.sse;
        prev_x = x;
        prev_grad = grad;
        have_prev = true;
        x = next_x;
        prof = next_prof;
        grad = next_grad;
        if (prof.sse > Scalar(0) && change / prof.sse < Scalar(kRelativeStopTolerance)) break;
    }

    ExponentialFit<Scalar> fit;
    fit.a = prof.a;
    fit.b = -std::exp(x);
    fit.c = prof.c;
    fit.sse = prof.sse;
    return fit;
}

/// Least-squares fit of a exp(b t) + c with b < 0 over the series' steps.
template <typename Scalar>
ExponentialFit<Scalar> fit_exponential(const LossSeries<Scalar>& series) {
    detail::validate_for_fit(series);
    if (auto flat = detail::flat_series(series)) return *flat;

    std::optional<ExponentialFit<Scalar>> best;
    for (double b0 : kInitialRates) {
        auto fit = descend_from(series, static_cast<Scalar>(b0));
        if (!std::isfinite(fit.sse)) continue;
        if (!best || fit.sse < best->sse) best = fit;
    }
    if (!best) {
        ExponentialFit<Scalar> fail;
        fail.degenerate = true;
        fail.reason = "no finite fit";
        fail.c = std::numeric_limits<Scalar>::quiet_NaN();
        fail.sse = std::numeric_limits<Scalar>::infinity();
        return fail;
    }
    return detail::classify(series, *best);
}

/// a exp(b t) + c, or the asymptote c for degenerate fits.
template <typename Scalar>
Scalar forecast_loss(const ExponentialFit<Scalar>& fit, Scalar t) {
    if (!(t >= Scalar(0))) throw InvalidArgument("forecast_loss: t must be >= 0");
    if (fit.degenerate) return fit.c;
    return fit.a * std::exp(fit.b * t) + fit.c;
}

template <typename Scalar = double>
struct CandidateForecast {
    Scalar value = 0;
    std::optional<SmoothingResult<Scalar>> smoothing;
    std::optional<ExponentialFit<Scalar>> fit;
    /// Set when the value is the last smoothed loss instead of a model forecast.
    std::string fallback;
};

/// Smooth, fit and extrapolate to the series horizon, falling back to the last
/// (smoothed) loss whenever the exponential model cannot be trusted.
template <typename Scalar>
CandidateForecast<Scalar> forecast_candidate(const LossSeries<Scalar>& series,
                                             const SmoothingParams& smoothing = {}) {
    validate(series);
    if (series.points.empty()) throw InvalidArgument("evaluate_candidate: empty series");

    CandidateForecast<Scalar> out;
    LossSeries<Scalar> cleaned = series;
    if (series.points.size() >= kMinSmoothingPoints) {
        out.smoothing = spline_smooth(series, smoothing);
        cleaned = out.smoothing->smoothed;
    }
    const Scalar last = cleaned.points.back().loss;
    if (cleaned.points.back().loss > cleaned.points.front().loss) {
        out.value = last;
        out.fallback = "increasing series";
        return out;
    }
    if (cleaned.points.size() < kMinFitPoints) {
        out.value = last;
        out.fallback = "too few points";
        return out;
    }
    out.fit = fit_exponential(cleaned);
    if (out.fit->degenerate && out.fit->reason == "rate not negative") {
        // a and c trade off without bound; c is not an asymptote
        out.value = last;
        out.fallback = "rate not identifiable";
        return out;
    }
    Scalar value = forecast_loss(*out.fit, static_cast<Scalar>(series.horizon_tau));
    if (!std::isfinite(value)) {
        out.value = last;
        out.fallback = "non-finite forecast";
        return out;
    }
    out.value = value;
    return out;
}

template <typename Scalar>
Scalar evaluate_candidate(const LossSeries<Scalar>& series, const SmoothingParams& smoothing = {}) {
    return forecast_candidate(series, smoothing).value;
}

}  // namespace autolrs::forecast
