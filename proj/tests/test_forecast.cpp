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

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "autolrs/forecast.hpp"
#include "doctest.h"

namespace fc = autolrs::forecast;
using Series = fc::LossSeries<double>;

namespace {

template <typename F>
Series make_series(int first, int last, std::int64_t tau_prime, std::int64_t tau, F&& f) {
    Series s;
    s.observed_tau_prime = tau_prime;
    s.horizon_tau = tau;
    for (int t = first; t <= last; ++t) s.points.push_back({t, f(t)});
    return s;
}

double truth(double t) { return 2.0 * std::exp(-0.01 * t) + 0.5; }

double percentile95(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(v.size()))) - 1];
}

// loss falls quickly, rises for ~30 steps, then decays
double dip_rise_decay(double t) {
    const double base = 0.8 + 1.2 * std::exp(-0.02 * t);
    const double dip = -0.35 * std::exp(-std::pow((t - 6.0) / 4.0, 2.0));
    const double bump = 0.25 * std::exp(-std::pow((t - 24.0) / 9.0, 2.0));
    return base + dip + bump;
}

}  // namespace

TEST_CASE("spline reproduces a quadratic exactly") {
    const auto s = make_series(1, 100, 100, 1000, [](int t) { return 3.0 - 0.02 * t + 1e-4 * t * t; });
    const auto res = fc::spline_smooth(s);
    CHECK(!res.removed_steps.empty());
    for (const auto& p : res.smoothed.points) {
        CHECK(std::abs(p.loss - (3.0 - 0.02 * p.step + 1e-4 * p.step * p.step)) <= 1e-9);
    }
}

TEST_CASE("quadratic B-spline basis is a partition of unity") {
    const fc::QuadraticSpline<double> spline(1.0, 100.0, 9);
    CHECK(spline.basis_size() == 12);
    for (double t = 1.0; t <= 100.0; t += 0.73) {
        const auto b = spline.basis(t);
        CHECK(std::abs(b.sum() - 1.0) < 1e-12);
        CHECK(b.minCoeff() >= 0.0);
    }
    CHECK(std::abs(spline.basis(100.0).sum() - 1.0) < 1e-12);
}

TEST_CASE("spline smoothing removes early spikes") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> noise(0.0, 0.01);
    auto s = make_series(1, 100, 100, 1000, [&](int t) { return truth(t) + noise(rng); });
    const std::vector<std::int64_t> spikes{12, 27, 41};
    for (auto step : spikes) s.points[static_cast<std::size_t>(step - 1)].loss += 0.8;
    const auto res = fc::spline_smooth(s);
    for (auto step : spikes) {
        CHECK(std::find(res.removed_steps.begin(), res.removed_steps.end(), step) !=
              res.removed_steps.end());
    }
}

TEST_CASE("spline smoothing flattens the early bump") {
    const auto s = make_series(1, 100, 100, 1000, dip_rise_decay);
    fc::SmoothingParams one;
    one.iterations = 1;
    const auto after1 = fc::spline_smooth(s, one);
    const auto after10 = fc::spline_smooth(s);
    // total upward movement within the first half: zero for a monotone decay
    auto rise = [](const Series& series) {
        double total = 0.0;
        for (std::size_t i = 1; i < series.points.size() && series.points[i].step <= 50; ++i) {
            total += std::max(0.0, series.points[i].loss - series.points[i - 1].loss);
        }
        return total;
    };
    MESSAGE("rise raw=" << rise(s) << " after1=" << rise(after1.smoothed)
                        << " after10=" << rise(after10.smoothed));
    CHECK(rise(after10.smoothed) < rise(s));
    CHECK(rise(after10.smoothed) < rise(after1.smoothed));
}

TEST_CASE("spline smoothing is conservative") {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> noise(0.0, 0.05);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 40 + trial * 13;
        auto s = make_series(1, n, n, 10 * n, [&](int t) { return truth(t) + noise(rng); });
        fc::SmoothingParams params;
        params.iterations = 1 + trial % 10;
        const auto res = fc::spline_smooth(s, params);
        const auto cap = static_cast<std::size_t>(params.iterations) *
                         static_cast<std::size_t>(std::ceil(params.drop_fraction * n));
        CHECK(res.removed_steps.size() <= cap);
        for (auto step : res.removed_steps) CHECK(step <= n / 2);
        CHECK(res.smoothed.points.size() + res.removed_steps.size() == static_cast<std::size_t>(n));
    }
}

TEST_CASE("spline smoothing input validation") {
    const auto short_series = make_series(1, 7, 7, 70, truth);
    CHECK_THROWS_AS(fc::spline_smooth(short_series), autolrs::InvalidArgument);
    auto s = make_series(1, 20, 20, 200, truth);
    fc::SmoothingParams bad;
    bad.drop_fraction = 0.5;
    CHECK_THROWS_AS(fc::spline_smooth(s, bad), autolrs::InvalidArgument);
    bad = {};
    bad.iterations = 0;
    CHECK_THROWS_AS(fc::spline_smooth(s, bad), autolrs::InvalidArgument);
    s.points[3].step = s.points[2].step;
    CHECK_THROWS_AS(fc::spline_smooth(s), autolrs::InvalidArgument);
}

TEST_CASE("fit of a constant series is degenerate") {
    const auto s = make_series(1, 100, 100, 1000, [](int) { return 0.7; });
    const auto fit = fc::fit_exponential(s);
    CHECK(fit.degenerate);
    CHECK(std::abs(fit.a) < 1e-12);
    CHECK(std::abs(fit.c - 0.7) < 1e-12);
    CHECK(fc::forecast_loss(fit, 5000.0) == fit.c);
}

TEST_CASE("noiseless exponential is recovered") {
    const auto s = make_series(1, 100, 100, 1000, truth);
    const auto fit = fc::fit_exponential(s);
    REQUIRE_FALSE(fit.degenerate);
    CHECK(std::abs(fit.a - 2.0) / 2.0 < 1e-3);
    CHECK(std::abs(fit.b + 0.01) / 0.01 < 1e-3);
    CHECK(std::abs(fit.c - 0.5) / 0.5 < 1e-3);
    CHECK(std::abs(fc::forecast_loss(fit, 1000.0) - truth(1000.0)) / truth(1000.0) < 1e-2);
}

TEST_CASE("noisy exponential: 95th percentile errors over 100 seeds") {
    std::vector<double> c_err;
    std::vector<double> b_err;
    for (int seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
        std::normal_distribution<double> noise(0.0, 0.01);
        const auto s = make_series(1, 100, 100, 1000, [&](int t) { return truth(t) + noise(rng); });
        const auto fit = fc::fit_exponential(s);
        c_err.push_back(std::abs(fit.c - 0.5));
        b_err.push_back(std::abs(fit.b + 0.01) / 0.01);
    }
    CHECK(percentile95(c_err) <= 0.05);
    CHECK(percentile95(b_err) <= 0.30);
}

TEST_CASE("inner solution satisfies the normal equations") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> noise(0.0, 0.02);
    const auto s = make_series(1, 100, 100, 1000, [&](int t) { return truth(t) + noise(rng); });
    for (double b : {-0.5, -0.05, -0.01, -0.002}) {
        const auto prof = fc::profile_rate(s, b);
        double dot_e = 0.0;
        double dot_1 = 0.0;
        for (const auto& p : s.points) {
            const double e = std::exp(b * p.step);
            const double r = prof.a * e + prof.c - p.loss;
            dot_e += r * e;
            dot_1 += r;
        }
        CHECK(std::abs(dot_e) <= 1e-9);
        CHECK(std::abs(dot_1) <= 1e-9);
    }
}

TEST_CASE("profiled gradient matches central differences") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> noise(0.0, 0.02);
    const auto s = make_series(1, 100, 100, 1000, [&](int t) { return truth(t) + noise(rng); });
    for (double log_rate : {-7.0, -5.5, -4.0, -3.0, -1.0}) {
        const double h = 1e-5;
        auto g = [&](double lr) { return fc::profile_rate(s, -std::exp(lr)).sse; };
        const double numeric = (g(log_rate + h) - g(log_rate - h)) / (2 * h);
        const double b = -std::exp(log_rate);
        const double analytic = fc::profile_rate(s, b).dsse_db * b;
        if (std::abs(numeric) > 1e-6) {
            CHECK((numeric > 0) == (analytic > 0));
            CHECK(std::abs(numeric - analytic) <= 1e-4 * std::abs(numeric) + 1e-8);
        }
    }
}

TEST_CASE("best fit beats every multi-start candidate") {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> noise(0.0, 0.03);
    for (int trial = 0; trial < 10; ++trial) {
        const double rate = 0.002 * (trial + 1);
        const auto s = make_series(1, 120, 120, 1200,
                                   [&](int t) { return 1.5 * std::exp(-rate * t) + 0.3 + noise(rng); });
        const auto best = fc::fit_exponential(s);
        for (double b0 : fc::kInitialRates) {
            CHECK(best.sse <= fc::descend_from(s, b0).sse);
        }
        if (!best.degenerate) {
            CHECK(best.b < 0.0);
            if (best.a > 0.0) {
                double prev = fc::forecast_loss(best, 0.0);
                for (double t = 10.0; t < 5000.0; t += 10.0) {
                    const double f = fc::forecast_loss(best, t);
                    CHECK(f <= prev);
                    prev = f;
                }
            }
        }
    }
}

TEST_CASE("fit input validation") {
    auto s = make_series(1, 3, 3, 30, truth);
    CHECK_THROWS_AS(fc::fit_exponential(s), autolrs::InvalidArgument);
    s = make_series(1, 10, 10, 100, truth);
    s.points[4].loss = std::nan("");
    CHECK_THROWS_AS(fc::fit_exponential(s), autolrs::InvalidArgument);
}

TEST_CASE("forecast_loss") {
    fc::ExponentialFit<double> fit;
    fit.a = 2.0;
    fit.b = -0.01;
    fit.c = 0.5;
    CHECK(fc::forecast_loss(fit, 0.0) == 2.5);
    CHECK(std::abs(fc::forecast_loss(fit, 1000.0) - 0.5000908) < 1e-7);
    fit.degenerate = true;
    fit.c = 0.7;
    CHECK(fc::forecast_loss(fit, 12345.0) == 0.7);
    CHECK_THROWS_AS(fc::forecast_loss(fit, -1.0), autolrs::InvalidArgument);
}

TEST_CASE("evaluate_candidate") {
    SUBCASE("clean exponential forecast at ten times the window") {
        const auto s = make_series(1, 100, 100, 1000, truth);
        CHECK(std::abs(fc::evaluate_candidate(s) - truth(1000.0)) / truth(1000.0) < 0.01);
    }
    SUBCASE("constant series") {
        const auto s = make_series(1, 100, 100, 1000, [](int) { return 0.7; });
        CHECK(std::abs(fc::evaluate_candidate(s) - 0.7) < 1e-12);
    }
    SUBCASE("beats last-value extrapolation") {
        for (double rate : {0.005, 0.008, 0.01, 0.02, 0.05}) {
            auto f = [&](double t) { return 1.8 * std::exp(-rate * t) + 0.4; };
            const auto s = make_series(1, 100, 100, 1000, f);
            const double model = std::abs(fc::evaluate_candidate(s) - f(1000.0));
            const double naive = std::abs(s.points.back().loss - f(1000.0));
            CHECK(model < naive);
        }
    }
    SUBCASE("increasing series forecasts the last smoothed value") {
        const auto s = make_series(1, 50, 50, 500, [](int t) { return 1.0 + 0.01 * t; });
        const auto out = fc::forecast_candidate(s);
        CHECK(out.fallback == "increasing series");
        CHECK(std::abs(out.value - 1.5) < 1e-9);
    }
    SUBCASE("short series skip smoothing") {
        const auto s = make_series(1, 5, 5, 50, truth);
        const auto out = fc::forecast_candidate(s);
        CHECK_FALSE(out.smoothing.has_value());
        CHECK(std::isfinite(out.value));
    }
    SUBCASE("non-finite loss is rejected") {
        auto s = make_series(1, 20, 20, 200, truth);
        s.points[2].loss = INFINITY;
        CHECK_THROWS_AS(fc::evaluate_candidate(s), autolrs::InvalidArgument);
    }
}
