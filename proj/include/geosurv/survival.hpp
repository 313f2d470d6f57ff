// Discrete-time survival: product-limit estimation, per-instance curve
// targets for censored records, curve averaging and area between curves.
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "geosurv/core.hpp"

namespace geosurv {

/// `event` is 1 for an observed event at `time`, 0 for censoring at `time`.
/// Times run over {0, ..., T}; time 0 is study entrance.
struct EventRecord {
    int event = 0;
    int time = 0;

    bool operator==(const EventRecord&) const = default;
};

inline void validate(const EventRecord& r, int horizon) {
    if (r.event != 0 && r.event != 1) throw InvalidArgument("event record: event must be 0 or 1");
    if (r.time < 0 || r.time > horizon) {
        throw InvalidArgument("event record: time " + std::to_string(r.time) + " outside [0, " +
                              std::to_string(horizon) + "]");
    }
    if (r.event == 1 && r.time < 1) throw InvalidArgument("event record: event at time 0");
}

/// Survival probabilities for t = 1..T, stored at index t-1. Always within
/// [0, 1] and non-increasing.
class SurvivalCurve {
public:
    SurvivalCurve() = default;
    explicit SurvivalCurve(std::vector<double> values) : values_(std::move(values)) {
        for (std::size_t t = 0; t < values_.size(); ++t) {
            const double v = values_[t];
            if (!(v >= 0.0 && v <= 1.0)) {
                throw InvalidArgument("survival curve: value outside [0, 1] at t=" + std::to_string(t + 1));
            }
            if (t > 0 && v > values_[t - 1]) {
                throw InvalidArgument("survival curve: increases at t=" + std::to_string(t + 1));
            }
        }
    }

    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const noexcept { return values_[i]; }
    const std::vector<double>& values() const noexcept { return values_; }

    bool operator==(const SurvivalCurve&) const = default;

private:
    std::vector<double> values_;
};

/// Product-limit estimate S(0..T) with S(0) = 1.
struct PopulationEstimate {
    std::vector<double> survival;

    int horizon() const noexcept { return static_cast<int>(survival.size()) - 1; }
    double operator[](int t) const { return survival.at(static_cast<std::size_t>(t)); }
};

/// Kaplan-Meier estimator. A record with time t is at risk for every step
/// s <= t; events at s reduce S(s), censorings at s only shrink later risk sets.
inline PopulationEstimate km_estimator(std::span<const EventRecord> cohort, int horizon) {
    if (cohort.empty()) throw InvalidArgument("km_estimator: empty cohort");
    if (horizon < 1) throw InvalidArgument("km_estimator: horizon must be positive");
    const auto T = static_cast<std::size_t>(horizon);
    std::vector<long> deaths(T + 1, 0), leaving(T + 1, 0);
    for (const auto& r : cohort) {
        validate(r, horizon);
        const auto t = static_cast<std::size_t>(r.time);
        ++leaving[t];
        if (r.event == 1) ++deaths[t];
    }
    PopulationEstimate est{std::vector<double>(T + 1, 1.0)};
    long at_risk = static_cast<long>(cohort.size()) - leaving[0];
    for (std::size_t t = 1; t <= T; ++t) {
        double s = est.survival[t - 1];
        if (at_risk > 0 && deaths[t] > 0) {
            s *= 1.0 - static_cast<double>(deaths[t]) / static_cast<double>(at_risk);
        }
        est.survival[t] = s;
        at_risk -= leaving[t];
    }
    return est;
}

/// Curve target for one record:
///   t' <  t        -> 1
///   t' >= t, event -> 0
///   t' >= t, censored -> S(t') / S(t-1)   (S(-1) taken as 1)
inline SurvivalCurve rerepresent(const EventRecord& record, const PopulationEstimate& estimate) {
    const int horizon = estimate.horizon();
    validate(record, horizon);
    std::vector<double> y(static_cast<std::size_t>(horizon), 1.0);
    const int t = record.time;
    if (record.event == 1) {
        for (int s = t; s <= horizon; ++s) y[static_cast<std::size_t>(s - 1)] = 0.0;
        return SurvivalCurve(std::move(y));
    }
    const double base = t >= 1 ? estimate[t - 1] : 1.0;
    if (base <= 0.0) {
        throw InvalidArgument("rerepresent: population survival is zero before censoring time " +
                              std::to_string(t));
    }
    for (int s = std::max(t, 1); s <= horizon; ++s) {
        y[static_cast<std::size_t>(s - 1)] = std::clamp(estimate[s] / base, 0.0, 1.0);
    }
    return SurvivalCurve(std::move(y));
}

inline SurvivalCurve mean_curve(std::span<const SurvivalCurve> curves) {
    if (curves.empty()) throw InvalidArgument("mean_curve: no curves");
    const std::size_t T = curves.front().size();
    std::vector<double> sum(T, 0.0);
    for (const auto& c : curves) {
        if (c.size() != T) throw InvalidArgument("mean_curve: curve length mismatch");
        for (std::size_t t = 0; t < T; ++t) sum[t] += c[t];
    }
    const auto n = static_cast<double>(curves.size());
    for (double& v : sum) v = std::clamp(v / n, 0.0, 1.0);
    return SurvivalCurve(std::move(sum));
}

/// Area between curves with unit-width rectangles: sum over t of |a - p|.
inline double abc(const SurvivalCurve& actual, const SurvivalCurve& predicted) {
    if (actual.size() != predicted.size()) throw InvalidArgument("abc: curve length mismatch");
    double area = 0.0;
    for (std::size_t t = 0; t < actual.size(); ++t) area += std::abs(actual[t] - predicted[t]);
    return area;
}

}  // namespace geosurv
