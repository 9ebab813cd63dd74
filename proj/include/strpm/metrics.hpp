#pragma once

#include <cstdint>
#include <vector>

namespace strpm {

/// Event-relevance thresholds and the evaluation-period length used to turn
/// counts into per-year rates.
struct EventConfig {
    double min_level_cm = 40.0;
    double tolerance_b_cm = 10.0;
    double period_years = 1.0;
};

enum class EventLabel { kOk, kOver, kUnder, kNotRelevant };

/// Full event-focused metric bundle over one (observed, predicted) pair.
struct EventReport {
    int64_t t_relevant = 0;
    int64_t t_not_relevant = 0;
    int64_t t_ok = 0;
    int64_t t_over = 0;
    int64_t t_under = 0;
    double t_ok_avg_pct = 0.0;
    double t_under_avg_pct = 0.0;
    double t_over_rel_avg_pct = 0.0;
    double annual_events_ok = 0.0;
    double annual_events_under = 0.0;
    double annual_events_over = 0.0;
    double annual_events_all = 0.0;
    double error_sum = 0.0;
    double error_average = 0.0;
    double error_max = 0.0;
    double error_median = 0.0;
};

double mse(const std::vector<double>& obs, const std::vector<double>& pred);
/// Bravais-Pearson correlation between observed and predicted series.
double bp(const std::vector<double>& obs, const std::vector<double>& pred);
/// Nash-Sutcliffe efficiency, <= 1, 1 is perfect, 0 matches the mean predictor.
double nse(const std::vector<double>& obs, const std::vector<double>& pred);
/// Willmott index of agreement in [0, 1].
double ioa(const std::vector<double>& obs, const std::vector<double>& pred);

/// A timepoint is relevant iff obs[t] >= min_level and obs[t] >= obs[t-1]
/// (index 0 has no predecessor and is never relevant). Relevant points are
/// ok/over/under against the +-b tolerance.
std::vector<EventLabel> classify_events(const std::vector<double>& obs,
                                        const std::vector<double>& pred,
                                        const EventConfig& cfg);

EventReport event_report(const std::vector<double>& obs, const std::vector<double>& pred,
                         const EventConfig& cfg);

}  // namespace strpm
