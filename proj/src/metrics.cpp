#include "strpm/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "strpm/errors.hpp"

namespace strpm {

namespace {

void check_pair(const std::vector<double>& obs, const std::vector<double>& pred) {
    require(obs.size() == pred.size(), "LengthMismatch",
            "observed (" + std::to_string(obs.size()) + ") and predicted (" +
                std::to_string(pred.size()) + ") lengths differ");
    require(!obs.empty(), "LengthMismatch", "need at least one sample");
}

double mean(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

}  // namespace

double mse(const std::vector<double>& obs, const std::vector<double>& pred) {
    check_pair(obs, pred);
    double acc = 0.0;
    for (size_t i = 0; i < obs.size(); ++i) {
        const double d = obs[i] - pred[i];
        acc += d * d;
    }
    return acc / static_cast<double>(obs.size());
}

double bp(const std::vector<double>& obs, const std::vector<double>& pred) {
    check_pair(obs, pred);
    const double mo = mean(obs), mp = mean(pred);
    double sop = 0.0, soo = 0.0, spp = 0.0;
    for (size_t i = 0; i < obs.size(); ++i) {
        const double od = obs[i] - mo;
        const double pd = pred[i] - mp;
        sop += od * pd;
        soo += od * od;
        spp += pd * pd;
    }
    require(soo > 0.0 && spp > 0.0, "DegenerateInput", "constant series has no correlation");
    return sop / std::sqrt(soo * spp);
}

double nse(const std::vector<double>& obs, const std::vector<double>& pred) {
    check_pair(obs, pred);
    const double mo = mean(obs);
    double err = 0.0, var = 0.0;
    for (size_t i = 0; i < obs.size(); ++i) {
        const double d = obs[i] - pred[i];
        const double od = obs[i] - mo;
        err += d * d;
        var += od * od;
    }
    require(var > 0.0, "DegenerateObserved", "observed series is constant");
    return 1.0 - err / var;
}

double ioa(const std::vector<double>& obs, const std::vector<double>& pred) {
    check_pair(obs, pred);
    const double mo = mean(obs);
    double err = 0.0, denom = 0.0;
    for (size_t i = 0; i < obs.size(); ++i) {
        const double d = obs[i] - pred[i];
        err += d * d;
        const double spread = std::abs(pred[i] - mo) + std::abs(obs[i] - mo);
        denom += spread * spread;
    }
    require(denom > 0.0, "DegenerateObserved", "degenerate index-of-agreement denominator");
    return 1.0 - err / denom;
}

std::vector<EventLabel> classify_events(const std::vector<double>& obs,
                                        const std::vector<double>& pred,
                                        const EventConfig& cfg) {
    check_pair(obs, pred);
    std::vector<EventLabel> labels(obs.size(), EventLabel::kNotRelevant);
    for (size_t t = 1; t < obs.size(); ++t) {
        if (obs[t] < cfg.min_level_cm || obs[t] < obs[t - 1]) continue;
        const double err = pred[t] - obs[t];
        if (std::abs(err) <= cfg.tolerance_b_cm)
            labels[t] = EventLabel::kOk;
        else if (err > 0.0)
            labels[t] = EventLabel::kOver;
        else
            labels[t] = EventLabel::kUnder;
    }
    return labels;
}

EventReport event_report(const std::vector<double>& obs, const std::vector<double>& pred,
                         const EventConfig& cfg) {
    require(cfg.period_years > 0.0, "InvariantViolation", "period_years must be positive");
    const auto labels = classify_events(obs, pred, cfg);

    EventReport rep;
    std::vector<double> miss_errors;  // |pred - obs| at over/under points
    for (size_t t = 0; t < labels.size(); ++t) {
        switch (labels[t]) {
            case EventLabel::kOk:
                ++rep.t_ok;
                break;
            case EventLabel::kOver:
                ++rep.t_over;
                miss_errors.push_back(std::abs(pred[t] - obs[t]));
                break;
            case EventLabel::kUnder:
                ++rep.t_under;
                miss_errors.push_back(std::abs(pred[t] - obs[t]));
                break;
            case EventLabel::kNotRelevant:
                ++rep.t_not_relevant;
                break;
        }
    }
    rep.t_relevant = rep.t_ok + rep.t_over + rep.t_under;

    const double total = static_cast<double>(rep.t_relevant + rep.t_not_relevant);
    rep.t_ok_avg_pct = static_cast<double>(rep.t_ok) / total * 100.0;
    rep.t_under_avg_pct = static_cast<double>(rep.t_under) / total * 100.0;
    rep.t_over_rel_avg_pct = static_cast<double>(rep.t_over) / total * 100.0;

    rep.annual_events_ok = static_cast<double>(rep.t_ok) / cfg.period_years;
    rep.annual_events_under = static_cast<double>(rep.t_under) / cfg.period_years;
    rep.annual_events_over = static_cast<double>(rep.t_over) / cfg.period_years;
    rep.annual_events_all = static_cast<double>(rep.t_relevant) / cfg.period_years;

    if (!miss_errors.empty()) {
        std::sort(miss_errors.begin(), miss_errors.end());
        for (double e : miss_errors) rep.error_sum += e;
        rep.error_average = rep.error_sum / static_cast<double>(miss_errors.size());
        rep.error_max = miss_errors.back();
        const size_t n = miss_errors.size();
        rep.error_median = n % 2 == 1
                               ? miss_errors[n / 2]
                               : 0.5 * (miss_errors[n / 2 - 1] + miss_errors[n / 2]);
    }
    return rep;
}

}  // namespace strpm
