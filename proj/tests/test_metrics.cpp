#include <algorithm>
#include <cmath>
#include <functional>

#include <doctest.h>

#include "strpm/errors.hpp"
#include "strpm/metrics.hpp"
#include "strpm/rng.hpp"

using namespace strpm;

namespace {

std::string code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

/// Independent single-pass reference classifier, coded separately from the
/// production one on purpose.
std::vector<int> reference_labels(const std::vector<double>& obs, const std::vector<double>& pred,
                                  const EventConfig& cfg) {
    // 0 = not relevant, 1 = ok, 2 = over, 3 = under
    std::vector<int> out(obs.size(), 0);
    for (size_t t = 0; t < obs.size(); ++t) {
        if (t == 0) continue;
        const bool relevant = obs[t] >= cfg.min_level_cm && obs[t] >= obs[t - 1];
        if (!relevant) continue;
        if (pred[t] > obs[t] + cfg.tolerance_b_cm)
            out[t] = 2;
        else if (pred[t] < obs[t] - cfg.tolerance_b_cm)
            out[t] = 3;
        else
            out[t] = 1;
    }
    return out;
}

EventReport reference_report(const std::vector<double>& obs, const std::vector<double>& pred,
                             const EventConfig& cfg) {
    const auto labels = reference_labels(obs, pred, cfg);
    EventReport r;
    std::vector<double> errs;
    for (size_t t = 0; t < labels.size(); ++t) {
        if (labels[t] == 0) ++r.t_not_relevant;
        if (labels[t] == 1) ++r.t_ok;
        if (labels[t] == 2) ++r.t_over;
        if (labels[t] == 3) ++r.t_under;
        if (labels[t] == 2 || labels[t] == 3) errs.push_back(std::fabs(pred[t] - obs[t]));
    }
    r.t_relevant = r.t_ok + r.t_over + r.t_under;
    const double total = static_cast<double>(obs.size());
    r.t_ok_avg_pct = 100.0 * static_cast<double>(r.t_ok) / total;
    r.t_under_avg_pct = 100.0 * static_cast<double>(r.t_under) / total;
    r.t_over_rel_avg_pct = 100.0 * static_cast<double>(r.t_over) / total;
    r.annual_events_ok = static_cast<double>(r.t_ok) / cfg.period_years;
    r.annual_events_under = static_cast<double>(r.t_under) / cfg.period_years;
    r.annual_events_over = static_cast<double>(r.t_over) / cfg.period_years;
    r.annual_events_all = static_cast<double>(r.t_relevant) / cfg.period_years;
    if (!errs.empty()) {
        std::sort(errs.begin(), errs.end());
        for (double e : errs) r.error_sum += e;
        r.error_average = r.error_sum / static_cast<double>(errs.size());
        r.error_max = errs.back();
        r.error_median = errs.size() % 2 == 1
                             ? errs[errs.size() / 2]
                             : 0.5 * (errs[errs.size() / 2 - 1] + errs[errs.size() / 2]);
    }
    return r;
}

void random_pair(Rng& rng, size_t n, std::vector<double>& obs, std::vector<double>& pred) {
    obs.resize(n);
    pred.resize(n);
    double level = rng.uniform(20.0, 60.0);
    for (size_t i = 0; i < n; ++i) {
        level += rng.uniform(-6.0, 6.0);
        level = std::max(level, 0.0);
        obs[i] = level;
        // predictions hover near the observation so all labels occur
        pred[i] = level + rng.uniform(-25.0, 25.0);
    }
}

}  // namespace

TEST_CASE("mse") {
    CHECK(mse({1, 2, 3}, {1, 2, 3}) == 0.0);
    CHECK(mse({1, 3}, {0, 0}) == doctest::Approx(5.0));
    CHECK(code_of([] { mse({1, 2}, {1}); }) == "LengthMismatch");
    CHECK(code_of([] { mse({}, {}); }) == "LengthMismatch");

    Rng rng(51);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> obs, pred;
        random_pair(rng, 64, obs, pred);
        double acc = 0.0;
        for (size_t i = 0; i < obs.size(); ++i) acc += (obs[i] - pred[i]) * (obs[i] - pred[i]);
        CHECK(mse(obs, pred) ==
              doctest::Approx(acc / static_cast<double>(obs.size())).epsilon(1e-12));
    }
}

TEST_CASE("bp") {
    const std::vector<double> obs{1, 2, 3, 5};
    CHECK(bp(obs, obs) == doctest::Approx(1.0));
    std::vector<double> neg(obs.size());
    for (size_t i = 0; i < obs.size(); ++i) neg[i] = -obs[i];
    CHECK(bp(obs, neg) == doctest::Approx(-1.0));
    std::vector<double> affine(obs.size());
    for (size_t i = 0; i < obs.size(); ++i) affine[i] = 2.5 * obs[i] + 7.0;
    CHECK(bp(obs, affine) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(code_of([] { bp({1, 1, 1}, {1, 2, 3}); }) == "DegenerateInput");
}

TEST_CASE("nse") {
    const std::vector<double> obs{0, 1, 2};
    CHECK(nse(obs, obs) == doctest::Approx(1.0));
    CHECK(nse(obs, {1, 1, 1}) == doctest::Approx(0.0));  // predicting the mean
    CHECK(nse(obs, {0, 0, 0}) == doctest::Approx(-1.5));
    CHECK(code_of([] { nse({2, 2, 2}, {1, 2, 3}); }) == "DegenerateObserved");
}

TEST_CASE("ioa") {
    const std::vector<double> obs{0, 2};
    CHECK(ioa(obs, obs) == doctest::Approx(1.0));
    CHECK(ioa(obs, {2, 0}) == doctest::Approx(0.0));
    Rng rng(52);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> o, p;
        random_pair(rng, 40, o, p);
        const double v = ioa(o, p);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("metric ranges on random input") {
    Rng rng(53);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> o, p;
        random_pair(rng, 100, o, p);
        CHECK(nse(o, p) <= 1.0);
        const double c = bp(o, p);
        CHECK(c >= -1.0);
        CHECK(c <= 1.0);
    }
}

TEST_CASE("classify_events basics") {
    EventConfig cfg;
    cfg.period_years = 1.0;

    const auto low = classify_events({10, 20, 30}, {10, 20, 30}, cfg);
    for (auto l : low) CHECK(l == EventLabel::kNotRelevant);

    const auto over = classify_events({50, 60}, {50, 75}, cfg);
    CHECK(over[0] == EventLabel::kNotRelevant);  // no predecessor
    CHECK(over[1] == EventLabel::kOver);

    const auto falling = classify_events({60, 50}, {60, 50}, cfg);
    CHECK(falling[1] == EventLabel::kNotRelevant);  // falling level

    const auto edge = classify_events({50, 50, 50}, {60, 60.0001, 40}, cfg);
    CHECK(edge[1] == EventLabel::kOver);   // just past the +10 tolerance
    CHECK(edge[2] == EventLabel::kOk);     // exactly at the -10 edge

    CHECK(code_of([&] { classify_events({1, 2}, {1}, cfg); }) == "LengthMismatch");
}

TEST_CASE("classification and report match the reference implementation") {
    Rng rng(54);
    EventConfig cfg;
    for (int trial = 0; trial < 50; ++trial) {
        cfg.period_years = rng.uniform(0.5, 10.0);
        std::vector<double> obs, pred;
        random_pair(rng, 200, obs, pred);
        const auto got = classify_events(obs, pred, cfg);
        const auto want = reference_labels(obs, pred, cfg);
        for (size_t t = 0; t < obs.size(); ++t) {
            const int mapped = got[t] == EventLabel::kNotRelevant ? 0
                               : got[t] == EventLabel::kOk       ? 1
                               : got[t] == EventLabel::kOver     ? 2
                                                                 : 3;
            CHECK(mapped == want[t]);
        }

        const EventReport a = event_report(obs, pred, cfg);
        const EventReport b = reference_report(obs, pred, cfg);
        CHECK(a.t_relevant == b.t_relevant);
        CHECK(a.t_not_relevant == b.t_not_relevant);
        CHECK(a.t_ok == b.t_ok);
        CHECK(a.t_over == b.t_over);
        CHECK(a.t_under == b.t_under);
        CHECK(a.t_ok_avg_pct == doctest::Approx(b.t_ok_avg_pct).epsilon(1e-9));
        CHECK(a.t_under_avg_pct == doctest::Approx(b.t_under_avg_pct).epsilon(1e-9));
        CHECK(a.t_over_rel_avg_pct == doctest::Approx(b.t_over_rel_avg_pct).epsilon(1e-9));
        CHECK(a.annual_events_ok == doctest::Approx(b.annual_events_ok).epsilon(1e-9));
        CHECK(a.annual_events_under == doctest::Approx(b.annual_events_under).epsilon(1e-9));
        CHECK(a.annual_events_over == doctest::Approx(b.annual_events_over).epsilon(1e-9));
        CHECK(a.annual_events_all == doctest::Approx(b.annual_events_all).epsilon(1e-9));
        CHECK(a.error_sum == doctest::Approx(b.error_sum).epsilon(1e-9));
        CHECK(a.error_average == doctest::Approx(b.error_average).epsilon(1e-9));
        CHECK(a.error_max == doctest::Approx(b.error_max).epsilon(1e-9));
        CHECK(a.error_median == doctest::Approx(b.error_median).epsilon(1e-9));

        // structural identities
        CHECK(a.t_ok + a.t_over + a.t_under == a.t_relevant);
        CHECK(a.t_relevant + a.t_not_relevant == static_cast<int64_t>(obs.size()));
        if (a.t_over + a.t_under > 0) {
            CHECK(a.error_average * static_cast<double>(a.t_over + a.t_under) ==
                  doctest::Approx(a.error_sum).epsilon(1e-9));
            CHECK(a.error_median <= a.error_max);
            CHECK(a.error_max >= a.error_average);
        }
    }
}

TEST_CASE("perfect prediction on a rising series") {
    EventConfig cfg;
    cfg.period_years = 2.0;
    std::vector<double> obs;
    for (int i = 0; i < 20; ++i) obs.push_back(45.0 + i);
    const EventReport r = event_report(obs, obs, cfg);
    CHECK(r.t_ok == r.t_relevant);
    CHECK(r.t_relevant == 19);
    CHECK(r.error_sum == 0.0);
    CHECK(r.annual_events_ok == doctest::Approx(19.0 / 2.0));
}

TEST_CASE("persistence on a steeply rising series never lands in tolerance") {
    EventConfig cfg;
    cfg.period_years = 1.0;
    std::vector<double> obs, pred;
    double level = 50.0;
    for (int i = 0; i < 15; ++i) {
        obs.push_back(level);
        pred.push_back(i == 0 ? level : obs[i - 1]);  // one-step persistence
        level += 15.0;                                // step larger than the 10 cm tolerance
    }
    const EventReport r = event_report(obs, pred, cfg);
    CHECK(r.t_ok == 0);
    CHECK(r.t_under == r.t_relevant);
}

TEST_CASE("tolerance monotonicity") {
    Rng rng(55);
    std::vector<double> obs, pred;
    random_pair(rng, 300, obs, pred);
    EventConfig a, b;
    a.period_years = b.period_years = 1.0;
    a.tolerance_b_cm = 5.0;
    b.tolerance_b_cm = 12.0;
    const EventReport ra = event_report(obs, pred, a);
    const EventReport rb = event_report(obs, pred, b);
    CHECK(rb.t_ok >= ra.t_ok);
    CHECK(rb.t_over <= ra.t_over);
    CHECK(rb.t_under <= ra.t_under);
}

TEST_CASE("annualized arithmetic stays self-consistent at multi-year scale") {
    // error_average == error_sum / (T_over + T_under) for sums and counts at
    // the magnitude of a multi-year evaluation: 11877.39 cm over 262 misses
    const double error_sum = 11877.39;
    const int64_t misses = 262;
    const double average = error_sum / static_cast<double>(misses);
    CHECK(std::fabs(average - 45.333) < 0.1);
    CHECK(average * static_cast<double>(misses) == doctest::Approx(error_sum).epsilon(1e-9));
}
