#include "strpm/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "strpm/errors.hpp"

namespace strpm {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

SampleSet SampleSet::slice(size_t begin, size_t end) const {
    SampleSet out = *this;
    out.inputs.assign(inputs.begin() + static_cast<ptrdiff_t>(begin * sample_len()),
                      inputs.begin() + static_cast<ptrdiff_t>(end * sample_len()));
    out.targets.assign(targets.begin() + begin, targets.begin() + end);
    out.anchor_levels.assign(anchor_levels.begin() + begin, anchor_levels.begin() + end);
    out.issue_times.assign(issue_times.begin() + begin, issue_times.begin() + end);
    return out;
}

std::pair<size_t, size_t> latlon_to_index(const GridMeta& meta, size_t height, size_t width,
                                          double lat, double lon) {
    require(meta.lat_step != 0.0 && meta.lon_step != 0.0, "InvariantViolation",
            "grid meta steps must be nonzero");
    const double r = (lat - meta.origin_lat) / meta.lat_step;
    const double c = (lon - meta.origin_lon) / meta.lon_step;
    const long long ri = std::llround(r);
    const long long ci = std::llround(c);
    require(ri >= 0 && ci >= 0 && ri < static_cast<long long>(height) &&
                ci < static_cast<long long>(width),
            "OutOfBounds", "coordinates map outside the grid");
    return {static_cast<size_t>(ri), static_cast<size_t>(ci)};
}

PrecipFrame clip_window(const PrecipFrame& frame, const ClipSpec& spec, const GridMeta& meta) {
    require(spec.win_h >= 1 && spec.win_w >= 1, "InvariantViolation", "window must be >= 1x1");
    const auto [rc, cc] =
        latlon_to_index(meta, frame.height, frame.width, spec.center_lat, spec.center_lon);
    const long long r0 = static_cast<long long>(rc) - static_cast<long long>((spec.win_h - 1) / 2);
    const long long c0 = static_cast<long long>(cc) - static_cast<long long>((spec.win_w - 1) / 2);
    require(r0 >= 0 && c0 >= 0 &&
                r0 + static_cast<long long>(spec.win_h) <= static_cast<long long>(frame.height) &&
                c0 + static_cast<long long>(spec.win_w) <= static_cast<long long>(frame.width),
            "OutOfBounds", "clip window does not fit inside the frame");

    PrecipFrame out;
    out.timestamp = frame.timestamp;
    out.cell_km = frame.cell_km;
    out.width = static_cast<uint16_t>(spec.win_w);
    out.height = static_cast<uint16_t>(spec.win_h);
    out.values.resize(spec.win_h * spec.win_w);
    for (size_t i = 0; i < spec.win_h; ++i)
        for (size_t j = 0; j < spec.win_w; ++j)
            out.at(i, j) = frame.at(static_cast<size_t>(r0) + i, static_cast<size_t>(c0) + j);
    return out;
}

std::vector<PrecipFrame> aggregate_temporal(const std::vector<PrecipFrame>& frames, size_t k) {
    require(k >= 1, "InvariantViolation", "aggregation factor must be >= 1");
    if (frames.empty()) return {};
    const uint16_t w = frames.front().width;
    const uint16_t h = frames.front().height;
    int64_t spacing = 0;
    for (size_t i = 0; i < frames.size(); ++i) {
        require(frames[i].width == w && frames[i].height == h, "ShapeMismatch",
                "frame " + std::to_string(i) + " has a different shape");
        if (i > 0) {
            const int64_t d = frames[i].timestamp - frames[i - 1].timestamp;
            if (spacing == 0)
                spacing = d;
            else
                require(d == spacing, "IrregularSpacing",
                        "frame " + std::to_string(i) + " breaks the regular spacing");
        }
    }

    std::vector<PrecipFrame> out;
    out.reserve(frames.size() / k);
    for (size_t g = 0; g + k <= frames.size(); g += k) {
        PrecipFrame sum;
        sum.width = w;
        sum.height = h;
        sum.cell_km = frames[g].cell_km;
        sum.timestamp = frames[g + k - 1].timestamp;
        sum.values.assign(static_cast<size_t>(w) * h, 0.0f);
        for (size_t j = 0; j < k; ++j) {
            const auto& f = frames[g + j];
            for (size_t c = 0; c < sum.values.size(); ++c) {
                const float v = f.values[c];
                if (!std::isnan(v)) sum.values[c] += v;
            }
        }
        out.push_back(std::move(sum));
    }
    return out;
}

LevelSeries sma_smooth(const LevelSeries& series, size_t window) {
    require(window >= 1, "InvariantViolation", "SMA window must be >= 1");
    LevelSeries out = series;
    const auto& v = series.values;
    for (size_t t = 0; t < v.size(); ++t) {
        const size_t begin = t + 1 >= window ? t + 1 - window : 0;
        double sum = 0.0;
        size_t n = 0;
        for (size_t i = begin; i <= t; ++i) {
            if (!std::isnan(v[i])) {
                sum += v[i];
                ++n;
            }
        }
        out.values[t] = n > 0 ? sum / static_cast<double>(n) : kNaN;
    }
    return out;
}

std::vector<double> residual_series(const LevelSeries& series, size_t lag) {
    require(lag >= 1, "InvariantViolation", "lag must be >= 1");
    std::vector<double> out(series.values.size(), kNaN);
    for (size_t t = lag; t < series.values.size(); ++t)
        out[t] = series.values[t] - series.values[t - lag];
    return out;
}

double pearson_corr(const std::vector<double>& x, const std::vector<double>& y) {
    require(x.size() == y.size(), "DegenerateInput", "length mismatch");
    std::vector<double> xs, ys;
    xs.reserve(x.size());
    ys.reserve(y.size());
    for (size_t i = 0; i < x.size(); ++i) {
        if (!std::isnan(x[i]) && !std::isnan(y[i])) {
            xs.push_back(x[i]);
            ys.push_back(y[i]);
        }
    }
    const size_t n = xs.size();
    require(n >= 2, "DegenerateInput", "need at least 2 pairwise-complete points");
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    require(sxx > 0.0 && syy > 0.0, "DegenerateInput", "constant input series");
    return sxy / std::sqrt(sxx * syy);
}

DatasetSplit split_dataset(const SampleSet& samples, const SplitSpec& spec) {
    require(spec.train_frac > 0.0 && spec.train_frac < 1.0 && spec.inner_train_frac > 0.0 &&
                spec.inner_train_frac < 1.0,
            "InvariantViolation", "split fractions must lie in (0,1)");
    const size_t n = samples.size();
    require(n >= 10, "TooFewSamples", "need at least 10 samples, got " + std::to_string(n));
    // tiny epsilon so exact products like 0.6*100 floor as intended
    const auto train_total =
        static_cast<size_t>(std::floor(spec.train_frac * static_cast<double>(n) + 1e-9));
    const auto train_n = static_cast<size_t>(
        std::floor(spec.inner_train_frac * static_cast<double>(train_total) + 1e-9));
    DatasetSplit out;
    out.train = samples.slice(0, train_n);
    out.val = samples.slice(train_n, train_total);
    out.test = samples.slice(train_total, n);
    return out;
}

namespace {

void trim_leading(SampleSet& set, int64_t boundary_issue, int64_t step_s) {
    // A window issued at t spans [t-L+1, t+H]; its input reaches back
    // (L-1)*step seconds. Drop samples whose input span starts at or before
    // the previous segment's last target time.
    size_t drop = 0;
    const auto span_back = static_cast<int64_t>(set.lookback_steps - 1) * step_s;
    const auto horizon_fwd = static_cast<int64_t>(set.horizon_steps) * step_s;
    while (drop < set.size() &&
           set.issue_times[drop] - span_back <= boundary_issue + horizon_fwd)
        ++drop;
    if (drop > 0) {
        SampleSet trimmed = set.slice(drop, set.size());
        set = std::move(trimmed);
    }
}

}  // namespace

void trim_split_overlap(DatasetSplit& split) {
    if (split.train.size() == 0) return;
    const int64_t step =
        split.train.size() >= 2 ? split.train.issue_times[1] - split.train.issue_times[0] : 0;
    if (step <= 0) return;
    if (split.val.size() > 0) trim_leading(split.val, split.train.issue_times.back(), step);
    if (split.test.size() > 0 && split.val.size() > 0)
        trim_leading(split.test, split.val.issue_times.back(), step);
}

SampleSet make_windows(const std::vector<PrecipFrame>& rain, const LevelSeries& levels, size_t L,
                       size_t H, TargetMode mode) {
    require(L >= 1 && H >= 1, "InvariantViolation", "L and H must be >= 1");
    require(rain.size() == levels.values.size(), "MisalignedSeries",
            "rain frames (" + std::to_string(rain.size()) + ") and level samples (" +
                std::to_string(levels.values.size()) + ") differ in length");
    for (size_t i = 0; i < rain.size(); ++i)
        require(rain[i].timestamp == levels.time_at(i), "MisalignedSeries",
                "frame " + std::to_string(i) + " is not on the level-series time grid");

    SampleSet set;
    set.lookback_steps = L;
    set.horizon_steps = H;
    set.mode = mode;
    if (!rain.empty()) {
        set.win_h = rain.front().height;
        set.win_w = rain.front().width;
    }
    if (rain.size() < L + H) return set;

    const size_t cells = set.win_h * set.win_w;
    for (size_t t = L - 1; t + H < rain.size(); ++t) {
        const double anchor = levels.values[t];
        const double future = levels.values[t + H];
        if (std::isnan(anchor) || std::isnan(future)) continue;
        for (size_t j = t + 1 - L; j <= t; ++j) {
            require(rain[j].values.size() == cells, "MisalignedSeries",
                    "frame " + std::to_string(j) + " has an inconsistent shape");
            for (float v : rain[j].values) set.inputs.push_back(std::isnan(v) ? 0.0 : v);
        }
        set.anchor_levels.push_back(anchor);
        set.targets.push_back(mode == TargetMode::kResidual ? future - anchor : future);
        set.issue_times.push_back(levels.time_at(t));
    }
    return set;
}

}  // namespace strpm
