#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "strpm/grid_io.hpp"

namespace strpm {

/// Region extraction window, centered on geographic coordinates.
struct ClipSpec {
    double center_lat = 0.0;
    double center_lon = 0.0;
    size_t win_h = 1;
    size_t win_w = 1;
};

enum class TargetMode { kAbsolute, kResidual };

/// Aligned (input-window, target) pairs after windowing. Inputs are stored
/// flat, row-major over [n, lookback, win_h, win_w].
struct SampleSet {
    std::vector<double> inputs;
    std::vector<double> targets;        // h (absolute) or delta-h (residual), cm
    std::vector<double> anchor_levels;  // h at forecast-issue time, cm
    std::vector<int64_t> issue_times;   // epoch seconds of each window's t
    size_t lookback_steps = 1;
    size_t horizon_steps = 1;
    size_t win_h = 1;
    size_t win_w = 1;
    TargetMode mode = TargetMode::kAbsolute;

    size_t size() const { return targets.size(); }
    size_t sample_len() const { return lookback_steps * win_h * win_w; }
    const double* input_at(size_t i) const { return inputs.data() + i * sample_len(); }

    /// Contiguous [begin, end) slice, preserving chronological order.
    SampleSet slice(size_t begin, size_t end) const;
};

/// Chronological 60/40 outer split with an 80/20 inner train/validation cut.
struct SplitSpec {
    double train_frac = 0.60;
    double inner_train_frac = 0.80;
};

struct DatasetSplit {
    SampleSet train;
    SampleSet val;
    SampleSet test;
};

std::pair<size_t, size_t> latlon_to_index(const GridMeta& meta, size_t height, size_t width,
                                          double lat, double lon);

PrecipFrame clip_window(const PrecipFrame& frame, const ClipSpec& spec, const GridMeta& meta);

/// Sum groups of k consecutive frames (NaN as 0 mm); the group keeps the
/// last member's timestamp, a trailing partial group is dropped.
std::vector<PrecipFrame> aggregate_temporal(const std::vector<PrecipFrame>& frames, size_t k);

/// Trailing simple moving average over the non-NaN entries of the window;
/// the first window-1 outputs use the shorter available prefix.
LevelSeries sma_smooth(const LevelSeries& series, size_t window);

/// out[t] = values[t] - values[t-lag]; the first lag entries are NaN and NaN
/// inputs propagate.
std::vector<double> residual_series(const LevelSeries& series, size_t lag);

/// Product-moment correlation over the pairwise NaN-complete subset.
double pearson_corr(const std::vector<double>& x, const std::vector<double>& y);

DatasetSplit split_dataset(const SampleSet& samples, const SplitSpec& spec);

/// Drop leading val/test windows whose [t-L+1, t+H] span reaches back across
/// the split boundary, so no window mixes segments.
void trim_split_overlap(DatasetSplit& split);

SampleSet make_windows(const std::vector<PrecipFrame>& rain, const LevelSeries& levels, size_t L,
                       size_t H, TargetMode mode);

}  // namespace strpm
