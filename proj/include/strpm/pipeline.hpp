#pragma once

#include <map>
#include <string>
#include <vector>

#include "strpm/metrics.hpp"
#include "strpm/model.hpp"
#include "strpm/preprocess.hpp"
#include "strpm/synth.hpp"

namespace strpm {

/// Everything one run needs, parsed from a flat key=value config file with
/// CLI flag overrides on top.
struct RunConfig {
    std::string out_dir = "out";
    std::string radar_dir;
    std::string level_csv;
    uint64_t seed = 1;

    // synthetic dataset
    StormSpec storm;
    ReservoirSpec reservoir;
    size_t n_steps = 20000;

    // preprocessing
    size_t sma_window = 8;
    size_t aggregate_k = 1;
    bool clip_enabled = false;
    ClipSpec clip;
    GridMeta meta;
    SplitSpec split;
    size_t train_stride = 1;

    // model architecture
    size_t lookback = 32;
    std::vector<size_t> horizons{8};
    std::vector<size_t> lstm_hidden{128, 64, 32, 8};
    std::vector<size_t> conv_channels{8, 16};
    size_t pool = 2;
    TargetMode mode = TargetMode::kResidual;

    TrainOptions train_opts;

    EventConfig events;      // period_years <= 0 means "derive from test span"
    double event_period_years = 0.0;

    ForecastModelSpec model_spec(size_t horizon, size_t in_h, size_t in_w) const;
};

RunConfig parse_config(const std::map<std::string, std::string>& kv);
std::map<std::string, std::string> read_config_file(const std::string& path);
/// Canonical key=value rendering; hashing this pins a run's identity.
std::string canonical_config(const RunConfig& config);
uint64_t config_hash(const RunConfig& config);

struct LoadedData {
    std::vector<PrecipFrame> frames;
    LevelSeries levels;
};

/// Read every *.rpg in the directory (sorted by timestamp) plus the level CSV.
LoadedData load_data(const std::string& radar_dir, const std::string& level_csv);

/// Write the synthetic dataset: frames/, levels.csv and manifest.json.
void synth_to_disk(const RunConfig& config);

/// Clip, aggregate, smooth, window, split, trim and stride for one horizon.
struct PreparedData {
    DatasetSplit split;
    SampleSet train_strided;
    LevelSeries smoothed;  // full smoothed series the windows index into
};
PreparedData prepare(const LoadedData& data, const RunConfig& config, size_t horizon,
                     TargetMode mode);

std::string checkpoint_path(const RunConfig& config, TargetMode mode, size_t horizon);

/// Train one model per configured horizon; saves checkpoints + loss curves.
std::vector<std::string> run_training(const LoadedData& data, const RunConfig& config);

/// One metrics row per (model, horizon) on the test split.
struct MetricsRow {
    std::string model;
    size_t horizon = 0;
    size_t n = 0;
    double mse = 0.0;
    double bp = 0.0;
    double nse = 0.0;
    double ioa = 0.0;
    bool degenerate = false;  // constant observed series; bp/nse/ioa unset
    EventReport events;
};

MetricsRow evaluate_predictions(const std::string& model, size_t horizon,
                                const std::vector<double>& obs, const std::vector<double>& pred,
                                const EventConfig& events);

std::vector<MetricsRow> run_evaluation(const LoadedData& data, const RunConfig& config);

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRow& row);
void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows,
                       const RunConfig& config);

/// Forecast records at one issue time: one row per horizon for the
/// configured model plus the persistence reference.
struct ForecastRow {
    std::string model;
    Forecast forecast;
};
std::vector<ForecastRow> run_forecast(const LoadedData& data, const RunConfig& config,
                                      int64_t issue_time);

}  // namespace strpm
