#include "strpm/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "strpm/checkpoint.hpp"
#include "strpm/errors.hpp"

namespace strpm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kSecondsPerYear = 365.25 * 86400.0;

std::vector<size_t> parse_size_list(const std::string& s) {
    std::vector<size_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stoul(item));
    require(!out.empty(), "BadConfig", "empty list value '" + s + "'");
    return out;
}

std::string join(const std::vector<size_t>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

SampleSet strided(const SampleSet& set, size_t stride) {
    if (stride <= 1) return set;
    SampleSet out = set;
    out.inputs.clear();
    out.targets.clear();
    out.anchor_levels.clear();
    out.issue_times.clear();
    const size_t len = set.sample_len();
    for (size_t i = 0; i < set.size(); i += stride) {
        const double* src = set.input_at(i);
        out.inputs.insert(out.inputs.end(), src, src + len);
        out.targets.push_back(set.targets[i]);
        out.anchor_levels.push_back(set.anchor_levels[i]);
        out.issue_times.push_back(set.issue_times[i]);
    }
    return out;
}

}  // namespace

ForecastModelSpec RunConfig::model_spec(size_t horizon, size_t in_h, size_t in_w) const {
    ForecastModelSpec spec;
    spec.lookback = lookback;
    spec.horizon = horizon;
    spec.in_h = in_h;
    spec.in_w = in_w;
    spec.lstm_hidden = lstm_hidden;
    spec.pool = pool;
    spec.mode = mode;
    spec.conv_blocks.clear();
    size_t c = 1;
    for (size_t ch : conv_channels) {
        Conv2Plus1DSpec b;
        b.c_in = c;
        b.c_out = ch;
        spec.conv_blocks.push_back(b);
        c = ch;
    }
    return spec;
}

RunConfig parse_config(const std::map<std::string, std::string>& kv) {
    RunConfig c;
    for (const auto& [key, value] : kv) {
        try {
            if (key == "out_dir") c.out_dir = value;
            else if (key == "radar_dir") c.radar_dir = value;
            else if (key == "level_csv") c.level_csv = value;
            else if (key == "seed") c.seed = std::stoull(value);
            else if (key == "n_steps") c.n_steps = std::stoul(value);
            else if (key == "grid.h") c.storm.grid_h = std::stoul(value);
            else if (key == "grid.w") c.storm.grid_w = std::stoul(value);
            else if (key == "storm.rate") c.storm.storm_rate = std::stod(value);
            else if (key == "storm.amplitude_mm") c.storm.amplitude_mm = std::stod(value);
            else if (key == "storm.sigma_cells") c.storm.sigma_cells = std::stod(value);
            else if (key == "storm.drift_cells") c.storm.drift_cells = std::stod(value);
            else if (key == "storm.decay") c.storm.decay_per_step = std::stod(value);
            else if (key == "reservoir.k") c.reservoir.k_decay = std::stod(value);
            else if (key == "reservoir.gain") c.reservoir.gain_cm_per_mm = std::stod(value);
            else if (key == "reservoir.base") c.reservoir.base_level_cm = std::stod(value);
            else if (key == "reservoir.noise_sd") c.reservoir.noise_sd_cm = std::stod(value);
            else if (key == "reservoir.seasonal_amp") c.reservoir.seasonal_amp_cm = std::stod(value);
            else if (key == "reservoir.seasonal_period")
                c.reservoir.seasonal_period_steps = std::stod(value);
            else if (key == "sma_window") c.sma_window = std::stoul(value);
            else if (key == "aggregate_k") c.aggregate_k = std::stoul(value);
            else if (key == "train_stride") c.train_stride = std::stoul(value);
            else if (key == "clip.enabled") c.clip_enabled = value == "1" || value == "true";
            else if (key == "clip.center_lat") c.clip.center_lat = std::stod(value);
            else if (key == "clip.center_lon") c.clip.center_lon = std::stod(value);
            else if (key == "clip.win_h") c.clip.win_h = std::stoul(value);
            else if (key == "clip.win_w") c.clip.win_w = std::stoul(value);
            else if (key == "meta.origin_lat") c.meta.origin_lat = std::stod(value);
            else if (key == "meta.origin_lon") c.meta.origin_lon = std::stod(value);
            else if (key == "meta.lat_step") c.meta.lat_step = std::stod(value);
            else if (key == "meta.lon_step") c.meta.lon_step = std::stod(value);
            else if (key == "split.train_frac") c.split.train_frac = std::stod(value);
            else if (key == "split.inner_train_frac") c.split.inner_train_frac = std::stod(value);
            else if (key == "model.lookback") c.lookback = std::stoul(value);
            else if (key == "model.horizons") c.horizons = parse_size_list(value);
            else if (key == "model.lstm_hidden") c.lstm_hidden = parse_size_list(value);
            else if (key == "model.conv_channels") c.conv_channels = parse_size_list(value);
            else if (key == "model.pool") c.pool = std::stoul(value);
            else if (key == "model.mode")
                c.mode = value == "absolute" ? TargetMode::kAbsolute : TargetMode::kResidual;
            else if (key == "train.epochs") c.train_opts.epochs = std::stoul(value);
            else if (key == "train.batch") c.train_opts.batch = std::stoul(value);
            else if (key == "train.lr") c.train_opts.lr = std::stod(value);
            else if (key == "events.min_level_cm") c.events.min_level_cm = std::stod(value);
            else if (key == "events.tolerance_cm") c.events.tolerance_b_cm = std::stod(value);
            else if (key == "events.period_years") c.event_period_years = std::stod(value);
            else fail("BadConfig", "unknown config key '" + key + "'");
        } catch (const Error&) {
            throw;
        } catch (const std::exception&) {
            fail("BadConfig", "bad value for '" + key + "': '" + value + "'");
        }
    }
    c.storm.seed = c.seed;
    c.train_opts.seed = c.seed;
    return c;
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::istringstream in(read_file_text(path));
    std::map<std::string, std::string> kv;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        const auto eq = line.find('=');
        require(eq != std::string::npos, "BadConfig",
                path + ":" + std::to_string(line_no) + ": expected key=value");
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t");
            const auto b = s.find_last_not_of(" \t");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

std::string canonical_config(const RunConfig& c) {
    std::ostringstream out;
    out.precision(17);
    out << "aggregate_k=" << c.aggregate_k << '\n'
        << "clip.center_lat=" << c.clip.center_lat << '\n'
        << "clip.center_lon=" << c.clip.center_lon << '\n'
        << "clip.enabled=" << (c.clip_enabled ? 1 : 0) << '\n'
        << "clip.win_h=" << c.clip.win_h << '\n'
        << "clip.win_w=" << c.clip.win_w << '\n'
        << "events.min_level_cm=" << c.events.min_level_cm << '\n'
        << "events.period_years=" << c.event_period_years << '\n'
        << "events.tolerance_cm=" << c.events.tolerance_b_cm << '\n'
        << "grid.h=" << c.storm.grid_h << '\n'
        << "grid.w=" << c.storm.grid_w << '\n'
        << "meta.lat_step=" << c.meta.lat_step << '\n'
        << "meta.lon_step=" << c.meta.lon_step << '\n'
        << "meta.origin_lat=" << c.meta.origin_lat << '\n'
        << "meta.origin_lon=" << c.meta.origin_lon << '\n'
        << "model.conv_channels=" << join(c.conv_channels) << '\n'
        << "model.horizons=" << join(c.horizons) << '\n'
        << "model.lookback=" << c.lookback << '\n'
        << "model.lstm_hidden=" << join(c.lstm_hidden) << '\n'
        << "model.mode=" << (c.mode == TargetMode::kResidual ? "residual" : "absolute") << '\n'
        << "model.pool=" << c.pool << '\n'
        << "n_steps=" << c.n_steps << '\n'
        << "reservoir.base=" << c.reservoir.base_level_cm << '\n'
        << "reservoir.gain=" << c.reservoir.gain_cm_per_mm << '\n'
        << "reservoir.k=" << c.reservoir.k_decay << '\n'
        << "reservoir.noise_sd=" << c.reservoir.noise_sd_cm << '\n'
        << "reservoir.seasonal_amp=" << c.reservoir.seasonal_amp_cm << '\n'
        << "reservoir.seasonal_period=" << c.reservoir.seasonal_period_steps << '\n'
        << "seed=" << c.seed << '\n'
        << "sma_window=" << c.sma_window << '\n'
        << "split.inner_train_frac=" << c.split.inner_train_frac << '\n'
        << "split.train_frac=" << c.split.train_frac << '\n'
        << "storm.amplitude_mm=" << c.storm.amplitude_mm << '\n'
        << "storm.decay=" << c.storm.decay_per_step << '\n'
        << "storm.drift_cells=" << c.storm.drift_cells << '\n'
        << "storm.rate=" << c.storm.storm_rate << '\n'
        << "storm.sigma_cells=" << c.storm.sigma_cells << '\n'
        << "train.batch=" << c.train_opts.batch << '\n'
        << "train.epochs=" << c.train_opts.epochs << '\n'
        << "train.lr=" << c.train_opts.lr << '\n'
        << "train_stride=" << c.train_stride << '\n';
    return out.str();
}

uint64_t config_hash(const RunConfig& config) {
    // FNV-1a 64
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : canonical_config(config)) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

LoadedData load_data(const std::string& radar_dir, const std::string& level_csv) {
    require(fs::is_directory(radar_dir), "IoError", "radar dir not found: " + radar_dir);
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(radar_dir))
        if (entry.path().extension() == ".rpg") files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    require(!files.empty(), "IoError", "no .rpg files in " + radar_dir);

    LoadedData data;
    data.frames.reserve(files.size());
    for (const auto& f : files) data.frames.push_back(parse_rpg(read_file_bytes(f)));
    std::sort(data.frames.begin(), data.frames.end(),
              [](const PrecipFrame& a, const PrecipFrame& b) { return a.timestamp < b.timestamp; });
    data.levels = read_level_csv(read_file_text(level_csv));
    return data;
}

void synth_to_disk(const RunConfig& config) {
    require(config.n_steps > config.lookback + config.horizons.back(), "TooShort",
            "n_steps must exceed lookback + horizon");
    fs::create_directories(fs::path(config.out_dir) / "frames");

    const auto frames = gen_storm_field(config.storm, config.n_steps);
    std::vector<double> mean_rain;
    mean_rain.reserve(frames.size());
    size_t missing = 0;
    for (const auto& f : frames) {
        mean_rain.push_back(catchment_mean(f));
        missing += f.missing_cells();
    }
    const LevelSeries levels = linear_reservoir(mean_rain, config.reservoir, config.seed);

    char name[32];
    for (size_t i = 0; i < frames.size(); ++i) {
        std::snprintf(name, sizeof(name), "frame_%06zu.rpg", i);
        write_file_bytes((fs::path(config.out_dir) / "frames" / name).string(),
                         write_rpg(frames[i]));
    }
    write_file_text((fs::path(config.out_dir) / "levels.csv").string(), write_level_csv(levels));

    char hash_hex[17];
    std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                  static_cast<unsigned long long>(config_hash(config)));
    json manifest{{"seed", config.seed},
                  {"config_hash", hash_hex},
                  {"n_steps", config.n_steps},
                  {"n_frames", frames.size()},
                  {"missing_cells", missing},
                  {"storm",
                   {{"grid_h", config.storm.grid_h},
                    {"grid_w", config.storm.grid_w},
                    {"rate", config.storm.storm_rate},
                    {"amplitude_mm", config.storm.amplitude_mm},
                    {"sigma_cells", config.storm.sigma_cells},
                    {"drift_cells", config.storm.drift_cells},
                    {"decay", config.storm.decay_per_step}}},
                  {"reservoir",
                   {{"k", config.reservoir.k_decay},
                    {"gain", config.reservoir.gain_cm_per_mm},
                    {"base", config.reservoir.base_level_cm},
                    {"noise_sd", config.reservoir.noise_sd_cm},
                    {"seasonal_amp", config.reservoir.seasonal_amp_cm},
                    {"seasonal_period", config.reservoir.seasonal_period_steps}}}};
    write_file_text((fs::path(config.out_dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

PreparedData prepare(const LoadedData& data, const RunConfig& config, size_t horizon,
                     TargetMode mode) {
    std::vector<PrecipFrame> frames = data.frames;
    if (config.clip_enabled) {
        std::vector<PrecipFrame> clipped;
        clipped.reserve(frames.size());
        for (const auto& f : frames) clipped.push_back(clip_window(f, config.clip, config.meta));
        frames = std::move(clipped);
    }
    if (config.aggregate_k > 1) frames = aggregate_temporal(frames, config.aggregate_k);

    PreparedData out;
    out.smoothed = sma_smooth(data.levels, config.sma_window);

    // keep the overlap of the frame sequence and the level grid
    const LevelSeries& lv = out.smoothed;
    require(!frames.empty(), "MisalignedSeries", "no frames to window");
    const int64_t off = frames.front().timestamp - lv.start;
    require(lv.step_s > 0 && off % lv.step_s == 0, "MisalignedSeries",
            "frames are not on the level-series time grid");
    require(off >= 0, "MisalignedSeries", "frames start before the level series");
    const auto start_idx = static_cast<size_t>(off / lv.step_s);
    require(start_idx < lv.values.size(), "MisalignedSeries", "frames start after the levels end");
    const size_t n = std::min(frames.size(), lv.values.size() - start_idx);
    frames.resize(n);
    LevelSeries aligned;
    aligned.sensor_id = lv.sensor_id;
    aligned.step_s = lv.step_s;
    aligned.start = lv.time_at(start_idx);
    aligned.values.assign(lv.values.begin() + static_cast<ptrdiff_t>(start_idx),
                          lv.values.begin() + static_cast<ptrdiff_t>(start_idx + n));

    const SampleSet samples = make_windows(frames, aligned, config.lookback, horizon, mode);
    out.split = split_dataset(samples, config.split);
    trim_split_overlap(out.split);
    out.train_strided = strided(out.split.train, config.train_stride);
    return out;
}

std::string checkpoint_path(const RunConfig& config, TargetMode mode, size_t horizon) {
    const std::string tag = mode == TargetMode::kResidual ? "strpmr" : "strpm";
    return (fs::path(config.out_dir) / (tag + "_h" + std::to_string(horizon) + ".stck")).string();
}

std::vector<std::string> run_training(const LoadedData& data, const RunConfig& config) {
    fs::create_directories(config.out_dir);
    char hash_hex[17];
    std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                  static_cast<unsigned long long>(config_hash(config)));

    std::vector<std::string> paths;
    for (size_t horizon : config.horizons) {
        PreparedData prep = prepare(data, config, horizon, config.mode);
        require(prep.train_strided.size() > 0, "EmptyDataset",
                "no training windows at horizon " + std::to_string(horizon));
        const ForecastModelSpec spec =
            config.model_spec(horizon, prep.train_strided.win_h, prep.train_strided.win_w);
        TrainResult result =
            train(spec, prep.train_strided, prep.split.val, config.train_opts);

        const std::string path = checkpoint_path(config, config.mode, horizon);
        save_checkpoint(path, result.params);
        paths.push_back(path);

        std::ostringstream curve;
        curve << "# config_hash=" << hash_hex << " seed=" << config.seed
              << " best_epoch=" << result.best_epoch << "\n";
        curve << "epoch,train_mse,train_mae,val_mse,val_mae\n";
        curve.precision(12);
        for (size_t e = 0; e < result.curve.size(); ++e) {
            const auto& s = result.curve[e];
            curve << e << ',' << s.train_mse << ',' << s.train_mae << ',' << s.val_mse << ','
                  << s.val_mae << '\n';
        }
        const std::string tag = config.mode == TargetMode::kResidual ? "strpmr" : "strpm";
        write_file_text((fs::path(config.out_dir) /
                         ("curve_" + tag + "_h" + std::to_string(horizon) + ".csv"))
                            .string(),
                        curve.str());
    }
    return paths;
}

MetricsRow evaluate_predictions(const std::string& model, size_t horizon,
                                const std::vector<double>& obs, const std::vector<double>& pred,
                                const EventConfig& events) {
    MetricsRow row;
    row.model = model;
    row.horizon = horizon;
    row.n = obs.size();
    row.mse = mse(obs, pred);
    try {
        row.bp = bp(obs, pred);
        row.nse = nse(obs, pred);
        row.ioa = ioa(obs, pred);
    } catch (const Error& e) {
        require(e.code() == "DegenerateInput" || e.code() == "DegenerateObserved", e.code(),
                e.what());
        row.degenerate = true;
    }
    row.events = event_report(obs, pred, events);
    return row;
}

std::vector<MetricsRow> run_evaluation(const LoadedData& data, const RunConfig& config) {
    std::vector<MetricsRow> rows;
    for (size_t horizon : config.horizons) {
        // residual-mode windows give anchors, observed levels and shared times
        PreparedData prep = prepare(data, config, horizon, TargetMode::kResidual);
        const SampleSet& test = prep.split.test;
        require(test.size() > 0, "EmptyDataset",
                "no test windows at horizon " + std::to_string(horizon));

        std::vector<double> obs(test.size());
        for (size_t i = 0; i < test.size(); ++i)
            obs[i] = test.anchor_levels[i] + test.targets[i];

        EventConfig events = config.events;
        events.period_years =
            config.event_period_years > 0.0
                ? config.event_period_years
                : static_cast<double>(test.size()) *
                      static_cast<double>(prep.smoothed.step_s) / kSecondsPerYear;

        rows.push_back(
            evaluate_predictions("baseline", horizon, obs, test.anchor_levels, events));

        for (TargetMode mode : {TargetMode::kResidual, TargetMode::kAbsolute}) {
            const std::string path = checkpoint_path(config, mode, horizon);
            const std::string tag = mode == TargetMode::kResidual ? "strpmr" : "strpm";
            if (!fs::exists(path)) {
                require(mode != config.mode, "MissingCheckpoint",
                        "no checkpoint for " + tag + " at horizon " + std::to_string(horizon) +
                            " (" + path + ")");
                continue;
            }
            ModelParams params = load_checkpoint(path);
            require(params.spec.horizon == horizon, "MissingCheckpoint",
                    "checkpoint " + path + " was trained for horizon " +
                        std::to_string(params.spec.horizon));
            std::vector<double> pred = predict_net(params, test, config.train_opts.batch);
            if (mode == TargetMode::kResidual)
                for (size_t i = 0; i < pred.size(); ++i) pred[i] += test.anchor_levels[i];
            rows.push_back(evaluate_predictions(tag, horizon, obs, pred, events));
        }
    }
    return rows;
}

std::string metrics_csv_header() {
    return "model,horizon_steps,n,mse,bp,nse,ioa,degenerate,"
           "T_relevant,T_not_relevant,T_ok,T_over,T_under,"
           "T_ok_avg_pct,T_under_avg_pct,T_over_rel_avg_pct,"
           "annual_events_ok,annual_events_under,annual_events_over,annual_events_all,"
           "error_sum,error_average,error_max,error_median";
}

std::string metrics_csv_row(const MetricsRow& row) {
    std::ostringstream out;
    out.precision(12);
    out << row.model << ',' << row.horizon << ',' << row.n << ',' << row.mse << ',';
    if (row.degenerate)
        out << "nan,nan,nan,1,";
    else
        out << row.bp << ',' << row.nse << ',' << row.ioa << ",0,";
    const auto& e = row.events;
    out << e.t_relevant << ',' << e.t_not_relevant << ',' << e.t_ok << ',' << e.t_over << ','
        << e.t_under << ',' << e.t_ok_avg_pct << ',' << e.t_under_avg_pct << ','
        << e.t_over_rel_avg_pct << ',' << e.annual_events_ok << ',' << e.annual_events_under
        << ',' << e.annual_events_over << ',' << e.annual_events_all << ',' << e.error_sum << ','
        << e.error_average << ',' << e.error_max << ',' << e.error_median;
    return out.str();
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows,
                       const RunConfig& config) {
    char hash_hex[17];
    std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                  static_cast<unsigned long long>(config_hash(config)));
    std::ostringstream out;
    out << "# config_hash=" << hash_hex << " seed=" << config.seed << "\n";
    out << metrics_csv_header() << "\n";
    for (const auto& row : rows) out << metrics_csv_row(row) << "\n";
    write_file_text(path, out.str());
}

std::vector<ForecastRow> run_forecast(const LoadedData& data, const RunConfig& config,
                                      int64_t issue_time) {
    std::vector<PrecipFrame> frames = data.frames;
    if (config.clip_enabled) {
        std::vector<PrecipFrame> clipped;
        for (const auto& f : frames) clipped.push_back(clip_window(f, config.clip, config.meta));
        frames = std::move(clipped);
    }
    if (config.aggregate_k > 1) frames = aggregate_temporal(frames, config.aggregate_k);
    const LevelSeries smoothed = sma_smooth(data.levels, config.sma_window);

    // locate the issue step on the frame sequence
    size_t idx = frames.size();
    for (size_t i = 0; i < frames.size(); ++i)
        if (frames[i].timestamp == issue_time) {
            idx = i;
            break;
        }
    require(idx != frames.size(), "InsufficientHistory",
            "no frame at issue time " + std::to_string(issue_time));
    require(idx + 1 >= config.lookback, "InsufficientHistory",
            "need " + std::to_string(config.lookback) + " history frames before the issue time");

    const int64_t loff = issue_time - smoothed.start;
    require(smoothed.step_s > 0 && loff >= 0 && loff % smoothed.step_s == 0 &&
                static_cast<size_t>(loff / smoothed.step_s) < smoothed.values.size(),
            "InsufficientHistory", "issue time is outside the level series");
    const double anchor = smoothed.values[static_cast<size_t>(loff / smoothed.step_s)];
    require(std::isfinite(anchor), "NonFiniteAnchor", "level at issue time is missing");

    const size_t cells = frames[idx].cells();
    std::vector<double> window;
    window.reserve(config.lookback * cells);
    for (size_t j = idx + 1 - config.lookback; j <= idx; ++j)
        for (float v : frames[j].values) window.push_back(std::isnan(v) ? 0.0 : v);

    std::vector<ForecastRow> rows;
    for (size_t horizon : config.horizons) {
        const std::string path = checkpoint_path(config, config.mode, horizon);
        require(fs::exists(path), "MissingCheckpoint", "no checkpoint at " + path);
        ModelParams params = load_checkpoint(path);
        ForecastRow row;
        if (config.mode == TargetMode::kResidual) {
            row.model = "strpmr";
            row.forecast = strpmr_forward(params, window.data(), anchor, issue_time);
        } else {
            row.model = "strpm";
            row.forecast.issue_time = issue_time;
            row.forecast.horizon_steps = horizon;
            row.forecast.anchor_level_cm = anchor;
            row.forecast.predicted_level_cm = strpm_forward(params, window.data());
        }
        rows.push_back(std::move(row));
        rows.push_back({"baseline", persistence_forecast(anchor, horizon, issue_time)});
    }
    return rows;
}

}  // namespace strpm
