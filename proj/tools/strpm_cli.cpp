#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "strpm/errors.hpp"
#include "strpm/pipeline.hpp"

namespace fs = std::filesystem;
using namespace strpm;

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::string mode;
    std::vector<size_t> horizons;
    uint64_t seed = 0;
    bool seed_set = false;
    bool out_set = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "flat key=value config file");
    cmd->add_option("--seed", flags.seed, "override the run seed")
        ->each([&flags](const std::string&) { flags.seed_set = true; });
    cmd->add_option("--horizon", flags.horizons, "forecast horizon in steps (repeatable)");
    cmd->add_option("--mode", flags.mode, "absolute|residual")
        ->check(CLI::IsMember({"absolute", "residual"}));
    cmd->add_option("--out", flags.out_dir, "output directory")
        ->each([&flags](const std::string&) { flags.out_set = true; });
}

RunConfig build_config(const CommonFlags& flags) {
    std::map<std::string, std::string> kv;
    if (!flags.config_path.empty()) kv = read_config_file(flags.config_path);
    // flags win over file values
    if (flags.seed_set) kv["seed"] = std::to_string(flags.seed);
    if (flags.out_set) kv["out_dir"] = flags.out_dir;
    if (!flags.mode.empty()) kv["model.mode"] = flags.mode;
    if (!flags.horizons.empty()) {
        std::string joined;
        for (size_t i = 0; i < flags.horizons.size(); ++i)
            joined += (i ? "," : "") + std::to_string(flags.horizons[i]);
        kv["model.horizons"] = joined;
    }
    return parse_config(kv);
}

LoadedData load_for(const RunConfig& config) {
    std::string radar = config.radar_dir;
    std::string levels = config.level_csv;
    // default to the synth layout under out_dir
    if (radar.empty()) radar = (fs::path(config.out_dir) / "frames").string();
    if (levels.empty()) levels = (fs::path(config.out_dir) / "levels.csv").string();
    return load_data(radar, levels);
}

int cmd_synth(const CommonFlags& flags) {
    const RunConfig config = build_config(flags);
    synth_to_disk(config);
    std::cout << "wrote " << config.n_steps << " frames and levels.csv to " << config.out_dir
              << "\n";
    return 0;
}

int cmd_ingest(const CommonFlags& flags) {
    const RunConfig config = build_config(flags);
    const LoadedData data = load_for(config);

    std::vector<PrecipFrame> frames = data.frames;
    size_t missing = 0;
    for (const auto& f : frames) missing += f.missing_cells();
    if (config.clip_enabled) {
        std::vector<PrecipFrame> clipped;
        for (const auto& f : frames) clipped.push_back(clip_window(f, config.clip, config.meta));
        frames = std::move(clipped);
    }
    if (config.aggregate_k > 1) frames = aggregate_temporal(frames, config.aggregate_k);

    const fs::path dir = fs::path(config.out_dir) / "ingested";
    fs::create_directories(dir / "frames");
    char name[32];
    for (size_t i = 0; i < frames.size(); ++i) {
        std::snprintf(name, sizeof(name), "frame_%06zu.rpg", i);
        write_file_bytes((dir / "frames" / name).string(), write_rpg(frames[i]));
    }
    write_file_text((dir / "levels.csv").string(), write_level_csv(data.levels));

    nlohmann::json report{{"frames_in", data.frames.size()},
                          {"frames_out", frames.size()},
                          {"missing_cells", missing},
                          {"aggregate_k", config.aggregate_k},
                          {"clip_enabled", config.clip_enabled},
                          {"level_samples", data.levels.values.size()},
                          {"level_step_s", data.levels.step_s}};
    write_file_text((dir / "ingest_report.json").string(), report.dump(2) + "\n");
    std::cout << "ingested " << data.frames.size() << " frames (" << missing
              << " missing cells) -> " << frames.size() << " processed frames\n";
    return 0;
}

int cmd_train(const CommonFlags& flags) {
    const RunConfig config = build_config(flags);
    const LoadedData data = load_for(config);
    const auto paths = run_training(data, config);
    for (const auto& p : paths) std::cout << "checkpoint " << p << "\n";
    return 0;
}

int cmd_evaluate(const CommonFlags& flags) {
    const RunConfig config = build_config(flags);
    const LoadedData data = load_for(config);
    const auto rows = run_evaluation(data, config);
    const std::string path = (fs::path(config.out_dir) / "metrics.csv").string();
    write_metrics_csv(path, rows, config);
    std::cout << metrics_csv_header() << "\n";
    for (const auto& row : rows) std::cout << metrics_csv_row(row) << "\n";
    std::cout << "wrote " << path << "\n";
    return 0;
}

int cmd_forecast(const CommonFlags& flags, int64_t issue_time) {
    const RunConfig config = build_config(flags);
    const LoadedData data = load_for(config);
    const auto rows = run_forecast(data, config, issue_time);
    std::ostringstream out;
    out.precision(12);
    out << "model,issue_time,horizon_steps,anchor_level_cm,predicted_residual_cm,"
           "predicted_level_cm\n";
    for (const auto& row : rows) {
        out << row.model << ',' << row.forecast.issue_time << ',' << row.forecast.horizon_steps
            << ',' << row.forecast.anchor_level_cm << ',';
        if (row.forecast.predicted_residual_cm)
            out << *row.forecast.predicted_residual_cm;
        out << ',' << row.forecast.predicted_level_cm << '\n';
    }
    const std::string path = (fs::path(config.out_dir) / "forecast.csv").string();
    write_file_text(path, out.str());
    std::cout << out.str();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"radar-precipitation water-level forecasting pipeline"};
    app.require_subcommand(1);

    CommonFlags flags;
    int64_t issue_time = 0;

    auto* synth = app.add_subcommand("synth", "generate a synthetic radar + level dataset");
    add_common(synth, flags);
    auto* ingest = app.add_subcommand("ingest", "read, clip and aggregate raw frames");
    add_common(ingest, flags);
    auto* train = app.add_subcommand("train", "train one forecaster per horizon");
    add_common(train, flags);
    auto* evaluate = app.add_subcommand("evaluate", "metrics per model and horizon");
    add_common(evaluate, flags);
    auto* forecast = app.add_subcommand("forecast", "forecast records at one issue time");
    add_common(forecast, flags);
    forecast->add_option("--issue-time", issue_time, "epoch seconds of the forecast issue")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(flags);
        if (ingest->parsed()) return cmd_ingest(flags);
        if (train->parsed()) return cmd_train(flags);
        if (evaluate->parsed()) return cmd_evaluate(flags);
        if (forecast->parsed()) return cmd_forecast(flags, issue_time);
    } catch (const Error& e) {
        std::cerr << "error" << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error[Internal]: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
