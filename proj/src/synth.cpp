#include "strpm/synth.hpp"

#include <cmath>

#include "strpm/errors.hpp"
#include "strpm/rng.hpp"

namespace strpm {

namespace {

constexpr int64_t kStepSeconds = 900;

struct Storm {
    double y, x;       // center, cell coordinates
    double amp;        // mm per step at center
    double sigma;
    double vy, vx;     // drift per step
};

}  // namespace

std::vector<PrecipFrame> gen_storm_field(const StormSpec& spec, size_t n_steps) {
    require(n_steps >= 1, "InvariantViolation", "need at least one step");
    require(spec.sigma_cells > 0.0 && spec.amplitude_mm >= 0.0, "InvariantViolation",
            "bad storm spec");
    Rng rng = Rng::derive(spec.seed, 0x73746f726d);  // "storm" stream

    const double margin = 3.0 * spec.sigma_cells;
    const double cutoff = 0.02 * spec.amplitude_mm;
    std::vector<Storm> storms;
    std::vector<PrecipFrame> frames;
    frames.reserve(n_steps);

    for (size_t step = 0; step < n_steps; ++step) {
        // advance and cull
        for (auto& s : storms) {
            s.y += s.vy;
            s.x += s.vx;
            s.amp *= spec.decay_per_step;
        }
        std::erase_if(storms, [&](const Storm& s) {
            return s.amp < cutoff || s.y < -margin || s.x < -margin ||
                   s.y > static_cast<double>(spec.grid_h) + margin ||
                   s.x > static_cast<double>(spec.grid_w) + margin;
        });
        if (rng.uniform() < spec.storm_rate) {
            Storm s;
            s.y = rng.uniform(0.0, static_cast<double>(spec.grid_h));
            s.x = rng.uniform(0.0, static_cast<double>(spec.grid_w));
            s.amp = spec.amplitude_mm * (0.5 + rng.uniform());
            s.sigma = spec.sigma_cells;
            const double angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
            s.vy = spec.drift_cells * std::sin(angle);
            s.vx = spec.drift_cells * std::cos(angle);
            storms.push_back(s);
        }

        PrecipFrame frame;
        frame.width = static_cast<uint16_t>(spec.grid_w);
        frame.height = static_cast<uint16_t>(spec.grid_h);
        frame.cell_km = 1.0f;
        frame.timestamp = static_cast<int64_t>(step) * kStepSeconds;
        frame.values.assign(spec.grid_h * spec.grid_w, 0.0f);
        for (const auto& s : storms) {
            const double inv2s2 = 1.0 / (2.0 * s.sigma * s.sigma);
            for (size_t i = 0; i < spec.grid_h; ++i) {
                const double dy = static_cast<double>(i) - s.y;
                for (size_t j = 0; j < spec.grid_w; ++j) {
                    const double dx = static_cast<double>(j) - s.x;
                    frame.values[i * spec.grid_w + j] +=
                        static_cast<float>(s.amp * std::exp(-(dy * dy + dx * dx) * inv2s2));
                }
            }
        }
        frames.push_back(std::move(frame));
    }
    return frames;
}

LevelSeries linear_reservoir(const std::vector<double>& rain_mean, const ReservoirSpec& spec,
                             uint64_t seed) {
    require(spec.k_decay > 0.0 && spec.k_decay < 1.0, "InvariantViolation",
            "k_decay must lie in (0,1)");
    require(spec.gain_cm_per_mm >= 0.0 && spec.base_level_cm >= 0.0 && spec.noise_sd_cm >= 0.0,
            "InvariantViolation", "bad reservoir spec");
    require(spec.seasonal_amp_cm >= 0.0 && spec.seasonal_period_steps > 0.0, "InvariantViolation",
            "bad seasonal baseflow spec");
    Rng rng = Rng::derive(seed, 0x6c65766c);  // "levl" stream

    LevelSeries series;
    series.sensor_id = "synthetic";
    series.start = 0;
    series.step_s = kStepSeconds;
    series.values.reserve(rain_mean.size());
    double state = 0.0;
    size_t t = 0;
    for (double r : rain_mean) {
        require(std::isfinite(r), "InvariantViolation", "rain input must be finite");
        state = spec.k_decay * state + spec.gain_cm_per_mm * r;
        const double seasonal =
            spec.seasonal_amp_cm *
            std::sin(2.0 * 3.14159265358979323846 * static_cast<double>(t) /
                     spec.seasonal_period_steps);
        const double noise = spec.noise_sd_cm > 0.0 ? spec.noise_sd_cm * rng.normal() : 0.0;
        series.values.push_back(spec.base_level_cm + seasonal + state + noise);
        ++t;
    }
    return series;
}

double catchment_mean(const PrecipFrame& frame) {
    double acc = 0.0;
    for (float v : frame.values)
        if (!std::isnan(v)) acc += v;
    return acc / static_cast<double>(frame.cells());
}

SynthDataset gen_dataset(const StormSpec& storm, const ReservoirSpec& reservoir, size_t n_steps,
                         size_t L, size_t H, TargetMode mode) {
    require(n_steps > L + H, "TooShort",
            "n_steps must exceed L+H = " + std::to_string(L + H));
    SynthDataset data;
    data.frames = gen_storm_field(storm, n_steps);
    std::vector<double> mean_rain;
    mean_rain.reserve(n_steps);
    for (const auto& f : data.frames) mean_rain.push_back(catchment_mean(f));
    data.levels = linear_reservoir(mean_rain, reservoir, storm.seed);
    data.samples = make_windows(data.frames, data.levels, L, H, mode);
    return data;
}

}  // namespace strpm
