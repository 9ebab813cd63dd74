#pragma once

#include <cstdint>
#include <vector>

#include "strpm/grid_io.hpp"
#include "strpm/preprocess.hpp"

namespace strpm {

/// Drifting-Gaussian storm field over a small grid; deterministic per seed.
struct StormSpec {
    size_t grid_h = 16;
    size_t grid_w = 16;
    double storm_rate = 0.02;     // spawn probability per step
    double amplitude_mm = 4.0;    // peak rain per step at a fresh storm center
    double sigma_cells = 3.0;
    double drift_cells = 0.5;     // speed per step; direction sampled per storm
    double decay_per_step = 0.9;  // storm amplitude retention per step
    uint64_t seed = 1;
};

/// Single linear reservoir: s_t = k*s_{t-1} + gain*rain_t,
/// level_t = base + seasonal + s_t + noise, with a slow sinusoidal baseflow
/// so the level carries variance that recent rain cannot explain. With the
/// seasonal term off, constant rain r settles at base + gain*r/(1-k).
struct ReservoirSpec {
    double k_decay = 0.9;
    double gain_cm_per_mm = 3.0;
    double base_level_cm = 150.0;
    double noise_sd_cm = 0.5;
    double seasonal_amp_cm = 120.0;
    double seasonal_period_steps = 4000.0;
};

std::vector<PrecipFrame> gen_storm_field(const StormSpec& spec, size_t n_steps);

LevelSeries linear_reservoir(const std::vector<double>& rain_mean, const ReservoirSpec& spec,
                             uint64_t seed);

/// Mean rain over a frame, NaN as 0 mm.
double catchment_mean(const PrecipFrame& frame);

struct SynthDataset {
    std::vector<PrecipFrame> frames;
    LevelSeries levels;
    SampleSet samples;
};

/// storm field -> catchment-mean -> reservoir -> windows. The level series
/// is the raw reservoir output; smoothing is the caller's preprocessing step.
SynthDataset gen_dataset(const StormSpec& storm, const ReservoirSpec& reservoir, size_t n_steps,
                         size_t L, size_t H, TargetMode mode);

}  // namespace strpm
