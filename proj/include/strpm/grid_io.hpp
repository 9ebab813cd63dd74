#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace strpm {

/// One timestamped precipitation grid, mm per interval, row-major with the
/// north row first. Missing cells are quiet NaN.
struct PrecipFrame {
    int64_t timestamp = 0;  // UTC epoch seconds
    uint16_t width = 0;
    uint16_t height = 0;
    float cell_km = 1.0f;
    std::vector<float> values;  // width * height, row-major

    size_t cells() const { return static_cast<size_t>(width) * height; }
    float at(size_t row, size_t col) const { return values[row * width + col]; }
    float& at(size_t row, size_t col) { return values[row * width + col]; }

    /// Throws InvariantViolation when the frame is malformed.
    void validate() const;
    size_t missing_cells() const;

    bool operator==(const PrecipFrame& other) const;
};

/// Affine north-up mapping from the grid's (0,0) cell center to degrees.
struct GridMeta {
    double origin_lat = 0.0;
    double origin_lon = 0.0;
    double lat_step = 0.0;  // degrees per row, typically negative (north first)
    double lon_step = 0.0;  // degrees per column
};

/// Regularly sampled water-level series in cm; gaps are quiet NaN.
struct LevelSeries {
    std::string sensor_id;
    int64_t start = 0;   // UTC epoch seconds of values[0]
    int64_t step_s = 0;  // seconds between samples
    std::vector<double> values;

    int64_t time_at(size_t i) const { return start + static_cast<int64_t>(i) * step_s; }
};

// RPG1 binary codec. Layout (little-endian):
//   0..3   magic "RPG1"
//   4..5   width  (u16)
//   6..7   height (u16)
//   8..15  timestamp (i64 epoch seconds)
//   16..19 cell_km (f32)
//   20..23 reserved, zero
//   24..   width*height f32 values, row-major, north row first; missing = qNaN
std::vector<uint8_t> write_rpg(const PrecipFrame& frame);
PrecipFrame parse_rpg(const std::vector<uint8_t>& bytes);

// Level CSV codec: header "timestamp,level_cm", integer epoch seconds,
// decimal cm, rows strictly ascending in time. Reading infers step_s as the
// minimal positive delta and NaN-fills gaps on that grid; writing omits NaN
// rows.
LevelSeries read_level_csv(const std::string& text);
std::string write_level_csv(const LevelSeries& series);

// File helpers used by the CLI and the synthetic generator.
std::vector<uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes);
std::string read_file_text(const std::string& path);
void write_file_text(const std::string& path, const std::string& text);

}  // namespace strpm
