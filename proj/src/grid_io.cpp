#include "strpm/grid_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "strpm/errors.hpp"

namespace strpm {

namespace {

constexpr size_t kHeaderSize = 24;
constexpr char kMagic[4] = {'R', 'P', 'G', '1'};

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_i64(std::vector<uint8_t>& out, int64_t v) {
    const auto u = static_cast<uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(u >> (8 * i)));
}

void put_f32(std::vector<uint8_t>& out, float v) {
    put_u32(out, std::bit_cast<uint32_t>(v));
}

uint16_t get_u16(const uint8_t* p) {
    return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

uint32_t get_u32(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

int64_t get_i64(const uint8_t* p) {
    uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<uint64_t>(p[i]) << (8 * i);
    return static_cast<int64_t>(u);
}

float get_f32(const uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }

}  // namespace

void PrecipFrame::validate() const {
    require(values.size() == cells(), "InvariantViolation",
            "frame values length " + std::to_string(values.size()) + " != width*height " +
                std::to_string(cells()));
    require(cell_km > 0.0f, "InvariantViolation", "cell_km must be positive");
    for (float v : values) {
        if (std::isfinite(v) && v < 0.0f)
            fail("InvariantViolation", "negative precipitation value " + std::to_string(v));
    }
}

size_t PrecipFrame::missing_cells() const {
    size_t n = 0;
    for (float v : values)
        if (std::isnan(v)) ++n;
    return n;
}

bool PrecipFrame::operator==(const PrecipFrame& other) const {
    if (timestamp != other.timestamp || width != other.width || height != other.height)
        return false;
    if (std::bit_cast<uint32_t>(cell_km) != std::bit_cast<uint32_t>(other.cell_km)) return false;
    if (values.size() != other.values.size()) return false;
    for (size_t i = 0; i < values.size(); ++i) {
        // bitwise so NaN positions compare equal to themselves
        if (std::bit_cast<uint32_t>(values[i]) != std::bit_cast<uint32_t>(other.values[i]))
            return false;
    }
    return true;
}

std::vector<uint8_t> write_rpg(const PrecipFrame& frame) {
    frame.validate();
    std::vector<uint8_t> out;
    out.reserve(kHeaderSize + 4 * frame.cells());
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u16(out, frame.width);
    put_u16(out, frame.height);
    put_i64(out, frame.timestamp);
    put_f32(out, frame.cell_km);
    put_u32(out, 0);  // reserved
    const float qnan = std::numeric_limits<float>::quiet_NaN();
    for (float v : frame.values) put_f32(out, std::isnan(v) ? qnan : v);
    return out;
}

PrecipFrame parse_rpg(const std::vector<uint8_t>& bytes) {
    require(bytes.size() >= kHeaderSize, "TruncatedPayload",
            "need at least " + std::to_string(kHeaderSize) + " bytes, got " +
                std::to_string(bytes.size()));
    require(std::memcmp(bytes.data(), kMagic, 4) == 0, "BadMagic", "missing RPG1 magic");

    PrecipFrame frame;
    frame.width = get_u16(bytes.data() + 4);
    frame.height = get_u16(bytes.data() + 6);
    frame.timestamp = get_i64(bytes.data() + 8);
    frame.cell_km = get_f32(bytes.data() + 16);

    const size_t expected = kHeaderSize + 4 * frame.cells();
    require(bytes.size() == expected, "TruncatedPayload",
            "expected " + std::to_string(expected) + " bytes for " + std::to_string(frame.width) +
                "x" + std::to_string(frame.height) + ", got " + std::to_string(bytes.size()));

    frame.values.resize(frame.cells());
    for (size_t i = 0; i < frame.values.size(); ++i) {
        const float v = get_f32(bytes.data() + kHeaderSize + 4 * i);
        if (std::isfinite(v) && v < 0.0f)
            fail("NonFiniteNegative", "negative precipitation value at cell " + std::to_string(i));
        frame.values[i] = v;
    }
    require(frame.cell_km > 0.0f, "NonFiniteNegative", "cell_km must be positive");
    return frame;
}

LevelSeries read_level_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "MalformedRow", "empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    require(line == "timestamp,level_cm", "MalformedRow", "bad header: '" + line + "'");

    std::vector<int64_t> times;
    std::vector<double> levels;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        require(comma != std::string::npos, "MalformedRow",
                "line " + std::to_string(line_no) + ": no comma");
        int64_t t = 0;
        double level = 0.0;
        try {
            size_t used = 0;
            t = std::stoll(line.substr(0, comma), &used);
            if (used != comma) fail("MalformedRow", "trailing junk in timestamp");
            const std::string rest = line.substr(comma + 1);
            level = std::stod(rest, &used);
            if (used != rest.size()) fail("MalformedRow", "trailing junk in level");
        } catch (const Error&) {
            throw;
        } catch (const std::exception&) {
            fail("MalformedRow", "line " + std::to_string(line_no) + ": '" + line + "'");
        }
        if (!times.empty())
            require(t > times.back(), "UnsortedRows",
                    "line " + std::to_string(line_no) + ": timestamps must be strictly ascending");
        times.push_back(t);
        levels.push_back(level);
    }

    LevelSeries series;
    if (times.empty()) return series;
    series.start = times.front();
    if (times.size() == 1) {
        series.step_s = 1;
        series.values = {levels.front()};
        return series;
    }

    int64_t step = 0;
    for (size_t i = 1; i < times.size(); ++i) {
        const int64_t d = times[i] - times[i - 1];
        if (step == 0 || d < step) step = d;
    }
    series.step_s = step;

    const size_t n = static_cast<size_t>((times.back() - times.front()) / step) + 1;
    series.values.assign(n, std::numeric_limits<double>::quiet_NaN());
    for (size_t i = 0; i < times.size(); ++i) {
        const int64_t off = times[i] - series.start;
        require(off % step == 0, "InconsistentStep",
                "timestamp " + std::to_string(times[i]) + " is not on the " + std::to_string(step) +
                    "s grid");
        series.values[static_cast<size_t>(off / step)] = levels[i];
    }
    return series;
}

std::string write_level_csv(const LevelSeries& series) {
    require(series.step_s > 0 || series.values.empty(), "InvariantViolation",
            "step_s must be positive");
    std::ostringstream out;
    out << "timestamp,level_cm\n";
    out.precision(15);
    for (size_t i = 0; i < series.values.size(); ++i) {
        if (std::isnan(series.values[i])) continue;
        out << series.time_at(i) << ',' << series.values[i] << '\n';
    }
    return out.str();
}

std::vector<uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "IoError", "cannot open " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    return bytes;
}

void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), "IoError", "cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    require(out.good(), "IoError", "write failed for " + path);
}

std::string read_file_text(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "IoError", "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    require(out.good(), "IoError", "cannot open " + path + " for writing");
    out << text;
    require(out.good(), "IoError", "write failed for " + path);
}

}  // namespace strpm
