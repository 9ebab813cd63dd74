#include "strpm/checkpoint.hpp"

#include <bit>
#include <cstring>

#include <json.hpp>

#include "strpm/errors.hpp"
#include "strpm/grid_io.hpp"

namespace strpm {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'S', 'T', 'C', 'K'};
constexpr uint32_t kVersion = 1;

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<uint8_t>& out, double v) { put_u64(out, std::bit_cast<uint64_t>(v)); }

struct Reader {
    const std::vector<uint8_t>& bytes;
    size_t pos = 0;

    void need(size_t n) const {
        require(pos + n <= bytes.size(), "TruncatedPayload", "checkpoint ends early");
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(bytes[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str(size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes.data() + pos), n);
        pos += n;
        return s;
    }
};

const char* padding_name(tc::Padding p) { return p == tc::Padding::kSame ? "same" : "valid"; }

tc::Padding padding_from(const std::string& s) {
    if (s == "same") return tc::Padding::kSame;
    if (s == "valid") return tc::Padding::kValid;
    fail("BadMagic", "unknown padding '" + s + "' in checkpoint descriptor");
}

json describe(const ForecastModelSpec& spec) {
    json conv = json::array();
    for (const auto& b : spec.conv_blocks) {
        conv.push_back({{"t_k", b.t_k},
                        {"h_k", b.h_k},
                        {"w_k", b.w_k},
                        {"c_in", b.c_in},
                        {"c_out", b.c_out},
                        {"spatial_padding", padding_name(b.spatial_padding)},
                        {"temporal_padding", padding_name(b.temporal_padding)}});
    }
    return json{{"lookback", spec.lookback},
                {"horizon", spec.horizon},
                {"in_h", spec.in_h},
                {"in_w", spec.in_w},
                {"lstm_hidden", spec.lstm_hidden},
                {"pool", spec.pool},
                {"mode", spec.mode == TargetMode::kResidual ? "residual" : "absolute"},
                {"conv_blocks", conv}};
}

ForecastModelSpec spec_from(const json& j) {
    ForecastModelSpec spec;
    spec.lookback = j.at("lookback").get<size_t>();
    spec.horizon = j.at("horizon").get<size_t>();
    spec.in_h = j.at("in_h").get<size_t>();
    spec.in_w = j.at("in_w").get<size_t>();
    spec.lstm_hidden = j.at("lstm_hidden").get<std::vector<size_t>>();
    spec.pool = j.at("pool").get<size_t>();
    spec.mode =
        j.at("mode").get<std::string>() == "residual" ? TargetMode::kResidual : TargetMode::kAbsolute;
    spec.conv_blocks.clear();
    for (const auto& b : j.at("conv_blocks")) {
        Conv2Plus1DSpec c;
        c.t_k = b.at("t_k").get<size_t>();
        c.h_k = b.at("h_k").get<size_t>();
        c.w_k = b.at("w_k").get<size_t>();
        c.c_in = b.at("c_in").get<size_t>();
        c.c_out = b.at("c_out").get<size_t>();
        c.spatial_padding = padding_from(b.at("spatial_padding").get<std::string>());
        c.temporal_padding = padding_from(b.at("temporal_padding").get<std::string>());
        spec.conv_blocks.push_back(c);
    }
    return spec;
}

}  // namespace

std::vector<uint8_t> serialize_params(const ModelParams& params) {
    std::vector<uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32(out, kVersion);
    const std::string descriptor = describe(params.spec).dump();
    put_u64(out, descriptor.size());
    out.insert(out.end(), descriptor.begin(), descriptor.end());
    put_f64(out, params.input_scale);
    put_u32(out, static_cast<uint32_t>(params.tensors.size()));
    for (const auto& t : params.tensors) {
        put_u32(out, static_cast<uint32_t>(t.name().size()));
        out.insert(out.end(), t.name().begin(), t.name().end());
        put_u32(out, static_cast<uint32_t>(t.shape().size()));
        for (size_t d : t.shape()) put_u64(out, d);
        for (double v : t.value()) put_f64(out, v);
    }
    return out;
}

ModelParams deserialize_params(const std::vector<uint8_t>& bytes) {
    Reader r{bytes};
    require(r.str(4) == std::string(kMagic, 4), "BadMagic", "not a checkpoint file");
    require(r.u32() == kVersion, "BadMagic", "unsupported checkpoint version");

    ModelParams params;
    const size_t desc_len = r.u64();
    const json descriptor = json::parse(r.str(desc_len));
    params.spec = spec_from(descriptor);
    params.input_scale = r.f64();

    const uint32_t count = r.u32();
    for (uint32_t i = 0; i < count; ++i) {
        const std::string name = r.str(r.u32());
        const uint32_t rank = r.u32();
        tc::Shape shape(rank);
        for (auto& d : shape) d = r.u64();
        std::vector<double> data(tc::numel(shape));
        for (auto& v : data) v = r.f64();
        params.tensors.push_back(tc::Tensor::param(name, std::move(shape), std::move(data)));
    }
    require(r.pos == bytes.size(), "TruncatedPayload", "trailing bytes after checkpoint payload");
    return params;
}

void save_checkpoint(const std::string& path, const ModelParams& params) {
    write_file_bytes(path, serialize_params(params));
}

ModelParams load_checkpoint(const std::string& path) {
    return deserialize_params(read_file_bytes(path));
}

}  // namespace strpm
