#include "strpm/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "strpm/errors.hpp"
#include "strpm/rng.hpp"

namespace strpm {

using tc::Tensor;

ParamCount param_count(const Conv2Plus1DSpec& spec) {
    ParamCount c;
    c.factorized = spec.h_k * spec.w_k * spec.c_in * spec.c_out + spec.t_k * spec.c_out * spec.c_out;
    c.full3d = spec.t_k * spec.h_k * spec.w_k * spec.c_in * spec.c_out;
    return c;
}

std::vector<Conv2Plus1DSpec> ForecastModelSpec::default_conv(size_t c1, size_t c2) {
    Conv2Plus1DSpec b0;
    b0.c_in = 1;
    b0.c_out = c1;
    Conv2Plus1DSpec b1;
    b1.c_in = c1;
    b1.c_out = c2;
    return {b0, b1};
}

void ForecastModelSpec::validate() const {
    require(lookback >= 1 && horizon >= 1, "InvariantViolation", "L and H must be >= 1");
    require(!lstm_hidden.empty(), "InvariantViolation", "lstm_hidden must be nonempty");
    require(!conv_blocks.empty(), "InvariantViolation", "need at least one conv block");
    size_t c = 1;
    for (const auto& b : conv_blocks) {
        require(b.t_k >= 1 && b.h_k >= 1 && b.w_k >= 1 && b.c_out >= 1, "InvariantViolation",
                "conv kernel extents and channels must be >= 1");
        require(b.c_in == c, "InvariantViolation", "conv block channel chain is broken");
        c = b.c_out;
    }
    require(seq_len() >= 1, "InvariantViolation", "temporal convolutions consume the sequence");
}

size_t ForecastModelSpec::seq_len() const {
    size_t t = lookback;
    for (const auto& b : conv_blocks) {
        if (b.temporal_padding == tc::Padding::kValid) {
            require(t >= b.t_k, "InvariantViolation", "lookback too short for temporal kernels");
            t = t - b.t_k + 1;
        }
    }
    return t;
}

Tensor& ModelParams::find(const std::string& name) {
    for (auto& t : tensors)
        if (t.name() == name) return t;
    fail("MissingCheckpoint", "no parameter named " + name);
}

const Tensor& ModelParams::find(const std::string& name) const {
    return const_cast<ModelParams*>(this)->find(name);
}

ModelParams ModelParams::clone() const {
    ModelParams out;
    out.spec = spec;
    out.input_scale = input_scale;
    for (const auto& t : tensors)
        out.tensors.push_back(Tensor::param(t.name(), t.shape(), t.value()));
    return out;
}

void ModelParams::set_all_zero() {
    for (auto& t : tensors) std::fill(t.value().begin(), t.value().end(), 0.0);
}

namespace {

std::vector<double> uniform_init(Rng& rng, size_t n, size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<size_t>(fan_in, 1)));
    std::vector<double> data(n);
    for (auto& v : data) v = rng.uniform(-bound, bound);
    return data;
}

struct FeatureDims {
    size_t h, w, flat;  // spatial extent and flattened width after the conv stack
};

FeatureDims conv_out_dims(const ForecastModelSpec& spec) {
    size_t h = spec.in_h, w = spec.in_w;
    size_t c = 1;
    for (const auto& b : spec.conv_blocks) {
        if (b.spatial_padding == tc::Padding::kValid) {
            require(h >= b.h_k && w >= b.w_k, "InvariantViolation",
                    "window too small for spatial kernels");
            h = h - b.h_k + 1;
            w = w - b.w_k + 1;
        }
        c = b.c_out;
        if (spec.pool > 1) {
            h = std::max<size_t>(h / spec.pool, 1);
            w = std::max<size_t>(w / spec.pool, 1);
        }
    }
    return {h, w, c * h * w};
}

}  // namespace

ModelParams init_params(const ForecastModelSpec& spec, uint64_t seed) {
    spec.validate();
    ModelParams params;
    params.spec = spec;
    Rng rng = Rng::derive(seed, 0x706172616d);  // "param" stream

    for (size_t i = 0; i < spec.conv_blocks.size(); ++i) {
        const auto& b = spec.conv_blocks[i];
        const std::string prefix = "conv" + std::to_string(i);
        const size_t sfan = b.c_in * b.h_k * b.w_k;
        params.tensors.push_back(Tensor::param(
            prefix + ".spatial_w", {b.c_out, b.c_in, b.h_k, b.w_k},
            uniform_init(rng, b.c_out * b.c_in * b.h_k * b.w_k, sfan)));
        params.tensors.push_back(
            Tensor::param(prefix + ".spatial_b", {b.c_out}, std::vector<double>(b.c_out, 0.0)));
        const size_t tfan = b.c_out * b.t_k;
        params.tensors.push_back(Tensor::param(prefix + ".temporal_w", {b.c_out, b.c_out, b.t_k},
                                               uniform_init(rng, b.c_out * b.c_out * b.t_k, tfan)));
        params.tensors.push_back(
            Tensor::param(prefix + ".temporal_b", {b.c_out}, std::vector<double>(b.c_out, 0.0)));
    }

    size_t feat = conv_out_dims(spec).flat;
    for (size_t j = 0; j < spec.lstm_hidden.size(); ++j) {
        const size_t hidden = spec.lstm_hidden[j];
        const std::string prefix = "lstm" + std::to_string(j);
        params.tensors.push_back(Tensor::param(prefix + ".wx", {feat, 4 * hidden},
                                               uniform_init(rng, feat * 4 * hidden, feat)));
        params.tensors.push_back(Tensor::param(prefix + ".wh", {hidden, 4 * hidden},
                                               uniform_init(rng, hidden * 4 * hidden, hidden)));
        // gate order [i, f, g, o]; forget biases start at 1
        std::vector<double> bias(4 * hidden, 0.0);
        std::fill(bias.begin() + static_cast<ptrdiff_t>(hidden),
                  bias.begin() + static_cast<ptrdiff_t>(2 * hidden), 1.0);
        params.tensors.push_back(Tensor::param(prefix + ".b", {4 * hidden}, std::move(bias)));
        feat = hidden;
    }

    params.tensors.push_back(
        Tensor::param("head.w", {feat, 1}, uniform_init(rng, feat, feat)));
    params.tensors.push_back(Tensor::param("head.b", {1}, {0.0}));
    return params;
}

tc::Tensor forward_net(const ModelParams& params, const Tensor& input) {
    const auto& spec = params.spec;
    require(input.shape().size() == 5, "ShapeMismatch", "input must be [B,L,1,H,W]");
    require(input.shape()[1] == spec.lookback && input.shape()[2] == 1 &&
                input.shape()[3] == spec.in_h && input.shape()[4] == spec.in_w,
            "ShapeMismatch", "input does not match the architecture");
    const size_t batch = input.shape()[0];

    Tensor x = tc::scale(input, 1.0 / params.input_scale);
    for (size_t i = 0; i < spec.conv_blocks.size(); ++i) {
        const auto& b = spec.conv_blocks[i];
        const std::string prefix = "conv" + std::to_string(i);
        x = tc::conv2d_spatial(x, params.find(prefix + ".spatial_w"),
                               params.find(prefix + ".spatial_b"), b.spatial_padding);
        x = tc::conv1d_temporal(x, params.find(prefix + ".temporal_w"),
                                params.find(prefix + ".temporal_b"), b.temporal_padding);
        x = tc::tanh_t(x);
        if (spec.pool > 1 && x.shape()[3] >= spec.pool && x.shape()[4] >= spec.pool)
            x = tc::avg_pool2d(x, spec.pool);
    }

    Tensor seq = tc::flatten_time(x);
    for (size_t j = 0; j < spec.lstm_hidden.size(); ++j) {
        const size_t hidden = spec.lstm_hidden[j];
        const std::string prefix = "lstm" + std::to_string(j);
        const Tensor& wx = params.find(prefix + ".wx");
        const Tensor& wh = params.find(prefix + ".wh");
        const Tensor& bias = params.find(prefix + ".b");
        Tensor h = Tensor::zeros({batch, hidden});
        Tensor c = Tensor::zeros({batch, hidden});
        const size_t steps = seq.shape()[1];
        std::vector<Tensor> outputs;
        outputs.reserve(steps);
        for (size_t t = 0; t < steps; ++t) {
            Tensor xt = tc::slice_time(seq, t);
            Tensor pre = tc::add_bias(tc::add(tc::matmul(xt, wx), tc::matmul(h, wh)), bias);
            Tensor ig = tc::sigmoid_t(tc::slice_cols(pre, 0, hidden));
            Tensor fg = tc::sigmoid_t(tc::slice_cols(pre, hidden, hidden));
            Tensor gg = tc::tanh_t(tc::slice_cols(pre, 2 * hidden, hidden));
            Tensor og = tc::sigmoid_t(tc::slice_cols(pre, 3 * hidden, hidden));
            c = tc::add(tc::mul(fg, c), tc::mul(ig, gg));
            h = tc::mul(og, tc::tanh_t(c));
            outputs.push_back(h);
        }
        if (j + 1 < spec.lstm_hidden.size())
            seq = tc::stack_time(outputs);
        else
            seq = outputs.back();  // [B, hidden]
    }

    Tensor out = tc::linear(seq, params.find("head.w"), params.find("head.b"));
    return tc::reshape(out, {batch});
}

namespace {

Tensor batch_tensor(const SampleSet& set, size_t start, size_t count) {
    const size_t len = set.sample_len();
    std::vector<double> data(set.inputs.begin() + static_cast<ptrdiff_t>(start * len),
                             set.inputs.begin() + static_cast<ptrdiff_t>((start + count) * len));
    return Tensor::from({count, set.lookback_steps, 1, set.win_h, set.win_w}, std::move(data));
}

Tensor gather_batch(const SampleSet& set, const std::vector<size_t>& idx, size_t start,
                    size_t count, std::vector<double>& targets_out) {
    const size_t len = set.sample_len();
    std::vector<double> data;
    data.reserve(count * len);
    targets_out.clear();
    for (size_t i = start; i < start + count; ++i) {
        const double* src = set.input_at(idx[i]);
        data.insert(data.end(), src, src + len);
        targets_out.push_back(set.targets[idx[i]]);
    }
    return Tensor::from({count, set.lookback_steps, 1, set.win_h, set.win_w}, std::move(data));
}

/// Histogram-based percentile of the nonnegative training inputs; exact
/// enough for a normalization constant and cheap on large sets.
double input_percentile(const SampleSet& set, double q) {
    double maxv = 0.0;
    for (double v : set.inputs)
        if (std::isfinite(v) && v > maxv) maxv = v;
    if (maxv <= 0.0) return 0.0;
    constexpr size_t kBins = 4096;
    std::vector<size_t> hist(kBins, 0);
    for (double v : set.inputs) {
        if (!std::isfinite(v)) continue;
        size_t bin = static_cast<size_t>(v / maxv * (kBins - 1));
        ++hist[std::min(bin, kBins - 1)];
    }
    size_t total = 0;
    for (size_t h : hist) total += h;
    const auto want = static_cast<size_t>(q * static_cast<double>(total));
    size_t seen = 0;
    for (size_t b = 0; b < kBins; ++b) {
        seen += hist[b];
        if (seen >= want) return (static_cast<double>(b) + 1.0) / (kBins - 1) * maxv;
    }
    return maxv;
}

struct EvalStats {
    double mse = 0.0;
    double mae = 0.0;
};

EvalStats eval_set(const ModelParams& params, const SampleSet& set, size_t batch) {
    EvalStats stats;
    if (set.size() == 0) return stats;
    const auto preds = predict_net(params, set, batch);
    for (size_t i = 0; i < preds.size(); ++i) {
        const double d = preds[i] - set.targets[i];
        stats.mse += d * d;
        stats.mae += std::abs(d);
    }
    stats.mse /= static_cast<double>(preds.size());
    stats.mae /= static_cast<double>(preds.size());
    return stats;
}

}  // namespace

std::vector<double> predict_net(const ModelParams& params, const SampleSet& set, size_t batch) {
    std::vector<double> out;
    out.reserve(set.size());
    for (size_t start = 0; start < set.size(); start += batch) {
        const size_t count = std::min(batch, set.size() - start);
        Tensor pred = forward_net(params, batch_tensor(set, start, count));
        out.insert(out.end(), pred.value().begin(), pred.value().end());
    }
    return out;
}

std::vector<double> predict_levels(const ModelParams& params, const SampleSet& set, size_t batch) {
    std::vector<double> out = predict_net(params, set, batch);
    if (params.spec.mode == TargetMode::kResidual)
        for (size_t i = 0; i < out.size(); ++i) out[i] = set.anchor_levels[i] + out[i];
    return out;
}

double strpm_forward(const ModelParams& params, const double* input) {
    const auto& s = params.spec;
    std::vector<double> data(input, input + s.lookback * s.in_h * s.in_w);
    Tensor x = Tensor::from({1, s.lookback, 1, s.in_h, s.in_w}, std::move(data));
    return forward_net(params, x).value()[0];
}

Forecast strpmr_forward(const ModelParams& params, const double* input, double anchor,
                        int64_t issue_time) {
    require(std::isfinite(anchor), "NonFiniteAnchor", "anchor level must be finite");
    Forecast f;
    f.issue_time = issue_time;
    f.horizon_steps = params.spec.horizon;
    f.anchor_level_cm = anchor;
    f.predicted_residual_cm = strpm_forward(params, input);  // raw net output = residual
    f.predicted_level_cm = anchor + *f.predicted_residual_cm;
    return f;
}

Forecast persistence_forecast(double anchor, size_t horizon_steps, int64_t issue_time) {
    require(std::isfinite(anchor), "NonFiniteAnchor", "anchor level must be finite");
    Forecast f;
    f.issue_time = issue_time;
    f.horizon_steps = horizon_steps;
    f.anchor_level_cm = anchor;
    f.predicted_level_cm = anchor;
    return f;
}

TrainResult train(const ForecastModelSpec& spec, const SampleSet& train_set,
                  const SampleSet& val_set, const TrainOptions& options) {
    require(train_set.size() > 0, "EmptyDataset", "training set is empty");
    spec.validate();

    ModelParams params = init_params(spec, options.seed);
    params.input_scale = std::max(1.0, input_percentile(train_set, 0.99));

    tc::AdamState adam;
    adam.lr = options.lr;
    adam.beta1 = options.beta1;
    adam.beta2 = options.beta2;
    adam.eps = options.eps;
    adam.init(params.tensors);

    std::vector<size_t> idx(train_set.size());
    std::iota(idx.begin(), idx.end(), 0);

    TrainResult result;
    result.params = params.clone();
    double best_val = std::numeric_limits<double>::infinity();

    std::vector<double> batch_targets;
    for (size_t epoch = 0; epoch < options.epochs; ++epoch) {
        Rng shuffle_rng = Rng::derive(options.seed, 0x65706f63 + epoch);
        shuffle_rng.shuffle(idx);

        double mse_acc = 0.0, mae_acc = 0.0;
        size_t seen = 0;
        for (size_t start = 0; start < idx.size(); start += options.batch) {
            const size_t count = std::min(options.batch, idx.size() - start);
            Tensor input = gather_batch(train_set, idx, start, count, batch_targets);
            Tensor target = Tensor::from({count}, batch_targets);
            Tensor pred = forward_net(params, input);
            Tensor loss = tc::mse_loss(pred, target);
            Tensor abs_err = tc::mae(pred, target);
            require(std::isfinite(loss.item()), "DivergedLoss",
                    "non-finite loss at epoch " + std::to_string(epoch) + ", batch offset " +
                        std::to_string(start));
            tc::backward(loss);
            tc::adam_step(params.tensors, adam);
            mse_acc += loss.item() * static_cast<double>(count);
            mae_acc += abs_err.item() * static_cast<double>(count);
            seen += count;
        }

        EpochStats stats;
        stats.train_mse = mse_acc / static_cast<double>(seen);
        stats.train_mae = mae_acc / static_cast<double>(seen);
        const EvalStats val = eval_set(params, val_set, options.batch);
        stats.val_mse = val.mse;
        stats.val_mae = val.mae;
        result.curve.push_back(stats);

        const double select = val_set.size() > 0 ? stats.val_mse : stats.train_mse;
        if (select < best_val) {
            best_val = select;
            result.params = params.clone();
            result.best_epoch = epoch;
        }
    }
    return result;
}

}  // namespace strpm
