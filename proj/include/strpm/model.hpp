#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "strpm/preprocess.hpp"
#include "strpm/tensor.hpp"

namespace strpm {

/// Factorized spatiotemporal convolution: a (1, h_k, w_k) spatial pass with
/// c_in -> c_out channels followed by a (t_k, 1, 1) temporal pass with
/// c_out -> c_out channels.
struct Conv2Plus1DSpec {
    size_t t_k = 3;
    size_t h_k = 3;
    size_t w_k = 3;
    size_t c_in = 1;
    size_t c_out = 1;
    tc::Padding spatial_padding = tc::Padding::kSame;
    tc::Padding temporal_padding = tc::Padding::kValid;
};

struct ParamCount {
    size_t factorized = 0;  // spatial + temporal weights, biases excluded
    size_t full3d = 0;      // the matching full 3D kernel for comparison
};

ParamCount param_count(const Conv2Plus1DSpec& spec);

/// Architecture of one forecaster: conv front-end, LSTM stack, linear head.
struct ForecastModelSpec {
    size_t lookback = 32;
    size_t horizon = 8;
    size_t in_h = 16;
    size_t in_w = 16;
    std::vector<size_t> lstm_hidden{128, 64, 32, 8};
    std::vector<Conv2Plus1DSpec> conv_blocks;  // filled by with_default_conv
    size_t pool = 2;  // spatial average-pool factor after each conv block
    TargetMode mode = TargetMode::kResidual;

    /// Default front-end: two 3x3x3 blocks, channels 1 -> c1 -> c2.
    static std::vector<Conv2Plus1DSpec> default_conv(size_t c1 = 8, size_t c2 = 16);
    void validate() const;
    /// Sequence length after the temporal 'valid' convolutions.
    size_t seq_len() const;
};

/// All trainable tensors plus the input normalization constant; what a
/// checkpoint stores.
struct ModelParams {
    ForecastModelSpec spec;
    double input_scale = 1.0;
    std::vector<tc::Tensor> tensors;

    tc::Tensor& find(const std::string& name);
    const tc::Tensor& find(const std::string& name) const;
    ModelParams clone() const;
    void set_all_zero();
};

/// Seeded uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init; LSTM forget-gate
/// biases start at 1, every other bias at 0.
ModelParams init_params(const ForecastModelSpec& spec, uint64_t seed);

/// Network output for a batch: predicted level (absolute mode) or predicted
/// residual (residual mode), in cm. Input is [B, L, 1, H, W] raw mm.
tc::Tensor forward_net(const ModelParams& params, const tc::Tensor& input);

/// Raw network outputs over a sample set, evaluated in batches.
std::vector<double> predict_net(const ModelParams& params, const SampleSet& set,
                                size_t batch = 256);
/// Predicted levels: network output, plus the anchor in residual mode.
std::vector<double> predict_levels(const ModelParams& params, const SampleSet& set,
                                   size_t batch = 256);

struct Forecast {
    int64_t issue_time = 0;
    size_t horizon_steps = 0;
    double predicted_level_cm = 0.0;
    std::optional<double> predicted_residual_cm;
    double anchor_level_cm = 0.0;
};

/// Absolute-mode forecaster: the network output is the level itself.
double strpm_forward(const ModelParams& params, const double* input);
/// Residual-mode forecaster: level = anchor + predicted residual.
Forecast strpmr_forward(const ModelParams& params, const double* input, double anchor,
                        int64_t issue_time);
/// The no-change reference: forecast equals the level at issue time.
Forecast persistence_forecast(double anchor, size_t horizon_steps, int64_t issue_time = 0);

struct TrainOptions {
    size_t epochs = 50;
    size_t batch = 256;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    uint64_t seed = 1;
};

struct EpochStats {
    double train_mse = 0.0;
    double train_mae = 0.0;
    double val_mse = 0.0;
    double val_mae = 0.0;
};

struct TrainResult {
    ModelParams params;  // the lowest-validation-MSE epoch
    std::vector<EpochStats> curve;
    size_t best_epoch = 0;
};

/// Minimize MSE with Adam over shuffled minibatches; returns the parameters
/// of the best validation epoch together with the per-epoch loss curve.
TrainResult train(const ForecastModelSpec& spec, const SampleSet& train_set,
                  const SampleSet& val_set, const TrainOptions& options);

}  // namespace strpm
