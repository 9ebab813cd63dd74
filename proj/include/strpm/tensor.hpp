#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace strpm::tc {

using Shape = std::vector<size_t>;

size_t numel(const Shape& shape);

/// One node of the computation tape: the value, the accumulated gradient and
/// the closure that pushes gradients to the parents. Tapes are rebuilt every
/// forward pass; only leaf parameters survive across steps.
struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    std::string name;  // nonempty for parameters
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

/// Cheap handle to a tape node; copying shares the node.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor param(std::string name, Shape shape, std::vector<double> data);
    static Tensor scalar(double v);

    const Shape& shape() const { return node_->shape; }
    size_t size() const { return node_->value.size(); }
    const std::vector<double>& value() const { return node_->value; }
    std::vector<double>& value() { return node_->value; }
    const std::vector<double>& grad() const { return node_->grad; }
    bool requires_grad() const { return node_->requires_grad; }
    const std::string& name() const { return node_->name; }
    double item() const;

    bool defined() const { return node_ != nullptr; }
    std::shared_ptr<Node> node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

enum class Padding { kValid, kSame };

// Elementwise / dense ops. Every op records a tape node.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor tanh_t(const Tensor& a);
Tensor sigmoid_t(const Tensor& a);
Tensor matmul(const Tensor& a, const Tensor& b);
/// rows [B,F] + bias [F]
Tensor add_bias(const Tensor& x, const Tensor& bias);
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor reshape(const Tensor& a, Shape shape);
Tensor sum(const Tensor& a);

// Sequence / image ops over [B, T, C, H, W] activations.
Tensor conv2d_spatial(const Tensor& x, const Tensor& kernel, const Tensor& bias, Padding padding);
Tensor conv1d_temporal(const Tensor& x, const Tensor& kernel, const Tensor& bias, Padding padding);
Tensor avg_pool2d(const Tensor& x, size_t factor);
/// [B,T,C,H,W] -> [B,T,C*H*W]
Tensor flatten_time(const Tensor& x);
/// [B,T,F] -> [B,F] at timestep t
Tensor slice_time(const Tensor& x, size_t t);
/// [B,F] -> [B,len] taking columns [start, start+len)
Tensor slice_cols(const Tensor& x, size_t start, size_t len);
/// T tensors of [B,F] -> [B,T,F]
Tensor stack_time(const std::vector<Tensor>& steps);

Tensor mse_loss(const Tensor& pred, const Tensor& target);
Tensor mae(const Tensor& pred, const Tensor& target);

/// Reverse-mode sweep from a scalar loss. Zeroes the gradients of every
/// reachable node first, so parameter grads are per-call, not accumulated.
void backward(const Tensor& loss);

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int64_t step_count = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;

    void init(const std::vector<Tensor>& params);
};

/// One bias-corrected Adam update, reading gradients off the parameter nodes.
void adam_step(std::vector<Tensor>& params, AdamState& state);

/// Central-difference check of d(f)/d(params). Returns the max over all
/// parameter elements of |analytic - numeric| / max(1, |analytic| + |numeric|).
double grad_check(const std::function<Tensor()>& f, std::vector<Tensor>& params,
                  double eps = 1e-5);

}  // namespace strpm::tc
