#include "strpm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "strpm/errors.hpp"

namespace strpm::tc {

size_t numel(const Shape& shape) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return n;
}

namespace {

std::shared_ptr<Node> make_node(Shape shape, std::vector<Tensor> parents) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value.assign(numel(node->shape), 0.0);
    for (const auto& p : parents) {
        node->parents.push_back(p.node());
        node->requires_grad = node->requires_grad || p.node()->requires_grad;
    }
    return node;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    require(a.shape() == b.shape(), "ShapeMismatch", std::string(op) + ": operand shapes differ");
}

// Dims of a [B,T,C,H,W] activation.
struct Dims5 {
    size_t b, t, c, h, w;
};

Dims5 dims5(const Tensor& x, const char* op) {
    require(x.shape().size() == 5, "ShapeMismatch",
            std::string(op) + ": expected a [B,T,C,H,W] tensor");
    const auto& s = x.shape();
    return {s[0], s[1], s[2], s[3], s[4]};
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value.assign(numel(node->shape), 0.0);
    node->requires_grad = requires_grad;
    return Tensor(node);
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
    require(data.size() == numel(shape), "ShapeMismatch", "data length does not match shape");
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(node);
}

Tensor Tensor::param(std::string name, Shape shape, std::vector<double> data) {
    Tensor t = from(std::move(shape), std::move(data), true);
    t.node()->name = std::move(name);
    return t;
}

Tensor Tensor::scalar(double v) { return from({1}, {v}); }

double Tensor::item() const {
    require(size() == 1, "ShapeMismatch", "item() needs a scalar tensor");
    return node_->value[0];
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    auto node = make_node(a.shape(), {a, b});
    for (size_t i = 0; i < node->value.size(); ++i)
        node->value[i] = a.value()[i] + b.value()[i];
    node->backward_fn = [](Node& self) {
        for (auto& p : self.parents) {
            if (!p->requires_grad) continue;
            p->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
        }
    };
    return Tensor(node);
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    auto node = make_node(a.shape(), {a, b});
    for (size_t i = 0; i < node->value.size(); ++i)
        node->value[i] = a.value()[i] - b.value()[i];
    node->backward_fn = [](Node& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] -= self.grad[i];
        }
    };
    return Tensor(node);
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    auto node = make_node(a.shape(), {a, b});
    for (size_t i = 0; i < node->value.size(); ++i)
        node->value[i] = a.value()[i] * b.value()[i];
    node->backward_fn = [](Node& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i)
                pa->grad[i] += self.grad[i] * pb->value[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i)
                pb->grad[i] += self.grad[i] * pa->value[i];
        }
    };
    return Tensor(node);
}

Tensor scale(const Tensor& a, double s) {
    auto node = make_node(a.shape(), {a});
    for (size_t i = 0; i < node->value.size(); ++i) node->value[i] = a.value()[i] * s;
    node->backward_fn = [s](Node& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i] * s;
    };
    return Tensor(node);
}

Tensor tanh_t(const Tensor& a) {
    auto node = make_node(a.shape(), {a});
    for (size_t i = 0; i < node->value.size(); ++i) node->value[i] = std::tanh(a.value()[i]);
    node->backward_fn = [](Node& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) {
            const double y = self.value[i];
            p->grad[i] += self.grad[i] * (1.0 - y * y);
        }
    };
    return Tensor(node);
}

Tensor sigmoid_t(const Tensor& a) {
    auto node = make_node(a.shape(), {a});
    for (size_t i = 0; i < node->value.size(); ++i)
        node->value[i] = 1.0 / (1.0 + std::exp(-a.value()[i]));
    node->backward_fn = [](Node& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) {
            const double y = self.value[i];
            p->grad[i] += self.grad[i] * y * (1.0 - y);
        }
    };
    return Tensor(node);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require(a.shape().size() == 2 && b.shape().size() == 2, "ShapeMismatch",
            "matmul needs rank-2 operands");
    const size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    require(b.shape()[0] == k, "ShapeMismatch", "matmul inner dimensions differ");
    auto node = make_node({m, n}, {a, b});
    const double* av = a.value().data();
    const double* bv = b.value().data();
    double* cv = node->value.data();
    for (size_t i = 0; i < m; ++i) {
        double* crow = cv + i * n;
        for (size_t kk = 0; kk < k; ++kk) {
            const double aik = av[i * k + kk];
            if (aik == 0.0) continue;
            const double* brow = bv + kk * n;
            for (size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
    node->backward_fn = [m, k, n](Node& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        const double* g = self.grad.data();
        if (pa->requires_grad) {
            pa->ensure_grad();
            const double* bv = pb->value.data();
            double* ga = pa->grad.data();
            // dA = dC * B^T
            for (size_t i = 0; i < m; ++i)
                for (size_t kk = 0; kk < k; ++kk) {
                    const double* grow = g + i * n;
                    const double* brow = bv + kk * n;
                    double acc = 0.0;
                    for (size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    ga[i * k + kk] += acc;
                }
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            const double* av = pa->value.data();
            double* gb = pb->grad.data();
            // dB = A^T * dC
            for (size_t i = 0; i < m; ++i) {
                const double* grow = g + i * n;
                for (size_t kk = 0; kk < k; ++kk) {
                    const double aik = av[i * k + kk];
                    if (aik == 0.0) continue;
                    double* brow = gb + kk * n;
                    for (size_t j = 0; j < n; ++j) brow[j] += aik * grow[j];
                }
            }
        }
    };
    return Tensor(node);
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
    require(x.shape().size() == 2 && bias.shape().size() == 1, "ShapeMismatch",
            "add_bias expects [B,F] rows and [F] bias");
    const size_t rows = x.shape()[0], cols = x.shape()[1];
    require(bias.shape()[0] == cols, "ShapeMismatch", "bias width mismatch");
    auto node = make_node(x.shape(), {x, bias});
    for (size_t i = 0; i < rows; ++i)
        for (size_t j = 0; j < cols; ++j)
            node->value[i * cols + j] = x.value()[i * cols + j] + bias.value()[j];
    node->backward_fn = [rows, cols](Node& self) {
        auto& px = self.parents[0];
        auto& pb = self.parents[1];
        if (px->requires_grad) {
            px->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) px->grad[i] += self.grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (size_t i = 0; i < rows; ++i)
                for (size_t j = 0; j < cols; ++j) pb->grad[j] += self.grad[i * cols + j];
        }
    };
    return Tensor(node);
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    return add_bias(matmul(x, weight), bias);
}

Tensor reshape(const Tensor& a, Shape shape) {
    require(numel(shape) == a.size(), "ShapeMismatch", "reshape changes element count");
    auto node = make_node(std::move(shape), {a});
    node->value = a.value();
    node->backward_fn = [](Node& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    };
    return Tensor(node);
}

Tensor sum(const Tensor& a) {
    auto node = make_node({1}, {a});
    double acc = 0.0;
    for (double v : a.value()) acc += v;
    node->value[0] = acc;
    node->backward_fn = [](Node& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += self.grad[0];
    };
    return Tensor(node);
}

Tensor conv2d_spatial(const Tensor& x, const Tensor& kernel, const Tensor& bias,
                      Padding padding) {
    const Dims5 d = dims5(x, "conv2d_spatial");
    require(kernel.shape().size() == 4, "ShapeMismatch", "spatial kernel must be [Co,Ci,kh,kw]");
    const size_t co = kernel.shape()[0], ci = kernel.shape()[1];
    const size_t kh = kernel.shape()[2], kw = kernel.shape()[3];
    require(ci == d.c, "ShapeMismatch", "spatial kernel channel mismatch");
    require(bias.shape() == Shape{co}, "ShapeMismatch", "spatial bias must be [Co]");
    size_t pad_h = 0, pad_w = 0;
    if (padding == Padding::kSame) {
        require(kh % 2 == 1 && kw % 2 == 1, "ShapeMismatch", "same padding needs odd kernels");
        pad_h = (kh - 1) / 2;
        pad_w = (kw - 1) / 2;
    }
    require(d.h + 2 * pad_h >= kh && d.w + 2 * pad_w >= kw, "ShapeMismatch",
            "input smaller than spatial kernel");
    const size_t oh = d.h + 2 * pad_h - kh + 1;
    const size_t ow = d.w + 2 * pad_w - kw + 1;

    auto node = make_node({d.b, d.t, co, oh, ow}, {x, kernel, bias});
    const double* xv = x.value().data();
    const double* kv = kernel.value().data();
    const double* bv = bias.value().data();
    double* ov = node->value.data();
    const size_t frames = d.b * d.t;
    for (size_t f = 0; f < frames; ++f) {
        const double* xf = xv + f * d.c * d.h * d.w;
        double* of = ov + f * co * oh * ow;
        for (size_t o = 0; o < co; ++o) {
            const double* ko = kv + o * ci * kh * kw;
            for (size_t oy = 0; oy < oh; ++oy)
                for (size_t ox = 0; ox < ow; ++ox) {
                    double acc = bv[o];
                    for (size_t c = 0; c < ci; ++c)
                        for (size_t ky = 0; ky < kh; ++ky) {
                            const long long iy =
                                static_cast<long long>(oy + ky) - static_cast<long long>(pad_h);
                            if (iy < 0 || iy >= static_cast<long long>(d.h)) continue;
                            for (size_t kx = 0; kx < kw; ++kx) {
                                const long long ix =
                                    static_cast<long long>(ox + kx) - static_cast<long long>(pad_w);
                                if (ix < 0 || ix >= static_cast<long long>(d.w)) continue;
                                acc += xf[(c * d.h + static_cast<size_t>(iy)) * d.w +
                                          static_cast<size_t>(ix)] *
                                       ko[(c * kh + ky) * kw + kx];
                            }
                        }
                    of[(o * oh + oy) * ow + ox] = acc;
                }
        }
    }
    node->backward_fn = [d, co, ci, kh, kw, pad_h, pad_w, oh, ow](Node& self) {
        auto& px = self.parents[0];
        auto& pk = self.parents[1];
        auto& pb = self.parents[2];
        const double* g = self.grad.data();
        const size_t frames = d.b * d.t;
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (size_t f = 0; f < frames; ++f)
                for (size_t o = 0; o < co; ++o) {
                    const double* gf = g + (f * co + o) * oh * ow;
                    double acc = 0.0;
                    for (size_t i = 0; i < oh * ow; ++i) acc += gf[i];
                    pb->grad[o] += acc;
                }
        }
        const bool need_x = px->requires_grad;
        const bool need_k = pk->requires_grad;
        if (!need_x && !need_k) return;
        if (need_x) px->ensure_grad();
        if (need_k) pk->ensure_grad();
        const double* kv = pk->value.data();
        const double* xv = px->value.data();
        for (size_t f = 0; f < frames; ++f) {
            const double* xf = xv + f * ci * d.h * d.w;
            double* gx = need_x ? px->grad.data() + f * ci * d.h * d.w : nullptr;
            for (size_t o = 0; o < co; ++o) {
                const double* gf = g + (f * co + o) * oh * ow;
                const double* ko = kv + o * ci * kh * kw;
                double* gk = need_k ? pk->grad.data() + o * ci * kh * kw : nullptr;
                for (size_t oy = 0; oy < oh; ++oy)
                    for (size_t ox = 0; ox < ow; ++ox) {
                        const double go = gf[oy * ow + ox];
                        if (go == 0.0) continue;
                        for (size_t c = 0; c < ci; ++c)
                            for (size_t ky = 0; ky < kh; ++ky) {
                                const long long iy = static_cast<long long>(oy + ky) -
                                                     static_cast<long long>(pad_h);
                                if (iy < 0 || iy >= static_cast<long long>(d.h)) continue;
                                for (size_t kx = 0; kx < kw; ++kx) {
                                    const long long ix = static_cast<long long>(ox + kx) -
                                                         static_cast<long long>(pad_w);
                                    if (ix < 0 || ix >= static_cast<long long>(d.w)) continue;
                                    const size_t xi = (c * d.h + static_cast<size_t>(iy)) * d.w +
                                                      static_cast<size_t>(ix);
                                    const size_t kidx = (c * kh + ky) * kw + kx;
                                    if (need_x) gx[xi] += go * ko[kidx];
                                    if (need_k) gk[kidx] += go * xf[xi];
                                }
                            }
                    }
            }
        }
    };
    return Tensor(node);
}

Tensor conv1d_temporal(const Tensor& x, const Tensor& kernel, const Tensor& bias,
                       Padding padding) {
    const Dims5 d = dims5(x, "conv1d_temporal");
    require(kernel.shape().size() == 3, "ShapeMismatch", "temporal kernel must be [Co,Ci,kt]");
    const size_t co = kernel.shape()[0], ci = kernel.shape()[1], kt = kernel.shape()[2];
    require(ci == d.c, "ShapeMismatch", "temporal kernel channel mismatch");
    require(bias.shape() == Shape{co}, "ShapeMismatch", "temporal bias must be [Co]");
    size_t pad_t = 0;
    if (padding == Padding::kSame) {
        require(kt % 2 == 1, "ShapeMismatch", "same padding needs an odd kernel");
        pad_t = (kt - 1) / 2;
    }
    require(d.t + 2 * pad_t >= kt, "ShapeMismatch", "sequence shorter than temporal kernel");
    const size_t ot = d.t + 2 * pad_t - kt + 1;
    const size_t hw = d.h * d.w;

    auto node = make_node({d.b, ot, co, d.h, d.w}, {x, kernel, bias});
    const double* xv = x.value().data();
    const double* kv = kernel.value().data();
    const double* bv = bias.value().data();
    double* ov = node->value.data();
    for (size_t b = 0; b < d.b; ++b)
        for (size_t to = 0; to < ot; ++to)
            for (size_t o = 0; o < co; ++o) {
                double* of = ov + ((b * ot + to) * co + o) * hw;
                for (size_t i = 0; i < hw; ++i) of[i] = bv[o];
                for (size_t dt = 0; dt < kt; ++dt) {
                    const long long ti =
                        static_cast<long long>(to + dt) - static_cast<long long>(pad_t);
                    if (ti < 0 || ti >= static_cast<long long>(d.t)) continue;
                    for (size_t c = 0; c < ci; ++c) {
                        const double kw_ = kv[(o * ci + c) * kt + dt];
                        if (kw_ == 0.0) continue;
                        const double* xf =
                            xv + ((b * d.t + static_cast<size_t>(ti)) * ci + c) * hw;
                        for (size_t i = 0; i < hw; ++i) of[i] += kw_ * xf[i];
                    }
                }
            }
    node->backward_fn = [d, co, ci, kt, pad_t, ot, hw](Node& self) {
        auto& px = self.parents[0];
        auto& pk = self.parents[1];
        auto& pb = self.parents[2];
        const double* g = self.grad.data();
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (size_t b = 0; b < d.b; ++b)
                for (size_t to = 0; to < ot; ++to)
                    for (size_t o = 0; o < co; ++o) {
                        const double* gf = g + ((b * ot + to) * co + o) * hw;
                        double acc = 0.0;
                        for (size_t i = 0; i < hw; ++i) acc += gf[i];
                        pb->grad[o] += acc;
                    }
        }
        const bool need_x = px->requires_grad;
        const bool need_k = pk->requires_grad;
        if (!need_x && !need_k) return;
        if (need_x) px->ensure_grad();
        if (need_k) pk->ensure_grad();
        const double* kv = pk->value.data();
        const double* xv = px->value.data();
        for (size_t b = 0; b < d.b; ++b)
            for (size_t to = 0; to < ot; ++to)
                for (size_t o = 0; o < co; ++o) {
                    const double* gf = g + ((b * ot + to) * co + o) * hw;
                    for (size_t dt = 0; dt < kt; ++dt) {
                        const long long ti =
                            static_cast<long long>(to + dt) - static_cast<long long>(pad_t);
                        if (ti < 0 || ti >= static_cast<long long>(d.t)) continue;
                        for (size_t c = 0; c < ci; ++c) {
                            const size_t kidx = (o * ci + c) * kt + dt;
                            const size_t xoff =
                                ((b * d.t + static_cast<size_t>(ti)) * ci + c) * hw;
                            if (need_x) {
                                const double kw_ = kv[kidx];
                                if (kw_ != 0.0) {
                                    double* gx = px->grad.data() + xoff;
                                    for (size_t i = 0; i < hw; ++i) gx[i] += kw_ * gf[i];
                                }
                            }
                            if (need_k) {
                                const double* xf = xv + xoff;
                                double acc = 0.0;
                                for (size_t i = 0; i < hw; ++i) acc += gf[i] * xf[i];
                                pk->grad[kidx] += acc;
                            }
                        }
                    }
                }
    };
    return Tensor(node);
}

Tensor avg_pool2d(const Tensor& x, size_t factor) {
    const Dims5 d = dims5(x, "avg_pool2d");
    require(factor >= 1, "ShapeMismatch", "pool factor must be >= 1");
    const size_t oh = d.h / factor, ow = d.w / factor;
    require(oh >= 1 && ow >= 1, "ShapeMismatch", "input smaller than the pool window");
    auto node = make_node({d.b, d.t, d.c, oh, ow}, {x});
    const double inv = 1.0 / static_cast<double>(factor * factor);
    const double* xv = x.value().data();
    double* ov = node->value.data();
    const size_t planes = d.b * d.t * d.c;
    for (size_t p = 0; p < planes; ++p) {
        const double* xp = xv + p * d.h * d.w;
        double* op = ov + p * oh * ow;
        for (size_t oy = 0; oy < oh; ++oy)
            for (size_t ox = 0; ox < ow; ++ox) {
                double acc = 0.0;
                for (size_t dy = 0; dy < factor; ++dy)
                    for (size_t dx = 0; dx < factor; ++dx)
                        acc += xp[(oy * factor + dy) * d.w + ox * factor + dx];
                op[oy * ow + ox] = acc * inv;
            }
    }
    node->backward_fn = [d, factor, oh, ow, inv](Node& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        p->ensure_grad();
        const size_t planes = d.b * d.t * d.c;
        for (size_t pl = 0; pl < planes; ++pl) {
            double* gx = p->grad.data() + pl * d.h * d.w;
            const double* go = self.grad.data() + pl * oh * ow;
            for (size_t oy = 0; oy < oh; ++oy)
                for (size_t ox = 0; ox < ow; ++ox) {
                    const double g = go[oy * ow + ox] * inv;
                    for (size_t dy = 0; dy < factor; ++dy)
                        for (size_t dx = 0; dx < factor; ++dx)
                            gx[(oy * factor + dy) * d.w + ox * factor + dx] += g;
                }
        }
    };
    return Tensor(node);
}

Tensor flatten_time(const Tensor& x) {
    const Dims5 d = dims5(x, "flatten_time");
    return reshape(x, {d.b, d.t, d.c * d.h * d.w});
}

Tensor slice_time(const Tensor& x, size_t t) {
    require(x.shape().size() == 3, "ShapeMismatch", "slice_time expects [B,T,F]");
    const size_t b = x.shape()[0], tt = x.shape()[1], f = x.shape()[2];
    require(t < tt, "ShapeMismatch", "timestep out of range");
    auto node = make_node({b, f}, {x});
    for (size_t i = 0; i < b; ++i)
        std::copy_n(x.value().data() + (i * tt + t) * f, f, node->value.data() + i * f);
    node->backward_fn = [b, tt, f, t](Node& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (size_t i = 0; i < b; ++i)
            for (size_t j = 0; j < f; ++j)
                p->grad[(i * tt + t) * f + j] += self.grad[i * f + j];
    };
    return Tensor(node);
}

Tensor slice_cols(const Tensor& x, size_t start, size_t len) {
    require(x.shape().size() == 2, "ShapeMismatch", "slice_cols expects [B,F]");
    const size_t b = x.shape()[0], f = x.shape()[1];
    require(start + len <= f, "ShapeMismatch", "column slice out of range");
    auto node = make_node({b, len}, {x});
    for (size_t i = 0; i < b; ++i)
        std::copy_n(x.value().data() + i * f + start, len, node->value.data() + i * len);
    node->backward_fn = [b, f, start, len](Node& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (size_t i = 0; i < b; ++i)
            for (size_t j = 0; j < len; ++j)
                p->grad[i * f + start + j] += self.grad[i * len + j];
    };
    return Tensor(node);
}

Tensor stack_time(const std::vector<Tensor>& steps) {
    require(!steps.empty(), "ShapeMismatch", "stack_time needs at least one step");
    const size_t b = steps.front().shape()[0], f = steps.front().shape()[1];
    const size_t t = steps.size();
    auto node = make_node({b, t, f}, steps);
    for (size_t s = 0; s < t; ++s) {
        require(steps[s].shape() == Shape{b, f}, "ShapeMismatch", "stack_time step shape differs");
        for (size_t i = 0; i < b; ++i)
            std::copy_n(steps[s].value().data() + i * f, f,
                        node->value.data() + (i * t + s) * f);
    }
    node->backward_fn = [b, t, f](Node& self) {
        for (size_t s = 0; s < t; ++s) {
            auto& p = self.parents[s];
            if (!p->requires_grad) continue;
            p->ensure_grad();
            for (size_t i = 0; i < b; ++i)
                for (size_t j = 0; j < f; ++j)
                    p->grad[i * f + j] += self.grad[(i * t + s) * f + j];
        }
    };
    return Tensor(node);
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
    check_same_shape(pred, target, "mse_loss");
    auto node = make_node({1}, {pred, target});
    const size_t n = pred.size();
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double d = pred.value()[i] - target.value()[i];
        acc += d * d;
    }
    node->value[0] = acc / static_cast<double>(n);
    node->backward_fn = [n](Node& self) {
        auto& pp = self.parents[0];
        auto& pt = self.parents[1];
        const double g = self.grad[0] * 2.0 / static_cast<double>(n);
        if (pp->requires_grad) {
            pp->ensure_grad();
            for (size_t i = 0; i < n; ++i)
                pp->grad[i] += g * (pp->value[i] - pt->value[i]);
        }
        if (pt->requires_grad) {
            pt->ensure_grad();
            for (size_t i = 0; i < n; ++i)
                pt->grad[i] -= g * (pp->value[i] - pt->value[i]);
        }
    };
    return Tensor(node);
}

Tensor mae(const Tensor& pred, const Tensor& target) {
    check_same_shape(pred, target, "mae");
    auto node = make_node({1}, {pred, target});
    const size_t n = pred.size();
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += std::abs(pred.value()[i] - target.value()[i]);
    node->value[0] = acc / static_cast<double>(n);
    node->backward_fn = [n](Node& self) {
        auto& pp = self.parents[0];
        auto& pt = self.parents[1];
        const double g = self.grad[0] / static_cast<double>(n);
        if (pp->requires_grad) {
            pp->ensure_grad();
            for (size_t i = 0; i < n; ++i) {
                const double d = pp->value[i] - pt->value[i];
                pp->grad[i] += g * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
            }
        }
        if (pt->requires_grad) {
            pt->ensure_grad();
            for (size_t i = 0; i < n; ++i) {
                const double d = pp->value[i] - pt->value[i];
                pt->grad[i] -= g * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
            }
        }
    };
    return Tensor(node);
}

void backward(const Tensor& loss) {
    require(loss.defined() && loss.size() == 1, "ShapeMismatch", "loss must be a scalar");

    // Iterative postorder DFS; two-color marks double as the cycle assert.
    std::vector<Node*> order;
    std::unordered_map<Node*, int> mark;  // 1 = in progress, 2 = done
    std::vector<std::pair<Node*, size_t>> stack{{loss.node().get(), 0}};
    mark[loss.node().get()] = 1;
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            const int m = mark[parent];
            require(m != 1, "GraphCycle", "cycle in the computation graph");
            if (m == 0) {
                mark[parent] = 1;
                stack.emplace_back(parent, 0);
            }
        } else {
            mark[node] = 2;
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (Node* node : order) {
        if (node->requires_grad) {
            node->ensure_grad();
            std::fill(node->grad.begin(), node->grad.end(), 0.0);
        }
    }
    loss.node()->ensure_grad();
    loss.node()->grad[0] = 1.0;

    // order is postorder (parents first); reverse it so every node runs
    // before the nodes it feeds from.
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backward_fn && node->requires_grad) node->backward_fn(*node);
    }
}

void AdamState::init(const std::vector<Tensor>& params) {
    require(lr > 0.0 && eps > 0.0 && beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0,
            "InvariantViolation", "bad Adam hyperparameters");
    step_count = 0;
    m.clear();
    v.clear();
    for (const auto& p : params) {
        m.emplace_back(p.size(), 0.0);
        v.emplace_back(p.size(), 0.0);
    }
}

void adam_step(std::vector<Tensor>& params, AdamState& state) {
    require(state.m.size() == params.size() && state.v.size() == params.size(), "ShapeMismatch",
            "Adam state does not match the parameter list");
    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    for (size_t p = 0; p < params.size(); ++p) {
        auto node = params[p].node();
        require(state.m[p].size() == node->value.size(), "ShapeMismatch",
                "Adam moment shape mismatch for " + node->name);
        node->ensure_grad();
        for (size_t i = 0; i < node->value.size(); ++i) {
            const double g = node->grad[i];
            state.m[p][i] = state.beta1 * state.m[p][i] + (1.0 - state.beta1) * g;
            state.v[p][i] = state.beta2 * state.v[p][i] + (1.0 - state.beta2) * g * g;
            const double mhat = state.m[p][i] / bc1;
            const double vhat = state.v[p][i] / bc2;
            node->value[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

double grad_check(const std::function<Tensor()>& f, std::vector<Tensor>& params, double eps) {
    Tensor loss = f();
    backward(loss);
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (auto& p : params) {
        p.node()->ensure_grad();
        analytic.push_back(p.node()->grad);
    }

    double worst = 0.0;
    for (size_t p = 0; p < params.size(); ++p) {
        auto& value = params[p].node()->value;
        for (size_t i = 0; i < value.size(); ++i) {
            const double saved = value[i];
            value[i] = saved + eps;
            const double up = f().item();
            value[i] = saved - eps;
            const double down = f().item();
            value[i] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double a = analytic[p][i];
            const double rel =
                std::abs(a - numeric) / std::max(1.0, std::abs(a) + std::abs(numeric));
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace strpm::tc
