#include "har/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace har {

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
    if (t.rank() != rank) {
        throw std::invalid_argument(std::string(what) + ": expected rank " + std::to_string(rank) +
                                    " tensor, got " + shape_string(t.shape()));
    }
}

struct ConvGeometry {
    std::size_t batch, time, cols, in_maps, out_maps, kernel, out_time;
    std::ptrdiff_t pad;
};

ConvGeometry conv_geometry(const Tensor& input, const Tensor& weights, Padding padding) {
    require_rank(input, 4, "conv2d");
    require_rank(weights, 3, "conv2d weights");
    ConvGeometry g{};
    g.batch = input.dim(0);
    g.time = input.dim(1);
    g.cols = input.dim(2);
    g.in_maps = input.dim(3);
    g.kernel = weights.dim(0);
    g.out_maps = weights.dim(2);
    if (weights.dim(1) != g.in_maps) {
        throw std::invalid_argument("conv2d: weights expect " + std::to_string(weights.dim(1)) +
                                    " input maps, input has " + std::to_string(g.in_maps));
    }
    if (padding == Padding::Same) {
        g.pad = static_cast<std::ptrdiff_t>((g.kernel - 1) / 2);
        g.out_time = g.time;
    } else {
        if (g.time < g.kernel) {
            throw std::invalid_argument("conv2d: time length " + std::to_string(g.time) +
                                        " shorter than kernel under Valid padding");
        }
        g.pad = 0;
        g.out_time = g.time - g.kernel + 1;
    }
    return g;
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias,
                      Padding padding) {
    const auto g = conv_geometry(input, weights, padding);
    if (bias.size() != g.out_maps) throw std::invalid_argument("conv2d: bias length mismatch");

    Tensor out({g.batch, g.out_time, g.cols, g.out_maps});
    const double* in = input.raw();
    const double* w = weights.raw();
    double* o = out.raw();
    const auto time = static_cast<std::ptrdiff_t>(g.time);

    for (std::size_t n = 0; n < g.batch; ++n) {
        for (std::size_t t = 0; t < g.out_time; ++t) {
            for (std::size_t c = 0; c < g.cols; ++c) {
                double* orow = o + ((n * g.out_time + t) * g.cols + c) * g.out_maps;
                std::copy_n(bias.raw(), g.out_maps, orow);
                for (std::size_t k = 0; k < g.kernel; ++k) {
                    const auto ti = static_cast<std::ptrdiff_t>(t + k) - g.pad;
                    if (ti < 0 || ti >= time) continue;
                    const double* irow =
                        in + ((n * g.time + static_cast<std::size_t>(ti)) * g.cols + c) * g.in_maps;
                    for (std::size_t fi = 0; fi < g.in_maps; ++fi) {
                        const double x = irow[fi];
                        if (x == 0.0) continue;
                        const double* wrow = w + (k * g.in_maps + fi) * g.out_maps;
                        for (std::size_t fo = 0; fo < g.out_maps; ++fo) orow[fo] += x * wrow[fo];
                    }
                }
            }
        }
    }
    return out;
}

ConvGrads conv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_output,
                          Padding padding) {
    const auto g = conv_geometry(input, weights, padding);
    if (grad_output.shape() != Shape{g.batch, g.out_time, g.cols, g.out_maps}) {
        throw std::invalid_argument("conv2d_backward: gradient shape " +
                                    shape_string(grad_output.shape()) + " mismatch");
    }

    // Transposed copy [kernel, out_maps, in_maps] so the input-gradient
    // accumulation runs contiguously over input maps.
    std::vector<double> wt(weights.size());
    for (std::size_t k = 0; k < g.kernel; ++k)
        for (std::size_t fi = 0; fi < g.in_maps; ++fi)
            for (std::size_t fo = 0; fo < g.out_maps; ++fo)
                wt[(k * g.out_maps + fo) * g.in_maps + fi] =
                    weights[(k * g.in_maps + fi) * g.out_maps + fo];

    ConvGrads grads{Tensor(input.shape()), Tensor(weights.shape()), Tensor({g.out_maps})};
    const double* in = input.raw();
    const double* go = grad_output.raw();
    double* gin = grads.input.raw();
    double* gw = grads.weights.raw();
    double* gb = grads.bias.raw();
    const auto time = static_cast<std::ptrdiff_t>(g.time);

    for (std::size_t n = 0; n < g.batch; ++n) {
        for (std::size_t t = 0; t < g.out_time; ++t) {
            for (std::size_t c = 0; c < g.cols; ++c) {
                const double* grow = go + ((n * g.out_time + t) * g.cols + c) * g.out_maps;
                for (std::size_t fo = 0; fo < g.out_maps; ++fo) gb[fo] += grow[fo];
                for (std::size_t k = 0; k < g.kernel; ++k) {
                    const auto ti = static_cast<std::ptrdiff_t>(t + k) - g.pad;
                    if (ti < 0 || ti >= time) continue;
                    const std::size_t base =
                        ((n * g.time + static_cast<std::size_t>(ti)) * g.cols + c) * g.in_maps;
                    const double* irow = in + base;
                    double* girow = gin + base;
                    for (std::size_t fi = 0; fi < g.in_maps; ++fi) {
                        const double x = irow[fi];
                        if (x == 0.0) continue;
                        double* gwrow = gw + (k * g.in_maps + fi) * g.out_maps;
                        for (std::size_t fo = 0; fo < g.out_maps; ++fo) gwrow[fo] += x * grow[fo];
                    }
                    const double* wtk = wt.data() + k * g.out_maps * g.in_maps;
                    for (std::size_t fo = 0; fo < g.out_maps; ++fo) {
                        const double gv = grow[fo];
                        if (gv == 0.0) continue;
                        const double* wrow = wtk + fo * g.in_maps;
                        for (std::size_t fi = 0; fi < g.in_maps; ++fi) girow[fi] += gv * wrow[fi];
                    }
                }
            }
        }
    }
    return grads;
}

std::size_t pooled_length(std::size_t time, std::size_t window) {
    if (window == 0) throw std::invalid_argument("pooling window must be positive");
    if (time < window) return time;
    return (time + window - 1) / window;
}

PoolResult maxpool_forward(const Tensor& input, std::size_t window) {
    require_rank(input, 4, "maxpool");
    const std::size_t batch = input.dim(0), time = input.dim(1), cols = input.dim(2),
                      maps = input.dim(3);
    const std::size_t out_time = pooled_length(time, window);
    const std::size_t span_len = time < window ? 1 : window;
    const std::size_t row = cols * maps;

    PoolResult r{Tensor({batch, out_time, cols, maps}), {}};
    r.argmax.resize(r.output.size());
    for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t to = 0; to < out_time; ++to) {
            const std::size_t t0 = to * span_len;
            const std::size_t t1 = std::min(time, t0 + span_len);
            for (std::size_t j = 0; j < row; ++j) {
                std::size_t best = (n * time + t0) * row + j;
                for (std::size_t t = t0 + 1; t < t1; ++t) {
                    const std::size_t idx = (n * time + t) * row + j;
                    if (input[idx] > input[best]) best = idx;
                }
                const std::size_t o = (n * out_time + to) * row + j;
                r.output[o] = input[best];
                r.argmax[o] = best;
            }
        }
    }
    return r;
}

Tensor maxpool_backward(const Shape& input_shape, std::span<const std::size_t> argmax,
                        const Tensor& grad_output) {
    if (argmax.size() != grad_output.size()) {
        throw std::invalid_argument("maxpool_backward: argmax/gradient size mismatch");
    }
    Tensor grad(input_shape);
    for (std::size_t i = 0; i < argmax.size(); ++i) grad[argmax[i]] += grad_output[i];
    return grad;
}

Tensor relu_forward(const Tensor& input) {
    Tensor out = input;
    for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
    return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_output) {
    if (input.shape() != grad_output.shape()) {
        throw std::invalid_argument("relu_backward: shape mismatch");
    }
    Tensor grad(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) {
        grad[i] = input[i] > 0.0 ? grad_output[i] : 0.0;
    }
    return grad;
}

DropoutResult dropout_forward(const Tensor& input, double prob, Rng& rng, bool training) {
    if (!(prob >= 0.0 && prob < 1.0)) {
        throw std::invalid_argument("dropout probability must be in [0, 1)");
    }
    DropoutResult r{input, std::vector<double>(input.size(), 1.0)};
    if (!training || prob == 0.0) return r;
    const double scale = 1.0 / (1.0 - prob);
    for (std::size_t i = 0; i < input.size(); ++i) {
        r.mask[i] = rng.uniform() < prob ? 0.0 : scale;
        r.output[i] = input[i] * r.mask[i];
    }
    return r;
}

Tensor softmax(const Tensor& logits) {
    if (logits.rank() == 0) throw std::invalid_argument("softmax: empty tensor");
    const std::size_t k = logits.shape().back();
    if (k < 2) throw std::invalid_argument("softmax: need at least 2 classes");
    Tensor out(logits.shape());
    const std::size_t rows = logits.size() / k;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = logits.raw() + r * k;
        double* o = out.raw() + r * k;
        const double m = *std::max_element(in, in + k);
        double sum = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            o[i] = std::exp(in[i] - m);
            sum += o[i];
        }
        for (std::size_t i = 0; i < k; ++i) o[i] /= sum;
    }
    return out;
}

Tensor softmax_backward(const Tensor& probs, const Tensor& grad_output) {
    if (probs.shape() != grad_output.shape()) {
        throw std::invalid_argument("softmax_backward: shape mismatch");
    }
    const std::size_t k = probs.shape().back();
    Tensor grad(probs.shape());
    for (std::size_t r = 0; r < probs.size() / k; ++r) {
        const double* a = probs.raw() + r * k;
        const double* g = grad_output.raw() + r * k;
        double dot = 0.0;
        for (std::size_t i = 0; i < k; ++i) dot += a[i] * g[i];
        for (std::size_t i = 0; i < k; ++i) grad[r * k + i] = a[i] * (g[i] - dot);
    }
    return grad;
}

namespace {

void check_one_hot(const Tensor& probs, const Tensor& targets) {
    require_rank(probs, 2, "cross_entropy");
    if (probs.shape() != targets.shape()) {
        throw std::invalid_argument("cross_entropy: probs " + shape_string(probs.shape()) +
                                    " vs targets " + shape_string(targets.shape()));
    }
    const std::size_t k = probs.dim(1);
    for (std::size_t n = 0; n < probs.dim(0); ++n) {
        std::size_t ones = 0;
        for (std::size_t i = 0; i < k; ++i) {
            const double y = targets[n * k + i];
            if (y == 1.0) {
                ++ones;
            } else if (y != 0.0) {
                ones = 2;
                break;
            }
        }
        if (ones != 1) {
            throw std::invalid_argument("cross_entropy: target row " + std::to_string(n) +
                                        " is not one-hot");
        }
    }
}

}  // namespace

double cross_entropy(const Tensor& probs, const Tensor& targets) {
    check_one_hot(probs, targets);
    const std::size_t batch = probs.dim(0);
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (targets[i] == 1.0) total -= std::log(std::clamp(probs[i], kProbabilityFloor, 1.0));
    }
    return total / static_cast<double>(batch);
}

Tensor cross_entropy_grad(const Tensor& probs, const Tensor& targets) {
    check_one_hot(probs, targets);
    const double inv_n = 1.0 / static_cast<double>(probs.dim(0));
    Tensor grad(probs.shape());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (targets[i] == 1.0) {
            grad[i] = -inv_n / std::clamp(probs[i], kProbabilityFloor, 1.0);
        }
    }
    return grad;
}

Tensor softmax_cross_entropy_grad(const Tensor& probs, const Tensor& targets) {
    check_one_hot(probs, targets);
    const double inv_n = 1.0 / static_cast<double>(probs.dim(0));
    Tensor grad(probs.shape());
    for (std::size_t i = 0; i < probs.size(); ++i) grad[i] = (probs[i] - targets[i]) * inv_n;
    return grad;
}

Tensor one_hot(std::span<const std::size_t> classes, std::size_t class_count) {
    if (classes.empty()) throw std::invalid_argument("one_hot: empty batch");
    Tensor out({classes.size(), class_count});
    for (std::size_t n = 0; n < classes.size(); ++n) {
        if (classes[n] >= class_count) throw std::out_of_range("one_hot: class index out of range");
        out[n * class_count + classes[n]] = 1.0;
    }
    return out;
}

void sgd_step(Tensor& params, const Tensor& grads, double learning_rate) {
    if (params.shape() != grads.shape()) {
        throw std::invalid_argument("sgd_step: parameter " + shape_string(params.shape()) +
                                    " vs gradient " + shape_string(grads.shape()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= learning_rate * grads[i];
}

void sgd_step(std::span<Parameter* const> params, OptimizerState& state) {
    if (!(state.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
    for (Parameter* p : params) sgd_step(p->value, p->grad, state.learning_rate);
    ++state.step_count;
}

}  // namespace har
