#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "har/rng.hpp"
#include "har/tensor.hpp"

namespace har {

// Feature tensors are laid out [batch, time, column, feature map]. Kernels
// span the time axis only, so the sensor-column axis passes through every
// convolution and pooling stage unchanged.

enum class Padding { Same, Valid };

// weights: [kernel_time, in_maps, out_maps]; bias: [out_maps]. Stride 1.
// Same padding zero-pads (kernel_time - 1) / 2 rows on each side.
Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias,
                      Padding padding);

struct ConvGrads {
    Tensor input;
    Tensor weights;
    Tensor bias;
};

ConvGrads conv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_output,
                          Padding padding);

// Output time length for a non-overlapping pooling window: ceil(T / window),
// or T itself when T < window (the layer is then the identity).
std::size_t pooled_length(std::size_t time, std::size_t window);

struct PoolResult {
    Tensor output;
    std::vector<std::size_t> argmax;  // flat input index per output element
};

PoolResult maxpool_forward(const Tensor& input, std::size_t window = 3);
Tensor maxpool_backward(const Shape& input_shape, std::span<const std::size_t> argmax,
                        const Tensor& grad_output);

Tensor relu_forward(const Tensor& input);
Tensor relu_backward(const Tensor& input, const Tensor& grad_output);

struct DropoutResult {
    Tensor output;
    std::vector<double> mask;  // 0 or 1 / (1 - prob) per element
};

// Inverted dropout; a pass-through when !training or prob == 0.
DropoutResult dropout_forward(const Tensor& input, double prob, Rng& rng, bool training);

// Softmax over the last axis with max subtraction.
Tensor softmax(const Tensor& logits);
Tensor softmax_backward(const Tensor& probs, const Tensor& grad_output);

inline constexpr double kProbabilityFloor = 1e-12;

// C = -(1/N) sum_n sum_k y_nk ln max(a_nk, 1e-12). probs and targets are
// [N, K]; every target row must be one-hot.
double cross_entropy(const Tensor& probs, const Tensor& targets);

// dC/da for the loss above.
Tensor cross_entropy_grad(const Tensor& probs, const Tensor& targets);

// dC/dz for C composed with softmax(z): (a - y) / N. Matches
// softmax_backward(cross_entropy_grad) wherever no probability hits the floor,
// and keeps a useful gradient where one does.
Tensor softmax_cross_entropy_grad(const Tensor& probs, const Tensor& targets);

Tensor one_hot(std::span<const std::size_t> classes, std::size_t class_count);

struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
};

struct OptimizerState {
    double learning_rate = 0.01;
    std::size_t step_count = 0;
};

// p <- p - lr * g, no momentum.
void sgd_step(Tensor& params, const Tensor& grads, double learning_rate);
void sgd_step(std::span<Parameter* const> params, OptimizerState& state);

}  // namespace har
