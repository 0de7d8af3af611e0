#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "har/ops.hpp"
#include "har/rng.hpp"
#include "har/tensor.hpp"

namespace har {

enum class LayerKind { Conv2D, MaxPool, ReLU, Dropout, BatchNorm, Dense, LSTM, Softmax };

std::string_view layer_kind_name(LayerKind kind);

struct ForwardContext {
    bool training = false;
    Rng* rng = nullptr;  // required by Dropout when training
};

// A named tensor owned by a layer: trainable parameters plus non-trainable
// buffers such as batch-norm running statistics.
struct StateRef {
    std::string name;
    Tensor* tensor;
};

class Layer {
public:
    explicit Layer(std::string name) : name_(std::move(name)) {}
    virtual ~Layer() = default;

    const std::string& name() const { return name_; }
    virtual LayerKind kind() const = 0;
    virtual Shape output_shape(const Shape& input) const = 0;

    // Caches whatever backward needs.
    virtual Tensor forward(const Tensor& input, ForwardContext& ctx) = 0;
    // Inference mode, no caching; safe to call concurrently on a frozen layer.
    virtual Tensor infer(const Tensor& input) const = 0;
    // Writes parameter gradients and returns the input gradient.
    virtual Tensor backward(const Tensor& grad_output) = 0;

    virtual std::vector<Parameter*> parameters() { return {}; }
    virtual std::vector<StateRef> buffers() { return {}; }
    virtual std::unique_ptr<Layer> clone() const = 0;

protected:
    void require_cache(bool cached) const;

private:
    std::string name_;
};

class Conv2D final : public Layer {
public:
    Conv2D(std::string name, std::size_t in_maps, std::size_t out_maps, std::size_t kernel_time,
           Padding padding, Rng& init);

    LayerKind kind() const override { return LayerKind::Conv2D; }
    Shape output_shape(const Shape& input) const override;
    Tensor forward(const Tensor& input, ForwardContext& ctx) override;
    Tensor infer(const Tensor& input) const override;
    Tensor backward(const Tensor& grad_output) override;
    std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2D>(*this); }

    Parameter& weight() { return weight_; }
    Parameter& bias() { return bias_; }
    const Parameter& weight() const { return weight_; }
    const Parameter& bias() const { return bias_; }

private:
    Padding padding_;
    Parameter weight_;  // [kernel_time, in_maps, out_maps]
    Parameter bias_;    // [out_maps]
    Tensor input_;
    bool cached_ = false;
};

class MaxPool final : public Layer {
public:
    MaxPool(std::string name, std::size_t window);

    LayerKind kind() const override { return LayerKind::MaxPool; }
    Shape output_shape(const Shape& input) const override;
    Tensor forward(const Tensor& input, ForwardContext& ctx) override;
    Tensor infer(const Tensor& input) const override;
    Tensor backward(const Tensor& grad_output) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool>(*this); }

private:
    std::size_t window_;
    Shape input_shape_;
    std::vector<std::size_t> argmax_;
    bool cached_ = false;
};

class ReLU final : public Layer {
public:
    explicit ReLU(std::string name) : Layer(std::move(name)) {}

    LayerKind kind() const override { return LayerKind::ReLU; }
    Shape output_shape(const Shape& input) const override { return input; }
    Tensor forward(const Tensor& input, ForwardContext& ctx) override;
    Tensor infer(const Tensor& input) const override { return relu_forward(input); }
    Tensor backward(const Tensor& grad_output) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<ReLU>(*this); }

private:
    Tensor input_;
    bool cached_ = false;
};

class Dropout final : public Layer {
public:
    Dropout(std::string name, double prob);

    LayerKind kind() const override { return LayerKind::Dropout; }
    Shape output_shape(const Shape& input) const override { return input; }
    Tensor forward(const Tensor& input, ForwardContext& ctx) override;
    Tensor infer(const Tensor& input) const override { return input; }
    Tensor backward(const Tensor& grad_output) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Dropout>(*this); }

    double probability() const { return prob_; }
    const std::vector<double>& mask() const { return mask_; }

private:
    double prob_;
    std::vector<double> mask_;
    bool cached_ = false;
};

// Normalizes each feature map (last axis) over all batch, time and column
// positions. Training uses batch statistics and updates the running
// estimates; inference uses the running estimates.
class BatchNorm final : public Layer {
public:
    BatchNorm(std::string name, std::size_t maps, double epsilon = 1e-5, double momentum = 0.9);

    LayerKind kind() const override { return LayerKind::BatchNorm; }
    Shape output_shape(const Shape& input) const override { return input; }
    Tensor forward(const Tensor& input, ForwardContext& ctx) override;
    Tensor infer(const Tensor& input) const override;
    Tensor backward(const Tensor& grad_output) override;
    std::vector<Parameter*> parameters() override { return {&gamma_, &beta_}; }
    std::vector<StateRef> buffers() override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<BatchNorm>(*this); }

    Parameter& gamma() { return gamma_; }
    Parameter& beta() { return beta_; }
    const Tensor& running_mean() const { return running_mean_; }
    const Tensor& running_var() const { return running_var_; }

private:
    std::size_t maps_;
    double epsilon_;
    double momentum_;
    Parameter gamma_;
    Parameter beta_;
    Tensor running_mean_;
    Tensor running_var_;
    Tensor normalized_;            // x-hat
    std::vector<double> inv_std_;  // per map
    bool batch_stats_ = false;
    bool cached_ = false;
};

// Flattens every non-batch axis, then y = x W + b.
class Dense final : public Layer {
public:
    Dense(std::string name, std::size_t in_features, std::size_t out_features, Rng& init);

    LayerKind kind() const override { return LayerKind::Dense; }
    Shape output_shape(const Shape& input) const override;
    Tensor forward(const Tensor& input, ForwardContext& ctx) override;
    Tensor infer(const Tensor& input) const override;
    Tensor backward(const Tensor& grad_output) override;
    std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }

    Parameter& weight() { return weight_; }
    Parameter& bias() { return bias_; }

private:
    Parameter weight_;  // [in, out]
    Parameter bias_;    // [out]
    Tensor input_;
    bool cached_ = false;
};

// Single-layer LSTM over the time axis (axis 1). Every remaining non-batch
// axis is flattened into the per-step feature vector. Gate blocks are laid
// out [input, forget, candidate, output]; the layer returns the final hidden
// state [batch, hidden].
class LSTM final : public Layer {
public:
    LSTM(std::string name, std::size_t in_features, std::size_t hidden, Rng& init);

    LayerKind kind() const override { return LayerKind::LSTM; }
    Shape output_shape(const Shape& input) const override;
    Tensor forward(const Tensor& input, ForwardContext& ctx) override;
    Tensor infer(const Tensor& input) const override;
    Tensor backward(const Tensor& grad_output) override;
    std::vector<Parameter*> parameters() override {
        return {&input_weight_, &recurrent_weight_, &bias_};
    }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<LSTM>(*this); }

    std::size_t hidden_size() const { return hidden_; }
    Parameter& input_weight() { return input_weight_; }
    Parameter& recurrent_weight() { return recurrent_weight_; }
    Parameter& bias() { return bias_; }

private:
    struct Trace {
        std::vector<double> gates;  // [N, T, 4H] post-activation
        std::vector<double> cells;  // [N, T+1, H], cells[.,0,.] = 0
        std::vector<double> hidden; // [N, T+1, H]
    };
    Trace run(const Tensor& input) const;

    std::size_t in_features_;
    std::size_t hidden_;
    Parameter input_weight_;      // [F, 4H]
    Parameter recurrent_weight_;  // [H, 4H]
    Parameter bias_;              // [4H]
    Tensor input_;
    Trace trace_;
    bool cached_ = false;
};

class Softmax final : public Layer {
public:
    explicit Softmax(std::string name) : Layer(std::move(name)) {}

    LayerKind kind() const override { return LayerKind::Softmax; }
    Shape output_shape(const Shape& input) const override { return input; }
    Tensor forward(const Tensor& input, ForwardContext& ctx) override;
    Tensor infer(const Tensor& input) const override { return softmax(input); }
    Tensor backward(const Tensor& grad_output) override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Softmax>(*this); }

private:
    Tensor output_;
    bool cached_ = false;
};

// Uniform on +-sqrt(6 / (fan_in + fan_out)).
void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace har
