#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "har/layers.hpp"

namespace har {

// Fixed layer stack with reverse-mode backpropagation through every layer.
class Network {
public:
    Network() = default;
    Network(const Network& other);
    Network& operator=(const Network& other);
    Network(Network&&) noexcept = default;
    Network& operator=(Network&&) noexcept = default;

    void add(std::unique_ptr<Layer> layer);

    std::size_t layer_count() const { return layers_.size(); }
    Layer& layer(std::size_t i) { return *layers_.at(i); }
    const Layer& layer(std::size_t i) const { return *layers_.at(i); }

    Shape output_shape(const Shape& input) const;

    Tensor forward(const Tensor& input, ForwardContext& ctx);
    Tensor infer(const Tensor& input) const;
    // Runs layers [0, end) in inference mode.
    Tensor infer_prefix(const Tensor& input, std::size_t end) const;

    // grad_output is dLoss/d(network output).
    Tensor backward(const Tensor& grad_output);
    // Same, but starts below a trailing Softmax: grad_logits is dLoss/dz.
    Tensor backward_from_logits(const Tensor& grad_logits);

    std::vector<Parameter*> parameters();
    std::size_t parameter_count() const;

    // Parameters and buffers, in layer order.
    std::vector<StateRef> state();
    std::map<std::string, Tensor> state_dict() const;
    // Every tensor must be present with a matching shape.
    void load_state_dict(const std::map<std::string, Tensor>& tensors);

    bool all_finite() const;

private:
    Tensor backward_range(Tensor grad, std::size_t end);

    std::vector<std::unique_ptr<Layer>> layers_;
    bool forward_done_ = false;
};

}  // namespace har
