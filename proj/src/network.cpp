#include "har/network.hpp"

#include <stdexcept>

namespace har {

Network::Network(const Network& other) : forward_done_(false) {
    layers_.reserve(other.layers_.size());
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Network& Network::operator=(const Network& other) {
    if (this != &other) {
        Network copy(other);
        *this = std::move(copy);
    }
    return *this;
}

void Network::add(std::unique_ptr<Layer> layer) {
    if (!layer) throw std::invalid_argument("Network::add: null layer");
    layers_.push_back(std::move(layer));
}

Shape Network::output_shape(const Shape& input) const {
    Shape s = input;
    for (const auto& l : layers_) s = l->output_shape(s);
    return s;
}

Tensor Network::forward(const Tensor& input, ForwardContext& ctx) {
    Tensor x = input;
    for (auto& l : layers_) x = l->forward(x, ctx);
    forward_done_ = true;
    return x;
}

Tensor Network::infer(const Tensor& input) const { return infer_prefix(input, layers_.size()); }

Tensor Network::infer_prefix(const Tensor& input, std::size_t end) const {
    if (end > layers_.size()) throw std::out_of_range("infer_prefix: layer index out of range");
    Tensor x = input;
    for (std::size_t i = 0; i < end; ++i) x = layers_[i]->infer(x);
    return x;
}

Tensor Network::backward_range(Tensor grad, std::size_t end) {
    if (!forward_done_) throw std::logic_error("Network::backward called without forward");
    for (std::size_t i = end; i-- > 0;) grad = layers_[i]->backward(grad);
    return grad;
}

Tensor Network::backward(const Tensor& grad_output) {
    return backward_range(grad_output, layers_.size());
}

Tensor Network::backward_from_logits(const Tensor& grad_logits) {
    if (layers_.empty() || layers_.back()->kind() != LayerKind::Softmax) {
        throw std::logic_error("backward_from_logits: network does not end in Softmax");
    }
    return backward_range(grad_logits, layers_.size() - 1);
}

std::vector<Parameter*> Network::parameters() {
    std::vector<Parameter*> out;
    for (auto& l : layers_)
        for (auto* p : l->parameters()) out.push_back(p);
    return out;
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_)
        for (auto* p : l->parameters()) n += p->value.size();
    return n;
}

std::vector<StateRef> Network::state() {
    std::vector<StateRef> out;
    for (auto& l : layers_) {
        for (auto* p : l->parameters()) out.push_back({p->name, &p->value});
        for (auto& b : l->buffers()) out.push_back(b);
    }
    return out;
}

std::map<std::string, Tensor> Network::state_dict() const {
    std::map<std::string, Tensor> out;
    for (auto& ref : const_cast<Network*>(this)->state()) out.emplace(ref.name, *ref.tensor);
    return out;
}

void Network::load_state_dict(const std::map<std::string, Tensor>& tensors) {
    auto refs = state();
    if (refs.size() != tensors.size()) {
        throw std::invalid_argument("state has " + std::to_string(tensors.size()) +
                                    " tensors, network expects " + std::to_string(refs.size()));
    }
    for (auto& ref : refs) {
        auto it = tensors.find(ref.name);
        if (it == tensors.end()) throw std::invalid_argument("missing tensor " + ref.name);
        if (it->second.shape() != ref.tensor->shape()) {
            throw std::invalid_argument("tensor " + ref.name + " has shape " +
                                        shape_string(it->second.shape()) + ", expected " +
                                        shape_string(ref.tensor->shape()));
        }
    }
    for (auto& ref : refs) *ref.tensor = tensors.at(ref.name);
}

bool Network::all_finite() const {
    for (auto& ref : const_cast<Network*>(this)->state()) {
        if (!ref.tensor->all_finite()) return false;
    }
    return true;
}

}  // namespace har
