#include "har/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace har {

std::string_view layer_kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::Conv2D: return "Conv2D";
        case LayerKind::MaxPool: return "MaxPool";
        case LayerKind::ReLU: return "ReLU";
        case LayerKind::Dropout: return "Dropout";
        case LayerKind::BatchNorm: return "BatchNorm";
        case LayerKind::Dense: return "Dense";
        case LayerKind::LSTM: return "LSTM";
        case LayerKind::Softmax: return "Softmax";
    }
    return "Unknown";
}

void Layer::require_cache(bool cached) const {
    if (!cached) throw std::logic_error(name_ + ": backward called without a preceding forward");
}

void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& v : t.data()) v = rng.uniform(-limit, limit);
}

namespace {

Parameter make_parameter(const std::string& owner, const char* suffix, Shape shape) {
    Tensor value(shape);
    Tensor grad(std::move(shape));
    return Parameter{owner + "." + suffix, std::move(value), std::move(grad)};
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

// ---- Conv2D ----------------------------------------------------------------

Conv2D::Conv2D(std::string name, std::size_t in_maps, std::size_t out_maps,
               std::size_t kernel_time, Padding padding, Rng& init)
    : Layer(std::move(name)),
      padding_(padding),
      weight_(make_parameter(this->name(), "weight", {kernel_time, in_maps, out_maps})),
      bias_(make_parameter(this->name(), "bias", {out_maps})) {
    glorot_uniform(weight_.value, kernel_time * in_maps, kernel_time * out_maps, init);
}

Shape Conv2D::output_shape(const Shape& input) const {
    if (input.size() != 4 || input[3] != weight_.value.dim(1)) {
        throw std::invalid_argument(name() + ": input " + shape_string(input) +
                                    " does not match weights " +
                                    shape_string(weight_.value.shape()));
    }
    const std::size_t k = weight_.value.dim(0);
    std::size_t t = input[1];
    if (padding_ == Padding::Valid) {
        if (t < k) throw std::invalid_argument(name() + ": time axis shorter than kernel");
        t = t - k + 1;
    }
    return {input[0], t, input[2], weight_.value.dim(2)};
}

Tensor Conv2D::forward(const Tensor& input, ForwardContext&) {
    input_ = input;
    cached_ = true;
    return conv2d_forward(input, weight_.value, bias_.value, padding_);
}

Tensor Conv2D::infer(const Tensor& input) const {
    return conv2d_forward(input, weight_.value, bias_.value, padding_);
}

Tensor Conv2D::backward(const Tensor& grad_output) {
    require_cache(cached_);
    auto g = conv2d_backward(input_, weight_.value, grad_output, padding_);
    weight_.grad = std::move(g.weights);
    bias_.grad = std::move(g.bias);
    return std::move(g.input);
}

// ---- MaxPool ---------------------------------------------------------------

MaxPool::MaxPool(std::string name, std::size_t window) : Layer(std::move(name)), window_(window) {
    if (window_ == 0) throw std::invalid_argument("pooling window must be positive");
}

Shape MaxPool::output_shape(const Shape& input) const {
    if (input.size() != 4) throw std::invalid_argument(name() + ": expected rank-4 input");
    return {input[0], pooled_length(input[1], window_), input[2], input[3]};
}

Tensor MaxPool::forward(const Tensor& input, ForwardContext&) {
    auto r = maxpool_forward(input, window_);
    input_shape_ = input.shape();
    argmax_ = std::move(r.argmax);
    cached_ = true;
    return std::move(r.output);
}

Tensor MaxPool::infer(const Tensor& input) const { return maxpool_forward(input, window_).output; }

Tensor MaxPool::backward(const Tensor& grad_output) {
    require_cache(cached_);
    return maxpool_backward(input_shape_, argmax_, grad_output);
}

// ---- ReLU ------------------------------------------------------------------

Tensor ReLU::forward(const Tensor& input, ForwardContext&) {
    input_ = input;
    cached_ = true;
    return relu_forward(input);
}

Tensor ReLU::backward(const Tensor& grad_output) {
    require_cache(cached_);
    return relu_backward(input_, grad_output);
}

// ---- Dropout ---------------------------------------------------------------

Dropout::Dropout(std::string name, double prob) : Layer(std::move(name)), prob_(prob) {
    if (!(prob >= 0.0 && prob < 1.0)) {
        throw std::invalid_argument("dropout probability must be in [0, 1)");
    }
}

Tensor Dropout::forward(const Tensor& input, ForwardContext& ctx) {
    if (ctx.training && prob_ > 0.0 && ctx.rng == nullptr) {
        throw std::invalid_argument(name() + ": training forward needs a random stream");
    }
    Rng unused(0);
    auto r = dropout_forward(input, prob_, ctx.rng ? *ctx.rng : unused, ctx.training);
    mask_ = std::move(r.mask);
    cached_ = true;
    return std::move(r.output);
}

Tensor Dropout::backward(const Tensor& grad_output) {
    require_cache(cached_);
    if (grad_output.size() != mask_.size()) {
        throw std::invalid_argument(name() + ": gradient does not match cached mask");
    }
    Tensor grad = grad_output;
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= mask_[i];
    return grad;
}

// ---- BatchNorm -------------------------------------------------------------

BatchNorm::BatchNorm(std::string name, std::size_t maps, double epsilon, double momentum)
    : Layer(std::move(name)),
      maps_(maps),
      epsilon_(epsilon),
      momentum_(momentum),
      gamma_(make_parameter(this->name(), "gamma", {maps})),
      beta_(make_parameter(this->name(), "beta", {maps})),
      running_mean_({maps}, 0.0),
      running_var_({maps}, 1.0) {
    gamma_.value.fill(1.0);
}

std::vector<StateRef> BatchNorm::buffers() {
    return {{name() + ".running_mean", &running_mean_}, {name() + ".running_var", &running_var_}};
}

Tensor BatchNorm::infer(const Tensor& input) const {
    if (input.rank() == 0 || input.shape().back() != maps_) {
        throw std::invalid_argument(name() + ": input " + shape_string(input.shape()) +
                                    " does not have " + std::to_string(maps_) + " maps");
    }
    Tensor out(input.shape());
    std::vector<double> scale(maps_), shift(maps_);
    for (std::size_t f = 0; f < maps_; ++f) {
        const double inv = 1.0 / std::sqrt(running_var_[f] + epsilon_);
        scale[f] = gamma_.value[f] * inv;
        shift[f] = beta_.value[f] - running_mean_[f] * scale[f];
    }
    const std::size_t positions = input.size() / maps_;
    for (std::size_t p = 0; p < positions; ++p) {
        for (std::size_t f = 0; f < maps_; ++f) {
            const std::size_t i = p * maps_ + f;
            out[i] = input[i] * scale[f] + shift[f];
        }
    }
    return out;
}

Tensor BatchNorm::forward(const Tensor& input, ForwardContext& ctx) {
    if (input.rank() == 0 || input.shape().back() != maps_) {
        throw std::invalid_argument(name() + ": input " + shape_string(input.shape()) +
                                    " does not have " + std::to_string(maps_) + " maps");
    }
    const std::size_t positions = input.size() / maps_;
    std::vector<double> mean(maps_, 0.0), var(maps_, 0.0);

    if (ctx.training) {
        for (std::size_t p = 0; p < positions; ++p)
            for (std::size_t f = 0; f < maps_; ++f) mean[f] += input[p * maps_ + f];
        for (auto& m : mean) m /= static_cast<double>(positions);
        for (std::size_t p = 0; p < positions; ++p) {
            for (std::size_t f = 0; f < maps_; ++f) {
                const double d = input[p * maps_ + f] - mean[f];
                var[f] += d * d;
            }
        }
        for (auto& v : var) v /= static_cast<double>(positions);
        for (std::size_t f = 0; f < maps_; ++f) {
            running_mean_[f] = momentum_ * running_mean_[f] + (1.0 - momentum_) * mean[f];
            running_var_[f] = momentum_ * running_var_[f] + (1.0 - momentum_) * var[f];
        }
    } else {
        for (std::size_t f = 0; f < maps_; ++f) {
            mean[f] = running_mean_[f];
            var[f] = running_var_[f];
        }
    }

    inv_std_.assign(maps_, 0.0);
    for (std::size_t f = 0; f < maps_; ++f) inv_std_[f] = 1.0 / std::sqrt(var[f] + epsilon_);

    normalized_ = Tensor(input.shape());
    Tensor out(input.shape());
    for (std::size_t p = 0; p < positions; ++p) {
        for (std::size_t f = 0; f < maps_; ++f) {
            const std::size_t i = p * maps_ + f;
            normalized_[i] = (input[i] - mean[f]) * inv_std_[f];
            out[i] = gamma_.value[f] * normalized_[i] + beta_.value[f];
        }
    }
    batch_stats_ = ctx.training;
    cached_ = true;
    return out;
}

Tensor BatchNorm::backward(const Tensor& grad_output) {
    require_cache(cached_);
    if (grad_output.shape() != normalized_.shape()) {
        throw std::invalid_argument(name() + ": gradient shape mismatch");
    }
    const std::size_t positions = grad_output.size() / maps_;
    Tensor dgamma({maps_}), dbeta({maps_});
    for (std::size_t p = 0; p < positions; ++p) {
        for (std::size_t f = 0; f < maps_; ++f) {
            const std::size_t i = p * maps_ + f;
            dgamma[f] += grad_output[i] * normalized_[i];
            dbeta[f] += grad_output[i];
        }
    }

    Tensor grad(grad_output.shape());
    const double m = static_cast<double>(positions);
    for (std::size_t p = 0; p < positions; ++p) {
        for (std::size_t f = 0; f < maps_; ++f) {
            const std::size_t i = p * maps_ + f;
            const double g = gamma_.value[f];
            if (batch_stats_) {
                grad[i] = g * inv_std_[f] / m *
                          (m * grad_output[i] - dbeta[f] - normalized_[i] * dgamma[f]);
            } else {
                grad[i] = g * inv_std_[f] * grad_output[i];
            }
        }
    }
    gamma_.grad = std::move(dgamma);
    beta_.grad = std::move(dbeta);
    return grad;
}

// ---- Dense -----------------------------------------------------------------

Dense::Dense(std::string name, std::size_t in_features, std::size_t out_features, Rng& init)
    : Layer(std::move(name)),
      weight_(make_parameter(this->name(), "weight", {in_features, out_features})),
      bias_(make_parameter(this->name(), "bias", {out_features})) {
    glorot_uniform(weight_.value, in_features, out_features, init);
}

Shape Dense::output_shape(const Shape& input) const {
    if (input.empty() || shape_size(input) / input[0] != weight_.value.dim(0)) {
        throw std::invalid_argument(name() + ": input " + shape_string(input) + " does not flatten to " +
                                    std::to_string(weight_.value.dim(0)) + " features");
    }
    return {input[0], weight_.value.dim(1)};
}

Tensor Dense::infer(const Tensor& input) const {
    const Shape out_shape = output_shape(input.shape());
    const std::size_t batch = out_shape[0], in = weight_.value.dim(0), out_n = out_shape[1];
    Tensor out(out_shape);
    for (std::size_t n = 0; n < batch; ++n) {
        double* o = out.raw() + n * out_n;
        std::copy_n(bias_.value.raw(), out_n, o);
        const double* x = input.raw() + n * in;
        for (std::size_t d = 0; d < in; ++d) {
            const double xv = x[d];
            if (xv == 0.0) continue;
            const double* w = weight_.value.raw() + d * out_n;
            for (std::size_t j = 0; j < out_n; ++j) o[j] += xv * w[j];
        }
    }
    return out;
}

Tensor Dense::forward(const Tensor& input, ForwardContext&) {
    Tensor out = infer(input);
    input_ = input;
    cached_ = true;
    return out;
}

Tensor Dense::backward(const Tensor& grad_output) {
    require_cache(cached_);
    const std::size_t batch = input_.dim(0), in = weight_.value.dim(0), out_n = weight_.value.dim(1);
    if (grad_output.shape() != Shape{batch, out_n}) {
        throw std::invalid_argument(name() + ": gradient shape mismatch");
    }
    Tensor dw(weight_.value.shape()), db({out_n}), dx(input_.shape());
    for (std::size_t n = 0; n < batch; ++n) {
        const double* g = grad_output.raw() + n * out_n;
        const double* x = input_.raw() + n * in;
        double* gx = dx.raw() + n * in;
        for (std::size_t j = 0; j < out_n; ++j) db[j] += g[j];
        for (std::size_t d = 0; d < in; ++d) {
            const double* w = weight_.value.raw() + d * out_n;
            double* gw = dw.raw() + d * out_n;
            double acc = 0.0;
            for (std::size_t j = 0; j < out_n; ++j) {
                gw[j] += x[d] * g[j];
                acc += g[j] * w[j];
            }
            gx[d] = acc;
        }
    }
    weight_.grad = std::move(dw);
    bias_.grad = std::move(db);
    return dx;
}

// ---- LSTM ------------------------------------------------------------------

LSTM::LSTM(std::string name, std::size_t in_features, std::size_t hidden, Rng& init)
    : Layer(std::move(name)),
      in_features_(in_features),
      hidden_(hidden),
      input_weight_(make_parameter(this->name(), "input_weight", {in_features, 4 * hidden})),
      recurrent_weight_(make_parameter(this->name(), "recurrent_weight", {hidden, 4 * hidden})),
      bias_(make_parameter(this->name(), "bias", {4 * hidden})) {
    glorot_uniform(input_weight_.value, in_features, 4 * hidden, init);
    glorot_uniform(recurrent_weight_.value, hidden, 4 * hidden, init);
}

Shape LSTM::output_shape(const Shape& input) const {
    if (input.size() < 3 || shape_size(input) / (input[0] * input[1]) != in_features_) {
        throw std::invalid_argument(name() + ": input " + shape_string(input) +
                                    " does not give " + std::to_string(in_features_) +
                                    " features per time step");
    }
    return {input[0], hidden_};
}

LSTM::Trace LSTM::run(const Tensor& input) const {
    output_shape(input.shape());
    const std::size_t batch = input.dim(0), steps = input.dim(1), F = in_features_, H = hidden_;
    const std::size_t G = 4 * H;
    Trace tr;
    tr.gates.assign(batch * steps * G, 0.0);
    tr.cells.assign(batch * (steps + 1) * H, 0.0);
    tr.hidden.assign(batch * (steps + 1) * H, 0.0);

    const double* wx = input_weight_.value.raw();
    const double* wh = recurrent_weight_.value.raw();
    std::vector<double> z(G);
    for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t t = 0; t < steps; ++t) {
            std::copy_n(bias_.value.raw(), G, z.data());
            const double* x = input.raw() + (n * steps + t) * F;
            for (std::size_t f = 0; f < F; ++f) {
                const double xv = x[f];
                if (xv == 0.0) continue;
                const double* w = wx + f * G;
                for (std::size_t j = 0; j < G; ++j) z[j] += xv * w[j];
            }
            const double* h_prev = tr.hidden.data() + (n * (steps + 1) + t) * H;
            for (std::size_t k = 0; k < H; ++k) {
                const double hv = h_prev[k];
                if (hv == 0.0) continue;
                const double* w = wh + k * G;
                for (std::size_t j = 0; j < G; ++j) z[j] += hv * w[j];
            }
            double* gate = tr.gates.data() + (n * steps + t) * G;
            for (std::size_t k = 0; k < H; ++k) {
                gate[k] = sigmoid(z[k]);
                gate[H + k] = sigmoid(z[H + k]);
                gate[2 * H + k] = std::tanh(z[2 * H + k]);
                gate[3 * H + k] = sigmoid(z[3 * H + k]);
            }
            const double* c_prev = tr.cells.data() + (n * (steps + 1) + t) * H;
            double* c = tr.cells.data() + (n * (steps + 1) + t + 1) * H;
            double* h = tr.hidden.data() + (n * (steps + 1) + t + 1) * H;
            for (std::size_t k = 0; k < H; ++k) {
                c[k] = gate[H + k] * c_prev[k] + gate[k] * gate[2 * H + k];
                h[k] = gate[3 * H + k] * std::tanh(c[k]);
            }
        }
    }
    return tr;
}

Tensor LSTM::infer(const Tensor& input) const {
    const Trace tr = run(input);
    const std::size_t batch = input.dim(0), steps = input.dim(1);
    Tensor out({batch, hidden_});
    for (std::size_t n = 0; n < batch; ++n) {
        std::copy_n(tr.hidden.data() + (n * (steps + 1) + steps) * hidden_, hidden_,
                    out.raw() + n * hidden_);
    }
    return out;
}

Tensor LSTM::forward(const Tensor& input, ForwardContext&) {
    trace_ = run(input);
    input_ = input;
    cached_ = true;
    const std::size_t batch = input.dim(0), steps = input.dim(1);
    Tensor out({batch, hidden_});
    for (std::size_t n = 0; n < batch; ++n) {
        std::copy_n(trace_.hidden.data() + (n * (steps + 1) + steps) * hidden_, hidden_,
                    out.raw() + n * hidden_);
    }
    return out;
}

Tensor LSTM::backward(const Tensor& grad_output) {
    require_cache(cached_);
    const std::size_t batch = input_.dim(0), steps = input_.dim(1), F = in_features_, H = hidden_;
    const std::size_t G = 4 * H;
    if (grad_output.shape() != Shape{batch, H}) {
        throw std::invalid_argument(name() + ": gradient shape mismatch");
    }

    Tensor dwx(input_weight_.value.shape()), dwh(recurrent_weight_.value.shape()), db({G});
    Tensor dx(input_.shape());
    const double* wx = input_weight_.value.raw();
    const double* wh = recurrent_weight_.value.raw();
    std::vector<double> dh(H), dc(H), dh_prev(H), dz(G);

    for (std::size_t n = 0; n < batch; ++n) {
        std::copy_n(grad_output.raw() + n * H, H, dh.data());
        std::fill(dc.begin(), dc.end(), 0.0);
        for (std::size_t t = steps; t-- > 0;) {
            const double* gate = trace_.gates.data() + (n * steps + t) * G;
            const double* c_prev = trace_.cells.data() + (n * (steps + 1) + t) * H;
            const double* c = trace_.cells.data() + (n * (steps + 1) + t + 1) * H;
            const double* h_prev = trace_.hidden.data() + (n * (steps + 1) + t) * H;
            for (std::size_t k = 0; k < H; ++k) {
                const double i = gate[k], f = gate[H + k], g = gate[2 * H + k], o = gate[3 * H + k];
                const double tc = std::tanh(c[k]);
                dc[k] += dh[k] * o * (1.0 - tc * tc);
                dz[k] = dc[k] * g * i * (1.0 - i);
                dz[H + k] = dc[k] * c_prev[k] * f * (1.0 - f);
                dz[2 * H + k] = dc[k] * i * (1.0 - g * g);
                dz[3 * H + k] = dh[k] * tc * o * (1.0 - o);
                dc[k] *= f;
            }
            for (std::size_t j = 0; j < G; ++j) db[j] += dz[j];

            const double* x = input_.raw() + (n * steps + t) * F;
            double* gx = dx.raw() + (n * steps + t) * F;
            for (std::size_t f = 0; f < F; ++f) {
                const double* w = wx + f * G;
                double* gw = dwx.raw() + f * G;
                const double xv = x[f];
                double acc = 0.0;
                for (std::size_t j = 0; j < G; ++j) {
                    gw[j] += xv * dz[j];
                    acc += dz[j] * w[j];
                }
                gx[f] = acc;
            }
            for (std::size_t k = 0; k < H; ++k) {
                const double* w = wh + k * G;
                double* gw = dwh.raw() + k * G;
                const double hv = h_prev[k];
                double acc = 0.0;
                for (std::size_t j = 0; j < G; ++j) {
                    gw[j] += hv * dz[j];
                    acc += dz[j] * w[j];
                }
                dh_prev[k] = acc;
            }
            dh.swap(dh_prev);
        }
    }
    input_weight_.grad = std::move(dwx);
    recurrent_weight_.grad = std::move(dwh);
    bias_.grad = std::move(db);
    return dx;
}

// ---- Softmax ---------------------------------------------------------------

Tensor Softmax::forward(const Tensor& input, ForwardContext&) {
    output_ = softmax(input);
    cached_ = true;
    return output_;
}

Tensor Softmax::backward(const Tensor& grad_output) {
    require_cache(cached_);
    return softmax_backward(output_, grad_output);
}

}  // namespace har
