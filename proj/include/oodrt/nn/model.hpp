#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "oodrt/core/rng.hpp"
#include "oodrt/nn/layers.hpp"
#include "oodrt/nn/tensor.hpp"

namespace oodrt::nn {

struct Parameter {
    std::string name;
    Tensor value;
};

// Ordered layer list with named parameters. Parameters are stored flat in
// layer order (weight, bias); `param_offset(i)` locates layer i's block.
class ModelGraph {
public:
    ModelGraph() = default;

    ModelGraph(std::string name, Dims input_dims, std::vector<LayerSpec> specs)
        : name_(std::move(name)), specs_(std::move(specs)) {
        check_dims(input_dims);
        if (specs_.empty()) throw config_error("model '" + name_ + "' has no layers");
        Dims cur = std::move(input_dims);
        for (std::size_t i = 0; i < specs_.size(); ++i) {
            std::string err;
            Dims next = specs_[i].output_dims(cur, &err);
            if (next.empty())
                throw config_error("model '" + name_ + "' layer " + std::to_string(i) + " (" +
                                   to_string(specs_[i].kind) + "): " + err);
            layer_in_.push_back(cur);
            offsets_.push_back(params_.size());
            const auto pd = specs_[i].param_dims();
            for (std::size_t p = 0; p < pd.size(); ++p)
                params_.push_back({name_ + "." + std::to_string(i) + (p == 0 ? ".weight" : ".bias"), Tensor(pd[p])});
            cur = std::move(next);
        }
        offsets_.push_back(params_.size());
        output_ = std::move(cur);
    }

    const std::string& name() const noexcept { return name_; }
    std::size_t layer_count() const noexcept { return specs_.size(); }
    const LayerSpec& layer(std::size_t i) const { return specs_.at(i); }
    const std::vector<LayerSpec>& layers() const noexcept { return specs_; }
    const Dims& input_dims() const { return layer_in_.front(); }
    const Dims& layer_input_dims(std::size_t i) const { return layer_in_.at(i); }
    const Dims& output_dims() const noexcept { return output_; }

    std::vector<Parameter>& params() noexcept { return params_; }
    const std::vector<Parameter>& params() const noexcept { return params_; }
    std::size_t param_offset(std::size_t layer) const { return offsets_.at(layer); }

    Tensor& weight(std::size_t layer) { return params_.at(offsets_.at(layer)).value; }
    const Tensor& weight(std::size_t layer) const { return params_.at(offsets_.at(layer)).value; }
    Tensor& bias(std::size_t layer) { return params_.at(offsets_.at(layer) + 1).value; }
    const Tensor& bias(std::size_t layer) const { return params_.at(offsets_.at(layer) + 1).value; }

    Parameter* find(const std::string& pname) {
        for (auto& p : params_)
            if (p.name == pname) return &p;
        return nullptr;
    }
    const Parameter* find(const std::string& pname) const {
        for (const auto& p : params_)
            if (p.name == pname) return &p;
        return nullptr;
    }

    // Glorot-uniform weights, zero biases.
    void init_weights(Rng& rng) {
        for (std::size_t i = 0; i < specs_.size(); ++i) {
            if (!specs_[i].has_params()) continue;
            const double a = std::sqrt(6.0 / static_cast<double>(specs_[i].fan_in() + specs_[i].fan_out()));
            for (auto& v : weight(i).values()) v = static_cast<float>(uniform(rng, -a, a));
            bias(i).fill(0.0f);
        }
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += p.value.size();
        return n;
    }

private:
    std::string name_;
    std::vector<LayerSpec> specs_;
    std::vector<Dims> layer_in_;
    std::vector<std::size_t> offsets_;
    std::vector<Parameter> params_;
    Dims output_;
};

// Layer inputs recorded by forward; activations[i] is the input of layer i,
// activations.back() the model output.
struct ForwardCache {
    std::vector<Tensor> activations;
    bool empty() const noexcept { return activations.empty(); }
};

// Gradients for every parameter, aligned with ModelGraph::params(), plus the
// gradient with respect to the model input.
struct Gradients {
    std::vector<std::string> names;
    std::vector<Tensor> params;
    Tensor input;

    static Gradients zeros_like(const ModelGraph& model) {
        Gradients g;
        for (const auto& p : model.params()) {
            g.names.push_back(p.name);
            g.params.emplace_back(p.value.dims());
        }
        g.input = Tensor(model.input_dims());
        return g;
    }

    const Tensor* find(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return &params[i];
        return nullptr;
    }

    void add(const Gradients& other, float scale = 1.0f) {
        if (other.params.size() != params.size()) throw argument_error("gradient sets differ in size");
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& a = params[i].values();
            const auto& b = other.params[i].values();
            if (a.size() != b.size()) throw argument_error("gradient shapes differ for " + names[i]);
            for (std::size_t j = 0; j < a.size(); ++j) a[j] += scale * b[j];
        }
    }

    void scale(float s) {
        for (auto& t : params)
            for (auto& v : t.values()) v *= s;
    }

    double squared_norm() const {
        double n = 0.0;
        for (const auto& t : params)
            for (float v : t.values()) n += static_cast<double>(v) * v;
        return n;
    }
};

namespace detail {

inline Tensor apply_layer(const ModelGraph& model, std::size_t i, const Tensor& x) {
    const LayerSpec& s = model.layer(i);
    const Dims& in = model.layer_input_dims(i);
    switch (s.kind) {
        case LayerKind::dense: {
            Tensor y({s.out_features});
            kernels::dense_forward(s.in_features, s.out_features, x.data(), model.weight(i).data(),
                                   model.bias(i).data(), y.data());
            return y;
        }
        case LayerKind::conv2d: {
            const auto g = kernels::conv_geom(s, in);
            Tensor y({g.out_c, g.out_h, g.out_w});
            kernels::conv2d_forward(g, x.data(), model.weight(i).data(), model.bias(i).data(), y.data());
            return y;
        }
        case LayerKind::relu: {
            Tensor y = x;
            for (auto& v : y.values()) v = v > 0.0f ? v : 0.0f;
            return y;
        }
        case LayerKind::sigmoid: {
            Tensor y = x;
            for (auto& v : y.values()) v = kernels::sigmoid(v);
            return y;
        }
        case LayerKind::flatten: return x.reshaped({x.size()});
        case LayerKind::reshape: return x.reshaped(s.shape);
        case LayerKind::upsample2x: {
            Tensor y({in[0], in[1] * 2, in[2] * 2});
            kernels::upsample2x_forward(in, x.data(), y.data());
            return y;
        }
        case LayerKind::crop: {
            Tensor y({in[0], s.shape[0], s.shape[1]});
            kernels::crop_forward(in, y.dims(), x.data(), y.data());
            return y;
        }
    }
    throw usage_error("unknown layer kind");
}

}  // namespace detail

// Runs the model. When `cache` is given, every layer input and the output
// are recorded for backward.
inline Tensor forward(const ModelGraph& model, const Tensor& input, ForwardCache* cache = nullptr) {
    if (input.dims() != model.input_dims())
        throw config_error("model '" + model.name() + "' layer 0 (" + to_string(model.layer(0).kind) +
                           ") expects input " + dims_to_string(model.input_dims()) + ", got " +
                           dims_to_string(input.dims()));
    if (cache) {
        cache->activations.clear();
        cache->activations.reserve(model.layer_count() + 1);
        cache->activations.push_back(input);
        for (std::size_t i = 0; i < model.layer_count(); ++i)
            cache->activations.push_back(detail::apply_layer(model, i, cache->activations.back()));
        return cache->activations.back();
    }
    Tensor cur = input;
    for (std::size_t i = 0; i < model.layer_count(); ++i) cur = detail::apply_layer(model, i, cur);
    return cur;
}

// Backpropagates `grad_output` through the cached forward pass.
inline Gradients backward(const ModelGraph& model, const ForwardCache& cache, const Tensor& grad_output) {
    if (cache.activations.size() != model.layer_count() + 1)
        throw usage_error("backward on model '" + model.name() + "' requires a forward cache");
    if (grad_output.dims() != model.output_dims())
        throw argument_error("backward: loss gradient dims " + dims_to_string(grad_output.dims()) +
                             " do not match model output " + dims_to_string(model.output_dims()));
    Gradients grads = Gradients::zeros_like(model);
    Tensor g = grad_output;
    for (std::size_t ri = model.layer_count(); ri-- > 0;) {
        const LayerSpec& s = model.layer(ri);
        const Dims& in = model.layer_input_dims(ri);
        const Tensor& x = cache.activations[ri];
        const Tensor& y = cache.activations[ri + 1];
        Tensor gx(in);
        switch (s.kind) {
            case LayerKind::dense: {
                const std::size_t off = model.param_offset(ri);
                kernels::dense_backward(s.in_features, s.out_features, x.data(), model.weight(ri).data(), g.data(),
                                        grads.params[off].data(), grads.params[off + 1].data(), gx.data());
                break;
            }
            case LayerKind::conv2d: {
                const std::size_t off = model.param_offset(ri);
                kernels::conv2d_backward(kernels::conv_geom(s, in), x.data(), model.weight(ri).data(), g.data(),
                                         grads.params[off].data(), grads.params[off + 1].data(), gx.data());
                break;
            }
            case LayerKind::relu:
                for (std::size_t j = 0; j < gx.size(); ++j) gx[j] = x[j] > 0.0f ? g[j] : 0.0f;
                break;
            case LayerKind::sigmoid:
                for (std::size_t j = 0; j < gx.size(); ++j) gx[j] = g[j] * y[j] * (1.0f - y[j]);
                break;
            case LayerKind::flatten:
            case LayerKind::reshape: gx = std::move(g).reshaped(in); break;
            case LayerKind::upsample2x: kernels::upsample2x_backward(in, g.data(), gx.data()); break;
            case LayerKind::crop: kernels::crop_backward(in, g.dims(), g.data(), gx.data()); break;
        }
        g = std::move(gx);
    }
    grads.input = std::move(g);
    return grads;
}

}  // namespace oodrt::nn
