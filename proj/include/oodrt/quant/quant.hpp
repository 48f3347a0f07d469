#pragma once

// Per-tensor affine int8 quantization with dynamic activation ranges.
//
//   q = clamp(round(x / scale) + zero_point, -128, 127)
//   x^ = scale * (q - zero_point)
//
// round() is half-away-from-zero. Weights are quantized once from their own
// min/max; activations are quantized on every call from the observed min/max
// of that call's input. Products accumulate in int32 and are rescaled once.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "oodrt/nn/model.hpp"
#include "oodrt/nn/serialize.hpp"

namespace oodrt::quant {

using nn::Dims;
using nn::Tensor;

struct QuantParams {
    float scale = 1.0f;
    std::int32_t zero_point = 0;
    bool operator==(const QuantParams&) const = default;
};

// |q - zp| <= 255, so one product is at most 255^2 and an int32 accumulator
// holds at least this many terms without overflow.
inline constexpr std::size_t kMaxAccumulationDepth =
    static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max()) / (255 * 255);

// Output error of a quantized dot product of depth K is at most
// sx * sw * K * 0.5 * kErrorBoundConstant: each term contributes
// |x|*sw/2 + |w|*sx/2 + sx*sw/4 with |x| <= 255 sx and |w| <= 255 sw.
inline constexpr double kErrorBoundConstant = 511.0;

inline QuantParams compute_qparams(float min, float max) {
    if (!std::isfinite(min) || !std::isfinite(max)) throw argument_error("compute_qparams: non-finite range");
    if (min > max) throw argument_error("compute_qparams: min > max");
    const float lo = std::min(min, 0.0f);
    const float hi = std::max(max, 0.0f);
    if (lo == 0.0f && hi == 0.0f) return {1.0f, 0};
    const float scale = (hi - lo) / 255.0f;
    // Zero point from the exact ratio so symmetric ranges land on 0.
    const double ratio = -static_cast<double>(lo) * 255.0 / (static_cast<double>(hi) - lo);
    const auto zp = static_cast<std::int32_t>(std::round(ratio)) - 128;
    return {scale, std::clamp<std::int32_t>(zp, -128, 127)};
}

inline std::int8_t quantize_value(float x, const QuantParams& p) {
    const float r = std::round(x / p.scale);
    // Clamp in float first so huge ratios never overflow the integer cast.
    const float q = std::clamp(r + static_cast<float>(p.zero_point), -128.0f, 127.0f);
    return static_cast<std::int8_t>(q);
}

inline float dequantize_value(std::int8_t q, const QuantParams& p) {
    return p.scale * static_cast<float>(static_cast<std::int32_t>(q) - p.zero_point);
}

struct QuantTensor {
    Dims dims;
    std::vector<std::int8_t> data;
    QuantParams params;

    std::size_t size() const noexcept { return data.size(); }
    bool operator==(const QuantTensor&) const = default;
};

inline std::pair<float, float> min_max(std::span<const float> v) {
    if (v.empty()) return {0.0f, 0.0f};
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return {*lo, *hi};
}

inline QuantTensor quantize_tensor(const Tensor& t, const QuantParams& p) {
    if (!(p.scale > 0.0f) || !std::isfinite(p.scale) || p.zero_point < -128 || p.zero_point > 127)
        throw argument_error("quantize_tensor: invalid quantization parameters");
    QuantTensor q{t.dims(), std::vector<std::int8_t>(t.size()), p};
    for (std::size_t i = 0; i < t.size(); ++i) q.data[i] = quantize_value(t[i], p);
    return q;
}

inline QuantTensor quantize_tensor(const Tensor& t) {
    const auto [lo, hi] = min_max(t.data());
    return quantize_tensor(t, compute_qparams(lo, hi));
}

inline Tensor dequantize_tensor(const QuantTensor& q) {
    Tensor t(q.dims);
    for (std::size_t i = 0; i < q.size(); ++i) t[i] = dequantize_value(q.data[i], q.params);
    return t;
}

namespace detail {

// Zero-point-centered values, widened so products cannot wrap.
inline std::vector<std::int16_t> centered(const QuantTensor& q) {
    std::vector<std::int16_t> c(q.size());
    for (std::size_t i = 0; i < q.size(); ++i)
        c[i] = static_cast<std::int16_t>(static_cast<std::int32_t>(q.data[i]) - q.params.zero_point);
    return c;
}

}  // namespace detail

// A dense or conv2d layer's int8 weights plus float bias.
struct QuantLinear {
    nn::LayerSpec spec;
    Dims input_dims;
    QuantTensor weight;
    Tensor bias;
    std::vector<std::int16_t> weight_centered;

    QuantLinear() = default;
    QuantLinear(nn::LayerSpec s, Dims in, QuantTensor w, Tensor b)
        : spec(std::move(s)), input_dims(std::move(in)), weight(std::move(w)), bias(std::move(b)) {
        if (spec.fan_in() > kMaxAccumulationDepth)
            throw numeric_error("quantized layer fan-in " + std::to_string(spec.fan_in()) +
                                " exceeds the int32 accumulation bound " + std::to_string(kMaxAccumulationDepth));
        weight_centered = detail::centered(weight);
    }
};

// Quantizes `input` from its own range and applies the layer with int32
// accumulation. Handles both dense and conv2d kernels.
inline Tensor qlinear_forward(const Tensor& input, const QuantLinear& layer) {
    const auto& s = layer.spec;
    std::string err;
    const Dims out_dims = s.output_dims(input.dims(), &err);
    if (out_dims.empty() || !s.has_params()) throw argument_error("qlinear_forward: " + err);
    const auto [lo, hi] = min_max(input.data());
    const QuantParams in_p = compute_qparams(lo, hi);
    std::vector<std::int16_t> xq(input.size());
    for (std::size_t i = 0; i < input.size(); ++i)
        xq[i] = static_cast<std::int16_t>(static_cast<std::int32_t>(quantize_value(input[i], in_p)) - in_p.zero_point);
    const float out_scale = in_p.scale * layer.weight.params.scale;
    const auto& wc = layer.weight_centered;
    Tensor out(out_dims);
    if (s.kind == nn::LayerKind::dense) {
        const std::size_t K = s.in_features;
        for (std::size_t o = 0; o < s.out_features; ++o) {
            const std::int16_t* w = wc.data() + o * K;
            std::int32_t acc = 0;
            for (std::size_t i = 0; i < K; ++i) acc += static_cast<std::int32_t>(w[i]) * xq[i];
            out[o] = static_cast<float>(acc) * out_scale + layer.bias[o];
        }
        return out;
    }
    const auto g = nn::kernels::conv_geom(s, input.dims());
    const std::size_t plane = g.out_h * g.out_w;
    std::vector<std::int32_t> acc(plane);
    for (std::size_t oc = 0; oc < g.out_c; ++oc) {
        std::fill(acc.begin(), acc.end(), 0);
        for (std::size_t ic = 0; ic < g.in_c; ++ic) {
            const std::int16_t* ip = xq.data() + ic * g.in_h * g.in_w;
            for (std::size_t ky = 0; ky < g.k; ++ky) {
                std::size_t oy0, oy1;
                g.range(ky, g.in_h, g.out_h, oy0, oy1);
                for (std::size_t kx = 0; kx < g.k; ++kx) {
                    std::size_t ox0, ox1;
                    g.range(kx, g.in_w, g.out_w, ox0, ox1);
                    const std::int32_t wv = wc[((oc * g.in_c + ic) * g.k + ky) * g.k + kx];
                    if (wv == 0 || ox1 <= ox0) continue;
                    const std::size_t n = ox1 - ox0;
                    const std::size_t ix0 = ox0 * g.stride + kx - g.pad;
                    for (std::size_t oy = oy0; oy < oy1; ++oy) {
                        const std::size_t iy = oy * g.stride + ky - g.pad;
                        const std::int16_t* irow = ip + iy * g.in_w + ix0;
                        std::int32_t* arow = acc.data() + oy * g.out_w + ox0;
                        if (g.stride == 1) {
                            for (std::size_t j = 0; j < n; ++j) arow[j] += wv * irow[j];
                        } else {
                            for (std::size_t j = 0; j < n; ++j) arow[j] += wv * irow[2 * j];
                        }
                    }
                }
            }
        }
        float* o = out.data().data() + oc * plane;
        const float b = layer.bias[oc];
        for (std::size_t i = 0; i < plane; ++i) o[i] = static_cast<float>(acc[i]) * out_scale + b;
    }
    return out;
}

// Float model with every dense/conv2d weight replaced by a per-tensor int8
// copy. `graph` keeps the layer structure (its weights hold the dequantized
// values); non-parametric layers run in float.
class QuantizedModel {
public:
    QuantizedModel() = default;

    explicit QuantizedModel(const nn::ModelGraph& model) : graph_(model) {
        bool any = false;
        for (std::size_t i = 0; i < graph_.layer_count(); ++i) {
            const auto& s = graph_.layer(i);
            if (!s.has_params()) {
                linear_.emplace_back();
                continue;
            }
            any = true;
            QuantTensor w = quantize_tensor(model.weight(i));
            graph_.weight(i) = dequantize_tensor(w);
            linear_.emplace_back(s, graph_.layer_input_dims(i), std::move(w), model.bias(i));
        }
        if (!any) throw argument_error("quantize_model: model '" + model.name() + "' has no dense/conv layer");
    }

    const nn::ModelGraph& graph() const noexcept { return graph_; }
    const QuantLinear& linear(std::size_t layer) const { return linear_.at(layer); }

    Tensor forward(const Tensor& input) const {
        if (input.dims() != graph_.input_dims())
            throw config_error("quantized model '" + graph_.name() + "' layer 0 expects input " +
                               nn::dims_to_string(graph_.input_dims()) + ", got " +
                               nn::dims_to_string(input.dims()));
        Tensor cur = input;
        for (std::size_t i = 0; i < graph_.layer_count(); ++i)
            cur = graph_.layer(i).has_params() ? qlinear_forward(cur, linear_[i]) : nn::detail::apply_layer(graph_, i, cur);
        return cur;
    }

    std::vector<nn::OodmEntry> entries() const {
        std::vector<nn::OodmEntry> out;
        for (std::size_t i = 0; i < graph_.layer_count(); ++i) {
            if (!graph_.layer(i).has_params()) continue;
            const std::size_t off = graph_.param_offset(i);
            nn::OodmEntry w;
            w.name = graph_.params()[off].name;
            w.dtype = nn::DType::i8;
            w.dims = linear_[i].weight.dims;
            w.i8 = linear_[i].weight.data;
            w.scale = linear_[i].weight.params.scale;
            w.zero_point = linear_[i].weight.params.zero_point;
            out.push_back(std::move(w));
            out.push_back(nn::OodmEntry::from_tensor(graph_.params()[off + 1].name, linear_[i].bias));
        }
        return out;
    }

    // Rebuilds from entries, given a graph with the same structure.
    static QuantizedModel from_entries(nn::ModelGraph structure, const std::vector<nn::OodmEntry>& entries) {
        QuantizedModel m;
        m.graph_ = std::move(structure);
        for (std::size_t i = 0; i < m.graph_.layer_count(); ++i) {
            const auto& s = m.graph_.layer(i);
            if (!s.has_params()) {
                m.linear_.emplace_back();
                continue;
            }
            const std::size_t off = m.graph_.param_offset(i);
            const auto& we = nn::find_entry(entries, m.graph_.params()[off].name);
            const auto& be = nn::find_entry(entries, m.graph_.params()[off + 1].name);
            if (we.dtype != nn::DType::i8 || we.dims != m.graph_.weight(i).dims())
                throw io_error("OODM: '" + we.name + "' is not an int8 tensor of the expected shape");
            QuantTensor w{we.dims, we.i8, {we.scale, we.zero_point}};
            m.graph_.weight(i) = dequantize_tensor(w);
            Tensor b = be.tensor();
            m.graph_.bias(i) = b;
            m.linear_.emplace_back(s, m.graph_.layer_input_dims(i), std::move(w), std::move(b));
        }
        return m;
    }

private:
    nn::ModelGraph graph_;
    std::vector<QuantLinear> linear_;
};

inline QuantizedModel quantize_model(const nn::ModelGraph& model) { return QuantizedModel(model); }

}  // namespace oodrt::quant
