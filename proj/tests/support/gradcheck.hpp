#pragma once

// Test-only oracles for the network substrate: a nested-loop direct
// convolution, a double-precision reference forward pass and a central
// finite-difference gradient checker built on it. None of them
// uses the library's kernels.

#include <algorithm>
#include <cmath>
#include <vector>

#include "oodrt/core/rng.hpp"
#include "oodrt/nn/model.hpp"

namespace oodrt::oracle {

// Direct convolution over [C,H,W] with zero padding.
inline nn::Tensor direct_conv2d(const nn::Tensor& in, const nn::Tensor& w, const nn::Tensor& b, std::size_t stride,
                                std::size_t pad) {
    const long C = static_cast<long>(in.dim(0)), H = static_cast<long>(in.dim(1)), W = static_cast<long>(in.dim(2));
    const long OC = static_cast<long>(w.dim(0)), K = static_cast<long>(w.dim(2));
    const long S = static_cast<long>(stride), P = static_cast<long>(pad);
    const long OH = (H + 2 * P - K) / S + 1, OW = (W + 2 * P - K) / S + 1;
    nn::Tensor out({static_cast<std::size_t>(OC), static_cast<std::size_t>(OH), static_cast<std::size_t>(OW)});
    for (long oc = 0; oc < OC; ++oc)
        for (long oy = 0; oy < OH; ++oy)
            for (long ox = 0; ox < OW; ++ox) {
                double acc = b[static_cast<std::size_t>(oc)];
                for (long c = 0; c < C; ++c)
                    for (long ky = 0; ky < K; ++ky)
                        for (long kx = 0; kx < K; ++kx) {
                            const long iy = oy * S + ky - P, ix = ox * S + kx - P;
                            if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                            acc += static_cast<double>(w[static_cast<std::size_t>(((oc * C + c) * K + ky) * K + kx)]) *
                                   in[static_cast<std::size_t>((c * H + iy) * W + ix)];
                        }
                out[static_cast<std::size_t>((oc * OH + oy) * OW + ox)] = static_cast<float>(acc);
            }
    return out;
}

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped_kinks = 0;  // coordinates whose +/-h straddle a relu kink
};

// Double-precision forward pass written directly from the layer definitions.
// `params[p]` mirrors model.params()[p]. Relu input signs are appended to
// `signs` when given.
inline std::vector<double> reference_forward(const nn::ModelGraph& model, const std::vector<std::vector<double>>& params,
                                             std::vector<double> x, std::vector<bool>* signs = nullptr) {
    for (std::size_t i = 0; i < model.layer_count(); ++i) {
        const nn::LayerSpec& s = model.layer(i);
        const nn::Dims& in = model.layer_input_dims(i);
        const nn::Dims& out = i + 1 < model.layer_count() ? model.layer_input_dims(i + 1) : model.output_dims();
        std::vector<double> y(nn::dims_product(out), 0.0);
        switch (s.kind) {
            case nn::LayerKind::dense: {
                const auto& w = params[model.param_offset(i)];
                const auto& b = params[model.param_offset(i) + 1];
                for (std::size_t o = 0; o < s.out_features; ++o) {
                    double acc = b[o];
                    for (std::size_t k = 0; k < s.in_features; ++k) acc += w[o * s.in_features + k] * x[k];
                    y[o] = acc;
                }
                break;
            }
            case nn::LayerKind::conv2d: {
                const auto& w = params[model.param_offset(i)];
                const auto& b = params[model.param_offset(i) + 1];
                const long C = static_cast<long>(in[0]), H = static_cast<long>(in[1]), W = static_cast<long>(in[2]);
                const long OH = static_cast<long>(out[1]), OW = static_cast<long>(out[2]);
                const long K = static_cast<long>(s.kernel), S = static_cast<long>(s.stride);
                const long P = static_cast<long>(s.padding);
                for (long oc = 0; oc < static_cast<long>(out[0]); ++oc)
                    for (long oy = 0; oy < OH; ++oy)
                        for (long ox = 0; ox < OW; ++ox) {
                            double acc = b[static_cast<std::size_t>(oc)];
                            for (long c = 0; c < C; ++c)
                                for (long ky = 0; ky < K; ++ky)
                                    for (long kx = 0; kx < K; ++kx) {
                                        const long iy = oy * S + ky - P, ix = ox * S + kx - P;
                                        if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                                        acc += w[static_cast<std::size_t>(((oc * C + c) * K + ky) * K + kx)] *
                                               x[static_cast<std::size_t>((c * H + iy) * W + ix)];
                                    }
                            y[static_cast<std::size_t>((oc * OH + oy) * OW + ox)] = acc;
                        }
                break;
            }
            case nn::LayerKind::relu:
                for (std::size_t j = 0; j < x.size(); ++j) {
                    if (signs) signs->push_back(x[j] > 0.0);
                    y[j] = x[j] > 0.0 ? x[j] : 0.0;
                }
                break;
            case nn::LayerKind::sigmoid:
                for (std::size_t j = 0; j < x.size(); ++j) y[j] = 1.0 / (1.0 + std::exp(-x[j]));
                break;
            case nn::LayerKind::flatten:
            case nn::LayerKind::reshape:
                y = x;
                break;
            case nn::LayerKind::upsample2x:
                for (std::size_t c = 0; c < out[0]; ++c)
                    for (std::size_t yy = 0; yy < out[1]; ++yy)
                        for (std::size_t xx = 0; xx < out[2]; ++xx)
                            y[(c * out[1] + yy) * out[2] + xx] = x[(c * in[1] + yy / 2) * in[2] + xx / 2];
                break;
            case nn::LayerKind::crop:
                for (std::size_t c = 0; c < out[0]; ++c)
                    for (std::size_t yy = 0; yy < out[1]; ++yy)
                        for (std::size_t xx = 0; xx < out[2]; ++xx)
                            y[(c * out[1] + yy) * out[2] + xx] = x[(c * in[1] + yy) * in[2] + xx];
                break;
        }
        x = std::move(y);
    }
    return x;
}

// Compares backward() against central differences of L = sum(r * y) for a
// fixed random r, with L evaluated by reference_forward in double precision.
// Relative error is |a - n| / max(|a|, |n|, floor).
inline GradCheckResult finite_difference_check(const nn::ModelGraph& model, const nn::Tensor& input, Rng& rng,
                                               double step = 1e-5, double floor = 1e-3) {
    nn::Tensor r(model.output_dims());
    for (auto& v : r.values()) v = static_cast<float>(uniform(rng, -1.0, 1.0));

    std::vector<std::vector<double>> params;
    for (const auto& p : model.params()) params.emplace_back(p.value.values().begin(), p.value.values().end());
    std::vector<double> x(input.values().begin(), input.values().end());

    auto loss = [&](std::vector<bool>* signs) {
        const auto y = reference_forward(model, params, x, signs);
        double l = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) l += static_cast<double>(r[i]) * y[i];
        return l;
    };

    nn::ForwardCache cache;
    nn::forward(model, input, &cache);
    const nn::Gradients g = nn::backward(model, cache, r);

    GradCheckResult res;
    auto probe = [&](double& slot, double analytic) {
        const double orig = slot;
        std::vector<bool> sp, sm;
        slot = orig + step;
        const double lp = loss(&sp);
        slot = orig - step;
        const double lm = loss(&sm);
        slot = orig;
        if (sp != sm) {
            ++res.skipped_kinks;
            return;
        }
        const double numeric = (lp - lm) / (2.0 * step);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
        res.max_rel_error = std::max(res.max_rel_error, std::abs(analytic - numeric) / denom);
        ++res.checked;
    };
    for (std::size_t p = 0; p < params.size(); ++p)
        for (std::size_t j = 0; j < params[p].size(); ++j) probe(params[p][j], g.params[p][j]);
    for (std::size_t j = 0; j < x.size(); ++j) probe(x[j], g.input[j]);
    return res;
}

inline nn::Tensor random_tensor(const nn::Dims& dims, Rng& rng, double lo = -1.0, double hi = 1.0) {
    nn::Tensor t(dims);
    for (auto& v : t.values()) v = static_cast<float>(uniform(rng, lo, hi));
    return t;
}

// A small random model whose layer list exercises `kind`, used by the
// gradient property test. Returns the model and a matching input.
inline std::pair<nn::ModelGraph, nn::Tensor> random_model_for(nn::LayerKind kind, Rng& rng) {
    using nn::LayerSpec;
    const std::size_t c = static_cast<std::size_t>(uniform_int(rng, 1, 3));
    const std::size_t h = static_cast<std::size_t>(uniform_int(rng, 3, 6));
    const std::size_t w = static_cast<std::size_t>(uniform_int(rng, 3, 6));
    const std::size_t oc = static_cast<std::size_t>(uniform_int(rng, 1, 3));
    const std::size_t k = uniform_int(rng, 0, 1) ? 3 : 1;
    const std::size_t stride = static_cast<std::size_t>(uniform_int(rng, 1, 2));
    const std::size_t pad = k == 3 ? static_cast<std::size_t>(uniform_int(rng, 0, 1)) : 0;
    std::vector<LayerSpec> specs;
    nn::Dims in{c, h, w};
    switch (kind) {
        case nn::LayerKind::dense: {
            const std::size_t n = static_cast<std::size_t>(uniform_int(rng, 2, 10));
            in = {n};
            const std::size_t hid = static_cast<std::size_t>(uniform_int(rng, 1, 8));
            specs = {LayerSpec::dense(n, hid), LayerSpec::sigmoid(),
                     LayerSpec::dense(hid, static_cast<std::size_t>(uniform_int(rng, 1, 5)))};
            break;
        }
        case nn::LayerKind::conv2d:
            specs = {LayerSpec::conv2d(c, oc, k, stride, pad), LayerSpec::sigmoid(), LayerSpec::conv2d(oc, 2, 1)};
            break;
        case nn::LayerKind::relu:
            specs = {LayerSpec::conv2d(c, oc, k, 1, pad), LayerSpec::relu(), LayerSpec::conv2d(oc, 2, 1)};
            break;
        case nn::LayerKind::sigmoid:
            specs = {LayerSpec::conv2d(c, oc, k, stride, pad), LayerSpec::sigmoid()};
            break;
        case nn::LayerKind::flatten: {
            specs = {LayerSpec::conv2d(c, oc, k, stride, pad), LayerSpec::flatten()};
            const nn::Dims mid = specs[0].output_dims(in, nullptr);
            specs.push_back(LayerSpec::dense(nn::dims_product(mid), 3));
            break;
        }
        case nn::LayerKind::upsample2x:
            specs = {LayerSpec::conv2d(c, oc, k, 1, pad), LayerSpec::upsample2x(), LayerSpec::conv2d(oc, 2, 3, 1, 1)};
            break;
        case nn::LayerKind::reshape: {
            const std::size_t n = static_cast<std::size_t>(uniform_int(rng, 2, 6));
            in = {n};
            specs = {LayerSpec::dense(n, oc * h * w), LayerSpec::reshape({oc, h, w}), LayerSpec::conv2d(oc, 2, k, 1, pad)};
            break;
        }
        case nn::LayerKind::crop:
            specs = {LayerSpec::conv2d(c, oc, k, 1, pad), LayerSpec::upsample2x(), LayerSpec::crop(h + 1, w + 1)};
            if (k == 3 && pad == 0) specs.back() = LayerSpec::crop(2 * (h - 2) - 1, 2 * (w - 2) - 1);
            break;
    }
    nn::ModelGraph m("g", in, specs);
    m.init_weights(rng);
    for (auto& p : m.params())
        if (p.name.ends_with(".bias"))
            for (auto& v : p.value.values()) v = static_cast<float>(uniform(rng, -0.5, 0.5));
    return {std::move(m), random_tensor(in, rng)};
}

}  // namespace oodrt::oracle
