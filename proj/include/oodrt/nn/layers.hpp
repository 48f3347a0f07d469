#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "oodrt/nn/tensor.hpp"

namespace oodrt::nn {

// The fixed layer menu. `reshape` and `crop` are shape plumbing for the
// decoder (dense -> feature map, trim of upsampled maps to odd extents).
enum class LayerKind : std::uint8_t { dense, conv2d, relu, sigmoid, flatten, upsample2x, reshape, crop };

inline const char* to_string(LayerKind k) {
    switch (k) {
        case LayerKind::dense: return "dense";
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::relu: return "relu";
        case LayerKind::sigmoid: return "sigmoid";
        case LayerKind::flatten: return "flatten";
        case LayerKind::upsample2x: return "upsample2x";
        case LayerKind::reshape: return "reshape";
        case LayerKind::crop: return "crop";
    }
    return "?";
}

struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    std::size_t in_features = 0;
    std::size_t out_features = 0;
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel = 0;
    std::size_t stride = 1;
    std::size_t padding = 0;
    Dims shape;  // reshape target, or crop [H, W]

    static LayerSpec dense(std::size_t in, std::size_t out) {
        LayerSpec s;
        s.kind = LayerKind::dense;
        s.in_features = in;
        s.out_features = out;
        return s;
    }
    // Only stride 1 or 2 and zero padding are supported.
    static LayerSpec conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                            std::size_t stride = 1, std::size_t padding = 0) {
        LayerSpec s;
        s.kind = LayerKind::conv2d;
        s.in_channels = in_ch;
        s.out_channels = out_ch;
        s.kernel = kernel;
        s.stride = stride;
        s.padding = padding;
        return s;
    }
    static LayerSpec relu() { return LayerSpec{}; }
    static LayerSpec sigmoid() {
        LayerSpec s;
        s.kind = LayerKind::sigmoid;
        return s;
    }
    static LayerSpec flatten() {
        LayerSpec s;
        s.kind = LayerKind::flatten;
        return s;
    }
    static LayerSpec upsample2x() {
        LayerSpec s;
        s.kind = LayerKind::upsample2x;
        return s;
    }
    static LayerSpec reshape(Dims target) {
        LayerSpec s;
        s.kind = LayerKind::reshape;
        s.shape = std::move(target);
        return s;
    }
    static LayerSpec crop(std::size_t h, std::size_t w) {
        LayerSpec s;
        s.kind = LayerKind::crop;
        s.shape = {h, w};
        return s;
    }

    bool has_params() const noexcept { return kind == LayerKind::dense || kind == LayerKind::conv2d; }

    // Weight then bias.
    std::vector<Dims> param_dims() const {
        if (kind == LayerKind::dense) return {{out_features, in_features}, {out_features}};
        if (kind == LayerKind::conv2d) return {{out_channels, in_channels, kernel, kernel}, {out_channels}};
        return {};
    }

    std::size_t fan_in() const {
        return kind == LayerKind::dense ? in_features : in_channels * kernel * kernel;
    }
    std::size_t fan_out() const {
        return kind == LayerKind::dense ? out_features : out_channels * kernel * kernel;
    }

    // Output dims for a given input, or a message describing the mismatch.
    Dims output_dims(const Dims& in, std::string* error) const {
        auto fail = [&](const std::string& msg) {
            if (error) *error = msg;
            return Dims{};
        };
        switch (kind) {
            case LayerKind::dense:
                if (dims_product(in) != in_features || in.size() != 1)
                    return fail("dense expects [" + std::to_string(in_features) + "], got " + dims_to_string(in));
                return {out_features};
            case LayerKind::conv2d: {
                if (in.size() != 3 || in[0] != in_channels)
                    return fail("conv2d expects [" + std::to_string(in_channels) + ",H,W], got " + dims_to_string(in));
                if (stride != 1 && stride != 2) return fail("conv2d stride must be 1 or 2");
                if (kernel == 0) return fail("conv2d kernel must be >= 1");
                if (in[1] + 2 * padding < kernel || in[2] + 2 * padding < kernel)
                    return fail("conv2d kernel larger than padded input " + dims_to_string(in));
                return {out_channels, (in[1] + 2 * padding - kernel) / stride + 1,
                        (in[2] + 2 * padding - kernel) / stride + 1};
            }
            case LayerKind::relu:
            case LayerKind::sigmoid: return in;
            case LayerKind::flatten: return {dims_product(in)};
            case LayerKind::upsample2x:
                if (in.size() != 3) return fail("upsample2x expects [C,H,W], got " + dims_to_string(in));
                return {in[0], in[1] * 2, in[2] * 2};
            case LayerKind::reshape:
                if (shape.empty() || dims_product(shape) != dims_product(in))
                    return fail("reshape to " + dims_to_string(shape) + " incompatible with " + dims_to_string(in));
                return shape;
            case LayerKind::crop:
                if (in.size() != 3 || shape.size() != 2 || shape[0] > in[1] || shape[1] > in[2] || shape[0] == 0 ||
                    shape[1] == 0)
                    return fail("crop to " + dims_to_string(shape) + " incompatible with " + dims_to_string(in));
                return {in[0], shape[0], shape[1]};
        }
        return fail("unknown layer kind");
    }
};

namespace kernels {

struct ConvGeom {
    std::size_t in_c, in_h, in_w;
    std::size_t out_c, out_h, out_w;
    std::size_t k, stride, pad;

    // Output index range [lo, hi) along one axis for kernel tap `kk`.
    void range(std::size_t kk, std::size_t in_extent, std::size_t out_extent, std::size_t& lo,
               std::size_t& hi) const {
        const long p = static_cast<long>(pad) - static_cast<long>(kk);
        const long s = static_cast<long>(stride);
        long l = p > 0 ? (p + s - 1) / s : 0;
        long h = (static_cast<long>(in_extent) - 1 + p) / s + 1;
        if (static_cast<long>(in_extent) - 1 + p < 0) h = 0;
        h = std::min<long>(h, static_cast<long>(out_extent));
        lo = static_cast<std::size_t>(std::max<long>(l, 0));
        hi = static_cast<std::size_t>(std::max<long>(h, static_cast<long>(lo)));
    }
};

inline ConvGeom conv_geom(const LayerSpec& s, const Dims& in) {
    return {in[0], in[1], in[2], s.out_channels, (in[1] + 2 * s.padding - s.kernel) / s.stride + 1,
            (in[2] + 2 * s.padding - s.kernel) / s.stride + 1, s.kernel, s.stride, s.padding};
}

inline void conv2d_forward(const ConvGeom& g, std::span<const float> in, std::span<const float> w,
                           std::span<const float> b, std::span<float> out) {
    const std::size_t plane = g.out_h * g.out_w;
    for (std::size_t oc = 0; oc < g.out_c; ++oc) {
        float* o = out.data() + oc * plane;
        std::fill(o, o + plane, b[oc]);
        for (std::size_t ic = 0; ic < g.in_c; ++ic) {
            const float* ip = in.data() + ic * g.in_h * g.in_w;
            for (std::size_t ky = 0; ky < g.k; ++ky) {
                std::size_t oy0, oy1;
                g.range(ky, g.in_h, g.out_h, oy0, oy1);
                for (std::size_t kx = 0; kx < g.k; ++kx) {
                    std::size_t ox0, ox1;
                    g.range(kx, g.in_w, g.out_w, ox0, ox1);
                    const float wv = w[((oc * g.in_c + ic) * g.k + ky) * g.k + kx];
                    if (wv == 0.0f) continue;
                    if (ox1 <= ox0) continue;
                    const std::size_t n = ox1 - ox0;
                    const std::size_t ix0 = ox0 * g.stride + kx - g.pad;
                    for (std::size_t oy = oy0; oy < oy1; ++oy) {
                        const std::size_t iy = oy * g.stride + ky - g.pad;
                        const float* irow = ip + iy * g.in_w + ix0;
                        float* orow = o + oy * g.out_w + ox0;
                        if (g.stride == 1) {
                            for (std::size_t j = 0; j < n; ++j) orow[j] += wv * irow[j];
                        } else {
                            for (std::size_t j = 0; j < n; ++j) orow[j] += wv * irow[2 * j];
                        }
                    }
                }
            }
        }
    }
}

// Accumulates into grad_w / grad_b / grad_in (caller zero-initializes).
inline void conv2d_backward(const ConvGeom& g, std::span<const float> in, std::span<const float> w,
                            std::span<const float> gout, std::span<float> gw, std::span<float> gb,
                            std::span<float> gin) {
    const std::size_t plane = g.out_h * g.out_w;
    for (std::size_t oc = 0; oc < g.out_c; ++oc) {
        const float* go = gout.data() + oc * plane;
        double bsum = 0.0;
        for (std::size_t i = 0; i < plane; ++i) bsum += go[i];
        gb[oc] += static_cast<float>(bsum);
        for (std::size_t ic = 0; ic < g.in_c; ++ic) {
            const float* ip = in.data() + ic * g.in_h * g.in_w;
            float* gp = gin.data() + ic * g.in_h * g.in_w;
            for (std::size_t ky = 0; ky < g.k; ++ky) {
                std::size_t oy0, oy1;
                g.range(ky, g.in_h, g.out_h, oy0, oy1);
                for (std::size_t kx = 0; kx < g.k; ++kx) {
                    std::size_t ox0, ox1;
                    g.range(kx, g.in_w, g.out_w, ox0, ox1);
                    const std::size_t widx = ((oc * g.in_c + ic) * g.k + ky) * g.k + kx;
                    const float wv = w[widx];
                    float acc = 0.0f;
                    if (ox1 <= ox0) continue;
                    const std::size_t n = ox1 - ox0;
                    const std::size_t ix0 = ox0 * g.stride + kx - g.pad;
                    for (std::size_t oy = oy0; oy < oy1; ++oy) {
                        const std::size_t iy = oy * g.stride + ky - g.pad;
                        const float* irow = ip + iy * g.in_w + ix0;
                        float* grow = gp + iy * g.in_w + ix0;
                        const float* gorow = go + oy * g.out_w + ox0;
                        float racc = 0.0f;
                        if (g.stride == 1) {
                            for (std::size_t j = 0; j < n; ++j) {
                                racc += gorow[j] * irow[j];
                                grow[j] += wv * gorow[j];
                            }
                        } else {
                            for (std::size_t j = 0; j < n; ++j) {
                                racc += gorow[j] * irow[2 * j];
                                grow[2 * j] += wv * gorow[j];
                            }
                        }
                        acc += racc;
                    }
                    gw[widx] += acc;
                }
            }
        }
    }
}

inline void dense_forward(std::size_t in_f, std::size_t out_f, std::span<const float> x, std::span<const float> w,
                          std::span<const float> b, std::span<float> y) {
    for (std::size_t o = 0; o < out_f; ++o) {
        const float* row = w.data() + o * in_f;
        float acc = 0.0f;
        for (std::size_t i = 0; i < in_f; ++i) acc += row[i] * x[i];
        y[o] = acc + b[o];
    }
}

inline void dense_backward(std::size_t in_f, std::size_t out_f, std::span<const float> x, std::span<const float> w,
                           std::span<const float> gy, std::span<float> gw, std::span<float> gb,
                           std::span<float> gx) {
    for (std::size_t o = 0; o < out_f; ++o) {
        const float g = gy[o];
        gb[o] += g;
        if (g == 0.0f) continue;
        const float* row = w.data() + o * in_f;
        float* grow = gw.data() + o * in_f;
        for (std::size_t i = 0; i < in_f; ++i) {
            grow[i] += g * x[i];
            gx[i] += g * row[i];
        }
    }
}

inline float sigmoid(float x) { return 1.0f / (1.0f + std::exp(-x)); }

inline void upsample2x_forward(const Dims& in, std::span<const float> x, std::span<float> y) {
    const std::size_t c = in[0], h = in[1], w = in[2];
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t yy = 0; yy < 2 * h; ++yy) {
            const float* src = x.data() + (ch * h + yy / 2) * w;
            float* dst = y.data() + (ch * 2 * h + yy) * 2 * w;
            for (std::size_t xx = 0; xx < 2 * w; ++xx) dst[xx] = src[xx / 2];
        }
}

inline void upsample2x_backward(const Dims& in, std::span<const float> gy, std::span<float> gx) {
    const std::size_t c = in[0], h = in[1], w = in[2];
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t yy = 0; yy < 2 * h; ++yy) {
            const float* src = gy.data() + (ch * 2 * h + yy) * 2 * w;
            float* dst = gx.data() + (ch * h + yy / 2) * w;
            for (std::size_t xx = 0; xx < 2 * w; ++xx) dst[xx / 2] += src[xx];
        }
}

inline void crop_forward(const Dims& in, const Dims& out, std::span<const float> x, std::span<float> y) {
    for (std::size_t c = 0; c < out[0]; ++c)
        for (std::size_t yy = 0; yy < out[1]; ++yy)
            std::copy_n(x.data() + (c * in[1] + yy) * in[2], out[2], y.data() + (c * out[1] + yy) * out[2]);
}

inline void crop_backward(const Dims& in, const Dims& out, std::span<const float> gy, std::span<float> gx) {
    for (std::size_t c = 0; c < out[0]; ++c)
        for (std::size_t yy = 0; yy < out[1]; ++yy) {
            const float* src = gy.data() + (c * out[1] + yy) * out[2];
            float* dst = gx.data() + (c * in[1] + yy) * in[2];
            for (std::size_t xx = 0; xx < out[2]; ++xx) dst[xx] += src[xx];
        }
}

}  // namespace kernels
}  // namespace oodrt::nn
