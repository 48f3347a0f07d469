#pragma once

// Dense two-frame optical flow by polynomial expansion (Farnebäck).
//
// Each pixel neighbourhood is fitted with f(x) ~ x^T A x + b^T x + c under a
// Gaussian applicability. For a displacement d, A d ~ -(b2 - b1) / 2 with A
// averaged over both frames; the normal equations are accumulated over a
// box window and solved per pixel. A coarse-to-fine pyramid handles larger
// motion, and each level iterates, re-deriving the constraint at the
// current displacement estimate.

#include <array>
#include <cmath>
#include <vector>

#include "oodrt/core/image.hpp"
#include "oodrt/flow/resize.hpp"

namespace oodrt::flow {

struct FarnebackParams {
    double pyr_scale = 0.5;
    int levels = 3;  // including the full-resolution level
    int window = 15;
    int iterations = 3;
    int poly_n = 5;
    double poly_sigma = 1.1;
};

// Per-pixel displacement from prev to next, in pixels per frame.
struct FlowField {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<float> dx, dy;

    FlowField() = default;
    FlowField(std::size_t w, std::size_t h) : width(w), height(h), dx(w * h, 0.0f), dy(w * h, 0.0f) {}
    bool operator==(const FlowField&) const = default;
};

// Resizes both channels; vectors are rescaled by the per-axis size ratio.
inline FlowField resize_flow(const FlowField& f, std::size_t width, std::size_t height, Interp interp) {
    FloatPlane px(f.width, f.height), py(f.width, f.height);
    px.data = f.dx;
    py.data = f.dy;
    const FloatPlane rx = resize(px, width, height, interp), ry = resize(py, width, height, interp);
    FlowField out(width, height);
    const float sx = static_cast<float>(width) / static_cast<float>(f.width);
    const float sy = static_cast<float>(height) / static_cast<float>(f.height);
    for (std::size_t i = 0; i < out.dx.size(); ++i) {
        out.dx[i] = rx.data[i] * sx;
        out.dy[i] = ry.data[i] * sy;
    }
    return out;
}

namespace detail {

// Five expansion coefficients per pixel: [b_y, b_x, a_yy, a_xx, a_xy].
using PolyPlane = std::vector<std::array<float, 5>>;

struct PolyBasis {
    std::vector<float> g, xg, xxg;  // indexed by offset + n
    double ig11 = 0, ig03 = 0, ig33 = 0, ig55 = 0;
};

// Gaussian applicability and the entries of the inverse Gram matrix needed
// to turn separable moments into least-squares coefficients.
inline PolyBasis poly_basis(int n, double sigma) {
    PolyBasis pb;
    const int len = 2 * n + 1;
    std::vector<double> g(len);
    double s = 0.0;
    for (int x = -n; x <= n; ++x) {
        g[x + n] = std::exp(-x * x / (2.0 * sigma * sigma));
        s += g[x + n];
    }
    for (auto& v : g) v /= s;
    pb.g.resize(len);
    pb.xg.resize(len);
    pb.xxg.resize(len);
    for (int x = -n; x <= n; ++x) {
        pb.g[x + n] = static_cast<float>(g[x + n]);
        pb.xg[x + n] = static_cast<float>(x * g[x + n]);
        pb.xxg[x + n] = static_cast<float>(x * x * g[x + n]);
    }
    // Gram matrix over basis {1, x, y, x^2, y^2, xy}.
    double G00 = 0, G11 = 0, G33 = 0, G55 = 0;
    for (int y = -n; y <= n; ++y)
        for (int x = -n; x <= n; ++x) {
            const double w = g[y + n] * g[x + n];
            G00 += w;
            G11 += w * x * x;
            G33 += w * x * x * x * x;
            G55 += w * x * x * y * y;
        }
    // Block {1, x^2, y^2}: [[G00, G11, G11], [G11, G33, G55], [G11, G55, G33]].
    // Its inverse is symmetric in the two quadratic terms.
    const double a = G00, b = G11, c = G33, d = G55;
    const double det = a * (c * c - d * d) - b * (b * c - b * d) + b * (b * d - b * c);
    pb.ig03 = (b * d - b * c) / det;
    pb.ig33 = (a * c - b * b) / det;
    pb.ig11 = 1.0 / G11;
    pb.ig55 = 1.0 / G55;
    return pb;
}

inline PolyPlane poly_expand(const FloatPlane& src, const PolyBasis& pb, int n) {
    const std::size_t w = src.width, h = src.height;
    PolyPlane out(w * h);
    // Vertical pass rows: [sum g f, sum y g f, sum y^2 g f], padded by n each side.
    std::vector<std::array<float, 3>> row(w + 2 * static_cast<std::size_t>(n));
    const float* g = pb.g.data() + n;
    const float* xg = pb.xg.data() + n;
    const float* xxg = pb.xxg.data() + n;
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const float c = src(x, y);
            float t0 = c * g[0], t1 = 0.0f, t2 = 0.0f;
            for (int k = 1; k <= n; ++k) {
                const float up = src.clamped(static_cast<long>(x), static_cast<long>(y) - k);
                const float dn = src.clamped(static_cast<long>(x), static_cast<long>(y) + k);
                const float p = up + dn;
                t0 += g[k] * p;
                t1 += xg[k] * (dn - up);
                t2 += xxg[k] * p;
            }
            row[x + n] = {t0, t1, t2};
        }
        for (int k = 0; k < n; ++k) {
            row[k] = row[n];
            row[w + n + k] = row[w + n - 1];
        }
        for (std::size_t x = 0; x < w; ++x) {
            const auto* r = row.data() + x + n;
            float b1 = r[0][0] * g[0], b2 = 0, b3 = r[0][1] * g[0], b4 = 0, b5 = r[0][2] * g[0], b6 = 0;
            for (int k = 1; k <= n; ++k) {
                const auto& rp = r[k];
                const auto& rm = r[-k];
                const float tg = rp[0] + rm[0];
                b1 += tg * g[k];
                b4 += tg * xxg[k];
                b2 += (rp[0] - rm[0]) * xg[k];
                b3 += (rp[1] + rm[1]) * g[k];
                b6 += (rp[1] - rm[1]) * xg[k];
                b5 += (rp[2] + rm[2]) * g[k];
            }
            auto& o = out[y * w + x];
            o[0] = static_cast<float>(b3 * pb.ig11);
            o[1] = static_cast<float>(b2 * pb.ig11);
            o[2] = static_cast<float>(b1 * pb.ig03 + b5 * pb.ig33);
            o[3] = static_cast<float>(b1 * pb.ig03 + b4 * pb.ig33);
            o[4] = static_cast<float>(b6 * pb.ig55);
        }
    }
    return out;
}

// Per-pixel normal-equation terms [G11, G12, G22, h1, h2] for the current
// flow estimate. Pixels within 5 of the border are down-weighted.
inline std::vector<std::array<float, 5>> update_matrices(const PolyPlane& r0, const PolyPlane& r1, const FlowField& flow) {
    static constexpr float border[5] = {0.14f, 0.14f, 0.4472f, 0.4472f, 0.4472f};
    const std::size_t w = flow.width, h = flow.height;
    std::vector<std::array<float, 5>> m(w * h);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const std::size_t i = y * w + x;
            const float dx = flow.dx[i], dy = flow.dy[i];
            const float fx = static_cast<float>(x) + dx, fy = static_cast<float>(y) + dy;
            const float x1f = std::floor(fx), y1f = std::floor(fy);
            const long x1 = static_cast<long>(x1f), y1 = static_cast<long>(y1f);
            const float ax = fx - x1f, ay = fy - y1f;
            const auto& c0 = r0[i];
            float r2, r3, r4, r5, r6;
            if (x1 >= 0 && y1 >= 0 && x1 < static_cast<long>(w) - 1 && y1 < static_cast<long>(h) - 1) {
                const float a00 = (1 - ax) * (1 - ay), a01 = ax * (1 - ay), a10 = (1 - ax) * ay, a11 = ax * ay;
                const auto* p = &r1[static_cast<std::size_t>(y1) * w + static_cast<std::size_t>(x1)];
                auto mix = [&](int ch) { return a00 * p[0][ch] + a01 * p[1][ch] + a10 * p[w][ch] + a11 * p[w + 1][ch]; };
                r2 = mix(0);
                r3 = mix(1);
                r4 = (c0[2] + mix(2)) * 0.5f;
                r5 = (c0[3] + mix(3)) * 0.5f;
                r6 = (c0[4] + mix(4)) * 0.25f;
            } else {
                r2 = r3 = 0.0f;
                r4 = c0[2];
                r5 = c0[3];
                r6 = c0[4] * 0.5f;
            }
            r2 = (c0[0] - r2) * 0.5f;
            r3 = (c0[1] - r3) * 0.5f;
            r2 += r4 * dy + r6 * dx;
            r3 += r6 * dy + r5 * dx;
            float scale = 1.0f;
            if (x < 5) scale *= border[x];
            if (x >= w - 5) scale *= border[w - 1 - x];
            if (y < 5) scale *= border[y];
            if (y >= h - 5) scale *= border[h - 1 - y];
            r2 *= scale;
            r3 *= scale;
            r4 *= scale;
            r5 *= scale;
            r6 *= scale;
            m[i] = {r4 * r4 + r6 * r6, (r4 + r5) * r6, r5 * r5 + r6 * r6, r4 * r2 + r6 * r3, r6 * r2 + r5 * r3};
        }
    return m;
}

// Normalized box filter of odd size over each of the five terms, border
// replicated.
inline std::vector<std::array<float, 5>> box_blur(const std::vector<std::array<float, 5>>& m, std::size_t w,
                                                  std::size_t h, int win) {
    const long r = win / 2;
    std::vector<std::array<float, 5>> tmp(m.size()), out(m.size());
    for (std::size_t y = 0; y < h; ++y) {
        std::array<double, 5> acc{};
        auto at = [&](long x) -> const std::array<float, 5>& {
            return m[y * w + static_cast<std::size_t>(std::clamp<long>(x, 0, static_cast<long>(w) - 1))];
        };
        for (long x = -r; x <= r; ++x)
            for (int c = 0; c < 5; ++c) acc[c] += at(x)[c];
        for (std::size_t x = 0; x < w; ++x) {
            for (int c = 0; c < 5; ++c) tmp[y * w + x][c] = static_cast<float>(acc[c]);
            const long xi = static_cast<long>(x);
            for (int c = 0; c < 5; ++c) acc[c] += at(xi + r + 1)[c] - at(xi - r)[c];
        }
    }
    const float norm = 1.0f / static_cast<float>(win * win);
    for (std::size_t x = 0; x < w; ++x) {
        std::array<double, 5> acc{};
        auto at = [&](long y) -> const std::array<float, 5>& {
            return tmp[static_cast<std::size_t>(std::clamp<long>(y, 0, static_cast<long>(h) - 1)) * w + x];
        };
        for (long y = -r; y <= r; ++y)
            for (int c = 0; c < 5; ++c) acc[c] += at(y)[c];
        for (std::size_t y = 0; y < h; ++y) {
            for (int c = 0; c < 5; ++c) out[y * w + x][c] = static_cast<float>(acc[c]) * norm;
            const long yi = static_cast<long>(y);
            for (int c = 0; c < 5; ++c) acc[c] += at(yi + r + 1)[c] - at(yi - r)[c];
        }
    }
    return out;
}

inline void solve_flow(const std::vector<std::array<float, 5>>& m, FlowField& flow) {
    for (std::size_t i = 0; i < m.size(); ++i) {
        const auto& t = m[i];
        const double g11 = t[0], g12 = t[1], g22 = t[2], h1 = t[3], h2 = t[4];
        const double idet = 1.0 / (g11 * g22 - g12 * g12 + 1e-3);
        flow.dx[i] = static_cast<float>((g11 * h2 - g12 * h1) * idet);
        flow.dy[i] = static_cast<float>((g22 * h1 - g12 * h2) * idet);
    }
}

inline FloatPlane gaussian_blur(const FloatPlane& src, double sigma) {
    const int r = std::max(1, static_cast<int>(std::lround(sigma * 2.5)));
    std::vector<float> k(2 * r + 1);
    double s = 0.0;
    for (int i = -r; i <= r; ++i) s += (k[i + r] = static_cast<float>(std::exp(-i * i / (2 * sigma * sigma))));
    for (auto& v : k) v = static_cast<float>(v / s);
    // Reflect-101 borders.
    auto reflect = [](long i, long n) {
        if (n == 1) return 0L;
        while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
        return i;
    };
    const long w = static_cast<long>(src.width), h = static_cast<long>(src.height);
    FloatPlane tmp(src.width, src.height), out(src.width, src.height);
    for (long y = 0; y < h; ++y)
        for (long x = 0; x < w; ++x) {
            float acc = 0.0f;
            for (int i = -r; i <= r; ++i) acc += k[i + r] * src.data[y * w + reflect(x + i, w)];
            tmp.data[y * w + x] = acc;
        }
    for (long y = 0; y < h; ++y)
        for (long x = 0; x < w; ++x) {
            float acc = 0.0f;
            for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp.data[reflect(y + i, h) * w + x];
            out.data[y * w + x] = acc;
        }
    return out;
}

}  // namespace detail

inline FlowField farneback_flow(const GrayFrame& prev, const GrayFrame& next, const FarnebackParams& p = {}) {
    if (prev.width != next.width || prev.height != next.height)
        throw argument_error("farneback_flow: frame dims differ");
    if (p.levels < 1 || p.iterations < 1 || p.window < 1 || p.window % 2 == 0 || p.poly_n < 1 ||
        !(p.pyr_scale > 0.0 && p.pyr_scale < 1.0) || !(p.poly_sigma > 0.0))
        throw argument_error("farneback_flow: invalid parameters");
    double coarse = 1.0;
    for (int k = 1; k < p.levels; ++k) coarse *= p.pyr_scale;
    const auto cw = static_cast<std::size_t>(std::lround(prev.width * coarse));
    const auto ch = static_cast<std::size_t>(std::lround(prev.height * coarse));
    if (cw < static_cast<std::size_t>(p.window) || ch < static_cast<std::size_t>(p.window))
        throw argument_error("farneback_flow: coarsest level " + std::to_string(ch) + "x" + std::to_string(cw) +
                             " is smaller than the " + std::to_string(p.window) + " px window");

    const FloatPlane f0 = to_float(prev), f1 = to_float(next);
    const detail::PolyBasis pb = detail::poly_basis(p.poly_n, p.poly_sigma);
    FlowField flow;
    for (int k = p.levels - 1; k >= 0; --k) {
        double scale = 1.0;
        for (int i = 0; i < k; ++i) scale *= p.pyr_scale;
        const auto w = static_cast<std::size_t>(std::lround(prev.width * scale));
        const auto h = static_cast<std::size_t>(std::lround(prev.height * scale));
        if (flow.width == 0) {
            flow = FlowField(w, h);
        } else {
            flow = resize_flow(flow, w, h, Interp::bilinear);
        }
        detail::PolyPlane r[2];
        const FloatPlane* src[2] = {&f0, &f1};
        for (int i = 0; i < 2; ++i) {
            if (k == 0) {
                r[i] = detail::poly_expand(*src[i], pb, p.poly_n);
            } else {
                const double sigma = (1.0 / scale - 1.0) * 0.5;
                r[i] = detail::poly_expand(resize(detail::gaussian_blur(*src[i], sigma), w, h, Interp::bilinear), pb,
                                           p.poly_n);
            }
        }
        auto m = detail::update_matrices(r[0], r[1], flow);
        for (int it = 0; it < p.iterations; ++it) {
            detail::solve_flow(detail::box_blur(m, w, h, p.window), flow);
            if (it + 1 < p.iterations) m = detail::update_matrices(r[0], r[1], flow);
        }
    }
    return flow;
}

}  // namespace oodrt::flow
