#pragma once

// Pixel-level helpers for the lane follower: histogram equalization on
// luminance, HSV conversion and Sobel gradients.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

#include "oodrt/core/image.hpp"

namespace oodrt::lane {

// Global histogram equalization of the BT.601 luma channel. Chroma (Cb, Cr)
// is kept; the new luma is floor(255 * cdf(y)), so a constant image maps
// to 255 and a uniform histogram is a fixed point.
inline RgbFrame equalize(const RgbFrame& in) {
    const std::size_t n = in.data.size();
    RgbFrame out = in;
    if (n == 0) return out;
    std::array<std::size_t, 256> hist{};
    std::vector<double> y(n), cb(n), cr(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Rgb c = in.data[i];
        y[i] = 0.299 * c.r + 0.587 * c.g + 0.114 * c.b;
        cb[i] = -0.168736 * c.r - 0.331264 * c.g + 0.5 * c.b;
        cr[i] = 0.5 * c.r - 0.418688 * c.g - 0.081312 * c.b;
        ++hist[luma(c)];
    }
    std::array<double, 256> map{};
    std::size_t acc = 0;
    for (int v = 0; v < 256; ++v) {
        acc += hist[static_cast<std::size_t>(v)];
        map[static_cast<std::size_t>(v)] = std::floor(255.0 * static_cast<double>(acc) / static_cast<double>(n));
    }
    auto clamp8 = [](double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); };
    for (std::size_t i = 0; i < n; ++i) {
        const double ny = map[luma(in.data[i])];
        // Shift the exact luma by the same amount the rounded one moved so a
        // fixed-point mapping leaves the pixel untouched.
        const double yy = y[i] + (ny - luma(in.data[i]));
        out.data[i] = {clamp8(yy + 1.402 * cr[i]), clamp8(yy - 0.344136 * cb[i] - 0.714136 * cr[i]),
                       clamp8(yy + 1.772 * cb[i])};
    }
    return out;
}

struct Hsv {
    double h = 0;  // degrees [0, 360)
    double s = 0;  // [0, 1]
    double v = 0;  // [0, 255]
};

inline Hsv to_hsv(Rgb c) {
    const double r = c.r, g = c.g, b = c.b;
    const double mx = std::max({r, g, b}), mn = std::min({r, g, b}), d = mx - mn;
    Hsv o;
    o.v = mx;
    o.s = mx > 0 ? d / mx : 0.0;
    if (d > 0) {
        if (mx == r) o.h = 60.0 * std::fmod((g - b) / d, 6.0);
        else if (mx == g) o.h = 60.0 * ((b - r) / d + 2.0);
        else o.h = 60.0 * ((r - g) / d + 4.0);
        if (o.h < 0) o.h += 360.0;
    }
    return o;
}

// Sobel gradient magnitude of a gray image; border pixels replicate.
inline FloatPlane sobel_magnitude(const GrayFrame& g) {
    FloatPlane out(g.width, g.height, 0.0f);
    const auto w = static_cast<long>(g.width), h = static_cast<long>(g.height);
    for (long y = 0; y < h; ++y)
        for (long x = 0; x < w; ++x) {
            auto p = [&](long dx, long dy) { return static_cast<double>(g.clamped(x + dx, y + dy)); };
            const double gx = (p(1, -1) + 2 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2 * p(-1, 0) + p(-1, 1));
            const double gy = (p(-1, 1) + 2 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2 * p(0, -1) + p(1, -1));
            out(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) = static_cast<float>(std::hypot(gx, gy));
        }
    return out;
}

}  // namespace oodrt::lane
