#pragma once

#include <cmath>
#include <string>

#include "oodrt/core/image.hpp"

namespace oodrt::flow {

enum class Interp { nearest, bilinear };

inline std::string to_string(Interp i) { return i == Interp::nearest ? "nearest" : "bilinear"; }

inline Interp parse_interp(const std::string& s) {
    if (s == "nearest") return Interp::nearest;
    if (s == "bilinear") return Interp::bilinear;
    throw config_error("unknown interpolation '" + s + "' (expected nearest or bilinear)");
}

// Bilinear sample at continuous pixel coordinates, border replicated.
inline float sample_bilinear(const FloatPlane& p, float fx, float fy) {
    const float x0f = std::floor(fx), y0f = std::floor(fy);
    const long x0 = static_cast<long>(x0f), y0 = static_cast<long>(y0f);
    const float ax = fx - x0f, ay = fy - y0f;
    const float top = (1.0f - ax) * p.clamped(x0, y0) + ax * p.clamped(x0 + 1, y0);
    const float bot = (1.0f - ax) * p.clamped(x0, y0 + 1) + ax * p.clamped(x0 + 1, y0 + 1);
    return (1.0f - ay) * top + ay * bot;
}

// nearest: source index floor(dst * src / dst_extent).
// bilinear: pixel centers aligned, src = (dst + 0.5) * ratio - 0.5.
template <class T>
Plane<T> resize(const Plane<T>& src, std::size_t width, std::size_t height, Interp interp) {
    if (width == 0 || height == 0) throw argument_error("resize: target extents must be >= 1");
    if (src.width == 0 || src.height == 0) throw argument_error("resize: empty source");
    if (width == src.width && height == src.height) return src;
    Plane<T> out(width, height);
    const double rx = static_cast<double>(src.width) / width;
    const double ry = static_cast<double>(src.height) / height;
    if (interp == Interp::nearest) {
        for (std::size_t y = 0; y < height; ++y) {
            const auto sy = std::min(static_cast<std::size_t>(std::floor(y * ry)), src.height - 1);
            for (std::size_t x = 0; x < width; ++x) {
                const auto sx = std::min(static_cast<std::size_t>(std::floor(x * rx)), src.width - 1);
                out(x, y) = src(sx, sy);
            }
        }
        return out;
    }
    FloatPlane f(src.width, src.height);
    for (std::size_t i = 0; i < src.data.size(); ++i) f.data[i] = static_cast<float>(src.data[i]);
    for (std::size_t y = 0; y < height; ++y) {
        const float sy = static_cast<float>(std::max(0.0, (y + 0.5) * ry - 0.5));
        for (std::size_t x = 0; x < width; ++x) {
            const float sx = static_cast<float>(std::max(0.0, (x + 0.5) * rx - 0.5));
            const float v = sample_bilinear(f, sx, sy);
            if constexpr (std::is_integral_v<T>)
                out(x, y) = static_cast<T>(std::clamp(std::lround(v), 0L, 255L));
            else
                out(x, y) = static_cast<T>(v);
        }
    }
    return out;
}

}  // namespace oodrt::flow
