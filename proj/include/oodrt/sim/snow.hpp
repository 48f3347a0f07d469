#pragma once

// Image-space snowfall. Particles are white discs that drift downward and
// persist for `lifetime` frames; a particle spawned at frame f is generated
// from a seed derived from (seed, f) alone, so any frame can be rendered
// without replaying earlier ones.
//
// The number of visible particles in an active frame is Poisson with mean
//   lambda = density * W * H / (pi r^2),
// i.e. `density` is the expected covered area fraction before overlap.

#include <algorithm>
#include <cmath>

#include "oodrt/core/geometry.hpp"
#include "oodrt/core/image.hpp"
#include "oodrt/core/rng.hpp"

namespace oodrt::sim {

struct SnowConfig {
    double density = 0.0;      // in [0, 0.2]
    double density_end = -1.0;  // linear ramp target over the active window; < 0 keeps density
    double radius_px = 1.5;
    double fall_px = 3.0;    // mean downward drift per frame
    double jitter_px = 1.0;  // per-particle velocity jitter (std dev, px/frame)
    int start_frame = 0;
    int stop_frame = 0;  // exclusive
    int lifetime = 6;

    void validate() const {
        auto bad = [](double d) { return !(d >= 0.0 && d <= 0.2); };
        if (bad(density) || (density_end >= 0.0 && bad(density_end)))
            throw config_error("snow density must lie in [0, 0.2]");
        if (!(radius_px > 0.0)) throw config_error("snow radius must be positive");
        if (lifetime < 1) throw config_error("snow lifetime must be >= 1");
    }
    bool active(int frame) const { return frame >= start_frame && frame < stop_frame; }
    double density_at(int frame) const {
        if (density_end < 0.0 || stop_frame - start_frame <= 1) return density;
        const double t = std::clamp(static_cast<double>(frame - start_frame) / (stop_frame - start_frame - 1), 0.0, 1.0);
        return density + (density_end - density) * t;
    }
};

inline constexpr Rgb kSnowColor{255, 255, 255};

inline double snow_rate(const SnowConfig& c, int frame, std::size_t w, std::size_t h) {
    const double r = c.radius_px;
    return c.density_at(frame) * static_cast<double>(w * h) / (kPi * r * r);
}

// Draws the particles visible at `frame` and returns true iff at least one
// was drawn (the frame's OOD label).
inline bool inject_snow(RgbFrame& frame, const SnowConfig& c, std::uint64_t seed, int frame_index) {
    if (!c.active(frame_index) || c.density_at(frame_index) <= 0.0) return false;
    const double W = static_cast<double>(frame.width), H = static_cast<double>(frame.height);
    const double r = c.radius_px;
    int drawn = 0;
    for (int f = frame_index - c.lifetime + 1; f <= frame_index; ++f) {
        const int fd = std::max(f, c.start_frame);
        const double lambda = snow_rate(c, fd, frame.width, frame.height) / c.lifetime;
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(static_cast<std::int64_t>(f) + (1LL << 40))));
        const int n = poisson(rng, lambda);
        const double age = frame_index - f;
        for (int i = 0; i < n; ++i) {
            const double x0 = uniform(rng, 0.0, W), y0 = uniform(rng, 0.0, H);
            const double vx = c.jitter_px * normal(rng), vy = c.fall_px + c.jitter_px * normal(rng);
            double x = std::fmod(x0 + vx * age, W), y = std::fmod(y0 + vy * age, H);
            if (x < 0) x += W;
            if (y < 0) y += H;
            const long ly0 = static_cast<long>(std::ceil(y - r)), ly1 = static_cast<long>(std::floor(y + r));
            const long lx0 = static_cast<long>(std::ceil(x - r)), lx1 = static_cast<long>(std::floor(x + r));
            for (long py = std::max(0L, ly0); py <= std::min(ly1, static_cast<long>(frame.height) - 1); ++py)
                for (long px = std::max(0L, lx0); px <= std::min(lx1, static_cast<long>(frame.width) - 1); ++px)
                    if ((px - x) * (px - x) + (py - y) * (py - y) <= r * r)
                        frame(static_cast<std::size_t>(px), static_cast<std::size_t>(py)) = kSnowColor;
            ++drawn;
        }
    }
    return drawn > 0;
}

}  // namespace oodrt::sim
