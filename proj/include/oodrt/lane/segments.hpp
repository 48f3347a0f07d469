#pragma once

// Road-marking segments: colour masks, connected components, and a
// principal-axis line fit that splits curved components into straight
// pieces. Segments are then projected to the ground plane.

#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "oodrt/core/geometry.hpp"
#include "oodrt/lane/image_ops.hpp"

namespace oodrt::lane {

enum class LineColor { white, yellow };

inline std::string to_string(LineColor c) { return c == LineColor::white ? "white" : "yellow"; }

struct Segment {
    Vec2 p0, p1;  // pixel coordinates (x = column, y = row)
    LineColor color = LineColor::white;
    double length() const { return (p1 - p0).norm(); }
};

struct SegmentConfig {
    std::size_t roi_top = 0;  // rows above are ignored (sky / beyond horizon)
    double white_s_max = 0.25, white_v_min = 200;
    double yellow_h_min = 40, yellow_h_max = 70, yellow_s_min = 0.45, yellow_v_min = 110;
    double min_length = 10.0;   // px
    double split_tol = 1.5;     // px, max centreline deviation before splitting
    double edge_min = 40.0;     // mean Sobel magnitude required on the component border
    int max_split_depth = 6;
    double min_elongation = 2.5;  // principal axis std / minor axis std
};

namespace detail {

using Mask = Plane<std::uint8_t>;

// 8-connected components of a binary mask, as pixel lists.
inline std::vector<std::vector<Vec2>> components(const Mask& m) {
    std::vector<std::vector<Vec2>> out;
    Plane<int> label(m.width, m.height, -1);
    std::vector<std::pair<long, long>> stack;
    const auto w = static_cast<long>(m.width), h = static_cast<long>(m.height);
    for (long y0 = 0; y0 < h; ++y0)
        for (long x0 = 0; x0 < w; ++x0) {
            const auto ux = static_cast<std::size_t>(x0), uy = static_cast<std::size_t>(y0);
            if (!m(ux, uy) || label(ux, uy) >= 0) continue;
            const int id = static_cast<int>(out.size());
            out.emplace_back();
            stack.assign(1, {x0, y0});
            label(ux, uy) = id;
            while (!stack.empty()) {
                const auto [x, y] = stack.back();
                stack.pop_back();
                out.back().push_back({static_cast<double>(x), static_cast<double>(y)});
                for (long dy = -1; dy <= 1; ++dy)
                    for (long dx = -1; dx <= 1; ++dx) {
                        const long nx = x + dx, ny = y + dy;
                        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                        const auto sx = static_cast<std::size_t>(nx), sy = static_cast<std::size_t>(ny);
                        if (m(sx, sy) && label(sx, sy) < 0) {
                            label(sx, sy) = id;
                            stack.push_back({nx, ny});
                        }
                    }
            }
        }
    return out;
}

// Mean Sobel magnitude over component pixels that touch a non-mask pixel.
inline double border_strength(const std::vector<Vec2>& pts, const Mask& m, const FloatPlane& grad) {
    double sum = 0;
    std::size_t n = 0;
    for (const auto& p : pts) {
        const auto x = static_cast<long>(p.x), y = static_cast<long>(p.y);
        bool border = false;
        for (auto [dx, dy] : {std::pair{1L, 0L}, {-1L, 0L}, {0L, 1L}, {0L, -1L}})
            if (!m.clamped(x + dx, y + dy)) border = true;
        if (!border) continue;
        sum += grad(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
        ++n;
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

inline void fit_lines(const std::vector<Vec2>& pts, LineColor color, const SegmentConfig& cfg, int depth,
                      std::vector<Segment>& out) {
    if (pts.size() < 3) return;
    Vec2 mean;
    for (const auto& p : pts) mean = mean + p;
    mean = mean * (1.0 / static_cast<double>(pts.size()));
    double sxx = 0, sxy = 0, syy = 0;
    for (const auto& p : pts) {
        const Vec2 d = p - mean;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    const double ang = 0.5 * std::atan2(2 * sxy, sxx - syy);
    // Blobs and short stubs cut across a wide band are not line-like.
    const double tr = sxx + syy, disc = std::sqrt(std::max(0.0, (sxx - syy) * (sxx - syy) / 4 + sxy * sxy));
    const double l_major = tr / 2 + disc, l_minor = std::max(tr / 2 - disc, 1e-12);
    if (std::sqrt(l_major / l_minor) < cfg.min_elongation) return;
    const Vec2 e{std::cos(ang), std::sin(ang)}, n{-e.y, e.x};
    double tmin = 1e300, tmax = -1e300;
    for (const auto& p : pts) {
        const double t = (p - mean).dot(e);
        tmin = std::min(tmin, t);
        tmax = std::max(tmax, t);
    }
    if (tmax - tmin < cfg.min_length) return;

    // Centreline deviation: mean normal offset per 1 px slice along the axis.
    const auto bins = static_cast<std::size_t>(std::floor(tmax - tmin)) + 1;
    std::vector<double> ssum(bins, 0.0);
    std::vector<int> scnt(bins, 0);
    for (const auto& p : pts) {
        const auto b = static_cast<std::size_t>(std::floor((p - mean).dot(e) - tmin));
        ssum[std::min(b, bins - 1)] += (p - mean).dot(n);
        ++scnt[std::min(b, bins - 1)];
    }
    double dev = 0;
    for (std::size_t b = 0; b < bins; ++b)
        if (scnt[b]) dev = std::max(dev, std::abs(ssum[b] / scnt[b]));

    if (dev > cfg.split_tol && depth < cfg.max_split_depth) {
        const double tmid = 0.5 * (tmin + tmax);
        std::vector<Vec2> a, b;
        for (const auto& p : pts) ((p - mean).dot(e) < tmid ? a : b).push_back(p);
        fit_lines(a, color, cfg, depth + 1, out);
        fit_lines(b, color, cfg, depth + 1, out);
        return;
    }
    Segment s{mean + e * tmin, mean + e * tmax, color};
    if (s.p0.y < s.p1.y) std::swap(s.p0, s.p1);  // p0 is the nearer (lower) end
    out.push_back(s);
}

}  // namespace detail

// Colour masks from HSV thresholds; rows above roi_top are excluded.
inline detail::Mask color_mask(const RgbFrame& f, LineColor c, const SegmentConfig& cfg) {
    detail::Mask m(f.width, f.height, 0);
    for (std::size_t y = cfg.roi_top; y < f.height; ++y)
        for (std::size_t x = 0; x < f.width; ++x) {
            const Hsv h = to_hsv(f(x, y));
            const bool hit = c == LineColor::white
                                 ? h.s <= cfg.white_s_max && h.v >= cfg.white_v_min
                                 : h.h >= cfg.yellow_h_min && h.h <= cfg.yellow_h_max && h.s >= cfg.yellow_s_min &&
                                       h.v >= cfg.yellow_v_min;
            m(x, y) = hit ? 1 : 0;
        }
    return m;
}

// Expects an equalized frame. Deterministic; may return an empty list.
inline std::vector<Segment> detect_segments(const RgbFrame& f, const SegmentConfig& cfg = {}) {
    std::vector<Segment> out;
    const FloatPlane grad = sobel_magnitude(to_gray(f));
    for (LineColor c : {LineColor::white, LineColor::yellow}) {
        const auto mask = color_mask(f, c, cfg);
        for (const auto& comp : detail::components(mask)) {
            if (detail::border_strength(comp, mask, grad) < cfg.edge_min) continue;
            detail::fit_lines(comp, c, cfg, 0, out);
        }
    }
    return out;
}

// ---------------------------------------------------------------- ground

struct GroundSegment {
    Vec2 p0, p1;  // metres, robot frame (x forward, y left)
    LineColor color = LineColor::white;
};

inline Vec2 apply_homography(const Mat3& h, Vec2 p) {
    const Vec3 q = h * Vec3{p.x, p.y, 1.0};
    if (std::abs(q.z) < 1e-9) throw projection_error("point maps to the line at infinity");
    return {q.x / q.z, q.y / q.z};
}

inline GroundSegment project_ground(const Segment& s, const Mat3& h) {
    return {apply_homography(h, s.p0), apply_homography(h, s.p1), s.color};
}

// Projects all segments, dropping those that hit the line at infinity or
// land behind the camera (negative homogeneous scale).
inline std::vector<GroundSegment> project_all(const std::vector<Segment>& segs, const Mat3& h) {
    std::vector<GroundSegment> out;
    for (const auto& s : segs) {
        const Vec3 a = h * Vec3{s.p0.x, s.p0.y, 1.0}, b = h * Vec3{s.p1.x, s.p1.y, 1.0};
        if (a.z <= 1e-9 || b.z <= 1e-9) continue;
        out.push_back(project_ground(s, h));
    }
    return out;
}

inline void write_segments_csv(const std::string& path, const std::vector<Segment>& segs) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path);
    out << "color,x0,y0,x1,y1\n";
    for (const auto& s : segs) out << to_string(s.color) << ',' << s.p0.x << ',' << s.p0.y << ',' << s.p1.x << ',' << s.p1.y << '\n';
}

}  // namespace oodrt::lane
