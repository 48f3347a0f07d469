#pragma once

// Synthetic town: track, roadside objects and a per-pixel ground renderer
// with upright billboard objects.

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <span>
#include <vector>

#include "oodrt/core/image.hpp"
#include "oodrt/sim/camera.hpp"
#include "oodrt/sim/kinematics.hpp"
#include "oodrt/sim/track.hpp"

namespace oodrt::sim {

enum class ObjectClass : int { duckie = 0, cone = 1, duckiebot = 2 };
inline constexpr int kNumClasses = 3;

inline std::string to_string(ObjectClass c) {
    switch (c) {
        case ObjectClass::duckie: return "duckie";
        case ObjectClass::cone: return "cone";
        case ObjectClass::duckiebot: return "duckiebot";
    }
    return "?";
}

struct WorldObject {
    ObjectClass cls = ObjectClass::duckie;
    double x = 0, y = 0;  // ground position, world frame
    double width = 0.06, height = 0.07;

    static WorldObject make(ObjectClass c, double x, double y) {
        switch (c) {
            case ObjectClass::duckie: return {c, x, y, 0.06, 0.07};
            case ObjectClass::cone: return {c, x, y, 0.05, 0.08};
            case ObjectClass::duckiebot: return {c, x, y, 0.10, 0.10};
        }
        return {};
    }
};

struct Palette {
    Rgb wall{95, 110, 140};
    Rgb floor{40, 140, 60};
    Rgb road{45, 45, 50};
    Rgb white{235, 235, 235};
    Rgb yellow{230, 200, 30};
    int texture = 6;  // +- intensity of world-anchored ground texture
};

struct RoadMarkings {
    double road_half_width = 0.29;
    double white_offset = 0.22;  // white edge-band centre from the road centre
    double white_width = 0.048;
    double yellow_width = 0.024;
    double dash_length = 0.1;
    double dash_gap = 0.1;
    double lane_center = -0.11;  // right-lane centre the robot drives on
};

struct WorldConfig {
    Track track = Track::loop();
    RoadMarkings markings;
    Palette palette;
    std::vector<WorldObject> objects;
    double max_ground_distance = 6.0;  // beyond this the wall colour shows
};

// Axis-aligned box in continuous pixel coordinates (pixel centres at
// integers).
struct PixelBox {
    ObjectClass cls = ObjectClass::duckie;
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    double cx() const { return (x0 + x1) / 2; }
    double cy() const { return (y0 + y1) / 2; }
};

struct RenderResult {
    RgbFrame frame;
    std::vector<PixelBox> boxes;
};

namespace detail {

inline std::uint32_t hash2(std::int64_t a, std::int64_t b) {
    std::uint64_t h = static_cast<std::uint64_t>(a) * 0x9e3779b97f4a7c15ULL ^ static_cast<std::uint64_t>(b) * 0xc2b2ae3d27d4eb4fULL;
    h ^= h >> 31;
    h *= 0xbf58476d1ce4e5b9ULL;
    h ^= h >> 29;
    return static_cast<std::uint32_t>(h);
}

inline Rgb shade(Rgb c, int delta) {
    auto f = [&](int v) { return static_cast<std::uint8_t>(std::clamp(v + delta, 0, 255)); };
    return {f(c.r), f(c.g), f(c.b)};
}

// Object appearance in normalized billboard coordinates (a across, b down).
// Returns false for transparent points.
inline bool object_pixel(ObjectClass cls, double a, double b, Rgb& out) {
    auto in_ellipse = [](double a, double b, double ca, double cb, double ra, double rb) {
        const double x = (a - ca) / ra, y = (b - cb) / rb;
        return x * x + y * y <= 1.0;
    };
    switch (cls) {
        case ObjectClass::duckie:
            if (in_ellipse(a, b, 0.83, 0.33, 0.14, 0.07)) return out = {240, 80, 10}, true;
            if (in_ellipse(a, b, 0.55, 0.28, 0.26, 0.22)) return out = {255, 150, 0}, true;
            if (in_ellipse(a, b, 0.5, 0.72, 0.5, 0.28)) return out = {255, 150, 0}, true;
            return false;
        case ObjectClass::cone:
            if (std::abs(a - 0.5) > 0.5 * b) return false;
            return out = b > 0.88 ? Rgb{150, 60, 20} : Rgb{245, 100, 20}, true;
        case ObjectClass::duckiebot:
            if (b > 0.78 && (in_ellipse(a, b, 0.2, 0.88, 0.16, 0.12) || in_ellipse(a, b, 0.8, 0.88, 0.16, 0.12)))
                return out = {15, 15, 15}, true;
            if (b < 0.3) return (a > 0.1 && a < 0.9) ? (out = {200, 30, 30}, true) : false;
            if (b < 0.82) return out = {30, 40, 120}, true;
            return false;
    }
    return false;
}

}  // namespace detail

// Renders frames for a fixed camera. Per-pixel ground rays are cached.
class Renderer {
public:
    Renderer(const WorldConfig& world, const CameraModel& cam) : world_(world), cam_(cam) {
        ground_.resize(cam.width * cam.height);
        valid_.resize(cam.width * cam.height);
        for (std::size_t v = 0; v < cam.height; ++v)
            for (std::size_t u = 0; u < cam.width; ++u) {
                const auto g = cam.pixel_to_ground(static_cast<double>(u), static_cast<double>(v));
                const std::size_t i = v * cam.width + u;
                valid_[i] = g && g->norm() <= world.max_ground_distance;
                if (valid_[i]) ground_[i] = *g;
            }
    }

    const CameraModel& camera() const { return cam_; }
    const WorldConfig& world() const { return world_; }

    Rgb ground_color(Vec2 w) const {
        const auto& m = world_.markings;
        const auto& pal = world_.palette;
        const auto tc = world_.track.locate(w);
        Rgb base = pal.floor;
        if (tc && std::abs(tc->lateral) <= m.road_half_width) {
            const double al = std::abs(tc->lateral);
            if (std::abs(al - m.white_offset) <= m.white_width / 2) return pal.white;
            if (al <= m.yellow_width / 2 && std::fmod(tc->s, m.dash_length + m.dash_gap) < m.dash_length)
                return pal.yellow;
            base = pal.road;
        }
        if (pal.texture == 0) return base;
        const auto h = detail::hash2(static_cast<std::int64_t>(std::floor(w.x / 0.02)),
                                     static_cast<std::int64_t>(std::floor(w.y / 0.02)));
        return detail::shade(base, static_cast<int>(h % static_cast<std::uint32_t>(2 * pal.texture + 1)) - pal.texture);
    }

    // `extra` objects are drawn as if they were part of the world.
    RenderResult render(const RobotState& robot, std::span<const WorldObject> extra = {}) const {
        RenderResult res;
        res.frame = RgbFrame(cam_.width, cam_.height, world_.palette.wall);
        for (std::size_t i = 0; i < ground_.size(); ++i) {
            if (!valid_[i]) continue;
            res.frame.data[i] = ground_color(robot_to_world(ground_[i], robot.x, robot.y, robot.theta));
        }
        draw_objects(robot, extra, res);
        return res;
    }

private:
    struct Projected {
        const WorldObject* obj;
        double depth, u0, v0, u1, v1;
    };

    void draw_objects(const RobotState& robot, std::span<const WorldObject> extra, RenderResult& res) const {
        std::vector<Projected> vis;
        std::vector<const WorldObject*> all;
        for (const auto& o : world_.objects) all.push_back(&o);
        for (const auto& o : extra) all.push_back(&o);
        for (const WorldObject* op : all) {
            const WorldObject& o = *op;
            const Vec2 r = world_to_robot({o.x, o.y}, robot.x, robot.y, robot.theta);
            const auto bottom = cam_.project({r.x, r.y, 0.0});
            const auto top = cam_.project({r.x, r.y, o.height});
            if (!bottom || !top || bottom->z < 0.05) continue;
            const double half_w = 0.5 * o.width * cam_.focal_px / bottom->z;
            vis.push_back({&o, bottom->z, bottom->x - half_w, top->y, bottom->x + half_w, bottom->y});
        }
        std::sort(vis.begin(), vis.end(), [](const Projected& a, const Projected& b) { return a.depth > b.depth; });
        // Pixel centres sit at integer coordinates; boxes are clipped to them.
        const double W = static_cast<double>(cam_.width) - 1.0, H = static_cast<double>(cam_.height) - 1.0;
        for (const auto& p : vis) {
            const double cu0 = std::max(0.0, p.u0), cv0 = std::max(0.0, p.v0);
            const double cu1 = std::min(W, p.u1), cv1 = std::min(H, p.v1);
            if (cu1 - cu0 < 1.0 || cv1 - cv0 < 1.0) continue;
            std::size_t drawn = 0;
            for (auto y = static_cast<std::size_t>(std::ceil(cv0)); static_cast<double>(y) <= cv1; ++y)
                for (auto x = static_cast<std::size_t>(std::ceil(cu0)); static_cast<double>(x) <= cu1; ++x) {
                    const double a = (static_cast<double>(x) - p.u0) / (p.u1 - p.u0);
                    const double b = (static_cast<double>(y) - p.v0) / (p.v1 - p.v0);
                    Rgb c;
                    if (detail::object_pixel(p.obj->cls, a, b, c)) {
                        res.frame(x, y) = c;
                        ++drawn;
                    }
                }
            if (drawn > 0) res.boxes.push_back({p.obj->cls, cu0, cv0, cu1, cv1});
        }
    }

    WorldConfig world_;
    CameraModel cam_;
    std::vector<Vec2> ground_;
    std::vector<bool> valid_;
};

}  // namespace oodrt::sim
