#pragma once

// Synthetic labelled scenes for the detector: the robot at a random spot on
// the track with a few objects dropped in front of it.

#include <vector>

#include "oodrt/core/rng.hpp"
#include "oodrt/detect/boxes.hpp"
#include "oodrt/sim/dataset.hpp"

namespace oodrt::detect {

struct Scene {
    RgbFrame frame;
    std::vector<GroundTruth> truth;
};

struct SceneConfig {
    int min_objects = 1, max_objects = 3;
    double near_m = 0.2, far_m = 0.9;  // object distance ahead of the robot
    double max_bearing = 0.6;          // rad, either side of the optical axis
    double min_separation = 0.12;      // m between placed objects
    double max_offset = 0.06;          // lateral robot offset from lane centre
    double max_heading = 0.2;          // rad
};

// The default track with its roadside props removed: scenes then hold only
// the objects placed on purpose, instead of many distant specks.
inline sim::WorldConfig scene_world(std::uint64_t seed) {
    sim::WorldConfig w = sim::default_world(seed);
    w.objects.clear();
    return w;
}

// forced_class >= 0 makes every placed object that class; count >= 0 fixes
// how many are placed. Boxes of roadside world objects in view are labelled too.
inline Scene make_scene(const sim::Renderer& r, Rng& rng, const SceneConfig& c = {}, int forced_class = -1,
                        int count = -1) {
    const auto& world = r.world();
    const sim::RobotState robot =
        sim::start_state(world, uniform(rng, 0.0, world.track.length()), uniform(rng, -c.max_offset, c.max_offset),
                         uniform(rng, -c.max_heading, c.max_heading));
    const int n = count >= 0 ? count : uniform_int(rng, c.min_objects, c.max_objects);
    std::vector<sim::WorldObject> placed;
    for (int k = 0; k < n; ++k) {
        for (int attempt = 0; attempt < 50; ++attempt) {
            const double dist = uniform(rng, c.near_m, c.far_m), bearing = uniform(rng, -c.max_bearing, c.max_bearing);
            const Vec2 w = sim::robot_to_world({dist * std::cos(bearing), dist * std::sin(bearing)}, robot.x, robot.y,
                                               robot.theta);
            bool clear = true;
            for (const auto& o : placed) clear &= (Vec2{o.x, o.y} - w).norm() >= c.min_separation;
            if (!clear) continue;
            const int cls = forced_class >= 0 ? forced_class : uniform_int(rng, 0, kClasses - 1);
            placed.push_back(sim::WorldObject::make(static_cast<ObjectClass>(cls), w.x, w.y));
            break;
        }
    }
    sim::RenderResult rr = r.render(robot, placed);
    Scene s{std::move(rr.frame), {}};
    for (const auto& b : rr.boxes) s.truth.push_back(normalize_box(b, s.frame.width, s.frame.height));
    return s;
}

inline std::vector<Scene> make_scenes(const sim::Renderer& r, std::size_t n, std::uint64_t seed, const SceneConfig& c = {},
                                      int forced_class = -1, int count = -1) {
    Rng rng(seed);
    std::vector<Scene> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(make_scene(r, rng, c, forced_class, count));
    return out;
}

}  // namespace oodrt::detect
