#pragma once

// Pinhole camera mounted on the robot, pitched down, looking forward.
// Robot frame: x forward, y left, z up, origin on the ground below the
// camera. Pixel (u, v) is column/row with integer coordinates at pixel
// centres.

#include <optional>

#include "oodrt/core/geometry.hpp"

namespace oodrt::sim {

struct CameraModel {
    std::size_t width = 160;
    std::size_t height = 120;
    double focal_px = 67.0;      // ~100 deg horizontal field of view at 160 px
    double mount_height = 0.1;   // metres above ground
    double tilt = 15.0 * kPi / 180.0;  // pitch down, radians

    double cx() const { return (static_cast<double>(width) - 1.0) / 2.0; }
    double cy() const { return (static_cast<double>(height) - 1.0) / 2.0; }

    // Same optics scaled to another resolution.
    CameraModel scaled(std::size_t w, std::size_t h) const {
        CameraModel c = *this;
        c.focal_px = focal_px * static_cast<double>(w) / static_cast<double>(width);
        c.width = w;
        c.height = h;
        return c;
    }

    // Ray direction in the robot frame for pixel (u, v).
    Vec3 ray(double u, double v) const {
        const double a = (u - cx()) / focal_px, b = (v - cy()) / focal_px;
        const double ct = std::cos(tilt), st = std::sin(tilt);
        return {ct - b * st, -a, -st - b * ct};
    }

    // Pixel -> ground point (robot frame) as a homography on (u, v, 1).
    Mat3 ground_homography() const {
        const double ct = std::cos(tilt), st = std::sin(tilt), f = focal_px, h = mount_height;
        Mat3 kinv;
        kinv.m = {1 / f, 0, -cx() / f, 0, 1 / f, -cy() / f, 0, 0, 1};
        Mat3 r;
        r.m = {0, -st, ct, -1, 0, 0, 0, ct / h, st / h};
        return r * kinv;
    }

    // Ground intersection of pixel (u, v); nullopt at or above the horizon.
    std::optional<Vec2> pixel_to_ground(double u, double v) const {
        const Vec3 d = ray(u, v);
        if (d.z >= -1e-9) return std::nullopt;
        const double t = mount_height / -d.z;
        return Vec2{t * d.x, t * d.y};
    }

    // Robot-frame 3D point -> (u, v, depth along the optical axis).
    std::optional<Vec3> project(Vec3 p) const {
        const double ct = std::cos(tilt), st = std::sin(tilt);
        const double px = p.x, py = p.y, pz = p.z - mount_height;
        const double depth = px * ct - pz * st;
        if (depth <= 1e-6) return std::nullopt;
        const double down = -(px * st + pz * ct);
        const double right = -py;
        return Vec3{cx() + focal_px * right / depth, cy() + focal_px * down / depth, depth};
    }

    // Image row of the horizon (rays parallel to the ground).
    double horizon_row() const { return cy() - focal_px * std::tan(tilt); }
};

// World point -> robot frame given robot pose (x, y, theta).
inline Vec2 world_to_robot(Vec2 w, double rx, double ry, double rtheta) {
    const double dx = w.x - rx, dy = w.y - ry;
    const double c = std::cos(rtheta), s = std::sin(rtheta);
    return {c * dx + s * dy, -s * dx + c * dy};
}

inline Vec2 robot_to_world(Vec2 r, double rx, double ry, double rtheta) {
    const double c = std::cos(rtheta), s = std::sin(rtheta);
    return {rx + c * r.x - s * r.y, ry + s * r.x + c * r.y};
}

}  // namespace oodrt::sim
