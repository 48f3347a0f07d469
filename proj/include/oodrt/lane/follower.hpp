#pragma once

// Lane controller and the full per-frame lane-following step.

#include <algorithm>

#include "oodrt/lane/belief.hpp"
#include "oodrt/sim/camera.hpp"
#include "oodrt/sim/kinematics.hpp"

namespace oodrt::lane {

using sim::WheelCmd;

struct ControlConfig {
    double v_nominal = 0.2;
    double k_d = 6.0, k_phi = 2.0;
    double v_max = 0.5, omega_max = 3.0;
};

// Proportional law; positive d (left of centre) steers right.
inline WheelCmd lane_control(LanePose pose, const ControlConfig& c = {}) {
    const double v = std::clamp(c.v_nominal, -c.v_max, c.v_max);
    const double w = std::clamp(-c.k_d * pose.d - c.k_phi * pose.phi, -c.omega_max, c.omega_max);
    return {v, w};
}

struct LaneStepResult {
    LanePose estimate;
    WheelCmd cmd;
    std::size_t segments = 0;
};

// Stateful lane follower: equalize -> segments -> ground -> votes -> filter
// -> control. Owned by a single task.
class LaneFollower {
public:
    explicit LaneFollower(const sim::CameraModel& cam, SegmentConfig seg = {}, FilterConfig filt = {},
                          ControlConfig ctl = {})
        : homography_(cam.ground_homography()), seg_(seg), filt_(filt), ctl_(ctl), belief_(Belief::uniform()) {
        seg_.roi_top = std::max(seg_.roi_top, static_cast<std::size_t>(std::max(0.0, std::ceil(cam.horizon_row() + 2.0))));
    }

    // dt is the time since the previous call; it drives the motion model.
    LaneStepResult step(const RgbFrame& frame, double dt) {
        const LanePose motion{last_cmd_.v * std::sin(estimate_.phi) * dt, last_cmd_.omega * dt};
        const auto segs = detect_segments(equalize(frame), seg_);
        const auto votes = segment_votes(project_all(segs, homography_), belief_.grid, filt_);
        auto r = belief_step(belief_, votes, motion, filt_);
        belief_ = std::move(r.belief);
        estimate_ = r.estimate;
        last_cmd_ = lane_control(estimate_, ctl_);
        return {estimate_, last_cmd_, segs.size()};
    }

    const Belief& belief() const { return belief_; }
    void reset() {
        belief_ = Belief::uniform();
        estimate_ = {};
        last_cmd_ = {};
    }

private:
    Mat3 homography_;
    SegmentConfig seg_;
    FilterConfig filt_;
    ControlConfig ctl_;
    Belief belief_;
    LanePose estimate_;
    WheelCmd last_cmd_;
};

}  // namespace oodrt::lane
