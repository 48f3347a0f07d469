#pragma once

#include <cmath>

#include "oodrt/core/geometry.hpp"

namespace oodrt::sim {

struct WheelCmd {
    double v = 0.0;      // forward speed, m/s
    double omega = 0.0;  // yaw rate, rad/s
    bool operator==(const WheelCmd&) const = default;
};

struct RobotState {
    double x = 0, y = 0, theta = 0;
    WheelCmd cmd;
};

// Unicycle integration over dt with the command held constant; exact arc
// when turning.
inline RobotState step_kinematics(RobotState s, WheelCmd cmd, double dt) {
    if (!(dt > 0)) throw argument_error("step_kinematics: dt must be positive");
    s.cmd = cmd;
    if (std::abs(cmd.omega) > 1e-6) {
        const double th1 = s.theta + cmd.omega * dt;
        const double r = cmd.v / cmd.omega;
        s.x += r * (std::sin(th1) - std::sin(s.theta));
        s.y += -r * (std::cos(th1) - std::cos(s.theta));
        s.theta = th1;
    } else {
        s.x += cmd.v * std::cos(s.theta) * dt;
        s.y += cmd.v * std::sin(s.theta) * dt;
    }
    s.theta = wrap_angle(s.theta);
    return s;
}

}  // namespace oodrt::sim
