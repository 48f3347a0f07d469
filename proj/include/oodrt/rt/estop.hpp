#pragma once

// Latched emergency stop fed by OOD verdicts.

#include <cstddef>
#include <optional>

#include "oodrt/core/error.hpp"
#include "oodrt/sim/kinematics.hpp"

namespace oodrt::rt {

enum class StopMode { run, stopped };

class EStop {
public:
    explicit EStop(int consecutive = 1) : m_(consecutive) {
        if (m_ < 1) throw config_error("e-stop needs M >= 1 consecutive positives");
    }

    // Counts consecutive OOD verdicts; latches once the count reaches M.
    // Returns true on the verdict that causes the stop.
    bool update(bool is_ood, std::size_t frame_id) {
        if (mode_ == StopMode::stopped) return false;
        counter_ = is_ood ? counter_ + 1 : 0;
        if (counter_ < m_) return false;
        mode_ = StopMode::stopped;
        trigger_frame_ = frame_id;
        return true;
    }

    sim::WheelCmd gate(sim::WheelCmd cmd) const { return mode_ == StopMode::stopped ? sim::WheelCmd{} : cmd; }

    void reset() {
        mode_ = StopMode::run;
        counter_ = 0;
        trigger_frame_.reset();
    }

    StopMode mode() const { return mode_; }
    bool stopped() const { return mode_ == StopMode::stopped; }
    int counter() const { return counter_; }
    std::optional<std::size_t> trigger_frame() const { return trigger_frame_; }

private:
    int m_;
    StopMode mode_ = StopMode::run;
    int counter_ = 0;
    std::optional<std::size_t> trigger_frame_;
};

}  // namespace oodrt::rt
