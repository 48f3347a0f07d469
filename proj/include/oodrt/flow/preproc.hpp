#pragma once

// Turns consecutive flow fields into normalized VAE input stacks.

#include <array>
#include <span>
#include <string>

#include "oodrt/flow/farneback.hpp"
#include "oodrt/nn/tensor.hpp"

namespace oodrt::flow {

struct FrameSize {
    std::size_t height = 0;
    std::size_t width = 0;
    bool operator==(const FrameSize&) const = default;
};

inline constexpr std::array<FrameSize, 4> kTargetSizes{{{30, 40}, {60, 80}, {90, 120}, {120, 160}}};
inline constexpr int kMaxFlows = 16;
inline constexpr float kDefaultVmax = 8.0f;

inline std::string to_string(FrameSize s) { return std::to_string(s.height) + "x" + std::to_string(s.width); }

inline FrameSize parse_size(const std::string& s) {
    for (auto t : kTargetSizes)
        if (to_string(t) == s) return t;
    throw config_error("unknown input size '" + s + "' (expected one of 30x40, 60x80, 90x120, 120x160)");
}

struct PreprocConfig {
    FrameSize size{60, 80};
    int flows = 5;
    Interp interp = Interp::bilinear;
    float vmax = kDefaultVmax;

    void validate() const {
        bool ok = false;
        for (auto t : kTargetSizes) ok |= t == size;
        if (!ok) throw config_error("input size " + to_string(size) + " is not one of the enumerated sizes");
        if (flows < 1 || flows > kMaxFlows)
            throw config_error("flow count " + std::to_string(flows) + " outside [1, 16]");
        if (!(vmax > 0.0f)) throw config_error("vmax must be positive");
    }
    nn::Dims stack_dims() const { return {2 * static_cast<std::size_t>(flows), size.height, size.width}; }
    bool operator==(const PreprocConfig&) const = default;
};

inline std::string describe(const PreprocConfig& c) {
    return to_string(c.size) + "/" + std::to_string(c.flows) + "/" + to_string(c.interp);
}

// Writes one resized, normalized flow into channels [2*slot, 2*slot+1].
inline void write_stack_slot(nn::Tensor& stack, std::size_t slot, const FlowField& f, const PreprocConfig& cfg) {
    const FlowField r = resize_flow(f, cfg.size.width, cfg.size.height, cfg.interp);
    const std::size_t plane = cfg.size.height * cfg.size.width;
    auto out = stack.data();
    for (std::size_t i = 0; i < plane; ++i) {
        out[(2 * slot) * plane + i] = std::clamp(r.dx[i] / cfg.vmax, -1.0f, 1.0f);
        out[(2 * slot + 1) * plane + i] = std::clamp(r.dy[i] / cfg.vmax, -1.0f, 1.0f);
    }
}

// `flows` oldest first. Result is [2k, H, W] with channel 2i = dx and
// 2i+1 = dy of flow i, each mapped through clamp(v / vmax, -1, 1).
inline nn::Tensor build_stack(std::span<const FlowField> flows, const PreprocConfig& cfg) {
    cfg.validate();
    if (flows.size() != static_cast<std::size_t>(cfg.flows))
        throw argument_error("build_stack: expected " + std::to_string(cfg.flows) + " flows, got " +
                             std::to_string(flows.size()));
    for (const auto& f : flows)
        if (f.width != flows[0].width || f.height != flows[0].height)
            throw argument_error("build_stack: flow dims differ");
    nn::Tensor stack(cfg.stack_dims());
    for (std::size_t i = 0; i < flows.size(); ++i) write_stack_slot(stack, i, flows[i], cfg);
    return stack;
}

// A window spanning k+1 frames is OOD iff any of them is.
inline bool label_window(std::span<const bool> frame_is_ood) {
    if (frame_is_ood.empty()) throw argument_error("label_window: no frame labels");
    for (bool b : frame_is_ood)
        if (b) return true;
    return false;
}

}  // namespace oodrt::flow
