#pragma once

// Flow windows over labelled videos. Flows are computed once per video at
// native resolution; for a given preprocessing config each flow is resized
// and normalized once, and stacks are assembled from those slots on demand
// (materializing every stack of a large config would not fit in memory).

#include <memory>
#include <span>
#include <vector>

#include "oodrt/flow/preproc.hpp"

namespace oodrt::vae {

// flows[i] is the flow from frame i to frame i+1.
struct FlowVideo {
    std::vector<flow::FlowField> flows;
    std::vector<bool> frame_ood;
};

inline FlowVideo compute_flow_video(const std::vector<GrayFrame>& frames, const std::vector<bool>& labels,
                                    const flow::FarnebackParams& p = {}) {
    if (frames.size() != labels.size()) throw argument_error("compute_flow_video: frame/label count mismatch");
    FlowVideo v;
    v.frame_ood = labels;
    for (std::size_t i = 0; i + 1 < frames.size(); ++i) v.flows.push_back(flow::farneback_flow(frames[i], frames[i + 1], p));
    return v;
}

// One video's flows, resized and normalized for a config: slot i holds the
// 2*H*W values (dx plane then dy plane) of flow i.
struct SlotVideo {
    flow::PreprocConfig cfg;
    std::vector<std::vector<float>> slots;
    std::vector<bool> frame_ood;

    // Windows end at flow index `end` and use flows [end-k+1, end].
    std::size_t window_count() const {
        const auto k = static_cast<std::size_t>(cfg.flows);
        return slots.size() >= k ? slots.size() - k + 1 : 0;
    }
    std::size_t window_end(std::size_t w) const { return w + static_cast<std::size_t>(cfg.flows) - 1; }

    nn::Tensor stack(std::size_t w) const {
        const std::size_t plane2 = 2 * cfg.size.height * cfg.size.width;
        nn::Tensor t(cfg.stack_dims());
        auto out = t.data();
        for (std::size_t s = 0; s < static_cast<std::size_t>(cfg.flows); ++s)
            std::copy(slots[w + s].begin(), slots[w + s].end(), out.begin() + static_cast<long>(s * plane2));
        return t;
    }
    // Frames spanned by window w: [w, w + k], i.e. k+1 labels.
    bool label(std::size_t w) const {
        const std::size_t n = static_cast<std::size_t>(cfg.flows) + 1;
        std::unique_ptr<bool[]> span(new bool[n]);
        for (std::size_t i = 0; i < n; ++i) span[i] = frame_ood[w + i];
        return flow::label_window({span.get(), n});
    }
};

inline SlotVideo make_slots(const FlowVideo& v, const flow::PreprocConfig& cfg) {
    cfg.validate();
    SlotVideo s;
    s.cfg = cfg;
    s.frame_ood = v.frame_ood;
    flow::PreprocConfig one = cfg;
    one.flows = 1;
    for (const auto& f : v.flows) {
        nn::Tensor t(one.stack_dims());
        flow::write_stack_slot(t, 0, f, one);
        s.slots.push_back(t.values());
    }
    return s;
}

// Flat index over several videos' windows.
struct WindowIndex {
    std::vector<std::pair<std::size_t, std::size_t>> items;  // (video, window)

    static WindowIndex all(const std::vector<SlotVideo>& vids, std::size_t stride = 1) {
        WindowIndex ix;
        for (std::size_t v = 0; v < vids.size(); ++v)
            for (std::size_t w = 0; w < vids[v].window_count(); w += stride) ix.items.push_back({v, w});
        return ix;
    }
    std::size_t size() const { return items.size(); }
};

}  // namespace oodrt::vae
