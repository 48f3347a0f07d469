#pragma once

// End-to-end OOD detector construction and evaluation on generated videos:
// flows -> windows -> VAE training -> threshold on a held-out ID drive ->
// per-window F1 on the labelled test videos.

#include <vector>

#include "oodrt/sim/dataset.hpp"
#include "oodrt/vae/eval.hpp"
#include "oodrt/vae/windows.hpp"

namespace oodrt::vae {

struct OodData {
    FlowVideo train, val;
    std::vector<FlowVideo> tests;
};

inline FlowVideo flow_video_of(const std::vector<RgbFrame>& frames, const std::vector<bool>& labels,
                               const flow::FarnebackParams& p = {}) {
    std::vector<GrayFrame> g;
    g.reserve(frames.size());
    for (const auto& f : frames) g.push_back(to_gray(f));
    return compute_flow_video(g, labels, p);
}

inline OodData make_ood_data(const sim::Renderer& r, const sim::Suite& suite, const sim::DrivePolicy& pol = {},
                             double fps = sim::kDefaultFps) {
    const auto one = [&](const sim::SuiteVideo& v) {
        const auto seq = sim::render_sequence(r, v.spec, pol, fps, v.seed);
        return flow_video_of(seq.frames, seq.ood);
    };
    OodData d{one(suite.train), one(suite.val), {}};
    for (const auto& t : suite.tests) d.tests.push_back(one(t));
    return d;
}

// Training defaults for the flow VAE. The loss averages the squared error
// over every stack element, so beta = 1 lets the KL term dominate and the
// latent collapses onto the prior; a small beta keeps the code informative.
inline VaeConfig default_flow_vae() {
    VaeConfig c;
    c.beta = 1e-4f;
    c.epochs = 6;
    return c;
}

struct OodTrainConfig {
    VaeConfig vae = default_flow_vae();  // input dims are taken from the preproc config
    double quantile = kDefaultQuantile;
    std::size_t train_stride = 1;  // use every n-th training window
};

struct TrainedOod {
    OodDetector detector;
    TrainLog log;
    std::vector<double> val_scores;
};

inline TrainedOod train_ood(const FlowVideo& train, const FlowVideo& val, const flow::PreprocConfig& pc,
                            const OodTrainConfig& tc) {
    if (tc.train_stride < 1) throw config_error("train_stride must be >= 1");
    const SlotVideo ts = make_slots(train, pc);
    std::vector<std::size_t> windows;
    for (std::size_t w = 0; w < ts.window_count(); w += tc.train_stride) {
        if (ts.label(w)) throw argument_error("training video contains OOD frames");
        windows.push_back(w);
    }
    if (windows.empty()) throw argument_error("training video is shorter than one window");
    VaeConfig vc = tc.vae;
    vc.input = pc.stack_dims();
    TrainLog log;
    VaeModel m = train_vae(windows.size(), [&](std::size_t i) { return ts.stack(windows[i]); }, vc, &log);

    const SlotVideo vs = make_slots(val, pc);
    if (vs.window_count() == 0) throw argument_error("validation video is shorter than one window");
    std::vector<double> scores;
    for (std::size_t w = 0; w < vs.window_count(); ++w) {
        if (vs.label(w)) throw argument_error("validation video contains OOD frames");
        scores.push_back(ood_score(m, vs.stack(w)));
    }
    const double thr = calibrate_threshold(scores, tc.quantile);
    return {OodDetector(pc, std::move(m), thr), std::move(log), std::move(scores)};
}

struct OodEvaluation {
    EvalReport float_report, quant_report;
    double agreement = 0;  // fraction of windows where float and int8 verdicts match
    std::size_t windows = 0;
};

inline OodEvaluation evaluate_ood(const OodDetector& d, const std::vector<FlowVideo>& videos) {
    std::vector<bool> fv, qv, labels;
    for (const auto& v : videos) {
        const SlotVideo s = make_slots(v, d.preproc);
        for (std::size_t w = 0; w < s.window_count(); ++w) {
            const Tensor x = s.stack(w);
            fv.push_back(d.judge(x, false).is_ood);
            qv.push_back(d.judge(x, true).is_ood);
            labels.push_back(s.label(w));
        }
    }
    OodEvaluation e;
    e.windows = labels.size();
    e.float_report = evaluate_f1(fv, labels);
    e.quant_report = evaluate_f1(qv, labels);
    std::size_t same = 0;
    for (std::size_t i = 0; i < fv.size(); ++i) same += fv[i] == qv[i];
    e.agreement = fv.empty() ? 1.0 : static_cast<double>(same) / static_cast<double>(fv.size());
    return e;
}

}  // namespace oodrt::vae
