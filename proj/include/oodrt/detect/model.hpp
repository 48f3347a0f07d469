#pragma once

// Single-stage grid detector: a small strided conv net predicting, per
// 16x16-pixel cell, one box with objectness and class scores. Training uses
// squared error on the box logits, cross-entropy on classes and binary
// cross-entropy on objectness (squared error through the sigmoid stalls once
// a positive cell saturates near zero, and positives are rare).

#include <chrono>
#include <numeric>

#include "oodrt/detect/boxes.hpp"
#include "oodrt/detect/scenes.hpp"
#include "oodrt/flow/resize.hpp"
#include "oodrt/nn/model.hpp"
#include "oodrt/nn/optim.hpp"
#include "oodrt/nn/serialize.hpp"
#include "oodrt/quant/quant.hpp"

namespace oodrt::detect {

using nn::ModelGraph;
using nn::Tensor;

inline ModelGraph build_detector_graph(int input_size) {
    DetectorConfig{input_size}.validate();
    using nn::LayerSpec;
    const auto S = static_cast<std::size_t>(input_size);
    return ModelGraph("det", {3, S, S},
                      {LayerSpec::conv2d(3, 8, 3, 2, 1), LayerSpec::relu(), LayerSpec::conv2d(8, 16, 3, 2, 1),
                       LayerSpec::relu(), LayerSpec::conv2d(16, 32, 3, 2, 1), LayerSpec::relu(),
                       LayerSpec::conv2d(32, 32, 3, 2, 1), LayerSpec::relu(), LayerSpec::conv2d(32, 32, 3, 1, 1),
                       LayerSpec::relu(), LayerSpec::conv2d(32, kCellChannels, 1, 1, 0)});
}

// Bilinear resize of each colour channel to S x S, scaled to [0, 1].
inline Tensor frame_to_input(const RgbFrame& f, int input_size) {
    const auto S = static_cast<std::size_t>(input_size);
    Tensor t({3, S, S});
    auto out = t.data();
    for (std::size_t ch = 0; ch < 3; ++ch) {
        FloatPlane p(f.width, f.height);
        for (std::size_t i = 0; i < f.data.size(); ++i) {
            const Rgb c = f.data[i];
            p.data[i] = static_cast<float>(ch == 0 ? c.r : ch == 1 ? c.g : c.b) / 255.0f;
        }
        const FloatPlane r = flow::resize(p, S, S, flow::Interp::bilinear);
        std::copy(r.data.begin(), r.data.end(), out.begin() + static_cast<long>(ch * S * S));
    }
    return t;
}

// Network output [8, G, G] -> decode layout [G, G, 8].
inline Tensor head_to_grid(const Tensor& head) {
    const std::size_t C = head.dim(0), G = head.dim(1);
    Tensor g({G, G, C});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < G * G; ++i) g[i * C + c] = head[c * G * G + i];
    return g;
}

// ---------------------------------------------------------------- loss

struct LossWeights {
    double coord = 1.0, noobj = 0.5;  // coord on logit scale
};

struct DetLoss {
    double total = 0, objectness = 0, box = 0, cls = 0;
};

// Each truth box is owned by the cell holding its centre; when two share a
// cell the larger box wins.
inline std::vector<int> assign_cells(const std::vector<GroundTruth>& truth, std::size_t G) {
    std::vector<int> owner(G * G, -1);
    for (std::size_t t = 0; t < truth.size(); ++t) {
        const auto& b = truth[t].box;
        const auto c = std::min(G - 1, static_cast<std::size_t>(std::max(0.0, std::floor(b.cx * static_cast<double>(G)))));
        const auto r = std::min(G - 1, static_cast<std::size_t>(std::max(0.0, std::floor(b.cy * static_cast<double>(G)))));
        int& o = owner[r * G + c];
        if (o < 0 || truth[static_cast<std::size_t>(o)].box.area() < b.area()) o = static_cast<int>(t);
    }
    return owner;
}

// Loss and gradient w.r.t. the raw head [8, G, G].
inline DetLoss detection_loss(const Tensor& head, const std::vector<GroundTruth>& truth, const LossWeights& w,
                              Tensor* grad = nullptr) {
    const std::size_t C = head.dim(0), G = head.dim(1), plane = G * G;
    if (C != kCellChannels || head.dim(2) != G) throw argument_error("detection_loss: head must be [8, G, G]");
    const auto owner = assign_cells(truth, G);
    if (grad) *grad = Tensor(head.dims());
    DetLoss L;
    const auto at = [&](std::size_t ch, std::size_t cell) { return static_cast<double>(head[ch * plane + cell]); };
    const auto put = [&](std::size_t ch, std::size_t cell, double v) {
        if (grad) (*grad)[ch * plane + cell] = static_cast<float>(v);
    };
    for (std::size_t cell = 0; cell < plane; ++cell) {
        const double p = sigmoid(at(0, cell));
        const double logit = at(0, cell);
        // -log(1 - p) and -log(p) in a form that stays finite for large |logit|
        const double softplus = std::max(logit, 0.0) + std::log1p(std::exp(-std::abs(logit)));
        if (owner[cell] < 0) {
            L.objectness += w.noobj * softplus;
            put(0, cell, w.noobj * p);
            continue;
        }
        const auto& gt = truth[static_cast<std::size_t>(owner[cell])];
        L.objectness += softplus - logit;
        put(0, cell, p - 1);
        const double G_ = static_cast<double>(G);
        const double targets[4] = {gt.box.cx * G_ - static_cast<double>(cell % G), gt.box.cy * G_ - static_cast<double>(cell / G),
                                   gt.box.w, gt.box.h};
        // squared error between raw outputs and the logits of the targets;
        // boxes are a few pixels wide, where the sigmoid is nearly flat
        for (std::size_t k = 0; k < 4; ++k) {
            const double t = std::clamp(targets[k], 0.01, 0.99), d = at(1 + k, cell) - std::log(t / (1 - t));
            L.box += w.coord * d * d;
            put(1 + k, cell, w.coord * 2 * d);
        }
        double mx = -1e300;
        for (int c = 0; c < kClasses; ++c) mx = std::max(mx, at(5 + static_cast<std::size_t>(c), cell));
        double z = 0;
        for (int c = 0; c < kClasses; ++c) z += std::exp(at(5 + static_cast<std::size_t>(c), cell) - mx);
        for (int c = 0; c < kClasses; ++c) {
            const double pc = std::exp(at(5 + static_cast<std::size_t>(c), cell) - mx) / z;
            if (c == gt.cls) L.cls -= std::log(std::max(pc, 1e-300));
            put(5 + static_cast<std::size_t>(c), cell, pc - (c == gt.cls ? 1.0 : 0.0));
        }
    }
    L.total = L.objectness + L.box + L.cls;
    if (!std::isfinite(L.total)) throw numeric_error("detection loss is not finite");
    return L;
}

// ---------------------------------------------------------------- model

struct Detector {
    DetectorConfig cfg;
    ModelGraph graph;

    static Detector create(const DetectorConfig& c, std::uint64_t seed) {
        c.validate();
        Detector d{c, build_detector_graph(c.input_size)};
        Rng rng(derive_seed(seed, "det-init"));
        d.graph.init_weights(rng);
        return d;
    }
    Tensor raw(const Tensor& input) const { return head_to_grid(nn::forward(graph, input)); }
    std::vector<Detection> detect(const RgbFrame& f) const {
        return nms(decode_grid(raw(frame_to_input(f, cfg.input_size)), cfg), cfg.nms_iou);
    }
};

struct QuantizedDetector {
    DetectorConfig cfg;
    quant::QuantizedModel model;

    explicit QuantizedDetector(const Detector& d) : cfg(d.cfg), model(d.graph) {}
    QuantizedDetector(DetectorConfig c, quant::QuantizedModel m) : cfg(c), model(std::move(m)) {}

    Tensor raw(const Tensor& input) const { return head_to_grid(model.forward(input)); }
    std::vector<Detection> detect(const RgbFrame& f) const {
        return nms(decode_grid(raw(frame_to_input(f, cfg.input_size)), cfg), cfg.nms_iou);
    }
};

struct DetTrainConfig {
    int epochs = 30;
    std::size_t batch = 16;
    float learning_rate = 2e-3f;
    LossWeights weights;
    std::uint64_t seed = 1;
};

struct DetTrainLog {
    std::vector<DetLoss> epochs;  // per-image means
};

inline Detector train_detector(const std::vector<Scene>& scenes, const DetectorConfig& cfg, const DetTrainConfig& tc,
                               DetTrainLog* log = nullptr) {
    if (scenes.empty()) throw argument_error("train_detector: no scenes");
    if (tc.epochs < 1 || tc.batch < 1) throw config_error("detector epochs and batch must be >= 1");
    Detector d = Detector::create(cfg, tc.seed);
    std::vector<Tensor> inputs;
    for (const auto& s : scenes) inputs.push_back(frame_to_input(s.frame, cfg.input_size));
    nn::Adam opt({tc.learning_rate});
    Rng rng(derive_seed(tc.seed, "det-shuffle"));
    std::vector<std::size_t> order(scenes.size());
    std::iota(order.begin(), order.end(), 0);
    nn::ForwardCache cache;
    for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);
        DetLoss sum;
        for (std::size_t b0 = 0; b0 < order.size(); b0 += tc.batch) {
            const std::size_t b1 = std::min(order.size(), b0 + tc.batch);
            nn::Gradients g = nn::Gradients::zeros_like(d.graph);
            for (std::size_t bi = b0; bi < b1; ++bi) {
                const std::size_t i = order[bi];
                const Tensor head = nn::forward(d.graph, inputs[i], &cache);
                Tensor dh;
                DetLoss l;
                try {
                    l = detection_loss(head, scenes[i].truth, tc.weights, &dh);
                } catch (const numeric_error&) {
                    throw training_error("detector training diverged in epoch " + std::to_string(epoch), epoch);
                }
                sum.total += l.total;
                sum.objectness += l.objectness;
                sum.box += l.box;
                sum.cls += l.cls;
                g.add(nn::backward(d.graph, cache, dh), 1.0f / static_cast<float>(b1 - b0));
            }
            try {
                opt.step(d.graph, g);
            } catch (const training_error& e) {
                throw training_error(std::string(e.what()) + " in epoch " + std::to_string(epoch), epoch);
            }
        }
        const auto n = static_cast<double>(scenes.size());
        if (log) log->epochs.push_back({sum.total / n, sum.objectness / n, sum.box / n, sum.cls / n});
    }
    return d;
}

// ---------------------------------------------------------------- evaluation

template <class Model>
ConfusionMatrix evaluate_detector(const Model& m, const std::vector<Scene>& scenes, double iou_min = 0.5) {
    ConfusionMatrix total;
    for (const auto& s : scenes) total.add(confusion_matrix(m.detect(s.frame), s.truth, iou_min));
    return total;
}

// Mean and sample variance (ms) of full inferences (resize + network +
// decode + NMS) after warm-up.
template <class Model>
std::pair<double, double> time_inference(const Model& m, const RgbFrame& f, std::size_t runs, std::size_t warmup = 10) {
    if (runs < 2) throw argument_error("time_inference: need at least two runs");
    for (std::size_t i = 0; i < warmup; ++i) (void)m.detect(f);
    std::vector<double> ms;
    for (std::size_t i = 0; i < runs; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        (void)m.detect(f);
        ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    }
    const double mean = std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(ms.size());
    double var = 0;
    for (double v : ms) var += (v - mean) * (v - mean);
    return {mean, var / static_cast<double>(ms.size() - 1)};
}

struct SweepRow {
    int input_size = 0;
    double acet_ms = 0, et_var_ms2 = 0;
    ConfusionMatrix matrix;
    DetTrainLog log;
};

// Trains one model per input size on the same scenes, quantizes it and
// reports int8 ACET and the confusion matrix on the test scenes. The
// quantized models are handed back through `models` when given.
inline std::vector<SweepRow> size_latency_sweep(const std::vector<Scene>& train, const std::vector<Scene>& test,
                                                const DetTrainConfig& tc, std::size_t timed_runs = 100,
                                                const std::vector<int>& sizes = {kInputSizes.begin(), kInputSizes.end()},
                                                std::vector<QuantizedDetector>* models = nullptr) {
    if (test.empty()) throw argument_error("size_latency_sweep: no test scenes");
    std::vector<SweepRow> rows;
    for (int S : sizes) {
        DetectorConfig cfg;
        cfg.input_size = S;
        SweepRow row;
        row.input_size = S;
        const QuantizedDetector q(train_detector(train, cfg, tc, &row.log));
        row.matrix = evaluate_detector(q, test);
        std::tie(row.acet_ms, row.et_var_ms2) = time_inference(q, test.front().frame, timed_runs);
        rows.push_back(std::move(row));
        if (models) models->push_back(q);
    }
    return rows;
}

// ---------------------------------------------------------------- files

inline std::vector<nn::OodmEntry> detector_entries(const QuantizedDetector& q) {
    auto out = q.model.entries();
    out.push_back(nn::OodmEntry::vector("det.config", {static_cast<float>(q.cfg.input_size), q.cfg.conf_threshold, q.cfg.nms_iou}));
    return out;
}

inline QuantizedDetector detector_from_entries(const std::vector<nn::OodmEntry>& entries) {
    const Tensor c = nn::find_entry(entries, "det.config").tensor();
    if (c.size() != 3) throw io_error("OODM: malformed det.config");
    DetectorConfig cfg;
    cfg.input_size = static_cast<int>(c[0]);
    cfg.conf_threshold = c[1];
    cfg.nms_iou = c[2];
    cfg.validate();
    return {cfg, quant::QuantizedModel::from_entries(build_detector_graph(cfg.input_size), entries)};
}

inline void save_detector(const std::string& path, const QuantizedDetector& q) { nn::save_oodm(path, detector_entries(q)); }
inline QuantizedDetector load_detector(const std::string& path) { return detector_from_entries(nn::load_oodm(path)); }

}  // namespace oodrt::detect
