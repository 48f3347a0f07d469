#pragma once

// Boxes, grid decoding, NMS and confusion matrices for the grid detector.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "oodrt/nn/tensor.hpp"
#include "oodrt/sim/world.hpp"

namespace oodrt::detect {

using sim::ObjectClass;
inline constexpr int kClasses = sim::kNumClasses;
inline constexpr int kBackground = kClasses;  // fourth row/column of the confusion matrix
inline constexpr std::size_t kCellChannels = 5 + kClasses;  // objectness, tx, ty, tw, th, class logits
inline constexpr std::array<int, 4> kInputSizes{64, 96, 128, 160};

inline std::string class_name(int c) { return c == kBackground ? "background" : sim::to_string(static_cast<ObjectClass>(c)); }

struct DetectorConfig {
    int input_size = 160;
    float conf_threshold = 0.5f;
    float nms_iou = 0.45f;

    void validate() const {
        if (input_size < 16 || input_size % 16 != 0) throw config_error("detector input size must be a positive multiple of 16");
        if (!(conf_threshold >= 0 && conf_threshold <= 1)) throw config_error("detector confidence threshold must be in [0, 1]");
        if (!(nms_iou >= 0 && nms_iou <= 1)) throw config_error("detector NMS IoU must be in [0, 1]");
    }
    std::size_t grid() const { return static_cast<std::size_t>(input_size / 16); }
};

// Centre/size box, normalized to the unit square.
struct Box {
    double cx = 0, cy = 0, w = 0, h = 0;
    double x0() const { return cx - w / 2; }
    double x1() const { return cx + w / 2; }
    double y0() const { return cy - h / 2; }
    double y1() const { return cy + h / 2; }
    // from the extents, so that iou(a, a) is exactly 1
    double area() const { return std::max(0.0, x1() - x0()) * std::max(0.0, y1() - y0()); }
};

inline double iou(const Box& a, const Box& b) {
    const double iw = std::max(0.0, std::min(a.x1(), b.x1()) - std::max(a.x0(), b.x0()));
    const double ih = std::max(0.0, std::min(a.y1(), b.y1()) - std::max(a.y0(), b.y0()));
    const double inter = iw * ih, uni = a.area() + b.area() - inter;
    return uni > 0 ? inter / uni : 0.0;
}

// Shrinks a box so it lies inside [0,1]^2.
inline Box clamp_unit(const Box& b) {
    const double x0 = std::clamp(b.x0(), 0.0, 1.0), x1 = std::clamp(b.x1(), 0.0, 1.0);
    const double y0 = std::clamp(b.y0(), 0.0, 1.0), y1 = std::clamp(b.y1(), 0.0, 1.0);
    return {(x0 + x1) / 2, (y0 + y1) / 2, x1 - x0, y1 - y0};
}

struct Detection {
    Box box;
    int cls = 0;
    double conf = 0;
};

struct GroundTruth {
    Box box;
    int cls = 0;
};

// Pixel box (pixel centres at integers) of a W x H frame to the unit square.
inline GroundTruth normalize_box(const sim::PixelBox& p, std::size_t width, std::size_t height) {
    const double W = static_cast<double>(width), H = static_cast<double>(height);
    const double x0 = p.x0 / W, x1 = (p.x1 + 1) / W, y0 = p.y0 / H, y1 = (p.y1 + 1) / H;
    return {{(x0 + x1) / 2, (y0 + y1) / 2, x1 - x0, y1 - y0}, static_cast<int>(p.cls)};
}

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// raw: [grid rows, grid cols, 8]. Cell (col, row) predicts centre
// ((col + sig(tx)) / grid, (row + sig(ty)) / grid), size (sig(tw), sig(th)).
inline std::vector<Detection> decode_grid(const nn::Tensor& raw, const DetectorConfig& cfg) {
    const std::size_t g = cfg.grid();
    if (raw.dims() != nn::Dims{g, g, kCellChannels})
        throw argument_error("decode_grid: expected " + nn::dims_to_string({g, g, kCellChannels}) + ", got " +
                             nn::dims_to_string(raw.dims()));
    std::vector<Detection> out;
    const double G = static_cast<double>(g);
    for (std::size_t r = 0; r < g; ++r)
        for (std::size_t c = 0; c < g; ++c) {
            const float* v = raw.data().data() + (r * g + c) * kCellChannels;
            const double conf = sigmoid(v[0]);
            if (!(conf > cfg.conf_threshold)) continue;
            Detection d;
            d.conf = conf;
            d.box = clamp_unit({(static_cast<double>(c) + sigmoid(v[1])) / G, (static_cast<double>(r) + sigmoid(v[2])) / G,
                                sigmoid(v[3]), sigmoid(v[4])});
            d.cls = static_cast<int>(std::max_element(v + 5, v + kCellChannels) - (v + 5));
            out.push_back(d);
        }
    return out;
}

// Greedy per-class suppression in descending confidence (ties keep input order).
inline std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold) {
    std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) { return a.conf > b.conf; });
    std::vector<Detection> keep;
    for (const auto& d : dets) {
        bool suppressed = false;
        for (const auto& k : keep)
            if (k.cls == d.cls && iou(k.box, d.box) > iou_threshold) {
                suppressed = true;
                break;
            }
        if (!suppressed) keep.push_back(d);
    }
    return keep;
}

// counts[pred][truth] over {duckie, cone, duckiebot, background}.
struct ConfusionMatrix {
    std::array<std::array<std::size_t, 4>, 4> counts{};

    void add(const ConfusionMatrix& o) {
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) counts[i][j] += o.counts[i][j];
    }
    std::size_t total() const {
        std::size_t t = 0;
        for (const auto& r : counts)
            for (auto v : r) t += v;
        return t;
    }
    // Fraction of ground-truth objects of class c matched by a prediction of class c.
    double recall(int c) const {
        std::size_t col = 0;
        for (int p = 0; p < 4; ++p) col += counts[p][c];
        return col ? static_cast<double>(counts[c][c]) / static_cast<double>(col) : 0.0;
    }
    // Row-normalized percentages (each prediction row sums to 100 when non-empty).
    std::array<std::array<double, 4>, 4> row_percent() const {
        std::array<std::array<double, 4>, 4> out{};
        for (int i = 0; i < 4; ++i) {
            std::size_t row = 0;
            for (int j = 0; j < 4; ++j) row += counts[i][j];
            for (int j = 0; j < 4; ++j) out[i][j] = row ? 100.0 * static_cast<double>(counts[i][j]) / static_cast<double>(row) : 0.0;
        }
        return out;
    }
};

// One image: predictions matched greedily by confidence to the unmatched
// ground truth of highest IoU (any class) with IoU >= iou_min.
inline ConfusionMatrix confusion_matrix(const std::vector<Detection>& preds, const std::vector<GroundTruth>& truth,
                                        double iou_min = 0.5) {
    ConfusionMatrix m;
    std::vector<std::size_t> order(preds.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return preds[a].conf > preds[b].conf; });
    std::vector<bool> used(truth.size(), false);
    for (std::size_t i : order) {
        const auto& p = preds[i];
        double best = -1;
        std::size_t hit = truth.size();
        for (std::size_t t = 0; t < truth.size(); ++t) {
            const double v = used[t] ? -1 : iou(p.box, truth[t].box);
            if (v >= iou_min && v > best) {  // first of equal IoUs wins
                best = v;
                hit = t;
            }
        }
        if (hit < truth.size()) {
            used[hit] = true;
            m.counts[static_cast<std::size_t>(p.cls)][static_cast<std::size_t>(truth[hit].cls)]++;
        } else {
            m.counts[static_cast<std::size_t>(p.cls)][kBackground]++;
        }
    }
    for (std::size_t t = 0; t < truth.size(); ++t)
        if (!used[t]) m.counts[kBackground][static_cast<std::size_t>(truth[t].cls)]++;
    return m;
}

}  // namespace oodrt::detect
