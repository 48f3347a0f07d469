#pragma once

// Text outputs of the detector: streamed detections and the size sweep table.

#include <cstdio>
#include <fstream>
#include <sstream>

#include "oodrt/detect/model.hpp"

namespace oodrt::detect {

inline constexpr const char* kDetectionHeader = "frame_id,class,conf,cx,cy,w,h";

inline std::string detection_line(std::size_t frame_id, const Detection& d) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%zu,%s,%.4f,%.4f,%.4f,%.4f,%.4f", frame_id, class_name(d.cls).c_str(), d.conf,
                  d.box.cx, d.box.cy, d.box.w, d.box.h);
    return buf;
}

// Appends to an open stream; write the header once before the first frame.
class DetectionWriter {
public:
    explicit DetectionWriter(const std::string& path) : out_(path) {
        if (!out_) throw io_error("cannot write " + path);
        out_ << kDetectionHeader << '\n';
    }
    void frame(std::size_t frame_id, const std::vector<Detection>& dets) {
        for (const auto& d : dets) out_ << detection_line(frame_id, d) << '\n';
        if (!out_) throw io_error("detection write failed");
    }

private:
    std::ofstream out_;
};

// Rows are predictions, columns ground truth; counts then row percentages.
inline std::string format_matrix(const ConfusionMatrix& m) {
    std::ostringstream s;
    const auto pct = m.row_percent();
    s << "pred\\truth";
    for (int j = 0; j < 4; ++j) s << ',' << class_name(j);
    s << '\n';
    for (int i = 0; i < 4; ++i) {
        s << class_name(i);
        for (int j = 0; j < 4; ++j) s << ',' << m.counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        s << '\n';
    }
    s << "row %\n";
    char buf[32];
    for (int i = 0; i < 4; ++i) {
        s << class_name(i);
        for (int j = 0; j < 4; ++j) {
            std::snprintf(buf, sizeof buf, ",%.1f", pct[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
            s << buf;
        }
        s << '\n';
    }
    return s.str();
}

inline std::string format_sweep(const std::vector<SweepRow>& rows) {
    std::ostringstream s;
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "S=%d acet_ms=%.3f var_ms2=%.4f duck_recall=%.3f\n", r.input_size, r.acet_ms,
                      r.et_var_ms2, r.matrix.recall(static_cast<int>(ObjectClass::duckie)));
        s << buf << format_matrix(r.matrix) << '\n';
    }
    return s.str();
}

}  // namespace oodrt::detect
