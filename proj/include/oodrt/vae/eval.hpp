#pragma once

// Threshold calibration, verdicts, F1 reports and the candidate-table CSV.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "oodrt/flow/preproc.hpp"
#include "oodrt/vae/vae.hpp"

namespace oodrt::vae {

inline constexpr double kDefaultQuantile = 0.99;

// Empirical quantile, linear interpolation between order statistics at
// position q*(n-1) (0-based).
inline double calibrate_threshold(std::vector<double> scores, double q = kDefaultQuantile) {
    if (scores.empty()) throw argument_error("calibrate_threshold: no scores");
    if (!(q > 0.0 && q <= 1.0)) throw argument_error("calibrate_threshold: quantile must be in (0, 1]");
    std::sort(scores.begin(), scores.end());
    const double pos = q * static_cast<double>(scores.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, scores.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return scores[lo] + frac * (scores[hi] - scores[lo]);
}

struct OodVerdict {
    double score = 0;
    double threshold = 0;
    bool is_ood = false;
};

inline OodVerdict make_verdict(double score, double threshold) { return {score, threshold, score > threshold}; }

struct EvalReport {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double precision = 0, recall = 0, f1 = 0;
};

// OOD is the positive class. Precision (recall) is 0 when nothing was
// predicted (present) positive.
template <class PredAt, class LabelAt>
EvalReport tally(std::size_t n, PredAt&& pred, LabelAt&& label) {
    EvalReport r;
    for (std::size_t i = 0; i < n; ++i) {
        if (pred(i)) (label(i) ? r.tp : r.fp)++;
        else (label(i) ? r.fn : r.tn)++;
    }
    const auto d = [](std::size_t a, std::size_t b) { return a + b ? static_cast<double>(a) / static_cast<double>(a + b) : 0.0; };
    r.precision = d(r.tp, r.fp);
    r.recall = d(r.tp, r.fn);
    r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    return r;
}

inline EvalReport evaluate_f1(const std::vector<bool>& is_ood, const std::vector<bool>& label_ood) {
    if (is_ood.size() != label_ood.size()) throw argument_error("evaluate_f1: verdict/label count mismatch");
    return tally(is_ood.size(), [&](std::size_t i) { return is_ood[i]; }, [&](std::size_t i) { return label_ood[i]; });
}

inline EvalReport evaluate_f1(const std::vector<OodVerdict>& verdicts, const std::vector<bool>& label_ood) {
    if (verdicts.size() != label_ood.size()) throw argument_error("evaluate_f1: verdict/label count mismatch");
    return tally(verdicts.size(), [&](std::size_t i) { return verdicts[i].is_ood; },
                 [&](std::size_t i) { return label_ood[i]; });
}

// Execution-time summary; variance is the sample (n-1) variance.
struct EtStats {
    double mean_ms = 0, var_ms2 = 0;
};

inline EtStats et_stats(std::span<const double> ms) {
    if (ms.size() < 2) throw argument_error("et_stats: need at least two samples");
    EtStats s;
    for (double v : ms) s.mean_ms += v;
    s.mean_ms /= static_cast<double>(ms.size());
    for (double v : ms) s.var_ms2 += (v - s.mean_ms) * (v - s.mean_ms);
    s.var_ms2 /= static_cast<double>(ms.size() - 1);
    return s;
}

struct CandidateRow {
    flow::PreprocConfig preproc;
    double f1 = 0;
    EtStats et;
};

inline constexpr const char* kCandidateHeader = "size,flows,interp,f1,et_mean_ms,et_var_ms2";

inline std::string candidate_line(const CandidateRow& r) {
    std::ostringstream o;
    o << flow::to_string(r.preproc.size) << ',' << r.preproc.flows << ',' << flow::to_string(r.preproc.interp) << ','
      << std::fixed << std::setprecision(4) << r.f1 << ',' << std::setprecision(3) << r.et.mean_ms << ','
      << r.et.var_ms2;
    return o.str();
}

inline void write_candidates_csv(const std::string& path, const std::vector<CandidateRow>& rows) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path);
    out << kCandidateHeader << '\n';
    for (const auto& r : rows) out << candidate_line(r) << '\n';
}

// ---------------------------------------------------------------- detector

// A deployable monitor: preprocessing, calibrated threshold and the float and
// quantized networks. The threshold is kept at float precision so it survives
// a save/load round trip unchanged.
struct OodDetector {
    flow::PreprocConfig preproc;
    VaeModel model;
    QuantizedVae qmodel;
    double threshold = 0;

    OodDetector(flow::PreprocConfig p, VaeModel m, double thr)
        : preproc(p), model(std::move(m)), qmodel(quantize(model)), threshold(static_cast<float>(thr)) {
        check();
    }
    OodDetector(flow::PreprocConfig p, VaeModel m, QuantizedVae q, double thr)
        : preproc(p), model(std::move(m)), qmodel(std::move(q)), threshold(static_cast<float>(thr)) {
        check();
    }

    OodVerdict judge(const Tensor& stack, bool quantized = true) const {
        return make_verdict(quantized ? qmodel.score(stack) : ood_score(model, stack), threshold);
    }

private:
    void check() const {
        preproc.validate();
        if (model.config.input != preproc.stack_dims() || qmodel.config.input != preproc.stack_dims())
            throw argument_error("detector: model input " + nn::dims_to_string(model.config.input) +
                                 " does not match preprocessing " + flow::describe(preproc));
        if (!std::isfinite(threshold) || threshold < 0) throw argument_error("detector: threshold must be finite and >= 0");
    }
};

inline std::vector<nn::OodmEntry> detector_entries(const OodDetector& d) {
    auto out = vae_entries(d.model);
    for (auto& e : nn::with_prefix(qvae_entries(d.qmodel), "q.")) out.push_back(std::move(e));
    out.push_back(nn::OodmEntry::scalar("ood.threshold", static_cast<float>(d.threshold)));
    out.push_back(nn::OodmEntry::vector(
        "ood.preproc", {static_cast<float>(d.preproc.size.height), static_cast<float>(d.preproc.size.width),
                        static_cast<float>(d.preproc.flows), d.preproc.interp == flow::Interp::bilinear ? 1.0f : 0.0f,
                        d.preproc.vmax}));
    return out;
}

inline OodDetector detector_from_entries(const std::vector<nn::OodmEntry>& entries) {
    const Tensor p = nn::find_entry(entries, "ood.preproc").tensor();
    if (p.size() != 5) throw io_error("OODM: malformed ood.preproc");
    flow::PreprocConfig pc;
    pc.size = {static_cast<std::size_t>(p[0]), static_cast<std::size_t>(p[1])};
    pc.flows = static_cast<int>(p[2]);
    pc.interp = p[3] != 0.0f ? flow::Interp::bilinear : flow::Interp::nearest;
    pc.vmax = p[4];
    pc.validate();
    VaeModel m = vae_from_entries(entries);
    QuantizedVae q = qvae_from_entries(nn::strip_prefix(entries, "q."));
    const double thr = nn::find_entry(entries, "ood.threshold").tensor()[0];
    return OodDetector(pc, std::move(m), std::move(q), thr);
}

inline void save_detector(const std::string& path, const OodDetector& d) { nn::save_oodm(path, detector_entries(d)); }
inline OodDetector load_detector(const std::string& path) { return detector_from_entries(nn::load_oodm(path)); }

}  // namespace oodrt::vae
