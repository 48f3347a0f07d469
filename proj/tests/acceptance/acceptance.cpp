// Acceptance run: one PASS/FAIL line per criterion, tolerances fixed below.
// Usage: acceptance [out_dir]   (artifacts land in out_dir, default ./acceptance_out)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "flow_oracle.hpp"
#include "gradcheck.hpp"
#include "oodrt/cli/commands.hpp"
#include "oodrt/lane/follower.hpp"
#include "quant_reference.hpp"

using namespace oodrt;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------- limits

constexpr int kGradShapes = 100;
constexpr double kGradRelErr = 1e-3;
constexpr double kGradSeconds = 60;

constexpr int kQuantRanges = 200;
constexpr int kQuantRefTrials = 100;
constexpr double kMinAgreement = 0.95;

constexpr float kMaxStillFlow = 0.1f;
constexpr double kMaxEpe = 0.5;
constexpr double kFlowSeconds = 120;

constexpr double kMinF1 = 0.9;
constexpr double kOodSeconds = 3600;

constexpr int kGaSeeds = 20;
constexpr double kGaHitRate = 0.95;
constexpr const char* kTableColumns = "size,flows,interp,f1,et_mean_ms,et_var_ms2";

constexpr double kMaxLaneOffset = 0.05;
constexpr double kLaneSeconds = 30;
constexpr int kFuzzSteps = 1000;

constexpr double kStopDeadlineMs = 800;

constexpr double kHighU = 0.95, kOverU = 1.2;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char b[64];
    std::snprintf(b, sizeof b, f, a);
    return b;
}

std::string bytes_of(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw io_error("cannot read " + p.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Every regular file under `root`, keyed by relative path.
std::map<std::string, std::string> tree_of(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = bytes_of(e.path());
    return out;
}

// ---------------------------------------------------------------- AC1

Verdict gradients() {
    using nn::LayerKind;
    const LayerKind kinds[] = {LayerKind::dense,   LayerKind::conv2d,     LayerKind::relu,
                               LayerKind::sigmoid, LayerKind::flatten,    LayerKind::upsample2x,
                               LayerKind::reshape, LayerKind::crop};
    const auto t0 = Clock::now();
    Rng rng(20240);
    double worst = 0;
    int bad = 0;
    for (int i = 0; i < kGradShapes; ++i) {
        auto [model, input] = oracle::random_model_for(kinds[i % 8], rng);
        const auto r = oracle::finite_difference_check(model, input, rng);
        worst = std::max(worst, r.max_rel_error);
        bad += !(r.max_rel_error < kGradRelErr) || r.checked == 0;
    }
    const double s = seconds_since(t0);
    return {bad == 0 && s < kGradSeconds, std::to_string(kGradShapes) + " shapes over 8 layer kinds, max rel err " +
                                             fmt("%.2e", worst) + ", " + std::to_string(bad) + " failing, " + fmt("%.1f s", s)};
}

// ---------------------------------------------------------------- AC2 (model part is filled in after AC4)

struct QuantKernels {
    bool grid_ok = true, ref_ok = true;
    double worst_ratio = 0;  // max |x - deq(q(x))| / scale
    int ref_mismatch = 0;
};

QuantKernels quant_kernels() {
    using namespace quant;
    QuantKernels k;
    Rng rng(3131);
    for (int t = 0; t < kQuantRanges; ++t) {
        float lo = static_cast<float>(uniform(rng, -50.0, 5.0)), hi = static_cast<float>(uniform(rng, -5.0, 50.0));
        if (lo > hi) std::swap(lo, hi);
        const QuantParams p = compute_qparams(lo, hi);
        // every code maps back to itself
        for (int q = -128; q <= 127; ++q) {
            const float v = dequantize_value(static_cast<std::int8_t>(q), p);
            if (v >= lo && v <= hi && quantize_value(v, p) != q) k.grid_ok = false;
        }
        for (int i = 0; i <= 4000; ++i) {
            const float x = lo + (hi - lo) * static_cast<float>(i) / 4000.0f;
            const double ratio = std::abs(dequantize_value(quantize_value(x, p), p) - x) / p.scale;
            k.worst_ratio = std::max(k.worst_ratio, ratio);
        }
    }
    k.grid_ok &= k.worst_ratio <= 0.5 * (1 + 1e-4);

    for (int t = 0; t < kQuantRefTrials; ++t) {
        const std::size_t in = static_cast<std::size_t>(uniform_int(rng, 1, 64));
        const std::size_t out = static_cast<std::size_t>(uniform_int(rng, 1, 16));
        const Tensor w = oracle::random_tensor({out, in}, rng, -2.0, 1.0);
        const Tensor b = oracle::random_tensor({out}, rng);
        const Tensor x = oracle::random_tensor({in}, rng, -0.3, 4.0);
        const QuantLinear layer(nn::LayerSpec::dense(in, out), {in}, quantize_tensor(w), b);
        k.ref_mismatch += !(qlinear_forward(x, layer) == oracle::reference_dense(x, layer.weight, b));
    }
    for (int t = 0; t < kQuantRefTrials; ++t) {
        const std::size_t c = static_cast<std::size_t>(uniform_int(rng, 1, 4));
        const std::size_t oc = static_cast<std::size_t>(uniform_int(rng, 1, 6));
        const std::size_t ks = uniform_int(rng, 0, 1) ? 3 : 1;
        const std::size_t stride = static_cast<std::size_t>(uniform_int(rng, 1, 2));
        const std::size_t pad = ks == 3 ? static_cast<std::size_t>(uniform_int(rng, 0, 1)) : 0;
        const nn::Dims in{c, static_cast<std::size_t>(uniform_int(rng, 3, 12)), static_cast<std::size_t>(uniform_int(rng, 3, 12))};
        const Tensor w = oracle::random_tensor({oc, c, ks, ks}, rng);
        const Tensor b = oracle::random_tensor({oc}, rng);
        const Tensor x = oracle::random_tensor(in, rng, -1.0, 2.0);
        const QuantLinear layer(nn::LayerSpec::conv2d(c, oc, ks, stride, pad), in, quantize_tensor(w), b);
        k.ref_mismatch += !(qlinear_forward(x, layer) == oracle::reference_conv(x, layer.weight, b, stride, pad));
    }
    k.ref_ok = k.ref_mismatch == 0;
    return k;
}

// Float vs int8 verdict agreement on the ID validation drive.
double val_agreement(const vae::OodDetector& d, const vae::FlowVideo& val) {
    const auto s = vae::make_slots(val, d.preproc);
    std::size_t same = 0;
    for (std::size_t w = 0; w < s.window_count(); ++w) {
        const nn::Tensor x = s.stack(w);
        same += d.judge(x, false).is_ood == d.judge(x, true).is_ood;
    }
    return static_cast<double>(same) / static_cast<double>(s.window_count());
}

// ---------------------------------------------------------------- AC3

Verdict optical_flow() {
    const auto t0 = Clock::now();
    const GrayFrame a = oracle::texture(128, 96, 1);
    const auto still = flow::farneback_flow(a, a);
    float mx = 0;
    for (std::size_t i = 0; i < still.dx.size(); ++i) mx = std::max({mx, std::abs(still.dx[i]), std::abs(still.dy[i])});

    double worst = 0;
    int cases = 0;
    const GrayFrame b0 = oracle::texture(96, 72, 3);
    for (int dy = -3; dy <= 3; ++dy)
        for (int dx = -3; dx <= 3; ++dx) {
            const GrayFrame b = oracle::shifted(b0, dx, dy);
            const auto f = flow::farneback_flow(b0, b);
            const auto ref = oracle::block_match(b0, b, 4, 4);
            double epe = 0;
            std::size_t n = 0;
            for (std::size_t y = 12; y + 12 < b0.height; ++y)
                for (std::size_t x = 12; x + 12 < b0.width; ++x) {
                    const std::size_t i = y * b0.width + x;
                    epe += std::hypot(f.dx[i] - ref.dx[i], f.dy[i] - ref.dy[i]);
                    ++n;
                }
            worst = std::max(worst, epe / static_cast<double>(n));
            ++cases;
        }
    const double s = seconds_since(t0);
    return {mx < kMaxStillFlow && worst <= kMaxEpe && s < kFlowSeconds,
            "still max |flow| " + fmt("%.4f px", mx) + ", worst mean EPE " + fmt("%.4f px", worst) + " over " +
                std::to_string(cases) + " shifts within 3 px, " + fmt("%.1f s", s)};
}

// ---------------------------------------------------------------- AC4

struct OodOutcome {
    Verdict verdict;
    std::optional<vae::OodDetector> detector;
    double agree_val = 0, agree_test = 0;
    vae::FlowVideo val;
};

OodOutcome ood_efficacy(const fs::path& out) {
    const auto t0 = Clock::now();
    cli::RunConfig cfg;
    cfg.apply_seed(1);
    const sim::Renderer r(cli::world_of(cfg), sim::CameraModel{});
    const auto data = vae::make_ood_data(r, sim::default_suite(r.world().track.length(), cfg.world.suite, 1));
    std::cerr << "  flows ready after " << fmt("%.0f s", seconds_since(t0)) << "\n";

    auto big = cli::train_and_score_ood(data, cfg);
    cli::RunConfig small_cfg = cfg;
    small_cfg.preproc.size = {30, 40};
    const auto small = cli::train_and_score_ood(data, small_cfg);
    const double s = seconds_since(t0);
    cli::write_json(out / "ood_60x80.json", big.metrics);
    cli::write_json(out / "ood_30x40.json", small.metrics);

    const double f_big = big.eval.quant_report.f1, f_small = small.eval.quant_report.f1;
    OodOutcome o;
    o.verdict = {f_big >= kMinF1 && f_small < f_big && s < kOodSeconds,
                 "int8 F1 60x80/k5/bilinear " + fmt("%.3f", f_big) + " (float " + fmt("%.3f", big.eval.float_report.f1) +
                     "), 30x40/k5/bilinear " + fmt("%.3f", f_small) + ", " + std::to_string(data.train.flows.size() + 1) +
                     " ID frames, " + std::to_string(data.tests.size()) + " test videos, " + fmt("%.0f s", s)};
    o.agree_test = big.eval.agreement;
    o.agree_val = val_agreement(big.trained.detector, data.val);
    o.detector = std::move(big.trained.detector);
    return o;
}

// ---------------------------------------------------------------- AC5

Verdict ga_search(const fs::path& out) {
    const auto surrogate = [](const ga::Genome& g) {
        ga::Candidate c;
        c.genome = g;
        c.f1 = -std::abs(g.flows - 5);
        return c;
    };
    int hits = 0;
    ga::GaResult last;
    for (int seed = 1; seed <= kGaSeeds; ++seed) {
        ga::GaConfig c;
        c.seed = static_cast<std::uint64_t>(seed);
        c.generations = 10;
        last = ga::run_ga(surrogate, c);
        hits += last.history.size() <= 10 && last.best.genome.flows == 5;
    }
    const fs::path csv = out / "candidates_surrogate.csv";
    vae::write_candidates_csv(csv.string(), ga::candidate_rows(last.candidates));
    std::ifstream in(csv);
    std::string header, line;
    std::getline(in, header);
    bool rows_ok = true;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        rows_ok &= std::count(line.begin(), line.end(), ',') == 5;
        ++rows;
    }
    const double rate = static_cast<double>(hits) / kGaSeeds;
    return {rate >= kGaHitRate && header == kTableColumns && rows_ok && rows == last.candidates.size(),
            std::to_string(hits) + "/" + std::to_string(kGaSeeds) + " seeds reach flows=5 in 10 generations, CSV header '" +
                header + "', " + std::to_string(rows) + " rows"};
}

// ---------------------------------------------------------------- AC6

struct SweepOutcome {
    Verdict verdict;
    std::optional<detect::QuantizedDetector> largest;
};

SweepOutcome detector_sweep(const fs::path& out) {
    const auto t0 = Clock::now();
    cli::RunConfig cfg;
    cfg.apply_seed(1);
    const auto data = cli::detector_scenes(cfg, 1);
    std::vector<detect::QuantizedDetector> models;
    const auto rows = detect::size_latency_sweep(data.train, data.test, cfg.detector.train, cfg.detector.timed_runs,
                                                 {64, 96, 128, 160}, &models);
    sim::write_text(out / "sweep.txt", detect::format_sweep(rows));
    std::ofstream cm(out / "confusion_matrices.txt");
    bool increasing = true, matrices = rows.size() == 4;
    std::string acets;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i) increasing &= rows[i].acet_ms > rows[i - 1].acet_ms;
        matrices &= rows[i].matrix.total() > 0;
        cm << "S=" << rows[i].input_size << "\n" << detect::format_matrix(rows[i].matrix) << "\n";
        acets += (i ? "/" : "") + fmt("%.2f", rows[i].acet_ms);
    }
    const int duck = static_cast<int>(sim::ObjectClass::duckie);
    const double r64 = rows.front().matrix.recall(duck), r160 = rows.back().matrix.recall(duck);
    SweepOutcome o;
    o.verdict = {increasing && r160 > r64 && matrices,
                 "ACET ms S=64/96/128/160 " + acets + ", duck recall S=64 " + fmt("%.3f", r64) + " vs S=160 " +
                     fmt("%.3f", r160) + ", " + std::to_string(rows.size()) + " confusion matrices, " +
                     fmt("%.0f s", seconds_since(t0))};
    o.largest = models.back();
    return o;
}

// ---------------------------------------------------------------- AC7

Verdict lane_following() {
    sim::WorldConfig w;
    w.track = sim::Track::straight_line(12.0);
    const sim::CameraModel cam;
    const sim::Renderer r(w, cam);
    lane::LaneFollower lf(cam);
    sim::RobotState s = sim::start_state(w, 0.5, 0.0);
    const double dt = 1.0 / 30.0;
    double worst = 0;
    for (int i = 0; i < static_cast<int>(kLaneSeconds * 30); ++i) {
        worst = std::max(worst, std::abs(sim::true_pose(w, s).d));
        s = sim::step_kinematics(s, lf.step(r.render(s).frame, dt).cmd, dt);
    }

    Rng rng(4242);
    lane::Belief b = lane::Belief::uniform();
    double drift = 0;
    bool nonneg = true;
    for (int step = 0; step < kFuzzSteps; ++step) {
        std::vector<double> votes(b.p.size(), 0.0);
        const int nv = uniform_int(rng, 0, 8);
        for (int k = 0; k < nv; ++k)
            votes[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(b.p.size()) - 1))] += uniform(rng, 0, 3);
        b = lane::belief_step(b, votes, {uniform(rng, -0.03, 0.03), uniform(rng, -0.2, 0.2)}).belief;
        drift = std::max(drift, std::abs(b.sum() - 1.0));
        for (double v : b.p) nonneg &= v >= 0;
    }
    return {worst < kMaxLaneOffset && drift < 1e-9 && nonneg,
            "max |d| " + fmt("%.4f m", worst) + " over 30 s straight, belief sum drift " + fmt("%.1e", drift) + " over " +
                std::to_string(kFuzzSteps) + " fuzz steps"};
}

// ---------------------------------------------------------------- AC8

struct DemoOutcome {
    Verdict verdict;
    std::vector<cli::DemoRun> runs;
};

// Histogram CSV in the A/B/C layout: same bins per panel, every record counted once.
bool histogram_layout_ok(const std::string& csv, const std::vector<rt::TraceRecord>& traces) {
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    if (line != rt::kHistogramHeader) return false;
    std::map<std::string, std::size_t> bins, counts;
    while (std::getline(in, line)) {
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) f.push_back(c);
        if (f.size() != 5) return false;
        bins[f[0] + ":" + f[1]]++;
        counts[f[1]] += std::stoul(f[4]);
    }
    const std::vector<std::string> want{std::string("A:") + rt::kOodTask, std::string("B:") + rt::kObjectTask,
                                        std::string("C:") + rt::kLaneTask};
    if (bins.size() != 3) return false;
    for (const auto& k : want)
        if (!bins.count(k) || bins[k] != bins[want[0]]) return false;
    for (const char* t : {rt::kOodTask, rt::kObjectTask, rt::kLaneTask})
        if (counts[t] != rt::responses(traces, t).size() || counts[t] == 0) return false;
    return true;
}

DemoOutcome end_to_end(const vae::OodDetector& ood, const detect::QuantizedDetector& det, const fs::path& out) {
    cli::RunConfig cfg;
    cfg.apply_seed(1);
    const sim::Renderer r(cli::world_of(cfg), sim::CameraModel{});
    const rt::DemoModels models{ood, det};
    DemoOutcome o;
    std::size_t snow_ok = 0, snow = 0, clean_ok = 0, clean = 0;
    double worst_latency = 0;
    std::vector<rt::TraceRecord> all;
    o.runs = cli::demo_series(r, models, cfg, 1, "both", [&](const cli::DemoRun& d) {
        const bool is_snow = d.scenario.name != "clean";
        const bool ok = cli::run_passes(d, kStopDeadlineMs);
        (is_snow ? snow : clean)++;
        (is_snow ? snow_ok : clean_ok) += ok;
        if (d.result.outcome.stop_latency_ms) worst_latency = std::max(worst_latency, *d.result.outcome.stop_latency_ms);
        all.insert(all.end(), d.result.traces.begin(), d.result.traces.end());
        std::cerr << "  run " << d.index << " " << d.scenario.name << (ok ? " ok" : " FAILED") << "\n";
    });
    const std::string hist = rt::response_histograms_csv(all);
    sim::write_text(out / "histograms.csv", hist);
    sim::write_text(out / "response_stats.csv", cli::response_stats_csv(all));
    const bool layout = histogram_layout_ok(hist, all);
    o.verdict = {snow_ok == snow && clean_ok == clean && layout && o.runs.size() == 20,
                 std::to_string(snow_ok) + "/" + std::to_string(snow) + " snow runs stopped in time (worst " +
                     fmt("%.1f ms", worst_latency) + "), " + std::to_string(clean_ok) + "/" + std::to_string(clean) +
                     " clean runs without a stop, M=" + std::to_string(cfg.pipeline.demo.pipeline.estop_m) +
                     (layout ? ", A/B/C histograms written" : ", histogram layout wrong")};
    return o;
}

// ---------------------------------------------------------------- AC9

std::vector<rt::SchedTask> demo_task_set(double fps) {
    const rt::TaskEts et;
    const auto specs = rt::default_tasks(fps);
    return {{specs[0], et.lane}, {specs[1], et.object}, {specs[2], et.ood}};
}

// Frame rate that puts the demo task set at utilization u on `workers`.
double fps_for(double u, std::size_t workers) {
    const rt::TaskEts et;
    const double per_frame = et.lane.mean + et.object.mean / 3 + et.ood.mean;
    return u * static_cast<double>(workers) * 1000.0 / per_frame;
}

Verdict interference() {
    rt::PipelineConfig hi;
    hi.workers = 2;
    hi.duration_s = 120;
    hi.fps = fps_for(kHighU, hi.workers);
    const auto tasks = demo_task_set(hi.fps);
    const double u_hi = rt::utilization(tasks, hi);
    const auto shared = rt::virtual_run(tasks, hi);
    bool tails = true;
    std::string p95s;
    for (const auto& t : tasks) {
        const double alone = rt::percentile(rt::responses(rt::virtual_run({t}, hi), t.spec.name), 0.95);
        const double with = rt::percentile(rt::responses(shared, t.spec.name), 0.95);
        tails &= with > alone;
        p95s += (p95s.empty() ? "" : ", ") + t.spec.name + " " + fmt("%.1f", with) + " vs " + fmt("%.1f", alone);
    }

    rt::PipelineConfig over = hi;
    over.duration_s = 60;
    over.fps = fps_for(kOverU, over.workers);
    const auto otasks = demo_task_set(over.fps);
    const double u_over = rt::utilization(otasks, over);
    const auto tr = rt::virtual_run(otasks, over);
    constexpr std::size_t kSegments = 10;
    const std::size_t per = over.frames() / kSegments;
    std::vector<double> seg_max(kSegments, 0);
    for (const auto& r : tr) seg_max[std::min(kSegments - 1, r.frame_id / per)] = std::max(seg_max[std::min(kSegments - 1, r.frame_id / per)], r.response_ms());
    bool growing = true;
    for (std::size_t i = 1; i < kSegments; ++i) growing &= seg_max[i] > seg_max[i - 1];
    return {tails && growing && std::abs(u_hi - kHighU) < 1e-9 && std::abs(u_over - kOverU) < 1e-9,
            "U=" + fmt("%.2f", u_hi) + " p95 ms shared vs alone: " + p95s + "; U=" + fmt("%.2f", u_over) +
                " per-6 s max response " + fmt("%.0f", seg_max.front()) + " -> " + fmt("%.0f ms", seg_max.back()) +
                (growing ? " rising every segment" : " not monotone")};
}

// ---------------------------------------------------------------- AC10

Verdict determinism(const vae::OodDetector& ood, const detect::QuantizedDetector& det, const cli::DemoRun& snow_run,
                    const fs::path& out) {
    // dataset generation
    cli::RunConfig tiny;
    tiny.apply_seed(11);
    tiny.world.suite = {300, 120, 2, 90};
    const fs::path d1 = out / "data_a", d2 = out / "data_b";
    fs::remove_all(d1);
    fs::remove_all(d2);
    cli::gen_data(tiny, 11, d1);
    cli::gen_data(tiny, 11, d2);
    const bool data_same = tree_of(d1) == tree_of(d2);

    // training: VAE and detector, each twice from the same seed
    tiny.preproc.size = {30, 40};
    tiny.preproc.flows = 3;
    tiny.vae.train.vae.epochs = 2;
    const auto ood_data = cli::load_ood_data(d1);
    const auto m1 = cli::train_and_score_ood(ood_data, tiny), m2 = cli::train_and_score_ood(ood_data, tiny);
    vae::save_detector((out / "ood_a.oodm").string(), m1.trained.detector);
    vae::save_detector((out / "ood_b.oodm").string(), m2.trained.detector);
    const bool vae_same = bytes_of(out / "ood_a.oodm") == bytes_of(out / "ood_b.oodm") && m1.metrics == m2.metrics;

    const sim::Renderer sr(detect::scene_world(1), sim::CameraModel{});
    const auto scenes = detect::make_scenes(sr, 40, 5);
    detect::DetectorConfig dc;
    dc.input_size = 64;
    detect::DetTrainConfig tc;
    tc.epochs = 2;
    detect::save_detector((out / "det_a.oodm").string(), detect::QuantizedDetector(detect::train_detector(scenes, dc, tc)));
    detect::save_detector((out / "det_b.oodm").string(), detect::QuantizedDetector(detect::train_detector(scenes, dc, tc)));
    const bool det_same = bytes_of(out / "det_a.oodm") == bytes_of(out / "det_b.oodm");

    // virtual-clock pipeline: replay one demo run and the scheduling model
    cli::RunConfig cfg;
    cfg.apply_seed(1);
    const sim::Renderer r(cli::world_of(cfg), sim::CameraModel{});
    rt::DemoConfig dc2 = cfg.pipeline.demo;
    dc2.pipeline.seed = derive_seed(1, "run/" + std::to_string(snow_run.index));
    const auto again = rt::run_pipeline(r, rt::DemoModels{ood, det}, snow_run.scenario, dc2);
    bool pipe_same = again.traces.size() == snow_run.result.traces.size() &&
                     rt::to_json(again.outcome) == rt::to_json(snow_run.result.outcome);
    for (std::size_t i = 0; pipe_same && i < again.traces.size(); ++i)
        pipe_same = rt::trace_line(again.traces[i]) == rt::trace_line(snow_run.result.traces[i]);
    rt::PipelineConfig pc;
    pc.workers = 2;
    pc.duration_s = 30;
    const auto tasks = demo_task_set(pc.fps);
    const auto v1 = rt::virtual_run(tasks, pc), v2 = rt::virtual_run(tasks, pc);
    bool sched_same = v1.size() == v2.size();
    for (std::size_t i = 0; sched_same && i < v1.size(); ++i) sched_same = rt::trace_line(v1[i]) == rt::trace_line(v2[i]);

    fs::remove_all(d1);
    fs::remove_all(d2);
    const auto yn = [](bool b) { return b ? "identical" : "DIFFERENT"; };
    return {data_same && vae_same && det_same && pipe_same && sched_same,
            std::string("dataset ") + yn(data_same) + ", VAE " + yn(vae_same) + ", detector " + yn(det_same) +
                ", demo run " + yn(pipe_same) + ", schedule " + yn(sched_same)};
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
    fs::create_directories(out);
    std::map<int, Verdict> v;
    const auto run = [&](int id, const std::function<Verdict()>& f) {
        std::cerr << "AC" << id << " ...\n";
        try {
            v[id] = f();
        } catch (const std::exception& e) {
            v[id] = {false, std::string("error: ") + e.what()};
        }
    };

    run(1, gradients);
    QuantKernels qk;
    try {
        qk = quant_kernels();
    } catch (const std::exception& e) {
        qk.grid_ok = qk.ref_ok = false;
        std::cerr << "quant kernels: " << e.what() << "\n";
    }
    run(3, optical_flow);
    run(5, [&] { return ga_search(out); });
    run(7, lane_following);
    run(9, interference);

    OodOutcome ood;
    run(4, [&] {
        ood = ood_efficacy(out);
        return ood.verdict;
    });
    v[2] = {qk.grid_ok && qk.ref_ok && ood.detector && ood.agree_val >= kMinAgreement && ood.agree_test >= kMinAgreement,
            "round trip max err " + fmt("%.4f", qk.worst_ratio) + " x scale, " + std::to_string(qk.ref_mismatch) + "/" +
                std::to_string(2 * kQuantRefTrials) + " integer-reference mismatches, int8/float verdict agreement " +
                fmt("%.4f", ood.agree_val) + " validation / " + fmt("%.4f", ood.agree_test) + " test windows"};

    SweepOutcome sweep;
    run(6, [&] {
        sweep = detector_sweep(out);
        return sweep.verdict;
    });

    DemoOutcome demo;
    if (ood.detector && sweep.largest) {
        run(8, [&] {
            demo = end_to_end(*ood.detector, *sweep.largest, out);
            return demo.verdict;
        });
    } else {
        v[8] = {false, "needs the trained OOD detector and detector from AC4 and AC6"};
    }
    if (ood.detector && sweep.largest && !demo.runs.empty()) {
        run(10, [&] { return determinism(*ood.detector, *sweep.largest, demo.runs.front(), out); });
    } else {
        v[10] = {false, "needs the demo runs from AC8"};
    }

    int failed = 0;
    for (const auto& [id, r] : v) {
        std::cout << "AC" << id << " " << (r.pass ? "PASS" : "FAIL") << " " << r.detail << "\n";
        failed += !r.pass;
    }
    return failed == 0 ? 0 : 1;
}
