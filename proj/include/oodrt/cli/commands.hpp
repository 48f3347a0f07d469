#pragma once

// The command-line workflow: gen-data, train-ood, train-detector, tune-ga,
// run-demo and report. Each command writes its artifacts plus
// run_log.<command>.json into --out. Failures map to exit codes: 2 input or config, 3 training,
// 4 pipeline, 1 anything unexpected.

#include <filesystem>
#include <functional>
#include <iostream>

#include "oodrt/cli/config.hpp"

namespace oodrt::cli {

namespace fs = std::filesystem;

enum ExitCode { kOk = 0, kInternal = 1, kInputError = 2, kTrainingError = 3, kPipelineError = 4 };

struct Options {
    std::string command;
    std::string config_path;
    std::uint64_t seed = 1;
    fs::path out = "out";
    fs::path data;    // gen-data output directory (train-ood, tune-ga)
    fs::path models;  // directory holding ood.oodm and detector.oodm (run-demo)
    std::optional<std::size_t> videos;
    std::optional<std::string> clock;
    std::string scenario = "both";  // run-demo: snow, clean or both (alternating)
    bool sweep = false;             // train-detector: all four input sizes
};

inline constexpr const char* kDatasetIndex = "dataset.json";
inline constexpr const char* kOodModelFile = "ood.oodm";
inline constexpr const char* kDetectorModelFile = "detector.oodm";

inline void make_dir(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec || !fs::is_directory(p)) throw io_error("cannot create directory " + p.string());
}

inline void write_json(const fs::path& p, const json& j) { sim::write_text(p, j.dump(2) + "\n"); }

inline json read_json(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw io_error("cannot open " + p.string());
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        throw argument_error(p.string() + ": " + e.what());
    }
}

inline sim::WorldConfig world_of(const RunConfig& c) { return sim::default_world(c.world.world_seed); }

// ---------------------------------------------------------------- gen-data

struct GenDataResult {
    fs::path index;
    std::vector<fs::path> manifests;
};

inline GenDataResult gen_data(const RunConfig& cfg, std::uint64_t seed, const fs::path& out) {
    make_dir(out);
    const sim::WorldConfig world = world_of(cfg);
    const sim::CameraModel cam;
    const sim::Renderer r(world, cam);
    const sim::Suite suite = sim::default_suite(world.track.length(), cfg.world.suite, seed);
    GenDataResult res;
    json index{{"version", sim::kGeneratorVersion}, {"seed", seed}, {"world_seed", cfg.world.world_seed}, {"fps", cfg.world.fps}};
    const auto one = [&](const sim::SuiteVideo& v) {
        const auto seq = sim::render_sequence(r, v.spec, sim::DrivePolicy{}, cfg.world.fps, v.seed);
        res.manifests.push_back(sim::write_sequence(out / v.spec.name, seq, cam, v.seed));
        return (fs::path(v.spec.name) / "manifest.json").generic_string();
    };
    index["train"] = one(suite.train);
    index["val"] = one(suite.val);
    index["tests"] = json::array();
    for (const auto& t : suite.tests) index["tests"].push_back(one(t));
    res.index = out / kDatasetIndex;
    write_json(res.index, index);
    return res;
}

// Loads a gen-data directory and computes the flow videos.
inline vae::OodData load_ood_data(const fs::path& dir) {
    if (dir.empty()) throw argument_error("--data is required");
    const json index = read_json(dir / kDatasetIndex);
    const auto load = [&](const json& rel) {
        if (!rel.is_string()) throw argument_error("dataset index: manifest paths must be strings");
        const auto v = sim::load_video(dir / rel.get<std::string>());
        return vae::compute_flow_video(v.frames, v.ood);
    };
    try {
        vae::OodData d{load(index.at("train")), load(index.at("val")), {}};
        for (const auto& t : index.at("tests")) d.tests.push_back(load(t));
        return d;
    } catch (const json::exception& e) {
        throw argument_error("dataset index: " + std::string(e.what()));
    }
}

// ---------------------------------------------------------------- train-ood

inline json report_json(const vae::EvalReport& r) {
    return {{"tp", r.tp}, {"fp", r.fp}, {"tn", r.tn}, {"fn", r.fn}, {"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1}};
}

struct OodRun {
    vae::TrainedOod trained;
    vae::OodEvaluation eval;
    json metrics;
};

inline OodRun train_and_score_ood(const vae::OodData& data, const RunConfig& cfg) {
    vae::TrainedOod t = vae::train_ood(data.train, data.val, cfg.preproc, cfg.vae.train);
    const vae::OodEvaluation e = vae::evaluate_ood(t.detector, data.tests);
    const auto& last = t.log.epochs.back();
    json m{{"preproc", flow::describe(cfg.preproc)},
           {"threshold", t.detector.threshold},
           {"final_loss", {{"total", last.total}, {"recon", last.recon}, {"kl", last.kl}}},
           {"test_windows", e.windows},
           {"float", report_json(e.float_report)},
           {"quantized", report_json(e.quant_report)},
           {"f1", e.quant_report.f1},
           {"quant_float_agreement", e.agreement}};
    return {std::move(t), e, std::move(m)};
}

// ---------------------------------------------------------------- train-detector

struct DetectorData {
    std::vector<detect::Scene> train, test;
};

inline DetectorData detector_scenes(const RunConfig& cfg, std::uint64_t seed) {
    const sim::Renderer r(detect::scene_world(cfg.world.world_seed), sim::CameraModel{});
    return {detect::make_scenes(r, cfg.detector.train_scenes, derive_seed(seed, "det-train")),
            detect::make_scenes(r, cfg.detector.test_scenes, derive_seed(seed, "det-test"))};
}

inline json matrix_json(const detect::ConfusionMatrix& m) {
    json j{{"rows", "prediction"}, {"columns", "truth"}, {"classes", json::array()}, {"counts", m.counts},
           {"row_percent", m.row_percent()}, {"recall", json::object()}};
    for (int c = 0; c <= detect::kClasses; ++c) j["classes"].push_back(detect::class_name(c));
    for (int c = 0; c < detect::kClasses; ++c) j["recall"][detect::class_name(c)] = m.recall(c);
    return j;
}

inline json loss_json(const detect::DetTrainLog& log) {
    if (log.epochs.empty()) return nullptr;
    const auto& l = log.epochs.back();
    return {{"total", l.total}, {"objectness", l.objectness}, {"box", l.box}, {"class", l.cls}};
}

inline json train_detector_cmd(const RunConfig& cfg, std::uint64_t seed, const fs::path& out, bool sweep) {
    const DetectorData data = detector_scenes(cfg, seed);
    if (sweep) {
        const auto rows = detect::size_latency_sweep(data.train, data.test, cfg.detector.train, cfg.detector.timed_runs,
                                                     cfg.detector.sweep_sizes);
        sim::write_text(out / "sweep.txt", detect::format_sweep(rows));
        json j = json::array();
        for (const auto& r : rows)
            j.push_back({{"input_size", r.input_size},
                         {"acet_ms", r.acet_ms},
                         {"et_var_ms2", r.et_var_ms2},
                         {"final_loss", loss_json(r.log)},
                         {"confusion", matrix_json(r.matrix)}});
        return {{"sweep", j}};
    }
    detect::DetTrainLog log;
    const detect::QuantizedDetector q(detect::train_detector(data.train, cfg.detector.model, cfg.detector.train, &log));
    detect::save_detector((out / kDetectorModelFile).string(), q);
    const auto m = detect::evaluate_detector(q, data.test);
    const auto [acet, var] = detect::time_inference(q, data.test.front().frame, cfg.detector.timed_runs);
    sim::write_text(out / "confusion.txt", detect::format_matrix(m));
    return {{"input_size", q.cfg.input_size}, {"final_loss", loss_json(log)}, {"confusion", matrix_json(m)},
            {"acet_ms", acet},                {"et_var_ms2", var}};
}

// ---------------------------------------------------------------- tune-ga

inline json genome_json(const ga::Genome& g) {
    const auto p = g.preproc();
    return {{"size", flow::to_string(p.size)}, {"flows", p.flows}, {"interp", flow::to_string(p.interp)}};
}

inline json tune_ga_cmd(const RunConfig& cfg, const vae::OodData& data, const fs::path& out) {
    ga::FitnessConfig fc = cfg.ga.fitness;
    const auto res = ga::run_ga([&](const ga::Genome& g) { return ga::fitness(g, data, fc); }, cfg.ga.ga);
    vae::write_candidates_csv((out / "candidates.csv").string(), ga::candidate_rows(res.candidates));
    json hist = json::array();
    for (const auto& h : res.history)
        hist.push_back({{"generation", h.generation}, {"best_f1", h.best_f1}, {"best", genome_json(h.best)}, {"evaluations", h.evaluations}});
    return {{"seed", cfg.ga.ga.seed},
            {"generations", cfg.ga.ga.generations},
            {"population", cfg.ga.ga.population},
            {"best_genome", genome_json(res.best.genome)},
            {"best_f1", res.best.f1},
            {"best_et_mean_ms", res.best.et.mean_ms},
            {"candidates", res.candidates.size()},
            {"history", hist}};
}

// ---------------------------------------------------------------- run-demo

struct DemoRun {
    std::size_t index = 0;
    rt::DemoScenario scenario;
    rt::DemoResult result;
};

// A snow run passes when the window that latched the stop already saw snow,
// the stop came within `deadline_ms` of the first OOD window's release and
// before the robot left the road. A clean run passes when it never stops.
inline bool run_passes(const DemoRun& d, double deadline_ms = 800) {
    const auto& o = d.result.outcome;
    if (d.scenario.name == "clean") return !o.stopped;
    if (!o.stopped || !o.first_ood_frame || *o.stop_frame < *o.first_ood_frame) return false;
    if (!o.stop_latency_ms || *o.stop_latency_ms > deadline_ms) return false;
    return !o.left_road_ms || *o.left_road_ms > *o.stop_ms;
}

inline rt::DemoModels load_models(const fs::path& dir) {
    if (dir.empty()) throw argument_error("--models is required");
    for (const char* f : {kOodModelFile, kDetectorModelFile})
        if (!fs::exists(dir / f)) throw io_error("missing model " + (dir / f).string());
    return {vae::load_detector((dir / kOodModelFile).string()), detect::load_detector((dir / kDetectorModelFile).string())};
}

// Runs cfg.pipeline.runs demos. "both" alternates snow (even index) and clean.
inline std::vector<DemoRun> demo_series(const sim::Renderer& r, const rt::DemoModels& models, const RunConfig& cfg,
                                        std::uint64_t seed, const std::string& which,
                                        const std::function<void(const DemoRun&)>& each = {}) {
    if (which != "snow" && which != "clean" && which != "both")
        throw config_error("scenario must be snow, clean or both, got '" + which + "'");
    std::vector<DemoRun> runs;
    for (std::size_t k = 0; k < cfg.pipeline.runs; ++k) {
        const bool snow = which == "snow" || (which == "both" && k % 2 == 0);
        rt::DemoConfig dc = cfg.pipeline.demo;
        dc.pipeline.seed = derive_seed(seed, "run/" + std::to_string(k));
        DemoRun d;
        d.index = k;
        d.scenario = rt::make_scenario(snow, r.world().track.length(), dc.pipeline, derive_seed(seed, "scenario/" + std::to_string(k)),
                                       cfg.pipeline.snow_onset_s);
        d.result = rt::run_pipeline(r, models, d.scenario, dc);
        if (each) each(d);
        runs.push_back(std::move(d));
    }
    return runs;
}

inline std::string response_stats_csv(const std::vector<rt::TraceRecord>& traces) {
    std::ostringstream s;
    s << "task,count,mean_ms,var_ms2,max_ms,p50_ms,p95_ms,p99_ms,misses\n";
    for (const char* t : {rt::kOodTask, rt::kObjectTask, rt::kLaneTask}) {
        if (rt::responses(traces, t).empty()) continue;
        const auto st = rt::response_stats(traces, t);
        char buf[256];
        std::snprintf(buf, sizeof buf, "%s,%zu,%.3f,%.3f,%.3f,%.3f,%.3f,%.3f,%zu\n", t, st.count, st.mean, st.variance, st.max,
                      st.p50, st.p95, st.p99, st.misses);
        s << buf;
    }
    return s.str();
}

inline json run_demo_cmd(const RunConfig& cfg, std::uint64_t seed, const Options& opt, std::ostream& msg) {
    const rt::DemoModels models = load_models(opt.models);
    const sim::WorldConfig world = world_of(cfg);
    const sim::Renderer r(world, sim::CameraModel{});
    std::vector<rt::TraceRecord> all;
    json outcomes = json::array();
    std::size_t passed = 0;
    demo_series(r, models, cfg, seed, opt.scenario, [&](const DemoRun& d) {
        const fs::path dir = opt.out / "runs" / (std::to_string(d.index) + "_" + d.scenario.name);
        make_dir(dir);
        rt::write_trace_csv((dir / "traces.csv").string(), d.result.traces);
        json o = rt::to_json(d.result.outcome);
        o["run"] = d.index;
        o["start_s"] = d.scenario.start_s;
        o["snow_density"] = d.scenario.snow.density;
        o["passed"] = run_passes(d);
        write_json(dir / "outcome.json", o);
        outcomes.push_back(o);
        all.insert(all.end(), d.result.traces.begin(), d.result.traces.end());
        passed += run_passes(d);
        msg << "run " << d.index << " " << d.scenario.name << " stopped=" << (d.result.outcome.stopped ? "true" : "false");
        if (d.result.outcome.stop_latency_ms) msg << " stop_latency_ms=" << *d.result.outcome.stop_latency_ms;
        msg << " distance_m=" << d.result.outcome.distance_m << (run_passes(d) ? " ok" : " FAILED") << "\n";
    });
    write_json(opt.out / "outcomes.json", outcomes);
    sim::write_text(opt.out / "histograms.csv", rt::response_histograms_csv(all));
    sim::write_text(opt.out / "response_stats.csv", response_stats_csv(all));
    return {{"runs", outcomes.size()}, {"passed", passed}};
}

// ---------------------------------------------------------------- report

// Summarizes whatever artifacts a directory holds: demo traces (response
// statistics and the three-panel histogram), GA candidates (Table-I rows)
// and a detector sweep.
inline json report_cmd(const fs::path& in, const fs::path& out, std::ostream& msg) {
    if (in.empty() || !fs::is_directory(in)) throw io_error("report: --data must name a directory");
    json summary = json::object();
    std::vector<fs::path> trace_files;
    for (const auto& e : fs::recursive_directory_iterator(in))
        if (e.is_regular_file() && e.path().filename() == "traces.csv") trace_files.push_back(e.path());
    std::sort(trace_files.begin(), trace_files.end());
    if (!trace_files.empty()) {
        std::vector<rt::TraceRecord> all;
        for (const auto& f : trace_files) {
            const auto t = rt::read_trace_csv(f.string());
            all.insert(all.end(), t.begin(), t.end());
        }
        const std::string stats = response_stats_csv(all);
        sim::write_text(out / "response_stats.csv", stats);
        sim::write_text(out / "histograms.csv", rt::response_histograms_csv(all));
        msg << "response times over " << trace_files.size() << " trace file(s)\n" << stats;
        summary["trace_files"] = trace_files.size();
        summary["trace_records"] = all.size();
    }
    if (fs::exists(in / "candidates.csv")) {
        std::ifstream c(in / "candidates.csv");
        std::string line;
        std::getline(c, line);
        if (line != vae::kCandidateHeader) throw argument_error("candidates.csv: unexpected header");
        msg << "\nSize     Flows  Interp    F1     ET mean  ET var\n";
        std::size_t n = 0;
        while (std::getline(c, line)) {
            std::vector<std::string> f;
            std::stringstream ss(line);
            for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
            if (f.size() != 6) throw argument_error("candidates.csv: expected 6 fields");
            char buf[160];
            std::snprintf(buf, sizeof buf, "%-8s %-6s %-9s %-6s %s ms  %s ms^2\n", f[0].c_str(), f[1].c_str(), f[2].c_str(),
                          f[3].c_str(), f[4].c_str(), f[5].c_str());
            msg << buf;
            ++n;
        }
        summary["candidates"] = n;
    }
    if (fs::exists(in / "sweep.txt")) {
        std::ifstream s(in / "sweep.txt");
        msg << "\n" << std::string(std::istreambuf_iterator<char>(s), {});
        summary["sweep"] = true;
    }
    if (summary.empty()) throw argument_error("report: nothing to report in " + in.string());
    return summary;
}

// ---------------------------------------------------------------- dispatch

inline json run_log(const Options& opt, const json& config_input, const RunConfig& cfg, const json& result) {
    return {{"tool", kToolVersion},
            {"command", opt.command},
            {"seed", opt.seed},
            {"config_file", opt.config_path},
            {"config_input", config_input},
            {"resolved_config", to_json(cfg)},
            {"versions", {{"generator", sim::kGeneratorVersion}, {"oodm", nn::kOodmVersion}}},
            {"result", result}};
}

// Runs `body` and maps what it throws to an exit code, reporting on `err`.
template <class Body>
int guarded(Body&& body, std::ostream& err) {
    try {
        body();
        return kOk;
    } catch (const training_error& e) {
        err << "training failed";
        if (e.epoch > 0) err << " in epoch " << e.epoch;
        err << ": " << e.what() << "\n";
        return kTrainingError;
    } catch (const pipeline_error& e) {
        err << "pipeline aborted: " << e.what() << "\n";
        return kPipelineError;
    } catch (const overload_error& e) {
        err << "pipeline aborted: " << e.what() << "\n";
        return kPipelineError;
    } catch (const config_error& e) {
        err << "config error: " << e.what() << "\n";
        return kInputError;
    } catch (const argument_error& e) {
        err << "input error: " << e.what() << "\n";
        return kInputError;
    } catch (const io_error& e) {
        err << "i/o error: " << e.what() << "\n";
        return kInputError;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kInternal;
    }
}

inline int run_command(const Options& opt, std::ostream& msg, std::ostream& err) {
    return guarded([&] {
        json input = json::object();
        if (!opt.config_path.empty()) {
            std::ifstream in(opt.config_path);
            if (!in) throw config_error("cannot open config " + opt.config_path);
            try {
                in >> input;
            } catch (const json::exception& e) {
                throw config_error("config " + opt.config_path + " is not valid JSON: " + e.what());
            }
        }
        RunConfig cfg = parse_config(input);
        cfg.apply_seed(opt.seed);
        if (opt.clock) cfg.pipeline.demo.pipeline.clock = rt::parse_clock(*opt.clock);
        if (opt.videos) cfg.world.suite.test_videos = *opt.videos;
        make_dir(opt.out);

        json result;
        if (opt.command == "gen-data") {
            msg << "seed " << opt.seed << "\n";
            const auto r = gen_data(cfg, opt.seed, opt.out);
            result = {{"index", kDatasetIndex}, {"manifests", r.manifests.size()}};
            msg << "wrote " << r.manifests.size() << " manifests\n";
        } else if (opt.command == "train-ood") {
            const auto data = load_ood_data(opt.data);
            auto run = train_and_score_ood(data, cfg);
            vae::save_detector((opt.out / kOodModelFile).string(), run.trained.detector);
            write_json(opt.out / "ood_metrics.json", run.metrics);
            result = run.metrics;
            msg << "f1=" << run.eval.quant_report.f1 << " float_f1=" << run.eval.float_report.f1
                << " agreement=" << run.eval.agreement << "\n";
        } else if (opt.command == "train-detector") {
            result = train_detector_cmd(cfg, opt.seed, opt.out, opt.sweep);
            write_json(opt.out / "detector_metrics.json", result);
            if (opt.sweep) {
                std::ifstream s(opt.out / "sweep.txt");
                msg << std::string(std::istreambuf_iterator<char>(s), {});
            } else {
                char buf[96];
                std::snprintf(buf, sizeof buf, "duckie_recall=%.3f acet_ms=%.3f\n", result["confusion"]["recall"]["duckie"].get<double>(),
                              result["acet_ms"].get<double>());
                msg << buf;
            }
        } else if (opt.command == "tune-ga") {
            const auto data = load_ood_data(opt.data);
            result = tune_ga_cmd(cfg, data, opt.out);
            write_json(opt.out / "ga_log.json", result);
            msg << "best " << result["best_genome"].dump() << " f1=" << result["best_f1"] << "\n";
        } else if (opt.command == "run-demo") {
            result = run_demo_cmd(cfg, opt.seed, opt, msg);
            msg << result["passed"] << "/" << result["runs"] << " runs passed\n";
        } else if (opt.command == "report") {
            result = report_cmd(opt.data, opt.out, msg);
        } else {
            throw config_error("unknown command '" + opt.command + "'");
        }
        write_json(opt.out / ("run_log." + opt.command + ".json"), run_log(opt, input, cfg, result));
    }, err);
}

}  // namespace oodrt::cli
