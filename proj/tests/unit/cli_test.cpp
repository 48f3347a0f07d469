#include <gtest/gtest.h>

#include <sstream>

#include "oodrt/cli/commands.hpp"

using namespace oodrt;
using namespace oodrt::cli;

namespace {

const char* kTiny = R"({
  "world": {"train_frames": 64, "val_frames": 40, "test_frames": 60},
  "preproc": {"size": "30x40", "flows": 3},
  "vae": {"epochs": 1},
  "detector": {"input_size": 64, "epochs": 1, "train_scenes": 20, "test_scenes": 10, "timed_runs": 5},
  "ga": {"population": 4, "generations": 2, "vae_epochs": 1, "et_runs": 5},
  "pipeline": {"runs": 2, "duration_s": 2, "snow_onset_s": 1, "estop_m": 3}
})";

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("oodrt_cli_test_" + name);
    fs::remove_all(p);
    return p;
}

fs::path write_config(const std::string& name, const std::string& text) {
    const fs::path p = fs::temp_directory_path() / ("oodrt_cli_test_" + name + ".json");
    sim::write_text(p, text);
    return p;
}

struct Run {
    int code;
    std::string out, err;
};

Run run(Options o) {
    std::ostringstream out, err;
    const int code = run_command(o, out, err);
    return {code, out.str(), err.str()};
}

Options opts(const std::string& cmd, const fs::path& out, const fs::path& cfg = {}) {
    Options o;
    o.command = cmd;
    o.out = out;
    o.config_path = cfg.string();
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// Every regular file below `dir`, keyed by relative path.
std::map<std::string, std::string> tree(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).generic_string()] = slurp(e.path());
    return out;
}

std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::vector<std::string>> rows;
    for (std::string line; std::getline(in, line);) {
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) f.push_back(c);
        rows.push_back(f);
    }
    return rows;
}

// Data and models shared by the slower command tests.
class Workflow : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        cfg_ = new fs::path(write_config("tiny", kTiny));
        data_ = new fs::path(scratch("data"));
        models_ = new fs::path(scratch("models"));
        auto g = opts("gen-data", *data_, *cfg_);
        g.seed = 7;
        ASSERT_EQ(run(g).code, kOk);
        auto t = opts("train-ood", *models_, *cfg_);
        t.data = *data_;
        ASSERT_EQ(run(t).code, kOk);
        ASSERT_EQ(run(opts("train-detector", *models_, *cfg_)).code, kOk);
    }
    static void TearDownTestSuite() {
        fs::remove_all(*data_);
        fs::remove_all(*models_);
        delete cfg_;
        delete data_;
        delete models_;
    }
    static fs::path *cfg_, *data_, *models_;
};
fs::path *Workflow::cfg_, *Workflow::data_, *Workflow::models_;

}  // namespace

// ---------------------------------------------------------------- config

TEST(Config, EmptyDocumentGivesDefaults) {
    const RunConfig c = parse_config(json::object());
    EXPECT_EQ(flow::to_string(c.preproc.size), "60x80");
    EXPECT_EQ(c.preproc.flows, 5);
    EXPECT_EQ(c.world.suite.train_frames, 2048u);
    EXPECT_EQ(c.world.suite.test_videos, 8u);
    EXPECT_EQ(c.detector.model.input_size, 160);
    EXPECT_EQ(c.pipeline.demo.pipeline.estop_m, 10);
    EXPECT_EQ(c.pipeline.demo.pipeline.clock, rt::ClockMode::virtual_time);
}

TEST(Config, ResolvedConfigRoundTrips) {
    const RunConfig c = parse_config(json::parse(kTiny));
    const json j = to_json(c);
    EXPECT_EQ(to_json(parse_config(j)), j);
    EXPECT_EQ(j["preproc"]["size"], "30x40");
    EXPECT_EQ(j["pipeline"]["estop_m"], 3);
}

TEST(Config, UnknownKeysAreRejected) {
    for (const char* doc : {R"({"wrold": {}})", R"({"vae": {"epoch": 3}})", R"({"pipeline": {"workers": 2, "worker": 1}})"}) {
        try {
            parse_config(json::parse(doc));
            FAIL() << doc;
        } catch (const config_error& e) {
            EXPECT_NE(std::string(e.what()).find("unknown config key"), std::string::npos) << e.what();
        }
    }
}

TEST(Config, BadValuesAreRejected) {
    EXPECT_THROW(parse_config(json::parse(R"({"vae": {"epochs": "many"}})")), config_error);
    EXPECT_THROW(parse_config(json::parse(R"({"preproc": {"size": "33x44"}})")), config_error);
    EXPECT_THROW(parse_config(json::parse(R"({"preproc": {"interp": "cubic"}})")), config_error);
    EXPECT_THROW(parse_config(json::parse(R"({"pipeline": {"clock": "sundial"}})")), config_error);
    EXPECT_THROW(parse_config(json::parse(R"({"pipeline": {"estop_m": 0}})")), config_error);
    EXPECT_THROW(parse_config(json::parse(R"({"pipeline": {"lane_et_ms": [25]}})")), config_error);
    EXPECT_THROW(parse_config(json::parse(R"({"detector": {"sweep_sizes": [64, 100]}})")), config_error);
    EXPECT_THROW(parse_config(json::parse(R"([1, 2])")), config_error);
}

TEST(Config, SeedReachesEveryModule) {
    RunConfig c;
    c.apply_seed(42);
    EXPECT_EQ(c.vae.train.vae.seed, 42u);
    EXPECT_EQ(c.detector.train.seed, 42u);
    EXPECT_EQ(c.ga.ga.seed, 42u);
    EXPECT_EQ(c.pipeline.demo.pipeline.seed, 42u);
}

// ---------------------------------------------------------------- exit codes

TEST(ExitCodes, ErrorKindsMapToDocumentedCodes) {
    std::ostringstream err;
    EXPECT_EQ(guarded([] {}, err), kOk);
    EXPECT_EQ(guarded([] { throw config_error("x"); }, err), kInputError);
    EXPECT_EQ(guarded([] { throw argument_error("x"); }, err), kInputError);
    EXPECT_EQ(guarded([] { throw io_error("x"); }, err), kInputError);
    EXPECT_EQ(guarded([] { throw training_error("x", 4); }, err), kTrainingError);
    EXPECT_EQ(guarded([] { throw pipeline_error("ood_detect", "x"); }, err), kPipelineError);
    EXPECT_EQ(guarded([] { throw overload_error("x"); }, err), kPipelineError);
    EXPECT_EQ(guarded([] { throw std::runtime_error("x"); }, err), kInternal);
    EXPECT_NE(err.str().find("epoch 4"), std::string::npos);
    EXPECT_NE(err.str().find("ood_detect"), std::string::npos);
}

TEST(ExitCodes, UnknownConfigKeyIsInputError) {
    const auto cfg = write_config("typo", R"({"world": {"trian_frames": 10}})");
    const auto r = run(opts("gen-data", scratch("typo"), cfg));
    EXPECT_EQ(r.code, kInputError);
    EXPECT_NE(r.err.find("world.trian_frames"), std::string::npos);
}

TEST(ExitCodes, MissingConfigFileIsInputError) {
    EXPECT_EQ(run(opts("gen-data", scratch("nocfg"), "/nonexistent/cfg.json")).code, kInputError);
}

TEST(ExitCodes, UnwritableOutputIsInputError) {
    const auto file = scratch("blocker");
    sim::write_text(file, "x");
    const auto r = run(opts("gen-data", file / "sub", write_config("tiny", kTiny)));
    EXPECT_EQ(r.code, kInputError);
    fs::remove(file);
}

TEST(ExitCodes, MissingManifestIsInputError) {
    auto o = opts("train-ood", scratch("nodata_out"), write_config("tiny", kTiny));
    o.data = scratch("nodata");
    EXPECT_EQ(run(o).code, kInputError);
}

TEST(ExitCodes, MissingModelsIsInputError) {
    auto o = opts("run-demo", scratch("nomodels_out"), write_config("tiny", kTiny));
    o.models = scratch("nomodels");
    EXPECT_EQ(run(o).code, kInputError);
}

// ---------------------------------------------------------------- gen-data

TEST(GenData, SameSeedSameBytesAndVideoCount) {
    const auto cfg = write_config("tiny", kTiny);
    const auto a = scratch("gen_a"), b = scratch("gen_b"), c = scratch("gen_c");
    auto o = opts("gen-data", a, cfg);
    o.seed = 7;
    o.videos = 2;
    const auto r = run(o);
    ASSERT_EQ(r.code, kOk) << r.err;
    EXPECT_NE(r.out.find("seed 7"), std::string::npos);
    o.out = b;
    ASSERT_EQ(run(o).code, kOk);
    EXPECT_EQ(tree(a), tree(b));

    const json index = json::parse(slurp(a / kDatasetIndex));
    EXPECT_EQ(index["tests"].size(), 2u);
    EXPECT_EQ(sim::read_manifest(a / "train" / "manifest.json").frames.size(), 64u);
    std::size_t ood = 0;
    for (const auto& t : index["tests"])
        for (const auto& f : sim::read_manifest(a / t.get<std::string>()).frames) ood += f.ood;
    EXPECT_GT(ood, 0u);

    o.out = c;
    o.seed = 8;
    ASSERT_EQ(run(o).code, kOk);
    EXPECT_NE(slurp(a / "train" / "frame_00010.ppm"), slurp(c / "train" / "frame_00010.ppm"));
    for (const auto& d : {a, b, c}) fs::remove_all(d);
}

// ---------------------------------------------------------------- workflow

TEST_F(Workflow, TrainOodWritesModelMetricsAndLog) {
    const json m = json::parse(slurp(*models_ / "ood_metrics.json"));
    EXPECT_TRUE(m.contains("quant_float_agreement"));
    EXPECT_GE(m["quant_float_agreement"].get<double>(), 0.0);
    EXPECT_LE(m["quant_float_agreement"].get<double>(), 1.0);
    EXPECT_TRUE(m["final_loss"].contains("total"));
    const auto det = vae::load_detector((*models_ / kOodModelFile).string());
    EXPECT_EQ(det.preproc.flows, 3);
    const json log = json::parse(slurp(*models_ / "run_log.train-ood.json"));
    EXPECT_EQ(log["config_input"], json::parse(kTiny));
    EXPECT_EQ(log["resolved_config"], to_json(parse_config(json::parse(kTiny))));
    EXPECT_EQ(log["seed"], 1);
    EXPECT_TRUE(log["versions"].contains("oodm"));
}

TEST_F(Workflow, TrainOodDivergenceIsTrainingError) {
    const auto cfg = write_config("diverge", R"({"preproc": {"size": "30x40", "flows": 3}, "vae": {"epochs": 2, "learning_rate": 1e30}})");
    auto o = opts("train-ood", scratch("diverge"), cfg);
    o.data = *data_;
    const auto r = run(o);
    EXPECT_EQ(r.code, kTrainingError);
    EXPECT_NE(r.err.find("epoch"), std::string::npos);
}

TEST_F(Workflow, DetectorMetricsCarryConfusionMatrix) {
    const auto det = detect::load_detector((*models_ / kDetectorModelFile).string());
    EXPECT_EQ(det.cfg.input_size, 64);
    const auto out = scratch("det");
    ASSERT_EQ(run(opts("train-detector", out, *cfg_)).code, kOk);
    const json d = json::parse(slurp(out / "detector_metrics.json"));
    EXPECT_EQ(d["confusion"]["counts"].size(), 4u);
    EXPECT_EQ(d["confusion"]["rows"], "prediction");
    EXPECT_TRUE(d["confusion"]["recall"].contains("duckie"));
    fs::remove_all(out);
}

TEST_F(Workflow, TuneGaWritesTableSchemaAndRepeats) {
    const auto a = scratch("ga_a"), b = scratch("ga_b");
    auto o = opts("tune-ga", a, *cfg_);
    o.data = *data_;
    ASSERT_EQ(run(o).code, kOk);
    o.out = b;
    ASSERT_EQ(run(o).code, kOk);
    const auto ra = csv_rows(a / "candidates.csv"), rb = csv_rows(b / "candidates.csv");
    ASSERT_GE(ra.size(), 2u);
    EXPECT_EQ(slurp(a / "candidates.csv").substr(0, slurp(a / "candidates.csv").find('\n')),
              "size,flows,interp,f1,et_mean_ms,et_var_ms2");
    ASSERT_EQ(ra.size(), rb.size());
    // genome and F1 repeat exactly; the ET columns are host timings
    for (std::size_t i = 0; i < ra.size(); ++i)
        for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(ra[i][c], rb[i][c]);
    const json log = json::parse(slurp(a / "ga_log.json"));
    double best = 0;
    for (std::size_t i = 1; i < ra.size(); ++i) best = std::max(best, std::stod(ra[i][3]));
    EXPECT_DOUBLE_EQ(std::round(log["best_f1"].get<double>() * 1e4) / 1e4, best);
    EXPECT_TRUE(log["best_genome"].contains("flows"));
    EXPECT_EQ(log["history"].size(), 2u);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_F(Workflow, RunDemoWritesTracesOutcomesAndRepeats) {
    const auto a = scratch("demo_a"), b = scratch("demo_b");
    auto o = opts("run-demo", a, *cfg_);
    o.models = *models_;
    o.clock = "virtual";
    const auto r = run(o);
    ASSERT_EQ(r.code, kOk) << r.err;
    EXPECT_NE(r.out.find("stopped="), std::string::npos);
    o.out = b;
    ASSERT_EQ(run(o).code, kOk);
    EXPECT_EQ(slurp(a / "runs" / "0_snow" / "traces.csv"), slurp(b / "runs" / "0_snow" / "traces.csv"));
    EXPECT_EQ(slurp(a / "runs" / "1_clean" / "traces.csv"), slurp(b / "runs" / "1_clean" / "traces.csv"));
    const json outcome = json::parse(slurp(a / "runs" / "0_snow" / "outcome.json"));
    for (const char* k : {"stopped", "stop_frame", "stop_time_ms", "drops", "collision", "distance_m"})
        EXPECT_TRUE(outcome.contains(k)) << k;
    EXPECT_EQ(csv_rows(a / "histograms.csv").front().front(), "panel");

    const auto rep = scratch("report");
    auto ro = opts("report", rep);
    ro.data = a;
    const auto rr = run(ro);
    ASSERT_EQ(rr.code, kOk) << rr.err;
    EXPECT_EQ(slurp(rep / "histograms.csv"), slurp(a / "histograms.csv"));
    EXPECT_NE(rr.out.find("lane_follow"), std::string::npos);
    for (const auto& d : {a, b, rep}) fs::remove_all(d);
}

TEST(Report, EmptyDirectoryIsInputError) {
    const auto in = scratch("empty_in");
    fs::create_directories(in);
    auto o = opts("report", scratch("empty_out"));
    o.data = in;
    EXPECT_EQ(run(o).code, kInputError);
    fs::remove_all(in);
}

// ---------------------------------------------------------------- judging demo runs

TEST(RunPasses, SnowNeedsATimelyStopOnSnowyWindows) {
    DemoRun d;
    d.scenario.name = "snow";
    auto& o = d.result.outcome;
    EXPECT_FALSE(run_passes(d));
    o.stopped = true;
    o.first_ood_frame = 150;
    o.stop_frame = 160;
    o.stop_ms = 5400;
    o.stop_latency_ms = 400;
    EXPECT_TRUE(run_passes(d));
    o.stop_latency_ms = 801;
    EXPECT_FALSE(run_passes(d));
    o.stop_latency_ms = 400;
    o.left_road_ms = 5300;
    EXPECT_FALSE(run_passes(d));
    o.left_road_ms.reset();
    o.stop_frame = 149;  // latched by windows that had not seen snow yet
    EXPECT_FALSE(run_passes(d));
}

TEST(RunPasses, CleanMustNotStop) {
    DemoRun d;
    d.scenario.name = "clean";
    EXPECT_TRUE(run_passes(d));
    d.result.outcome.stopped = true;
    EXPECT_FALSE(run_passes(d));
}
