#pragma once

// Run configuration for the command-line tools: one JSON document with the
// sections world, preproc, vae, detector, ga and pipeline. Every field is
// optional; unknown keys are errors so a typo cannot silently fall back to a
// default.

#include <fstream>
#include <set>

#include <json.hpp>

#include "oodrt/detect/model.hpp"
#include "oodrt/ga/ga.hpp"
#include "oodrt/rt/pipeline.hpp"
#include "oodrt/vae/benchmark.hpp"

namespace oodrt::cli {

using nlohmann::json;

inline constexpr const char* kToolVersion = "oodrt 1.0";

// Data generation and the simulated world.
struct WorldSection {
    std::uint64_t world_seed = 1;  // roadside props and textures; shared by data and demo
    sim::SuiteConfig suite;
    double fps = sim::kDefaultFps;
};

struct VaeSection {
    vae::OodTrainConfig train;
};

struct DetectorSection {
    detect::DetectorConfig model;
    detect::DetTrainConfig train;
    std::size_t train_scenes = 1000, test_scenes = 300;
    std::size_t timed_runs = 100;
    std::vector<int> sweep_sizes{detect::kInputSizes.begin(), detect::kInputSizes.end()};
};

struct GaSection {
    ga::GaConfig ga;
    ga::FitnessConfig fitness;
};

struct PipelineSection {
    rt::DemoConfig demo = [] {
        rt::DemoConfig d;
        d.pipeline.estop_m = 10;  // see the README on single-window false positives
        return d;
    }();
    std::size_t runs = 20;       // alternating snow / clean
    double snow_onset_s = 5.0;
};

struct RunConfig {
    WorldSection world;
    flow::PreprocConfig preproc;
    VaeSection vae;
    DetectorSection detector;
    GaSection ga;
    PipelineSection pipeline;

    // One root seed for every random source of a command; each module fans
    // it out further by name.
    void apply_seed(std::uint64_t seed) {
        vae.train.vae.seed = seed;
        detector.train.seed = seed;
        ga.ga.seed = seed;
        ga.fitness.train.vae.seed = seed;
        pipeline.demo.pipeline.seed = seed;
    }

    void validate() const {
        preproc.validate();
        detector.model.validate();
        ga.ga.validate();
        pipeline.demo.pipeline.validate();
        vae::VaeConfig v = vae.train.vae;
        v.input = preproc.stack_dims();
        v.validate();
        if (!(world.fps > 0)) throw config_error("world.fps must be positive");
        if (!(vae.train.quantile > 0 && vae.train.quantile < 1)) throw config_error("vae.quantile must be in (0, 1)");
        if (vae.train.train_stride < 1) throw config_error("vae.train_stride must be >= 1");
        if (detector.train.epochs < 1 || detector.train.batch < 1) throw config_error("detector epochs and batch must be >= 1");
        if (detector.train_scenes < 1 || detector.test_scenes < 1) throw config_error("detector scene counts must be >= 1");
        if (detector.timed_runs < 2) throw config_error("detector.timed_runs must be >= 2");
        for (int s : detector.sweep_sizes) detect::DetectorConfig{s}.validate();
        if (ga.fitness.test_stride < 1 || ga.fitness.et_runs < 2) throw config_error("ga test_stride >= 1 and et_runs >= 2 required");
        if (pipeline.runs < 1) throw config_error("pipeline.runs must be >= 1");
        if (!(pipeline.snow_onset_s >= 0)) throw config_error("pipeline.snow_onset_s must be >= 0");
    }
};

namespace detail {

// Reads keys out of one JSON object and rejects whatever is left over.
class Reader {
public:
    Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw config_error(where_ + ": expected a JSON object");
    }

    template <class T>
    void get(const char* key, T& out) {
        used_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw config_error(where_ + "." + key + ": wrong type (" + j_.at(key).dump() + ")");
        }
    }
    template <class T, class Fn>
    void get_as(const char* key, Fn&& convert) {
        used_.insert(key);
        if (!j_.contains(key)) return;
        T raw{};
        try {
            raw = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw config_error(where_ + "." + key + ": wrong type (" + j_.at(key).dump() + ")");
        }
        convert(raw);
    }
    std::optional<Reader> section(const char* key) {
        used_.insert(key);
        if (!j_.contains(key)) return std::nullopt;
        return Reader(j_.at(key), where_ + "." + key);
    }
    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!used_.contains(k)) throw config_error("unknown config key '" + where_ + "." + k + "'");
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> used_;
};

inline rt::EtModel read_et(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw config_error(where + ": expected [mean_ms, sd_ms]");
    return rt::EtModel::gaussian(j[0].get<double>(), j[1].get<double>());
}

inline json et_json(const rt::EtModel& e) { return json::array({e.mean, e.sd}); }

}  // namespace detail

inline RunConfig parse_config(const json& doc) {
    RunConfig c;
    detail::Reader root(doc, "config");
    if (auto s = root.section("world")) {
        s->get("seed", c.world.world_seed);
        s->get("train_frames", c.world.suite.train_frames);
        s->get("val_frames", c.world.suite.val_frames);
        s->get("test_videos", c.world.suite.test_videos);
        s->get("test_frames", c.world.suite.test_frames);
        s->get("fps", c.world.fps);
        s->finish();
    }
    if (auto s = root.section("preproc")) {
        s->get_as<std::string>("size", [&](const std::string& v) { c.preproc.size = flow::parse_size(v); });
        s->get("flows", c.preproc.flows);
        s->get_as<std::string>("interp", [&](const std::string& v) { c.preproc.interp = flow::parse_interp(v); });
        s->get("vmax", c.preproc.vmax);
        s->finish();
    }
    if (auto s = root.section("vae")) {
        auto& v = c.vae.train.vae;
        s->get("latent", v.latent);
        s->get("hidden", v.hidden);
        s->get("ch1", v.ch1);
        s->get("ch2", v.ch2);
        s->get("beta", v.beta);
        s->get("epochs", v.epochs);
        s->get("batch", v.batch);
        s->get("learning_rate", v.learning_rate);
        s->get("quantile", c.vae.train.quantile);
        s->get("train_stride", c.vae.train.train_stride);
        s->finish();
    }
    if (auto s = root.section("detector")) {
        auto& d = c.detector;
        s->get("input_size", d.model.input_size);
        s->get("conf_threshold", d.model.conf_threshold);
        s->get("nms_iou", d.model.nms_iou);
        s->get("epochs", d.train.epochs);
        s->get("batch", d.train.batch);
        s->get("learning_rate", d.train.learning_rate);
        s->get("coord_weight", d.train.weights.coord);
        s->get("noobj_weight", d.train.weights.noobj);
        s->get("train_scenes", d.train_scenes);
        s->get("test_scenes", d.test_scenes);
        s->get("timed_runs", d.timed_runs);
        s->get("sweep_sizes", d.sweep_sizes);
        s->finish();
    }
    if (auto s = root.section("ga")) {
        auto& g = c.ga;
        s->get("population", g.ga.population);
        s->get("generations", g.ga.generations);
        s->get("tournament", g.ga.tournament);
        s->get("crossover_rate", g.ga.crossover_rate);
        s->get("mutation_rate", g.ga.mutation_rate);
        s->get("elitism", g.ga.elitism);
        s->get("novelty_retries", g.ga.novelty_retries);
        s->get("vae_epochs", g.fitness.train.vae.epochs);
        s->get("train_stride", g.fitness.train.train_stride);
        s->get("test_stride", g.fitness.test_stride);
        s->get("et_runs", g.fitness.et_runs);
        s->finish();
    }
    if (auto s = root.section("pipeline")) {
        auto& p = c.pipeline.demo.pipeline;
        s->get("workers", p.workers);
        s->get("fps", p.fps);
        s->get("duration_s", p.duration_s);
        s->get("estop_m", p.estop_m);
        s->get_as<std::string>("clock", [&](const std::string& v) { p.clock = rt::parse_clock(v); });
        s->get("max_pending", p.max_pending);
        s->get("runs", c.pipeline.runs);
        s->get("snow_onset_s", c.pipeline.snow_onset_s);
        auto& et = c.pipeline.demo.et;
        s->get_as<json>("lane_et_ms", [&](const json& v) { et.lane = detail::read_et(v, "pipeline.lane_et_ms"); });
        s->get_as<json>("object_et_ms", [&](const json& v) { et.object = detail::read_et(v, "pipeline.object_et_ms"); });
        s->get_as<json>("ood_et_ms", [&](const json& v) { et.ood = detail::read_et(v, "pipeline.ood_et_ms"); });
        s->finish();
    }
    root.finish();
    c.validate();
    return c;
}

inline RunConfig load_config(const std::string& path) {
    if (path.empty()) return parse_config(json::object());
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw config_error("config " + path + " is not valid JSON: " + e.what());
    }
    return parse_config(doc);
}

// The fully resolved configuration; parse_config(to_json(c)) gives c back.
inline json to_json(const RunConfig& c) {
    const auto& v = c.vae.train.vae;
    const auto& d = c.detector;
    const auto& g = c.ga;
    const auto& p = c.pipeline.demo.pipeline;
    const auto& et = c.pipeline.demo.et;
    return {{"world",
             {{"seed", c.world.world_seed},
              {"train_frames", c.world.suite.train_frames},
              {"val_frames", c.world.suite.val_frames},
              {"test_videos", c.world.suite.test_videos},
              {"test_frames", c.world.suite.test_frames},
              {"fps", c.world.fps}}},
            {"preproc",
             {{"size", flow::to_string(c.preproc.size)},
              {"flows", c.preproc.flows},
              {"interp", flow::to_string(c.preproc.interp)},
              {"vmax", c.preproc.vmax}}},
            {"vae",
             {{"latent", v.latent},
              {"hidden", v.hidden},
              {"ch1", v.ch1},
              {"ch2", v.ch2},
              {"beta", v.beta},
              {"epochs", v.epochs},
              {"batch", v.batch},
              {"learning_rate", v.learning_rate},
              {"quantile", c.vae.train.quantile},
              {"train_stride", c.vae.train.train_stride}}},
            {"detector",
             {{"input_size", d.model.input_size},
              {"conf_threshold", d.model.conf_threshold},
              {"nms_iou", d.model.nms_iou},
              {"epochs", d.train.epochs},
              {"batch", d.train.batch},
              {"learning_rate", d.train.learning_rate},
              {"coord_weight", d.train.weights.coord},
              {"noobj_weight", d.train.weights.noobj},
              {"train_scenes", d.train_scenes},
              {"test_scenes", d.test_scenes},
              {"timed_runs", d.timed_runs},
              {"sweep_sizes", d.sweep_sizes}}},
            {"ga",
             {{"population", g.ga.population},
              {"generations", g.ga.generations},
              {"tournament", g.ga.tournament},
              {"crossover_rate", g.ga.crossover_rate},
              {"mutation_rate", g.ga.mutation_rate},
              {"elitism", g.ga.elitism},
              {"novelty_retries", g.ga.novelty_retries},
              {"vae_epochs", g.fitness.train.vae.epochs},
              {"train_stride", g.fitness.train.train_stride},
              {"test_stride", g.fitness.test_stride},
              {"et_runs", g.fitness.et_runs}}},
            {"pipeline",
             {{"workers", p.workers},
              {"fps", p.fps},
              {"duration_s", p.duration_s},
              {"estop_m", p.estop_m},
              {"clock", rt::to_string(p.clock)},
              {"max_pending", p.max_pending},
              {"runs", c.pipeline.runs},
              {"snow_onset_s", c.pipeline.snow_onset_s},
              {"lane_et_ms", detail::et_json(et.lane)},
              {"object_et_ms", detail::et_json(et.object)},
              {"ood_et_ms", detail::et_json(et.ood)}}}};
}

}  // namespace oodrt::cli
