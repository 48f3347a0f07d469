#pragma once

// Driving sequences, snow schedules and on-disk datasets (PPM frames, JSON
// manifest, CSV ground-truth boxes).

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "oodrt/core/rng.hpp"
#include "oodrt/sim/snow.hpp"
#include "oodrt/sim/world.hpp"

namespace oodrt::sim {

inline constexpr const char* kGeneratorVersion = "oodrt-sim 1.0";
inline constexpr double kDefaultFps = 30.0;

// Ground-truth lane pose of the robot relative to its lane centre.
struct TruePose {
    double d = 0, phi = 0;
    bool on_road = false;
};

inline TruePose true_pose(const WorldConfig& w, const RobotState& s) {
    const auto tc = w.track.locate({s.x, s.y});
    if (!tc) return {};
    return {tc->lateral - w.markings.lane_center, wrap_angle(s.theta - tc->heading),
            std::abs(tc->lateral) <= w.markings.road_half_width};
}

// Robot placed on the lane centre at arc length s, aligned with the road.
inline RobotState start_state(const WorldConfig& w, double s, double d = 0.0, double phi = 0.0) {
    const Pose2 p = w.track.pose_at(s, w.markings.lane_center + d);
    return {p.x, p.y, wrap_angle(p.theta + phi), {}};
}

// Privileged lane keeping used to drive data collection: the same
// proportional law as the lane follower but fed with true pose, plus an
// Ornstein-Uhlenbeck yaw-rate disturbance so the data covers some wander.
struct DrivePolicy {
    double v = 0.2;
    double k_d = 6.0, k_phi = 2.0;
    double noise_std = 0.3;  // rad/s, stationary std of the disturbance
    double noise_tau = 1.0;  // s
    double omega_max = 3.0;
};

inline std::vector<RobotState> simulate_drive(const WorldConfig& w, RobotState s, std::size_t n, double fps,
                                              const DrivePolicy& pol, std::uint64_t seed) {
    if (!(fps > 0)) throw argument_error("simulate_drive: fps must be positive");
    Rng rng(seed);
    const double dt = 1.0 / fps;
    const double decay = std::exp(-dt / pol.noise_tau);
    const double kick = pol.noise_std * std::sqrt(1.0 - decay * decay);
    double noise = 0.0;
    std::vector<RobotState> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(s);
        const TruePose tp = true_pose(w, s);
        noise = noise * decay + kick * normal(rng);
        const double om = std::clamp(-pol.k_d * tp.d - pol.k_phi * tp.phi + noise, -pol.omega_max, pol.omega_max);
        s = step_kinematics(s, {pol.v, om}, dt);
    }
    return out;
}

// Roadside objects scattered along the track, outside the road surface.
inline std::vector<WorldObject> roadside_objects(const Track& track, const RoadMarkings& m, std::size_t count,
                                                 std::uint64_t seed) {
    Rng rng(seed);
    std::vector<WorldObject> objs;
    for (std::size_t i = 0; i < count; ++i) {
        const double s = uniform(rng, 0.0, track.length());
        const double side = uniform01(rng) < 0.5 ? -1.0 : 1.0;
        const double lat = side * uniform(rng, m.road_half_width + 0.06, m.road_half_width + 0.25);
        const Pose2 p = track.pose_at(s, lat);
        const auto cls = static_cast<ObjectClass>(uniform_int(rng, 0, kNumClasses - 1));
        objs.push_back(WorldObject::make(cls, p.x, p.y));
    }
    return objs;
}

inline WorldConfig default_world(std::uint64_t seed) {
    WorldConfig w;
    w.objects = roadside_objects(w.track, w.markings, 24, derive_seed(seed, "objects"));
    return w;
}

struct VideoSpec {
    std::string name;
    std::size_t frames = 300;
    double start_s = 0.0;
    SnowConfig snow;
};

// A rendered sequence kept in memory.
struct Sequence {
    std::string name;
    double fps = kDefaultFps;
    std::vector<RobotState> states;
    std::vector<RgbFrame> frames;
    std::vector<bool> ood;  // per-frame label
    std::vector<std::vector<PixelBox>> boxes;

    double timestamp_ms(std::size_t i) const { return 1000.0 * static_cast<double>(i) / fps; }
    std::size_t size() const { return frames.size(); }
};

inline Sequence render_sequence(const Renderer& r, const VideoSpec& v, const DrivePolicy& pol, double fps,
                                std::uint64_t seed) {
    v.snow.validate();
    Sequence seq;
    seq.name = v.name;
    seq.fps = fps;
    seq.states = simulate_drive(r.world(), start_state(r.world(), v.start_s), v.frames, fps, pol, derive_seed(seed, "drive"));
    const std::uint64_t snow_seed = derive_seed(seed, "snow");
    for (std::size_t i = 0; i < v.frames; ++i) {
        RenderResult rr = r.render(seq.states[i]);
        seq.ood.push_back(inject_snow(rr.frame, v.snow, snow_seed, static_cast<int>(i)));
        seq.frames.push_back(std::move(rr.frame));
        seq.boxes.push_back(std::move(rr.boxes));
    }
    return seq;
}

// Eight-video style test schedule: each video has a clean lead-in, one snow
// window (some with density ramps) and a clean tail.
inline std::vector<VideoSpec> default_test_videos(std::size_t count, std::size_t frames, double track_length,
                                                  std::uint64_t seed) {
    if (frames < 60) throw argument_error("test videos need at least 60 frames");
    Rng rng(seed);
    std::vector<VideoSpec> out;
    for (std::size_t i = 0; i < count; ++i) {
        VideoSpec v;
        v.name = "test_" + std::to_string(i);
        v.frames = frames;
        v.start_s = uniform(rng, 0.0, track_length);
        const int n = static_cast<int>(frames);
        const int len = uniform_int(rng, n / 4, n / 2);
        v.snow.start_frame = uniform_int(rng, n / 6, n - len - n / 6);
        v.snow.stop_frame = v.snow.start_frame + len;
        v.snow.density = uniform(rng, 0.01, 0.05);
        if (i % 3 == 2) {  // ramp from a light dusting
            v.snow.density_end = v.snow.density;
            v.snow.density = 0.003;
        }
        out.push_back(v);
    }
    return out;
}

// The full OOD data suite: one long ID drive for training, a shorter ID
// drive elsewhere on the track for threshold calibration, and the labelled
// test videos. Every video gets its own named sub-seed.
struct SuiteConfig {
    std::size_t train_frames = 2048;
    std::size_t val_frames = 600;
    std::size_t test_videos = 8;
    std::size_t test_frames = 300;
};

struct SuiteVideo {
    VideoSpec spec;
    std::uint64_t seed = 0;
};

struct Suite {
    SuiteVideo train, val;
    std::vector<SuiteVideo> tests;
};

inline Suite default_suite(double track_length, const SuiteConfig& c, std::uint64_t seed) {
    if (c.train_frames < 2 || c.val_frames < 2) throw argument_error("suite: training and validation need >= 2 frames");
    Suite s;
    s.train = {{"train", c.train_frames, 0.0, {}}, derive_seed(seed, "train")};
    s.val = {{"val", c.val_frames, 0.37 * track_length, {}}, derive_seed(seed, "val")};
    const auto specs = default_test_videos(c.test_videos, c.test_frames, track_length, derive_seed(seed, "test-schedule"));
    for (const auto& v : specs) s.tests.push_back({v, derive_seed(seed, v.name)});
    return s;
}

// ---------------------------------------------------------------------------
// On-disk layout: <dir>/<name>/frame_00000.ppm, manifest.json, boxes.csv

struct FrameRecord {
    std::string path;  // relative to the manifest directory
    double timestamp_ms = 0;
    bool ood = false;
};

struct DatasetManifest {
    std::string version = kGeneratorVersion;
    std::uint64_t seed = 0;
    CameraModel camera;
    std::vector<FrameRecord> frames;

    void validate() const {
        for (std::size_t i = 1; i < frames.size(); ++i)
            if (!(frames[i].timestamp_ms > frames[i - 1].timestamp_ms))
                throw argument_error("manifest timestamps must be strictly increasing");
    }
};

inline nlohmann::json to_json(const DatasetManifest& m) {
    nlohmann::json j;
    j["version"] = m.version;
    j["seed"] = m.seed;
    const auto& c = m.camera;
    const Mat3 h = c.ground_homography();
    j["camera"] = {{"width", c.width},   {"height", c.height},        {"focal_px", c.focal_px},
                   {"cx", c.cx()},       {"cy", c.cy()},              {"mount_height", c.mount_height},
                   {"tilt_rad", c.tilt}, {"ground_homography", h.m}};
    auto& fr = j["frames"] = nlohmann::json::array();
    for (const auto& f : m.frames) fr.push_back({{"path", f.path}, {"timestamp_ms", f.timestamp_ms}, {"label", f.ood ? "OOD" : "ID"}});
    return j;
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
    DatasetManifest m;
    try {
        m.version = j.at("version").get<std::string>();
        m.seed = j.at("seed").get<std::uint64_t>();
        const auto& c = j.at("camera");
        m.camera.width = c.at("width").get<std::size_t>();
        m.camera.height = c.at("height").get<std::size_t>();
        m.camera.focal_px = c.at("focal_px").get<double>();
        m.camera.mount_height = c.at("mount_height").get<double>();
        m.camera.tilt = c.at("tilt_rad").get<double>();
        for (const auto& f : j.at("frames")) {
            const auto label = f.at("label").get<std::string>();
            if (label != "ID" && label != "OOD") throw argument_error("bad frame label '" + label + "'");
            m.frames.push_back({f.at("path").get<std::string>(), f.at("timestamp_ms").get<double>(), label == "OOD"});
        }
    } catch (const nlohmann::json::exception& e) {
        throw argument_error(std::string("malformed manifest: ") + e.what());
    }
    m.validate();
    return m;
}

inline std::string frame_filename(std::size_t i) {
    std::ostringstream os;
    os << "frame_" << std::setw(5) << std::setfill('0') << i << ".ppm";
    return os.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw io_error("cannot write " + p.string());
    out << text;
    if (!out) throw io_error("write failed: " + p.string());
}

inline std::filesystem::path write_sequence(const std::filesystem::path& dir, const Sequence& seq,
                                            const CameraModel& cam, std::uint64_t seed) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw io_error("cannot create " + dir.string() + ": " + ec.message());
    DatasetManifest m;
    m.seed = seed;
    m.camera = cam;
    std::ostringstream boxes;
    boxes << "frame_id,class,x0,y0,x1,y1\n";
    for (std::size_t i = 0; i < seq.size(); ++i) {
        const std::string name = frame_filename(i);
        write_ppm((dir / name).string(), seq.frames[i]);
        m.frames.push_back({name, seq.timestamp_ms(i), seq.ood[i]});
        for (const auto& b : seq.boxes[i])
            boxes << i << ',' << to_string(b.cls) << ',' << b.x0 << ',' << b.y0 << ',' << b.x1 << ',' << b.y1 << '\n';
    }
    write_text(dir / "manifest.json", to_json(m).dump(1) + "\n");
    write_text(dir / "boxes.csv", boxes.str());
    return dir / "manifest.json";
}

inline DatasetManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open manifest " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw argument_error("malformed manifest " + path.string() + ": " + e.what());
    }
    return manifest_from_json(j);
}

// Loads the frames of a manifest as grayscale plus labels.
struct LoadedVideo {
    std::vector<GrayFrame> frames;
    std::vector<bool> ood;
};

inline LoadedVideo load_video(const std::filesystem::path& manifest_path) {
    const DatasetManifest m = read_manifest(manifest_path);
    LoadedVideo v;
    for (const auto& f : m.frames) {
        v.frames.push_back(to_gray(read_ppm((manifest_path.parent_path() / f.path).string())));
        v.ood.push_back(f.ood);
    }
    return v;
}

}  // namespace oodrt::sim
