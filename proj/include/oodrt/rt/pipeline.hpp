#pragma once

// The full robot loop: a simulated camera feeds lane following, object
// detection and the OOD monitor through latest-value mailboxes; OOD verdicts
// drive a latched e-stop that zeroes the wheel commands. Runs either in
// virtual time (execution times drawn from per-task models, deterministic)
// or against the wall clock with real threads.

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <thread>

#include <json.hpp>

#include "oodrt/detect/report.hpp"
#include "oodrt/lane/follower.hpp"
#include "oodrt/rt/estop.hpp"
#include "oodrt/rt/mailbox.hpp"
#include "oodrt/rt/scheduler.hpp"
#include "oodrt/sim/dataset.hpp"
#include "oodrt/vae/eval.hpp"

namespace oodrt::rt {

struct FramePacket {
    std::size_t frame_id = 0;
    double release_ms = 0;
    std::shared_ptr<const RgbFrame> rgb;
    std::shared_ptr<const GrayFrame> gray, prev_gray;  // prev_gray is null for the first frame
    bool ood = false;                                  // ground-truth label of this frame
};

// Rolling window over the flows of the frames it is handed. Each packet
// contributes the flow from its predecessor in the camera stream, so flows
// are always between consecutive frames even when packets were dropped.
class OodMonitor {
public:
    explicit OodMonitor(const vae::OodDetector& d, flow::FarnebackParams fp = {}) : d_(d), fp_(fp) {}

    std::optional<vae::OodVerdict> push(const GrayFrame& prev, const GrayFrame& cur) {
        flows_.push_back(flow::farneback_flow(prev, cur, fp_));
        if (flows_.size() > static_cast<std::size_t>(d_.preproc.flows)) flows_.erase(flows_.begin());
        if (flows_.size() < static_cast<std::size_t>(d_.preproc.flows)) return std::nullopt;
        return d_.judge(flow::build_stack(flows_, d_.preproc), true);
    }

private:
    const vae::OodDetector& d_;
    flow::FarnebackParams fp_;
    std::vector<flow::FlowField> flows_;
};

// Robot, snow and bookkeeping of the simulated world. Time in ms.
class WorldSim {
public:
    WorldSim(const sim::Renderer& r, sim::RobotState start, sim::SnowConfig snow, std::uint64_t snow_seed)
        : r_(r), state_(start), snow_(snow), snow_seed_(snow_seed) {
        snow_.validate();
    }

    // Integrates the current command in steps of at most 5 ms.
    void advance_to(double t_ms) {
        while (t_ms_ < t_ms) {
            const double dt = std::min(5.0, t_ms - t_ms_);
            state_ = sim::step_kinematics(state_, cmd_, dt / 1000.0);
            distance_m_ += std::abs(cmd_.v) * dt / 1000.0;
            t_ms_ += dt;
            check();
        }
    }

    FramePacket capture(std::size_t frame_id, double release_ms, std::shared_ptr<const GrayFrame> prev) {
        RgbFrame f = r_.render(state_).frame;
        const bool ood = sim::inject_snow(f, snow_, snow_seed_, static_cast<int>(frame_id));
        auto gray = std::make_shared<const GrayFrame>(to_gray(f));
        return {frame_id, release_ms, std::make_shared<const RgbFrame>(std::move(f)), std::move(gray), std::move(prev), ood};
    }

    void command(sim::WheelCmd c) { cmd_ = c; }
    sim::WheelCmd current_command() const { return cmd_; }
    const sim::RobotState& state() const { return state_; }
    double distance_m() const { return distance_m_; }
    std::optional<double> left_road_ms() const { return left_road_ms_; }
    std::optional<double> collision_ms() const { return collision_ms_; }

    static constexpr double kRobotRadius = 0.08;

private:
    void check() {
        if (!left_road_ms_ && !sim::true_pose(r_.world(), state_).on_road) left_road_ms_ = t_ms_;
        if (collision_ms_) return;
        for (const auto& o : r_.world().objects)
            if (std::hypot(o.x - state_.x, o.y - state_.y) < kRobotRadius + o.width / 2) collision_ms_ = t_ms_;
    }

    const sim::Renderer& r_;
    sim::RobotState state_;
    sim::SnowConfig snow_;
    std::uint64_t snow_seed_;
    sim::WheelCmd cmd_;
    double t_ms_ = 0, distance_m_ = 0;
    std::optional<double> left_road_ms_, collision_ms_;
};

struct DemoModels {
    vae::OodDetector ood;
    detect::QuantizedDetector detector;
};

struct DemoScenario {
    std::string name = "clean";
    double start_s = 0;  // arc length of the start pose
    sim::SnowConfig snow;  // inactive unless stop_frame > start_frame
    std::uint64_t seed = 1;
};

// Snow (if any) starts at `onset_s` and lasts to the end of the run.
inline DemoScenario make_scenario(bool snow, double track_length, const PipelineConfig& cfg, std::uint64_t seed,
                                  double onset_s = 5.0) {
    Rng rng(derive_seed(seed, "scenario"));
    DemoScenario s;
    s.name = snow ? "snow" : "clean";
    s.seed = seed;
    s.start_s = uniform(rng, 0.0, track_length);
    const double density = uniform(rng, 0.01, 0.05);
    if (snow) {
        s.snow.start_frame = static_cast<int>(std::llround(onset_s * cfg.fps));
        s.snow.stop_frame = static_cast<int>(cfg.frames()) + 1;
        s.snow.density = density;
    }
    return s;
}

// Virtual-clock execution-time models of the three tasks.
struct TaskEts {
    EtModel lane = EtModel::gaussian(25, 5);
    EtModel object = EtModel::gaussian(60, 15);
    EtModel ood = EtModel::gaussian(30, 8);
};

struct DemoConfig {
    PipelineConfig pipeline;
    std::vector<TaskSpec> tasks;  // empty: default_tasks(fps)
    TaskEts et;
    std::string detections_csv;  // optional stream of object detections
};

struct Actuation {
    double t_ms = 0;
    sim::WheelCmd cmd;
};

struct Outcome {
    std::string scenario;
    std::string clock;
    std::size_t frames = 0;
    bool stopped = false;
    std::optional<std::size_t> stop_frame;
    std::optional<double> stop_ms;
    std::optional<std::size_t> first_ood_frame;
    std::optional<double> first_ood_release_ms, stop_latency_ms;
    std::map<std::string, std::size_t> drops;
    bool collision = false, left_road = false;
    std::optional<double> left_road_ms;
    double distance_m = 0;
    std::size_t ood_verdicts = 0, ood_positives = 0;
    double max_score_ratio = 0;  // highest OOD score over threshold
};

inline nlohmann::json to_json(const Outcome& o) {
    const auto opt = [](const auto& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    return {{"scenario", o.scenario},
            {"clock", o.clock},
            {"frames", o.frames},
            {"stopped", o.stopped},
            {"stop_frame", opt(o.stop_frame)},
            {"stop_time_ms", opt(o.stop_ms)},
            {"first_ood_frame", opt(o.first_ood_frame)},
            {"first_ood_release_ms", opt(o.first_ood_release_ms)},
            {"stop_latency_ms", opt(o.stop_latency_ms)},
            {"drops", o.drops},
            {"collision", o.collision},
            {"left_road", o.left_road},
            {"left_road_ms", opt(o.left_road_ms)},
            {"distance_m", o.distance_m},
            {"ood_verdicts", o.ood_verdicts},
            {"ood_positives", o.ood_positives},
            {"max_score_ratio", o.max_score_ratio}};
}

struct DemoResult {
    std::vector<TraceRecord> traces;
    Outcome outcome;
    std::vector<Actuation> actuation;  // every wheel command applied, in time order
};

namespace detail {

// Task bodies and their effects on the world. compute() may run
// concurrently for different tasks; apply() is serialized by the caller.
class DemoTasks {
public:
    struct Effect {
        std::optional<sim::WheelCmd> cmd;
        std::optional<vae::OodVerdict> verdict;
    };

    DemoTasks(const sim::Renderer& r, const DemoModels& m, const DemoConfig& cfg)
        : follower_(r.camera()), monitor_(m.ood), det_(m.detector), estop_(cfg.pipeline.estop_m), period_ms_(cfg.pipeline.period_ms()) {
        if (!cfg.detections_csv.empty()) writer_.emplace(cfg.detections_csv);
    }

    Effect compute(const std::string& task, const FramePacket& p) {
        Effect e;
        if (task == kLaneTask) {
            const double dt = last_lane_ms_ ? (p.release_ms - *last_lane_ms_) / 1000.0 : period_ms_ / 1000.0;
            last_lane_ms_ = p.release_ms;
            e.cmd = follower_.step(*p.rgb, dt).cmd;
        } else if (task == kObjectTask) {
            const auto dets = det_.detect(*p.rgb);
            if (writer_) writer_->frame(p.frame_id, dets);
        } else if (task == kOodTask) {
            if (p.prev_gray) e.verdict = monitor_.push(*p.prev_gray, *p.gray);
        } else {
            throw config_error("unknown task '" + task + "'");
        }
        return e;
    }

    void apply(const Effect& e, std::size_t frame_id, double t_ms, WorldSim& world, DemoResult& out) {
        world.advance_to(t_ms);
        if (e.verdict) {
            ++out.outcome.ood_verdicts;
            out.outcome.ood_positives += e.verdict->is_ood;
            if (e.verdict->threshold > 0)
                out.outcome.max_score_ratio = std::max(out.outcome.max_score_ratio, e.verdict->score / e.verdict->threshold);
            if (estop_.update(e.verdict->is_ood, frame_id)) {
                out.outcome.stopped = true;
                out.outcome.stop_frame = frame_id;
                out.outcome.stop_ms = t_ms;
                world.command({});
                out.actuation.push_back({t_ms, {}});
            }
        }
        if (e.cmd) {
            const sim::WheelCmd c = estop_.gate(*e.cmd);
            world.command(c);
            out.actuation.push_back({t_ms, c});
        }
    }

private:
    lane::LaneFollower follower_;
    OodMonitor monitor_;
    const detect::QuantizedDetector& det_;
    EStop estop_;
    double period_ms_;
    std::optional<double> last_lane_ms_;
    std::optional<detect::DetectionWriter> writer_;
};

inline void finish_outcome(const DemoScenario& sc, const PipelineConfig& pc, const WorldSim& world,
                           const std::vector<std::string>& names, const std::vector<std::size_t>& drops,
                           std::optional<std::size_t> first_ood, DemoResult& out) {
    Outcome& o = out.outcome;
    o.scenario = sc.name;
    o.clock = to_string(pc.clock);
    o.frames = pc.frames();
    for (std::size_t i = 0; i < names.size(); ++i) o.drops[names[i]] = drops[i];
    o.collision = world.collision_ms().has_value();
    o.left_road_ms = world.left_road_ms();
    o.left_road = o.left_road_ms.has_value();
    o.distance_m = world.distance_m();
    o.first_ood_frame = first_ood;
    if (first_ood) o.first_ood_release_ms = pc.release_ms(*first_ood);
    if (o.stop_ms && o.first_ood_release_ms) o.stop_latency_ms = *o.stop_ms - *o.first_ood_release_ms;
}

}  // namespace detail

inline std::vector<SchedTask> demo_tasks(const DemoConfig& cfg) {
    const auto specs = cfg.tasks.empty() ? default_tasks(cfg.pipeline.fps) : cfg.tasks;
    std::vector<SchedTask> out;
    for (const auto& s : specs) {
        const EtModel& et = s.name == kLaneTask ? cfg.et.lane : s.name == kObjectTask ? cfg.et.object : cfg.et.ood;
        out.push_back({s, et});
    }
    return out;
}

inline DemoResult run_pipeline(const sim::Renderer& r, const DemoModels& models, const DemoScenario& sc,
                               const DemoConfig& cfg) {
    const PipelineConfig& pc = cfg.pipeline;
    pc.validate();
    const auto tasks = demo_tasks(cfg);
    std::vector<std::string> names;
    for (const auto& t : tasks) {
        t.spec.validate();
        names.push_back(t.spec.name);
    }
    WorldSim world(r, sim::start_state(r.world(), sc.start_s), sc.snow, derive_seed(sc.seed, "snow"));
    detail::DemoTasks bodies(r, models, cfg);
    DemoResult out;
    std::optional<std::size_t> first_ood;
    std::shared_ptr<const GrayFrame> prev;

    if (pc.clock == ClockMode::virtual_time) {
        std::map<std::size_t, FramePacket> frames;
        std::vector<std::optional<std::size_t>> last_done(tasks.size());
        const auto on_release = [&](std::size_t f, double t) {
            world.advance_to(t);
            FramePacket p = world.capture(f, t, prev);
            prev = p.gray;
            if (p.ood && !first_ood) first_ood = f;
            frames.emplace(f, std::move(p));
        };
        const auto on_finish = [&](std::size_t i, const TraceRecord& rec) {
            const auto e = bodies.compute(rec.task, frames.at(rec.frame_id));
            bodies.apply(e, rec.frame_id, rec.finish_ms, world, out);
            // a latest-value consumer never goes back, so frames older than
            // every task's last finished one are dead
            last_done[i] = rec.frame_id;
            std::size_t keep = rec.frame_id;
            for (const auto& d : last_done) keep = d ? std::min(keep, *d) : 0;
            frames.erase(frames.begin(), frames.lower_bound(keep));
        };
        const auto res = simulate_schedule(tasks, pc, QueuePolicy::latest_value, on_release, on_finish);
        out.traces = res.traces;
        world.advance_to(pc.release_ms(pc.frames()));
        detail::finish_outcome(sc, pc, world, names, res.drops, first_ood, out);
        return out;
    }

    // wall clock: one thread per task, a counting semaphore as the worker pool
    using clock = std::chrono::steady_clock;
    std::vector<std::unique_ptr<LatestMailbox<FramePacket>>> boxes;
    for (std::size_t i = 0; i < tasks.size(); ++i) boxes.push_back(std::make_unique<LatestMailbox<FramePacket>>());
    std::counting_semaphore<1024> pool(static_cast<std::ptrdiff_t>(std::min<std::size_t>(pc.workers, 1024)));
    std::mutex mu;  // world, outcome, traces
    std::atomic<bool> abort{false};
    std::optional<pipeline_error> failure;
    const auto t0 = clock::now();
    const auto now_ms = [&] { return std::chrono::duration<double, std::milli>(clock::now() - t0).count(); };
    const auto close_all = [&] {
        for (auto& b : boxes) b->close();
    };

    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < tasks.size(); ++i)
        threads.emplace_back([&, i] {
            while (auto p = boxes[i]->wait_take()) {
                if (abort) break;
                try {
                    pool.acquire();
                    const double start = now_ms();
                    struct Permit {
                        std::counting_semaphore<1024>& s;
                        ~Permit() { s.release(); }
                    };
                    std::optional<Permit> permit(std::in_place, pool);
                    const auto e = bodies.compute(tasks[i].spec.name, *p);
                    const double finish = now_ms();
                    permit.reset();
                    std::lock_guard lk(mu);
                    bodies.apply(e, p->frame_id, finish, world, out);
                    out.traces.push_back(make_record(tasks[i].spec.name, p->frame_id, p->release_ms, std::max(start, p->release_ms),
                                                     std::max(finish, start), tasks[i].spec.deadline_ms));
                } catch (const std::exception& ex) {
                    std::lock_guard lk(mu);
                    if (!failure) failure.emplace(tasks[i].spec.name, ex.what());
                    abort = true;
                    close_all();
                    return;
                }
            }
        });
    for (std::size_t f = 0; f < pc.frames() && !abort; ++f) {
        std::this_thread::sleep_until(t0 + std::chrono::duration<double, std::milli>(pc.release_ms(f)));
        FramePacket p;
        {
            std::lock_guard lk(mu);
            world.advance_to(pc.release_ms(f));
            p = world.capture(f, pc.release_ms(f), prev);
        }
        prev = p.gray;
        if (p.ood && !first_ood) first_ood = f;
        for (std::size_t i = 0; i < tasks.size(); ++i)
            if (f % static_cast<std::size_t>(tasks[i].spec.every) == 0) boxes[i]->put(p);
    }
    close_all();
    for (auto& t : threads) t.join();
    if (failure) throw *failure;
    std::vector<std::size_t> drops;
    for (auto& b : boxes) drops.push_back(b->drops());
    std::stable_sort(out.traces.begin(), out.traces.end(),
                     [](const TraceRecord& a, const TraceRecord& b) { return a.finish_ms < b.finish_ms; });
    world.advance_to(std::max(now_ms(), pc.release_ms(pc.frames())));
    detail::finish_outcome(sc, pc, world, names, drops, first_ood, out);
    return out;
}

}  // namespace oodrt::rt
