#pragma once

// Worker-pool scheduling in virtual time. Frames are released periodically;
// each task is a sequential consumer (one job in flight) and at most
// `workers` jobs run at once. Among ready tasks the oldest release goes
// first. Execution times come from a seeded per-task model, so runs repeat
// bit for bit.

#include <deque>
#include <functional>
#include <optional>
#include <queue>
#include <tuple>

#include "oodrt/core/rng.hpp"
#include "oodrt/rt/trace.hpp"

namespace oodrt::rt {

// Execution-time model of one task, in ms.
struct EtModel {
    enum class Kind { constant, gaussian, empirical };
    Kind kind = Kind::constant;
    double mean = 10, sd = 0;
    std::vector<double> samples;

    static EtModel fixed(double ms) { return {Kind::constant, ms, 0, {}}; }
    static EtModel gaussian(double mean, double sd) { return {Kind::gaussian, mean, sd, {}}; }
    static EtModel empirical(std::vector<double> s) {
        if (s.empty()) throw config_error("empirical ET model needs samples");
        return {Kind::empirical, 0, 0, std::move(s)};
    }

    void validate() const {
        if (kind == Kind::empirical) {
            for (double v : samples)
                if (!(v > 0)) throw config_error("ET samples must be positive");
        } else if (!(mean > 0) || !(sd >= 0)) {
            throw config_error("ET mean must be positive and sd non-negative");
        }
    }

    // Gaussian draws are floored at a tenth of the mean.
    double sample(Rng& rng) const {
        switch (kind) {
            case Kind::constant: return mean;
            case Kind::gaussian: return std::max(0.1 * mean, mean + sd * normal(rng));
            default: return samples[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(samples.size()) - 1))];
        }
    }
};

enum class ClockMode { wall, virtual_time };

inline std::string to_string(ClockMode c) { return c == ClockMode::wall ? "wall" : "virtual"; }
inline ClockMode parse_clock(const std::string& s) {
    if (s == "wall") return ClockMode::wall;
    if (s == "virtual") return ClockMode::virtual_time;
    throw config_error("clock must be 'wall' or 'virtual', got '" + s + "'");
}

struct PipelineConfig {
    std::size_t workers = 4;
    double fps = 30;
    double duration_s = 10;
    int estop_m = 1;
    ClockMode clock = ClockMode::virtual_time;
    std::uint64_t seed = 1;
    std::size_t max_pending = 100000;  // queued jobs before a virtual run aborts as overloaded

    void validate() const {
        if (workers < 1) throw config_error("pipeline needs at least one worker");
        if (!(fps > 0)) throw config_error("frame rate must be positive");
        if (!(duration_s > 0)) throw config_error("run duration must be positive");
        if (estop_m < 1) throw config_error("e-stop M must be >= 1");
        if (max_pending < 1) throw config_error("max_pending must be >= 1");
    }
    std::size_t frames() const { return static_cast<std::size_t>(std::llround(duration_s * fps)); }
    double period_ms() const { return 1000.0 / fps; }
    double release_ms(std::size_t frame) const { return static_cast<double>(frame) * period_ms(); }
};

struct SchedTask {
    TaskSpec spec;
    EtModel et;
};

// latest_value: one pending job per task, newer releases overwrite it.
// fifo: every release is queued.
enum class QueuePolicy { latest_value, fifo };

struct ScheduleResult {
    std::vector<TraceRecord> traces;  // in finish order
    std::vector<std::size_t> drops;   // per task
};

using ReleaseHook = std::function<void(std::size_t frame, double t_ms)>;
// Called at a job's finish time, in time order; throwing aborts the run.
using FinishHook = std::function<void(std::size_t task, const TraceRecord&)>;

inline ScheduleResult simulate_schedule(const std::vector<SchedTask>& tasks, const PipelineConfig& cfg, QueuePolicy policy,
                                        const ReleaseHook& on_release = {}, const FinishHook& on_finish = {}) {
    cfg.validate();
    if (tasks.empty()) throw config_error("no tasks to schedule");
    for (const auto& t : tasks) {
        t.spec.validate();
        t.et.validate();
    }
    struct Job {
        std::size_t frame = 0;
        double release = 0, start = 0;
    };
    struct Event {
        double t;
        int kind;  // 0 finish, 1 release: a worker freed at t can take a job released at t
        std::uint64_t seq;
        std::size_t index;
        bool operator>(const Event& o) const { return std::tie(t, kind, seq) > std::tie(o.t, o.kind, o.seq); }
    };
    const std::size_t n = tasks.size(), frames = cfg.frames();
    std::vector<std::deque<Job>> pending(n);
    std::vector<std::optional<Job>> running(n);
    std::vector<Rng> rngs;
    for (const auto& t : tasks) rngs.emplace_back(derive_seed(cfg.seed, "et/" + t.spec.name));
    std::priority_queue<Event, std::vector<Event>, std::greater<>> events;
    std::uint64_t seq = 0;
    std::size_t free_workers = cfg.workers, queued = 0;
    ScheduleResult out;
    out.drops.assign(n, 0);
    if (frames > 0) events.push({cfg.release_ms(0), 1, seq++, 0});

    const auto dispatch = [&](double now) {
        while (free_workers > 0) {
            std::size_t pick = n;
            for (std::size_t i = 0; i < n; ++i)
                if (!running[i] && !pending[i].empty() && (pick == n || pending[i].front().release < pending[pick].front().release))
                    pick = i;
            if (pick == n) return;
            Job j = pending[pick].front();
            pending[pick].pop_front();
            --queued;
            j.start = now;
            running[pick] = j;
            --free_workers;
            events.push({now + tasks[pick].et.sample(rngs[pick]), 0, seq++, pick});
        }
    };

    while (!events.empty()) {
        const Event e = events.top();
        events.pop();
        if (e.kind == 1) {
            const std::size_t f = e.index;
            if (on_release) on_release(f, e.t);
            for (std::size_t i = 0; i < n; ++i) {
                if (f % static_cast<std::size_t>(tasks[i].spec.every) != 0) continue;
                if (policy == QueuePolicy::latest_value && !pending[i].empty()) {
                    pending[i].front() = {f, e.t, 0};
                    ++out.drops[i];
                } else {
                    pending[i].push_back({f, e.t, 0});
                    ++queued;
                }
            }
            if (queued > cfg.max_pending)
                throw overload_error("overload: " + std::to_string(queued) + " queued jobs at t=" + std::to_string(e.t) + " ms");
            if (f + 1 < frames) events.push({cfg.release_ms(f + 1), 1, seq++, f + 1});
        } else {
            const std::size_t i = e.index;
            const Job j = *running[i];
            running[i].reset();
            ++free_workers;
            out.traces.push_back(make_record(tasks[i].spec.name, j.frame, j.release, j.start, e.t, tasks[i].spec.deadline_ms));
            if (on_finish) {
                try {
                    on_finish(i, out.traces.back());
                } catch (const pipeline_error&) {
                    throw;
                } catch (const std::exception& ex) {
                    throw pipeline_error(tasks[i].spec.name, ex.what());
                }
            }
        }
        dispatch(e.t);
    }
    return out;
}

// Pure scheduling run: no task bodies, queued releases.
inline std::vector<TraceRecord> virtual_run(const std::vector<SchedTask>& tasks, const PipelineConfig& cfg,
                                            QueuePolicy policy = QueuePolicy::fifo) {
    return simulate_schedule(tasks, cfg, policy).traces;
}

// Sum over tasks of mean ET per release period, divided by the worker count.
inline double utilization(const std::vector<SchedTask>& tasks, const PipelineConfig& cfg) {
    double u = 0;
    for (const auto& t : tasks) {
        double mean = t.et.mean;
        if (t.et.kind == EtModel::Kind::empirical) {
            mean = 0;
            for (double v : t.et.samples) mean += v;
            mean /= static_cast<double>(t.et.samples.size());
        }
        u += mean / (cfg.period_ms() * t.spec.every);
    }
    return u / static_cast<double>(cfg.workers);
}

}  // namespace oodrt::rt
