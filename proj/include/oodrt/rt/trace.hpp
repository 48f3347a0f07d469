#pragma once

// Task specs, per-job trace records and response-time statistics.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "oodrt/core/error.hpp"

namespace oodrt::rt {

inline constexpr const char* kLaneTask = "lane_follow";
inline constexpr const char* kObjectTask = "object_detect";
inline constexpr const char* kOodTask = "ood_detect";

struct TaskSpec {
    std::string name;
    int every = 1;             // released on every n-th camera frame
    double deadline_ms = 100;  // relative to the frame release

    void validate() const {
        if (name.empty()) throw config_error("task needs a name");
        if (every < 1) throw config_error("task '" + name + "': trigger period must be >= 1 frame");
        if (!(deadline_ms > 0)) throw config_error("task '" + name + "': deadline must be positive");
    }
};

// Lane following every frame, detection every third, OOD every frame. Lane
// and detection deadlines are their trigger periods; OOD gets 800 ms.
inline std::vector<TaskSpec> default_tasks(double fps) {
    if (!(fps > 0)) throw config_error("frame rate must be positive");
    const double period = 1000.0 / fps;
    return {{kLaneTask, 1, period}, {kObjectTask, 3, 3 * period}, {kOodTask, 1, 800.0}};
}

struct TraceRecord {
    std::string task;
    std::size_t frame_id = 0;
    double release_ms = 0, start_ms = 0, finish_ms = 0, deadline_ms = 0;
    bool missed = false;

    double response_ms() const { return finish_ms - release_ms; }
};

inline TraceRecord make_record(std::string task, std::size_t frame, double release, double start, double finish,
                               double deadline) {
    if (!(release <= start && start <= finish)) throw argument_error("trace record times out of order");
    TraceRecord r{std::move(task), frame, release, start, finish, deadline, false};
    r.missed = r.response_ms() > deadline;
    return r;
}

inline constexpr const char* kTraceHeader = "task,frame_id,release_ms,start_ms,finish_ms,response_ms,deadline_ms,missed";

inline std::string trace_line(const TraceRecord& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%zu,%.3f,%.3f,%.3f,%.3f,%.3f,%d", r.task.c_str(), r.frame_id, r.release_ms,
                  r.start_ms, r.finish_ms, r.response_ms(), r.deadline_ms, r.missed ? 1 : 0);
    return buf;
}

inline void write_trace_csv(const std::string& path, const std::vector<TraceRecord>& traces) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path);
    out << kTraceHeader << '\n';
    for (const auto& r : traces) out << trace_line(r) << '\n';
}

inline std::vector<TraceRecord> read_trace_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != kTraceHeader) throw argument_error(path + ": not a trace CSV");
    std::vector<TraceRecord> out;
    for (std::size_t n = 2; std::getline(in, line); ++n) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
        if (f.size() != 8) throw argument_error(path + ":" + std::to_string(n) + ": expected 8 fields");
        try {
            TraceRecord r{f[0], std::stoul(f[1]), std::stod(f[2]), std::stod(f[3]), std::stod(f[4]), std::stod(f[6]), f[7] == "1"};
            out.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw argument_error(path + ":" + std::to_string(n) + ": bad number");
        }
    }
    return out;
}

inline std::vector<double> responses(const std::vector<TraceRecord>& traces, const std::string& task) {
    std::vector<double> out;
    for (const auto& r : traces)
        if (r.task == task) out.push_back(r.response_ms());
    return out;
}

// Linear interpolation between order statistics at position q*(n-1).
inline double percentile(std::vector<double> v, double q) {
    if (v.empty()) throw argument_error("percentile of an empty sample");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct ResponseStats {
    std::size_t count = 0;
    double mean = 0, variance = 0, max = 0, p50 = 0, p95 = 0, p99 = 0;
    std::size_t misses = 0;
};

// Sample statistics of finish - release; variance uses n - 1 (0 for one record).
inline ResponseStats response_stats(const std::vector<TraceRecord>& traces, const std::string& task) {
    const auto r = responses(traces, task);
    if (r.empty()) throw argument_error("no trace records for task '" + task + "'");
    ResponseStats s;
    s.count = r.size();
    for (double v : r) s.mean += v;
    s.mean /= static_cast<double>(r.size());
    for (double v : r) s.variance += (v - s.mean) * (v - s.mean);
    s.variance = r.size() > 1 ? s.variance / static_cast<double>(r.size() - 1) : 0.0;
    s.max = *std::max_element(r.begin(), r.end());
    s.p50 = percentile(r, 0.50);
    s.p95 = percentile(r, 0.95);
    s.p99 = percentile(r, 0.99);
    for (const auto& t : traces) s.misses += t.task == task && t.missed;
    return s;
}

// counts[i] covers [i*bin_ms, (i+1)*bin_ms); at least `min_bins` bins.
inline std::vector<std::size_t> histogram(const std::vector<double>& values, double bin_ms = 10.0, std::size_t min_bins = 1) {
    if (!(bin_ms > 0)) throw argument_error("histogram bin width must be positive");
    std::size_t n = min_bins;
    for (double v : values) n = std::max(n, static_cast<std::size_t>(std::max(0.0, v) / bin_ms) + 1);
    std::vector<std::size_t> counts(n, 0);
    for (double v : values) counts[static_cast<std::size_t>(std::max(0.0, v) / bin_ms)]++;
    return counts;
}

// Three response-time distributions side by side: A = OOD detection,
// B = object detection, C = lane following, on a shared bin range.
inline constexpr const char* kHistogramHeader = "panel,task,bin_start_ms,bin_end_ms,count";

inline std::string response_histograms_csv(const std::vector<TraceRecord>& traces, double bin_ms = 10.0) {
    const std::pair<const char*, const char*> panels[] = {{"A", kOodTask}, {"B", kObjectTask}, {"C", kLaneTask}};
    std::size_t bins = 1;
    for (const auto& [p, t] : panels) bins = std::max(bins, histogram(responses(traces, t), bin_ms).size());
    std::ostringstream s;
    s << kHistogramHeader << '\n';
    for (const auto& [p, t] : panels) {
        const auto h = histogram(responses(traces, t), bin_ms, bins);
        for (std::size_t i = 0; i < h.size(); ++i)
            s << p << ',' << t << ',' << static_cast<double>(i) * bin_ms << ',' << static_cast<double>(i + 1) * bin_ms << ','
              << h[i] << '\n';
    }
    return s.str();
}

}  // namespace oodrt::rt
