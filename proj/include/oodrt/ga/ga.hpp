#pragma once

// Genetic search over preprocessing configs (input size, flow count,
// interpolation). Fitness is F1 of an int8 OOD detector trained under the
// genome; execution time is measured and reported alongside but not
// optimized.

#include <algorithm>
#include <chrono>
#include <functional>
#include <map>
#include <tuple>
#include <vector>

#include "oodrt/vae/benchmark.hpp"

namespace oodrt::ga {

struct Genome {
    int size_index = 1;  // into flow::kTargetSizes
    int flows = 5;
    flow::Interp interp = flow::Interp::bilinear;

    auto key() const { return std::tuple(size_index, flows, interp == flow::Interp::bilinear); }
    bool operator==(const Genome& o) const { return key() == o.key(); }
    bool operator<(const Genome& o) const { return key() < o.key(); }

    bool valid() const {
        return size_index >= 0 && size_index < static_cast<int>(flow::kTargetSizes.size()) && flows >= 1 &&
               flows <= flow::kMaxFlows;
    }
    flow::PreprocConfig preproc() const {
        if (!valid()) throw argument_error("genome out of range");
        flow::PreprocConfig c;
        c.size = flow::kTargetSizes[static_cast<std::size_t>(size_index)];
        c.flows = flows;
        c.interp = interp;
        return c;
    }
    static Genome from(const flow::PreprocConfig& c) {
        c.validate();
        Genome g;
        for (std::size_t i = 0; i < flow::kTargetSizes.size(); ++i)
            if (flow::kTargetSizes[i] == c.size) g.size_index = static_cast<int>(i);
        g.flows = c.flows;
        g.interp = c.interp;
        return g;
    }
};

inline constexpr int kGeneCount = 3;

// Resamples gene `i` uniformly from its full range.
inline void resample_gene(Genome& g, int i, Rng& rng) {
    switch (i) {
        case 0: g.size_index = uniform_int(rng, 0, static_cast<int>(flow::kTargetSizes.size()) - 1); break;
        case 1: g.flows = uniform_int(rng, 1, flow::kMaxFlows); break;
        default: g.interp = uniform_int(rng, 0, 1) ? flow::Interp::bilinear : flow::Interp::nearest; break;
    }
}

inline Genome random_genome(Rng& rng) {
    Genome g;
    for (int i = 0; i < kGeneCount; ++i) resample_gene(g, i, rng);
    return g;
}

struct Candidate {
    Genome genome;
    double f1 = 0;
    vae::EtStats et;
    bool failed = false;
};

struct GaConfig {
    std::size_t population = 12;
    int generations = 10;
    std::size_t tournament = 3;
    double crossover_rate = 0.9;
    double mutation_rate = 0.2;
    std::size_t elitism = 1;
    // Offspring that repeat an already evaluated genome get one gene
    // resampled, up to this many times, so every generation explores.
    int novelty_retries = 20;
    std::uint64_t seed = 1;

    void validate() const {
        if (population < 4) throw config_error("ga population must be >= 4");
        if (generations < 1) throw config_error("ga generations must be >= 1");
        if (tournament < 1) throw config_error("ga tournament size must be >= 1");
        if (elitism > population) throw config_error("ga elitism exceeds population");
        if (novelty_retries < 0) throw config_error("ga novelty_retries must be >= 0");
        for (double r : {crossover_rate, mutation_rate})
            if (!(r >= 0.0 && r <= 1.0)) throw config_error("ga rates must be in [0, 1]");
    }
};

namespace detail {

// Indices sorted best first; ties keep population order.
inline std::vector<std::size_t> ranking(const std::vector<double>& fit) {
    std::vector<std::size_t> idx(fit.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fit[a] > fit[b]; });
    return idx;
}

inline std::size_t tournament(const std::vector<double>& fit, std::size_t k, Rng& rng) {
    std::size_t best = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(fit.size()) - 1));
    for (std::size_t i = 1; i < k; ++i) {
        const auto c = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(fit.size()) - 1));
        if (fit[c] > fit[best]) best = c;
    }
    return best;
}

}  // namespace detail

// One generation: elites copied unchanged, the rest bred by tournament
// selection, uniform crossover and per-gene resampling mutation.
inline std::vector<Genome> evolve(const std::vector<Genome>& pop, const std::vector<double>& fitness,
                                  const GaConfig& cfg, Rng& rng) {
    cfg.validate();
    if (pop.size() != cfg.population || fitness.size() != pop.size())
        throw argument_error("evolve: population size does not match config");
    const auto order = detail::ranking(fitness);
    std::vector<Genome> next;
    for (std::size_t i = 0; i < cfg.elitism; ++i) next.push_back(pop[order[i]]);
    while (next.size() < cfg.population) {
        const Genome& a = pop[detail::tournament(fitness, cfg.tournament, rng)];
        const Genome& b = pop[detail::tournament(fitness, cfg.tournament, rng)];
        Genome child = a;
        if (uniform01(rng) < cfg.crossover_rate) {
            if (uniform01(rng) < 0.5) child.size_index = b.size_index;
            if (uniform01(rng) < 0.5) child.flows = b.flows;
            if (uniform01(rng) < 0.5) child.interp = b.interp;
        }
        for (int g = 0; g < kGeneCount; ++g)
            if (uniform01(rng) < cfg.mutation_rate) resample_gene(child, g, rng);
        next.push_back(child);
    }
    return next;
}

struct GenerationLog {
    int generation = 0;
    double best_f1 = 0;
    Genome best;
    std::size_t evaluations = 0;  // unique genomes evaluated so far
};

struct GaResult {
    Candidate best;
    std::vector<Candidate> candidates;  // every distinct genome evaluated, in first-seen order
    std::vector<GenerationLog> history;
};

using FitnessFn = std::function<Candidate(const Genome&)>;

// Runs the GA with a memoized fitness: each distinct genome is evaluated at
// most once per run.
inline GaResult run_ga(const FitnessFn& fitness, const GaConfig& cfg) {
    cfg.validate();
    Rng rng(derive_seed(cfg.seed, "ga"));
    std::map<Genome, std::size_t> seen;
    GaResult r;
    const auto eval = [&](const Genome& g) -> const Candidate& {
        auto it = seen.find(g);
        if (it == seen.end()) {
            Candidate c = fitness(g);
            c.genome = g;
            r.candidates.push_back(c);
            it = seen.emplace(g, r.candidates.size() - 1).first;
        }
        return r.candidates[it->second];
    };
    std::vector<Genome> pop;
    for (std::size_t i = 0; i < cfg.population; ++i) pop.push_back(random_genome(rng));
    for (int gen = 0;; ++gen) {
        std::vector<double> fit;
        for (const auto& g : pop) fit.push_back(eval(g).f1);
        const auto bi = detail::ranking(fit)[0];
        const Candidate& best = eval(pop[bi]);
        if (gen == 0 || best.f1 > r.best.f1) r.best = best;
        r.history.push_back({gen, r.best.f1, r.best.genome, r.candidates.size()});
        if (gen + 1 >= cfg.generations) break;
        pop = evolve(pop, fit, cfg, rng);
        for (std::size_t i = cfg.elitism; i < pop.size(); ++i) {
            const auto repeated = [&] {
                return seen.contains(pop[i]) || std::find(pop.begin(), pop.begin() + static_cast<long>(i), pop[i]) !=
                                                    pop.begin() + static_cast<long>(i);
            };
            for (int t = 0; t < cfg.novelty_retries && repeated(); ++t)
                resample_gene(pop[i], uniform_int(rng, 0, kGeneCount - 1), rng);
        }
    }
    return r;
}

// ---------------------------------------------------------------- timing

// Wall-clock timing of `run` after `warmup` untimed calls.
template <class Fn>
vae::EtStats time_runs(Fn&& run, std::size_t n, std::size_t warmup = 10) {
    if (n < 2) throw argument_error("measure_et: need at least two timed runs");
    for (std::size_t i = 0; i < warmup; ++i) run();
    std::vector<double> ms;
    ms.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        run();
        ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    }
    return vae::et_stats(ms);
}

// Preprocess (resize + normalize + stack) and int8 score of one window.
inline vae::EtStats measure_et(const vae::OodDetector& d, std::span<const flow::FlowField> flows, std::size_t n,
                               std::size_t warmup = 10) {
    if (flows.size() < static_cast<std::size_t>(d.preproc.flows))
        throw argument_error("measure_et: fewer flows than the window depth");
    const auto window = flows.first(static_cast<std::size_t>(d.preproc.flows));
    volatile double sink = 0;
    return time_runs([&] { sink = sink + d.qmodel.score(flow::build_stack(window, d.preproc)); }, n, warmup);
}

// ---------------------------------------------------------------- fitness

struct FitnessConfig {
    vae::OodTrainConfig train = [] {
        vae::OodTrainConfig t;
        t.vae.epochs = 2;
        t.train_stride = 8;
        return t;
    }();
    std::size_t test_stride = 4;  // score every n-th test window
    std::size_t et_runs = 100;
    std::size_t et_warmup = 10;
};

inline vae::EvalReport quantized_report(const vae::OodDetector& d, const std::vector<vae::FlowVideo>& videos,
                                        std::size_t stride = 1) {
    if (stride < 1) throw config_error("test_stride must be >= 1");
    std::vector<bool> pred, label;
    for (const auto& v : videos) {
        const vae::SlotVideo s = vae::make_slots(v, d.preproc);
        for (std::size_t w = 0; w < s.window_count(); w += stride) {
            pred.push_back(d.judge(s.stack(w), true).is_ood);
            label.push_back(s.label(w));
        }
    }
    return vae::evaluate_f1(pred, label);
}

// Trains and quantizes a detector under the genome, then scores the int8
// verdicts on every test window. Divergence marks the candidate failed.
inline Candidate fitness(const Genome& g, const vae::OodData& data, const FitnessConfig& fc) {
    Candidate c;
    c.genome = g;
    const flow::PreprocConfig pc = g.preproc();
    try {
        const vae::TrainedOod t = vae::train_ood(data.train, data.val, pc, fc.train);
        c.f1 = quantized_report(t.detector, data.tests, fc.test_stride).f1;
        c.et = measure_et(t.detector, data.val.flows, fc.et_runs, fc.et_warmup);
    } catch (const training_error&) {
        c.failed = true;
        c.f1 = 0;
    }
    return c;
}

inline std::vector<vae::CandidateRow> candidate_rows(std::vector<Candidate> cs) {
    std::stable_sort(cs.begin(), cs.end(), [](const Candidate& a, const Candidate& b) { return a.genome < b.genome; });
    std::vector<vae::CandidateRow> rows;
    for (const auto& c : cs) rows.push_back({c.genome.preproc(), c.f1, c.et});
    return rows;
}

}  // namespace oodrt::ga
