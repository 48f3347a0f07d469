// Quick tour on a small budget: render a short ID drive and a snowy test
// video, train a small flow-VAE monitor, then drive the robot through the
// real-time pipeline in virtual time and report whether the e-stop fired.
// Takes well under a minute; the full-size workflow lives in the CLI.

#include <cstdio>

#include "oodrt/rt/pipeline.hpp"
#include "oodrt/vae/benchmark.hpp"

using namespace oodrt;

int main() {
    const sim::WorldConfig world = sim::default_world(1);
    const sim::Renderer renderer(world, sim::CameraModel{});

    sim::SuiteConfig sc;
    sc.train_frames = 400;
    sc.val_frames = 200;
    sc.test_videos = 2;
    sc.test_frames = 150;
    const auto data = vae::make_ood_data(renderer, sim::default_suite(world.track.length(), sc, 1));

    flow::PreprocConfig pc;
    pc.size = {30, 40};
    vae::OodTrainConfig tc;
    tc.vae.epochs = 4;
    auto trained = vae::train_ood(data.train, data.val, pc, tc);
    const auto eval = vae::evaluate_ood(trained.detector, data.tests);
    std::printf("monitor %s: threshold %.5f, int8 F1 %.3f, float/int8 agreement %.3f\n", flow::describe(pc).c_str(),
                trained.detector.threshold, eval.quant_report.f1, eval.agreement);

    // an untrained detector is enough to exercise the object-detection task
    detect::DetectorConfig dc;
    dc.input_size = 64;
    const rt::DemoModels models{std::move(trained.detector), detect::QuantizedDetector(detect::Detector::create(dc, 1))};

    rt::DemoConfig cfg;
    cfg.pipeline.estop_m = 10;
    cfg.pipeline.duration_s = 6;
    for (bool snow : {true, false}) {
        const auto scenario = rt::make_scenario(snow, world.track.length(), cfg.pipeline, 3, 3.0);
        const auto res = rt::run_pipeline(renderer, models, scenario, cfg);
        std::printf("%s\n", rt::to_json(res.outcome).dump().c_str());
        if (snow)
            for (const char* task : {rt::kLaneTask, rt::kObjectTask, rt::kOodTask}) {
                const auto s = rt::response_stats(res.traces, task);
                std::printf("  %-13s mean %.1f ms  p95 %.1f ms  max %.1f ms\n", task, s.mean, s.p95, s.max);
            }
    }
}
