#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "oodrt/core/rng.hpp"
#include "flow_oracle.hpp"
#include "oodrt/flow/preproc.hpp"

using namespace oodrt;
using namespace oodrt::flow;

namespace {

using oracle::texture;
using oracle::shifted;
using oracle::block_match;

struct Stats {
    double mean_dx = 0, mean_dy = 0;
};

Stats interior_mean(const FlowField& f, std::size_t margin) {
    Stats s;
    std::size_t n = 0;
    for (std::size_t y = margin; y + margin < f.height; ++y)
        for (std::size_t x = margin; x + margin < f.width; ++x) {
            s.mean_dx += f.dx[y * f.width + x];
            s.mean_dy += f.dy[y * f.width + x];
            ++n;
        }
    s.mean_dx /= n;
    s.mean_dy /= n;
    return s;
}

}  // namespace

TEST(Farneback, IdenticalFramesGiveNearZeroFlow) {
    const GrayFrame a = texture(128, 96, 1);
    const FlowField f = farneback_flow(a, a);
    float mx = 0.0f;
    for (std::size_t i = 0; i < f.dx.size(); ++i) mx = std::max({mx, std::abs(f.dx[i]), std::abs(f.dy[i])});
    EXPECT_LT(mx, 0.1f);
}

TEST(Farneback, RecoversKnownTranslation) {
    const GrayFrame a = texture(128, 96, 2);
    const FlowField f = farneback_flow(a, shifted(a, 2, 0));
    const Stats s = interior_mean(f, 16);
    EXPECT_NEAR(s.mean_dx, 2.0, 0.5);
    EXPECT_NEAR(s.mean_dy, 0.0, 0.5);
}

TEST(Farneback, MatchesBlockMatchingOracleOnSmallTranslations) {
    const GrayFrame a = texture(96, 72, 3);
    const int shifts[][2] = {{1, 0}, {0, -2}, {3, 1}, {-2, 3}, {-3, -3}};
    for (const auto& s : shifts) {
        const GrayFrame b = shifted(a, s[0], s[1]);
        const FlowField f = farneback_flow(a, b);
        const FlowField ref = block_match(a, b, 4, 4);
        double epe = 0.0;
        std::size_t n = 0;
        for (std::size_t y = 12; y + 12 < a.height; ++y)
            for (std::size_t x = 12; x + 12 < a.width; ++x) {
                const std::size_t i = y * a.width + x;
                epe += std::hypot(f.dx[i] - ref.dx[i], f.dy[i] - ref.dy[i]);
                ++n;
            }
        EXPECT_LT(epe / n, 0.5) << "shift (" << s[0] << "," << s[1] << ")";
    }
}

// Property: flow(a, b) ~ -flow(b, a).
TEST(Farneback, SwappedArgumentsNegate) {
    const GrayFrame a = texture(128, 96, 4);
    for (int dx : {-2, 1, 3}) {
        const GrayFrame b = shifted(a, dx, 1);
        const Stats fw = interior_mean(farneback_flow(a, b), 16);
        const Stats bw = interior_mean(farneback_flow(b, a), 16);
        EXPECT_LT(std::abs(fw.mean_dx + bw.mean_dx), 0.5);
        EXPECT_LT(std::abs(fw.mean_dy + bw.mean_dy), 0.5);
    }
}

TEST(Farneback, RejectsFramesSmallerThanCoarseWindow) {
    const GrayFrame a = texture(40, 40, 5);
    EXPECT_THROW(farneback_flow(a, a), argument_error);
    EXPECT_THROW(farneback_flow(a, texture(48, 40, 5)), argument_error);
}

TEST(Resize, SameSizeIsIdentity) {
    const GrayFrame a = texture(32, 24, 6);
    EXPECT_EQ(resize(a, 32, 24, Interp::nearest), a);
    EXPECT_EQ(resize(a, 32, 24, Interp::bilinear), a);
}

TEST(Resize, NearestDuplicatesPixels) {
    FloatPlane p(2, 2);
    p.data = {1, 2, 3, 4};
    const FloatPlane r = resize(p, 4, 4, Interp::nearest);
    const std::vector<float> expected{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
    EXPECT_EQ(r.data, expected);
}

TEST(Resize, BilinearCenterSample) {
    FloatPlane p(2, 2);
    p.data = {0, 2, 2, 4};
    EXPECT_FLOAT_EQ(resize(p, 1, 1, Interp::bilinear).data[0], 2.0f);
    EXPECT_FLOAT_EQ(sample_bilinear(p, 0.5f, 0.5f), 2.0f);
}

// Property: 2x down then up keeps a smooth field close.
TEST(Resize, DownUpRoundTripOnSmoothField) {
    FloatPlane p(80, 60);
    for (std::size_t y = 0; y < 60; ++y)
        for (std::size_t x = 0; x < 80; ++x) p(x, y) = static_cast<float>(std::sin(x / 9.0) + std::cos(y / 7.0));
    for (Interp m : {Interp::nearest, Interp::bilinear}) {
        const FloatPlane back = resize(resize(p, 40, 30, m), 80, 60, m);
        double diff = 0.0;
        for (std::size_t i = 0; i < p.data.size(); ++i) diff += std::abs(back.data[i] - p.data[i]);
        EXPECT_LT(diff / p.data.size(), 0.1 * 4.0) << to_string(m);
    }
}

TEST(Resize, FlowVectorsScaleWithSize) {
    FlowField f(160, 120);
    std::fill(f.dx.begin(), f.dx.end(), 4.0f);
    std::fill(f.dy.begin(), f.dy.end(), -2.0f);
    const FlowField r = resize_flow(f, 40, 30, Interp::bilinear);
    EXPECT_FLOAT_EQ(r.dx[0], 1.0f);
    EXPECT_FLOAT_EQ(r.dy[100], -0.5f);
}

TEST(BuildStack, ZeroFlowsGiveZeroStack) {
    const PreprocConfig cfg{{30, 40}, 3, Interp::nearest};
    const std::vector<FlowField> flows(3, FlowField(160, 120));
    const nn::Tensor s = build_stack(flows, cfg);
    EXPECT_EQ(s.dims(), (nn::Dims{6, 30, 40}));
    for (float v : s.values()) EXPECT_EQ(v, 0.0f);
}

TEST(BuildStack, UniformFlowAtVmaxNormalizesToOne) {
    const PreprocConfig cfg{{120, 160}, 1, Interp::bilinear};
    FlowField f(160, 120);
    std::fill(f.dx.begin(), f.dx.end(), 8.0f);
    const nn::Tensor s = build_stack(std::vector<FlowField>{f}, cfg);
    for (std::size_t i = 0; i < 120 * 160; ++i) ASSERT_FLOAT_EQ(s[i], 1.0f);
    for (std::size_t i = 120 * 160; i < s.size(); ++i) ASSERT_FLOAT_EQ(s[i], 0.0f);
}

TEST(BuildStack, ShapeFollowsConfigAndValuesStayInRange) {
    Rng rng(9);
    for (auto size : kTargetSizes)
        for (int k : {1, 5, 16}) {
            std::vector<FlowField> flows(static_cast<std::size_t>(k), FlowField(160, 120));
            for (auto& f : flows)
                for (std::size_t i = 0; i < f.dx.size(); ++i) {
                    f.dx[i] = static_cast<float>(uniform(rng, -30, 30));
                    f.dy[i] = static_cast<float>(uniform(rng, -30, 30));
                }
            const PreprocConfig cfg{size, k, Interp::bilinear};
            const nn::Tensor s = build_stack(flows, cfg);
            EXPECT_EQ(s.dims(), (nn::Dims{2 * static_cast<std::size_t>(k), size.height, size.width}));
            for (float v : s.values()) ASSERT_LE(std::abs(v), 1.0f);
        }
    EXPECT_EQ((PreprocConfig{{60, 80}, 5, Interp::bilinear}.stack_dims()), (nn::Dims{10, 60, 80}));
    EXPECT_THROW(build_stack(std::vector<FlowField>(2, FlowField(16, 16)), PreprocConfig{{60, 80}, 5}),
                 argument_error);
    EXPECT_THROW((PreprocConfig{{50, 80}, 5}.validate()), config_error);
    EXPECT_THROW((PreprocConfig{{60, 80}, 17}.validate()), config_error);
}

TEST(LabelWindow, AnyOodFrameMarksWindow) {
    const std::array<bool, 4> all_id{false, false, false, false};
    const std::array<bool, 4> last_ood{false, false, false, true};
    const std::array<bool, 4> middle_ood{false, false, true, false};
    EXPECT_FALSE(label_window(all_id));
    EXPECT_TRUE(label_window(last_ood));
    EXPECT_TRUE(label_window(middle_ood));
    EXPECT_THROW(label_window(std::span<const bool>{}), argument_error);
}

TEST(ImageIo, PgmAndPpmRoundTrip) {
    const auto dir = std::filesystem::temp_directory_path();
    const GrayFrame g = texture(20, 17, 7);
    write_pgm((dir / "oodrt_rt.pgm").string(), g);
    EXPECT_EQ(read_pgm((dir / "oodrt_rt.pgm").string()), g);
    RgbFrame c(5, 3);
    for (std::size_t i = 0; i < c.data.size(); ++i)
        c.data[i] = {static_cast<std::uint8_t>(i), static_cast<std::uint8_t>(2 * i), static_cast<std::uint8_t>(250 - i)};
    write_ppm((dir / "oodrt_rt.ppm").string(), c);
    EXPECT_EQ(read_ppm((dir / "oodrt_rt.ppm").string()), c);
    EXPECT_THROW(read_ppm((dir / "oodrt_rt.pgm").string()), io_error);
    EXPECT_THROW(read_pgm((dir / "does_not_exist.pgm").string()), io_error);
}
