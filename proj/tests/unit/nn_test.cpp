#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "gradcheck.hpp"
#include "oodrt/nn/model.hpp"
#include "oodrt/nn/optim.hpp"
#include "oodrt/nn/serialize.hpp"

using namespace oodrt;
using namespace oodrt::nn;

TEST(Tensor, RejectsInconsistentShapes) {
    EXPECT_THROW(Tensor({2, 3}, std::vector<float>(5)), argument_error);
    EXPECT_THROW(Tensor(Dims{}), argument_error);
    EXPECT_THROW(Tensor({2, 0}), argument_error);
    Tensor t({2, 3}, 1.5f);
    EXPECT_EQ(t.size(), 6u);
}

TEST(Forward, IdentityPointwiseConv) {
    ModelGraph m("id", {3, 4, 5}, {LayerSpec::conv2d(3, 3, 1)});
    for (std::size_t o = 0; o < 3; ++o) m.weight(0)[o * 3 + o] = 1.0f;
    Rng rng(3);
    const Tensor x = oracle::random_tensor({3, 4, 5}, rng);
    EXPECT_EQ(forward(m, x), x);
}

TEST(Forward, Conv3x3MatchesDirectConvolution) {
    Rng rng(11);
    for (std::size_t stride : {1u, 2u}) {
        ModelGraph m("c", {1, 4, 4}, {LayerSpec::conv2d(1, 2, 3, stride, 1)});
        m.init_weights(rng);
        for (auto& v : m.bias(0).values()) v = static_cast<float>(uniform(rng, -1, 1));
        const Tensor x = oracle::random_tensor({1, 4, 4}, rng);
        const Tensor y = forward(m, x);
        const Tensor ref = oracle::direct_conv2d(x, m.weight(0), m.bias(0), stride, 1);
        ASSERT_EQ(y.dims(), ref.dims());
        EXPECT_LE(max_abs_diff(y, ref), 1e-6f);
    }
}

TEST(Forward, DenseZeroInputGivesBias) {
    ModelGraph m("d", {4}, {LayerSpec::dense(4, 3)});
    Rng rng(1);
    m.init_weights(rng);
    m.bias(0) = Tensor({3}, {0.5f, -1.0f, 2.0f});
    EXPECT_EQ(forward(m, Tensor({4})), m.bias(0));
}

TEST(Forward, ShapeMismatchNamesLayer) {
    try {
        ModelGraph m("bad", {3, 8, 8}, {LayerSpec::conv2d(3, 4, 3), LayerSpec::dense(10, 2)});
        FAIL() << "expected config_error";
    } catch (const config_error& e) {
        EXPECT_NE(std::string(e.what()).find("layer 1 (dense)"), std::string::npos) << e.what();
    }
    ModelGraph ok("ok", {3, 8, 8}, {LayerSpec::conv2d(3, 4, 3)});
    try {
        forward(ok, Tensor({2, 8, 8}));
        FAIL() << "expected config_error";
    } catch (const config_error& e) {
        EXPECT_NE(std::string(e.what()).find("layer 0 (conv2d)"), std::string::npos) << e.what();
    }
}

TEST(Forward, RejectsUnsupportedStride) {
    EXPECT_THROW(ModelGraph("s3", {1, 9, 9}, {LayerSpec::conv2d(1, 1, 3, 3)}), config_error);
}

TEST(Forward, IsPureAndComposes) {
    Rng rng(5);
    ModelGraph full("f", {2, 6, 6},
                    {LayerSpec::conv2d(2, 3, 3, 2, 1), LayerSpec::relu(), LayerSpec::flatten(), LayerSpec::dense(27, 4)});
    full.init_weights(rng);
    ModelGraph a("f", {2, 6, 6}, {LayerSpec::conv2d(2, 3, 3, 2, 1), LayerSpec::relu()});
    ModelGraph b("f", {3, 3, 3}, {LayerSpec::flatten(), LayerSpec::dense(27, 4)});
    a.weight(0) = full.weight(0);
    a.bias(0) = full.bias(0);
    b.weight(1) = full.weight(3);
    b.bias(1) = full.bias(3);
    const Tensor x = oracle::random_tensor({2, 6, 6}, rng);
    const Tensor y1 = forward(full, x);
    EXPECT_EQ(y1, forward(full, x));
    EXPECT_EQ(y1, forward(b, forward(a, x)));
}

TEST(Backward, ZeroUpstreamGradientGivesZeroGradients) {
    Rng rng(2);
    ModelGraph m("m", {2, 5, 5}, {LayerSpec::conv2d(2, 3, 3, 1, 1), LayerSpec::sigmoid(), LayerSpec::flatten(),
                                  LayerSpec::dense(75, 2)});
    m.init_weights(rng);
    ForwardCache cache;
    forward(m, oracle::random_tensor({2, 5, 5}, rng), &cache);
    const Gradients g = backward(m, cache, Tensor({2}));
    for (const auto& t : g.params)
        for (float v : t.values()) EXPECT_EQ(v, 0.0f);
    for (float v : g.input.values()) EXPECT_EQ(v, 0.0f);
}

TEST(Backward, RequiresForwardCache) {
    ModelGraph m("m", {3}, {LayerSpec::dense(3, 2)});
    EXPECT_THROW(backward(m, ForwardCache{}, Tensor({2})), usage_error);
}

TEST(Backward, TwoLayerModelMatchesFiniteDifferences) {
    Rng rng(17);
    ModelGraph m("two", {6}, {LayerSpec::dense(6, 5), LayerSpec::sigmoid(), LayerSpec::dense(5, 3)});
    m.init_weights(rng);
    const auto res = oracle::finite_difference_check(m, oracle::random_tensor({6}, rng), rng);
    EXPECT_GT(res.checked, 50u);
    EXPECT_LT(res.max_rel_error, 1e-3);
}

TEST(Backward, DenseSquaredLossMatchesAnalyticFormula) {
    Rng rng(23);
    ModelGraph m("lin", {4}, {LayerSpec::dense(4, 3)});
    m.init_weights(rng);
    const Tensor x = oracle::random_tensor({4}, rng);
    const Tensor t = oracle::random_tensor({3}, rng);
    ForwardCache cache;
    const Tensor y = forward(m, x, &cache);
    Tensor gy({3});
    for (std::size_t i = 0; i < 3; ++i) gy[i] = 2.0f * (y[i] - t[i]);
    const Gradients g = backward(m, cache, gy);
    for (std::size_t o = 0; o < 3; ++o) {
        double yo = 0.0;
        for (std::size_t i = 0; i < 4; ++i) yo += static_cast<double>(m.weight(0)[o * 4 + i]) * x[i];
        for (std::size_t i = 0; i < 4; ++i)
            EXPECT_NEAR(g.params[0][o * 4 + i], 2.0 * (yo - t[o]) * x[i], 1e-6);
    }
}

// Property: every layer kind agrees with central differences on random
// small shapes.
TEST(Backward, FiniteDifferencePropertyAllLayerKinds) {
    const LayerKind kinds[] = {LayerKind::dense,   LayerKind::conv2d,     LayerKind::relu,
                               LayerKind::sigmoid, LayerKind::flatten,    LayerKind::upsample2x,
                               LayerKind::reshape, LayerKind::crop};
    Rng rng(2024);
    for (int trial = 0; trial < 40; ++trial) {
        const LayerKind kind = kinds[trial % 8];
        auto [model, input] = oracle::random_model_for(kind, rng);
        const auto res = oracle::finite_difference_check(model, input, rng);
        EXPECT_LT(res.max_rel_error, 1e-3) << "kind " << to_string(kind) << " trial " << trial;
        EXPECT_GT(res.checked, 0u);
    }
}

TEST(Sgd, ZeroGradientsAndZeroRateAreFixedPoints) {
    Rng rng(4);
    ModelGraph m("m", {3}, {LayerSpec::dense(3, 2)});
    m.init_weights(rng);
    MomentumState vel;
    const ModelGraph same = sgd_step(m, Gradients::zeros_like(m), 0.1f, 0.9f, vel);
    EXPECT_EQ(same.weight(0), m.weight(0));

    Gradients g = Gradients::zeros_like(m);
    for (auto& t : g.params) t.fill(1.0f);
    MomentumState vel2;
    const ModelGraph same2 = sgd_step(m, g, 0.0f, 0.0f, vel2);
    EXPECT_EQ(same2.weight(0), m.weight(0));
    EXPECT_EQ(same2.bias(0), m.bias(0));
}

TEST(Sgd, ConvergesOnQuadraticBowl) {
    ModelGraph m("p", {1}, {LayerSpec::dense(1, 1)});
    MomentumState vel;
    for (int step = 0; step < 200; ++step) {
        Gradients g = Gradients::zeros_like(m);
        g.params[0][0] = 2.0f * (m.weight(0)[0] - 3.0f);  // d/dp (p-3)^2
        m = sgd_step(std::move(m), g, 0.1f, 0.0f, vel);
    }
    EXPECT_NEAR(m.weight(0)[0], 3.0f, 1e-3f);
}

TEST(Sgd, RejectsNonFiniteGradients) {
    ModelGraph m("m", {2}, {LayerSpec::dense(2, 1)});
    Gradients g = Gradients::zeros_like(m);
    g.params[0][1] = std::numeric_limits<float>::quiet_NaN();
    MomentumState vel;
    EXPECT_THROW(sgd_step(m, g, 0.1f, 0.0f, vel), training_error);
}

TEST(Init, SeededGlorotIsDeterministicAndBounded) {
    ModelGraph a("m", {8}, {LayerSpec::dense(8, 4)});
    ModelGraph b = a;
    Rng r1(9), r2(9);
    a.init_weights(r1);
    b.init_weights(r2);
    EXPECT_EQ(a.weight(0), b.weight(0));
    const float bound = std::sqrt(6.0f / 12.0f);
    for (float v : a.weight(0).values()) EXPECT_LE(std::abs(v), bound);
}

TEST(Oodm, GoldenBytesForSingleTensor) {
    const auto bytes = encode_oodm({OodmEntry::scalar("a", 1.0f)});
    const std::vector<std::uint8_t> expected{'O', 'O', 'D', 'M', 1, 0, 0, 0, 1, 0, 0, 0, 1,    0,   'a',
                                             0,   1,   1,   0,   0, 0, 0, 0, 0x80, 0x3f};
    EXPECT_EQ(bytes, expected);
}

TEST(Oodm, ModelRoundTripAndErrors) {
    Rng rng(6);
    ModelGraph m("enc", {2, 4, 4}, {LayerSpec::conv2d(2, 3, 3, 1, 1), LayerSpec::flatten(), LayerSpec::dense(48, 5)});
    m.init_weights(rng);
    const auto bytes = encode_oodm(model_entries(m));
    ModelGraph back("enc", {2, 4, 4}, {LayerSpec::conv2d(2, 3, 3, 1, 1), LayerSpec::flatten(), LayerSpec::dense(48, 5)});
    load_model_params(back, decode_oodm(bytes));
    for (std::size_t i = 0; i < m.params().size(); ++i) EXPECT_EQ(back.params()[i].value, m.params()[i].value);
    EXPECT_EQ(encode_oodm(model_entries(back)), bytes);

    auto truncated = bytes;
    truncated.resize(bytes.size() - 3);
    EXPECT_THROW(decode_oodm(truncated), io_error);
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    EXPECT_THROW(decode_oodm(bad_magic), io_error);
}
