#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "support/test_support.hpp"
#include "tsgan/checkpoint.hpp"
#include "tsgan/ops.hpp"
#include "tsgan/optimizer.hpp"

using namespace tsgan;
using tsgan::testing::random_tensor;

namespace {

using T64 = Tensor<double>;

T64 weighted_sum(const T64& out, std::uint64_t seed) {
    return sum(mul(out, random_tensor(out.shape(), seed)));
}

void expect_all_near(std::span<const double> a, std::span<const double> b, double tol) {
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "index " << i;
}

}  // namespace

TEST(Conv2d, IdentityKernelReproducesInput) {
    auto x = T64::full({1, 1, 3, 3}, 1.0);
    auto w = T64::from_data({1, 1, 1, 1}, {1.0});
    auto b = T64::from_data({1, 1, 1, 1}, {0.0});
    auto y = conv2d(x, w, b);
    EXPECT_EQ(y.shape(), x.shape());
    expect_all_near(y.data(), x.data(), 0.0);
}

TEST(Conv2d, HandComputedTwoByTwo) {
    auto x = T64::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
    auto w = T64::from_data({1, 1, 2, 2}, {1, 0, 0, 1});
    auto y = conv2d(x, w, T64::from_data({1, 1, 1, 1}, {0.0}));
    ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
    EXPECT_DOUBLE_EQ(y.item(), 5.0);
}

TEST(Conv2d, DilatedMatchesLoopOracle) {
    auto x = random_tensor({2, 3, 8, 8}, 1);
    auto w = random_tensor({4, 3, 3, 3}, 2);
    auto b = random_tensor({4, 1, 1, 1}, 3);
    auto y = conv2d(x, w, b, {.stride = 1, .padding = 2, .dilation = 2});
    Shape ref_shape;
    auto ref = tsgan::testing::conv2d_reference(x, w, {b.data().begin(), b.data().end()}, 1, 2, 2, ref_shape);
    ASSERT_EQ(y.shape(), ref_shape);
    expect_all_near(y.data(), ref, 1e-10);
}

TEST(Conv2d, StridedMatchesLoopOracle) {
    auto x = random_tensor({1, 2, 7, 6}, 11);
    auto w = random_tensor({3, 2, 3, 2}, 12);
    auto y = conv2d(x, w, T64{}, {.stride = 2, .padding = 1, .dilation = 1});
    Shape ref_shape;
    auto ref = tsgan::testing::conv2d_reference(x, w, {}, 2, 1, 1, ref_shape);
    ASSERT_EQ(y.shape(), ref_shape);
    expect_all_near(y.data(), ref, 1e-10);
}

TEST(Conv2d, ErrorsNameTheProblem) {
    auto x = random_tensor({1, 2, 4, 4}, 1);
    try {
        (void)conv2d(x, random_tensor({1, 3, 3, 3}, 2), T64{});
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        EXPECT_NE(std::string(e.what()).find("channels"), std::string::npos);
    }
    EXPECT_THROW((void)conv2d(x, random_tensor({1, 2, 5, 5}, 2), T64{}), ShapeError);
    EXPECT_THROW((void)conv2d(x, random_tensor({1, 2, 3, 3}, 2), T64{}, {.stride = 0}), ValueError);
}

TEST(ConvTranspose2d, ScalarProduct) {
    auto y = conv_transpose2d(T64::from_data({1, 1, 1, 1}, {2.0}), T64::from_data({1, 1, 1, 1}, {3.0}), T64{}, 1, 0);
    EXPECT_DOUBLE_EQ(y.item(), 6.0);
}

TEST(ConvTranspose2d, BlockExpansionMatchesOracle) {
    auto x = T64::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
    auto w = T64::full({1, 1, 2, 2}, 1.0);
    auto y = conv_transpose2d(x, w, T64{}, 2, 0);
    Shape ref_shape;
    auto ref = tsgan::testing::conv_transpose2d_reference(x, w, {}, 2, 0, ref_shape);
    ASSERT_EQ(y.shape(), (Shape{1, 1, 4, 4}));
    expect_all_near(y.data(), ref, 1e-12);
    EXPECT_DOUBLE_EQ(y.at(0, 0, 3, 3), 4.0);
}

TEST(ConvTranspose2d, OverlappingKernelMatchesOracle) {
    auto x = random_tensor({2, 3, 5, 4}, 21);
    auto w = random_tensor({3, 2, 4, 4}, 22);
    auto b = random_tensor({1, 2, 1, 1}, 23);
    auto y = conv_transpose2d(x, w, b, 2, 1);
    Shape ref_shape;
    auto ref = tsgan::testing::conv_transpose2d_reference(x, w, {b.data().begin(), b.data().end()}, 2, 1, ref_shape);
    ASSERT_EQ(y.shape(), ref_shape);
    expect_all_near(y.data(), ref, 1e-10);
}

TEST(ConvTranspose2d, IsAdjointOfConv2d) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        SplitMix64 rng(seed);
        const int stride = static_cast<int>(rng.between(1, 3));
        const int pad = static_cast<int>(rng.between(0, 1));
        const std::int64_t k = rng.between(1, 4);
        const std::int64_t inc = rng.between(1, 3), outc = rng.between(1, 3);
        // Pick the input extent the transposed op reproduces exactly.
        const std::int64_t oh = rng.between(2, 4), ow = rng.between(2, 4);
        const std::int64_t h = (oh - 1) * stride - 2 * pad + k, w_ = (ow - 1) * stride - 2 * pad + k;
        auto x = random_tensor({2, inc, h, w_}, seed + 100);
        auto w = random_tensor({outc, inc, k, k}, seed + 200);
        auto cx = conv2d(x, w, T64{}, {.stride = stride, .padding = pad, .dilation = 1});
        ASSERT_EQ(cx.shape(), (Shape{2, outc, oh, ow}));
        auto y = random_tensor(cx.shape(), seed + 300);
        auto ty = conv_transpose2d(y, w, T64{}, stride, pad);
        ASSERT_EQ(ty.shape(), x.shape());
        const double rhs = tsgan::testing::dot(x.data(), ty.data());
        EXPECT_NEAR(tsgan::testing::dot(cx.data(), y.data()), rhs, 1e-8) << "seed " << seed;
    }
}

TEST(MaxPool, WindowMaximum) {
    auto y = maxpool2d(T64::from_data({1, 1, 2, 2}, {1, 2, 3, 4}), 2, 2);
    EXPECT_DOUBLE_EQ(y.item(), 4.0);
}

TEST(MaxPool, TiesRouteGradientToFirstIndex) {
    auto x = T64::full({1, 1, 4, 4}, 0.5, true);
    auto y = maxpool2d(x, 2, 2);
    for (double v : y.data()) EXPECT_DOUBLE_EQ(v, 0.5);
    sum(y).backward();
    const auto g = x.grad();
    for (std::int64_t i = 0; i < 4; ++i)
        for (std::int64_t j = 0; j < 4; ++j)
            EXPECT_DOUBLE_EQ(g[static_cast<std::size_t>(i * 4 + j)], (i % 2 == 0 && j % 2 == 0) ? 1.0 : 0.0);
}

TEST(MaxPool, MatchesLoopOracle) {
    auto x = random_tensor({1, 2, 6, 6}, 31);
    auto y = maxpool2d(x, 2, 2);
    Shape ref_shape;
    auto ref = tsgan::testing::maxpool_reference(x, 2, 2, ref_shape);
    ASSERT_EQ(y.shape(), ref_shape);
    expect_all_near(y.data(), ref, 1e-10);
    EXPECT_THROW((void)maxpool2d(x, 7, 1), ShapeError);
}

TEST(BatchNorm, TrainModeNormalizes) {
    auto x = random_tensor({3, 2, 4, 5}, 41, false, -3.0, 5.0);
    RunningMoments<double> state(2);
    auto y = batchnorm2d(x, T64::full({1, 2, 1, 1}, 1.0), T64::zeros({1, 2, 1, 1}), state, NormMode::train);
    for (std::int64_t c = 0; c < 2; ++c) {
        double m = 0, v = 0;
        const int count = 3 * 4 * 5;
        for (std::int64_t n = 0; n < 3; ++n)
            for (std::int64_t i = 0; i < 4; ++i)
                for (std::int64_t j = 0; j < 5; ++j) m += y.at(n, c, i, j);
        m /= count;
        for (std::int64_t n = 0; n < 3; ++n)
            for (std::int64_t i = 0; i < 4; ++i)
                for (std::int64_t j = 0; j < 5; ++j) v += (y.at(n, c, i, j) - m) * (y.at(n, c, i, j) - m);
        v /= count;
        EXPECT_NEAR(m, 0.0, 1e-6);
        EXPECT_NEAR(v, 1.0, 1e-4);  // eps = 1e-5 shrinks the variance slightly
        EXPECT_NE(state.mean[c], 0.0);
    }
}

TEST(BatchNorm, ZeroGammaGivesBeta) {
    auto x = random_tensor({2, 2, 3, 3}, 42);
    RunningMoments<double> state(2);
    auto y = batchnorm2d(x, T64::zeros({1, 2, 1, 1}), T64::from_data({1, 2, 1, 1}, {0.25, -0.5}), state,
                         NormMode::train);
    for (std::int64_t n = 0; n < 2; ++n)
        for (std::int64_t i = 0; i < 3; ++i) {
            EXPECT_DOUBLE_EQ(y.at(n, 0, i, 1), 0.25);
            EXPECT_DOUBLE_EQ(y.at(n, 1, i, 2), -0.5);
        }
}

TEST(BatchNorm, RejectsSingleValueChannels) {
    RunningMoments<double> state(1);
    EXPECT_THROW((void)batchnorm2d(T64::full({1, 1, 1, 1}, 1.0), T64::full({1, 1, 1, 1}, 1.0),
                                   T64::zeros({1, 1, 1, 1}), state, NormMode::train),
                 ValueError);
    EXPECT_NO_THROW((void)batchnorm2d(T64::full({1, 1, 1, 1}, 1.0), T64::full({1, 1, 1, 1}, 1.0),
                                      T64::zeros({1, 1, 1, 1}), state, NormMode::eval));
}

TEST(Elementwise, ReluConcatAndMeanGradient) {
    auto r = relu(T64::from_data({1, 1, 1, 3}, {-1, 0, 2}));
    EXPECT_EQ(std::vector<double>(r.data().begin(), r.data().end()), (std::vector<double>{0, 0, 2}));

    auto a = random_tensor({2, 3, 2, 2}, 51);
    auto b = random_tensor({2, 1, 2, 2}, 52);
    auto cat = concat_channels<double>({a, b});
    ASSERT_EQ(cat.shape(), (Shape{2, 4, 2, 2}));
    for (std::int64_t n = 0; n < 2; ++n)
        for (std::int64_t i = 0; i < 2; ++i)
            for (std::int64_t j = 0; j < 2; ++j) EXPECT_EQ(cat.at(n, 3, i, j), b.at(n, 0, i, j));

    auto x = random_tensor({2, 3, 4, 5}, 53, true);
    mean(x).backward();
    for (double g : x.grad()) EXPECT_DOUBLE_EQ(g, 1.0 / 120.0);

    EXPECT_THROW((void)add(a, b), ShapeError);
    EXPECT_THROW((void)concat_channels<double>({a, random_tensor({2, 1, 3, 2}, 1)}), ShapeError);
}

TEST(Backward, SumGivesOnesAndAccumulates) {
    auto x = random_tensor({1, 2, 3, 3}, 61, true);
    auto loss = sum(x);
    loss.backward();
    for (double g : x.grad()) EXPECT_DOUBLE_EQ(g, 1.0);

    auto w = random_tensor({2, 2, 3, 3}, 62, true);
    auto l2 = weighted_sum(relu(conv2d(x, w, T64{}, {.padding = 1})), 63);
    x.zero_grad();
    l2.backward();
    std::vector<double> first(w.grad().begin(), w.grad().end());
    l2.backward();
    for (std::size_t i = 0; i < first.size(); ++i) EXPECT_DOUBLE_EQ(w.grad()[i], 2.0 * first[i]);
}

TEST(Backward, RejectsNonScalarLoss) {
    auto x = random_tensor({1, 1, 2, 2}, 1, true);
    EXPECT_THROW(scale(x, 2.0).backward(), ShapeError);
}

TEST(Backward, NoGradGuardRecordsNothing) {
    auto x = random_tensor({1, 1, 2, 2}, 1, true);
    NoGradGuard guard;
    auto y = scale(x, 2.0);
    EXPECT_FALSE(y.requires_grad());
}

TEST(Backward, ConvMseWeightGradientMatchesFiniteDifferences) {
    auto x = random_tensor({2, 2, 5, 5}, 71);
    auto w = random_tensor({3, 2, 3, 3}, 72, true);
    auto t = random_tensor({2, 3, 5, 5}, 73);
    auto res = tsgan::testing::finite_difference_check(
        [&] { return mean(square(sub(conv2d(x, w, T64{}, {.padding = 1}), t))); }, {w}, 74);
    EXPECT_LT(res.max_rel_error, 1e-4);
}

TEST(Optimizer, SgdUpdateRule) {
    auto p = T64::from_data({1, 1, 1, 1}, {1.0}, true);
    p.mutable_grad()[0] = 2.0;
    sum(scale(p, 0.0)).backward();  // marks the gradient as populated without changing it
    Optimizer<double> opt({.method = OptimizerMethod::sgd, .lr = 0.1});
    std::vector<NamedTensor<double>> params{{"p", p}};
    opt.step(params);
    EXPECT_NEAR(p.item(), 0.8, 1e-15);
    EXPECT_DOUBLE_EQ(p.grad()[0], 0.0);
}

TEST(Optimizer, AdamFirstStepIsLearningRate) {
    auto p = T64::from_data({1, 1, 1, 1}, {0.5}, true);
    sum(p).backward();  // grad = 1
    Optimizer<double> opt({.method = OptimizerMethod::adam, .lr = 2e-4});
    std::vector<NamedTensor<double>> params{{"p", p}};
    opt.step(params);
    EXPECT_LT(std::abs((0.5 - p.item()) - 2e-4), 1e-6);
    EXPECT_EQ(opt.state().at("p").steps, 1);
}

TEST(Optimizer, ZeroGradLeavesParamAndMissingGradThrows) {
    auto p = T64::from_data({1, 1, 1, 1}, {0.5}, true);
    sum(scale(p, 0.0)).backward();
    Optimizer<double> opt;
    std::vector<NamedTensor<double>> params{{"p", p}};
    opt.step(params);
    EXPECT_DOUBLE_EQ(p.item(), 0.5);
    try {
        opt.step(params);  // grads were zeroed by the previous step
        FAIL() << "expected ValueError";
    } catch (const ValueError& e) {
        EXPECT_NE(std::string(e.what()).find("'p'"), std::string::npos);
    }
}

TEST(ParamStore, AliasesShareStorage) {
    ParamStore<double> store;
    store.add("a.weight", T64::zeros({1, 1, 2, 2}, true));
    store.alias("b.weight", "a.weight");
    store.get("a.weight").mutable_data()[3] = 7.0;
    EXPECT_DOUBLE_EQ(store.get("b.weight").data()[3], 7.0);
    EXPECT_TRUE(store.is_alias("b.weight"));
    EXPECT_EQ(store.unique().size(), 1u);
    EXPECT_THROW(store.add("a.weight", T64::zeros({1, 1, 1, 1})), ValueError);
}

TEST(Checkpoint, RoundTripPreservesBitsAndMetadata) {
    Checkpoint ck;
    ck.metadata["epoch"] = 3;
    ck.put("w", {1, 2, 1, 2}, {1.5f, -0.0f, 3.25e-7f, 1e30f});
    ck.put_alias("w2", "w");
    const auto path = std::filesystem::temp_directory_path() / "tsgan_ckpt_roundtrip.tsgan";
    ck.save(path);
    auto back = Checkpoint::load(path);
    EXPECT_EQ(back.metadata["epoch"], 3);
    const auto& e = back.get("w");
    EXPECT_EQ(e.shape, (Shape{1, 2, 1, 2}));
    EXPECT_EQ(e.values, ck.get("w").values);
    EXPECT_TRUE(std::signbit(e.values[1]));
    ASSERT_EQ(back.aliases().size(), 1u);
    EXPECT_EQ(back.aliases()[0].second, "w");
    std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsForeignFiles) {
    const auto path = std::filesystem::temp_directory_path() / "tsgan_not_a_ckpt.bin";
    {
        std::ofstream os(path);
        os << "hello world, definitely not a checkpoint";
    }
    EXPECT_THROW((void)Checkpoint::load(path), FormatError);
    EXPECT_THROW((void)Checkpoint::load(path.string() + ".missing"), IoError);
    std::filesystem::remove(path);
}
