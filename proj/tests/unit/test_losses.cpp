#include <gtest/gtest.h>

#include <cmath>

#include "support/test_support.hpp"
#include "tsgan/error.hpp"
#include "tsgan/losses.hpp"
#include "tsgan/ops.hpp"

using namespace tsgan;
using tsgan::testing::finite_difference_check;
using tsgan::testing::random_tensor;

namespace {

using T64 = Tensor<double>;

T64 unit() { return T64::scalar(1.0); }

}  // namespace

TEST(L2PixelLoss, ZeroWhenEqual) {
    auto a = random_tensor({2, 1, 4, 4}, 1);
    EXPECT_EQ(l2_pixel_loss(a, a).item(), 0.0);
}

TEST(L2PixelLoss, SinglePixelFixture) {
    auto pred = T64::from_data({1, 1, 1, 1}, {0.0});
    auto truth = T64::from_data({1, 1, 1, 1}, {1.0});
    EXPECT_DOUBLE_EQ(l2_pixel_loss(pred, truth).item(), 0.5);
}

TEST(L2PixelLoss, QuadraticInResidual) {
    auto truth = random_tensor({2, 1, 5, 3}, 2, false, 0, 1);
    auto pred = random_tensor({2, 1, 5, 3}, 3, false, 0, 1);
    const double base = l2_pixel_loss(pred, truth).item();
    const double c = 3.0;
    auto scaled = add(truth, scale(sub(pred, truth), c));
    EXPECT_NEAR(l2_pixel_loss(scaled, truth).item(), c * c * base, 1e-12);
}

TEST(L2PixelLoss, BatchAverage) {
    // Image 0 has loss 0.5, image 1 has loss 0: batch value 0.25.
    auto pred = T64::from_data({2, 1, 1, 1}, {0.0, 1.0});
    auto truth = T64::from_data({2, 1, 1, 1}, {1.0, 1.0});
    EXPECT_DOUBLE_EQ(l2_pixel_loss(pred, truth).item(), 0.25);
}

TEST(L2PixelLoss, ShapeMismatchThrows) {
    EXPECT_THROW(l2_pixel_loss(T64::zeros({1, 1, 2, 2}), T64::zeros({1, 1, 2, 3})), ShapeError);
}

TEST(L2PixelLoss, GradientMatchesFiniteDifferences) {
    auto pred = random_tensor({2, 1, 4, 4}, 4, true, 0, 1);
    auto truth = random_tensor({2, 1, 4, 4}, 5, false, 0, 1);
    auto res = finite_difference_check([&] { return l2_pixel_loss(pred, truth); }, {pred}, 6);
    EXPECT_LT(res.max_rel_error, 1e-4);
}

TEST(AdversarialLosses, WganEqualScoresGiveZero) {
    auto s = random_tensor({2, 1, 4, 4}, 7);
    auto out = adversarial_losses(s, s, GanMode::wgan_clip);
    EXPECT_EQ(out.d_loss.item(), 0.0);
}

TEST(AdversarialLosses, WganFixture) {
    auto out = adversarial_losses(T64::full({1, 1, 4, 4}, 1.0), T64::zeros({1, 1, 4, 4}), GanMode::wgan_clip);
    EXPECT_DOUBLE_EQ(out.d_loss.item(), -1.0);
    EXPECT_DOUBLE_EQ(out.g_loss.item(), 0.0);
}

TEST(AdversarialLosses, StandardModeAtHalf) {
    auto half = T64::full({2, 1, 4, 4}, 0.5);
    auto out = adversarial_losses(half, half, GanMode::standard);
    EXPECT_NEAR(out.d_loss.item(), -2.0 * std::log(0.5), 1e-12);
    EXPECT_NEAR(out.d_loss.item(), 1.3863, 5e-5);
    EXPECT_NEAR(out.g_loss.item(), std::log(2.0), 1e-12);
}

TEST(AdversarialLosses, ShapeMismatchThrows) {
    EXPECT_THROW(adversarial_losses(T64::zeros({1, 1, 4, 4}), T64::zeros({1, 1, 2, 2}), GanMode::wgan_clip),
                 ShapeError);
}

TEST(AdversarialLosses, GradientsMatchFiniteDifferences) {
    auto real = random_tensor({2, 1, 3, 3}, 8, true);
    auto fake = random_tensor({2, 1, 3, 3}, 9, true);
    auto wd = finite_difference_check([&] { return adversarial_losses(real, fake, GanMode::wgan_clip).d_loss; },
                                      {real, fake}, 10);
    auto wg = finite_difference_check([&] { return adversarial_losses(real, fake, GanMode::wgan_clip).g_loss; },
                                      {fake}, 11);
    auto preal = random_tensor({2, 1, 3, 3}, 12, true, 0.05, 0.95);
    auto pfake = random_tensor({2, 1, 3, 3}, 13, true, 0.05, 0.95);
    auto sd = finite_difference_check([&] { return adversarial_losses(preal, pfake, GanMode::standard).d_loss; },
                                      {preal, pfake}, 14, 10, 1e-6);
    auto sg = finite_difference_check([&] { return adversarial_losses(preal, pfake, GanMode::standard).g_loss; },
                                      {pfake}, 15, 10, 1e-6);
    EXPECT_LT(wd.max_rel_error, 1e-4);
    EXPECT_LT(wg.max_rel_error, 1e-4);
    EXPECT_LT(sd.max_rel_error, 1e-4);
    EXPECT_LT(sg.max_rel_error, 1e-4);
}

TEST(TvLoss, ConstantMapIsZero) { EXPECT_EQ(tv_loss(T64::full({1, 1, 5, 5}, 0.3), 1.0).item(), 0.0); }

TEST(TvLoss, HorizontalPair) {
    auto m = T64::from_data({1, 1, 1, 2}, {0.0, 1.0});
    EXPECT_DOUBLE_EQ(tv_loss(m, 1.0).item(), 1.0);
    EXPECT_DOUBLE_EQ(tv_loss(m, 2.0).item(), 1.0);
}

TEST(TvLoss, VerticalPair) {
    auto m = T64::from_data({1, 1, 2, 1}, {0.0, 0.5});
    EXPECT_DOUBLE_EQ(tv_loss(m, 1.0).item(), 0.25);
}

TEST(TvLoss, MatchesDirectSum) {
    auto m = random_tensor({2, 1, 4, 5}, 16, false, 0, 1);
    const double alpha = 2.0;
    double expected = 0;
    for (int n = 0; n < 2; ++n)
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 5; ++j) {
                const double dx = j + 1 < 5 ? m.at(n, 0, i, j + 1) - m.at(n, 0, i, j) : 0.0;
                const double dy = i + 1 < 4 ? m.at(n, 0, i + 1, j) - m.at(n, 0, i, j) : 0.0;
                expected += std::sqrt(dx * dx + dy * dy);
            }
    EXPECT_NEAR(tv_loss(m, alpha).item(), expected / 2, 1e-12);
}

TEST(TvLoss, DegenerateSizeThrows) {
    EXPECT_THROW(tv_loss(T64::zeros({1, 1, 1, 1}), 1.0), ShapeError);
    EXPECT_THROW(tv_loss(T64::zeros({1, 1, 3, 3}), 0.0), ValueError);
}

TEST(TvLoss, GradientMatchesFiniteDifferences) {
    auto m = random_tensor({2, 1, 4, 4}, 17, true, 0, 1);
    for (double alpha : {1.0, 2.0, 0.5}) {
        auto res = finite_difference_check([&] { return tv_loss(m, alpha); }, {m}, 18);
        EXPECT_LT(res.max_rel_error, 1e-4) << "alpha " << alpha;
    }
}

TEST(TotalLoss, ZeroWeightsGiveZero) {
    LossWeights w{.lambda1 = 0, .lambda2 = 0, .lambda3 = 0, .lambda4 = 0, .lambda5 = 0};
    auto out = total_loss<double>({unit(), unit(), unit(), unit(), unit()}, w);
    EXPECT_EQ(out.total.item(), 0.0);
    EXPECT_EQ(out.report.total, 0.0);
}

TEST(TotalLoss, UnitTermsWithDefaultWeights) {
    auto out = total_loss<double>({unit(), unit(), unit(), unit(), unit()}, LossWeights{});
    EXPECT_NEAR(out.total.item(), 2.3, 1e-12);
    EXPECT_NEAR(out.report.total, 2.3, 1e-12);
}

TEST(TotalLoss, ReportIdentity) {
    LossTerms<double> terms{T64::scalar(0.31), T64::scalar(-1.7), T64::scalar(0.05), T64::scalar(2.2),
                            T64::scalar(4.0)};
    LossWeights w{.lambda1 = 0.3, .lambda2 = 0.7, .lambda3 = 1.5, .lambda4 = 0.2, .lambda5 = 0.05};
    auto out = total_loss(terms, w);
    const auto& r = out.report;
    EXPECT_NEAR(r.total, 0.3 * r.l1 + 0.7 * r.l2_g + 1.5 * r.l3 + 0.2 * r.l4_g + 0.05 * r.tv, 1e-10);
    EXPECT_NEAR(out.total.item(), r.total, 1e-12);
}

TEST(TotalLoss, NonFiniteTermIsNamed) {
    LossTerms<double> terms{unit(), unit(), T64::scalar(NAN), unit(), unit()};
    try {
        total_loss(terms, LossWeights{});
        FAIL() << "expected ValueError";
    } catch (const ValueError& e) {
        EXPECT_NE(std::string(e.what()).find("l3"), std::string::npos);
    }
}

TEST(TotalLoss, ZeroAdversarialWeightsCutAdversarialGradient) {
    auto fake = random_tensor({1, 1, 2, 2}, 19, true);
    auto pred = random_tensor({1, 1, 2, 2}, 20, true);
    auto truth = random_tensor({1, 1, 2, 2}, 21);
    LossWeights w;
    w.lambda2 = w.lambda4 = 0;
    auto adv = adversarial_losses(fake, fake, GanMode::wgan_clip).g_loss;
    auto out = total_loss<double>({l2_pixel_loss(pred, truth), adv, T64{}, adv, tv_loss(pred, 1.0)},
                                  {.lambda1 = 1, .lambda2 = 0, .lambda3 = 0, .lambda4 = 0, .lambda5 = 0.1});
    out.total.backward();
    for (double g : fake.grad()) EXPECT_EQ(g, 0.0);
    EXPECT_TRUE(pred.has_grad());
}

TEST(TotalLoss, MissingWeightedTermThrows) {
    EXPECT_THROW(total_loss<double>({unit(), T64{}, unit(), unit(), unit()}, LossWeights{}), ValueError);
}

TEST(LossWeights, JsonRoundTripAndValidation) {
    LossWeights w{.lambda1 = 0.2, .lambda2 = 0.5, .lambda3 = 0.3, .lambda4 = 0.0, .lambda5 = 1.5, .alpha = 2.0,
                  .gan_mode = GanMode::standard};
    nlohmann::json j = w;
    LossWeights back = j.get<LossWeights>();
    EXPECT_EQ(nlohmann::json(back), j);
    EXPECT_THROW((LossWeights{.lambda3 = -1}.validate()), ValueError);
    EXPECT_THROW((LossWeights{.alpha = 0}.validate()), ValueError);
    EXPECT_THROW(parse_gan_mode("lsgan"), ValueError);
}
