#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "radtriage/errors.hpp"
#include "radtriage/grad_check.hpp"
#include "radtriage/head.hpp"
#include "test_util.hpp"

using namespace radtriage;
using radtriage::testing::random_tensor;
using TD = Tensor<double>;

namespace {

HeadParams<double> random_head(std::size_t d, std::uint64_t seed, HeadConfig cfg = {}) {
  auto p = HeadParams<double>::zeros(d, cfg);
  std::mt19937_64 gen(seed);
  for (auto* t : p.tensors()) *t = random_tensor(t->shape(), gen, -0.3, 0.3);
  return p;
}

}  // namespace

TEST(Head, ShapesFollowConfig) {
  const auto specs = head_parameter_specs(1152, HeadConfig{});
  ASSERT_EQ(specs.size(), 6u);
  EXPECT_EQ(specs[0].shape, (Shape{512, 1152}));
  EXPECT_EQ(specs[2].shape, (Shape{128, 512}));
  EXPECT_EQ(specs[4].shape, (Shape{1, 128}));
  HeadConfig bad;
  bad.dropout1 = 1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Head, ZeroParamsGiveHalf) {
  const auto p = HeadParams<float>::zeros(8, HeadConfig{});
  RngStream rng(1);
  EXPECT_EQ(head_forward(Tensor<float>(Shape{8}, 3.0f), p, Mode::eval, rng).item(), 0.5f);
}

TEST(Head, EvalDeterministicAndMatchesHandComposition) {
  const auto p = random_head(8, 2);
  std::mt19937_64 gen(3);
  const auto z = random_tensor(Shape{8}, gen);
  RngStream rng(4);
  const double a = head_forward(z, p, Mode::eval, rng).item();
  const double b = head_forward(z, p, Mode::eval, rng).item();
  EXPECT_EQ(a, b);

  auto dense = [](const TD& w, const TD& bias, const std::vector<double>& x, bool relu) {
    std::vector<double> out(bias.numel());
    for (std::size_t o = 0; o < out.size(); ++o) {
      double s = bias[o];
      for (std::size_t i = 0; i < x.size(); ++i) s += w[o * x.size() + i] * x[i];
      out[o] = relu ? std::max(0.0, s) : s;
    }
    return out;
  };
  auto h = dense(p.fc1_weight, p.fc1_bias, {z.data().begin(), z.data().end()}, true);
  h = dense(p.fc2_weight, p.fc2_bias, h, true);
  const double logit = dense(p.fc3_weight, p.fc3_bias, h, false)[0];
  EXPECT_NEAR(a, 1.0 / (1.0 + std::exp(-logit)), 1e-10);
}

TEST(Head, ZeroDropoutTrainEqualsEval) {
  HeadConfig cfg;
  cfg.dropout1 = cfg.dropout2 = 0.0;
  auto p = random_head(8, 5, cfg);
  p.dropout1 = p.dropout2 = 0.0;
  std::mt19937_64 gen(6);
  const auto z = random_tensor(Shape{8}, gen);
  RngStream r1(1), r2(2);
  EXPECT_EQ(head_forward(z, p, Mode::train, r1).item(), head_forward(z, p, Mode::eval, r2).item());
}

TEST(Head, DropoutActiveInTraining) {
  const auto p = random_head(8, 7);
  std::mt19937_64 gen(8);
  const auto z = random_tensor(Shape{8}, gen);
  RngStream ev;
  const double e = head_logit(z, p, Mode::eval, ev).item();
  bool differs = false;
  for (std::uint64_t s = 0; s < 10 && !differs; ++s) {
    RngStream r(s);
    differs = head_logit(z, p, Mode::train, r).item() != e;
  }
  EXPECT_TRUE(differs);
}

TEST(Head, OutputStrictlyInsideUnitInterval) {
  auto p = HeadParams<float>::zeros(4, HeadConfig{});
  RngStream rng;
  for (float bias : {-200.0f, -20.0f, 0.0f, 20.0f, 200.0f}) {
    p.fc3_bias.mutable_data()[0] = bias;
    const float v = head_forward(Tensor<float>(Shape{4}, 1.0f), p, Mode::eval, rng).item();
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
}

TEST(Head, WidthMismatchIsConfigError) {
  const auto p = HeadParams<double>::zeros(8, HeadConfig{});
  RngStream rng;
  EXPECT_THROW(head_forward(TD(Shape{9}), p, Mode::eval, rng), ConfigError);
}

TEST(Head, FoldedStandardizationMatchesExplicit) {
  auto p = random_head(6, 9);
  std::mt19937_64 gen(10);
  const auto z = random_tensor(Shape{6}, gen, 0.5, 1.0);
  const std::vector<double> mean{0.7, 0.6, 0.8, 0.75, 0.65, 0.7}, std{0.1, 0.05, 0.2, 0.08, 0.12, 0.3};
  std::vector<double> zs(6);
  for (std::size_t i = 0; i < 6; ++i) zs[i] = (z[i] - mean[i]) / std[i];
  RngStream rng;
  const double explicit_logit = head_logit(TD(Shape{6}, zs), p, Mode::eval, rng).item();
  fold_input_standardization(p, mean, std);
  EXPECT_NEAR(head_logit(z, p, Mode::eval, rng).item(), explicit_logit, 1e-10);
  EXPECT_THROW(fold_input_standardization(p, mean, std::vector<double>(6, 0.0)), ParameterError);
}

TEST(Bce, Examples) {
  EXPECT_NEAR(bce_loss(TD(Shape{1}, 0.5), 1).item(), std::log(2.0), 1e-12);
  EXPECT_NEAR(bce_loss(TD(Shape{1}, 0.2), 0).item(), -std::log(0.8), 1e-12);
  EXPECT_LT(bce_loss(TD(Shape{1}, 1.0 - 1e-9), 1).item(), 1e-6);
  EXPECT_NEAR(bce_loss(TD(Shape{1}, 0.5), 1, 3.0).item(), 3.0 * std::log(2.0), 1e-12);
  EXPECT_TRUE(std::isfinite(bce_loss(TD(Shape{1}, 0.0), 1).item()));
  EXPECT_THROW(bce_loss(TD(Shape{1}, 0.5), 2), LabelError);
  EXPECT_THROW(bce_with_logit(TD(Shape{1}, 0.5), -1), LabelError);
}

TEST(Bce, MonotoneInProbability) {
  double prev1 = INFINITY, prev0 = -INFINITY;
  for (int i = 0; i <= 1000; ++i) {
    const double p = i / 1000.0;
    const double l1 = bce_loss(TD(Shape{1}, p), 1).item();
    const double l0 = bce_loss(TD(Shape{1}, p), 0).item();
    EXPECT_LE(l1, prev1);
    EXPECT_GE(l0, prev0);
    prev1 = l1;
    prev0 = l0;
  }
}

TEST(Bce, LogitFormAgreesWithProbabilityForm) {
  for (double logit : {-6.0, -1.0, 0.0, 0.7, 5.0}) {
    for (int y : {0, 1}) {
      const double p = 1.0 / (1.0 + std::exp(-logit));
      EXPECT_NEAR(bce_with_logit(TD(Shape{1}, logit), y, 1.7).item(), bce_loss(TD(Shape{1}, p), y, 1.7).item(), 1e-12);
    }
  }
}

TEST(Bce, GradientWithRespectToLogit) {
  std::mt19937_64 gen(11);
  for (int y : {0, 1}) {
    const double err = grad_check(
        [y](const std::vector<TD>& in) { return bce_loss(ops::sigmoid(in[0]), y, 1.3); },
        {random_tensor(Shape{1}, gen, -3, 3)});
    EXPECT_LT(err, 1e-6);
    const double err2 = grad_check(
        [y](const std::vector<TD>& in) { return bce_with_logit(in[0], y, 1.3); }, {random_tensor(Shape{1}, gen, -3, 3)});
    EXPECT_LT(err2, 1e-6);
  }
}
