#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "radtriage/errors.hpp"
#include "radtriage/grad_check.hpp"
#include "radtriage/ops.hpp"
#include "test_util.hpp"

using namespace radtriage;
using radtriage::testing::random_tensor;
using TD = Tensor<double>;

namespace {

TD mat(std::size_t r, std::size_t c, std::vector<double> v) { return TD(Shape{r, c}, std::move(v)); }

double gelu_ref(double x) {
  return 0.5 * x * (1.0 + std::tanh(std::sqrt(2.0 / std::numbers::pi) * (x + 0.044715 * x * x * x)));
}

}  // namespace

TEST(Matmul, IdentityAndHandExample) {
  std::mt19937_64 gen(1);
  const auto m = random_tensor(Shape{3, 4}, gen);
  const auto eye = mat(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const auto out = ops::matmul(eye, m);
  for (std::size_t i = 0; i < m.numel(); ++i) EXPECT_EQ(out[i], m[i]);

  const auto c = ops::matmul(mat(2, 2, {1, 2, 3, 4}), mat(2, 1, {0, 1}));
  EXPECT_EQ(c.shape(), (Shape{2, 1}));
  EXPECT_EQ(c[0], 2.0);
  EXPECT_EQ(c[1], 4.0);
}

TEST(Matmul, MatchesTripleLoop) {
  std::mt19937_64 gen(2);
  const auto a = random_tensor(Shape{5, 4}, gen), b = random_tensor(Shape{4, 3}, gen);
  const auto c = ops::matmul(a, b);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0;
      for (std::size_t t = 0; t < 4; ++t) s += a[i * 4 + t] * b[t * 3 + j];
      EXPECT_NEAR(c[i * 3 + j], s, 1e-12);
    }
}

TEST(Matmul, Errors) {
  EXPECT_THROW(ops::matmul(TD(Shape{2, 3}), TD(Shape{2, 3})), DimensionError);
  TD bad(Shape{1, 1}, std::vector<double>{std::nan("")});
  EXPECT_THROW(ops::matmul(bad, TD(Shape{1, 1})), NumericError);
}

TEST(Linear, MatchesExplicitFormula) {
  std::mt19937_64 gen(3);
  const auto x = random_tensor(Shape{2, 3}, gen), w = random_tensor(Shape{4, 3}, gen), b = random_tensor(Shape{4}, gen);
  const auto y = ops::linear(x, w, b);
  ASSERT_EQ(y.shape(), (Shape{2, 4}));
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t o = 0; o < 4; ++o) {
      double s = b[o];
      for (std::size_t i = 0; i < 3; ++i) s += w[o * 3 + i] * x[n * 3 + i];
      EXPECT_NEAR(y[n * 4 + o], s, 1e-12);
    }
  const auto v = ops::linear(TD(Shape{3}, 1.0), w, b);
  EXPECT_EQ(v.shape(), (Shape{4}));
}

TEST(LayerNorm, Examples) {
  const TD ones(Shape{3}, 1.0), zeros(Shape{3}, 0.0);
  const auto y = ops::layer_norm(TD(Shape{3}, 2.5), ones, zeros);
  for (double v : y.data()) EXPECT_EQ(v, 0.0);

  const auto z = ops::layer_norm(TD(Shape{2}, std::vector<double>{1, -1}), TD(Shape{2}, 1.0), TD(Shape{2}, 0.0), 1e-15);
  EXPECT_NEAR(z[0], 1.0, 1e-12);
  EXPECT_NEAR(z[1], -1.0, 1e-12);
}

TEST(LayerNorm, MatchesDirectFormula) {
  std::mt19937_64 gen(4);
  const auto x = random_tensor(Shape{8}, gen, -3, 3), g = random_tensor(Shape{8}, gen), b = random_tensor(Shape{8}, gen);
  const auto y = ops::layer_norm(x, g, b);
  double mean = 0, var = 0;
  for (double v : x.data()) mean += v / 8;
  for (double v : x.data()) var += (v - mean) * (v - mean) / 8;
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_NEAR(y[i], g[i] * (x[i] - mean) / std::sqrt(var + kLayerNormEps) + b[i], 1e-10);
  }
}

TEST(LayerNorm, RejectsBadParams) {
  EXPECT_THROW(ops::layer_norm(TD(Shape{2, 3}), TD(Shape{2}, 1.0), TD(Shape{2})), DimensionError);
  EXPECT_THROW(ops::layer_norm(TD(Shape{3}), TD(Shape{3}, 1.0), TD(Shape{3}), 0.0), ParameterError);
}

TEST(Gelu, Examples) {
  const auto y = ops::gelu_tanh(TD(Shape{3}, std::vector<double>{0.0, 10.0, 1.0}));
  EXPECT_EQ(y[0], 0.0);
  EXPECT_LT(std::abs(y[1] - 10.0), 1e-6);
  EXPECT_DOUBLE_EQ(y[2], gelu_ref(1.0));
}

TEST(Elementwise, ReluSigmoidSoftmax) {
  const auto r = ops::relu(TD(Shape{3}, std::vector<double>{-1, 0, 2}));
  EXPECT_EQ(r[0], 0.0);
  EXPECT_EQ(r[1], 0.0);
  EXPECT_EQ(r[2], 2.0);
  EXPECT_EQ(ops::sigmoid(TD(Shape{1}, 0.0))[0], 0.5);
  const auto s = ops::softmax(TD(Shape{4}, 3.0), 0);
  for (double v : s.data()) EXPECT_DOUBLE_EQ(v, 0.25);
  EXPECT_THROW(ops::softmax(TD(Shape{4}), 1), DimensionError);
}

TEST(Elementwise, SigmoidStaysInsideUnitIntervalForModerateInputs) {
  const auto s = ops::sigmoid(TD(Shape{4}, std::vector<double>{-30, -5, 5, 30}));
  for (double v : s.data()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Softmax, StableForHugeLogits) {
  std::mt19937_64 gen(5);
  for (int rep = 0; rep < 20; ++rep) {
    const auto x = random_tensor(Shape{3, 6}, gen, -1e4, 1e4);
    for (std::size_t axis : {0u, 1u}) {
      const auto y = ops::softmax(x, axis);
      if (axis == 1) {
        for (std::size_t i = 0; i < 3; ++i) {
          double s = 0;
          for (std::size_t j = 0; j < 6; ++j) {
            EXPECT_GE(y[i * 6 + j], 0.0);
            s += y[i * 6 + j];
          }
          EXPECT_NEAR(s, 1.0, 1e-9);
        }
      } else {
        for (std::size_t j = 0; j < 6; ++j) {
          double s = 0;
          for (std::size_t i = 0; i < 3; ++i) s += y[i * 6 + j];
          EXPECT_NEAR(s, 1.0, 1e-9);
        }
      }
    }
  }
}

TEST(Dropout, EvalAndZeroRateAreIdentity) {
  std::mt19937_64 gen(6);
  const auto x = random_tensor<float>(Shape{50}, gen);
  RngStream rng(1);
  const auto e = ops::dropout(x, 0.3, Mode::eval, rng);
  const auto z = ops::dropout(x, 0.0, Mode::train, rng);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    EXPECT_EQ(e[i], x[i]);
    EXPECT_EQ(z[i], x[i]);
  }
  EXPECT_EQ(rng.counter(), 0u);
}

TEST(Dropout, InvertedScalingPreservesMean) {
  RngStream rng(7);
  const auto y = ops::dropout(Tensor<double>(Shape{1000000}, 1.0), 0.3, Mode::train, rng);
  double mean = 0;
  std::size_t zeros = 0;
  for (double v : y.data()) {
    mean += v;
    if (v == 0.0) ++zeros;
    else EXPECT_DOUBLE_EQ(v, 1.0 / 0.7);
  }
  EXPECT_NEAR(mean / 1e6, 1.0, 0.01);
  EXPECT_NEAR(static_cast<double>(zeros) / 1e6, 0.3, 0.005);
}

TEST(Dropout, RejectsRateOne) {
  RngStream rng(1);
  EXPECT_THROW(ops::dropout(TD(Shape{2}), 1.0, Mode::train, rng), ParameterError);
  EXPECT_THROW(ops::dropout(TD(Shape{2}), -0.1, Mode::eval, rng), ParameterError);
}

TEST(Dropout, ReplaysFromSameStream) {
  std::mt19937_64 gen(8);
  const auto x = random_tensor<float>(Shape{64}, gen);
  RngStream a(11, 5), b(11, 5);
  const auto ya = ops::dropout(x, 0.4, Mode::train, a);
  const auto yb = ops::dropout(x, 0.4, Mode::train, b);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(ya[i], yb[i]);
}

TEST(MeanRows, Examples) {
  const auto z = ops::mean_rows(mat(2, 2, {1, 3, 3, 5}));
  EXPECT_EQ(z[0], 2.0);
  EXPECT_EQ(z[1], 4.0);
  const auto one = ops::mean_rows(mat(1, 3, {1, 2, 3}));
  EXPECT_EQ(one[2], 3.0);
}

namespace {

ops::AttentionWeights<double> random_attention(std::size_t d, std::mt19937_64& gen) {
  return {random_tensor(Shape{d, d}, gen), random_tensor(Shape{d}, gen), random_tensor(Shape{d, d}, gen),
          random_tensor(Shape{d}, gen),    random_tensor(Shape{d, d}, gen), random_tensor(Shape{d}, gen),
          random_tensor(Shape{d, d}, gen), random_tensor(Shape{d}, gen)};
}

// Single-head dense formula: out_proj(softmax(Q K^T / sqrt(D)) V)
std::vector<double> dense_attention(const TD& x, const ops::AttentionWeights<double>& w) {
  const std::size_t n = x.dim(0), d = x.dim(1);
  auto proj = [&](const TD& W, const TD& b, const std::vector<double>& in) {
    std::vector<double> out(n * d);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t o = 0; o < d; ++o) {
        double s = b[o];
        for (std::size_t c = 0; c < d; ++c) s += W[o * d + c] * in[i * d + c];
        out[i * d + o] = s;
      }
    return out;
  };
  const std::vector<double> xv(x.data().begin(), x.data().end());
  const auto q = proj(w.q_weight, w.q_bias, xv), k = proj(w.k_weight, w.k_bias, xv), v = proj(w.v_weight, w.v_bias, xv);
  std::vector<double> ctx(n * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> s(n);
    double z = 0;
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0;
      for (std::size_t c = 0; c < d; ++c) dot += q[i * d + c] * k[j * d + c];
      s[j] = std::exp(dot / std::sqrt(static_cast<double>(d)));
      z += s[j];
    }
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t c = 0; c < d; ++c) ctx[i * d + c] += s[j] / z * v[j * d + c];
  }
  return proj(w.out_weight, w.out_bias, ctx);
}

}  // namespace

TEST(Attention, SingleHeadMatchesDenseOracle) {
  std::mt19937_64 gen(9);
  const auto x = random_tensor(Shape{3, 4}, gen);
  const auto w = random_attention(4, gen);
  const auto y = ops::multi_head_attention(x, w, 1);
  const auto ref = dense_attention(x, w);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-10);
}

TEST(Attention, SingleTokenAttendsToItself) {
  std::mt19937_64 gen(10);
  const auto x = random_tensor(Shape{1, 4}, gen);
  const auto w = random_attention(4, gen);
  const auto y = ops::multi_head_attention(x, w, 2);
  const auto expected = ops::linear(ops::linear(x, w.v_weight, w.v_bias), w.out_weight, w.out_bias);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(y[i], expected[i], 1e-12);
}

TEST(Attention, PermutationEquivariant) {
  std::mt19937_64 gen(11);
  const auto x = random_tensor(Shape{4, 6}, gen);
  const auto w = random_attention(6, gen);
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  std::vector<double> px(24);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < 6; ++c) px[i * 6 + c] = x[perm[i] * 6 + c];
  const auto y = ops::multi_head_attention(x, w, 3);
  const auto yp = ops::multi_head_attention(TD(Shape{4, 6}, px), w, 3);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(yp[i * 6 + c], y[perm[i] * 6 + c], 1e-12);
}

TEST(Attention, HeadCountMustDivideWidth) {
  std::mt19937_64 gen(12);
  EXPECT_THROW(ops::multi_head_attention(random_tensor(Shape{2, 6}, gen), random_attention(6, gen), 4), ConfigError);
}

// Spot gradient checks; the acceptance binary runs the full 20-point suite.
TEST(GradCheck, LinearIsExact) {
  std::mt19937_64 gen(13);
  const double err = grad_check([](const std::vector<TD>& in) { return ops::linear(in[0], in[1], in[2]); },
                                {random_tensor(Shape{3, 4}, gen), random_tensor(Shape{2, 4}, gen), random_tensor(Shape{2}, gen)});
  EXPECT_LT(err, 1e-10);
}

TEST(GradCheck, GeluRandomVector) {
  std::mt19937_64 gen(14);
  const double err = grad_check([](const std::vector<TD>& in) { return ops::gelu_tanh(in[0]); },
                                {random_tensor(Shape{16}, gen, -3, 3)});
  EXPECT_LT(err, 1e-5);
}

TEST(GradCheck, SoftmaxLayerNormAttention) {
  std::mt19937_64 gen(15);
  EXPECT_LT(grad_check([](const std::vector<TD>& in) { return ops::softmax(in[0], 1); },
                       {random_tensor(Shape{3, 5}, gen, -2, 2)}),
            1e-6);
  EXPECT_LT(grad_check([](const std::vector<TD>& in) { return ops::layer_norm(in[0], in[1], in[2]); },
                       {random_tensor(Shape{3, 5}, gen), random_tensor(Shape{5}, gen), random_tensor(Shape{5}, gen)}),
            1e-6);
  EXPECT_LT(grad_check([](const std::vector<TD>& in) { return ops::attention(in[0], in[1], in[2], 2); },
                       {random_tensor(Shape{3, 4}, gen), random_tensor(Shape{3, 4}, gen), random_tensor(Shape{3, 4}, gen)}),
            1e-6);
}

TEST(GradCheck, ReportsNonFinite) {
  TD x(Shape{2}, std::vector<double>{1.0, 2.0});
  EXPECT_THROW(grad_check([](const std::vector<TD>& in) { return ops::scale(in[0], std::nan("")); }, {x}),
               NumericError);
}
