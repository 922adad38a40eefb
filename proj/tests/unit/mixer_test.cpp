#include <gtest/gtest.h>

#include <cmath>

#include "finite_diff.hpp"
#include "generators.hpp"
#include "layermix/errors.hpp"
#include "layermix/mixer.hpp"

namespace layermix {
namespace {

using testing::flat;
using testing::max_grad_error;
using testing::kFdTolerance;

Eigen::MatrixXd example_h() {
  Eigen::MatrixXd h(3, 2);
  h << 1, 2, 3, 4, 5, 6;
  return h;
}

TEST(Softmax, Examples) {
  const auto a = softmax<double>(Eigen::VectorXd::Zero(3));
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(a(i), 1.0 / 3.0, 1e-15);
  Eigen::VectorXd w(2);
  w << std::log(2.0), 0.0;
  const auto b = softmax<double>(w);
  EXPECT_NEAR(b(0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(b(1), 1.0 / 3.0, 1e-15);
  w << 1000.0, 0.0;
  const auto c = softmax<double>(w);
  EXPECT_TRUE(c.allFinite());
  EXPECT_NEAR(c(0), 1.0, 1e-15);
  EXPECT_NEAR(c(1), 0.0, 1e-15);
}

TEST(Softmax, SumsToOneProperty) {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto s = softmax<double>(testing::random_vector(1 + rng.below(6), rng, 5.0));
    EXPECT_NEAR(s.sum(), 1.0, 1e-12);
    EXPECT_TRUE((s.array() > 0.0).all());
  }
}

TEST(MixScheme, ParseAndPrint) {
  EXPECT_EQ(MixScheme::parse("layer:2"), MixScheme::individual(2));
  EXPECT_EQ(MixScheme::parse("concat"), MixScheme::concat());
  EXPECT_EQ(MixScheme::parse("avg"), MixScheme::fixed_average());
  EXPECT_EQ(MixScheme::parse("wavg:0,1"), MixScheme::learned_weighted({0, 1}));
  for (const char* s : {"layer:0", "concat", "avg", "wavg:0,1,2", "wavg:2"}) {
    EXPECT_EQ(MixScheme::parse(s).to_string(), s);
  }
}

TEST(MixScheme, RejectsMalformed) {
  for (const char* s : {"", "layer", "layer:", "layer:x", "layer:-1", "wavg:", "wavg:0,,1",
                        "wavg:0,0", "sum", "concat:1", "wavg:1,a"}) {
    EXPECT_THROW(MixScheme::parse(s), ConfigError) << s;
  }
}

TEST(MixScheme, ValidateRange) {
  EXPECT_NO_THROW(MixScheme::parse("wavg:0,2").validate(3));
  EXPECT_THROW(MixScheme::parse("wavg:0,9").validate(3), ConfigError);
  EXPECT_THROW(MixScheme::parse("layer:3").validate(3), ConfigError);
}

TEST(MixForward, Examples) {
  const auto h = example_h();
  const auto avg = mix_forward<double>(h, MixScheme::fixed_average(), {});
  EXPECT_EQ(avg, Eigen::Vector2d(3, 4));

  auto all = MixScheme::learned_weighted({0, 1, 2});
  auto p = MixParams<double>::initial(all);
  p.gamma = 2.0;
  const auto w = mix_forward<double>(h, all, p);
  EXPECT_NEAR(w(0), 6.0, 1e-12);
  EXPECT_NEAR(w(1), 8.0, 1e-12);

  auto sub = MixScheme::learned_weighted({0, 1});
  auto q = MixParams<double>::initial(sub);
  q.logits << std::log(3.0), 0.0;
  const auto v = mix_forward<double>(h, sub, q);
  EXPECT_NEAR(v(0), 1.5, 1e-12);
  EXPECT_NEAR(v(1), 2.5, 1e-12);

  Eigen::VectorXd cat(6);
  cat << 1, 2, 3, 4, 5, 6;
  EXPECT_EQ(mix_forward<double>(h, MixScheme::concat(), {}), cat);
  EXPECT_EQ(mix_forward<double>(h, MixScheme::individual(1), {}), Eigen::Vector2d(3, 4));
}

TEST(MixForward, ShapeMismatch) {
  EXPECT_THROW(mix_forward<double>(example_h(), MixScheme::individual(5), {}), ShapeError);
  auto sub = MixScheme::learned_weighted({0, 1});
  MixParams<double> bad;
  bad.logits = Eigen::VectorXd::Zero(3);
  EXPECT_THROW(mix_forward<double>(example_h(), sub, bad), ShapeError);
}

TEST(OutputDim, Examples) {
  EXPECT_EQ(output_dim(MixScheme::concat(), 3, 1024), 3072);
  EXPECT_EQ(output_dim(MixScheme::individual(1), 3, 1024), 1024);
  EXPECT_EQ(output_dim(MixScheme::learned_weighted({0, 1}), 3, 8), 8);
}

TEST(MixBackward, Examples) {
  const auto h = example_h();
  const Eigen::Vector2d g(0.3, -1.2);
  const auto avg = mix_backward<double>(g, h, MixScheme::fixed_average(), {});
  for (int j = 0; j < 3; ++j) {
    EXPECT_NEAR(avg.layers(j, 0), 0.1, 1e-15);
    EXPECT_NEAR(avg.layers(j, 1), -0.4, 1e-15);
  }
  EXPECT_EQ(avg.logits.size(), 0);
  EXPECT_EQ(avg.gamma, 0.0);

  auto sub = MixScheme::learned_weighted({0, 1});
  const auto r = mix_backward<double>(g, h, sub, MixParams<double>::initial(sub));
  EXPECT_EQ(r.layers(2, 0), 0.0);
  EXPECT_EQ(r.layers(2, 1), 0.0);
}

double dot_loss(const Eigen::MatrixXd& h, const MixScheme& scheme, const MixParams<double>& p,
                const Eigen::VectorXd& g) {
  return g.dot(mix_forward<double>(h, scheme, p));
}

TEST(MixBackward, FiniteDifferences) {
  Rng rng(11);
  const std::vector<MixScheme> schemes = {
      MixScheme::individual(1), MixScheme::concat(), MixScheme::fixed_average(),
      MixScheme::learned_weighted({0, 1, 2}), MixScheme::learned_weighted({0, 1}),
      MixScheme::learned_weighted({2})};
  for (const auto& scheme : schemes) {
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::MatrixXd h = testing::random_matrix(3, 4, rng);
      auto p = MixParams<double>::initial(scheme);
      if (scheme.has_params()) {
        p.logits = testing::random_vector(p.logits.size(), rng);
        p.gamma = rng.uniform(0.5, 2.0);
      }
      const Eigen::VectorXd g = testing::random_vector(output_dim(scheme, 3, 4), rng);
      const auto grad = mix_backward<double>(g, h, scheme, p);
      auto f = [&] { return dot_loss(h, scheme, p, g); };
      EXPECT_LT(max_grad_error(flat(h), testing::cflat(grad.layers), f), kFdTolerance)
          << scheme.to_string();
      if (scheme.has_params()) {
        EXPECT_LT(max_grad_error(flat(p.logits), testing::cflat(grad.logits), f), kFdTolerance);
        EXPECT_LT(max_grad_error(std::span(&p.gamma, 1), std::span(&grad.gamma, 1), f),
                  kFdTolerance);
      }
    }
  }
}

TEST(MixProperties, EquivalenceExclusionShiftHomogeneity) {
  Rng rng(5);
  const auto all = MixScheme::learned_weighted({0, 1, 2});
  const auto sub = MixScheme::learned_weighted({0, 1});
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::MatrixXd h = testing::random_matrix(3, 6, rng, 3.0);
    const auto avg = mix_forward<double>(h, MixScheme::fixed_average(), {});
    const auto w0 = mix_forward<double>(h, all, MixParams<double>::initial(all));
    EXPECT_LE((avg - w0).cwiseAbs().maxCoeff(), 1e-12);

    auto q = MixParams<double>::initial(sub);
    q.logits = testing::random_vector(2, rng);
    q.gamma = rng.uniform(0.1, 3.0);
    Eigen::MatrixXd perturbed = h;
    perturbed.row(2) = testing::random_vector(6, rng, 100.0).transpose();
    EXPECT_EQ(mix_forward<double>(h, sub, q), mix_forward<double>(perturbed, sub, q));

    auto shifted = q;
    shifted.logits.array() += rng.uniform(-50.0, 50.0);
    EXPECT_LE((mix_forward<double>(h, sub, q) - mix_forward<double>(h, sub, shifted))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-12);

    auto scaled = q;
    scaled.gamma *= 2.5;
    const auto base = mix_forward<double>(h, sub, q);
    const auto big = mix_forward<double>(h, sub, scaled);
    EXPECT_LE((big - 2.5 * base).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + base.cwiseAbs().maxCoeff()));
    Eigen::Index a, b;
    base.maxCoeff(&a);
    big.maxCoeff(&b);
    EXPECT_EQ(a, b);
  }
}

TEST(LogitPenalty, Examples) {
  auto sub = MixScheme::learned_weighted({0, 1});
  auto p = MixParams<double>::initial(sub);
  p.logits << 1.0, -1.0;
  const auto zero = logit_penalty(p, 0.0);
  EXPECT_EQ(zero.loss, 0.0);
  EXPECT_EQ(zero.grad, Eigen::Vector2d::Zero());
  const auto one = logit_penalty(p, 1.0);
  EXPECT_EQ(one.loss, 2.0);
  EXPECT_EQ(one.grad, Eigen::Vector2d(2.0, -2.0));
  EXPECT_THROW(logit_penalty(p, -0.1), ConfigError);
}

TEST(LogitPenalty, FiniteDifferences) {
  Rng rng(9);
  auto scheme = MixScheme::learned_weighted({0, 1, 2});
  for (int trial = 0; trial < 20; ++trial) {
    auto p = MixParams<double>::initial(scheme);
    p.logits = testing::random_vector(3, rng);
    const double lambda = rng.uniform(0.0, 2.0);
    const auto r = logit_penalty(p, lambda);
    auto f = [&] { return logit_penalty(p, lambda).loss; };
    EXPECT_LT(max_grad_error(flat(p.logits), testing::cflat(r.grad), f), kFdTolerance);
  }
}

TEST(MixSentence, MatchesPerTokenForward) {
  Rng rng(2);
  auto s = testing::random_sentence(3, 4, 5, rng);
  auto scheme = MixScheme::learned_weighted({0, 2});
  auto p = MixParams<double>::initial(scheme);
  p.logits << 0.3, -0.7;
  const auto m = mix_sentence<double>(s, scheme, p);
  ASSERT_EQ(m.cols(), 5);
  for (std::size_t t = 0; t < 5; ++t) {
    const auto expect = mix_forward<double>(token_layers<double>(s, t), scheme, p);
    EXPECT_LE((m.col(static_cast<Eigen::Index>(t)) - expect).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(MixSentence, BackwardFiniteDifferences) {
  Rng rng(4);
  auto s = testing::random_sentence(3, 4, 5, rng);
  for (auto& v : s.values) v *= 0.1f;
  auto scheme = MixScheme::learned_weighted({0, 1, 2});
  for (int trial = 0; trial < 20; ++trial) {
    auto p = MixParams<double>::initial(scheme);
    p.logits = testing::random_vector(3, rng);
    p.gamma = rng.uniform(0.5, 1.5);
    const Eigen::MatrixXd g = testing::random_matrix(4, 5, rng);
    auto grad = MixParams<double>::initial(scheme);
    grad.logits.setZero();
    grad.gamma = 0.0;
    mix_sentence_backward<double>(g, s, scheme, p, grad);
    auto f = [&] { return (g.array() * mix_sentence<double>(s, scheme, p).array()).sum(); };
    EXPECT_LT(max_grad_error(flat(p.logits), testing::cflat(grad.logits), f), kFdTolerance);
    EXPECT_LT(max_grad_error(std::span(&p.gamma, 1), std::span(&grad.gamma, 1), f), kFdTolerance);
  }
}

}  // namespace
}  // namespace layermix
