#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "gazegan/cyclegan.hpp"
#include "gazegan/error.hpp"

using namespace gazegan;
using namespace gazegan::engine;

namespace {

Tensor<double> filled(std::vector<double> v) {
  Tensor<double> t(1, 1, 1, static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) t[i] = v[i];
  return t;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST(AdversarialObjective, MatchesDirectLogs) {
  const std::vector<double> real = {0.9, 0.7, 0.6};
  const std::vector<double> fake = {0.2, 0.4};
  const double expected = (std::log(0.9) + std::log(0.7) + std::log(0.6)) / 3 + (std::log(0.8) + std::log(0.6)) / 2;
  EXPECT_NEAR(adversarial_objective(real, fake), expected, 1e-12);
  EXPECT_NEAR(adversarial_objective(std::vector<double>{0.5}, std::vector<double>{0.5}), 2 * std::log(0.5), 1e-12);
}

TEST(AdversarialObjective, GridMaximumAtConfidentDiscriminator) {
  double best = -1e300;
  double best_real = 0, best_fake = 0;
  for (int i = 1; i <= 21; ++i) {
    for (int j = 1; j <= 21; ++j) {
      const double r = i / 22.0, f = j / 22.0;
      const double v = adversarial_objective(std::vector<double>{r, r}, std::vector<double>{f});
      if (v > best) {
        best = v;
        best_real = r;
        best_fake = f;
      }
    }
  }
  EXPECT_DOUBLE_EQ(best_real, 21 / 22.0);
  EXPECT_DOUBLE_EQ(best_fake, 1 / 22.0);
  EXPECT_GT(adversarial_objective(std::vector<double>{1 - 1e-9}, std::vector<double>{1e-9}), -1e-8);
}

TEST(AdversarialObjective, PatchOrderInvariant) {
  const std::vector<double> real = {0.9, 0.2, 0.6, 0.4}, real_perm = {0.4, 0.6, 0.9, 0.2};
  const std::vector<double> fake = {0.3, 0.7};
  EXPECT_DOUBLE_EQ(adversarial_objective(real, fake), adversarial_objective(real_perm, fake));
}

TEST(AdversarialObjective, RejectsScoresOutsideOpenInterval) {
  const std::vector<double> ok = {0.5};
  for (double bad : {0.0, 1.0, -0.1, 1.2, std::numeric_limits<double>::quiet_NaN()}) {
    const std::vector<double> b = {bad};
    try {
      adversarial_objective(b, ok);
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::DomainError);
    }
    EXPECT_THROW(adversarial_objective(ok, b), Error);
  }
  EXPECT_THROW(adversarial_objective(std::vector<double>{}, ok), Error);
}

TEST(LeastSquaresObjective, KnownValues) {
  EXPECT_DOUBLE_EQ(least_squares_discriminator_objective(1.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(least_squares_discriminator_objective(0.0, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(least_squares_discriminator_objective(0.5, 0.5), 0.25);
  EXPECT_DOUBLE_EQ(least_squares_discriminator_objective(3.0, -2.0), 4.0);
}

TEST(CompositeLoss, WeightsComponents) {
  TrainingConfig c;
  EXPECT_NEAR(composite_generator_loss(0.3, 0.1, 0.1, 0.05, c), 2.55, 1e-12);
  EXPECT_EQ(composite_generator_loss(0, 0, 0, 0, c), 0.0);
  EXPECT_DOUBLE_EQ(composite_generator_loss(0.5, 0.1, 0.2, 0.3, c), 0.5 + 10 * 0.3 + 5 * 0.3);
  c.lambda_cycle = 2;
  c.lambda_identity = 0;
  EXPECT_DOUBLE_EQ(composite_generator_loss(1, 1, 1, 100, c), 5);
  try {
    composite_generator_loss(std::nan(""), 0, 0, 0, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonFiniteLoss);
  }
  EXPECT_THROW(composite_generator_loss(0, std::numeric_limits<double>::infinity(), 0, 0, c), Error);
}

TEST(L1Loss, ValueAndGradient) {
  const auto p = filled({1.0, -2.0, 0.5, 3.0});
  const auto t = filled({0.0, 0.0, 1.0, 3.5});
  const auto l = l1_loss(p, t);
  EXPECT_DOUBLE_EQ(l.value, (1.0 + 2.0 + 0.5 + 0.5) / 4);
  EXPECT_DOUBLE_EQ(l.grad[0], 0.25);
  EXPECT_DOUBLE_EQ(l.grad[1], -0.25);
  EXPECT_DOUBLE_EQ(l.grad[2], -0.25);
  EXPECT_DOUBLE_EQ(l.grad[3], -0.25);
  EXPECT_THROW(l1_loss(p, filled({1.0})), Error);
}

TEST(L1Loss, CycleAndIdentityAreMeanAbsoluteDifference) {
  Tensor<float> a(1, 3, 2, 2, 0.5f), b(1, 3, 2, 2, -0.5f);
  EXPECT_NEAR(cycle_consistency_loss(a, b), 1.0, 1e-7);
  EXPECT_NEAR(identity_loss(a, a), 0.0, 1e-12);
  b[0] = 0.5f;
  EXPECT_NEAR(cycle_consistency_loss(a, b), 11.0 / 12.0, 1e-7);
}

TEST(L1Loss, MatchesLoopOracle) {
  std::mt19937_64 rng(11);
  std::normal_distribution<float> d(0, 1);
  Tensor<float> x(2, 3, 4, 4), y(2, 3, 4, 4);
  for (auto& v : x.span()) v = d(rng);
  for (auto& v : y.span()) v = d(rng);
  double loop = 0;
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c)
      for (int h = 0; h < 4; ++h)
        for (int w = 0; w < 4; ++w) loop += std::abs(static_cast<double>(x.at(n, c, h, w)) - y.at(n, c, h, w));
  EXPECT_NEAR(cycle_consistency_loss(x, y), loop / 96, 1e-6);
  EXPECT_NEAR(identity_loss(x, y), loop / 96, 1e-6);
  Tensor<float> q(1, 3, 2, 2, 0.25f), neg(1, 3, 2, 2, -0.25f), shifted(1, 3, 2, 2, 0.75f);
  EXPECT_NEAR(identity_loss(q, neg), 0.5, 1e-7);
  EXPECT_NEAR(cycle_consistency_loss(q, shifted), 0.5, 1e-7);
  EXPECT_THROW(cycle_consistency_loss(x, q), Error);
}

TEST(GeneratorAdversarial, LeastSquares) {
  const auto s = filled({1.0, 0.0, 2.0});
  const auto l = generator_adversarial_loss(s, AdversarialForm::LeastSquares);
  EXPECT_DOUBLE_EQ(l.value, (0 + 1 + 1) / 3.0);
  EXPECT_DOUBLE_EQ(l.grad[0], 0.0);
  EXPECT_DOUBLE_EQ(l.grad[1], -2.0 / 3);
  EXPECT_DOUBLE_EQ(l.grad[2], 2.0 / 3);
}

TEST(GeneratorAdversarial, NonSaturatingLogForm) {
  const auto s = filled({-30.0, -1.0, 0.0, 2.5, 40.0});
  const auto l = generator_adversarial_loss(s, AdversarialForm::LogLikelihood);
  double expected = 0;
  for (double v : {-30.0, -1.0, 0.0, 2.5, 40.0}) expected += -std::log(sigmoid(v));
  EXPECT_NEAR(l.value, expected / 5, 1e-9);
  EXPECT_TRUE(std::isfinite(l.value));
  // Gradient does not vanish when the discriminator confidently rejects.
  EXPECT_LT(l.grad[0], -0.19);
  const double h = 1e-6;
  for (std::size_t i = 0; i < 5; ++i) {
    auto up = s, down = s;
    up[i] += h;
    down[i] -= h;
    const double fd = (generator_adversarial_loss(up, AdversarialForm::LogLikelihood).value -
                       generator_adversarial_loss(down, AdversarialForm::LogLikelihood).value) /
                      (2 * h);
    EXPECT_NEAR(l.grad[i], fd, 1e-7);
  }
}

TEST(DiscriminatorLoss, LeastSquaresIsHalfWeighted) {
  const auto s = filled({1.0, 0.0});
  const auto l = discriminator_loss(s, filled({0.0, 0.0}), AdversarialForm::LeastSquares);
  EXPECT_DOUBLE_EQ(l.value, 0.5 * 0.5);
  // Real at target 1 plus fake at target 0 reproduces the scalar objective.
  for (auto [r, f] : {std::pair{0.3, 0.8}, std::pair{1.2, -0.4}}) {
    const double sum = discriminator_loss(filled({r}), filled({1.0}), AdversarialForm::LeastSquares).value +
                       discriminator_loss(filled({f}), filled({0.0}), AdversarialForm::LeastSquares).value;
    EXPECT_NEAR(sum, least_squares_discriminator_objective(r, f), 1e-12);
  }
}

TEST(DiscriminatorLoss, LogFormIsHalfBinaryCrossEntropy) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> d(0, 3);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> sv, tv;
  for (int i = 0; i < 12; ++i) {
    sv.push_back(d(rng));
    tv.push_back(u(rng));
  }
  const auto s = filled(sv), t = filled(tv);
  const auto l = discriminator_loss(s, t, AdversarialForm::LogLikelihood);
  double bce = 0;
  for (std::size_t i = 0; i < sv.size(); ++i) {
    const double p = sigmoid(sv[i]);
    bce += -(tv[i] * std::log(p) + (1 - tv[i]) * std::log(1 - p));
  }
  EXPECT_NEAR(l.value, 0.5 * bce / 12, 1e-9);
  const double h = 1e-6;
  for (std::size_t i = 0; i < sv.size(); ++i) {
    auto up = s, down = s;
    up[i] += h;
    down[i] -= h;
    const double fd = (discriminator_loss(up, t, AdversarialForm::LogLikelihood).value -
                       discriminator_loss(down, t, AdversarialForm::LogLikelihood).value) /
                      (2 * h);
    EXPECT_NEAR(l.grad[i], fd, 1e-7);
  }
}

TEST(DiscriminatorLoss, ShapeMismatch) {
  try {
    discriminator_loss(filled({1, 2}), filled({1}), AdversarialForm::LeastSquares);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
  }
}

TEST(AdversarialForm, StringRoundTrip) {
  for (auto f : {AdversarialForm::LeastSquares, AdversarialForm::LogLikelihood}) {
    EXPECT_EQ(adversarial_form_from_string(to_string(f)), f);
  }
  EXPECT_THROW(adversarial_form_from_string("wasserstein"), Error);
}
