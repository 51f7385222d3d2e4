#include <gtest/gtest.h>

#include "oracles.hpp"

using gazegan::testing::composite_gradcheck;

class CompositeGradient : public ::testing::TestWithParam<int> {};

TEST_P(CompositeGradient, EachGeneratorGetsItsOwnCompositeGradient) {
  const auto r = composite_gradcheck(static_cast<std::uint64_t>(GetParam()));
  EXPECT_GT(r.parameters, 0u);
  EXPECT_LT(r.g_error, 1e-6);
  EXPECT_LT(r.f_error, 1e-6);
}

INSTANTIATE_TEST_SUITE_P(Seeds, CompositeGradient, ::testing::Range(1, 6));

// This draw puts a LeakyReLU pre-activation within 1e-6 of zero.
TEST(CompositeGradient, KinkInsideDifferenceIntervalIsRefined) {
  const auto r = composite_gradcheck(15);
  EXPECT_GT(r.kinks, 0);
  EXPECT_LT(r.g_error, 1e-6);
  EXPECT_LT(r.f_error, 1e-6);
}
