#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dnrnn/nucleus.hpp"
#include "oracles.hpp"

using namespace dnrnn;

namespace {

// Root of the cluster quadratic for n=10, p=0.1, r=0.001, l+=l-=0.01, x=0.5,
// computed with 40-digit arithmetic.
constexpr double kReferenceZeta = 0.01960052807562014845;

ClusterParams reference_params() { return ClusterParams::make(10, 0.1, 0.001, 0.01, 0.01); }

}  // namespace

TEST(ClusterParams, DerivedConstants) {
  const auto c = reference_params();
  EXPECT_DOUBLE_EQ(c.d(), 0.1);
  // 0.001 + 0.0001 - 0.1 - 0.001 - 0.01 - 0.001
  EXPECT_NEAR(c.C(), -0.1109, 1e-15);
  EXPECT_NO_THROW(c.validate());
}

TEST(ClusterParams, RejectsInvalid) {
  EXPECT_THROW(ClusterParams::make(2, 0.1, 1, 0.01, 0.01), Error);
  EXPECT_THROW(ClusterParams::make(10, 1.0, 1, 0.01, 0.01), Error);
  EXPECT_THROW(ClusterParams::make(10, -0.1, 1, 0.01, 0.01), Error);
  EXPECT_THROW(ClusterParams::make(10, 0.1, 0, 0.01, 0.01), Error);
  EXPECT_THROW(ClusterParams::make(10, 0.1, 1, -0.01, 0.01), Error);
  EXPECT_THROW(ClusterParams::make(10, 0.1, 1, 0.01, NAN), Error);
}

TEST(ZetaInhibitory, Examples) {
  EXPECT_EQ(zeta_inhibitory(0.0, 0.3, 1.0).q, 0.0);
  const auto half = zeta_inhibitory(0.75, 0.0, 1.0);
  EXPECT_DOUBLE_EQ(half.q, 0.5);
  EXPECT_FALSE(half.saturated);
  EXPECT_THROW(zeta_inhibitory(-1.0, 0.0, 1.0), Error);
  EXPECT_THROW(zeta_inhibitory(1.0, INFINITY, 1.0), Error);
}

TEST(ZetaInhibitory, ResidualOnLogUniformDraws) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> e(std::log(1e-4), std::log(1e2));
  for (int i = 0; i < 1000; ++i) {
    const double lp = std::exp(e(gen)), lm = std::exp(e(gen)), r = std::exp(e(gen));
    const auto a = zeta_inhibitory(lp, lm, r);
    ASSERT_GE(a.q, 0.0);
    ASSERT_LE(a.q, 1.0);
    if (!a.saturated) {
      const double residual = a.q * a.q * r + a.q * (r + lm) - lp;
      ASSERT_LT(std::abs(residual), 1e-10 * std::max(1.0, lp)) << lp << " " << lm << " " << r;
    }
  }
}

TEST(ZetaSimple, Examples) {
  EXPECT_DOUBLE_EQ(zeta_simple(1, 1, 1).q, 0.5);
  EXPECT_EQ(zeta_simple(0, 0, 2).q, 0.0);
  const auto sat = zeta_simple(5, 0, 1);
  EXPECT_EQ(sat.q, 1.0);
  EXPECT_TRUE(sat.saturated);
  EXPECT_THROW(zeta_simple(1, 0, 0), Error);
  try {
    zeta_simple(1, 0, 0);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::degenerate_denominator);
  }
}

TEST(Zeta, ZeroExcitationGivesZero) {
  for (double x : {0.0, 0.3, 5.0}) EXPECT_EQ(zeta(ClusterParams::make(17, 0.4, 0.2, 0.0, 0.01), x), 0.0);
}

TEST(Zeta, LinearCaseWhenPIsZero) {
  const auto c = ClusterParams::make(10, 0.0, 1.0, 0.01, 0.0);
  const auto z = zeta_eval(c, 0.0);
  EXPECT_TRUE(z.linear_branch);
  EXPECT_NEAR(z.q, 0.1, 1e-15);
}

TEST(Zeta, ReferenceRoot) {
  const auto c = reference_params();
  const double q = zeta(c, 0.5);
  EXPECT_NEAR(q, kReferenceZeta, 1e-15);
  EXPECT_LT(std::abs(cluster_residual(c, 0.5, q)), 1e-12);
  // independent bisection on the same polynomial
  const double a = c.p() * (c.n() - 1) * (c.lambda_minus() + 0.5);
  const double b = c.C() - c.n() * 0.5;
  EXPECT_NEAR(oracle::bisect_root(a, b, c.d(), 1.0), q, 1e-13);
}

TEST(Zeta, RejectsNegativeInput) {
  EXPECT_THROW(zeta(reference_params(), -1e-9), Error);
  EXPECT_THROW(zeta(reference_params(), NAN), Error);
}

TEST(Zeta, SaturationIsFlaggedNotThrown) {
  // Large excitation relative to losses pushes the selected root above 1.
  const auto c = ClusterParams::make(3, 0.0, 0.001, 5.0, 0.0);
  const auto z = zeta_eval(c, 0.0);
  EXPECT_TRUE(z.saturated);
  EXPECT_EQ(z.q, 1.0);
}

TEST(Zeta, BranchContinuityAtThreshold) {
  // Tune p so that a = p (n-1) l- sits just below the threshold and just above
  // it (a = threshold + 1e-12). Above the threshold the quadratic root must
  // agree with the linear root d / (n x - C) of the same parameters.
  const double n = 10;
  const double lm = 1e-3;
  const double p_edge = kDegenerateLeading / ((n - 1) * lm);
  const auto below = ClusterParams::make(10, p_edge * 0.999, 0.5, 0.02, lm);
  const auto above = ClusterParams::make(10, (kDegenerateLeading + 1e-12) / ((n - 1) * lm), 0.5, 0.02, lm);
  const auto zb = zeta_eval(below, 0.0);
  const auto za = zeta_eval(above, 0.0);
  EXPECT_TRUE(zb.linear_branch);
  EXPECT_FALSE(za.linear_branch);
  EXPECT_NEAR(zb.q, below.d() / (-below.C()), 1e-15);
  EXPECT_NEAR(za.q, above.d() / (-above.C()), 1e-12);
}

TEST(Zeta, MonotoneNonIncreasingInX) {
  for (double lambda : {0.005, 0.01}) {
    for (int n : {3, 10, 50, 200, 500}) {
      for (double p : {0.0, 0.3, 0.6, 0.9}) {
        for (double r : {1e-4, 1e-2, 1.0}) {
          const auto c = ClusterParams::symmetric(n, p, r, lambda);
          double prev = zeta(c, 0.0);
          for (int i = 1; i <= 200; ++i) {
            const double q = zeta(c, 10.0 * i / 200);
            ASSERT_LE(q, prev + 1e-15) << n << " " << p << " " << r;
            prev = q;
          }
        }
      }
    }
  }
}

TEST(Zeta, PZeroClosedForm) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 500; ++i) {
    const int n = 3 + static_cast<int>(u(gen) * 497);
    const double r = 1e-4 + u(gen);
    const double lp = 0.02 * u(gen);
    const double lm = 0.02 * u(gen);
    const double x = 10 * u(gen);
    const double expected = lp * n / (n * lm + n * x + r);
    const double q = zeta(ClusterParams::make(n, 0.0, r, lp, lm), x);
    ASSERT_NEAR(q, std::min(expected, 1.0), 1e-12 * std::max(expected, 1e-300));
  }
}

TEST(ZetaMap, ElementwiseAndErrors) {
  const auto c = reference_params();
  EXPECT_TRUE(zeta_map(ClusterParams::make(10, 0.1, 0.001, 0.0, 0.01), Eigen::MatrixXd::Zero(3, 4)).isZero(0));

  Eigen::MatrixXd one(1, 1);
  one << 0.5;
  EXPECT_NEAR(zeta_map(c, one)(0, 0), kReferenceZeta, 1e-15);

  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0, 2);
  Eigen::MatrixXd X(20, 30);
  for (Eigen::Index i = 0; i < X.size(); ++i) X(i) = u(gen);
  const auto Z = zeta_map(c, X);
  ASSERT_EQ(Z.rows(), 20);
  ASSERT_EQ(Z.cols(), 30);
  for (Eigen::Index i = 0; i < 20; ++i)
    for (Eigen::Index j = 0; j < 30; ++j) ASSERT_EQ(Z(i, j), zeta(c, X(i, j)));

  X(4, 7) = -1.0;
  try {
    zeta_map(c, X);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_input);
    EXPECT_NE(std::string(e.what()).find("(4, 7)"), std::string::npos);
  }
}

TEST(ClusterResidual, ConstantTermAndClearedBalance) {
  const auto c = reference_params();
  EXPECT_DOUBLE_EQ(cluster_residual(c, 0.3, 0.0), c.d());
  const double direct = cluster_residual(c, 0.5, 0.5);
  EXPECT_NEAR(direct, -2.3407, 1e-12);
  const double cleared = oracle::cleared_balance(10, 0.1, 0.001, 0.01, 0.01, 0.5, 0.5);
  EXPECT_NEAR(direct, -cleared, 1e-12);
}

TEST(ClusterResidual, RootPropertyRandomDraws) {
  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 10000; ++i) {
    const int n = 3 + static_cast<int>(u(gen) * 497);
    const double p = 0.9 * u(gen);
    const double r = 1e-4 + (1 - 1e-4) * u(gen);
    const double lambda = u(gen) < 0.5 ? 0.005 : 0.01;
    const double x = 10 * u(gen);
    const auto c = ClusterParams::symmetric(n, p, r, lambda);
    const auto z = zeta_eval(c, x);
    ASSERT_GE(z.q, 0.0);
    ASSERT_LE(z.q, 1.0);
    if (!z.saturated) {
      ASSERT_LE(std::abs(cluster_residual(c, x, z.q)), 1e-8 * (1 + lambda * n));
    }
  }
}
