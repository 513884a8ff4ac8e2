#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dnrnn/numerics.hpp"
#include "oracles.hpp"

using namespace dnrnn;

namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double lo = -1, double hi = 1) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix M(rows, cols);
  for (Eigen::Index i = 0; i < M.size(); ++i) M(i) = u(gen);
  return M;
}

Matrix one(double v) {
  Matrix m(1, 1);
  m << v;
  return m;
}

}  // namespace

TEST(Adj, HandEvaluatedColumn) {
  Matrix X(3, 1);
  X << 0, 5, 10;
  const Matrix out = adj(X);
  EXPECT_NEAR(out(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(out(1, 0), 1.0, 1e-15);
  EXPECT_NEAR(out(2, 0), 2.0, 1e-15);
}

TEST(Adj, ConstantColumnTakesGlobalShift) {
  Matrix X(3, 2);
  X << 3, 0, 3, 5, 3, 10;
  const Matrix out = adj(X);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(out(i, 0), 1.0, 1e-15);
  EXPECT_NEAR(out(0, 1), 0.0, 1e-15);
  EXPECT_NEAR(out(2, 1), 2.0, 1e-15);
}

TEST(Adj, NonNegativeWithUnitSpreadColumns) {
  const Matrix X = random_matrix(40, 6, 5, -3, 8);
  const Matrix out = adj(X);
  EXPECT_GE(out.minCoeff(), 0.0);
  EXPECT_NEAR(out.minCoeff(), 0.0, 1e-15);
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const double mean = out.col(j).mean();
    const double var = (out.col(j).array() - mean).square().sum() / (out.rows() - 1);
    EXPECT_NEAR(var, 1.0, 1e-12);
  }
}

TEST(Adj, Errors) {
  EXPECT_THROW(adj(Matrix(1, 3)), Error);
  EXPECT_THROW(adj(Matrix()), Error);
  Matrix bad = Matrix::Zero(2, 2);
  bad(1, 1) = NAN;
  EXPECT_THROW(adj(bad), Error);
}

TEST(SpectralNorm, KnownSpectra) {
  Matrix D = Matrix::Zero(2, 2);
  D(0, 0) = 3;
  D(1, 1) = 1;
  EXPECT_NEAR(spectral_norm_sq(D), 9.0, 0.09);
  EXPECT_NEAR(spectral_norm_sq(Matrix::Identity(7, 7)), 1.0, 1e-12);
  EXPECT_EQ(spectral_norm_sq(Matrix::Zero(3, 4)), 0.0);
}

TEST(SpectralNorm, AgreesWithSvd) {
  const Matrix A = random_matrix(40, 25, 12);
  const double exact = oracle::sigma_max_sq(A);
  EXPECT_LE(std::abs(spectral_norm_sq(A) - exact), 1e-2 * exact);
}

TEST(Fista, OneDimensionalClosedForms) {
  FistaConfig cfg;
  cfg.max_iter = 500;
  cfg.rel_tol = 1e-14;
  const auto interior = fista_nn_l1(one(1), one(1), cfg);
  EXPECT_NEAR(interior.weights(0, 0), 0.5, 1e-6);
  const auto clamped = fista_nn_l1(one(1), one(-2), cfg);
  EXPECT_NEAR(clamped.weights(0, 0), 0.0, 1e-6);
  EXPECT_GE(clamped.weights(0, 0), 0.0);
}

TEST(Fista, ZeroDesignGivesZeroWithWarning) {
  const auto res = fista_nn_l1(Matrix::Zero(5, 3), random_matrix(5, 2, 1));
  EXPECT_TRUE(res.rank_warning);
  EXPECT_TRUE(res.weights.isZero(0));
  EXPECT_EQ(res.weights.rows(), 3);
  EXPECT_EQ(res.weights.cols(), 2);
}

TEST(Fista, BestObjectiveNonIncreasingAndWeightsNonNegative) {
  const Matrix A = random_matrix(30, 8, 21, 0, 1);
  const Matrix T = random_matrix(30, 5, 22);
  FistaConfig cfg;
  cfg.l1_weight = 0.3;
  cfg.max_iter = 300;
  cfg.rel_tol = 1e-12;
  const auto res = fista_nn_l1(A, T, cfg);
  ASSERT_FALSE(res.best_objective.empty());
  for (std::size_t k = 1; k < res.best_objective.size(); ++k)
    ASSERT_LE(res.best_objective[k], res.best_objective[k - 1]);
  EXPECT_GE(res.weights.minCoeff(), 0.0);
  EXPECT_NEAR(res.objective, nn_l1_objective(A, T, res.weights, cfg.l1_weight), 1e-9 * res.objective);
  EXPECT_DOUBLE_EQ(res.objective, res.best_objective.back());
}

TEST(Fista, MatchesProjectedGradientOracle) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Matrix A = random_matrix(30, 8, 100 + s);
    const Matrix T = random_matrix(30, 5, 200 + s);
    FistaConfig cfg;
    cfg.l1_weight = 0.5;
    cfg.max_iter = 5000;
    cfg.rel_tol = 1e-15;
    const auto res = fista_nn_l1(A, T, cfg);
    const Matrix ref = oracle::projected_gradient(A, T, cfg.l1_weight, 20000);
    const double f_ref = oracle::nn_l1_objective(A, T, ref, cfg.l1_weight);
    EXPECT_LE(std::abs(res.objective - f_ref), 1e-6 * f_ref) << "seed " << s;
  }
}

TEST(Fista, NonConvergenceIsAFlag) {
  const Matrix A = random_matrix(20, 6, 3);
  const Matrix T = random_matrix(20, 4, 4);
  FistaConfig cfg;
  cfg.max_iter = 2;
  cfg.rel_tol = 1e-15;
  const auto res = fista_nn_l1(A, T, cfg);
  EXPECT_FALSE(res.converged);
  EXPECT_EQ(res.iterations, 2);
}

TEST(Fista, Errors) {
  EXPECT_THROW(fista_nn_l1(Matrix::Ones(3, 2), Matrix::Ones(4, 2)), Error);
  FistaConfig cfg;
  cfg.l1_weight = -1;
  EXPECT_THROW(fista_nn_l1(Matrix::Ones(3, 2), Matrix::Ones(3, 2), cfg), Error);
}

TEST(Pinv, TrivialCases) {
  EXPECT_TRUE(pinv(Matrix::Identity(5, 5)).isApprox(Matrix::Identity(5, 5), 1e-14));
  EXPECT_NEAR(pinv(one(2))(0, 0), 0.5, 1e-15);
  EXPECT_TRUE(pinv(Matrix::Zero(3, 2)).isZero(0));
  Matrix bad = Matrix::Ones(2, 2);
  bad(0, 1) = INFINITY;
  EXPECT_THROW(pinv(bad), Error);
}

TEST(Pinv, PenroseConditions) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    Matrix M = random_matrix(50, 20, 300 + s);
    if (s % 2) M = random_matrix(50, 6, 400 + s) * random_matrix(6, 20, 500 + s);  // rank 6
    const Matrix P = pinv(M);
    const double scale = M.norm();
    EXPECT_LE((M * P * M - M).norm(), 1e-8 * scale);
    EXPECT_LE((P * M * P - P).norm(), 1e-8 * scale);
    EXPECT_LE((M * P - (M * P).transpose()).norm(), 1e-8 * scale);
    EXPECT_LE((P * M - (P * M).transpose()).norm(), 1e-8 * scale);
  }
}

TEST(Pinv, Involution) {
  const Matrix M = random_matrix(12, 7, 8);
  EXPECT_LE((pinv(pinv(M)) - M).norm(), 1e-10 * M.norm());
}

TEST(Pinv, LeastSquaresMatchesQr) {
  const Matrix F = random_matrix(60, 10, 61);
  const Matrix Y = random_matrix(60, 3, 62);
  const Matrix W = pinv(F) * Y;
  const Matrix ref = oracle::qr_least_squares(F, Y);
  EXPECT_LE((W - ref).norm(), 1e-8 * ref.norm());
}
