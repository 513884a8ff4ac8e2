#pragma once

// Reference computations used only by the tests. Each one takes a different
// route from the library code it checks.

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Eigen::MatrixXd;

// Balance equation q = num/den multiplied through by den*(n - q p (n-1)),
// expanded term by term from the geometric-sum form. Equals minus the
// quadratic residual.
inline double cleared_balance(double n, double p, double r, double lp, double lm, double x, double q) {
  const double inner = n - q * p * (n - 1.0);
  const double den = (r + lm + x) * inner + r * q * p * (n - 1.0);
  const double num = lp * inner + r * q * (n - 1.0) * (1.0 - p);
  return q * den - num;
}

// Smallest root of a q^2 + b q + c on [0, hi] by bisection on a sign change
// at 0 (c > 0), independent of any closed form.
inline double bisect_root(double a, double b, double c, double hi) {
  auto f = [&](double q) { return (a * q + b) * q + c; };
  double lo = 0.0;
  if (f(lo) == 0.0) return 0.0;
  // march to the first sign change
  const int steps = 4096;
  double prev = lo;
  for (int i = 1; i <= steps; ++i) {
    const double q = hi * i / steps;
    if ((f(q) > 0) != (f(prev) > 0)) {
      lo = prev;
      hi = q;
      break;
    }
    prev = q;
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if ((f(mid) > 0) == (f(lo) > 0))
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

inline double nn_l1_objective(const MatrixXd& A, const MatrixXd& T, const MatrixXd& W, double l1) {
  return (T - A * W).squaredNorm() + l1 * W.cwiseAbs().sum();
}

// Plain projected (proximal) gradient with a fixed small step, run long.
inline MatrixXd projected_gradient(const MatrixXd& A, const MatrixXd& T, double l1, int iters) {
  Eigen::JacobiSVD<MatrixXd> svd(A);
  const double sigma = svd.singularValues()(0);
  const double step = 1.0 / (2.0 * sigma * sigma);
  MatrixXd W = MatrixXd::Zero(A.cols(), T.cols());
  for (int k = 0; k < iters; ++k) {
    const MatrixXd grad = 2.0 * A.transpose() * (A * W - T);
    W = ((W - step * grad).array() - l1 * step).cwiseMax(0.0).matrix();
  }
  return W;
}

inline double sigma_max_sq(const MatrixXd& A) {
  Eigen::JacobiSVD<MatrixXd> svd(A);
  return svd.singularValues()(0) * svd.singularValues()(0);
}

// Least squares through Householder QR with column pivoting.
inline MatrixXd qr_least_squares(const MatrixXd& F, const MatrixXd& Y) {
  return F.colPivHouseholderQr().solve(Y);
}

// Normal equations: (F^T F)^{-1} F^T Y, valid for full column rank.
inline MatrixXd normal_equations(const MatrixXd& F, const MatrixXd& Y) {
  return (F.transpose() * F).ldlt().solve(F.transpose() * Y);
}

inline std::vector<int> argmax_rows(const MatrixXd& S) {
  std::vector<int> out;
  for (Eigen::Index i = 0; i < S.rows(); ++i) {
    int best = 0;
    double v = S(i, 0);
    for (Eigen::Index k = 0; k < S.cols(); ++k) {
      if (S(i, k) > v) {
        v = S(i, k);
        best = static_cast<int>(k);
      }
    }
    out.push_back(best);
  }
  return out;
}

}  // namespace oracle
