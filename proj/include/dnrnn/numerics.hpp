#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "dnrnn/error.hpp"
#include "dnrnn/random.hpp"

namespace dnrnn {

// Rows are instances, columns are features.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline void require_finite(const Matrix& M, const char* what) {
  if (!M.allFinite()) throw Error(ErrorCode::invalid_input, std::string(what) + " has non-finite entries");
}

// Reconstruction-feature preprocessing. Per column: affine map onto [0,1]
// (constant columns become 0.5), then standardization with the N-1 sample
// deviation (zero-variance columns become 0). Finally one global constant is
// added so that the smallest entry is exactly 0.
inline Matrix adj(const Matrix& X) {
  if (X.size() == 0) throw Error(ErrorCode::invalid_input, "adj of an empty matrix");
  require_finite(X, "adj input");
  if (X.rows() < 2) throw Error(ErrorCode::invalid_input, "adj needs at least two rows to standardize");

  const auto n = static_cast<double>(X.rows());
  Matrix out(X.rows(), X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double lo = X.col(j).minCoeff();
    const double hi = X.col(j).maxCoeff();
    Vector unit = hi > lo ? Vector((X.col(j).array() - lo) / (hi - lo)) : Vector::Constant(X.rows(), 0.5);
    const double mean = unit.mean();
    unit.array() -= mean;
    const double sd = std::sqrt(unit.squaredNorm() / (n - 1.0));
    if (sd > 0.0)
      out.col(j) = unit / sd;
    else
      out.col(j).setZero();
  }
  const double shift = std::max(0.0, -out.minCoeff());
  out.array() += shift;
  return out;
}

// Power-iteration estimate of the largest squared singular value of A.
inline double spectral_norm_sq(const Matrix& A, int iters = 100, std::uint64_t seed = 0x5eed) {
  if (A.size() == 0) throw Error(ErrorCode::invalid_input, "spectral_norm_sq of an empty matrix");
  Rng rng(seed);
  Vector v(A.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
  double norm = v.norm();
  if (norm == 0.0) return 0.0;
  v /= norm;

  double estimate = 0.0;
  for (int k = 0; k < std::max(iters, 1); ++k) {
    Vector w = A.transpose() * (A * v);
    const double next = v.dot(w);  // Rayleigh quotient of A^T A
    norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    const bool settled = std::abs(next - estimate) <= 1e-12 * std::abs(next);
    estimate = next;
    if (settled) break;
  }
  return estimate;
}

struct FistaConfig {
  double l1_weight = 1.0;
  int max_iter = 200;
  double rel_tol = 1e-6;
  std::optional<double> lipschitz;  // of the smooth part's gradient; estimated when absent

  void validate() const {
    if (!std::isfinite(l1_weight) || l1_weight < 0.0) throw Error(ErrorCode::invalid_parameter, "l1_weight must be >= 0");
    if (max_iter < 1) throw Error(ErrorCode::invalid_parameter, "max_iter must be >= 1");
    if (!(rel_tol > 0.0)) throw Error(ErrorCode::invalid_parameter, "rel_tol must be > 0");
    if (lipschitz && !(*lipschitz > 0.0)) throw Error(ErrorCode::invalid_parameter, "lipschitz must be > 0");
  }
};

struct FistaResult {
  Matrix weights;                  // H x D, entrywise >= 0; best iterate seen
  double objective = 0.0;          // objective at `weights`
  int iterations = 0;
  bool converged = false;
  bool rank_warning = false;       // A was all zero
  double lipschitz = 0.0;
  std::vector<double> best_objective;  // best-so-far objective after each iteration
};

// ||T - A W||_F^2 + l1_weight * sum(W) for W >= 0.
inline double nn_l1_objective(const Matrix& A, const Matrix& T, const Matrix& W, double l1_weight) {
  return (T - A * W).squaredNorm() + l1_weight * W.sum();
}

// Accelerated proximal gradient for
//   min_W ||T - A W||_F^2 + l1_weight ||W||_1   s.t. W >= 0,
// with negative entries truncated to zero at every iteration. A is N x H,
// T is N x D, and the result is H x D.
inline FistaResult fista_nn_l1(const Matrix& A, const Matrix& T, const FistaConfig& cfg = {}) {
  cfg.validate();
  if (A.rows() != T.rows()) {
    std::ostringstream os;
    os << "A has " << A.rows() << " rows but T has " << T.rows();
    throw Error(ErrorCode::dimension_mismatch, os.str());
  }
  require_finite(A, "FISTA design matrix");
  require_finite(T, "FISTA target");

  const Eigen::Index H = A.cols();
  const Eigen::Index D = T.cols();
  FistaResult res;
  res.weights = Matrix::Zero(H, D);

  // The smooth part and its gradient only need the Gram matrices.
  const Matrix gram = A.transpose() * A;
  const Matrix cross = A.transpose() * T;
  const double target_sq = T.squaredNorm();
  auto objective = [&](const Matrix& W) {
    const double quad = (W.array() * (gram * W - 2.0 * cross).array()).sum() + target_sq;
    return std::max(quad, 0.0) + cfg.l1_weight * W.sum();
  };

  if (A.isZero(0.0)) {
    res.rank_warning = true;
    res.converged = true;
    res.objective = target_sq;
    return res;
  }

  const double lip = cfg.lipschitz ? *cfg.lipschitz : 2.0 * spectral_norm_sq(A) * 1.01;
  res.lipschitz = lip;
  const double step = 1.0 / lip;
  const double threshold = cfg.l1_weight * step;

  Matrix W = res.weights;
  Matrix Y = W;
  double t = 1.0;
  double best = objective(W);
  double previous = best;
  res.objective = best;
  res.best_objective.reserve(cfg.max_iter);

  for (int k = 0; k < cfg.max_iter; ++k) {
    const Matrix grad = 2.0 * (gram * Y - cross);
    Matrix next = ((Y - step * grad).array() - threshold).cwiseMax(0.0).matrix();
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    Y = next + ((t - 1.0) / t_next) * (next - W);
    W = std::move(next);
    t = t_next;

    const double f = objective(W);
    if (f < best) {
      best = f;
      res.weights = W;
    }
    res.best_objective.push_back(best);
    res.iterations = k + 1;
    if (std::abs(previous - f) <= cfg.rel_tol * std::max(std::abs(previous), std::numeric_limits<double>::min())) {
      res.converged = true;
      break;
    }
    previous = f;
  }
  res.objective = best;
  return res;
}

// Moore-Penrose pseudoinverse from a thin SVD; singular values below
// tol * sigma_max are treated as zero.
inline Matrix pinv(const Matrix& M, double tol = 1e-10) {
  if (M.size() == 0) throw Error(ErrorCode::invalid_input, "pinv of an empty matrix");
  require_finite(M, "pinv input");
  Eigen::BDCSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cutoff = s.size() > 0 ? tol * s(0) : 0.0;
  Vector inv(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) inv(i) = (s(i) > cutoff && s(i) > 0.0) ? 1.0 / s(i) : 0.0;
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

}  // namespace dnrnn
