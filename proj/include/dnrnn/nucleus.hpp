#pragma once

// Closed-form activations of dense nuclei of statistically identical spiking
// cells, and the balance-equation residual they solve.

#include <cmath>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "dnrnn/error.hpp"

namespace dnrnn {

// Constants of a homogeneous nucleus. d and C are the derived coefficients of
// the activation quadratic; they are computed once at construction.
class ClusterParams {
 public:
  ClusterParams() : ClusterParams(make(10, 0.1, 0.001, 0.01, 0.01)) {}

  static ClusterParams make(int cells, double p, double r, double lambda_plus, double lambda_minus) {
    ClusterParams c(cells, p, r, lambda_plus, lambda_minus);
    c.check_primaries();
    return c;
  }

  // lambda_plus = lambda_minus = lambda, the usual training configuration.
  static ClusterParams symmetric(int cells, double p, double r, double lambda) {
    return make(cells, p, r, lambda, lambda);
  }

  int cells() const noexcept { return cells_; }
  double n() const noexcept { return static_cast<double>(cells_); }
  double p() const noexcept { return p_; }
  double r() const noexcept { return r_; }
  double lambda_plus() const noexcept { return lambda_plus_; }
  double lambda_minus() const noexcept { return lambda_minus_; }

  // d = n * lambda_plus
  double d() const noexcept { return d_; }
  // C = l+ p + r p - l- n - r - l+ p n - n p r
  double C() const noexcept { return c_; }

  static double compute_d(double n, double lambda_plus) { return n * lambda_plus; }
  static double compute_C(double n, double p, double r, double lp, double lm) {
    return lp * p + r * p - lm * n - r - lp * p * n - n * p * r;
  }

  // Re-checks every invariant, including agreement of the stored d and C
  // with values recomputed from the primaries.
  void validate() const {
    check_primaries();
    auto close = [](double stored, double fresh) {
      return std::abs(stored - fresh) <= 1e-12 * std::max(1.0, std::abs(fresh));
    };
    if (!close(d_, compute_d(n(), lambda_plus_)) || !close(c_, compute_C(n(), p_, r_, lambda_plus_, lambda_minus_)))
      throw Error(ErrorCode::invalid_parameter, "derived constants d/C disagree with primaries");
  }

  friend bool operator==(const ClusterParams&, const ClusterParams&) = default;

 private:
  ClusterParams(int cells, double p, double r, double lp, double lm)
      : cells_(cells),
        p_(p),
        r_(r),
        lambda_plus_(lp),
        lambda_minus_(lm),
        d_(compute_d(cells, lp)),
        c_(compute_C(cells, p, r, lp, lm)) {}

  void check_primaries() const {
    std::ostringstream why;
    if (cells_ < 3) why << "n must be >= 3 (got " << cells_ << "); ";
    if (!std::isfinite(p_) || p_ < 0.0 || p_ >= 1.0) why << "p must lie in [0,1) (got " << p_ << "); ";
    if (!std::isfinite(r_) || r_ <= 0.0) why << "r must be > 0 (got " << r_ << "); ";
    if (!std::isfinite(lambda_plus_) || lambda_plus_ < 0.0) why << "lambda_plus must be >= 0; ";
    if (!std::isfinite(lambda_minus_) || lambda_minus_ < 0.0) why << "lambda_minus must be >= 0; ";
    if (!why.str().empty()) throw Error(ErrorCode::invalid_parameter, why.str());
  }

  int cells_;
  double p_;
  double r_;
  double lambda_plus_;
  double lambda_minus_;
  double d_;
  double c_;
};

// An excitation probability together with whether it was clamped to 1.
struct Activation {
  double q = 0.0;
  bool saturated = false;
};

struct ZetaResult {
  double q = 0.0;
  bool saturated = false;
  bool linear_branch = false;  // leading coefficient below the degeneracy threshold
};

// Leading coefficients below this use the linear root.
inline constexpr double kDegenerateLeading = 1e-14;
// Discriminants in [-kDiscriminantTolerance * b^2, 0) are treated as 0.
inline constexpr double kDiscriminantTolerance = 1e-12;

namespace detail {

inline Activation clamp_unit(double raw) {
  if (raw > 1.0) return {1.0, true};
  return {raw < 0.0 ? 0.0 : raw, false};
}

inline void require_rate(double v, const char* name) {
  if (!std::isfinite(v) || v < 0.0)
    throw Error(ErrorCode::invalid_parameter, std::string(name) + " must be finite and >= 0");
}

}  // namespace detail

// Nucleus of inhibitory cells: positive root of q^2 r + q (r + l-) - l+ = 0.
inline Activation zeta_inhibitory(double lambda_plus, double lambda_minus, double r) {
  detail::require_rate(lambda_plus, "lambda_plus");
  detail::require_rate(lambda_minus, "lambda_minus");
  if (!std::isfinite(r) || r <= 0.0) throw Error(ErrorCode::invalid_parameter, "r must be finite and > 0");
  const double b = r + lambda_minus;
  // (sqrt(b^2 + 4 r l+) - b) / (2r), rationalized to avoid cancellation.
  const double root = std::sqrt(b * b + 4.0 * r * lambda_plus);
  return detail::clamp_unit(2.0 * lambda_plus / (root + b));
}

// Simplest soma-to-soma pattern; reduces to l+ / (r + l-).
inline Activation zeta_simple(double lambda_plus, double lambda_minus, double r) {
  detail::require_rate(lambda_plus, "lambda_plus");
  detail::require_rate(lambda_minus, "lambda_minus");
  if (!std::isfinite(r) || r < 0.0) throw Error(ErrorCode::invalid_parameter, "r must be finite and >= 0");
  const double denom = r + lambda_minus;
  if (denom == 0.0) throw Error(ErrorCode::degenerate_denominator, "r + lambda_minus = 0");
  return detail::clamp_unit(lambda_plus / denom);
}

// Cluster activation as a function of the total inhibitory input rate x.
//
// Solves a q^2 + b q + d = 0 with a = p(n-1)(l- + x), b = C - n x, d = n l+,
// selecting the smaller positive root. Since C < 0 for every valid parameter
// set, -b > 0 and the root is evaluated as 2d / (-b + sqrt(b^2 - 4ad)), which
// is the same root without subtracting nearly equal terms.
inline ZetaResult zeta_eval(const ClusterParams& params, double x) {
  if (!std::isfinite(x) || x < 0.0) throw Error(ErrorCode::invalid_input, "zeta input x must be finite and >= 0");
  const double n = params.n();
  const double d = params.d();
  const double a = params.p() * (n - 1.0) * (params.lambda_minus() + x);
  const double b = params.C() - n * x;

  double raw = 0.0;
  ZetaResult out;
  if (a < kDegenerateLeading) {
    out.linear_branch = true;
    if (-b <= 0.0) throw Error(ErrorCode::degenerate_root, "n x - C <= 0 in the linear branch");
    raw = d / (-b);
  } else {
    double disc = b * b - 4.0 * a * d;
    if (disc < 0.0) {
      if (disc < -kDiscriminantTolerance * b * b) {
        std::ostringstream os;
        os << "discriminant " << disc << " at x=" << x;
        throw Error(ErrorCode::no_real_root, os.str());
      }
      disc = 0.0;
    }
    const double denom = -b + std::sqrt(disc);
    if (denom <= 0.0) throw Error(ErrorCode::degenerate_root, "non-positive root denominator");
    raw = 2.0 * d / denom;
  }
  const Activation clamped = detail::clamp_unit(raw);
  out.q = clamped.q;
  out.saturated = clamped.saturated;
  return out;
}

inline double zeta(const ClusterParams& params, double x) { return zeta_eval(params, x).q; }

// Elementwise zeta; every entry of X must be finite and non-negative.
inline Eigen::MatrixXd zeta_map(const ClusterParams& params, const Eigen::MatrixXd& X) {
  Eigen::MatrixXd out(X.rows(), X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const double v = X(i, j);
      if (!std::isfinite(v) || v < 0.0) {
        std::ostringstream os;
        os << "entry (" << i << ", " << j << ") = " << v << " is negative or non-finite";
        throw Error(ErrorCode::invalid_input, os.str());
      }
      out(i, j) = zeta(params, v);
    }
  }
  return out;
}

// q^2 p(n-1)(l- + x) + q(n-1)[r(1-p) - l+ p] - q n (r + l- + x) + l+ n
inline double cluster_residual(const ClusterParams& params, double x, double q) {
  if (!std::isfinite(x) || !std::isfinite(q)) throw Error(ErrorCode::invalid_input, "non-finite residual input");
  const double n = params.n();
  const double p = params.p();
  const double r = params.r();
  const double lp = params.lambda_plus();
  const double lm = params.lambda_minus();
  return q * q * p * (n - 1.0) * (lm + x) + q * (n - 1.0) * (r * (1.0 - p) - lp * p) - q * n * (r + lm + x) +
         lp * n;
}

}  // namespace dnrnn
