#pragma once

// Independent checks of the cluster activation: a damped fixed-point iteration
// of the balance equation and a continuous-time simulation of the nucleus.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <vector>

#include "dnrnn/error.hpp"
#include "dnrnn/nucleus.hpp"
#include "dnrnn/random.hpp"

namespace dnrnn {

// Right-hand side of the balance equation for excitation probability q:
//   [l+ + r q (n-1)(1-p) / (n - q p (n-1))] / [r + l- + x + r q p (n-1) / (n - q p (n-1))]
inline double balance_map(const ClusterParams& params, double x, double q) {
  const double n = params.n();
  const double p = params.p();
  const double r = params.r();
  const double inner = n - q * p * (n - 1.0);
  if (!(inner > 0.0)) {
    std::ostringstream os;
    os << "n - q p (n-1) = " << inner << " <= 0 at q = " << q;
    throw Error(ErrorCode::domain, os.str());
  }
  const double num = params.lambda_plus() + r * q * (n - 1.0) * (1.0 - p) / inner;
  const double den = r + params.lambda_minus() + x + r * q * p * (n - 1.0) / inner;
  return num / den;
}

struct FixedPointOptions {
  double tol = 1e-12;
  int max_iter = 1'000'000;
  double damping = 0.5;  // theta in q <- (1 - theta) q + theta F(q)
};

// Iterates the balance map from q = 0 until |q - F(q)| <= tol.
inline double fixed_point_q(const ClusterParams& params, double x, const FixedPointOptions& opts = {}) {
  if (!std::isfinite(x) || x < 0.0) throw Error(ErrorCode::invalid_input, "x must be finite and >= 0");
  if (!(opts.damping > 0.0 && opts.damping <= 1.0))
    throw Error(ErrorCode::invalid_parameter, "damping must lie in (0, 1]");
  if (!(opts.tol > 0.0) || opts.max_iter < 1) throw Error(ErrorCode::invalid_parameter, "tol > 0 and max_iter >= 1");

  double q = 0.0;
  double residual = 0.0;
  for (int it = 0; it < opts.max_iter; ++it) {
    const double f = balance_map(params, x, q);
    residual = std::abs(q - f);
    if (residual <= opts.tol) return q;
    q = (1.0 - opts.damping) * q + opts.damping * f;
  }
  std::ostringstream os;
  os << "fixed point did not converge in " << opts.max_iter << " iterations; final residual " << residual;
  throw Error(ErrorCode::convergence, os.str());
}

inline double fixed_point_q(const ClusterParams& params, double x, double tol, int max_iter) {
  FixedPointOptions opts;
  opts.tol = tol;
  opts.max_iter = max_iter;
  return fixed_point_q(params, x, opts);
}

struct SimOptions {
  double burn_in_fraction = 0.2;
  int batches = 20;                       // batch means for the standard error
  std::uint64_t relabel_seed = 0;         // nonzero: cells are addressed through a random permutation
  std::uint64_t min_events = 100;
};

struct SimReport {
  double q_hat = 0.0;
  double std_err = 0.0;
  std::uint64_t events = 0;  // stochastic events drawn (arrivals, inhibitions, spontaneous firings)
  double horizon = 0.0;
  std::uint64_t seed = 0;
  bool insufficient_statistics = false;

  // Bookkeeping for conservation checks.
  std::uint64_t external_arrivals = 0;
  std::uint64_t cascade_deliveries = 0;
  std::uint64_t firings = 0;       // spontaneous plus cascade firings
  std::uint64_t inhibitions = 0;   // inhibitory arrivals that removed a unit of potential
  std::int64_t final_potential = 0;
  std::int64_t min_potential = 0;

  friend bool operator==(const SimReport&, const SimReport&) = default;
};

namespace detail {

// Potentials plus an O(1) indexable set of excited cells.
class NucleusState {
 public:
  explicit NucleusState(int n) : potential_(n, 0), slot_(n, -1) {}

  int excited_count() const { return static_cast<int>(excited_.size()); }
  int excited_at(std::size_t k) const { return excited_[k]; }
  bool excited(int cell) const { return potential_[cell] > 0; }

  void increment(int cell) {
    if (potential_[cell]++ == 0) {
      slot_[cell] = static_cast<int>(excited_.size());
      excited_.push_back(cell);
    }
  }

  void decrement(int cell) {
    if (--potential_[cell] == 0) {
      const int s = slot_[cell];
      const int last = excited_.back();
      excited_[s] = last;
      slot_[last] = s;
      excited_.pop_back();
      slot_[cell] = -1;
    }
  }

  std::int64_t total() const { return std::accumulate(potential_.begin(), potential_.end(), std::int64_t{0}); }
  std::int64_t minimum() const { return *std::min_element(potential_.begin(), potential_.end()); }

 private:
  std::vector<std::int64_t> potential_;
  std::vector<int> slot_;
  std::vector<int> excited_;
};

}  // namespace detail

// Continuous-time Markov simulation of an n-cell nucleus, starting from all
// potentials at zero. Every cell receives excitatory arrivals at rate l+ and
// inhibitory arrivals at rate l- + x; an excited cell fires at rate r and
// starts a cascade. At each cascade step, with probability p a uniformly
// chosen cell is addressed: if excited it fires and the cascade continues,
// otherwise the cascade ends. With probability 1 - p the cascade ends by
// delivering one excitatory spike to a uniformly chosen cell.
//
// q_hat is the time-averaged fraction of excited cells after burn-in; std_err
// comes from batch means over the post-burn-in window.
inline SimReport simulate_cluster(const ClusterParams& params, double x, double horizon, std::uint64_t seed,
                                  const SimOptions& opts = {}) {
  if (!std::isfinite(x) || x < 0.0) throw Error(ErrorCode::invalid_input, "x must be finite and >= 0");
  if (!std::isfinite(horizon) || horizon <= 0.0) throw Error(ErrorCode::invalid_parameter, "horizon must be > 0");
  if (!(opts.burn_in_fraction >= 0.0 && opts.burn_in_fraction < 1.0) || opts.batches < 1)
    throw Error(ErrorCode::invalid_parameter, "burn-in fraction must lie in [0,1) and batches >= 1");

  const int n = params.cells();
  const double p = params.p();
  const double exc_rate = n * params.lambda_plus();
  const double inh_rate = n * (params.lambda_minus() + x);
  const double r = params.r();

  Rng rng(seed);
  std::vector<int> label(n);
  std::iota(label.begin(), label.end(), 0);
  if (opts.relabel_seed != 0) {
    Rng shuffle(opts.relabel_seed);
    for (int i = n - 1; i > 0; --i) std::swap(label[i], label[shuffle.below(static_cast<std::uint64_t>(i) + 1)]);
  }
  auto pick = [&] { return label[rng.below(static_cast<std::uint64_t>(n))]; };

  detail::NucleusState state(n);
  SimReport rep;
  rep.horizon = horizon;
  rep.seed = seed;

  const double burn = opts.burn_in_fraction * horizon;
  const double batch_len = (horizon - burn) / opts.batches;
  std::vector<double> batch_area(opts.batches, 0.0);

  // Adds the excited fraction over [t0, t1) to the batch integrals.
  auto accumulate = [&](double t0, double t1, double fraction) {
    t0 = std::max(t0, burn);
    t1 = std::min(t1, horizon);
    while (t0 < t1) {
      int b = std::min(static_cast<int>((t0 - burn) / batch_len), opts.batches - 1);
      while (b < opts.batches - 1 && burn + (b + 1) * batch_len <= t0) ++b;
      const double end = b == opts.batches - 1 ? t1 : std::min(t1, burn + (b + 1) * batch_len);
      batch_area[b] += fraction * (end - t0);
      t0 = end;
    }
  };

  double t = 0.0;
  while (true) {
    const int excited = state.excited_count();
    const double fire_rate = r * excited;
    const double total = exc_rate + inh_rate + fire_rate;
    const double fraction = static_cast<double>(excited) / n;
    if (total <= 0.0) {
      accumulate(t, horizon, fraction);
      break;
    }
    const double dt = rng.exponential(total);
    if (t + dt >= horizon) {
      accumulate(t, horizon, fraction);
      break;
    }
    accumulate(t, t + dt, fraction);
    t += dt;
    ++rep.events;

    const double u = rng.uniform() * total;
    if (u < exc_rate) {
      state.increment(pick());
      ++rep.external_arrivals;
    } else if (u < exc_rate + inh_rate) {
      const int cell = pick();
      if (state.excited(cell)) {
        state.decrement(cell);
        ++rep.inhibitions;
      }
    } else {
      const int cell = state.excited_at(rng.below(static_cast<std::uint64_t>(excited)));
      state.decrement(cell);
      ++rep.firings;
      while (true) {
        if (rng.uniform() < p) {
          const int next = pick();
          if (!state.excited(next)) break;
          state.decrement(next);
          ++rep.firings;
        } else {
          state.increment(pick());
          ++rep.cascade_deliveries;
          break;
        }
      }
    }
  }

  const double window = horizon - burn;
  const double area = std::accumulate(batch_area.begin(), batch_area.end(), 0.0);
  rep.q_hat = std::clamp(area / window, 0.0, 1.0);
  if (opts.batches > 1) {
    double ss = 0.0;
    for (double a : batch_area) {
      const double m = a / batch_len;
      ss += (m - rep.q_hat) * (m - rep.q_hat);
    }
    rep.std_err = std::sqrt(ss / (opts.batches - 1) / opts.batches);
  }
  rep.insufficient_statistics = rep.events < opts.min_events;
  rep.final_potential = state.total();
  rep.min_potential = state.minimum();
  return rep;
}

}  // namespace dnrnn
