#pragma once

// The invariant suite behind `dnrnn validate` and the acceptance binary. Each
// check measures its own wall time and fails when it runs over its limit.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "dnrnn/cluster_sim.hpp"
#include "dnrnn/manifest.hpp"
#include "dnrnn/model_io.hpp"
#include "dnrnn/report.hpp"

namespace dnrnn::validation {

struct CheckResult {
  int id = 0;
  std::string name;
  bool passed = false;
  bool skipped = false;
  bool gating = true;
  double seconds = 0.0;
  double limit_seconds = 0.0;  // 0: no limit
  std::string detail;

  std::string line() const {
    std::ostringstream os;
    os << (skipped ? "[SKIP] " : passed ? "[PASS] " : "[FAIL] ") << id << ". " << name << ": " << detail;
    if (!skipped) {
      os << " (" << format_fixed(seconds, 2) << " s";
      if (limit_seconds > 0) os << ", limit " << format_fixed(limit_seconds, 0) << " s";
      os << ")";
    }
    return os.str();
  }
};

namespace detail {

// Slow reference routines, independent of the library's solvers.
inline Matrix projected_gradient(const Matrix& A, const Matrix& T, double l1, int iters) {
  Eigen::JacobiSVD<Matrix> svd(A);
  const double s = svd.singularValues()(0);
  const double step = 1.0 / (2.0 * s * s);
  Matrix W = Matrix::Zero(A.cols(), T.cols());
  for (int k = 0; k < iters; ++k) {
    const Matrix grad = 2.0 * A.transpose() * (A * W - T);
    W = ((W - step * grad).array() - l1 * step).cwiseMax(0.0).matrix();
  }
  return W;
}

inline double l1_objective(const Matrix& A, const Matrix& T, const Matrix& W, double l1) {
  return (T - A * W).squaredNorm() + l1 * W.cwiseAbs().sum();
}

struct Draw {
  ClusterParams params;
  double x = 0.0;
};

// n in [3,500], p in [0,0.9], r in [1e-4,1], lambda in {0.005, 0.01}, x in [0,10].
inline Draw draw_cluster(Rng& rng) {
  const int n = 3 + static_cast<int>(rng.below(498));
  const double p = 0.9 * rng.uniform();
  const double r = 1e-4 + (1.0 - 1e-4) * rng.uniform();
  const double lambda = rng.uniform() < 0.5 ? 0.005 : 0.01;
  const double x = 10.0 * rng.uniform();
  return {ClusterParams::symmetric(n, p, r, lambda), x};
}

inline Matrix uniform_in(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo, double hi) {
  Matrix M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) M(i, j) = lo + (hi - lo) * rng.uniform();
  return M;
}

inline bool same_weights(const ModelArtifact& a, const ModelArtifact& b) {
  if (a.stacks.size() != b.stacks.size() || a.output != b.output) return false;
  if (a.random_layer.has_value() != b.random_layer.has_value()) return false;
  if (a.random_layer && *a.random_layer != *b.random_layer) return false;
  for (std::size_t s = 0; s < a.stacks.size(); ++s) {
    if (a.stacks[s].size() != b.stacks[s].size()) return false;
    for (std::size_t l = 0; l < a.stacks[s].size(); ++l)
      if (a.stacks[s][l].weights != b.stacks[s][l].weights) return false;
  }
  return true;
}

inline double accuracy_percent(const ModelArtifact& model, const MultiChannelDataset& data) {
  const auto predicted = predict(model, data);
  const auto truth = class_ids(data.labels);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return 100.0 * static_cast<double>(hits) / static_cast<double>(truth.size());
}

inline CheckResult run(int id, std::string name, double limit, const std::function<bool(std::string&)>& body) {
  CheckResult r;
  r.id = id;
  r.name = std::move(name);
  r.limit_seconds = limit;
  const auto start = std::chrono::steady_clock::now();
  try {
    r.passed = body(r.detail);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (limit > 0 && r.seconds >= limit) {
    r.passed = false;
    r.detail += "; over time limit";
  }
  return r;
}

inline std::string sci(double v) {
  std::ostringstream os;
  os.precision(2);
  os << std::scientific << v;
  return os.str();
}

}  // namespace detail

// Shared synthetic benchmark: 3 classes, 4 channels, N=2000, D=25, separation 6,
// stratified 2/3 split.
inline TrainTestSplit synthetic_benchmark(std::uint64_t seed = 1) {
  SynthSpec spec;
  spec.seed = seed;
  return split_train_test(gen_synth_blobs(spec), 2.0 / 3.0, seed);
}

inline TrainConfig desk_config() {
  TrainConfig cfg;
  cfg.layers = 2;
  cfg.widths = {50, 30};
  cfg.branches = 3;
  return cfg;
}

inline CheckResult check_root_property() {
  return detail::run(1, "zeta root property", 1.0, [](std::string& out) {
    Rng rng(0xA11CE);
    double worst = 0.0;
    int saturated = 0;
    bool in_range = true;
    for (int i = 0; i < 10000; ++i) {
      const auto d = detail::draw_cluster(rng);
      const auto z = zeta_eval(d.params, d.x);
      in_range = in_range && z.q >= 0.0 && z.q <= 1.0;
      if (z.saturated) {
        ++saturated;
        continue;
      }
      const double scaled = std::abs(cluster_residual(d.params, d.x, z.q)) / (1.0 + d.params.lambda_plus() * d.params.n());
      worst = std::max(worst, scaled);
    }
    out = "10000 draws, max |residual|/(1+l+n) = " + detail::sci(worst) + " (bound 1e-8), " +
          std::to_string(saturated) + " saturated, range " + (in_range ? "ok" : "VIOLATED");
    return in_range && worst <= 1e-8;
  });
}

inline CheckResult check_oracle_equivalence() {
  return detail::run(2, "fixed point and closed forms", 1.0, [](std::string& out) {
    Rng rng(0xB0B);
    double worst_fp = 0.0;
    int checked = 0;
    while (checked < 200) {
      const auto d = detail::draw_cluster(rng);
      const auto z = zeta_eval(d.params, d.x);
      if (z.saturated) continue;
      worst_fp = std::max(worst_fp, std::abs(fixed_point_q(d.params, d.x) - z.q));
      ++checked;
    }
    double worst_p0 = 0.0;
    for (int i = 0; i < 200; ++i) {
      const int n = 3 + static_cast<int>(rng.below(498));
      const double r = 1e-4 + (1.0 - 1e-4) * rng.uniform();
      const double lp = 0.01 * rng.uniform();
      const double lm = 0.01 * rng.uniform();
      const double x = 10.0 * rng.uniform();
      const double closed = std::min(1.0, lp * n / (n * lm + n * x + r));
      worst_p0 = std::max(worst_p0, std::abs(zeta(ClusterParams::make(n, 0.0, r, lp, lm), x) - closed));
    }
    out = "fixed point vs zeta max " + detail::sci(worst_fp) + " (bound 1e-8, 200 draws); p=0 closed form max " +
          detail::sci(worst_p0) + " (bound 1e-12)";
    return worst_fp <= 1e-8 && worst_p0 <= 1e-12;
  });
}

inline CheckResult check_monte_carlo() {
  return detail::run(3, "Monte Carlo agreement at n=100", 60.0, [](std::string& out) {
    const auto params = ClusterParams::symmetric(100, 0.1, 0.001, 0.01);
    bool ok = true;
    std::ostringstream os;
    std::uint64_t seed = 42;
    for (double x : {0.0, 0.25, 0.5}) {
      const auto rep = simulate_cluster(params, x, 1e6, seed++);
      const double q = zeta(params, x);
      const double tol = std::max(0.02, 3.0 * rep.std_err);
      const bool pass = std::abs(rep.q_hat - q) <= tol && !rep.insufficient_statistics;
      ok = ok && pass;
      os << "x=" << x << " zeta=" << format_fixed(q, 5) << " q_hat=" << format_fixed(rep.q_hat, 5) << " se="
         << detail::sci(rep.std_err) << (pass ? "" : " (off)") << "; ";
    }
    out = os.str();
    out.resize(out.size() - 2);
    return ok;
  });
}

inline CheckResult check_fista() {
  return detail::run(4, "FISTA against closed forms and projected gradient", 5.0, [](std::string& out) {
    FistaConfig tight;
    tight.max_iter = 5000;
    tight.rel_tol = 1e-15;
    Matrix one(1, 1), t(1, 1);
    one << 1.0;
    t << 1.0;
    const double w_half = fista_nn_l1(one, t, tight).weights(0, 0);
    t << -2.0;
    const double w_zero = fista_nn_l1(one, t, tight).weights(0, 0);
    bool ok = std::abs(w_half - 0.5) <= 1e-6 && std::abs(w_zero) <= 1e-6 && w_zero >= 0.0;

    Rng rng(0xF157A);
    double worst_gap = 0.0;
    bool monotone = true;
    bool nonneg = true;
    for (int k = 0; k < 20; ++k) {
      const Matrix A = detail::uniform_in(rng, 30, 8, -1.0, 1.0);
      const Matrix T = detail::uniform_in(rng, 30, 5, -1.0, 1.0);
      const double l1 = 0.1 + rng.uniform();
      FistaConfig cfg = tight;
      cfg.l1_weight = l1;
      const auto res = fista_nn_l1(A, T, cfg);
      for (std::size_t i = 1; i < res.best_objective.size(); ++i)
        monotone = monotone && res.best_objective[i] <= res.best_objective[i - 1];
      nonneg = nonneg && res.weights.minCoeff() >= 0.0;
      const double ref = detail::l1_objective(A, T, detail::projected_gradient(A, T, l1, 20000), l1);
      worst_gap = std::max(worst_gap, std::abs(res.objective - ref) / ref);
    }
    ok = ok && monotone && nonneg && worst_gap <= 1e-6;
    out = "1-D w=" + format_fixed(w_half, 8) + " and w=" + format_fixed(w_zero, 8) + "; 20 problems, max relative gap " +
          detail::sci(worst_gap) + " (bound 1e-6), best-so-far " + (monotone ? "monotone" : "NOT monotone") +
          ", weights " + (nonneg ? ">= 0" : "NEGATIVE");
    return ok;
  });
}

inline CheckResult check_pinv() {
  return detail::run(5, "pseudoinverse Penrose conditions", 5.0, [](std::string& out) {
    Rng rng(0x9E4);
    double worst = 0.0;
    int deficient = 0;
    for (int k = 0; k < 50; ++k) {
      const auto rows = static_cast<Eigen::Index>(2 + rng.below(59));
      const auto cols = static_cast<Eigen::Index>(2 + rng.below(39));
      Matrix M;
      if (k % 3 == 2) {
        const auto rank = static_cast<Eigen::Index>(1 + rng.below(static_cast<std::uint64_t>(std::min(rows, cols) - 1)));
        M = detail::uniform_in(rng, rows, rank, -1, 1) * detail::uniform_in(rng, rank, cols, -1, 1);
        ++deficient;
      } else {
        M = detail::uniform_in(rng, rows, cols, -1, 1);
      }
      const Matrix P = pinv(M);
      const double scale = M.norm();
      const double e = std::max({(M * P * M - M).norm(), (P * M * P - P).norm(),
                                 (M * P - (M * P).transpose()).norm(), (P * M - (P * M).transpose()).norm()});
      worst = std::max(worst, e / scale);
    }
    out = "50 matrices (" + std::to_string(deficient) + " rank-deficient), max violation / ||M|| = " +
          detail::sci(worst) + " (bound 1e-8)";
    return worst <= 1e-8;
  });
}

inline CheckResult check_reduction_chain() {
  return detail::run(6, "reduction chain MCRNN-MLA1(B=1) = MCRNN-MLA = RNN-MLA", 10.0, [](std::string& out) {
    SynthSpec spec;
    spec.rows = 600;
    spec.channels = 1;
    spec.seed = 6;
    const auto data = gen_synth_blobs(spec);
    auto cfg = desk_config();
    cfg.branches = 1;
    cfg.master_seed = 2024;
    const auto rnn = fit_rnn_mla(data.channels[0], data.labels, cfg);
    const auto mla = fit_mcrnn_mla(data, cfg);
    const auto mla1 = fit_mcrnn_mla1(data, cfg);
    const bool weights = detail::same_weights(rnn, mla) && detail::same_weights(mla, mla1);
    const Matrix s = forward_scores(rnn, data);
    const bool scores = s == forward_scores(mla, data) && s == forward_scores(mla1, data);
    out = std::string("weights ") + (weights ? "identical" : "DIFFER") + ", scores " + (scores ? "identical" : "DIFFER");
    return weights && scores;
  });
}

inline CheckResult check_end_to_end() {
  return detail::run(7, "synthetic 3-class 4-channel accuracy", 60.0, [](std::string& out) {
    const auto split = synthetic_benchmark();
    const auto cfg = desk_config();
    const double mla = detail::accuracy_percent(fit_mcrnn_mla(split.train, cfg), split.test);
    const double mla2 = detail::accuracy_percent(fit_mcrnn_mla2(split.train, cfg), split.test);
    out = "MCRNN-MLA " + format_fixed(mla, 2) + "% (>= 95), MCRNN-MLA2 " + format_fixed(mla2, 2) + "% (>= 90)";
    return mla >= 95.0 && mla2 >= 90.0;
  });
}

inline CheckResult check_table_ordering() {
  return detail::run(8, "training time MCRNN-MLA1 (B=3) > MCRNN-MLA", 120.0, [](std::string& out) {
    const auto split = synthetic_benchmark();
    RunConfig base;
    base.train = desk_config();
    auto report_for = [&](Variant v) {
      RunConfig cfg = base;
      cfg.variant = v;
      double seconds = 0.0;
      const auto model = timed([&] { return fit(v, split.train, cfg.train); }, seconds);
      return make_report(cfg, "synthetic", predict(model, split.test), split.test.labels, {}, seconds);
    };
    const auto mla = report_for(Variant::mcrnn_mla);
    const auto mla1 = report_for(Variant::mcrnn_mla1);
    auto valid = [](const RunReport& r) {
      std::int64_t total = 0;
      for (const auto& row : r.confusion)
        for (auto v : row) total += v;
      return r.accuracy >= 0 && r.accuracy <= 100 && total == r.test_rows && r.train_seconds > 0;
    };
    out = "MCRNN-MLA " + format_fixed(mla.train_seconds, 3) + " s, MCRNN-MLA1 " + format_fixed(mla1.train_seconds, 3) +
          " s; reports " + (valid(mla) && valid(mla1) ? "valid" : "INVALID");
    return mla1.train_seconds > mla.train_seconds && valid(mla) && valid(mla1);
  });
}

inline CheckResult check_determinism() {
  return detail::run(9, "determinism and persistence", 0.0, [](std::string& out) {
    SynthSpec spec;
    spec.rows = 600;
    spec.channels = 2;
    spec.seed = 9;
    const auto data = gen_synth_blobs(spec);
    auto cfg = desk_config();
    cfg.branches = 2;
    cfg.master_seed = 77;
    auto checksum = [](const std::vector<std::uint8_t>& b) { return crc32_of(b.data(), b.size()); };
    const auto first = fit(Variant::mcrnn_mla1, data, cfg);
    const auto a = checksum(serialize_model(first));
    const auto b = checksum(serialize_model(fit(Variant::mcrnn_mla1, data, cfg)));

    const auto path = (std::filesystem::temp_directory_path() / "dnrnn_validate_roundtrip.rnmm").string();
    save_model(first, path);
    const auto loaded = load_model(path);
    std::filesystem::remove(path);
    const bool exact = forward_scores(first, data) == forward_scores(loaded, data);
    std::ostringstream os;
    os << "model checksums " << std::hex << a << " / " << b << std::dec << ", round-trip scores "
       << (exact ? "bit-exact" : "DIFFER");
    out = os.str();
    return a == b && exact;
  });
}

// Non-gating: needs the public DSA data behind a manifest named by the
// environment variable DNRNN_DSA_MANIFEST.
inline CheckResult check_dsa(const std::string& manifest_path) {
  if (manifest_path.empty()) {
    CheckResult r;
    r.id = 10;
    r.name = "DSA reproduction (optional)";
    r.skipped = true;
    r.gating = false;
    r.passed = true;
    r.detail = "DNRNN_DSA_MANIFEST not set";
    return r;
  }
  auto r = detail::run(10, "DSA reproduction (optional)", 0.0, [&](std::string& out) {
    const auto prepared = prepare(read_manifest(manifest_path));
    auto cfg = desk_config();
    cfg.widths = {100, 1000};
    const double rnn = detail::accuracy_percent(fit(Variant::rnn_mla, prepared.train, cfg), prepared.test);
    const double mla = detail::accuracy_percent(fit(Variant::mcrnn_mla, prepared.train, cfg), prepared.test);
    out = "Improved RNN-MLA " + format_fixed(rnn, 2) + "%, MCRNN-MLA " + format_fixed(mla, 2) + "% (>= 90 each)";
    return rnn >= 90.0 && mla >= 90.0;
  });
  r.gating = false;
  return r;
}

inline std::vector<CheckResult> run_all(const std::vector<int>& only = {}, const std::string& dsa_manifest = "") {
  const std::vector<std::function<CheckResult()>> checks{
      check_root_property, check_oracle_equivalence, check_monte_carlo, check_fista,       check_pinv,
      check_reduction_chain, check_end_to_end,      check_table_ordering, check_determinism,
      [&] { return check_dsa(dsa_manifest); }};
  std::vector<CheckResult> results;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    results.push_back(checks[i]());
  }
  return results;
}

inline bool all_gating_passed(const std::vector<CheckResult>& results) {
  for (const auto& r : results)
    if (r.gating && !r.skipped && !r.passed) return false;
  return true;
}

inline std::string dsa_manifest_from_env() {
  const char* v = std::getenv("DNRNN_DSA_MANIFEST");
  return v ? std::string(v) : std::string();
}

}  // namespace dnrnn::validation
