#pragma once

// Dataset preparation: channel splitting, stratified splits, label encoding,
// per-column preprocessing with replayable statistics, and synthetic data.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dnrnn/dataset.hpp"
#include "dnrnn/error.hpp"
#include "dnrnn/numerics.hpp"
#include "dnrnn/random.hpp"

namespace dnrnn {

enum class ChannelLayout { blocked, interleaved };

// Splits the columns of X into channel_count equal-width matrices. Blocked
// takes contiguous column blocks; interleaved takes every channel_count-th column.
inline std::vector<Matrix> channelize(const Matrix& X, int channel_count, ChannelLayout layout) {
  if (channel_count < 1) throw Error(ErrorCode::invalid_parameter, "channel_count must be >= 1");
  if (X.cols() % channel_count != 0) {
    std::ostringstream os;
    os << X.cols() << " columns are not divisible into " << channel_count << " channels";
    throw Error(ErrorCode::dataset, os.str());
  }
  const Eigen::Index width = X.cols() / channel_count;
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(channel_count));
  for (int c = 0; c < channel_count; ++c) {
    if (layout == ChannelLayout::blocked) {
      out.emplace_back(X.middleCols(c * width, width));
    } else {
      Matrix m(X.rows(), width);
      for (Eigen::Index j = 0; j < width; ++j) m.col(j) = X.col(j * channel_count + c);
      out.push_back(std::move(m));
    }
  }
  return out;
}

inline Matrix one_hot(const std::vector<int>& labels, int classes) {
  if (classes < 1) throw Error(ErrorCode::invalid_parameter, "class count must be >= 1");
  Matrix Y = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) {
      std::ostringstream os;
      os << "label " << labels[i] << " at row " << i << " outside [0, " << classes << ")";
      throw Error(ErrorCode::label_format, os.str());
    }
    Y(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return Y;
}

// Inverse of one_hot for valid one-hot input.
inline std::vector<int> class_ids(const Matrix& Y) {
  std::vector<int> ids(static_cast<std::size_t>(Y.rows()));
  for (Eigen::Index i = 0; i < Y.rows(); ++i) {
    Eigen::Index k = 0;
    Y.row(i).maxCoeff(&k);
    ids[static_cast<std::size_t>(i)] = static_cast<int>(k);
  }
  return ids;
}

inline MultiChannelDataset subset_rows(const MultiChannelDataset& data, const std::vector<Eigen::Index>& rows) {
  MultiChannelDataset out;
  out.channel_names = data.channel_names;
  out.class_names = data.class_names;
  out.meta = data.meta;
  for (const auto& ch : data.channels) out.channels.emplace_back(ch(rows, Eigen::all));
  out.labels = data.labels(rows, Eigen::all);
  return out;
}

struct TrainTestSplit {
  MultiChannelDataset train;
  MultiChannelDataset test;
  std::vector<Eigen::Index> train_rows;  // ascending
  std::vector<Eigen::Index> test_rows;   // ascending
};

// Stratified random split: each class contributes round(fraction * count)
// rows to train, kept within [1, count - 1].
inline TrainTestSplit split_train_test(const MultiChannelDataset& data, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw Error(ErrorCode::invalid_parameter, "train fraction must lie in (0, 1)");
  const auto ids = class_ids(data.labels);
  std::vector<std::vector<Eigen::Index>> by_class(static_cast<std::size_t>(data.label_count()));
  for (std::size_t i = 0; i < ids.size(); ++i) by_class[static_cast<std::size_t>(ids[i])].push_back(static_cast<Eigen::Index>(i));

  Rng rng(seed);
  TrainTestSplit out;
  for (std::size_t k = 0; k < by_class.size(); ++k) {
    auto& rows = by_class[k];
    if (rows.empty()) continue;
    if (rows.size() < 2) {
      std::ostringstream os;
      os << "class " << k << " has " << rows.size() << " instance(s); stratification needs at least 2";
      throw Error(ErrorCode::dataset, os.str());
    }
    for (std::size_t i = rows.size() - 1; i > 0; --i) std::swap(rows[i], rows[rng.below(i + 1)]);
    auto take = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(rows.size())));
    take = std::clamp<std::size_t>(take, 1, rows.size() - 1);
    out.train_rows.insert(out.train_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(take));
    out.test_rows.insert(out.test_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(take), rows.end());
  }
  std::sort(out.train_rows.begin(), out.train_rows.end());
  std::sort(out.test_rows.begin(), out.test_rows.end());
  out.train = subset_rows(data, out.train_rows);
  out.test = subset_rows(data, out.test_rows);
  return out;
}

// Per-column affine map onto [0,1]; constant columns map to 0.5.
struct UnitIntervalMap {
  Vector lo;
  Vector hi;

  static UnitIntervalMap fit(const Matrix& X) {
    require_finite(X, "unit-interval input");
    if (X.rows() == 0) throw Error(ErrorCode::invalid_input, "cannot fit a unit-interval map on zero rows");
    return {X.colwise().minCoeff().transpose(), X.colwise().maxCoeff().transpose()};
  }

  // Values outside the fitted range are clamped, so replayed data stays in [0,1].
  Matrix apply(const Matrix& X) const {
    if (X.cols() != lo.size()) throw Error(ErrorCode::dimension_mismatch, "unit-interval map width mismatch");
    Matrix out(X.rows(), X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      const double span = hi(j) - lo(j);
      if (span > 0.0)
        out.col(j) = ((X.col(j).array() - lo(j)) / span).cwiseMax(0.0).cwiseMin(1.0).matrix();
      else
        out.col(j).setConstant(0.5);
    }
    return out;
  }
};

// Per-column zero mean, unit (N-1) variance; zero-variance columns map to 0.
struct Standardizer {
  Vector mean;
  Vector scale;

  static Standardizer fit(const Matrix& X) {
    require_finite(X, "standardize input");
    if (X.rows() < 2) throw Error(ErrorCode::invalid_input, "standardization needs at least two rows");
    Standardizer s;
    s.mean = X.colwise().mean().transpose();
    s.scale.resize(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j)
      s.scale(j) = std::sqrt((X.col(j).array() - s.mean(j)).square().sum() / static_cast<double>(X.rows() - 1));
    return s;
  }

  Matrix apply(const Matrix& X) const {
    if (X.cols() != mean.size()) throw Error(ErrorCode::dimension_mismatch, "standardizer width mismatch");
    Matrix out(X.rows(), X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      if (scale(j) > 0.0)
        out.col(j) = (X.col(j).array() - mean(j)) / scale(j);
      else
        out.col(j).setZero();
    }
    return out;
  }
};

// ZCA whitening: (X - mean) V diag(1/sqrt(lambda + eps)) V^T from the
// eigendecomposition of the (N-1) covariance.
struct ZcaTransform {
  Vector mean;
  Matrix whitening;

  static ZcaTransform fit(const Matrix& X, double eps) {
    require_finite(X, "ZCA input");
    if (!(eps > 0.0)) throw Error(ErrorCode::invalid_parameter, "ZCA eps must be > 0");
    if (X.rows() < 2) throw Error(ErrorCode::invalid_input, "ZCA needs at least two rows");
    ZcaTransform z;
    z.mean = X.colwise().mean().transpose();
    const Matrix centered = X.rowwise() - z.mean.transpose();
    const Matrix cov = centered.transpose() * centered / static_cast<double>(X.rows() - 1);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    const Vector inv_sqrt = (eig.eigenvalues().array().cwiseMax(0.0) + eps).rsqrt();
    z.whitening = eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
    return z;
  }

  Matrix apply(const Matrix& X) const {
    if (X.cols() != mean.size()) throw Error(ErrorCode::dimension_mismatch, "ZCA width mismatch");
    return (X.rowwise() - mean.transpose()) * whitening;
  }
};

inline Matrix normalize_unit_interval(const Matrix& X) { return UnitIntervalMap::fit(X).apply(X); }
inline Matrix standardize(const Matrix& X) { return Standardizer::fit(X).apply(X); }
inline Matrix zca_whiten(const Matrix& X, double eps = 1e-5) {
  return normalize_unit_interval(ZcaTransform::fit(X, eps).apply(X));
}

enum class Preprocess { none, unit, standardize, zca };

inline std::string_view preprocess_key(Preprocess p) {
  switch (p) {
    case Preprocess::none: return "none";
    case Preprocess::unit: return "unit";
    case Preprocess::standardize: return "standardize";
    case Preprocess::zca: return "zca";
  }
  return "?";
}

inline std::optional<Preprocess> parse_preprocess(std::string_view key) {
  for (auto p : {Preprocess::none, Preprocess::unit, Preprocess::standardize, Preprocess::zca})
    if (key == preprocess_key(p)) return p;
  return std::nullopt;
}

// One channel's fitted preprocessing: an optional standardize or ZCA stage
// followed by the unit-interval map. Statistics come from the data passed to
// fit() and are replayed unchanged by apply().
struct ChannelTransform {
  Preprocess kind = Preprocess::unit;
  double eps = 1e-5;
  Standardizer standardizer;
  ZcaTransform zca;
  UnitIntervalMap unit;

  static ChannelTransform fit(const Matrix& X, Preprocess kind, double eps = 1e-5) {
    ChannelTransform t;
    t.kind = kind;
    t.eps = eps;
    if (kind == Preprocess::none) {
      require_finite(X, "channel");
      if ((X.array() < 0.0).any() || (X.array() > 1.0).any())
        throw Error(ErrorCode::dataset, "preprocess = none requires features already in [0,1]");
      return t;
    }
    Matrix staged = X;
    if (kind == Preprocess::standardize) {
      t.standardizer = Standardizer::fit(X);
      staged = t.standardizer.apply(X);
    } else if (kind == Preprocess::zca) {
      t.zca = ZcaTransform::fit(X, eps);
      staged = t.zca.apply(X);
    }
    t.unit = UnitIntervalMap::fit(staged);
    return t;
  }

  Matrix apply(const Matrix& X) const {
    switch (kind) {
      case Preprocess::none:
        require_finite(X, "channel");
        return X.cwiseMax(0.0).cwiseMin(1.0);
      case Preprocess::unit: return unit.apply(X);
      case Preprocess::standardize: return unit.apply(standardizer.apply(X));
      case Preprocess::zca: return unit.apply(zca.apply(X));
    }
    return X;
  }
};

struct Preprocessor {
  std::vector<ChannelTransform> channels;

  static Preprocessor fit(const MultiChannelDataset& data, Preprocess kind, double eps = 1e-5) {
    Preprocessor p;
    for (const auto& ch : data.channels) p.channels.push_back(ChannelTransform::fit(ch, kind, eps));
    return p;
  }

  MultiChannelDataset apply(const MultiChannelDataset& data) const {
    if (data.channels.size() != channels.size())
      throw Error(ErrorCode::dimension_mismatch, "preprocessor channel count mismatch");
    MultiChannelDataset out = data;
    for (std::size_t c = 0; c < channels.size(); ++c) out.channels[c] = channels[c].apply(data.channels[c]);
    return out;
  }
};

struct SynthSpec {
  Eigen::Index rows = 2000;
  int channels = 4;
  int classes = 3;
  Eigen::Index dims = 25;  // per channel
  double separation = 6.0;
  std::uint64_t seed = 1;
};

// Gaussian class clusters with unit noise. On every channel the class means
// sit at pairwise distance `separation` (orthonormal directions scaled by
// separation / sqrt(2) when classes <= dims). Rows cycle through the classes;
// each channel is mapped onto [0,1] column-wise.
inline MultiChannelDataset gen_synth_blobs(const SynthSpec& spec) {
  if (spec.rows < 1 || spec.channels < 1 || spec.classes < 1 || spec.dims < 1)
    throw Error(ErrorCode::invalid_parameter, "synthetic dataset sizes must be >= 1");
  if (!(spec.separation >= 0.0)) throw Error(ErrorCode::invalid_parameter, "separation must be >= 0");

  MultiChannelDataset data;
  std::vector<int> labels(static_cast<std::size_t>(spec.rows));
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % static_cast<std::size_t>(spec.classes));
  data.labels = one_hot(labels, spec.classes);

  for (int c = 0; c < spec.channels; ++c) {
    const std::string name = "ch" + std::to_string(c);
    Rng rng(derive_seed(spec.seed, name, 0, 0, SeedRole::synthetic));
    Matrix directions(spec.dims, spec.classes);
    for (Eigen::Index j = 0; j < directions.cols(); ++j)
      for (Eigen::Index i = 0; i < directions.rows(); ++i) directions(i, j) = rng.normal();
    if (spec.classes <= spec.dims) {
      Eigen::HouseholderQR<Matrix> qr(directions);
      directions = qr.householderQ() * Matrix::Identity(spec.dims, spec.classes);
    } else {
      directions.colwise().normalize();
    }
    const Matrix means = directions * (spec.separation / std::sqrt(2.0));

    Matrix X(spec.rows, spec.dims);
    for (Eigen::Index i = 0; i < spec.rows; ++i)
      for (Eigen::Index j = 0; j < spec.dims; ++j) X(i, j) = means(j, labels[static_cast<std::size_t>(i)]) + rng.normal();
    data.channels.push_back(normalize_unit_interval(X));
    data.channel_names.push_back(name);
  }
  std::ostringstream meta;
  meta << "synthetic blobs N=" << spec.rows << " C=" << spec.channels << " K=" << spec.classes << " D=" << spec.dims
       << " separation=" << spec.separation << " seed=" << spec.seed;
  data.meta = meta.str();
  return data;
}

}  // namespace dnrnn
