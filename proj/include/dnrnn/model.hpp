#pragma once

// Layer-wise trainers for multi-layer architectures of dense nuclei.
//
// Every hidden encoder layer is fit by a non-negative sparse reconstruction:
// a random non-negative projection W-bar gives features adj(zeta(X W-bar)),
// the modified FISTA reconstructs X from them, and the transposed solution
// becomes the encoding weights. The last hidden layer is random and the
// readout is a pseudoinverse least-squares fit to one-hot labels.

#include <atomic>
#include <cstdint>
#include <exception>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "dnrnn/dataset.hpp"
#include "dnrnn/error.hpp"
#include "dnrnn/nucleus.hpp"
#include "dnrnn/numerics.hpp"
#include "dnrnn/random.hpp"

namespace dnrnn {

enum class Variant : std::uint32_t {
  rnn_mla = 1,
  mcrnn_mla = 2,
  mcrnn_mla1 = 3,
  mcrnn_mla2 = 4,
};

inline std::string_view variant_key(Variant v) {
  switch (v) {
    case Variant::rnn_mla: return "rnn_mla";
    case Variant::mcrnn_mla: return "mcrnn_mla";
    case Variant::mcrnn_mla1: return "mcrnn_mla1";
    case Variant::mcrnn_mla2: return "mcrnn_mla2";
  }
  return "?";
}

inline std::string_view variant_label(Variant v) {
  switch (v) {
    case Variant::rnn_mla: return "Improved RNN-MLA";
    case Variant::mcrnn_mla: return "MCRNN-MLA";
    case Variant::mcrnn_mla1: return "MCRNN-MLA1";
    case Variant::mcrnn_mla2: return "MCRNN-MLA2";
  }
  return "?";
}

inline std::optional<Variant> parse_variant(std::string_view key) {
  for (auto v : {Variant::rnn_mla, Variant::mcrnn_mla, Variant::mcrnn_mla1, Variant::mcrnn_mla2})
    if (key == variant_key(v)) return v;
  return std::nullopt;
}

struct EncoderLayer {
  Matrix weights;  // D_in x H, entrywise >= 0, already rescaled
  ClusterParams cluster;
  double activation_max = 0.0;  // max of zeta(X E) before rescaling
  bool fista_converged = false;
  double reconstruction_error = 0.0;  // ||X - A W||_F at fit time

  Eigen::Index input_width() const { return weights.rows(); }
  Eigen::Index width() const { return weights.cols(); }
};

using EncoderStack = std::vector<EncoderLayer>;

struct TrainConfig {
  int layers = 2;                  // hidden layers L >= 2
  std::vector<int> widths{50, 30};  // one per hidden layer
  int branches = 3;
  ClusterParams cluster;
  FistaConfig fista;
  std::uint64_t master_seed = 1;
  int threads = 1;
  double pinv_tol = 1e-10;

  void validate() const {
    if (layers < 2) throw Error(ErrorCode::invalid_parameter, "at least two hidden layers are required");
    if (static_cast<int>(widths.size()) != layers)
      throw Error(ErrorCode::invalid_parameter, "widths must list one width per hidden layer");
    for (int w : widths)
      if (w < 1) throw Error(ErrorCode::invalid_parameter, "layer widths must be >= 1");
    if (branches < 1) throw Error(ErrorCode::invalid_parameter, "branches must be >= 1");
    if (threads < 1) throw Error(ErrorCode::invalid_parameter, "threads must be >= 1");
    cluster.validate();
    fista.validate();
  }
};

struct ModelArtifact {
  Variant variant = Variant::mcrnn_mla;
  ClusterParams cluster;
  int branches = 1;
  std::vector<std::string> channel_names;
  std::vector<Eigen::Index> channel_dims;
  std::vector<EncoderStack> stacks;  // channel-major: index c * branches + b
  std::optional<Matrix> random_layer;
  Matrix output;
  Eigen::Index label_count = 0;

  std::size_t channel_count() const { return channel_dims.size(); }
  const EncoderStack& stack(std::size_t channel, std::size_t branch) const {
    return stacks.at(channel * static_cast<std::size_t>(branches) + branch);
  }
  std::size_t depth() const { return stacks.empty() ? 0 : stacks.front().size(); }

  Eigen::Index feature_width() const {
    Eigen::Index w = 0;
    for (const auto& s : stacks) w += s.empty() ? 0 : s.back().width();
    return w;
  }

  // Structural invariants; throws on the first violation.
  void validate() const {
    auto fail = [](const std::string& why) { throw Error(ErrorCode::format, why); };
    if (branches < 1) fail("branches must be >= 1");
    if (channel_names.size() != channel_dims.size()) fail("channel names and dims disagree");
    if (stacks.size() != channel_dims.size() * static_cast<std::size_t>(branches)) fail("stack count != C * B");
    if (depth() < 1) fail("encoder stacks are empty");
    for (std::size_t c = 0; c < channel_count(); ++c) {
      for (int b = 0; b < branches; ++b) {
        const auto& s = stack(c, b);
        if (s.size() != depth()) fail("encoder stack depths differ");
        Eigen::Index in = channel_dims[c];
        for (const auto& layer : s) {
          if (layer.weights.rows() != in) fail("encoder layer input width mismatch");
          if ((layer.weights.array() < 0.0).any()) fail("negative encoder weight");
          in = layer.width();
        }
      }
    }
    Eigen::Index width = feature_width();
    if (random_layer) {
      if (variant == Variant::mcrnn_mla2) fail("MCRNN-MLA2 has no random layer");
      if (random_layer->rows() != width) fail("random layer rows != concatenated width");
      if ((random_layer->array() < 0.0).any() || (random_layer->array() > 1.0).any())
        fail("random layer entries outside [0,1]");
      width = random_layer->cols();
    } else if (variant != Variant::mcrnn_mla2) {
      fail("random layer missing");
    }
    if (output.rows() != width || output.cols() != label_count) fail("output weight shape mismatch");
  }
};

namespace detail {

inline void require_nonnegative(const Matrix& X, const std::string& what) {
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      if (!std::isfinite(X(i, j)) || X(i, j) < 0.0) {
        std::ostringstream os;
        os << what << " entry (" << i << ", " << j << ") = " << X(i, j) << " is negative or non-finite";
        throw Error(ErrorCode::invalid_input, os.str());
      }
}

// Runs task(i) for i in [0, count) on up to `threads` workers. Exceptions are
// rethrown in task order, so the reported failure does not depend on timing.
template <class Task>
void run_tasks(std::size_t count, int threads, Task&& task) {
  std::vector<std::exception_ptr> errors(count);
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, count); ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            task(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline Matrix concat_columns(const std::vector<Matrix>& blocks) {
  Eigen::Index rows = blocks.empty() ? 0 : blocks.front().rows();
  Eigen::Index cols = 0;
  for (const auto& b : blocks) cols += b.cols();
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    out.middleCols(at, b.cols()) = b;
    at += b.cols();
  }
  return out;
}

}  // namespace detail

// zeta(X E) for one fitted layer.
inline Matrix encode(const EncoderLayer& layer, const Matrix& X) {
  if (X.cols() != layer.input_width()) {
    std::ostringstream os;
    os << "encoder expects " << layer.input_width() << " columns, got " << X.cols();
    throw Error(ErrorCode::dimension_mismatch, os.str());
  }
  detail::require_nonnegative(X, "encoder input");
  return zeta_map(layer.cluster, X * layer.weights);
}

// Fits one hidden layer on non-negative input X (N x D) with width H.
inline EncoderLayer fit_encoder_layer(const Matrix& X, int width, const ClusterParams& cluster,
                                      const FistaConfig& fista, std::uint64_t seed) {
  if (width < 1) throw Error(ErrorCode::invalid_parameter, "layer width must be >= 1");
  detail::require_nonnegative(X, "training input");

  const Matrix projection = uniform_matrix(X.cols(), width, seed);
  const Matrix features = adj(zeta_map(cluster, X * projection));
  const FistaResult solved = fista_nn_l1(features, X, fista);

  EncoderLayer layer;
  layer.cluster = cluster;
  layer.weights = solved.weights.transpose();
  layer.fista_converged = solved.converged;
  layer.reconstruction_error = (X - features * solved.weights).norm();

  const double m = zeta_map(cluster, X * layer.weights).maxCoeff();
  if (!(m > 0.0)) throw Error(ErrorCode::dead_layer, "all activations are zero");
  layer.activation_max = m;
  layer.weights /= 10.0 * m;
  return layer;
}

namespace detail {

struct StackFit {
  EncoderStack stack;
  Matrix encoded;
};

inline StackFit fit_stack(const Matrix& X, const TrainConfig& cfg, const std::string& channel, int branch) {
  StackFit out;
  out.encoded = X;
  for (int l = 0; l + 1 < cfg.layers; ++l) {
    const auto seed = derive_seed(cfg.master_seed, channel, static_cast<std::uint64_t>(l), static_cast<std::uint64_t>(branch),
                                  SeedRole::encoder_projection);
    try {
      out.stack.push_back(fit_encoder_layer(out.encoded, cfg.widths[l], cfg.cluster, cfg.fista, seed));
    } catch (const Error& e) {
      std::ostringstream os;
      os << "layer " << l + 1 << ", channel " << channel << ", branch " << branch + 1 << ": " << e.what();
      throw Error(e.code(), os.str());
    }
    out.encoded = encode(out.stack.back(), out.encoded);
  }
  return out;
}

inline ModelArtifact fit_multichannel(const MultiChannelDataset& data, const TrainConfig& cfg, Variant variant,
                                      int branches) {
  cfg.validate();
  data.validate();
  if (data.rows() < 2) throw Error(ErrorCode::dataset, "at least two training rows are required");

  ModelArtifact model;
  model.variant = variant;
  model.cluster = cfg.cluster;
  model.branches = branches;
  model.channel_names = data.channel_names;
  model.label_count = data.label_count();
  for (const auto& ch : data.channels) model.channel_dims.push_back(ch.cols());

  const std::size_t tasks = data.channel_count() * static_cast<std::size_t>(branches);
  std::vector<StackFit> fits(tasks);
  run_tasks(tasks, cfg.threads, [&](std::size_t i) {
    const std::size_t c = i / static_cast<std::size_t>(branches);
    const int b = static_cast<int>(i % static_cast<std::size_t>(branches));
    fits[i] = fit_stack(data.channels[c], cfg, data.channel_names[c], b);
  });

  std::vector<Matrix> blocks;
  blocks.reserve(tasks);
  for (auto& f : fits) {
    model.stacks.push_back(std::move(f.stack));
    blocks.push_back(std::move(f.encoded));
  }
  Matrix features = concat_columns(blocks);

  if (variant != Variant::mcrnn_mla2) {
    const auto seed = derive_seed(cfg.master_seed, "", static_cast<std::uint64_t>(cfg.layers), 0, SeedRole::random_layer);
    model.random_layer = uniform_matrix(features.cols(), cfg.widths.back(), seed);
    features = zeta_map(cfg.cluster, features * *model.random_layer);
  }
  model.output = pinv(features, cfg.pinv_tol) * data.labels;
  return model;
}

}  // namespace detail

// Single-channel architecture; X must be non-negative, Y one-hot.
inline ModelArtifact fit_rnn_mla(const Matrix& X, const Matrix& Y, const TrainConfig& cfg) {
  MultiChannelDataset data;
  data.channels.push_back(X);
  data.labels = Y;
  data.name_channels();
  return detail::fit_multichannel(data, cfg, Variant::rnn_mla, 1);
}

// One encoder stack per channel; encodings are concatenated before the random layer.
inline ModelArtifact fit_mcrnn_mla(const MultiChannelDataset& data, const TrainConfig& cfg) {
  return detail::fit_multichannel(data, cfg, Variant::mcrnn_mla, 1);
}

// cfg.branches independent stacks per channel.
inline ModelArtifact fit_mcrnn_mla1(const MultiChannelDataset& data, const TrainConfig& cfg) {
  return detail::fit_multichannel(data, cfg, Variant::mcrnn_mla1, cfg.branches);
}

// As MCRNN-MLA1 without the random layer: the readout sees the concatenated encodings.
inline ModelArtifact fit_mcrnn_mla2(const MultiChannelDataset& data, const TrainConfig& cfg) {
  return detail::fit_multichannel(data, cfg, Variant::mcrnn_mla2, cfg.branches);
}

inline ModelArtifact fit(Variant variant, const MultiChannelDataset& data, const TrainConfig& cfg) {
  switch (variant) {
    case Variant::rnn_mla: {
      MultiChannelDataset flat;
      flat.channels.push_back(detail::concat_columns(data.channels));
      flat.labels = data.labels;
      flat.name_channels();
      return detail::fit_multichannel(flat, cfg, Variant::rnn_mla, 1);
    }
    case Variant::mcrnn_mla: return fit_mcrnn_mla(data, cfg);
    case Variant::mcrnn_mla1: return fit_mcrnn_mla1(data, cfg);
    case Variant::mcrnn_mla2: return fit_mcrnn_mla2(data, cfg);
  }
  throw Error(ErrorCode::invalid_parameter, "unknown variant");
}

// Class scores, N x K. `channels` must match the model's channel widths; an
// RNN-MLA model also accepts the per-channel blocks of a multi-channel
// dataset and concatenates them.
inline Matrix forward_scores(const ModelArtifact& model, const std::vector<Matrix>& channels, int threads = 1) {
  std::vector<Matrix> inputs = channels;
  if (model.variant == Variant::rnn_mla && inputs.size() > 1) inputs = {detail::concat_columns(inputs)};
  if (inputs.size() != model.channel_count()) {
    std::ostringstream os;
    os << "model has " << model.channel_count() << " channels, data has " << inputs.size();
    throw Error(ErrorCode::dimension_mismatch, os.str());
  }
  for (std::size_t c = 0; c < inputs.size(); ++c) {
    if (inputs[c].cols() != model.channel_dims[c] || inputs[c].rows() != inputs.front().rows()) {
      std::ostringstream os;
      os << "channel " << c << " is " << inputs[c].rows() << "x" << inputs[c].cols() << ", expected width "
         << model.channel_dims[c];
      throw Error(ErrorCode::dimension_mismatch, os.str());
    }
  }

  const auto branches = static_cast<std::size_t>(model.branches);
  std::vector<Matrix> blocks(model.stacks.size());
  detail::run_tasks(model.stacks.size(), threads, [&](std::size_t i) {
    Matrix X = inputs[i / branches];
    for (const auto& layer : model.stacks[i]) X = encode(layer, X);
    blocks[i] = std::move(X);
  });
  Matrix features = detail::concat_columns(blocks);
  if (model.random_layer) features = zeta_map(model.cluster, features * *model.random_layer);
  return features * model.output;
}

inline Matrix forward_scores(const ModelArtifact& model, const Matrix& X) {
  return forward_scores(model, std::vector<Matrix>{X});
}

inline Matrix forward_scores(const ModelArtifact& model, const MultiChannelDataset& data, int threads = 1) {
  return forward_scores(model, data.channels, threads);
}

// Row-wise argmax; ties go to the lowest class index.
inline std::vector<int> argmax_rows(const Matrix& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < scores.cols(); ++k)
      if (scores(i, k) > scores(i, best)) best = k;
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

template <class Data>
std::vector<int> predict(const ModelArtifact& model, const Data& data) {
  return argmax_rows(forward_scores(model, data));
}

}  // namespace dnrnn
