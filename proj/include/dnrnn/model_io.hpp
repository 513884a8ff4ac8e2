#pragma once

// Model file layout (all integers and floats little-endian):
//
//   "RNMM"  u32 version  u32 variant
//   cluster: u32 n, f64 p, f64 r, f64 lambda_plus, f64 lambda_minus
//   u32 branches  u32 channels  u32 depth  u64 label_count
//   per channel: str name, u64 input width
//   per stack (channel-major, then branch), per layer:
//       f64 activation_max, u8 fista_converged, f64 reconstruction_error, matrix
//   u8 has_random_layer [matrix]
//   matrix output
//   u32 CRC-32 of every preceding byte
//
// A matrix is u64 rows, u64 cols, then rows*cols f64 in row-major order; a
// str is u32 length followed by UTF-8 bytes.

#include <string>

#include "dnrnn/binary_io.hpp"
#include "dnrnn/model.hpp"

namespace dnrnn {

inline constexpr std::string_view kModelMagic = "RNMM";
inline constexpr std::uint32_t kModelFormatVersion = 1;

inline std::vector<std::uint8_t> serialize_model(const ModelArtifact& model) {
  model.validate();
  ByteWriter w;
  w.bytes(kModelMagic);
  w.u32(kModelFormatVersion);
  w.u32(static_cast<std::uint32_t>(model.variant));
  w.u32(static_cast<std::uint32_t>(model.cluster.cells()));
  w.f64(model.cluster.p());
  w.f64(model.cluster.r());
  w.f64(model.cluster.lambda_plus());
  w.f64(model.cluster.lambda_minus());
  w.u32(static_cast<std::uint32_t>(model.branches));
  w.u32(static_cast<std::uint32_t>(model.channel_count()));
  w.u32(static_cast<std::uint32_t>(model.depth()));
  w.u64(static_cast<std::uint64_t>(model.label_count));
  for (std::size_t c = 0; c < model.channel_count(); ++c) {
    w.str(model.channel_names[c]);
    w.u64(static_cast<std::uint64_t>(model.channel_dims[c]));
  }
  for (const auto& stack : model.stacks) {
    for (const auto& layer : stack) {
      w.f64(layer.activation_max);
      w.u8(layer.fista_converged ? 1 : 0);
      w.f64(layer.reconstruction_error);
      w.matrix(layer.weights);
    }
  }
  w.u8(model.random_layer ? 1 : 0);
  if (model.random_layer) w.matrix(*model.random_layer);
  w.matrix(model.output);
  w.crc_trailer();
  return w.buffer();
}

inline ModelArtifact deserialize_model(std::vector<std::uint8_t> bytes) {
  ByteReader r(std::move(bytes));
  r.expect_magic(kModelMagic);
  r.verify_crc_trailer();
  if (const auto v = r.u32(); v != kModelFormatVersion)
    throw Error(ErrorCode::format, "model format version " + std::to_string(v) + " is not supported (expected " +
                                       std::to_string(kModelFormatVersion) + ")");

  ModelArtifact m;
  const auto variant = r.u32();
  if (variant < 1 || variant > 4) throw Error(ErrorCode::format, "unknown variant tag " + std::to_string(variant));
  m.variant = static_cast<Variant>(variant);
  const auto cells = static_cast<int>(r.u32());
  const double p = r.f64();
  const double rate = r.f64();
  const double lp = r.f64();
  const double lm = r.f64();
  try {
    m.cluster = ClusterParams::make(cells, p, rate, lp, lm);
  } catch (const Error& e) {
    throw Error(ErrorCode::format, std::string("stored cluster parameters are invalid: ") + e.what());
  }
  m.branches = static_cast<int>(r.u32());
  const auto channels = r.u32();
  const auto depth = r.u32();
  m.label_count = static_cast<Eigen::Index>(r.u64());
  for (std::uint32_t c = 0; c < channels; ++c) {
    m.channel_names.push_back(r.str());
    m.channel_dims.push_back(static_cast<Eigen::Index>(r.u64()));
  }
  const auto stacks = static_cast<std::size_t>(channels) * static_cast<std::size_t>(m.branches);
  for (std::size_t s = 0; s < stacks; ++s) {
    EncoderStack stack;
    for (std::uint32_t l = 0; l < depth; ++l) {
      EncoderLayer layer;
      layer.cluster = m.cluster;
      layer.activation_max = r.f64();
      layer.fista_converged = r.u8() != 0;
      layer.reconstruction_error = r.f64();
      layer.weights = r.matrix();
      stack.push_back(std::move(layer));
    }
    m.stacks.push_back(std::move(stack));
  }
  if (r.u8() != 0) m.random_layer = r.matrix();
  m.output = r.matrix();
  if (!r.at_end()) throw Error(ErrorCode::format, "trailing bytes after model payload");
  m.validate();
  return m;
}

inline void save_model(const ModelArtifact& model, const std::string& path) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::io, "write failed for " + path);
}

inline ModelArtifact load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(std::move(bytes));
}

}  // namespace dnrnn
