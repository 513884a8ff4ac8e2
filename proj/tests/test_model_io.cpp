#include <filesystem>

#include <gtest/gtest.h>

#include "dnrnn/data.hpp"
#include "dnrnn/model_io.hpp"

using namespace dnrnn;

namespace {

MultiChannelDataset data_for(int channels) {
  SynthSpec s;
  s.rows = 40;
  s.channels = channels;
  s.classes = 2;
  s.dims = 5;
  s.separation = 4;
  return gen_synth_blobs(s);
}

ModelArtifact small_model(Variant v, int channels, int branches) {
  TrainConfig cfg;
  cfg.widths = {4, 3};
  cfg.branches = branches;
  return fit(v, data_for(channels), cfg);
}

void reseal(std::vector<std::uint8_t>& bytes) {
  const std::size_t body = bytes.size() - 4;
  const auto crc = crc32_of(bytes.data(), body);
  for (int i = 0; i < 4; ++i) bytes[body + i] = static_cast<std::uint8_t>(crc >> (8 * i));
}

ErrorCode code_of(std::vector<std::uint8_t> bytes) {
  try {
    deserialize_model(std::move(bytes));
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::io;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("dnrnn_test_" + name)).string();
}

}  // namespace

TEST(Crc32, KnownVector) {
  const std::string s = "123456789";
  EXPECT_EQ(crc32_of(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()), 0xCBF43926u);
}

TEST(ModelIo, RoundTripIsBitExact) {
  for (auto v : {Variant::rnn_mla, Variant::mcrnn_mla, Variant::mcrnn_mla1, Variant::mcrnn_mla2}) {
    const auto model = small_model(v, 2, 2);
    const auto path = temp_path("roundtrip.rnmm");
    save_model(model, path);
    const auto back = load_model(path);
    std::filesystem::remove(path);
    EXPECT_EQ(back.variant, v);
    EXPECT_EQ(serialize_model(back), serialize_model(model));
    const auto data = data_for(2);
    EXPECT_EQ(forward_scores(back, data), forward_scores(model, data));
  }
}

TEST(ModelIo, StructuralCensus) {
  TrainConfig cfg;
  cfg.widths = {4, 3};
  cfg.branches = 2;
  const auto model = fit(Variant::mcrnn_mla1, data_for(3), cfg);
  const auto back = deserialize_model(serialize_model(model));
  EXPECT_EQ(back.stacks.size(), 6u);
  EXPECT_EQ(back.channel_count(), 3u);
  EXPECT_EQ(back.branches, 2);
  EXPECT_EQ(back.depth(), 1u);
  EXPECT_EQ(back.channel_names, model.channel_names);
}

TEST(ModelIo, HeaderLayout) {
  const auto bytes = serialize_model(small_model(Variant::mcrnn_mla2, 1, 1));
  ASSERT_GT(bytes.size(), 12u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "RNMM");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[8], static_cast<std::uint8_t>(Variant::mcrnn_mla2));
}

TEST(ModelIo, BadMagic) {
  auto bytes = serialize_model(small_model(Variant::mcrnn_mla, 1, 1));
  bytes[0] = 'X';
  reseal(bytes);
  EXPECT_EQ(code_of(bytes), ErrorCode::format);
}

TEST(ModelIo, ChecksumMismatch) {
  auto bytes = serialize_model(small_model(Variant::mcrnn_mla, 1, 1));
  bytes[bytes.size() / 2] ^= 0x01;
  try {
    deserialize_model(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::format);
    EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos);
  }
}

TEST(ModelIo, Truncation) {
  const auto bytes = serialize_model(small_model(Variant::mcrnn_mla, 1, 1));
  for (std::size_t keep : {std::size_t{0}, std::size_t{3}, std::size_t{10}, bytes.size() / 2, bytes.size() - 1}) {
    std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(keep));
    EXPECT_EQ(code_of(cut), ErrorCode::format) << keep;
    // resealed truncations still fail on the payload
    if (keep >= 8) {
      cut.resize(keep + 4);
      reseal(cut);
      EXPECT_EQ(code_of(cut), ErrorCode::format) << keep;
    }
  }
}

TEST(ModelIo, VersionMismatch) {
  auto bytes = serialize_model(small_model(Variant::mcrnn_mla, 1, 1));
  bytes[4] = 2;
  reseal(bytes);
  try {
    deserialize_model(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("version 2"), std::string::npos);
  }
}

TEST(ModelIo, MissingFile) {
  try {
    load_model(temp_path("does_not_exist.rnmm"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::io);
  }
}

TEST(MatrixIo, RoundTripIsBitExact) {
  Matrix m(3, 4);
  m << 0.1, -2.5e-300, 1e300, 0, 1.0 / 3.0, -0.0, 7, 8, 9, 10, 11, 12;
  const auto path = temp_path("m.rnmx");
  save_matrix(m, path);
  const Matrix back = load_matrix(path);
  std::filesystem::remove(path);
  ASSERT_EQ(back.rows(), 3);
  ASSERT_EQ(back.cols(), 4);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    EXPECT_EQ(std::bit_cast<std::uint64_t>(back(i)), std::bit_cast<std::uint64_t>(m(i)));
}
