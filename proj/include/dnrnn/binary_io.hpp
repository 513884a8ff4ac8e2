#pragma once

// Little-endian binary containers: a byte writer/reader pair, CRC-32 framing,
// and the standalone matrix file ("RNMX").

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <zlib.h>

#include "dnrnn/error.hpp"
#include "dnrnn/numerics.hpp"

namespace dnrnn {

inline std::uint32_t crc32_of(const std::uint8_t* data, std::size_t size) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in pieces.
  while (size > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    size -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

class ByteWriter {
 public:
  void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  // rows, cols, then entries in row-major order.
  void matrix(const Matrix& m) {
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) f64(m(i, j));
  }
  void crc_trailer() { u32(crc32_of(buf_.data(), buf_.size())); }

  const std::vector<std::uint8_t>& buffer() const { return buf_; }

  void write_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, "cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
    if (!out) throw Error(ErrorCode::io, "write failed for " + path);
  }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<std::uint8_t> data) : buf_(std::move(data)) {}

  static ByteReader from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io, "cannot open " + path);
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return ByteReader(std::move(data));
  }

  // Checks and strips the trailing CRC-32 of everything before it.
  void verify_crc_trailer() {
    if (buf_.size() < 4) throw Error(ErrorCode::format, "truncated file (no checksum)");
    const std::size_t body = buf_.size() - 4;
    std::uint32_t stored = 0;
    for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(buf_[body + i]) << (8 * i);
    if (crc32_of(buf_.data(), body) != stored) throw Error(ErrorCode::format, "checksum mismatch");
    end_ = body;
  }

  void expect_magic(std::string_view magic) {
    need(magic.size());
    if (std::memcmp(buf_.data() + pos_, magic.data(), magic.size()) != 0)
      throw Error(ErrorCode::format, "bad magic bytes, expected " + std::string(magic));
    pos_ += magic.size();
  }

  std::uint8_t u8() {
    need(1);
    return buf_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf_[pos_++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const auto n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  Matrix matrix() {
    const auto rows = u64();
    const auto cols = u64();
    if (rows != 0 && cols > (end_ - pos_) / 8 / rows) throw Error(ErrorCode::format, "truncated matrix payload");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = f64();
    return m;
  }

  bool at_end() const { return pos_ == end_; }

 private:
  void need(std::size_t n) const {
    if (n > end_ - pos_) throw Error(ErrorCode::format, "truncated file");
  }

  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
  std::size_t end_ = buf_.size();
};

inline constexpr std::string_view kMatrixMagic = "RNMX";
inline constexpr std::uint32_t kMatrixFormatVersion = 1;

// Matrix file: "RNMX", u32 version, u64 rows, u64 cols, f64 row-major, CRC-32.
inline void save_matrix(const Matrix& m, const std::string& path) {
  ByteWriter w;
  w.bytes(kMatrixMagic);
  w.u32(kMatrixFormatVersion);
  w.matrix(m);
  w.crc_trailer();
  w.write_file(path);
}

inline Matrix load_matrix(const std::string& path) {
  auto r = ByteReader::from_file(path);
  r.expect_magic(kMatrixMagic);
  r.verify_crc_trailer();
  if (const auto v = r.u32(); v != kMatrixFormatVersion)
    throw Error(ErrorCode::format, "unsupported matrix format version " + std::to_string(v));
  Matrix m = r.matrix();
  if (!r.at_end()) throw Error(ErrorCode::format, "trailing bytes in matrix file");
  return m;
}

}  // namespace dnrnn
