#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace dnrnn {

// Platform-stable random source. std::mt19937_64 has a standardized output
// sequence; the distributions below are written out so that draws are
// bit-identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer on [0, bound). Lemire's multiply-shift with rejection.
  std::uint64_t below(std::uint64_t bound) {
    std::uint64_t x = engine_();
    __uint128_t m = static_cast<__uint128_t>(x) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = -bound % bound;
      while (low < threshold) {
        x = engine_();
        m = static_cast<__uint128_t>(x) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  // Box-Muller; the second variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

enum class SeedRole : std::uint32_t {
  encoder_projection = 1,  // the random non-negative W-bar of a reconstruction problem
  random_layer = 2,        // W_L
  split = 3,
  synthetic = 4,
  power_iteration = 5,
};

namespace detail {

inline void fnv1a(std::uint64_t& h, const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
}

inline void fnv1a_u64(std::uint64_t& h, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  fnv1a(h, bytes, 8);
}

}  // namespace detail

// Child seed for one (channel, layer, branch, role) task. Channels are keyed by
// name so that removing a channel leaves the other channels' seeds untouched.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view channel, std::uint64_t layer,
                                 std::uint64_t branch, SeedRole role) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  detail::fnv1a_u64(h, master);
  detail::fnv1a_u64(h, channel.size());
  detail::fnv1a(h, channel.data(), channel.size());
  detail::fnv1a_u64(h, layer);
  detail::fnv1a_u64(h, branch);
  detail::fnv1a_u64(h, static_cast<std::uint64_t>(role));
  return splitmix64(h);
}

// rows x cols matrix uniform on [0, 1), filled in row-major order.
inline Eigen::MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform();
  return m;
}

}  // namespace dnrnn
