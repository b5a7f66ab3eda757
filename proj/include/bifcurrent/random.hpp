#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace bifcurrent {

using Rng = std::mt19937_64;

/// 64-bit FNV-1a over the master seed (8 bytes, little endian) followed by the
/// task path. Stable across platforms and runs.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view task_path) {
  std::uint64_t h = 1469598103934665603ull;
  for (int k = 0; k < 8; ++k) {
    h ^= (master >> (8 * k)) & 0xffu;
    h *= 1099511628211ull;
  }
  for (unsigned char c : task_path) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Standard normal variates from a seeded engine.
struct NormalSource {
  explicit NormalSource(std::uint64_t seed) : rng(seed) {}
  double operator()() { return dist(rng); }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

  Rng rng;
  std::normal_distribution<double> dist{0.0, 1.0};
};

}  // namespace bifcurrent
