#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "aamgan/tensor.hpp"

namespace aamgan {

// splitmix64; used to derive independent per-iteration streams from (seed, counter).
uint64_t mix64(uint64_t x);
uint64_t derive_seed(uint64_t seed, uint64_t stream, uint64_t counter);

// Deterministic RNG. Distributions are implemented here rather than with
// std::*_distribution so that sequences are identical across standard
// library implementations. State serializes losslessly for checkpoints.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Multiply-high mapping; bias is negligible for n << 2^64.
  int uniform_int(int n) {
    return static_cast<int>((static_cast<unsigned __int128>(next_u64()) * static_cast<uint64_t>(n)) >> 64);
  }

  // Standard normal via Box-Muller with a cached spare.
  double normal();

  template <typename T>
  void fill_normal(Tensor<T>& t, double stddev) {
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(normal() * stddev);
  }

  template <typename RandomIt>
  void shuffle(RandomIt first, RandomIt last) {
    const auto n = last - first;
    for (auto i = n - 1; i > 0; --i) std::swap(first[i], first[uniform_int(static_cast<int>(i) + 1)]);
  }

  std::string serialize() const;
  static Rng deserialize(const std::string& s);

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace aamgan
