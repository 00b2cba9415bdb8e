// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace autoprog {

// Deterministic random source. The mt19937_64 engine output is specified
// bit-exactly by the standard; distributions are implemented directly on top
// of it so results do not depend on standard-library distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53-bit resolution.
  double uniform01();
  // Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
  std::uint64_t uniform_below(std::uint64_t n);
  double normal(double mean = 0.0, double stddev = 1.0);
  // Normal(0, stddev) resampled until |z| <= 2*stddev.
  float trunc_normal(float stddev);
  bool bernoulli(double p) { return uniform01() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// splitmix64 finalizer over the combined words; derives independent
// substream seeds from (seed, tag) pairs.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
// FNV-1a, for deriving per-tensor seeds from parameter names.
std::uint64_t hash_name(std::string_view name);

}  // namespace autoprog
