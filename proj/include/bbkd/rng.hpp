#pragma once

#include <cstdint>
#include <random>

#include "bbkd/tensor.hpp"

namespace bbkd {

/// Explicit-state random stream. Every stochastic operation takes one of
/// these by reference; `split` derives an independent child stream from the
/// seed and a stream id without touching the parent, so work items can be
/// generated in any order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(mix(seed)) {}

  std::uint64_t seed() const noexcept { return seed_; }

  Rng split(std::uint64_t stream) const { return Rng(mix(seed_ ^ mix(stream + 0x9e3779b97f4a7c15ULL))); }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
  }

  Tensor normal_tensor(const Shape& shape);

  /// SplitMix64 finalizer.
  static std::uint64_t mix(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

inline Tensor Rng::normal_tensor(const Shape& shape) {
  Tensor t(shape);
  for (auto& v : t.data()) v = normal();
  return t;
}

}  // namespace bbkd
