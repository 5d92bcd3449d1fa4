#pragma once

#include <cstdint>
#include <random>

namespace causalmatch {

// SplitMix64 finalizer (Steele, Lea & Flood 2014). Used to derive independent
// sub-stream seeds from a master seed and a stream index.
std::uint64_t splitmix64(std::uint64_t x);

// Seed of sub-stream `stream` under `master`: splitmix64(splitmix64(master) ^ splitmix64(stream + 1)).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

// Portable random source: the mt19937_64 engine is fully specified by the
// standard, and every transformation below is written out here rather than
// delegated to the implementation-defined std distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform();

  // Uniform integer on [0, n) by rejection; n > 0.
  std::uint64_t uniform_index(std::uint64_t n);

  // Standard normal by the Marsaglia polar method.
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace causalmatch
