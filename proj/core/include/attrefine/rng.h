// Copyright 2026 The attrefine Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ATTREFINE_RNG_H_
#define ATTREFINE_RNG_H_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace attrefine {

// SplitMix64 finaliser folded over the key parts. Used to derive independent,
// scheduling-free substreams such as (master_seed, instance_id, slice_index).
std::uint64_t DeriveSeed(std::initializer_list<std::uint64_t> parts);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) from the top 53 bits; identical across standard
  // libraries, unlike std::uniform_real_distribution.
  double Uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  // Integer in [lo, hi].
  int UniformInt(int lo, int hi) {
    return lo + static_cast<int>(Uniform() * (hi - lo + 1));
  }
  double Normal(double mean, double stddev) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace attrefine

#endif  // ATTREFINE_RNG_H_
