#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "sgpreg/common.hpp"

namespace sgpreg {

// Deterministic, platform-independent PRNG (splitmix64 core).  Streams are
// derived from a master seed plus a purpose tag so that independent parts of
// an experiment (data synthesis, initialization, k-means, ...) never share
// state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  // Integer in [0, n).
  std::int64_t uniform_int(std::int64_t n);
  // Standard normal via Box-Muller (two uniforms per draw, no cached spare).
  double normal();
  double normal(double mean, double sd);

  VectorXd normal_vector(int n);
  MatrixXd normal_matrix(int rows, int cols);
  VectorXd uniform_vector(int n, double lo, double hi);

  // Fisher-Yates permutation of {0, ..., n-1}.
  std::vector<int> permutation(int n);
  // k distinct indices drawn from {0, ..., n-1}.
  std::vector<int> sample_without_replacement(int n, int k);

 private:
  std::uint64_t state_;
};

// Child-stream seed derived from (master, tag, index).
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index = 0);

inline Rng derive_rng(std::uint64_t master, std::string_view tag, std::uint64_t index = 0) {
  return Rng(derive_seed(master, tag, index));
}

// FNV-1a 64-bit hash, used for config fingerprints and seed derivation.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace sgpreg
