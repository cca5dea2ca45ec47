#include "sgpreg/rng.hpp"

#include <cmath>
#include <numbers>

namespace sgpreg {

namespace {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::uniform() {
  // 53 random bits -> [0, 1)
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::int64_t Rng::uniform_int(std::int64_t n) {
  require(n > 0, "Rng::uniform_int: n must be positive");
  // Rejection sampling to avoid modulo bias.
  const std::uint64_t un = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  std::uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return static_cast<std::int64_t>(v % un);
}

double Rng::normal() {
  // Box-Muller; u1 bounded away from zero.
  double u1 = uniform();
  if (u1 < 1e-300) u1 = 1e-300;
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::normal(double mean, double sd) { return mean + sd * normal(); }

VectorXd Rng::normal_vector(int n) {
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = normal();
  return v;
}

MatrixXd Rng::normal_matrix(int rows, int cols) {
  MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = normal();
  return m;
}

VectorXd Rng::uniform_vector(int n, double lo, double hi) {
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = uniform(lo, hi);
  return v;
}

std::vector<int> Rng::permutation(int n) {
  std::vector<int> p(n);
  for (int i = 0; i < n; ++i) p[i] = i;
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(uniform_int(i + 1));
    std::swap(p[i], p[j]);
  }
  return p;
}

std::vector<int> Rng::sample_without_replacement(int n, int k) {
  require(k >= 0 && k <= n, "sample_without_replacement: need 0 <= k <= n");
  std::vector<int> p = permutation(n);
  p.resize(k);
  return p;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index) {
  std::uint64_t x = master ^ fnv1a64(tag);
  x ^= 0x632be59bd9b4e019ULL + index * 0x9e3779b97f4a7c15ULL;
  // Two scrambling rounds so nearby masters/indices decorrelate.
  splitmix64(x);
  return splitmix64(x);
}

}  // namespace sgpreg
