#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>

namespace symdyn {

using real = double;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Rng = std::mt19937_64;

// Derives an independent rng stream from a base seed and a stream tag
// (splitmix64 finalizer, so nearby seeds do not produce correlated streams).
inline Rng make_rng(std::uint64_t seed, std::uint64_t tag = 0) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z = z ^ (z >> 31);
  return Rng(z);
}

inline real uniform(Rng& rng, real lo, real hi) {
  return std::uniform_real_distribution<real>(lo, hi)(rng);
}

inline real normal(Rng& rng, real mean = 0.0, real stddev = 1.0) {
  return std::normal_distribution<real>(mean, stddev)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {  // inclusive bounds
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

}  // namespace symdyn
