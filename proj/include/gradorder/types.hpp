#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <vector>

namespace gradorder {

using Index = Eigen::Index;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Rows are per-example vectors (N x d); row-major keeps row access contiguous.
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// One entry per processed position, strictly +1 or -1.
using SignSequence = std::vector<int>;

enum class NormP { two, inf };

template <typename Derived>
typename Derived::Scalar norm_p(const Eigen::MatrixBase<Derived>& v, NormP p) {
  return p == NormP::two ? v.norm() : v.template lpNorm<Eigen::Infinity>();
}

// splitmix64 step, used to mix (seed, stream) pairs into independent rngs.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ull * (stream + 1));
  std::uint64_t a = splitmix64(s);
  std::uint64_t b = splitmix64(s);
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace gradorder
