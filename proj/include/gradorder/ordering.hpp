#pragma once

#include "gradorder/balancing.hpp"
#include "gradorder/errors.hpp"
#include "gradorder/permutation.hpp"
#include "gradorder/types.hpp"

#include <utility>
#include <vector>

namespace gradorder {

// Builds the next permutation from per-position signs: positives keep their
// processing order at the front, negatives go to the back in reverse order.
inline Permutation reorder(const Permutation& pi, const SignSequence& signs) {
  if (static_cast<std::size_t>(pi.size()) != signs.size())
    throw InvalidArgumentError("reorder: permutation and sign sequence sizes differ");
  std::vector<Index> front, back;
  front.reserve(signs.size());
  back.reserve(signs.size());
  for (Index n = 0; n < pi.size(); ++n) {
    if (signs[static_cast<std::size_t>(n)] == 1)
      front.push_back(pi(n));
    else if (signs[static_cast<std::size_t>(n)] == -1)
      back.push_back(pi(n));
    else
      throw InvalidArgumentError("reorder: signs must be +1 or -1");
  }
  front.insert(front.end(), back.rbegin(), back.rend());
  return Permutation::from_order(std::move(front));
}

// Inputs of a balancing-reordering pass. vectors is indexed by example id, so
// the n-th processed vector is vectors[pi.order()[n]].
template <typename Scalar>
struct BrInput {
  Permutation pi;
  std::vector<Vec<Scalar>> vectors;
  Vec<Scalar> mean;
};

template <typename Scalar>
struct BrResult {
  Permutation pi_next;
  SignSequence signs;  // one per processed position of the input permutation
};

template <typename Scalar>
void validate_br_input(const BrInput<Scalar>& in, bool needs_mean) {
  if (in.pi.size() < 1) throw InvalidArgumentError("balancing-reordering: empty permutation");
  if (static_cast<std::size_t>(in.pi.size()) != in.vectors.size())
    throw InvalidArgumentError("balancing-reordering: permutation and vector counts differ");
  const Index d = in.vectors.front().size();
  for (const auto& v : in.vectors)
    if (v.size() != d) throw InvalidArgumentError("balancing-reordering: vectors must share one dimension");
  if (needs_mean && in.mean.size() != d)
    throw InvalidArgumentError("balancing-reordering: mean dimension mismatch");
}

// Centers each processed vector with the supplied mean, balances the centered
// sequence, then reorders.
template <typename Scalar, typename Rng>
BrResult<Scalar> basic_br(const BrInput<Scalar>& in, const BalanceConfig<Scalar>& cfg, Rng& rng) {
  validate_br_input(in, true);
  const Index n = in.pi.size();
  std::vector<Vec<Scalar>> centered(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    centered[static_cast<std::size_t>(i)] = in.vectors[static_cast<std::size_t>(in.pi(i))] - in.mean;
  SignSequence signs = balance(centered, cfg, rng);
  Permutation next = reorder(in.pi, signs);
  return {std::move(next), std::move(signs)};
}

// Pair pass: consecutive differences cancel the mean, so no centering. The
// N/2 differences d_l = z(2l) - z(2l+1) are balanced and each pair sign e_l
// expands to (e_l, -e_l). Requires even N; in.mean is ignored.
template <typename Scalar, typename Rng>
BrResult<Scalar> pair_br(const BrInput<Scalar>& in, const BalanceConfig<Scalar>& cfg, Rng& rng) {
  validate_br_input(in, false);
  const Index n = in.pi.size();
  if (n % 2 != 0) throw InvalidArgumentError("pair_br: the pair pass needs an even number of vectors");
  std::vector<Vec<Scalar>> diffs(static_cast<std::size_t>(n / 2));
  for (Index l = 0; l < n / 2; ++l)
    diffs[static_cast<std::size_t>(l)] = in.vectors[static_cast<std::size_t>(in.pi(2 * l))] -
                                         in.vectors[static_cast<std::size_t>(in.pi(2 * l + 1))];
  SignSequence pair_signs = balance(diffs, cfg, rng);
  SignSequence signs(static_cast<std::size_t>(n));
  for (Index l = 0; l < n / 2; ++l) {
    signs[static_cast<std::size_t>(2 * l)] = pair_signs[static_cast<std::size_t>(l)];
    signs[static_cast<std::size_t>(2 * l + 1)] = -pair_signs[static_cast<std::size_t>(l)];
  }
  Permutation next = reorder(in.pi, signs);
  return {std::move(next), std::move(signs)};
}

}  // namespace gradorder
