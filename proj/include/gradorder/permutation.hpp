#pragma once

#include "gradorder/errors.hpp"
#include "gradorder/types.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace gradorder {

// A permutation of {0..N-1}. order()[n] is the example processed at step n;
// inverse()[i] is the step at which example i is processed.
class Permutation {
 public:
  Permutation() = default;

  static Permutation identity(Index n) {
    if (n < 0) throw InvalidArgumentError("Permutation::identity: negative size");
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    return Permutation(std::move(order));
  }

  static Permutation from_order(std::vector<Index> order) {
    validate(order);
    return Permutation(std::move(order));
  }

  template <typename Rng>
  static Permutation uniform_random(Index n, Rng& rng) {
    if (n < 0) throw InvalidArgumentError("Permutation::uniform_random: negative size");
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    return Permutation(std::move(order));
  }

  Index size() const { return static_cast<Index>(order_.size()); }
  bool empty() const { return order_.empty(); }

  // Example processed at step n.
  Index operator()(Index n) const { return order_[static_cast<std::size_t>(n)]; }
  // Step at which example i is processed.
  Index position_of(Index i) const { return inverse_[static_cast<std::size_t>(i)]; }

  const std::vector<Index>& order() const { return order_; }
  const std::vector<Index>& inverse() const { return inverse_; }

  friend bool operator==(const Permutation& a, const Permutation& b) { return a.order_ == b.order_; }
  friend bool operator!=(const Permutation& a, const Permutation& b) { return !(a == b); }

 private:
  explicit Permutation(std::vector<Index> order) : order_(std::move(order)) {
    inverse_.resize(order_.size());
    for (std::size_t n = 0; n < order_.size(); ++n)
      inverse_[static_cast<std::size_t>(order_[n])] = static_cast<Index>(n);
  }

  static void validate(const std::vector<Index>& order) {
    const Index n = static_cast<Index>(order.size());
    std::vector<char> seen(order.size(), 0);
    for (Index v : order) {
      if (v < 0 || v >= n)
        throw InvalidPermutationError("Permutation: entry " + std::to_string(v) +
                                      " out of range for size " + std::to_string(n));
      if (seen[static_cast<std::size_t>(v)])
        throw InvalidPermutationError("Permutation: duplicate entry " + std::to_string(v));
      seen[static_cast<std::size_t>(v)] = 1;
    }
  }

  std::vector<Index> order_;
  std::vector<Index> inverse_;
};

}  // namespace gradorder
