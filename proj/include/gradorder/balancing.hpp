#pragma once

#include "gradorder/errors.hpp"
#include "gradorder/types.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace gradorder {

enum class BalanceMode { probabilistic, greedy };

// c <= 0 in probabilistic mode means: derive the walk scale from the inputs
// (default_balance_c with the max input norm). Negative c is rejected by the
// config check; delta is the failure probability behind the derived scale.
template <typename Scalar>
struct BalanceConfig {
  BalanceMode mode = BalanceMode::greedy;
  Scalar c = 0;
  Scalar delta = Scalar(0.1);
};

template <typename Scalar>
void validate_balance_config(const BalanceConfig<Scalar>& cfg) {
  if (cfg.mode == BalanceMode::probabilistic && cfg.c < 0)
    throw InvalidArgumentError("BalanceConfig: probabilistic mode needs c > 0 or c = 0 (auto)");
  if (!(cfg.delta > 0 && cfg.delta < 1))
    throw InvalidArgumentError("BalanceConfig: delta must lie in (0,1)");
}

template <typename Scalar>
struct BalancerState {
  Vec<Scalar> s;    // running signed sum
  Index count = 0;  // vectors consumed
};

// Scale for the probabilistic walk: 30 log(dN/delta) * (max input 2-norm)^2.
template <typename Scalar>
Scalar default_balance_c(Index d, Index n, Scalar delta, Scalar max_norm) {
  if (d < 1 || n < 1) throw InvalidArgumentError("default_balance_c: need d >= 1 and n >= 1");
  if (!(delta > 0 && delta < 1)) throw InvalidArgumentError("default_balance_c: delta must lie in (0,1)");
  return Scalar(30) * std::log(Scalar(d) * Scalar(n) / delta) * max_norm * max_norm;
}

// Greedy decision: +1 iff <s,z> < 0, ties to -1. This is exactly the choice
// minimizing ||s + eps z||_2 (expand the square; only the cross term differs).
template <typename Scalar>
int sign_greedy(const Vec<Scalar>& s, const Vec<Scalar>& z) {
  return s.dot(z) < Scalar(0) ? 1 : -1;
}

// Probabilistic walk: +1 with probability clamp(1/2 - <s,z>/(2c), 0, 1).
template <typename Scalar, typename Rng>
int sign_prob(const Vec<Scalar>& s, const Vec<Scalar>& z, Scalar c, Rng& rng) {
  if (!(c > 0)) throw InvalidArgumentError("sign_prob: c must be positive");
  Scalar p = Scalar(0.5) - s.dot(z) / (Scalar(2) * c);
  p = std::clamp(p, Scalar(0), Scalar(1));
  std::uniform_real_distribution<Scalar> u(Scalar(0), Scalar(1));
  return u(rng) < p ? 1 : -1;
}

template <typename Scalar>
int assign_sign_greedy(BalancerState<Scalar>& st, const Vec<Scalar>& z) {
  if (st.s.size() == 0) st.s = Vec<Scalar>::Zero(z.size());
  if (st.s.size() != z.size()) throw InvalidArgumentError("assign_sign_greedy: dimension mismatch");
  const int eps = sign_greedy(st.s, z);
  st.s += Scalar(eps) * z;
  ++st.count;
  return eps;
}

template <typename Scalar, typename Rng>
int assign_sign_prob(BalancerState<Scalar>& st, const Vec<Scalar>& z, Scalar c, Rng& rng) {
  if (st.s.size() == 0) st.s = Vec<Scalar>::Zero(z.size());
  if (st.s.size() != z.size()) throw InvalidArgumentError("assign_sign_prob: dimension mismatch");
  const int eps = sign_prob(st.s, z, c, rng);
  st.s += Scalar(eps) * z;
  ++st.count;
  return eps;
}

// Assigns signs to the whole batch in order. In probabilistic mode with
// cfg.c <= 0 the scale comes from the batch max norm.
template <typename Scalar, typename Rng>
SignSequence balance(const std::vector<Vec<Scalar>>& zs, const BalanceConfig<Scalar>& cfg, Rng& rng) {
  validate_balance_config(cfg);
  if (zs.empty()) throw InvalidArgumentError("balance: empty input");
  const Index d = zs.front().size();
  for (const auto& z : zs)
    if (z.size() != d) throw InvalidArgumentError("balance: inputs must share one dimension");

  Scalar c = cfg.c;
  if (cfg.mode == BalanceMode::probabilistic && c <= 0) {
    Scalar mx = 0;
    for (const auto& z : zs) mx = std::max(mx, Scalar(z.norm()));
    c = mx > 0 ? default_balance_c<Scalar>(d, static_cast<Index>(zs.size()), cfg.delta, mx)
               : Scalar(1);
  }

  BalancerState<Scalar> st;
  SignSequence signs;
  signs.reserve(zs.size());
  for (const auto& z : zs)
    signs.push_back(cfg.mode == BalanceMode::greedy ? assign_sign_greedy(st, z)
                                                    : assign_sign_prob(st, z, c, rng));
  return signs;
}

// max over n in {1..N} of || sum_{i<n} eps_i z_i ||_inf.
template <typename Scalar>
Scalar signed_herding_error(const std::vector<Vec<Scalar>>& zs, const SignSequence& signs) {
  if (zs.empty()) throw InvalidArgumentError("signed_herding_error: empty input");
  if (zs.size() != signs.size()) throw InvalidArgumentError("signed_herding_error: size mismatch");
  Vec<Scalar> s = Vec<Scalar>::Zero(zs.front().size());
  Scalar best = 0;
  for (std::size_t i = 0; i < zs.size(); ++i) {
    if (signs[i] != 1 && signs[i] != -1)
      throw InvalidArgumentError("signed_herding_error: signs must be +1 or -1");
    s += Scalar(signs[i]) * zs[i];
    best = std::max(best, Scalar(s.template lpNorm<Eigen::Infinity>()));
  }
  return best;
}

// max over n in {1..N} of || sum_{i<n} z_i ||_inf for a sequence already in
// processing order.
template <typename Scalar>
Scalar herding_error(const std::vector<Vec<Scalar>>& zs) {
  if (zs.empty()) throw InvalidArgumentError("herding_error: empty input");
  Vec<Scalar> s = Vec<Scalar>::Zero(zs.front().size());
  Scalar best = 0;
  for (const auto& z : zs) {
    s += z;
    best = std::max(best, Scalar(s.template lpNorm<Eigen::Infinity>()));
  }
  return best;
}

// Same but only at prefixes that are multiples of chunk; requires chunk | N.
template <typename Scalar>
Scalar chunked_herding_error(const std::vector<Vec<Scalar>>& zs, Index chunk) {
  if (zs.empty()) throw InvalidArgumentError("chunked_herding_error: empty input");
  const Index n = static_cast<Index>(zs.size());
  if (chunk < 1 || n % chunk != 0)
    throw InvalidArgumentError("chunked_herding_error: chunk must divide the length");
  Vec<Scalar> s = Vec<Scalar>::Zero(zs.front().size());
  Scalar best = 0;
  for (Index i = 0; i < n; ++i) {
    s += zs[static_cast<std::size_t>(i)];
    if ((i + 1) % chunk == 0) best = std::max(best, Scalar(s.template lpNorm<Eigen::Infinity>()));
  }
  return best;
}

}  // namespace gradorder
