#pragma once

#include "gradorder/metrics.hpp"
#include "gradorder/strategies.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace gradorder {

template <typename Scalar>
struct SgdConfig {
  Scalar gamma = 0;  // >= 0; zero freezes the trajectory
  int epochs = 1;    // Q
  Vec<Scalar> x0;
  OrdererKind orderer = OrdererKind::rr;
  std::uint64_t seed = 0;
  bool record_inner = false;
  Permutation pi0;  // empty: drawn uniformly from the seed
  OrdererOptions<Scalar> options;
  Scalar divergence_limit = Scalar(1e12);  // 2-norm guard on the iterates
};

// One row per epoch boundary. Row q records the state the epoch started
// from, the permutation it used and, once it ran, the drift it produced.
// The final row (q = Q) carries the never-used next permutation and zero
// drift and extra evals.
template <typename Scalar>
struct EpochRow {
  int q = 0;
  Vec<Scalar> x;
  Scalar grad_norm_sq = 0;
  Scalar dist_to_opt = 0;
  Scalar order_error_2 = 0;
  Scalar order_error_inf = 0;
  Scalar param_dev = 0;  // max 2-norm drift within the epoch
  Index extra_grads = 0;
  Permutation pi;
  // federated columns (zero for plain runs)
  Index round = 0;
  Scalar fl_order_error_2 = 0;
  Scalar fl_order_error_inf = 0;
  // record_inner payloads
  std::vector<Vec<Scalar>> inner;        // iterates after each step; federated runs
                                         // store every local iterate then the block point
  std::vector<Vec<Scalar>> step_grads;   // gradients used, in step order
  std::vector<Vec<Scalar>> pseudo_grads; // federated per-client updates
};

template <typename Scalar>
struct RunTrace {
  bool fl = false;
  Index n = 0;
  Index dim = 0;
  Scalar gamma = 0;
  OrdererKind orderer = OrdererKind::rr;
  std::uint64_t seed = 0;
  Index rounds_per_epoch = 0;  // federated: N / S
  std::vector<EpochRow<Scalar>> rows;

  std::vector<Scalar> column_phi(NormP p, bool fl_metric) const {
    std::vector<Scalar> out;
    out.reserve(rows.size());
    for (const auto& r : rows)
      out.push_back(fl_metric ? (p == NormP::two ? r.fl_order_error_2 : r.fl_order_error_inf)
                              : (p == NormP::two ? r.order_error_2 : r.order_error_inf));
    return out;
  }
  std::vector<Scalar> column_grad_sq() const {
    std::vector<Scalar> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.grad_norm_sq);
    return out;
  }
};

// Recursion check driven by a trace; phi comes from the columns matching the
// spec (block order error for federated specs).
template <typename Scalar>
RecursionReport<Scalar> check_recursion(const RunTrace<Scalar>& trace,
                                        const RecursionSpec<Scalar>& spec, Scalar slack = 0) {
  if (spec.fl && !trace.fl)
    throw InvalidArgumentError("check_recursion: federated spec on a plain trace");
  return check_recursion(trace.column_phi(spec.phi_norm, spec.fl), trace.column_grad_sq(), spec,
                         slack);
}

namespace detail {

template <typename Scalar>
void check_finite(const Vec<Scalar>& x, Scalar limit, int epoch) {
  if (!x.allFinite() || x.norm() > limit)
    throw DivergenceError(epoch, "trajectory diverged in epoch " + std::to_string(epoch));
}

}  // namespace detail

template <typename Scalar>
RunTrace<Scalar> run_sgd(const QuadraticEnsemble<Scalar>& ens, const SgdConfig<Scalar>& cfg) {
  validate_ensemble(ens);
  const Index n = ens.size();
  if (cfg.x0.size() != ens.dim()) throw InvalidArgumentError("run_sgd: x0 dimension mismatch");
  if (cfg.gamma < 0) throw InvalidArgumentError("run_sgd: gamma must be >= 0");
  if (!(cfg.gamma == cfg.gamma)) throw InvalidArgumentError("run_sgd: gamma must be finite");
  if (cfg.epochs < 1) throw InvalidArgumentError("run_sgd: epochs must be >= 1");
  if (!(cfg.divergence_limit > 0)) throw InvalidArgumentError("run_sgd: divergence limit must be positive");
  if ((cfg.orderer == OrdererKind::pairgrab || cfg.orderer == OrdererKind::pairgrab_proto) &&
      n % 2 != 0)
    throw InvalidArgumentError("run_sgd: pair orderers need an even example count");
  if (cfg.options.fl) throw InvalidArgumentError("run_sgd: options.fl is reserved for federated runs");

  auto pi0_rng = make_rng(cfg.seed, 0x9140);
  const Permutation pi0 =
      cfg.pi0.empty() ? Permutation::uniform_random(n, pi0_rng) : cfg.pi0;
  if (pi0.size() != n) throw InvalidArgumentError("run_sgd: pi0 size mismatch");

  OrderDriver<Scalar> driver(cfg.orderer, ens, cfg.x0, pi0, cfg.options, cfg.seed);
  const Vec<Scalar> x_opt = optimum(ens);

  RunTrace<Scalar> trace;
  trace.n = n;
  trace.dim = ens.dim();
  trace.gamma = cfg.gamma;
  trace.orderer = cfg.orderer;
  trace.seed = cfg.seed;
  trace.rows.reserve(static_cast<std::size_t>(cfg.epochs) + 1);

  Vec<Scalar> x = cfg.x0;
  for (int q = 0; q <= cfg.epochs; ++q) {
    EpochRow<Scalar> row;
    row.q = q;
    row.x = x;
    row.grad_norm_sq = ens.full_grad(x).squaredNorm();
    row.dist_to_opt = (x - x_opt).norm();
    const OrderError<Scalar> oe = order_error(ens, x, driver.pi());
    row.order_error_2 = oe.two;
    row.order_error_inf = oe.inf;
    row.pi = driver.pi();
    if (q == cfg.epochs) {
      trace.rows.push_back(std::move(row));
      break;
    }

    const Vec<Scalar> x_start = x;
    Scalar max_dev = 0;
    const bool feed = driver.feed() == FeedKind::step_gradients;
    for (Index i = 0; i < n; ++i) {
      const Index example = row.pi(i);
      const Vec<Scalar> g = ens.grad(example, x);
      if (feed) driver.observe(i, example, g);
      x -= cfg.gamma * g;
      detail::check_finite(x, cfg.divergence_limit, q);
      max_dev = std::max(max_dev, Scalar((x - x_start).norm()));
      if (cfg.record_inner) {
        row.inner.push_back(x);
        row.step_grads.push_back(g);
      }
    }
    row.param_dev = max_dev;
    driver.advance(q + 1, x);
    row.extra_grads = driver.take_extra_grads();
    trace.rows.push_back(std::move(row));
  }
  return trace;
}

}  // namespace gradorder
