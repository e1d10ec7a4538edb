#pragma once

#include "gradorder/sgd_engine.hpp"

#include <algorithm>
#include <utility>
#include <vector>

namespace gradorder {

// Regularized-participation federated run. Each epoch walks the clients in
// permutation order; every client runs local_steps plain gradient steps from
// the current block point w, reports the pseudo-gradient p = start - end, and
// after each block of clients_per_round clients w moves by their average.
// The epoch ends with the amplified update x <- x - eta (x - w).
template <typename Scalar>
struct FlConfig {
  Scalar gamma = 0;
  Scalar eta = 1;
  int local_steps = 1;          // K
  Index clients_per_round = 1;  // S, must divide N
  int epochs = 1;               // Q
  Vec<Scalar> x0;
  OrdererKind orderer = OrdererKind::rr;
  std::uint64_t seed = 0;
  bool record_inner = false;
  Permutation pi0;  // empty: drawn uniformly from the seed
  OrdererOptions<Scalar> options;
  Scalar divergence_limit = Scalar(1e12);
};

template <typename Scalar>
RunTrace<Scalar> run_fl(const QuadraticEnsemble<Scalar>& ens, const FlConfig<Scalar>& cfg) {
  validate_ensemble(ens);
  const Index n = ens.size();
  const Index s = cfg.clients_per_round;
  if (cfg.x0.size() != ens.dim()) throw InvalidArgumentError("run_fl: x0 dimension mismatch");
  if (cfg.gamma < 0) throw InvalidArgumentError("run_fl: gamma must be >= 0");
  if (!(cfg.gamma == cfg.gamma)) throw InvalidArgumentError("run_fl: gamma must be finite");
  if (!(cfg.eta > 0)) throw InvalidArgumentError("run_fl: eta must be positive");
  if (cfg.local_steps < 1) throw InvalidArgumentError("run_fl: local_steps must be >= 1");
  if (cfg.epochs < 1) throw InvalidArgumentError("run_fl: epochs must be >= 1");
  if (!(cfg.divergence_limit > 0)) throw InvalidArgumentError("run_fl: divergence limit must be positive");
  if (s < 1 || n % s != 0)
    throw InvalidArgumentError("run_fl: clients_per_round must divide the example count");
  switch (cfg.orderer) {
    case OrdererKind::ap:
    case OrdererKind::rr:
    case OrdererKind::ig:
    case OrdererKind::so:
    case OrdererKind::np:
      break;
    case OrdererKind::grab:
      if (s % 2 != 0 || n % 2 != 0)
        throw InvalidArgumentError(
            "run_fl: the federated pair orderer needs even clients_per_round and example count");
      break;
    default:
      throw InvalidArgumentError("run_fl: federated runs support ap, rr, ig, so, np and grab only");
  }

  auto pi0_rng = make_rng(cfg.seed, 0x9140);
  const Permutation pi0 = cfg.pi0.empty() ? Permutation::uniform_random(n, pi0_rng) : cfg.pi0;
  if (pi0.size() != n) throw InvalidArgumentError("run_fl: pi0 size mismatch");

  OrdererOptions<Scalar> opt = cfg.options;
  opt.fl = true;
  OrderDriver<Scalar> driver(cfg.orderer, ens, cfg.x0, pi0, opt, cfg.seed);
  const Vec<Scalar> x_opt = optimum(ens);

  RunTrace<Scalar> trace;
  trace.fl = true;
  trace.n = n;
  trace.dim = ens.dim();
  trace.gamma = cfg.gamma;
  trace.orderer = cfg.orderer;
  trace.seed = cfg.seed;
  trace.rounds_per_epoch = n / s;

  Vec<Scalar> x = cfg.x0;
  for (int q = 0; q <= cfg.epochs; ++q) {
    EpochRow<Scalar> row;
    row.q = q;
    row.x = x;
    row.round = static_cast<Index>(q) * (n / s);
    row.grad_norm_sq = ens.full_grad(x).squaredNorm();
    row.dist_to_opt = (x - x_opt).norm();
    const OrderError<Scalar> oe = order_error(ens, x, driver.pi());
    row.order_error_2 = oe.two;
    row.order_error_inf = oe.inf;
    const OrderError<Scalar> foe = fl_order_error(ens, x, driver.pi(), s);
    row.fl_order_error_2 = foe.two;
    row.fl_order_error_inf = foe.inf;
    row.pi = driver.pi();
    if (q == cfg.epochs) {
      trace.rows.push_back(std::move(row));
      break;
    }

    const bool feed = driver.feed() == FeedKind::step_gradients;
    Vec<Scalar> w = x;
    Vec<Scalar> block_sum = Vec<Scalar>::Zero(ens.dim());
    Scalar max_dev = 0;
    for (Index i = 0; i < n; ++i) {
      const Index example = row.pi(i);
      Vec<Scalar> y = w;
      for (int k = 0; k < cfg.local_steps; ++k) {
        const Vec<Scalar> g = ens.grad(example, y);
        y -= cfg.gamma * g;
        detail::check_finite(y, cfg.divergence_limit, q);
        max_dev = std::max(max_dev, Scalar((y - x).norm()));
        if (cfg.record_inner) {
          row.inner.push_back(y);
          row.step_grads.push_back(g);
        }
      }
      const Vec<Scalar> p = w - y;
      if (feed) driver.observe(i, example, p);
      if (cfg.record_inner) row.pseudo_grads.push_back(p);
      block_sum += p;
      if ((i + 1) % s == 0) {
        w -= block_sum / Scalar(s);
        detail::check_finite(w, cfg.divergence_limit, q);
        max_dev = std::max(max_dev, Scalar((w - x).norm()));
        block_sum.setZero();
      }
    }
    if (cfg.record_inner) row.inner.push_back(w);  // the epoch-end block point
    row.param_dev = max_dev;
    x -= cfg.eta * (x - w);
    detail::check_finite(x, cfg.divergence_limit, q);
    driver.advance(q + 1, x);
    row.extra_grads = driver.take_extra_grads();
    trace.rows.push_back(std::move(row));
  }
  return trace;
}

}  // namespace gradorder
