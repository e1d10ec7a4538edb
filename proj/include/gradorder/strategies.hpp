#pragma once

#include "gradorder/balancing.hpp"
#include "gradorder/errors.hpp"
#include "gradorder/ordering.hpp"
#include "gradorder/quadratic.hpp"
#include "gradorder/types.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gradorder {

enum class OrdererKind { ap, rr, ig, so, np, grab_proto, pairgrab_proto, grab, pairgrab };

// What an engine must feed the orderer while an epoch runs.
enum class FeedKind {
  none,            // fixed or externally supplied permutations
  step_gradients,  // the gradient (or pseudo-gradient) used at each step
  epoch_point      // fresh gradients at the next iterate, paid as extra evals
};

inline FeedKind feed_kind(OrdererKind k) {
  switch (k) {
    case OrdererKind::grab:
    case OrdererKind::pairgrab:
      return FeedKind::step_gradients;
    case OrdererKind::grab_proto:
    case OrdererKind::pairgrab_proto:
      return FeedKind::epoch_point;
    default:
      return FeedKind::none;
  }
}

inline std::string to_string(OrdererKind k) {
  switch (k) {
    case OrdererKind::ap: return "ap";
    case OrdererKind::rr: return "rr";
    case OrdererKind::ig: return "ig";
    case OrdererKind::so: return "so";
    case OrdererKind::np: return "np";
    case OrdererKind::grab_proto: return "grab-proto";
    case OrdererKind::pairgrab_proto: return "pairgrab-proto";
    case OrdererKind::grab: return "grab";
    case OrdererKind::pairgrab: return "pairgrab";
  }
  return "?";
}

inline OrdererKind orderer_from_string(const std::string& s) {
  for (OrdererKind k : {OrdererKind::ap, OrdererKind::rr, OrdererKind::ig, OrdererKind::so,
                        OrdererKind::np, OrdererKind::grab_proto, OrdererKind::pairgrab_proto,
                        OrdererKind::grab, OrdererKind::pairgrab})
    if (to_string(k) == s) return k;
  throw InvalidArgumentError("unknown orderer '" + s +
                             "' (expected ap, rr, ig, so, np, grab-proto, pairgrab-proto, grab "
                             "or pairgrab)");
}

// Supplies the permutation for each epoch of an externally ordered run.
using ApSource = std::function<Permutation(int epoch)>;

// Fixed-permutation strategies reuse the stored order every epoch.
inline const Permutation& permute_op(const Permutation& stored) { return stored; }

template <typename Rng>
Permutation permute_rr(Index n, Rng& rng) {
  return Permutation::uniform_random(n, rng);
}

// ---------------------------------------------------------------------------
// Constructed fixed permutation: iterate the pair pass on the centered
// gradients at a fixed point and keep the best order seen.
// ---------------------------------------------------------------------------

inline int default_np_rounds(Index n) {
  if (n < 2) return 1;
  return 3 * static_cast<int>(std::ceil(std::log2(static_cast<double>(n))));
}

template <typename Scalar>
struct NpResult {
  Permutation pi;                // best permutation seen
  std::vector<Scalar> herding;   // inf-norm herding error per round; [0] is the start
  int best_round = 0;
};

template <typename Scalar, typename Rng>
NpResult<Scalar> nice_permutation(const QuadraticEnsemble<Scalar>& ens, const Vec<Scalar>& x0,
                                  int rounds, const BalanceConfig<Scalar>& cfg, Rng& rng) {
  if (ens.size() % 2 != 0)
    throw InvalidArgumentError("nice_permutation: the pair pass needs an even example count");
  if (rounds < 1) throw InvalidArgumentError("nice_permutation: rounds must be >= 1");
  if (x0.size() != ens.dim()) throw InvalidArgumentError("nice_permutation: x0 dimension mismatch");

  const Index n = ens.size();
  const Vec<Scalar> g = ens.full_grad(x0);
  BrInput<Scalar> in;
  in.pi = Permutation::identity(n);
  in.vectors.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) in.vectors[static_cast<std::size_t>(i)] = ens.grad(i, x0) - g;
  in.mean = Vec<Scalar>::Zero(ens.dim());

  auto herd = [&](const Permutation& pi) {
    std::vector<Vec<Scalar>> seq(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) seq[static_cast<std::size_t>(i)] = in.vectors[static_cast<std::size_t>(pi(i))];
    return herding_error(seq);
  };

  NpResult<Scalar> out;
  out.pi = in.pi;
  out.herding.push_back(herd(in.pi));
  Scalar best = out.herding.front();
  for (int r = 1; r <= rounds; ++r) {
    in.pi = pair_br(in, cfg, rng).pi_next;
    const Scalar h = herd(in.pi);
    out.herding.push_back(h);
    if (h < best) {
      best = h;
      out.pi = in.pi;
      out.best_round = r;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Basic gradient balancing orderer. Per step: accumulate the running mean,
// center with the mean of the previous epoch, take a sign, and push the
// uncentered gradient into the signed sum. Epoch end swaps the means.
// ---------------------------------------------------------------------------

template <typename Scalar>
struct GrabState {
  Vec<Scalar> s;        // signed sum of the raw gradients
  Vec<Scalar> m_stale;  // mean of the previous epoch (zero before the first)
  Vec<Scalar> m_accum;  // running mean of the current epoch
  std::vector<Index> next_order;  // two-pointer output buffer
  Index left = 0;
  Index right = -1;
  Index fed = 0;
  Scalar max_centered_norm = 0;  // running scale for the probabilistic walk

  static GrabState init(Index n, Index dim) {
    if (n < 1 || dim < 1) throw InvalidArgumentError("GrabState::init: need n >= 1 and dim >= 1");
    GrabState st;
    st.s = Vec<Scalar>::Zero(dim);
    st.m_stale = Vec<Scalar>::Zero(dim);
    st.m_accum = Vec<Scalar>::Zero(dim);
    st.next_order.assign(static_cast<std::size_t>(n), 0);
    st.right = n - 1;
    return st;
  }
};

namespace detail {

// One sign decision shared by every two-pointer orderer. In probabilistic
// mode with cfg.c <= 0 the scale tracks the running max input norm, so early
// decisions may clamp; the batch default uses the full max instead.
template <typename Scalar, typename Rng>
int stream_sign(Vec<Scalar>& s, const Vec<Scalar>& z, Scalar& max_norm, Index n, Index dim,
                const BalanceConfig<Scalar>& cfg, Rng& rng) {
  int eps;
  if (cfg.mode == BalanceMode::greedy) {
    eps = sign_greedy(s, z);
  } else {
    max_norm = std::max(max_norm, Scalar(z.norm()));
    const Scalar c = cfg.c > 0 ? cfg.c
                               : (max_norm > 0 ? default_balance_c<Scalar>(dim, n, cfg.delta, max_norm)
                                               : Scalar(1));
    eps = sign_prob(s, z, c, rng);
  }
  s += Scalar(eps) * z;
  return eps;
}

}  // namespace detail

// Streaming form: feed the gradient used at step n (example pi(n)); signs
// place examples with the two pointers as they arrive.
template <typename Scalar, typename Rng>
void grab_observe(GrabState<Scalar>& st, Index step, Index example, const Vec<Scalar>& g,
                  const BalanceConfig<Scalar>& cfg, Rng& rng) {
  const Index n = static_cast<Index>(st.next_order.size());
  if (st.fed != step) throw InvalidArgumentError("grab_observe: steps must arrive in order");
  if (step >= n) throw InvalidArgumentError("grab_observe: more steps than examples");
  st.m_accum += g / Scalar(n);
  const Vec<Scalar> centered = g - st.m_stale;
  const int eps = detail::stream_sign(st.s, centered, st.max_centered_norm, n, g.size(), cfg, rng);
  if (eps == 1)
    st.next_order[static_cast<std::size_t>(st.left++)] = example;
  else
    st.next_order[static_cast<std::size_t>(st.right--)] = example;
  ++st.fed;
}

template <typename Scalar>
Permutation grab_finish_epoch(GrabState<Scalar>& st) {
  const Index n = static_cast<Index>(st.next_order.size());
  if (st.fed != n) throw InvalidArgumentError("grab_finish_epoch: not every step was fed");
  Permutation next = Permutation::from_order(st.next_order);
  st.m_stale = st.m_accum;
  st.m_accum.setZero();
  st.s.setZero();
  st.left = 0;
  st.right = n - 1;
  st.fed = 0;
  st.max_centered_norm = 0;
  return next;
}

// Epoch-end form on the full list of step gradients (step_grads[n] is the
// gradient used at step n of pi). Produces the same next permutation and
// state evolution as the streaming form; kept as an independent
// implementation that collects signs and defers to reorder.
template <typename Scalar, typename Rng>
Permutation permute_grab(GrabState<Scalar>& st, const Permutation& pi,
                         const std::vector<Vec<Scalar>>& step_grads,
                         const BalanceConfig<Scalar>& cfg, Rng& rng) {
  const Index n = static_cast<Index>(st.next_order.size());
  if (pi.size() != n) throw InvalidArgumentError("permute_grab: permutation size mismatch");
  if (static_cast<Index>(step_grads.size()) != n)
    throw InvalidArgumentError("permute_grab: need one gradient per step");
  if (st.fed != 0) throw InvalidArgumentError("permute_grab: state mid-stream");

  SignSequence signs(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const Vec<Scalar>& g = step_grads[static_cast<std::size_t>(i)];
    st.m_accum += g / Scalar(n);
    const Vec<Scalar> centered = g - st.m_stale;
    signs[static_cast<std::size_t>(i)] =
        detail::stream_sign(st.s, centered, st.max_centered_norm, n, g.size(), cfg, rng);
  }
  Permutation next = reorder(pi, signs);
  st.m_stale = st.m_accum;
  st.m_accum.setZero();
  st.s.setZero();
  st.max_centered_norm = 0;
  return next;
}

// ---------------------------------------------------------------------------
// Pair gradient balancing orderer. Consecutive steps form a pair; the sign of
// the difference decides which member goes to the front. No mean tracking:
// the differences cancel it.
// ---------------------------------------------------------------------------

template <typename Scalar>
struct PairGrabState {
  Vec<Scalar> s;
  Vec<Scalar> pending;  // gradient of the even step waiting for its partner
  Index pending_example = -1;
  std::vector<Index> next_order;
  Index left = 0;
  Index right = -1;
  Index fed = 0;
  Scalar max_diff_norm = 0;

  static PairGrabState init(Index n, Index dim) {
    if (n < 2 || n % 2 != 0)
      throw InvalidArgumentError("PairGrabState::init: the pair orderer needs an even example count");
    if (dim < 1) throw InvalidArgumentError("PairGrabState::init: need dim >= 1");
    PairGrabState st;
    st.s = Vec<Scalar>::Zero(dim);
    st.next_order.assign(static_cast<std::size_t>(n), 0);
    st.right = n - 1;
    return st;
  }
};

template <typename Scalar, typename Rng>
void pairgrab_observe(PairGrabState<Scalar>& st, Index step, Index example, const Vec<Scalar>& g,
                      const BalanceConfig<Scalar>& cfg, Rng& rng) {
  const Index n = static_cast<Index>(st.next_order.size());
  if (st.fed != step) throw InvalidArgumentError("pairgrab_observe: steps must arrive in order");
  if (step >= n) throw InvalidArgumentError("pairgrab_observe: more steps than examples");
  if (step % 2 == 0) {
    st.pending = g;
    st.pending_example = example;
  } else {
    const Vec<Scalar> diff = st.pending - g;
    const int eps =
        detail::stream_sign(st.s, diff, st.max_diff_norm, n / 2, g.size(), cfg, rng);
    // +1 sends the later pair member to the front, the earlier to the back.
    if (eps == 1) {
      st.next_order[static_cast<std::size_t>(st.left++)] = example;
      st.next_order[static_cast<std::size_t>(st.right--)] = st.pending_example;
    } else {
      st.next_order[static_cast<std::size_t>(st.left++)] = st.pending_example;
      st.next_order[static_cast<std::size_t>(st.right--)] = example;
    }
  }
  ++st.fed;
}

template <typename Scalar>
Permutation pairgrab_finish_epoch(PairGrabState<Scalar>& st) {
  const Index n = static_cast<Index>(st.next_order.size());
  if (st.fed != n) throw InvalidArgumentError("pairgrab_finish_epoch: not every step was fed");
  Permutation next = Permutation::from_order(st.next_order);
  st.s.setZero();
  st.left = 0;
  st.right = n - 1;
  st.fed = 0;
  st.max_diff_norm = 0;
  st.pending_example = -1;
  return next;
}

template <typename Scalar, typename Rng>
Permutation permute_pairgrab(PairGrabState<Scalar>& st, const Permutation& pi,
                             const std::vector<Vec<Scalar>>& step_grads,
                             const BalanceConfig<Scalar>& cfg, Rng& rng) {
  const Index n = static_cast<Index>(st.next_order.size());
  if (pi.size() != n) throw InvalidArgumentError("permute_pairgrab: permutation size mismatch");
  if (static_cast<Index>(step_grads.size()) != n)
    throw InvalidArgumentError("permute_pairgrab: need one gradient per step");
  if (st.fed != 0) throw InvalidArgumentError("permute_pairgrab: state mid-stream");
  for (Index i = 0; i < n; ++i)
    pairgrab_observe(st, i, pi(i), step_grads[static_cast<std::size_t>(i)], cfg, rng);
  return pairgrab_finish_epoch(st);
}

// The federated pair orderer runs the same skeleton on pseudo-gradients.
template <typename Scalar, typename Rng>
Permutation permute_fl_grab(PairGrabState<Scalar>& st, const Permutation& pi,
                            const std::vector<Vec<Scalar>>& pseudo_grads,
                            const BalanceConfig<Scalar>& cfg, Rng& rng) {
  return permute_pairgrab(st, pi, pseudo_grads, cfg, rng);
}

// ---------------------------------------------------------------------------
// Prototype orderers: recompute every gradient at the given point with the
// exact mean and run one balancing-reordering pass. Costs N extra gradient
// evaluations per epoch.
// ---------------------------------------------------------------------------

template <typename Scalar, typename Rng>
BrResult<Scalar> permute_proto(const QuadraticEnsemble<Scalar>& ens, const Vec<Scalar>& x,
                               const Permutation& pi, bool pair, const BalanceConfig<Scalar>& cfg,
                               Rng& rng) {
  if (pi.size() != ens.size()) throw InvalidArgumentError("permute_proto: permutation size mismatch");
  BrInput<Scalar> in;
  in.pi = pi;
  in.vectors.resize(static_cast<std::size_t>(ens.size()));
  for (Index i = 0; i < ens.size(); ++i) in.vectors[static_cast<std::size_t>(i)] = ens.grad(i, x);
  in.mean = ens.full_grad(x);
  return pair ? pair_br(in, cfg, rng) : basic_br(in, cfg, rng);
}

// ---------------------------------------------------------------------------
// Driver used by the engines: owns the per-strategy state and produces the
// permutation for each epoch.
// ---------------------------------------------------------------------------

template <typename Scalar>
struct OrdererOptions {
  BalanceConfig<Scalar> balance;
  ApSource ap_source;                   // required for ap
  std::optional<Permutation> op_order;  // fixed-order override for ig / so
  int np_rounds = -1;                   // -1: default_np_rounds(N)
  bool fl = false;                      // federated mode: grab uses the pair skeleton
};

template <typename Scalar>
class OrderDriver {
 public:
  OrderDriver(OrdererKind kind, const QuadraticEnsemble<Scalar>& ens, const Vec<Scalar>& x0,
              const Permutation& pi0, const OrdererOptions<Scalar>& opt, std::uint64_t seed)
      : kind_(kind), ens_(&ens), opt_(opt), rng_(make_rng(seed, 0x0d9e)) {
    validate_balance_config(opt_.balance);
    const Index n = ens.size();
    if (pi0.size() != n) throw InvalidArgumentError("OrderDriver: pi0 size mismatch");
    if (opt_.fl && (kind == OrdererKind::grab_proto || kind == OrdererKind::pairgrab_proto ||
                    kind == OrdererKind::pairgrab))
      throw InvalidArgumentError("OrderDriver: federated runs support ap, rr, ig, so, np and grab only");
    if (kind == OrdererKind::ap && !opt_.ap_source)
      throw InvalidArgumentError("OrderDriver: the ap orderer needs a permutation source");

    switch (kind) {
      case OrdererKind::ap:
        pi_ = checked(opt_.ap_source(0));
        break;
      case OrdererKind::ig:
        pi_ = opt_.op_order ? checked(*opt_.op_order) : Permutation::identity(n);
        break;
      case OrdererKind::so:
        pi_ = opt_.op_order ? checked(*opt_.op_order) : pi0;
        break;
      case OrdererKind::np: {
        const int rounds = opt_.np_rounds > 0 ? opt_.np_rounds : default_np_rounds(n);
        pi_ = nice_permutation(ens, x0, rounds, opt_.balance, rng_).pi;
        extra_ = n;  // the construction gradients, attributed to the first epoch
        break;
      }
      case OrdererKind::grab:
        if (opt_.fl)
          pair_ = PairGrabState<Scalar>::init(n, ens.dim());
        else
          grab_ = GrabState<Scalar>::init(n, ens.dim());
        pi_ = pi0;
        break;
      case OrdererKind::pairgrab:
        pair_ = PairGrabState<Scalar>::init(n, ens.dim());
        pi_ = pi0;
        break;
      case OrdererKind::pairgrab_proto:
        if (n % 2 != 0)
          throw InvalidArgumentError("OrderDriver: the pair prototype needs an even example count");
        pi_ = pi0;
        break;
      default:  // rr, grab_proto
        pi_ = pi0;
        break;
    }
  }

  const Permutation& pi() const { return pi_; }
  FeedKind feed() const {
    if (opt_.fl && kind_ == OrdererKind::grab) return FeedKind::step_gradients;
    return feed_kind(kind_);
  }

  // Gradient evaluations beyond the epoch's N steps since the last take.
  Index take_extra_grads() {
    Index e = extra_;
    extra_ = 0;
    return e;
  }

  void observe(Index step, Index example, const Vec<Scalar>& g) {
    if (kind_ == OrdererKind::grab && !opt_.fl)
      grab_observe(grab_, step, example, g, opt_.balance, rng_);
    else if (kind_ == OrdererKind::pairgrab || (kind_ == OrdererKind::grab && opt_.fl))
      pairgrab_observe(pair_, step, example, g, opt_.balance, rng_);
  }

  // Produce the permutation for epoch q_next; x_next is the iterate that
  // epoch starts from (used by the prototypes).
  void advance(int q_next, const Vec<Scalar>& x_next) {
    switch (kind_) {
      case OrdererKind::ap:
        pi_ = checked(opt_.ap_source(q_next));
        break;
      case OrdererKind::rr:
        pi_ = Permutation::uniform_random(ens_->size(), rng_);
        break;
      case OrdererKind::grab:
        pi_ = opt_.fl ? pairgrab_finish_epoch(pair_) : grab_finish_epoch(grab_);
        break;
      case OrdererKind::pairgrab:
        pi_ = pairgrab_finish_epoch(pair_);
        break;
      case OrdererKind::grab_proto:
      case OrdererKind::pairgrab_proto:
        pi_ = permute_proto(*ens_, x_next, pi_, kind_ == OrdererKind::pairgrab_proto, opt_.balance,
                            rng_)
                  .pi_next;
        extra_ += ens_->size();
        break;
      default:  // ig, so, np keep their fixed order
        break;
    }
  }

 private:
  Permutation checked(Permutation p) const {
    if (p.size() != ens_->size())
      throw InvalidArgumentError("OrderDriver: supplied permutation has the wrong size");
    return p;
  }

  OrdererKind kind_;
  const QuadraticEnsemble<Scalar>* ens_;
  OrdererOptions<Scalar> opt_;
  Permutation pi_;
  std::mt19937_64 rng_;
  GrabState<Scalar> grab_;
  PairGrabState<Scalar> pair_;
  Index extra_ = 0;
};

}  // namespace gradorder
