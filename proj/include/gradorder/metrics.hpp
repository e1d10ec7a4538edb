#pragma once

#include "gradorder/balancing.hpp"
#include "gradorder/errors.hpp"
#include "gradorder/permutation.hpp"
#include "gradorder/quadratic.hpp"
#include "gradorder/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace gradorder {

template <typename Scalar>
struct OrderError {
  Scalar two = 0;
  Scalar inf = 0;

  Scalar get(NormP p) const { return p == NormP::two ? two : inf; }
};

// Order error of permutation pi at point x: the largest prefix norm of the
// centered gradients sum_{i<n} (grad f_{pi(i)}(x) - grad f(x)), n in {1..N}.
// Both norms come out of one prefix scan.
template <typename Scalar>
OrderError<Scalar> order_error(const QuadraticEnsemble<Scalar>& ens, const Vec<Scalar>& x,
                               const Permutation& pi) {
  if (pi.size() != ens.size()) throw InvalidArgumentError("order_error: permutation size mismatch");
  if (x.size() != ens.dim()) throw InvalidArgumentError("order_error: point dimension mismatch");
  const Vec<Scalar> g = ens.full_grad(x);
  Vec<Scalar> s = Vec<Scalar>::Zero(ens.dim());
  OrderError<Scalar> out;
  for (Index n = 0; n < pi.size(); ++n) {
    s += ens.grad(pi(n), x) - g;
    out.two = std::max(out.two, Scalar(s.norm()));
    out.inf = std::max(out.inf, Scalar(s.template lpNorm<Eigen::Infinity>()));
  }
  return out;
}

// Block variant: the prefix is flattened to the last completed block of size
// chunk, so only prefixes at multiples of chunk matter. Requires chunk | N.
template <typename Scalar>
OrderError<Scalar> fl_order_error(const QuadraticEnsemble<Scalar>& ens, const Vec<Scalar>& x,
                                  const Permutation& pi, Index chunk) {
  if (pi.size() != ens.size()) throw InvalidArgumentError("fl_order_error: permutation size mismatch");
  if (x.size() != ens.dim()) throw InvalidArgumentError("fl_order_error: point dimension mismatch");
  if (chunk < 1 || ens.size() % chunk != 0)
    throw InvalidArgumentError("fl_order_error: chunk must divide the example count");
  const Vec<Scalar> g = ens.full_grad(x);
  Vec<Scalar> s = Vec<Scalar>::Zero(ens.dim());
  OrderError<Scalar> out;
  for (Index n = 0; n < pi.size(); ++n) {
    s += ens.grad(pi(n), x) - g;
    if ((n + 1) % chunk == 0) {
      out.two = std::max(out.two, Scalar(s.norm()));
      out.inf = std::max(out.inf, Scalar(s.template lpNorm<Eigen::Infinity>()));
    }
  }
  return out;
}

// Largest p-norm distance of recorded within-epoch iterates from the epoch
// start. Requires a trace recorded with record_inner.
template <typename Scalar>
Scalar param_deviation(const std::vector<Vec<Scalar>>& inner, const Vec<Scalar>& x_start, NormP p) {
  if (inner.empty())
    throw UnavailableMetricError("param_deviation: no inner iterates recorded; rerun with record_inner");
  Scalar best = 0;
  for (const auto& x : inner) best = std::max(best, norm_p(Vec<Scalar>(x - x_start), p));
  return best;
}

// ---------------------------------------------------------------------------
// Epoch-recursion certificates
//
// A certificate states, for the epochs a strategy produces,
//   phi_q^2 <= sum_{i=1..nu} A_i phi_{q-i}^2
//            + sum_{i=0..nu} B_i ||grad f(x_{q-i})||^2
//            + d_const + d_csq_coeff * C^2
// with phi measured in phi_norm (block order error when fl is set).
// B absorbs any N^2 factors. C is the high-probability herding constant.
// ---------------------------------------------------------------------------

template <typename Scalar>
struct RecursionSpec {
  std::string name;
  int nu = 0;
  std::vector<Scalar> A;  // A[i-1] multiplies phi_{q-i}^2,      i = 1..nu
  std::vector<Scalar> B;  // B[i]   multiplies ||grad(x_{q-i})||^2, i = 0..nu
  Scalar d_const = 0;
  Scalar d_csq_coeff = 0;
  Scalar C = 0;
  NormP phi_norm = NormP::two;
  bool fl = false;
  Scalar c1 = 3;  // certificate constants paired with this spec
  Scalar c2 = 6;

  Scalar D() const { return d_const + d_csq_coeff * C * C; }
  Scalar sum_A() const {
    Scalar s = 0;
    for (Scalar v : A) s += v;
    return s;
  }
  Scalar sum_B() const {
    Scalar s = 0;
    for (Scalar v : B) s += v;
    return s;
  }
};

// High-probability herding constant 30 log(dN/delta).
template <typename Scalar>
Scalar herding_constant(Index d, Index n, Scalar delta) {
  if (d < 1 || n < 1) throw InvalidArgumentError("herding_constant: need d >= 1 and n >= 1");
  if (!(delta > 0 && delta < 1)) throw InvalidArgumentError("herding_constant: delta must lie in (0,1)");
  return Scalar(30) * std::log(Scalar(d) * Scalar(n) / delta);
}

template <typename Scalar>
RecursionSpec<Scalar> spec_ap(Index n, Scalar sigma) {
  RecursionSpec<Scalar> s;
  s.name = "ap";
  s.d_const = Scalar(n) * Scalar(n) * sigma * sigma;
  s.c1 = 3;
  s.c2 = 6;
  return s;
}

template <typename Scalar>
RecursionSpec<Scalar> spec_rr(Index n, Scalar sigma, Scalar delta) {
  RecursionSpec<Scalar> s;
  s.name = "rr";
  const Scalar lg = std::log(Scalar(8) / delta);
  s.d_const = Scalar(4) * Scalar(n) * sigma * sigma * lg * lg;
  s.c1 = 3;
  s.c2 = 6;
  return s;
}

// Fixed permutation reused every epoch. phi0 is the order error of the fixed
// permutation at the start point, l2 the max component 2-norm smoothness and
// theta the largest 2-norm excursion from the start point.
template <typename Scalar>
RecursionSpec<Scalar> spec_op(Index n, Scalar phi0, Scalar l2, Scalar theta) {
  RecursionSpec<Scalar> s;
  s.name = "op";
  s.d_const = Scalar(2) * phi0 * phi0 +
              Scalar(8) * l2 * l2 * Scalar(n) * Scalar(n) * theta * theta;
  s.c1 = 3;
  s.c2 = 6;
  return s;
}

template <typename Scalar>
RecursionSpec<Scalar> spec_grab_proto(Index n, Scalar sigma, Scalar C) {
  RecursionSpec<Scalar> s;
  s.name = "grab-proto";
  s.nu = 1;
  s.A = {Scalar(3) / 4};
  s.B = {0, Scalar(n) * Scalar(n) / 50};
  s.d_csq_coeff = sigma * sigma;
  s.C = C;
  s.phi_norm = NormP::inf;
  s.c1 = 3;
  s.c2 = 24;
  return s;
}

template <typename Scalar>
RecursionSpec<Scalar> spec_grab(Index n, Scalar sigma, Scalar C) {
  RecursionSpec<Scalar> s;
  s.name = "grab";
  s.nu = 2;
  s.A = {Scalar(3) / 5, Scalar(1) / 50};
  s.B = {0, Scalar(n) * Scalar(n) / 50, Scalar(n) * Scalar(n) / 50};
  s.d_csq_coeff = Scalar(2) * sigma * sigma;
  s.C = C;
  s.phi_norm = NormP::inf;
  s.c1 = 3;
  s.c2 = 16;
  return s;
}

template <typename Scalar>
RecursionSpec<Scalar> spec_pairgrab(Index n, Scalar sigma, Scalar C) {
  RecursionSpec<Scalar> s;
  s.name = "pairgrab";
  s.nu = 1;
  s.A = {Scalar(4) / 5};
  s.B = {0, Scalar(3) * Scalar(n) * Scalar(n) / 50};
  s.d_csq_coeff = Scalar(4) * sigma * sigma;
  s.C = C;
  s.phi_norm = NormP::inf;
  s.c1 = 3;
  s.c2 = 30;
  return s;
}

template <typename Scalar>
RecursionSpec<Scalar> spec_fl_ap(Index n, Scalar sigma) {
  RecursionSpec<Scalar> s = spec_ap(n, sigma);
  s.name = "fl-ap";
  s.fl = true;
  return s;
}

template <typename Scalar>
RecursionSpec<Scalar> spec_fl_rr(Index n, Scalar sigma, Scalar delta) {
  RecursionSpec<Scalar> s = spec_rr(n, sigma, delta);
  s.name = "fl-rr";
  s.fl = true;
  return s;
}

template <typename Scalar>
RecursionSpec<Scalar> spec_fl_op(Index n, Scalar phi0, Scalar l2, Scalar theta) {
  RecursionSpec<Scalar> s = spec_op(n, phi0, l2, theta);
  s.name = "fl-op";
  s.fl = true;
  return s;
}

template <typename Scalar>
RecursionSpec<Scalar> spec_fl_grab(Index n, Index chunk, Scalar sigma, Scalar C) {
  RecursionSpec<Scalar> s;
  s.name = "fl-grab";
  s.nu = 1;
  s.A = {Scalar(3) / 5};
  s.B = {0, Scalar(n) * Scalar(n) / 96};
  s.d_const = Scalar(chunk) * Scalar(chunk) * sigma * sigma / 96;
  s.d_csq_coeff = Scalar(6) * sigma * sigma;
  s.C = C;
  s.phi_norm = NormP::inf;
  s.fl = true;
  s.c1 = 3;
  s.c2 = 15;
  return s;
}

template <typename Scalar>
struct RecursionReport {
  std::string spec;
  int checked = 0;
  int satisfied = 0;
  Scalar fraction = 1;          // satisfied / checked, 1 when nothing was checkable
  Scalar worst_ratio = 0;       // max over checked epochs of lhs / rhs
  int worst_epoch = -1;
  Scalar slack = 0;
  Scalar effective_c = 0;       // smallest C satisfying every checked epoch (0 if n/a)
};

// Checks the recursion on per-epoch columns: phi[q] is the order error in the
// spec norm, grad_sq[q] is ||grad f(x_q)||^2. Epochs q = nu+1 .. Q are
// checked; the first nu+1 epochs are initial conditions. An epoch passes when
// lhs <= rhs * (1 + slack).
template <typename Scalar>
RecursionReport<Scalar> check_recursion(const std::vector<Scalar>& phi,
                                        const std::vector<Scalar>& grad_sq,
                                        const RecursionSpec<Scalar>& spec, Scalar slack = 0) {
  if (phi.size() != grad_sq.size())
    throw InvalidArgumentError("check_recursion: column lengths differ");
  if (static_cast<int>(spec.A.size()) != spec.nu ||
      (spec.B.size() != 0 && static_cast<int>(spec.B.size()) != spec.nu + 1))
    throw InvalidArgumentError("check_recursion: spec coefficient lengths do not match nu");
  if (slack < 0) throw InvalidArgumentError("check_recursion: negative slack");

  RecursionReport<Scalar> rep;
  rep.spec = spec.name;
  rep.slack = slack;
  const int q_max = static_cast<int>(phi.size()) - 1;
  Scalar needed_csq = 0;
  for (int q = spec.nu + 1; q <= q_max; ++q) {
    const Scalar lhs = phi[q] * phi[q];
    Scalar rhs = spec.D();
    Scalar rest = spec.d_const;
    for (int i = 1; i <= spec.nu; ++i) {
      rhs += spec.A[i - 1] * phi[q - i] * phi[q - i];
      rest += spec.A[i - 1] * phi[q - i] * phi[q - i];
    }
    for (int i = 0; i < static_cast<int>(spec.B.size()); ++i) {
      rhs += spec.B[i] * grad_sq[q - i];
      rest += spec.B[i] * grad_sq[q - i];
    }
    ++rep.checked;
    const bool ok = lhs <= rhs * (1 + slack);
    if (ok) ++rep.satisfied;
    const Scalar ratio = rhs > 0 ? lhs / rhs
                                 : (lhs == 0 ? Scalar(0) : std::numeric_limits<Scalar>::infinity());
    if (ratio > rep.worst_ratio) {
      rep.worst_ratio = ratio;
      rep.worst_epoch = q;
    }
    if (spec.d_csq_coeff > 0)
      needed_csq = std::max(needed_csq, (lhs - rest) / spec.d_csq_coeff);
  }
  rep.fraction = rep.checked > 0 ? Scalar(rep.satisfied) / Scalar(rep.checked) : Scalar(1);
  if (spec.d_csq_coeff > 0) rep.effective_c = std::sqrt(std::max(needed_csq, Scalar(0)));
  return rep;
}

// ---------------------------------------------------------------------------
// Certificate bounds on min_q ||grad f(x_q)||^2 (q over the epochs that ran)
// ---------------------------------------------------------------------------

template <typename Scalar>
struct BoundInputs {
  Scalar gamma = 0;
  Index n = 0;   // examples per epoch
  int q = 0;     // epochs ran
  Scalar f0_gap = 0;  // f(x_0) - f(x*)
  Scalar l2p = 0;     // gradient-2-norm vs parameter-p-norm smoothness, p from the certificate
  std::vector<Scalar> phi_init_sq;  // phi_i^2 for i < nu
  // federated extras
  int local_steps = 1;  // K
  Index chunk = 1;      // S
  Scalar eta = 1;
  Scalar sigma = 0;
};

template <typename Scalar>
void validate_bound_constants(const RecursionSpec<Scalar>& spec, Index n) {
  // Constants pinned exactly at a minimum must survive the rounding of the
  // minimum itself, so both floors carry a relative representation slack.
  constexpr Scalar slack = Scalar(1) - Scalar(1e-9);
  const Scalar sum_a = spec.sum_A();
  const Scalar sum_b = spec.sum_B();
  if (!(sum_a < 1)) throw InvalidConstantsError("bound: sum of A coefficients must be below 1");
  const Scalar ratio = sum_b / (Scalar(n) * Scalar(n) * (1 - sum_a));
  if (!(ratio < 255)) throw InvalidConstantsError("bound: sum B / (N^2 (1 - sum A)) must be below 255");
  const Scalar c1_min = 1 / (Scalar(255) / 512 - ratio / 512);
  if (spec.c1 < c1_min * slack) throw InvalidConstantsError("bound: c1 below its admissible minimum");
  if (spec.c2 < (2 * spec.c1 / (1 - sum_a)) * slack)
    throw InvalidConstantsError("bound: c2 below 2 c1 / (1 - sum A)");
}

template <typename Scalar>
Scalar theorem_bound(const RecursionSpec<Scalar>& spec, const BoundInputs<Scalar>& in) {
  if (!(in.gamma > 0)) throw InvalidArgumentError("theorem_bound: gamma must be positive");
  if (in.n < 1 || in.q < 1) throw InvalidArgumentError("theorem_bound: need n >= 1 and q >= 1");
  if (static_cast<int>(in.phi_init_sq.size()) != spec.nu)
    throw InvalidArgumentError("theorem_bound: need phi_i^2 for exactly the first nu epochs");
  validate_bound_constants(spec, in.n);

  Scalar phi_sum = 0;
  for (Scalar v : in.phi_init_sq) phi_sum += v;
  const Scalar g2 = in.gamma * in.gamma * in.l2p * in.l2p;
  if (!spec.fl) {
    return spec.c1 * in.f0_gap / (in.gamma * Scalar(in.n) * Scalar(in.q)) +
           spec.c2 * g2 * (phi_sum / Scalar(in.q)) + spec.c2 * g2 * spec.D();
  }
  const Scalar k = Scalar(in.local_steps);
  const Scalar s = Scalar(in.chunk);
  return spec.c1 * in.f0_gap / (in.gamma * in.eta * k * (Scalar(in.n) / s) * Scalar(in.q)) +
         spec.c2 * g2 * k * k / (s * s) * (phi_sum / Scalar(in.q)) +
         Scalar(2) * spec.c1 * g2 * k * k * in.sigma * in.sigma +
         spec.c2 * g2 * k * k / (s * s) * spec.D();
}

// ---------------------------------------------------------------------------
// Step-size premises and the tuned rule
// ---------------------------------------------------------------------------

template <typename Scalar>
Scalar step_size_cap(Scalar l, Scalar l2p, Scalar lp, Index n) {
  if (!(l > 0 && l2p > 0 && lp > 0 && n > 0)) throw InvalidArgumentError("step_size_cap: bad inputs");
  return std::min({1 / (l * Scalar(n)), 1 / (32 * l2p * Scalar(n)), 1 / (32 * lp * Scalar(n))});
}

template <typename Scalar>
Scalar step_size_cap_grab(Scalar l, Scalar l2inf, Scalar linf, Index n, Scalar C) {
  if (!(l > 0 && l2inf > 0 && linf > 0 && n > 0 && C >= 0))
    throw InvalidArgumentError("step_size_cap_grab: bad inputs");
  return std::min({1 / (l * Scalar(n)), 1 / (128 * l2inf * (Scalar(n) + C)),
                   1 / (128 * linf * Scalar(n))});
}

template <typename Scalar>
Scalar step_size_cap_pairgrab(Scalar l, Scalar l2inf, Scalar linf, Index n, Scalar C) {
  if (!(l > 0 && l2inf > 0 && linf > 0 && n > 0 && C >= 0))
    throw InvalidArgumentError("step_size_cap_pairgrab: bad inputs");
  return std::min({1 / (l * Scalar(n)), 1 / (64 * l2inf * (Scalar(n) + C)),
                   1 / (64 * linf * Scalar(n))});
}

template <typename Scalar>
Scalar fl_step_size_cap(Scalar l, Scalar l2p, Scalar lp, Index n, Index chunk, int local_steps,
                        Scalar eta) {
  if (!(l > 0 && l2p > 0 && lp > 0 && n > 0 && chunk > 0 && local_steps > 0 && eta > 0))
    throw InvalidArgumentError("fl_step_size_cap: bad inputs");
  const Scalar r = Scalar(local_steps) * Scalar(n) / Scalar(chunk);
  return std::min({1 / (32 * l2p * r), 1 / (eta * l * r), 1 / (32 * lp * r)});
}

template <typename Scalar>
Scalar fl_step_size_cap_grab(Scalar l, Scalar l2inf, Scalar linf, Index n, Index chunk,
                             int local_steps, Scalar eta, Scalar C) {
  if (!(l > 0 && l2inf > 0 && linf > 0 && n > 0 && chunk > 0 && local_steps > 0 && eta > 0 && C >= 0))
    throw InvalidArgumentError("fl_step_size_cap_grab: bad inputs");
  const Scalar k = Scalar(local_steps);
  const Scalar s = Scalar(chunk);
  return std::min({1 / (eta * l * k * Scalar(n) / s), 1 / (128 * l2inf * k * (Scalar(n) + C) / s),
                   1 / (128 * (1 + eta) * linf * k * Scalar(n) / s)});
}

// gamma = min{ 1/d_cap, (r0 / (c T))^(1/3) } with r0 the initial objective
// gap, T the total step count and c the curvature-scale constant.
template <typename Scalar>
Scalar tuned_step_size(Scalar r0, Scalar t, Scalar c, Scalar d_cap) {
  if (!(r0 > 0 && t > 0 && c > 0 && d_cap > 0)) throw InvalidArgumentError("tuned_step_size: bad inputs");
  return std::min(1 / d_cap, std::cbrt(r0 / (c * t)));
}

}  // namespace gradorder
