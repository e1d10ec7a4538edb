#pragma once

#include "gradorder/errors.hpp"
#include "gradorder/types.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace gradorder {

// N diagonal quadratics f_n(x) = sum_k a(n,k) x_k^2 + b(n,k) x_k.
// Individual a(n,k) may be negative; the mean objective needs every column
// mean of a positive so that f = (1/N) sum_n f_n is bounded below.
template <typename Scalar>
struct QuadraticEnsemble {
  Mat<Scalar> a;
  Mat<Scalar> b;

  Index size() const { return a.rows(); }
  Index dim() const { return a.cols(); }

  Scalar value(Index n, const Vec<Scalar>& x) const {
    return a.row(n).dot(x.cwiseProduct(x)) + b.row(n).dot(x);
  }

  Vec<Scalar> grad(Index n, const Vec<Scalar>& x) const {
    return Scalar(2) * a.row(n).transpose().cwiseProduct(x) + b.row(n).transpose();
  }

  Vec<Scalar> mean_a() const { return a.colwise().mean().transpose(); }
  Vec<Scalar> mean_b() const { return b.colwise().mean().transpose(); }

  Scalar full_value(const Vec<Scalar>& x) const {
    return mean_a().dot(x.cwiseProduct(x)) + mean_b().dot(x);
  }

  Vec<Scalar> full_grad(const Vec<Scalar>& x) const {
    return Scalar(2) * mean_a().cwiseProduct(x) + mean_b();
  }
};

template <typename Scalar>
void validate_ensemble(const QuadraticEnsemble<Scalar>& ens) {
  if (ens.a.rows() < 1 || ens.a.cols() < 1)
    throw InvalidArgumentError("QuadraticEnsemble: need at least one example and one dimension");
  if (ens.a.rows() != ens.b.rows() || ens.a.cols() != ens.b.cols())
    throw InvalidArgumentError("QuadraticEnsemble: a and b must have the same shape");
  if (!ens.a.allFinite() || !ens.b.allFinite())
    throw InvalidArgumentError("QuadraticEnsemble: coefficients must be finite");
  if (!(ens.mean_a().array() > Scalar(0)).all())
    throw InvalidArgumentError("QuadraticEnsemble: every column mean of a must be positive");
}

template <typename Scalar>
Vec<Scalar> optimum(const QuadraticEnsemble<Scalar>& ens) {
  Vec<Scalar> abar = ens.mean_a();
  if (!(abar.array() > Scalar(0)).all())
    throw InvalidArgumentError("optimum: every column mean of a must be positive");
  return (-ens.mean_b().array() / (Scalar(2) * abar.array())).matrix();
}

// Exact smoothness constants of the diagonal quadratic family.
//   global: full objective, gradient 2-norm vs parameter 2-norm
//   l2:     max over examples, 2-norm vs 2-norm
//   linf:   max over examples, inf-norm vs inf-norm (equals l2 here)
//   l2_inf: max over examples, gradient 2-norm vs parameter inf-norm
template <typename Scalar>
struct Smoothness {
  Scalar global;
  Scalar l2;
  Scalar linf;
  Scalar l2_inf;
};

template <typename Scalar>
Smoothness<Scalar> smoothness(const QuadraticEnsemble<Scalar>& ens) {
  Smoothness<Scalar> s;
  s.global = Scalar(2) * ens.mean_a().cwiseAbs().maxCoeff();
  s.l2 = Scalar(2) * ens.a.cwiseAbs().maxCoeff();
  s.linf = s.l2;
  s.l2_inf = Scalar(2) * ens.a.rowwise().norm().maxCoeff();
  return s;
}

// Draws a(n,k) ~ Normal(a_mean, a_std^2) and b(n,k) ~ Normal(0, b_std^2),
// row by row, a first. Resamples the whole ensemble (up to 16 times) until
// every column mean of a is positive.
template <typename Scalar, typename Rng>
QuadraticEnsemble<Scalar> generate_ensemble(Index n, Index d, Scalar a_mean, Scalar a_std,
                                            Scalar b_std, Rng& rng) {
  if (n < 1 || d < 1) throw InvalidArgumentError("generate_ensemble: need n >= 1 and d >= 1");
  if (a_std < 0 || b_std < 0) throw InvalidArgumentError("generate_ensemble: negative std");
  std::normal_distribution<Scalar> da(a_mean, a_std);
  std::normal_distribution<Scalar> db(Scalar(0), b_std);
  for (int attempt = 0; attempt < 16; ++attempt) {
    QuadraticEnsemble<Scalar> ens;
    ens.a.resize(n, d);
    ens.b.resize(n, d);
    for (Index r = 0; r < n; ++r)
      for (Index c = 0; c < d; ++c) ens.a(r, c) = da(rng);
    for (Index r = 0; r < n; ++r)
      for (Index c = 0; c < d; ++c) ens.b(r, c) = db(rng);
    if ((ens.mean_a().array() > Scalar(0)).all()) return ens;
  }
  throw InvalidArgumentError(
      "generate_ensemble: column mean of a stayed nonpositive after 16 attempts; "
      "raise a_mean or the example count");
}

// Largest 2-norm deviation of a component gradient from the full gradient
// over the given points.
template <typename Scalar>
Scalar empirical_sigma(const QuadraticEnsemble<Scalar>& ens, const std::vector<Vec<Scalar>>& points) {
  Scalar best = 0;
  for (const Vec<Scalar>& x : points) {
    const Vec<Scalar> g = ens.full_grad(x);
    for (Index n = 0; n < ens.size(); ++n)
      best = std::max(best, Scalar((ens.grad(n, x) - g).norm()));
  }
  return best;
}

}  // namespace gradorder
