#include "gradorder/lemma_battery.hpp"

#include "gradorder/balancing.hpp"
#include "gradorder/errors.hpp"
#include "gradorder/fl_engine.hpp"
#include "gradorder/ordering.hpp"
#include "gradorder/quadratic.hpp"
#include "gradorder/sgd_engine.hpp"
#include "gradorder/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace gradorder {

namespace {

constexpr double kTol = 1e-9;

using Rng = std::mt19937_64;

[[noreturn]] void fail(const std::string& category, int trial, std::uint64_t seed,
                       const std::string& detail) {
  std::ostringstream msg;
  msg << "lemma check failed: category=" << category << " trial=" << trial << " seed=" << seed
      << " :: " << detail;
  throw PropertyViolationError(msg.str());
}

// Vectors with a random per-instance magnitude so both tiny and large scales
// get exercised.
std::vector<Vec<double>> draw_vectors(Rng& rng, Index n, Index d) {
  std::normal_distribution<double> normal(0, 1);
  std::uniform_real_distribution<double> log_scale(-3, 3);
  const double scale = std::exp(log_scale(rng));
  std::vector<Vec<double>> out(static_cast<std::size_t>(n));
  for (auto& v : out) {
    v.resize(d);
    for (Index k = 0; k < d; ++k) v[k] = scale * normal(rng);
  }
  return out;
}

SignSequence draw_signs(Rng& rng, Index n) {
  std::bernoulli_distribution coin(0.5);
  SignSequence s(static_cast<std::size_t>(n));
  for (auto& e : s) e = coin(rng) ? 1 : -1;
  return s;
}

std::vector<Vec<double>> permuted_seq(const std::vector<Vec<double>>& v, const Permutation& pi) {
  std::vector<Vec<double>> out(v.size());
  for (Index i = 0; i < pi.size(); ++i)
    out[static_cast<std::size_t>(i)] = v[static_cast<std::size_t>(pi(i))];
  return out;
}

double total_inf(const std::vector<Vec<double>>& v) {
  Vec<double> s = Vec<double>::Zero(v.front().size());
  for (const auto& z : v) s += z;
  return s.lpNorm<Eigen::Infinity>();
}

// Reordering with arbitrary signs halves the herding error up to the signed
// herding error and the total sum.
void check_basic_skeleton(const LemmaOptions& opt, int trial, Rng& rng) {
  std::uniform_int_distribution<Index> dn(1, opt.n_max), dd(1, opt.d_max);
  const Index n = dn(rng), d = dd(rng);
  const auto v = draw_vectors(rng, n, d);
  const Permutation pi = Permutation::uniform_random(n, rng);
  const SignSequence eps = draw_signs(rng, n);
  const Permutation pi_next = reorder(pi, eps);

  const double before = herding_error(permuted_seq(v, pi));
  const double after = herding_error(permuted_seq(v, pi_next));
  const double signed_err = signed_herding_error(permuted_seq(v, pi), eps);
  const double rhs = 0.5 * before + 0.5 * signed_err + total_inf(v);
  if (after > rhs + kTol) {
    std::ostringstream d2;
    d2 << "n=" << n << " d=" << d << " after=" << after << " > bound=" << rhs;
    fail("basic-skeleton", trial, opt.seed, d2.str());
  }
}

// Pair variant: signs come in +/- pairs, the signed term runs on the pair
// differences.
void check_pair_skeleton(const LemmaOptions& opt, int trial, Rng& rng, Index chunk) {
  const Index half_max = std::max<Index>(opt.n_max / 2, 1);
  std::uniform_int_distribution<Index> dh(1, half_max), dd(1, opt.d_max);
  Index n = 2 * dh(rng);
  if (chunk > 0) n = std::max<Index>(chunk, (n / chunk) * chunk);  // keep chunk | n
  const Index d = dd(rng);
  const auto v = draw_vectors(rng, n, d);
  const Permutation pi = Permutation::uniform_random(n, rng);
  const SignSequence pair_signs = draw_signs(rng, n / 2);

  SignSequence eps(static_cast<std::size_t>(n));
  std::vector<Vec<double>> diffs(static_cast<std::size_t>(n / 2));
  for (Index l = 0; l < n / 2; ++l) {
    eps[static_cast<std::size_t>(2 * l)] = pair_signs[static_cast<std::size_t>(l)];
    eps[static_cast<std::size_t>(2 * l + 1)] = -pair_signs[static_cast<std::size_t>(l)];
    diffs[static_cast<std::size_t>(l)] =
        v[static_cast<std::size_t>(pi(2 * l))] - v[static_cast<std::size_t>(pi(2 * l + 1))];
  }
  const Permutation pi_next = reorder(pi, eps);

  const auto herd = [&](const Permutation& p) {
    return chunk > 0 ? chunked_herding_error(permuted_seq(v, p), chunk)
                     : herding_error(permuted_seq(v, p));
  };
  const double before = herd(pi);
  const double after = herd(pi_next);
  const double signed_err = signed_herding_error(diffs, pair_signs);
  const double rhs = 0.5 * before + 0.5 * signed_err + total_inf(v);
  if (after > rhs + kTol) {
    std::ostringstream d2;
    d2 << "n=" << n << " d=" << d << " chunk=" << chunk << " after=" << after
       << " > bound=" << rhs;
    fail(chunk > 0 ? "chunked-pair-skeleton" : "pair-skeleton", trial, opt.seed, d2.str());
  }
}

// reorder puts the +1 positions first in processing order and the -1
// positions last in reverse, stated here as order relations.
void check_reorder_structure(const LemmaOptions& opt, int trial, Rng& rng) {
  std::uniform_int_distribution<Index> dn(1, opt.n_max);
  const Index n = dn(rng);
  const Permutation pi = Permutation::uniform_random(n, rng);
  const SignSequence eps = draw_signs(rng, n);
  const Permutation next = reorder(pi, eps);

  for (Index j = 0; j < n; ++j) {
    for (Index k = j + 1; k < n; ++k) {
      const Index pj = next.position_of(pi(j)), pk = next.position_of(pi(k));
      const int ej = eps[static_cast<std::size_t>(j)], ek = eps[static_cast<std::size_t>(k)];
      bool ok = true;
      if (ej == 1 && ek == 1) ok = pj < pk;        // front keeps processing order
      else if (ej == -1 && ek == -1) ok = pj > pk; // back reverses it
      else if (ej == 1) ok = pj < pk;              // every +1 precedes every -1
      else ok = pj > pk;
      if (!ok) {
        std::ostringstream d2;
        d2 << "n=" << n << " j=" << j << " k=" << k << " eps_j=" << ej << " eps_k=" << ek;
        fail("reorder-structure", trial, opt.seed, d2.str());
      }
    }
  }
}

// The pair pass emits opposite signs inside each pair and defers to reorder.
void check_pair_pass_structure(const LemmaOptions& opt, int trial, Rng& rng) {
  const Index half_max = std::max<Index>(opt.n_max / 2, 1);
  std::uniform_int_distribution<Index> dh(1, half_max), dd(1, opt.d_max);
  const Index n = 2 * dh(rng), d = dd(rng);

  BrInput<double> in;
  in.pi = Permutation::uniform_random(n, rng);
  in.vectors = draw_vectors(rng, n, d);
  in.mean = Vec<double>::Zero(d);
  BalanceConfig<double> cfg;
  cfg.mode = (trial % 2 == 0) ? BalanceMode::greedy : BalanceMode::probabilistic;
  const BrResult<double> res = pair_br(in, cfg, rng);

  for (Index l = 0; l < n / 2; ++l) {
    const int a = res.signs[static_cast<std::size_t>(2 * l)];
    const int b = res.signs[static_cast<std::size_t>(2 * l + 1)];
    if (a * b != -1) {
      std::ostringstream d2;
      d2 << "n=" << n << " pair=" << l << " signs=(" << a << "," << b << ")";
      fail("pair-pass-structure", trial, opt.seed, d2.str());
    }
  }
  if (res.pi_next != reorder(in.pi, res.signs))
    fail("pair-pass-structure", trial, opt.seed, "pi_next != reorder(pi, signs)");
}

// The streaming two-pointer orderer and the epoch-end reorder form agree on
// any gradient stream, in both balance modes, across consecutive epochs.
void check_streaming_equivalence(const LemmaOptions& opt, int trial, Rng& rng) {
  std::uniform_int_distribution<Index> dn(1, std::max<Index>(opt.n_max / 4, 1)),
      dd(1, opt.d_max);
  const Index n = dn(rng), d = dd(rng);
  BalanceConfig<double> cfg;
  cfg.mode = (trial % 2 == 0) ? BalanceMode::greedy : BalanceMode::probabilistic;

  std::uniform_int_distribution<std::uint64_t> ds;
  const std::uint64_t sync_seed = ds(rng);
  Rng rng_stream = make_rng(sync_seed, 1);
  Rng rng_batch = make_rng(sync_seed, 1);

  GrabState<double> st_stream = GrabState<double>::init(n, d);
  GrabState<double> st_batch = GrabState<double>::init(n, d);
  Permutation pi_stream = Permutation::uniform_random(n, rng);
  Permutation pi_batch = pi_stream;

  for (int epoch = 0; epoch < 2; ++epoch) {
    const auto grads = draw_vectors(rng, n, d);
    for (Index i = 0; i < n; ++i)
      grab_observe(st_stream, i, pi_stream(i), grads[static_cast<std::size_t>(i)], cfg, rng_stream);
    const Permutation next_stream = grab_finish_epoch(st_stream);
    const Permutation next_batch = permute_grab(st_batch, pi_batch, grads, cfg, rng_batch);
    if (next_stream != next_batch) {
      std::ostringstream d2;
      d2 << "n=" << n << " d=" << d << " epoch=" << epoch << " mode="
         << (cfg.mode == BalanceMode::greedy ? "greedy" : "probabilistic");
      fail("streaming-epoch-equivalence", trial, opt.seed, d2.str());
    }
    if ((st_stream.m_stale - st_batch.m_stale).lpNorm<Eigen::Infinity>() != 0)
      fail("streaming-epoch-equivalence", trial, opt.seed, "stale means diverged");
    pi_stream = next_stream;
    pi_batch = next_batch;
  }
}

// With one client per block, one local step and unit amplification the
// federated engine is plain permuted sgd.
void check_federated_reduction(const LemmaOptions& opt, int trial, Rng& rng) {
  std::uniform_int_distribution<Index> dn(1, 8), dd(1, std::min<Index>(opt.d_max, 3));
  const Index n = dn(rng), d = dd(rng);
  const QuadraticEnsemble<double> ens = generate_ensemble<double>(n, d, 0.5, 0.2, 1.0, rng);
  std::normal_distribution<double> normal(0, 1);
  Vec<double> x0(d);
  for (Index k = 0; k < d; ++k) x0[k] = normal(rng);

  std::uniform_int_distribution<std::uint64_t> ds;
  const std::uint64_t run_seed = ds(rng);
  const double gamma = 0.5 / (smoothness(ens).global * static_cast<double>(n));

  SgdConfig<double> sc;
  sc.gamma = gamma;
  sc.epochs = 3;
  sc.x0 = x0;
  sc.orderer = OrdererKind::rr;
  sc.seed = run_seed;
  const RunTrace<double> ts = run_sgd(ens, sc);

  FlConfig<double> fc;
  fc.gamma = gamma;
  fc.eta = 1;
  fc.local_steps = 1;
  fc.clients_per_round = 1;
  fc.epochs = 3;
  fc.x0 = x0;
  fc.orderer = OrdererKind::rr;
  fc.seed = run_seed;
  const RunTrace<double> tf = run_fl(ens, fc);

  for (std::size_t q = 0; q < ts.rows.size(); ++q) {
    const double diff = (ts.rows[q].x - tf.rows[q].x).lpNorm<Eigen::Infinity>();
    const double scale = std::max(1.0, ts.rows[q].x.lpNorm<Eigen::Infinity>());
    if (diff > 1e-12 * scale) {
      std::ostringstream d2;
      d2 << "n=" << n << " d=" << d << " q=" << q << " diff=" << diff;
      fail("federated-reduction", trial, opt.seed, d2.str());
    }
  }
}

}  // namespace

LemmaReport verify_lemmas(const LemmaOptions& opt) {
  if (opt.trials < 1) throw InvalidArgumentError("verify_lemmas: trials must be >= 1");
  if (opt.n_max < 4) throw InvalidArgumentError("verify_lemmas: n_max must be >= 4");
  if (opt.d_max < 1) throw InvalidArgumentError("verify_lemmas: d_max must be >= 1");

  LemmaReport rep;
  const auto run = [&](const char* name, std::uint64_t stream, const auto& check) {
    Rng rng = make_rng(opt.seed, stream);
    for (int t = 0; t < opt.trials; ++t) check(t, rng);
    rep.categories.push_back({name, opt.trials});
  };

  run("basic-skeleton", 1, [&](int t, Rng& rng) { check_basic_skeleton(opt, t, rng); });
  run("pair-skeleton", 2, [&](int t, Rng& rng) { check_pair_skeleton(opt, t, rng, 0); });
  run("chunked-pair-skeleton", 3, [&](int t, Rng& rng) {
    const Index chunks[] = {2, 4, 8};
    check_pair_skeleton(opt, t, rng, chunks[t % 3]);
  });
  run("reorder-structure", 4, [&](int t, Rng& rng) { check_reorder_structure(opt, t, rng); });
  run("pair-pass-structure", 5, [&](int t, Rng& rng) { check_pair_pass_structure(opt, t, rng); });
  run("streaming-epoch-equivalence", 6,
      [&](int t, Rng& rng) { check_streaming_equivalence(opt, t, rng); });
  run("federated-reduction", 7, [&](int t, Rng& rng) { check_federated_reduction(opt, t, rng); });
  return rep;
}

std::string to_string(const LemmaReport& rep) {
  std::ostringstream out;
  out << "verified " << rep.total() << " instances across " << rep.categories.size()
      << " categories\n";
  for (const auto& c : rep.categories) out << "  " << c.name << ": " << c.trials << " ok\n";
  return out.str();
}

}  // namespace gradorder
