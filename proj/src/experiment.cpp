#include "gradorder/experiment.hpp"

#include "gradorder/metrics.hpp"
#include "gradorder/svg_plot.hpp"
#include "gradorder/trace_io.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <thread>

namespace gradorder {

namespace {

int resolve_threads(int request) {
  if (request > 0) return request;
  if (const char* env = std::getenv("GRADORDER_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

BalanceConfig<double> make_balance(const ExperimentConfig& cfg) {
  BalanceConfig<double> b;
  if (cfg.balance_mode == "greedy")
    b.mode = BalanceMode::greedy;
  else if (cfg.balance_mode == "probabilistic")
    b.mode = BalanceMode::probabilistic;
  else
    throw InvalidArgumentError("unknown balance mode '" + cfg.balance_mode +
                               "' (expected greedy or probabilistic)");
  b.c = cfg.balance_c;
  b.delta = cfg.balance_delta;
  validate_balance_config(b);
  return b;
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  std::uint64_t st = base + 0x9e3779b97f4a7c15ull * (a + 1) + 0xbf58476d1ce4e5b9ull * (b + 1);
  return splitmix64(st);
}

double median(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

using RowGetter = std::function<double(const EpochRow<double>&)>;

const std::vector<std::pair<std::string, RowGetter>>& metric_getters(bool fl) {
  static const std::vector<std::pair<std::string, RowGetter>> plain = {
      {"grad_norm_sq", [](const EpochRow<double>& r) { return r.grad_norm_sq; }},
      {"dist_to_opt", [](const EpochRow<double>& r) { return r.dist_to_opt; }},
      {"order_error_2", [](const EpochRow<double>& r) { return r.order_error_2; }},
      {"order_error_inf", [](const EpochRow<double>& r) { return r.order_error_inf; }},
      {"param_dev", [](const EpochRow<double>& r) { return r.param_dev; }},
  };
  static const std::vector<std::pair<std::string, RowGetter>> fed = [] {
    auto v = plain;
    v.push_back({"fl_order_error_2", [](const EpochRow<double>& r) { return r.fl_order_error_2; }});
    v.push_back(
        {"fl_order_error_inf", [](const EpochRow<double>& r) { return r.fl_order_error_inf; }});
    return v;
  }();
  return fl ? fed : plain;
}

std::vector<Vec<double>> trace_points(const RunTrace<double>& trace) {
  std::vector<Vec<double>> pts;
  pts.reserve(trace.rows.size());
  for (const auto& r : trace.rows) pts.push_back(r.x);
  return pts;
}

// The certificate attached to each orderer, instantiated from the run itself:
// the gradient spread comes from the trace points, the fixed-order constants
// from the first epoch and the largest excursion.
std::optional<RecursionSpec<double>> spec_for(OrdererKind kind, bool fl,
                                              const QuadraticEnsemble<double>& ens,
                                              const RunTrace<double>& trace, Index chunk,
                                              double delta) {
  const Index n = ens.size();
  const double sigma = empirical_sigma(ens, trace_points(trace));
  switch (kind) {
    case OrdererKind::ap:
      return fl ? spec_fl_ap<double>(n, sigma) : spec_ap<double>(n, sigma);
    case OrdererKind::rr:
      return fl ? spec_fl_rr<double>(n, sigma, delta) : spec_rr<double>(n, sigma, delta);
    case OrdererKind::ig:
    case OrdererKind::so: {
      const double phi0 = fl ? trace.rows.front().fl_order_error_2 : trace.rows.front().order_error_2;
      const double l2 = smoothness(ens).l2;
      double theta = 0;
      for (const auto& r : trace.rows)
        theta = std::max(theta, (r.x - trace.rows.front().x).norm());
      return fl ? spec_fl_op<double>(n, phi0, l2, theta) : spec_op<double>(n, phi0, l2, theta);
    }
    case OrdererKind::grab_proto:
      return spec_grab_proto<double>(n, sigma, herding_constant<double>(ens.dim(), n, delta));
    case OrdererKind::grab:
      return fl ? spec_fl_grab<double>(n, chunk, sigma,
                                       herding_constant<double>(ens.dim(), n, delta))
                : spec_grab<double>(n, sigma, herding_constant<double>(ens.dim(), n, delta));
    case OrdererKind::pairgrab:
      return spec_pairgrab<double>(n, sigma, herding_constant<double>(ens.dim(), n, delta));
    default:  // np, pairgrab-proto: no certificate attached
      return std::nullopt;
  }
}

double gamma_cap_for(OrdererKind kind, bool fl, const QuadraticEnsemble<double>& ens, Index n,
                     Index chunk, int local_steps, double eta, double C) {
  const Smoothness<double> sm = smoothness(ens);
  if (fl) {
    if (kind == OrdererKind::grab)
      return fl_step_size_cap_grab(sm.global, sm.l2_inf, sm.linf, n, chunk, local_steps, eta, C);
    return fl_step_size_cap(sm.global, sm.l2, sm.l2, n, chunk, local_steps, eta);
  }
  switch (kind) {
    case OrdererKind::grab:
    case OrdererKind::grab_proto:
      return step_size_cap_grab(sm.global, sm.l2_inf, sm.linf, n, C);
    case OrdererKind::pairgrab:
    case OrdererKind::pairgrab_proto:
      return step_size_cap_pairgrab(sm.global, sm.l2_inf, sm.linf, n, C);
    default:
      return step_size_cap(sm.global, sm.l2, sm.l2, n);
  }
}

struct Task {
  std::size_t orderer_index = 0;
  int seed_index = 0;
};

Json config_json(const ExperimentConfig& cfg) {
  return Json{{"n_examples", cfg.n_examples},
              {"dim", cfg.dim},
              {"a_mean", cfg.a_mean},
              {"a_std", cfg.a_std},
              {"b_std", cfg.b_std},
              {"ensemble_seed", cfg.ensemble_seed},
              {"resample_ensemble", cfg.resample_ensemble},
              {"ensemble_file", cfg.ensemble_file},
              {"orderers", cfg.orderers},
              {"gamma", cfg.gamma},
              {"epochs", cfg.epochs},
              {"seeds", cfg.seeds},
              {"run_seed", cfg.run_seed},
              {"x0_scale", cfg.x0_scale},
              {"divergence_limit", cfg.divergence_limit},
              {"fl", cfg.fl},
              {"eta", cfg.eta},
              {"local_steps", cfg.local_steps},
              {"clients_per_round", cfg.clients_per_round},
              {"balance_mode", cfg.balance_mode},
              {"balance_c", cfg.balance_c},
              {"balance_delta", cfg.balance_delta},
              {"np_rounds", cfg.np_rounds},
              {"ap_schedule_file", cfg.ap_schedule_file}};
}

}  // namespace

ApSource rotating_ap_source(Index n) {
  if (n < 1) throw InvalidArgumentError("rotating_ap_source: need n >= 1");
  return [n](int epoch) {
    std::vector<Index> order(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
      order[static_cast<std::size_t>(i)] = (i + static_cast<Index>(epoch)) % n;
    return Permutation::from_order(order);
  };
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  if (cfg.orderers.empty()) throw InvalidArgumentError("run_experiment: no orderers requested");
  if (cfg.seeds < 1) throw InvalidArgumentError("run_experiment: seeds must be >= 1");
  if (cfg.epochs < 1) throw InvalidArgumentError("run_experiment: epochs must be >= 1");
  if (!(cfg.x0_scale >= 0)) throw InvalidArgumentError("run_experiment: x0_scale must be >= 0");
  if (cfg.resample_ensemble && !cfg.ensemble_file.empty())
    throw InvalidArgumentError("run_experiment: resample_ensemble conflicts with ensemble_file");

  std::vector<OrdererKind> kinds;
  kinds.reserve(cfg.orderers.size());
  for (const auto& name : cfg.orderers) kinds.push_back(orderer_from_string(name));
  const BalanceConfig<double> balance = make_balance(cfg);

  // Ensembles: one shared instance, or one per repetition when resampling.
  std::vector<QuadraticEnsemble<double>> ensembles;
  if (!cfg.ensemble_file.empty()) {
    ensembles.push_back(load_ensemble<double>(cfg.ensemble_file));
  } else if (cfg.resample_ensemble) {
    for (int k = 0; k < cfg.seeds; ++k) {
      auto rng = make_rng(cfg.ensemble_seed, 0xE000 + static_cast<std::uint64_t>(k));
      ensembles.push_back(
          generate_ensemble<double>(cfg.n_examples, cfg.dim, cfg.a_mean, cfg.a_std, cfg.b_std, rng));
    }
  } else {
    auto rng = make_rng(cfg.ensemble_seed, 0xE000);
    ensembles.push_back(
        generate_ensemble<double>(cfg.n_examples, cfg.dim, cfg.a_mean, cfg.a_std, cfg.b_std, rng));
  }
  const auto& ens_for = [&](int seed_index) -> const QuadraticEnsemble<double>& {
    return ensembles[cfg.resample_ensemble ? static_cast<std::size_t>(seed_index) : 0];
  };
  const Index n = ens_for(0).size();
  const Index dim = ens_for(0).dim();

  ApSource ap_src;
  if (std::find(kinds.begin(), kinds.end(), OrdererKind::ap) != kinds.end())
    ap_src = cfg.ap_schedule_file.empty()
                 ? rotating_ap_source(n)
                 : ap_source_from_schedule(load_ap_schedule(cfg.ap_schedule_file, n));

  // Paired draws per repetition, shared by every orderer.
  std::vector<Vec<double>> x0s(static_cast<std::size_t>(cfg.seeds));
  std::vector<Permutation> pi0s(static_cast<std::size_t>(cfg.seeds));
  for (int k = 0; k < cfg.seeds; ++k) {
    auto rx = make_rng(cfg.run_seed, 0xA000 + static_cast<std::uint64_t>(k));
    std::normal_distribution<double> normal(0, 1);
    Vec<double> x0(ens_for(k).dim());
    for (Index j = 0; j < x0.size(); ++j) x0[j] = cfg.x0_scale * normal(rx);
    x0s[static_cast<std::size_t>(k)] = std::move(x0);
    auto rp = make_rng(cfg.run_seed, 0xB000 + static_cast<std::uint64_t>(k));
    pi0s[static_cast<std::size_t>(k)] = Permutation::uniform_random(ens_for(k).size(), rp);
  }

  std::vector<Task> tasks;
  for (std::size_t o = 0; o < kinds.size(); ++o)
    for (int k = 0; k < cfg.seeds; ++k) tasks.push_back({o, k});

  ExperimentResult result;
  result.runs.resize(tasks.size());

  const auto execute = [&](const Task& task) {
    const OrdererKind kind = kinds[task.orderer_index];
    const auto& ens = ens_for(task.seed_index);
    RunOutcome& out = result.runs[&task - tasks.data()];
    out.orderer = cfg.orderers[task.orderer_index];
    out.seed_index = task.seed_index;

    OrdererOptions<double> opt;
    opt.balance = balance;
    opt.np_rounds = cfg.np_rounds;
    if (kind == OrdererKind::ap) opt.ap_source = ap_src;

    const std::uint64_t engine_seed =
        mix_seed(cfg.run_seed, task.orderer_index, static_cast<std::uint64_t>(task.seed_index));
    try {
      if (cfg.fl) {
        FlConfig<double> fc;
        fc.gamma = cfg.gamma;
        fc.eta = cfg.eta;
        fc.local_steps = cfg.local_steps;
        fc.clients_per_round = cfg.clients_per_round;
        fc.epochs = cfg.epochs;
        fc.x0 = x0s[static_cast<std::size_t>(task.seed_index)];
        fc.orderer = kind;
        fc.seed = engine_seed;
        fc.pi0 = pi0s[static_cast<std::size_t>(task.seed_index)];
        fc.options = opt;
        fc.divergence_limit = cfg.divergence_limit;
        out.trace = run_fl(ens, fc);
      } else {
        SgdConfig<double> sc;
        sc.gamma = cfg.gamma;
        sc.epochs = cfg.epochs;
        sc.x0 = x0s[static_cast<std::size_t>(task.seed_index)];
        sc.orderer = kind;
        sc.seed = engine_seed;
        sc.pi0 = pi0s[static_cast<std::size_t>(task.seed_index)];
        sc.options = opt;
        sc.divergence_limit = cfg.divergence_limit;
        out.trace = run_sgd(ens, sc);
      }
    } catch (const DivergenceError& e) {
      out.diverged = true;
      out.diverged_epoch = e.epoch;
    }
  };

  const int threads = resolve_threads(cfg.threads);
  if (threads <= 1 || tasks.size() <= 1) {
    for (const Task& t : tasks) execute(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    const auto worker = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= tasks.size()) return;
        try {
          execute(tasks[i]);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    const int count = std::min<int>(threads, static_cast<int>(tasks.size()));
    for (int t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  for (const auto& run : result.runs) (run.diverged ? result.diverged : result.completed)++;

  // Per-orderer aggregation across the repetitions that completed.
  Json orderers_json = Json::object();
  for (std::size_t o = 0; o < kinds.size(); ++o) {
    const OrdererKind kind = kinds[o];
    std::vector<const RunOutcome*> done;
    Json completed_seeds = Json::array(), diverged_seeds = Json::array();
    for (const auto& run : result.runs) {
      if (run.orderer != cfg.orderers[o]) continue;
      if (run.diverged)
        diverged_seeds.push_back(run.seed_index);
      else {
        done.push_back(&run);
        completed_seeds.push_back(run.seed_index);
      }
    }

    Json entry{{"completed_seeds", completed_seeds}, {"diverged_seeds", diverged_seeds}};
    if (done.empty()) {
      entry["metrics"] = nullptr;
      entry["final"] = nullptr;
      entry["recursion"] = nullptr;
      entry["bound"] = nullptr;
      orderers_json[cfg.orderers[o]] = std::move(entry);
      continue;
    }

    const std::size_t rows = done.front()->trace.rows.size();
    Json metrics = Json::object();
    Json finals = Json::object();
    for (const auto& [name, get] : metric_getters(cfg.fl)) {
      Json jmin = Json::array(), jmed = Json::array(), jmax = Json::array();
      for (std::size_t q = 0; q < rows; ++q) {
        std::vector<double> vals;
        vals.reserve(done.size());
        for (const RunOutcome* run : done) vals.push_back(get(run->trace.rows[q]));
        jmin.push_back(*std::min_element(vals.begin(), vals.end()));
        jmax.push_back(*std::max_element(vals.begin(), vals.end()));
        jmed.push_back(median(vals));
      }
      metrics[name] = Json{{"min", jmin}, {"median", jmed}, {"max", jmax}};
      // param_dev on the final boundary row is trivially zero; report the
      // last epoch that actually ran instead.
      const std::size_t fin = (name == "param_dev" && rows > 1) ? rows - 2 : rows - 1;
      std::vector<double> last;
      for (const RunOutcome* run : done) last.push_back(get(run->trace.rows[fin]));
      finals[name] = median(last);
    }
    entry["metrics"] = std::move(metrics);
    entry["final"] = std::move(finals);

    // Recursion certificate, evaluated per repetition on its own trace.
    {
      std::vector<double> fractions, ratios, eff_c, d_vals;
      int checked = 0, satisfied = 0;
      Json spec_json = nullptr;
      for (const RunOutcome* run : done) {
        const auto spec = spec_for(kind, cfg.fl, ens_for(run->seed_index), run->trace,
                                   cfg.clients_per_round, cfg.balance_delta);
        if (!spec) break;
        const RecursionReport<double> rep = check_recursion(run->trace, *spec, 0.0);
        fractions.push_back(rep.fraction);
        ratios.push_back(rep.worst_ratio);
        eff_c.push_back(rep.effective_c);
        d_vals.push_back(spec->D());
        checked += rep.checked;
        satisfied += rep.satisfied;
        if (spec_json.is_null())
          spec_json = Json{{"name", spec->name}, {"nu", spec->nu},   {"sum_A", spec->sum_A()},
                           {"sum_B", spec->sum_B()}, {"C", spec->C}, {"c1", spec->c1},
                           {"c2", spec->c2}};
      }
      if (fractions.empty()) {
        entry["recursion"] = nullptr;
      } else {
        entry["recursion"] = Json{{"spec", spec_json},
                                  {"checked", checked},
                                  {"satisfied", satisfied},
                                  {"fraction_min", *std::min_element(fractions.begin(), fractions.end())},
                                  {"fraction_median", median(fractions)},
                                  {"worst_ratio_max", *std::max_element(ratios.begin(), ratios.end())},
                                  {"effective_c_median", median(eff_c)},
                                  {"D_median", median(d_vals)}};
      }
    }

    // Certificate bound at the run step size, against the measured best
    // gradient over the epochs that ran.
    {
      std::vector<double> bounds, measured, caps;
      int holds = 0;
      bool constants_ok = true;
      std::string note;
      for (const RunOutcome* run : done) {
        const auto& ens = ens_for(run->seed_index);
        const auto spec = spec_for(kind, cfg.fl, ens, run->trace, cfg.clients_per_round,
                                   cfg.balance_delta);
        if (!spec || !(cfg.gamma > 0)) break;
        const Smoothness<double> sm = smoothness(ens);
        BoundInputs<double> in;
        in.gamma = cfg.gamma;
        in.n = ens.size();
        in.q = cfg.epochs;
        const Vec<double> x0 = run->trace.rows.front().x;
        in.f0_gap = ens.full_value(x0) - ens.full_value(optimum(ens));
        in.l2p = spec->phi_norm == NormP::two ? sm.l2 : sm.l2_inf;
        const auto phi = run->trace.column_phi(spec->phi_norm, spec->fl);
        for (int i = 0; i < spec->nu; ++i) in.phi_init_sq.push_back(phi[i] * phi[i]);
        in.local_steps = cfg.fl ? cfg.local_steps : 1;
        in.chunk = cfg.fl ? cfg.clients_per_round : 1;
        in.eta = cfg.fl ? cfg.eta : 1.0;
        in.sigma = empirical_sigma(ens, trace_points(run->trace));
        caps.push_back(gamma_cap_for(kind, cfg.fl, ens, ens.size(), cfg.clients_per_round,
                                     cfg.local_steps, cfg.eta, spec->C));
        double m = std::numeric_limits<double>::infinity();
        for (int q = 0; q < cfg.epochs; ++q)
          m = std::min(m, run->trace.rows[static_cast<std::size_t>(q)].grad_norm_sq);
        try {
          const double bd = theorem_bound(*spec, in);
          bounds.push_back(bd);
          measured.push_back(m);
          if (bd >= m) ++holds;
        } catch (const InvalidConstantsError& e) {
          constants_ok = false;
          note = e.what();
          break;
        }
      }
      if (bounds.empty()) {
        entry["bound"] = constants_ok ? Json(nullptr)
                                      : Json{{"constants_ok", false}, {"note", note}};
      } else {
        const double cap_med = median(caps);
        entry["bound"] = Json{{"gamma", cfg.gamma},
                              {"gamma_cap_median", cap_med},
                              {"gamma_within_cap", cfg.gamma <= cap_med},
                              {"bound_median", median(bounds)},
                              {"measured_min_median", median(measured)},
                              {"holds_fraction", double(holds) / double(bounds.size())},
                              {"constants_ok", true}};
      }
    }

    orderers_json[cfg.orderers[o]] = std::move(entry);
  }

  result.summary = Json{{"config", config_json(cfg)}, {"n", n},         {"dim", dim},
                        {"fl", cfg.fl},               {"gamma", cfg.gamma},
                        {"epochs", cfg.epochs},       {"seeds", cfg.seeds},
                        {"orderers", orderers_json}};

  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    const auto path = [&](const std::string& name) {
      return (std::filesystem::path(cfg.out_dir) / name).string();
    };
    save_json_file(path("resolved_config.json"), config_json(cfg));
    save_json_file(path("summary.json"), result.summary);
    for (const auto& run : result.runs) {
      if (run.diverged) continue;
      write_trace_csv(path(run.orderer + "_seed" + std::to_string(run.seed_index) + ".csv"),
                      run.trace);
    }
    if (cfg.plots) {
      for (const char* metric : {"dist_to_opt", "grad_norm_sq", "order_error_inf"})
        write_text_file(path(std::string(metric) + ".svg"),
                        render_band_chart(result.summary, metric));
    }
  }
  return result;
}

}  // namespace gradorder
