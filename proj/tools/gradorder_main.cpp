#include "gradorder/experiment.hpp"
#include "gradorder/lemma_battery.hpp"
#include "gradorder/svg_plot.hpp"
#include "gradorder/trace_io.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <string>

namespace {

using namespace gradorder;

void add_experiment_flags(CLI::App* sub, ExperimentConfig& cfg) {
  sub->add_option("--n", cfg.n_examples, "examples per epoch")->capture_default_str();
  sub->add_option("--dim", cfg.dim, "parameter dimension")->capture_default_str();
  sub->add_option("--a-mean", cfg.a_mean, "mean of the curvature coefficients")
      ->capture_default_str();
  sub->add_option("--a-std", cfg.a_std, "std of the curvature coefficients")
      ->capture_default_str();
  sub->add_option("--b-std", cfg.b_std, "std of the linear coefficients")->capture_default_str();
  sub->add_option("--ensemble-seed", cfg.ensemble_seed, "seed for the generated ensemble")
      ->capture_default_str();
  sub->add_flag("--resample-ensemble", cfg.resample_ensemble,
                "draw a fresh ensemble per repetition");
  sub->add_option("--ensemble", cfg.ensemble_file, "load the ensemble from a json file");
  sub->add_option("--orderer", cfg.orderers,
                  "orderer to run (repeatable): ap, rr, ig, so, np, grab-proto, pairgrab-proto, "
                  "grab, pairgrab")
      ->capture_default_str();
  sub->add_option("--gamma", cfg.gamma, "step size")->capture_default_str();
  sub->add_option("--epochs", cfg.epochs, "epochs per run")->capture_default_str();
  sub->add_option("--seeds", cfg.seeds, "repetitions per orderer")->capture_default_str();
  sub->add_option("--run-seed", cfg.run_seed, "base seed for starts and permutations")
      ->capture_default_str();
  sub->add_option("--x0-scale", cfg.x0_scale, "std of the start point")->capture_default_str();
  sub->add_option("--divergence-limit", cfg.divergence_limit,
                  "abort a run when the iterate norm passes this")
      ->capture_default_str();
  sub->add_option("--eta", cfg.eta, "federated amplification factor")->capture_default_str();
  sub->add_option("--local-steps", cfg.local_steps, "federated local steps per client")
      ->capture_default_str();
  sub->add_option("--clients-per-round", cfg.clients_per_round,
                  "federated clients per block; must divide --n")
      ->capture_default_str();
  sub->add_option("--balance-mode", cfg.balance_mode, "greedy or probabilistic")
      ->capture_default_str();
  sub->add_option("--balance-c", cfg.balance_c,
                  "probabilistic walk scale; <= 0 uses the built-in default")
      ->capture_default_str();
  sub->add_option("--balance-delta", cfg.balance_delta, "failure budget for the scale default")
      ->capture_default_str();
  sub->add_option("--np-rounds", cfg.np_rounds,
                  "pair-pass rounds for the np orderer; -1 for the default")
      ->capture_default_str();
  sub->add_option("--ap-schedule", cfg.ap_schedule_file,
                  "json schedule for the ap orderer (cycled over epochs)");
  sub->add_option("--out", cfg.out_dir, "directory for csv traces and summary.json");
  sub->add_flag("--plots", cfg.plots, "write svg charts next to summary.json");
  sub->add_option("--threads", cfg.threads, "worker threads; 0 uses GRADORDER_THREADS or the cpu count")
      ->capture_default_str();
}

int run_experiment_cmd(const ExperimentConfig& cfg) {
  const ExperimentResult res = run_experiment(cfg);
  for (const auto& [name, entry] : res.summary["orderers"].items()) {
    const int completed = static_cast<int>(entry["completed_seeds"].size());
    const int diverged = static_cast<int>(entry["diverged_seeds"].size());
    std::printf("%-14s completed %d/%d", name.c_str(), completed, completed + diverged);
    if (!entry["final"].is_null()) {
      const auto& fin = entry["final"];
      std::printf("  final dist_to_opt %.6g  order_error_inf %.6g",
                  fin["dist_to_opt"].get<double>(), fin["order_error_inf"].get<double>());
    }
    std::printf("\n");
  }
  if (!cfg.out_dir.empty()) std::printf("wrote %s/summary.json\n", cfg.out_dir.c_str());
  if (res.completed == 0) {
    std::fprintf(stderr, "error: every run diverged\n");
    return 4;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"permutation-ordering simulator for quadratic ensembles"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from a toml file");
  app.allow_config_extras(CLI::config_extras_mode::error);

  ExperimentConfig run_cfg;
  CLI::App* run_sgd = app.add_subcommand("run-sgd", "run permuted sgd for each orderer");
  add_experiment_flags(run_sgd, run_cfg);
  run_sgd->add_flag("--fl", run_cfg.fl, "use the federated engine");

  ExperimentConfig fl_cfg;
  CLI::App* run_fl_cmd = app.add_subcommand("run-fl", "run the federated engine for each orderer");
  add_experiment_flags(run_fl_cmd, fl_cfg);

  LemmaOptions lemma_opt;
  CLI::App* verify = app.add_subcommand("verify-lemmas", "randomized checks of the core inequalities");
  verify->add_option("--trials", lemma_opt.trials, "instances per category")->capture_default_str();
  verify->add_option("--n-max", lemma_opt.n_max, "largest sequence length drawn")
      ->capture_default_str();
  verify->add_option("--d-max", lemma_opt.d_max, "largest dimension drawn")->capture_default_str();
  verify->add_option("--seed", lemma_opt.seed, "seed for the drawn instances")
      ->capture_default_str();

  struct {
    Index n = 64;
    Index dim = 4;
    double a_mean = 0.5, a_std = 1.0, b_std = 1.0;
    std::uint64_t ensemble_seed = 1;
    std::string ensemble_file;
    int rounds = -1;
    std::string balance_mode = "greedy";
    double balance_c = 0.0, balance_delta = 0.1;
    std::uint64_t seed = 0;
    std::string out;
  } np_cfg;
  CLI::App* np_build = app.add_subcommand("np-build", "construct a low-herding fixed permutation");
  np_build->add_option("--n", np_cfg.n, "examples (must be even)")->capture_default_str();
  np_build->add_option("--dim", np_cfg.dim, "parameter dimension")->capture_default_str();
  np_build->add_option("--a-mean", np_cfg.a_mean)->capture_default_str();
  np_build->add_option("--a-std", np_cfg.a_std)->capture_default_str();
  np_build->add_option("--b-std", np_cfg.b_std)->capture_default_str();
  np_build->add_option("--ensemble-seed", np_cfg.ensemble_seed)->capture_default_str();
  np_build->add_option("--ensemble", np_cfg.ensemble_file, "load the ensemble from a json file");
  np_build->add_option("--rounds", np_cfg.rounds, "pair-pass rounds; -1 for the default")
      ->capture_default_str();
  np_build->add_option("--balance-mode", np_cfg.balance_mode)->capture_default_str();
  np_build->add_option("--balance-c", np_cfg.balance_c)->capture_default_str();
  np_build->add_option("--balance-delta", np_cfg.balance_delta)->capture_default_str();
  np_build->add_option("--seed", np_cfg.seed)->capture_default_str();
  np_build->add_option("--out", np_cfg.out, "output json path")->required();

  struct {
    std::string summary, metric = "dist_to_opt", out;
  } plot_cfg;
  CLI::App* plot = app.add_subcommand("plot", "render an svg band chart from a summary.json");
  plot->add_option("--summary", plot_cfg.summary, "summary.json path")->required();
  plot->add_option("--metric", plot_cfg.metric, "metric to plot")->capture_default_str();
  plot->add_option("--out", plot_cfg.out, "output svg path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run_sgd->parsed()) return run_experiment_cmd(run_cfg);
    if (run_fl_cmd->parsed()) {
      fl_cfg.fl = true;
      return run_experiment_cmd(fl_cfg);
    }
    if (verify->parsed()) {
      const LemmaReport rep = verify_lemmas(lemma_opt);
      std::printf("%s", to_string(rep).c_str());
      return 0;
    }
    if (np_build->parsed()) {
      QuadraticEnsemble<double> ens;
      if (!np_cfg.ensemble_file.empty()) {
        ens = load_ensemble<double>(np_cfg.ensemble_file);
      } else {
        auto rng = make_rng(np_cfg.ensemble_seed, 0xE000);
        ens = generate_ensemble<double>(np_cfg.n, np_cfg.dim, np_cfg.a_mean, np_cfg.a_std,
                                        np_cfg.b_std, rng);
      }
      BalanceConfig<double> bal;
      bal.mode = np_cfg.balance_mode == "probabilistic" ? BalanceMode::probabilistic
                                                        : BalanceMode::greedy;
      if (np_cfg.balance_mode != "greedy" && np_cfg.balance_mode != "probabilistic")
        throw InvalidArgumentError("unknown balance mode '" + np_cfg.balance_mode + "'");
      bal.c = np_cfg.balance_c;
      bal.delta = np_cfg.balance_delta;
      const int rounds = np_cfg.rounds > 0 ? np_cfg.rounds : default_np_rounds(ens.size());
      auto rng = make_rng(np_cfg.seed, 0x4e70);
      const Vec<double> x0 = Vec<double>::Zero(ens.dim());
      const NpResult<double> res = nice_permutation(ens, x0, rounds, bal, rng);
      Json j{{"permutation", res.pi},
             {"herding", res.herding},
             {"best_round", res.best_round},
             {"rounds", rounds}};
      save_json_file(np_cfg.out, j);
      std::printf("herding %.6g -> %.6g over %d rounds (best at round %d), wrote %s\n",
                  res.herding.front(), res.herding[static_cast<std::size_t>(res.best_round)],
                  rounds, res.best_round, np_cfg.out.c_str());
      return 0;
    }
    if (plot->parsed()) {
      emit_plot(plot_cfg.summary, plot_cfg.metric, plot_cfg.out);
      std::printf("wrote %s\n", plot_cfg.out.c_str());
      return 0;
    }
  } catch (const PropertyViolationError& e) {
    std::fprintf(stderr, "property violation: %s\n", e.what());
    return 3;
  } catch (const InvalidArgumentError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
