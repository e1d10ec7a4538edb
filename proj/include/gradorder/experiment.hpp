#pragma once

#include "gradorder/fl_engine.hpp"
#include "gradorder/serialization.hpp"
#include "gradorder/sgd_engine.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gradorder {

// A batch of runs on one quadratic ensemble: every requested orderer times
// `seeds` repetitions. Repetition k shares its start point and starting
// permutation across orderers so the comparison is paired.
struct ExperimentConfig {
  // ensemble
  Index n_examples = 1000;
  Index dim = 1;
  double a_mean = 0.5;
  double a_std = 1.0;
  double b_std = 1.0;
  std::uint64_t ensemble_seed = 1;
  bool resample_ensemble = false;  // draw a fresh ensemble per repetition
  std::string ensemble_file;       // load instead of generating

  // runs
  std::vector<std::string> orderers = {"rr"};
  double gamma = 1e-3;
  int epochs = 50;
  int seeds = 10;
  std::uint64_t run_seed = 0;
  double x0_scale = 1.0;
  double divergence_limit = 1e12;

  // federated mode
  bool fl = false;
  double eta = 1.0;
  int local_steps = 5;
  Index clients_per_round = 2;

  // orderer options
  std::string balance_mode = "greedy";
  double balance_c = 0.0;  // <= 0: scale-based default in probabilistic mode
  double balance_delta = 0.1;
  int np_rounds = -1;
  std::string ap_schedule_file;  // default: rotating shifts

  // output
  std::string out_dir;  // empty: keep everything in memory
  bool plots = false;
  int threads = 0;  // 0: GRADORDER_THREADS env var, then hardware count
};

struct RunOutcome {
  std::string orderer;
  int seed_index = 0;
  bool diverged = false;
  int diverged_epoch = -1;
  RunTrace<double> trace;  // empty when diverged
};

struct ExperimentResult {
  Json summary;
  std::vector<RunOutcome> runs;
  int completed = 0;
  int diverged = 0;
};

// Rotating-shift schedule used when no schedule file is given: epoch q visits
// (q, q+1, ..., q+N-1) mod N.
ApSource rotating_ap_source(Index n);

ExperimentResult run_experiment(const ExperimentConfig& cfg);

}  // namespace gradorder
