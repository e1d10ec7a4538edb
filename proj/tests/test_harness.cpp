#include "gradorder/experiment.hpp"
#include "gradorder/lemma_battery.hpp"
#include "gradorder/serialization.hpp"
#include "gradorder/svg_plot.hpp"
#include "gradorder/trace_io.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <string>

namespace gradorder {
namespace {

namespace fs = std::filesystem;

// Fresh scratch directory per test, removed on destruction.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("gradorder_test_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

TEST(LemmaBattery, RunsEveryCategoryTheRequestedNumberOfTimes) {
  LemmaOptions opt;
  opt.trials = 40;
  opt.n_max = 24;
  opt.d_max = 4;
  opt.seed = 5;
  const LemmaReport rep = verify_lemmas(opt);
  ASSERT_EQ(rep.categories.size(), 7u);
  for (const auto& cat : rep.categories) EXPECT_EQ(cat.trials, 40);
  EXPECT_EQ(rep.total(), 280);
  const std::string text = to_string(rep);
  EXPECT_NE(text.find("basic-skeleton"), std::string::npos);
  EXPECT_NE(text.find("federated-reduction"), std::string::npos);
}

TEST(LemmaBattery, RejectsDegenerateOptions) {
  LemmaOptions opt;
  opt.trials = 0;
  EXPECT_THROW(verify_lemmas(opt), InvalidArgumentError);
  opt.trials = 1;
  opt.n_max = 2;
  EXPECT_THROW(verify_lemmas(opt), InvalidArgumentError);
}

TEST(TraceIo, CsvLayoutCoversPlainAndFederatedRuns) {
  auto rng = make_rng(51);
  const auto ens = generate_ensemble<double>(4, 1, 0.5, 1.0, 1.0, rng);
  SgdConfig<double> sc;
  sc.gamma = 1e-3;
  sc.epochs = 2;
  sc.x0 = Vec<double>::Ones(1);
  const std::string plain = trace_csv(run_sgd(ens, sc));
  EXPECT_EQ(plain.substr(0, plain.find('\n')),
            "q,grad_norm_sq,dist_to_opt,order_error_2,order_error_inf,param_dev,extra_grads");
  EXPECT_EQ(std::count(plain.begin(), plain.end(), '\n'), 4);  // header + 3 rows

  FlConfig<double> fc;
  fc.gamma = 1e-3;
  fc.clients_per_round = 2;
  fc.epochs = 2;
  fc.x0 = Vec<double>::Ones(1);
  const std::string fed = trace_csv(run_fl(ens, fc));
  EXPECT_EQ(fed.substr(0, fed.find('\n')),
            "q,grad_norm_sq,dist_to_opt,order_error_2,order_error_inf,param_dev,extra_grads"
            ",round,fl_order_error_2,fl_order_error_inf");
}

TEST(TraceIo, DoublesSurviveTheRoundTrip) {
  EXPECT_EQ(std::stod(format_double(0.1)), 0.1);
  EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
  EXPECT_EQ(format_double(2), "2");
}

TEST(TraceIo, FilesComeBackVerbatim) {
  TempDir dir("trace_io");
  const std::string text = "line one\nline two\n";
  write_text_file(dir.file("t.txt"), text);
  EXPECT_EQ(read_text_file(dir.file("t.txt")), text);
  EXPECT_THROW(read_text_file(dir.file("missing.txt")), IoError);
}

TEST(Serialization, EnsembleAndPermutationRoundTrip) {
  TempDir dir("serialization");
  auto rng = make_rng(52);
  const auto ens = generate_ensemble<double>(5, 3, 0.5, 1.0, 1.0, rng);
  save_ensemble(dir.file("ens.json"), ens);
  const auto back = load_ensemble<double>(dir.file("ens.json"));
  EXPECT_EQ(back.a, ens.a);
  EXPECT_EQ(back.b, ens.b);

  const Permutation pi = Permutation::from_order({2, 0, 1});
  const Json j = pi;
  EXPECT_EQ(j.dump(), "[2,0,1]");
  EXPECT_EQ(j.get<Permutation>(), pi);
}

TEST(Serialization, ApSchedulesValidateAndCycle) {
  TempDir dir("ap_schedule");
  save_json_file(dir.file("sched.json"), Json::parse("[[1,0,2],[2,1,0]]"));
  const auto sched = load_ap_schedule(dir.file("sched.json"), 3);
  ASSERT_EQ(sched.size(), 2u);
  const ApSource src = ap_source_from_schedule(sched);
  EXPECT_EQ(src(0), sched[0]);
  EXPECT_EQ(src(1), sched[1]);
  EXPECT_EQ(src(2), sched[0]);  // cycles

  EXPECT_THROW(load_ap_schedule(dir.file("sched.json"), 4), InvalidArgumentError);
  save_json_file(dir.file("empty.json"), Json::array());
  EXPECT_THROW(load_ap_schedule(dir.file("empty.json"), 3), InvalidArgumentError);
}

TEST(Experiment, RotatingScheduleShiftsByTheEpoch) {
  const ApSource src = rotating_ap_source(3);
  EXPECT_EQ(src(0), Permutation::from_order({0, 1, 2}));
  EXPECT_EQ(src(1), Permutation::from_order({1, 2, 0}));
  EXPECT_EQ(src(4), Permutation::from_order({1, 2, 0}));
}

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.n_examples = 12;
  cfg.dim = 2;
  cfg.gamma = 1e-3;
  cfg.epochs = 4;
  cfg.seeds = 3;
  cfg.orderers = {"rr", "grab"};
  cfg.threads = 1;
  return cfg;
}

TEST(Experiment, SummaryCarriesPairedCompleteRuns) {
  const ExperimentResult res = run_experiment(small_config());
  EXPECT_EQ(res.completed, 6);
  EXPECT_EQ(res.diverged, 0);
  ASSERT_EQ(res.runs.size(), 6u);

  const Json& orderers = res.summary.at("orderers");
  for (const char* name : {"rr", "grab"}) {
    const Json& entry = orderers.at(name);
    EXPECT_EQ(entry.at("completed_seeds").size(), 3u);
    EXPECT_EQ(entry.at("diverged_seeds").size(), 0u);
    const Json& med = entry.at("metrics").at("dist_to_opt").at("median");
    EXPECT_EQ(med.size(), 5u);  // epochs + 1 boundary rows
    EXPECT_TRUE(entry.at("final").contains("order_error_inf"));
    EXPECT_FALSE(entry.at("recursion").is_null());
    EXPECT_FALSE(entry.at("bound").is_null());
    EXPECT_TRUE(entry.at("bound").at("constants_ok").get<bool>());
  }

  // Repetition k shares its start across orderers: paired comparison.
  const RunOutcome* rr0 = nullptr;
  const RunOutcome* grab0 = nullptr;
  for (const auto& run : res.runs) {
    if (run.seed_index != 0) continue;
    (run.orderer == "rr" ? rr0 : grab0) = &run;
  }
  ASSERT_NE(rr0, nullptr);
  ASSERT_NE(grab0, nullptr);
  EXPECT_EQ(rr0->trace.rows[0].x, grab0->trace.rows[0].x);
  EXPECT_EQ(rr0->trace.rows[0].pi, grab0->trace.rows[0].pi);
}

TEST(Experiment, DivergedRepetitionsAreReportedNotThrown) {
  ExperimentConfig cfg = small_config();
  cfg.orderers = {"ig"};
  cfg.gamma = 1e3;
  cfg.divergence_limit = 1e6;
  const ExperimentResult res = run_experiment(cfg);
  EXPECT_EQ(res.completed, 0);
  EXPECT_EQ(res.diverged, 3);
  const Json& entry = res.summary.at("orderers").at("ig");
  EXPECT_EQ(entry.at("diverged_seeds").size(), 3u);
  EXPECT_TRUE(entry.at("metrics").is_null());
  for (const auto& run : res.runs) {
    EXPECT_TRUE(run.diverged);
    EXPECT_GE(run.diverged_epoch, 0);
  }
}

TEST(Experiment, ResamplingDrawsADistinctEnsemblePerRepetition) {
  ExperimentConfig cfg = small_config();
  cfg.orderers = {"so"};
  cfg.seeds = 2;
  cfg.resample_ensemble = true;
  const ExperimentResult res = run_experiment(cfg);
  ASSERT_EQ(res.runs.size(), 2u);
  // Different ensembles on the same start point give different first-epoch
  // order errors.
  EXPECT_NE(res.runs[0].trace.rows[0].order_error_2, res.runs[1].trace.rows[0].order_error_2);

  cfg.ensemble_file = "somewhere.json";
  EXPECT_THROW(run_experiment(cfg), InvalidArgumentError);
}

TEST(Experiment, OutputDirectoryReceivesConfigSummaryTracesAndPlots) {
  TempDir dir("experiment_out");
  ExperimentConfig cfg = small_config();
  cfg.orderers = {"rr"};
  cfg.seeds = 2;
  cfg.out_dir = dir.file("out");
  cfg.plots = true;
  run_experiment(cfg);

  EXPECT_TRUE(fs::exists(dir.file("out") + "/resolved_config.json"));
  EXPECT_TRUE(fs::exists(dir.file("out") + "/summary.json"));
  EXPECT_TRUE(fs::exists(dir.file("out") + "/rr_seed0.csv"));
  EXPECT_TRUE(fs::exists(dir.file("out") + "/rr_seed1.csv"));
  EXPECT_TRUE(fs::exists(dir.file("out") + "/dist_to_opt.svg"));

  const Json summary = load_json_file(dir.file("out") + "/summary.json");
  EXPECT_EQ(summary.at("orderers").at("rr").at("completed_seeds").size(), 2u);
  const std::string csv = read_text_file(dir.file("out") + "/rr_seed0.csv");
  EXPECT_EQ(csv.substr(0, 2), "q,");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), cfg.epochs + 2);
}

TEST(Experiment, ApOrdererUsesScheduleFilesWhenGiven) {
  TempDir dir("ap_exp");
  // A two-permutation schedule on four examples, cycled over the epochs.
  save_json_file(dir.file("sched.json"), Json::parse("[[3,2,1,0],[1,0,3,2]]"));
  ExperimentConfig cfg = small_config();
  cfg.n_examples = 4;
  cfg.orderers = {"ap"};
  cfg.seeds = 1;
  cfg.epochs = 3;
  cfg.ap_schedule_file = dir.file("sched.json");
  const ExperimentResult res = run_experiment(cfg);
  ASSERT_EQ(res.runs.size(), 1u);
  const auto& rows = res.runs[0].trace.rows;
  EXPECT_EQ(rows[0].pi, Permutation::from_order({3, 2, 1, 0}));
  EXPECT_EQ(rows[1].pi, Permutation::from_order({1, 0, 3, 2}));
  EXPECT_EQ(rows[2].pi, Permutation::from_order({3, 2, 1, 0}));
}

TEST(SvgPlot, MissingMetricsFailLoudly) {
  const ExperimentResult res = run_experiment(small_config());
  EXPECT_NO_THROW(render_band_chart(res.summary, "order_error_inf"));
  try {
    render_band_chart(res.summary, "no_such_metric");
    FAIL() << "expected InvalidArgumentError";
  } catch (const InvalidArgumentError& e) {
    EXPECT_NE(std::string(e.what()).find("dist_to_opt"), std::string::npos);
  }
}

TEST(SvgPlot, OutputIsDeterministicAndWellFormed) {
  const ExperimentResult res = run_experiment(small_config());
  const std::string svg = render_band_chart(res.summary, "dist_to_opt");
  EXPECT_EQ(svg, render_band_chart(res.summary, "dist_to_opt"));
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_NE(svg.find("rr"), std::string::npos);     // legend labels
  EXPECT_NE(svg.find("grab"), std::string::npos);
  EXPECT_NE(svg.find("polyline"), std::string::npos);
}

}  // namespace
}  // namespace gradorder

int main(int argc, char** argv) {
  ::testing::InitGoogleTest(&argc, argv);
  return RUN_ALL_TESTS();
}
