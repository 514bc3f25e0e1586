#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "propinf/harness.hpp"
#include "propinf/theory.hpp"

using namespace propinf;
namespace fs = std::filesystem;

namespace {

harness::ExperimentPlan tiny_plan() {
  fixtures::PocketParams params;
  params.pocket_mass = 0.30;
  synth::SynthSpec spec = fixtures::make_pocket_spec(params);

  harness::ExperimentPlan plan;
  plan.base.property = spec.property;
  plan.base.t0 = 0.02;
  plan.base.t1 = 0.20;
  plan.base.n = 1500;
  plan.base.k = 1;
  plan.base.query_size = 200;
  plan.base.poison.target_property = spec.property;
  plan.base.poison.rate = 0.02;
  plan.base.model.kind = models::ModelKind::logistic;
  plan.base.train.epochs = 25;
  plan.base.train.learning_rate = 0.02;
  plan.axis = harness::SweepAxis::poison_rate;
  plan.axis_values = {0.02};
  plan.trials = 1;
  plan.targets_per_world = 1;
  plan.query_sets_per_target = 2;
  plan.eval_size = 1500;
  plan.seed = 11;
  plan.source.inline_spec = spec;
  plan.source.pool_n = 16000;
  return plan;
}

}  // namespace

TEST_CASE("tiny experiment: counts, accuracy, replay, persistence") {
  harness::ExperimentPlan plan = tiny_plan();
  std::string out_dir = (fs::temp_directory_path() / "propinf_harness_test").string();
  fs::remove_all(out_dir);
  harness::ExperimentReport report = harness::run_experiment(plan, out_dir);

  REQUIRE(report.per_axis.size() == 1);
  const harness::AxisResult& r = report.per_axis[0];
  // 2 worlds x 1 target x 2 query sets x 1 trial.
  CHECK(r.n_obs == 4);
  CHECK(report.observations.size() == 4);
  // Trivially separated worlds at 2% poisoning: every observation correct.
  CHECK(r.accuracy == doctest::Approx(1.0));
  CHECK(r.ci_hi <= 1.0);
  CHECK(r.ci_lo >= 0.0);
  CHECK(r.f1 > 0.0);

  // Audit replay: accuracy recomputable from the observation rows.
  auto replay = harness::recompute_accuracy(report.observations);
  REQUIRE(replay.size() == 1);
  CHECK(replay[0].second == doctest::Approx(r.accuracy));

  // Persisted artifacts exist and round-trip.
  fs::path run_dir = fs::path(out_dir) / "runs" / plan.plan_hash();
  CHECK(fs::exists(run_dir / "plan.json"));
  CHECK(fs::exists(run_dir / "report.json"));
  CHECK(fs::exists(run_dir / "observations.csv"));
  std::ifstream obs_in(run_dir / "observations.csv");
  std::string obs_text((std::istreambuf_iterator<char>(obs_in)),
                       std::istreambuf_iterator<char>());
  auto parsed = harness::parse_observations_csv(obs_text);
  CHECK(parsed.size() == report.observations.size());
  auto replay2 = harness::recompute_accuracy(parsed);
  CHECK(replay2[0].second == doctest::Approx(r.accuracy));

  // Re-running the same plan reproduces the observations exactly.
  harness::ExperimentReport again = harness::run_experiment(plan, out_dir);
  REQUIRE(again.observations.size() == report.observations.size());
  for (size_t i = 0; i < report.observations.size(); ++i) {
    CHECK(again.observations[i].guess == report.observations[i].guess);
    CHECK(again.observations[i].correct == report.observations[i].correct);
  }
  CHECK(again.per_axis[0].accuracy == r.accuracy);
  fs::remove_all(out_dir);
}

TEST_CASE("default plan shape yields the documented observation counts") {
  harness::ExperimentPlan plan;
  CHECK(plan.trials == 5);
  CHECK(plan.targets_per_world == 10);
  CHECK(plan.query_sets_per_target == 10);
  // 2 worlds x 10 targets x 10 query sets = 200 per trial; 1000 total.
  CHECK(2 * plan.targets_per_world * plan.query_sets_per_target == 200);
  CHECK(plan.trials * 2 * plan.targets_per_world * plan.query_sets_per_target == 1000);
}

TEST_CASE("plot emission") {
  std::string dir = (fs::temp_directory_path() / "propinf_plots").string();
  fs::create_directories(dir);

  harness::ExperimentReport empty;
  std::string acc_path = dir + "/acc.csv";
  harness::emit_plot_data(empty, harness::PlotKind::accuracy_curve, acc_path);
  {
    std::ifstream in(acc_path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(text == "axis_value,accuracy,ci_lo,ci_hi,n_obs\n");
  }

  harness::ExperimentReport report;
  harness::AxisResult ax;
  ax.axis_value = 0.01;
  ax.n_obs = 10;
  ax.accuracy = 0.9;
  Rng rng(4);
  for (int i = 0; i < 500; ++i) ax.world_logits[0].push_back(rng.normal(-1.0, 0.3));
  for (int i = 0; i < 400; ++i) ax.world_logits[1].push_back(rng.normal(1.0, 0.3));
  report.per_axis.push_back(ax);

  std::string hist_path = dir + "/hist.csv";
  harness::emit_plot_data(report, harness::PlotKind::logit_histogram, hist_path, 20);
  {
    std::ifstream in(hist_path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "world,bin_lo,bin_hi,count");
    int64_t total0 = 0, total1 = 0;
    while (std::getline(in, line)) {
      std::istringstream row(line);
      std::string w, lo, hi, count;
      std::getline(row, w, ',');
      std::getline(row, lo, ',');
      std::getline(row, hi, ',');
      std::getline(row, count, ',');
      (w == "0" ? total0 : total1) += std::stoll(count);
    }
    CHECK(total0 == 500);
    CHECK(total1 == 400);
  }

  // theory_overlay matches the theory module's CSV on the same params.
  attack::AttackConfig base;
  base.t0 = 0.01;
  base.t1 = 0.035;
  std::string overlay_path = dir + "/overlay.csv";
  harness::emit_plot_data(report, harness::PlotKind::theory_overlay, overlay_path, 40, &base,
                          0.9, -2.0, 0.5);
  {
    std::ifstream in(overlay_path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(text == theory::theory_curves_csv(0.01, 0.035, 0.9, -2.0, 0.5, {0.01}));
  }
  fs::remove_all(dir);
}

TEST_CASE("plan json round-trip and stable hash") {
  harness::ExperimentPlan plan = tiny_plan();
  std::string json_text = plan.to_json();
  harness::ExperimentPlan back = harness::ExperimentPlan::from_json(json_text);
  CHECK(back.axis_values == plan.axis_values);
  CHECK(back.trials == plan.trials);
  CHECK(back.base.n == plan.base.n);
  CHECK(back.plan_hash() == plan.plan_hash());
  CHECK(plan.plan_hash().size() == 16);
}
