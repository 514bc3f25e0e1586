#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "propinf/attack.hpp"
#include "propinf/data.hpp"
#include "propinf/synth.hpp"

namespace propinf::harness {

enum class SweepAxis { poison_rate, poison_count, shadow_models, query_size, t_separation };

// Where the experiment's master dataset comes from: a CSV on disk or a
// synthetic spec sampled to pool_n records.
struct DataSource {
  std::string csv_path;
  std::string label_column = "label";
  std::string synth_spec_path;
  size_t pool_n = 0;
  std::optional<synth::SynthSpec> inline_spec;  // takes precedence when set
};

struct ExperimentPlan {
  attack::AttackConfig base;
  SweepAxis axis = SweepAxis::poison_rate;
  std::vector<double> axis_values;
  int trials = 5;
  int targets_per_world = 10;
  int query_sets_per_target = 10;
  size_t eval_size = 20000;  // held-out records for precision/recall/F1
  uint64_t seed = 0;
  DataSource source;

  std::string to_json() const;
  static ExperimentPlan from_json(const std::string& json_text);
  static ExperimentPlan load(const std::string& path);
  // Stable content hash of the canonical plan JSON; names the results dir.
  std::string plan_hash() const;
};

struct Observation {
  double axis_value = 0.0;
  int trial = 0;
  int world = 0;
  int target_index = 0;
  int query_set_index = 0;
  int guess = 0;
  bool correct = false;
};

struct AxisResult {
  double axis_value = 0.0;
  int64_t n_obs = 0;
  double accuracy = 0.0;
  double ci_lo = 0.0;  // Wilson 95% interval
  double ci_hi = 0.0;
  double precision = 0.0;  // poisoned target models, averaged
  double recall = 0.0;
  double f1 = 0.0;
  double clean_f1 = 0.0;   // unpoisoned baseline on the same worlds
  double wall_seconds = 0.0;
  // Pooled shadow logits from the first trial, for histogram plots.
  std::vector<double> world_logits[2];
};

struct ExperimentReport {
  std::string plan_hash;
  std::vector<AxisResult> per_axis;
  std::vector<Observation> observations;
  uint64_t seed = 0;

  std::string to_json(bool include_observations = true) const;
  static ExperimentReport from_json(const std::string& json_text);
};

// Runs the full protocol: for each axis value and trial, split the master
// pool into attacker/owner halves, learn the distinguishing test once, train
// targets_per_world owner models per world and evaluate
// query_sets_per_target query sets on each. Deterministic given the plan.
// Partial results are flushed to out_dir as observations arrive; a resume
// token records the last completed (axis, trial) pair.
ExperimentReport run_experiment(const ExperimentPlan& plan, const std::string& out_dir);

enum class PlotKind { accuracy_curve, logit_histogram, theory_overlay };

// accuracy_curve:  axis_value,accuracy,ci_lo,ci_hi,n_obs
// logit_histogram: world,bin_lo,bin_hi,count
// theory_overlay:  p,t,mu_tilde,sigma_tilde_sq  (matches the theory CLI)
void emit_plot_data(const ExperimentReport& report, PlotKind kind,
                    const std::string& out_path, int histogram_bins = 40,
                    const attack::AttackConfig* base = nullptr, double pi_v = 1.0,
                    double mu = 0.0, double sigma = 1.0);

// Re-derive per-axis accuracy from persisted observation rows (audit replay).
std::vector<std::pair<double, double>> recompute_accuracy(
    const std::vector<Observation>& observations);

std::string observations_csv(const std::vector<Observation>& observations);
std::vector<Observation> parse_observations_csv(const std::string& text);

}  // namespace propinf::harness
