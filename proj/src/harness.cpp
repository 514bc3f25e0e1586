#include "propinf/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "propinf/common.hpp"
#include "propinf/theory.hpp"

namespace propinf::harness {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kZ95 = 1.959963984540054;

// Wilson score interval.
std::pair<double, double> wilson_ci(int64_t successes, int64_t n) {
  if (n == 0) return {0.0, 0.0};
  double p = static_cast<double>(successes) / n;
  double z2 = kZ95 * kZ95;
  double denom = 1.0 + z2 / n;
  double center = (p + z2 / (2.0 * n)) / denom;
  double half = kZ95 * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

const char* axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::poison_rate: return "poison_rate";
    case SweepAxis::poison_count: return "poison_count";
    case SweepAxis::shadow_models: return "shadow_models";
    case SweepAxis::query_size: return "query_size";
    case SweepAxis::t_separation: return "t_separation";
  }
  return "poison_rate";
}

SweepAxis axis_from_name(const std::string& s) {
  if (s == "poison_count") return SweepAxis::poison_count;
  if (s == "shadow_models") return SweepAxis::shadow_models;
  if (s == "query_size") return SweepAxis::query_size;
  if (s == "t_separation") return SweepAxis::t_separation;
  return SweepAxis::poison_rate;
}

attack::AttackConfig apply_axis(const attack::AttackConfig& base, SweepAxis axis,
                                double value) {
  attack::AttackConfig cfg = base;
  switch (axis) {
    case SweepAxis::poison_rate:
      cfg.poison.rate = value;
      cfg.poison.count.reset();
      break;
    case SweepAxis::poison_count:
      cfg.poison.count = static_cast<size_t>(std::llround(value));
      cfg.poison.rate.reset();
      break;
    case SweepAxis::shadow_models:
      cfg.k = static_cast<int>(std::llround(value));
      break;
    case SweepAxis::query_size:
      cfg.query_size = static_cast<size_t>(std::llround(value));
      break;
    case SweepAxis::t_separation:
      // Interpreted as t1 with t0 fixed from the base config.
      cfg.t1 = value;
      break;
  }
  return cfg;
}

data::TabularDataset load_master(const DataSource& src, uint64_t seed) {
  if (src.inline_spec) return synth::synth_sample(*src.inline_spec, src.pool_n, seed);
  if (!src.synth_spec_path.empty()) {
    synth::SynthSpec spec = synth::SynthSpec::load(src.synth_spec_path);
    if (src.pool_n == 0) throw std::invalid_argument("pool_n required with a synth source");
    return synth::synth_sample(spec, src.pool_n, seed);
  }
  if (!src.csv_path.empty()) return data::load_csv(src.csv_path, src.label_column);
  throw std::invalid_argument("experiment plan has no data source");
}

}  // namespace

ExperimentReport run_experiment(const ExperimentPlan& plan, const std::string& out_dir) {
  if (plan.axis_values.empty()) throw std::invalid_argument("no axis values");
  fs::path run_dir = fs::path(out_dir) / "runs" / plan.plan_hash();
  fs::create_directories(run_dir);
  {
    std::ofstream plan_out(run_dir / "plan.json");
    plan_out << plan.to_json() << '\n';
  }
  std::ofstream obs_out(run_dir / "observations.csv");
  obs_out << "axis_value,trial,world,target_index,query_set_index,guess,correct\n";

  ExperimentReport report;
  report.plan_hash = plan.plan_hash();
  report.seed = plan.seed;

  auto flush_resume = [&](size_t axis_done, int trials_done) {
    std::ofstream tok(run_dir / "resume.json");
    tok << json{{"axis_values_completed", axis_done}, {"trials_completed", trials_done}}
        << '\n';
  };

  for (size_t ai = 0; ai < plan.axis_values.size(); ++ai) {
    double axis_value = plan.axis_values[ai];
    attack::AttackConfig cfg = apply_axis(plan.base, plan.axis, axis_value);
    AxisResult axis_result;
    axis_result.axis_value = axis_value;
    auto started = std::chrono::steady_clock::now();

    int64_t correct_count = 0, obs_count = 0;
    double prec_sum = 0.0, rec_sum = 0.0, f1_sum = 0.0, clean_f1_sum = 0.0;
    int64_t model_count = 0;

    for (int trial = 0; trial < plan.trials; ++trial) {
      uint64_t trial_seed = derive_seed(plan.seed, {21, static_cast<uint64_t>(ai),
                                                    static_cast<uint64_t>(trial)});
      data::TabularDataset master = load_master(plan.source, derive_seed(trial_seed, {1}));
      auto [attacker_pool, owner_pool] = data::split(master, 0.5, derive_seed(trial_seed, {2}));
      data::TabularDataset eval_set;
      if (plan.eval_size > 0 &&
          (plan.source.inline_spec || !plan.source.synth_spec_path.empty())) {
        synth::SynthSpec spec = plan.source.inline_spec
                                    ? *plan.source.inline_spec
                                    : synth::SynthSpec::load(plan.source.synth_spec_path);
        eval_set = synth::synth_sample(spec, plan.eval_size, derive_seed(trial_seed, {3}));
      }

      attack::AttackConfig trial_cfg = cfg;
      trial_cfg.root_seed = derive_seed(trial_seed, {4});
      attack::ConfidenceLearning learned =
          attack::learn_confidence_model(trial_cfg, attacker_pool);
      if (trial == 0) {
        axis_result.world_logits[0] = learned.world_logits[0];
        axis_result.world_logits[1] = learned.world_logits[1];
      }

      size_t clean_n = trial_cfg.n - learned.poison_set.records.size();
      double world_t[2] = {trial_cfg.t0, trial_cfg.t1};

      // Query sets draw from the same eligible records as D_s (the D_q
      // subset-of-D_s reading); disjoint mode excludes D_s entirely.
      std::vector<size_t> query_exclude = learned.poison_set.source_indices;
      if (trial_cfg.disjoint_query)
        query_exclude.insert(query_exclude.end(), learned.query_pool_indices.begin(),
                             learned.query_pool_indices.end());

      struct TargetJob {
        int world;
        int index;
      };
      std::vector<TargetJob> jobs;
      for (int w = 0; w < 2; ++w)
        for (int ti = 0; ti < plan.targets_per_world; ++ti) jobs.push_back({w, ti});

      std::vector<std::vector<Observation>> job_obs(jobs.size());
      std::vector<double> job_prec(jobs.size(), 0.0), job_rec(jobs.size(), 0.0),
          job_f1(jobs.size(), 0.0), job_clean_f1(jobs.size(), 0.0);

      parallel_for(jobs.size(), [&](size_t ji) {
        const TargetJob& job = jobs[ji];
        uint64_t target_seed =
            derive_seed(trial_seed, {5, static_cast<uint64_t>(job.world),
                                     static_cast<uint64_t>(job.index)});
        data::TabularDataset world_data = data::construct_world(
            owner_pool, trial_cfg.property, world_t[job.world], clean_n, target_seed);
        data::TabularDataset training =
            data::concat(world_data, learned.poison_set.records);
        models::TrainConfig tc = trial_cfg.train;
        tc.seed = derive_seed(target_seed, {6});
        models::TrainedModel target = models::train(trial_cfg.model, training, tc);

        if (!eval_set.records.empty()) {
          models::Metrics pm = models::evaluate(target, eval_set);
          job_prec[ji] = pm.precision;
          job_rec[ji] = pm.recall;
          job_f1[ji] = pm.f1;
          // Clean baseline: a fresh same-world draw of the full size n,
          // trained without any poison.
          data::TabularDataset clean_training = data::construct_world(
              owner_pool, trial_cfg.property, world_t[job.world], trial_cfg.n,
              derive_seed(target_seed, {7}));
          models::TrainConfig ctc = trial_cfg.train;
          ctc.seed = derive_seed(target_seed, {8});
          models::TrainedModel clean_model =
              models::train(trial_cfg.model, clean_training, ctc);
          job_clean_f1[ji] = models::evaluate(clean_model, eval_set).f1;
        }

        for (int qi = 0; qi < plan.query_sets_per_target; ++qi) {
          data::TabularDataset d_q = data::sample_query_set(
              attacker_pool, trial_cfg.property, learned.test.victim_label,
              trial_cfg.query_size,
              derive_seed(trial_seed, {9, static_cast<uint64_t>(qi)}), query_exclude);
          attack::AttackOutcome outcome = attack::distinguish(learned.test, target, d_q);
          Observation obs;
          obs.axis_value = axis_value;
          obs.trial = trial;
          obs.world = job.world;
          obs.target_index = job.index;
          obs.query_set_index = qi;
          obs.guess = outcome.guess;
          obs.correct = outcome.guess == job.world;
          job_obs[ji].push_back(obs);
        }
      });

      for (size_t ji = 0; ji < jobs.size(); ++ji) {
        prec_sum += job_prec[ji];
        rec_sum += job_rec[ji];
        f1_sum += job_f1[ji];
        clean_f1_sum += job_clean_f1[ji];
        ++model_count;
        for (const Observation& obs : job_obs[ji]) {
          report.observations.push_back(obs);
          obs_out << obs.axis_value << ',' << obs.trial << ',' << obs.world << ','
                  << obs.target_index << ',' << obs.query_set_index << ',' << obs.guess
                  << ',' << (obs.correct ? 1 : 0) << '\n';
          ++obs_count;
          if (obs.correct) ++correct_count;
        }
      }
      obs_out.flush();
      flush_resume(ai, trial + 1);
    }

    axis_result.n_obs = obs_count;
    axis_result.accuracy =
        obs_count ? static_cast<double>(correct_count) / obs_count : 0.0;
    std::tie(axis_result.ci_lo, axis_result.ci_hi) = wilson_ci(correct_count, obs_count);
    if (model_count) {
      axis_result.precision = prec_sum / model_count;
      axis_result.recall = rec_sum / model_count;
      axis_result.f1 = f1_sum / model_count;
      axis_result.clean_f1 = clean_f1_sum / model_count;
    }
    axis_result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    report.per_axis.push_back(std::move(axis_result));
    flush_resume(ai + 1, 0);
  }

  std::ofstream report_out(run_dir / "report.json");
  report_out << report.to_json(false) << '\n';
  return report;
}

std::vector<std::pair<double, double>> recompute_accuracy(
    const std::vector<Observation>& observations) {
  std::vector<std::pair<double, double>> out;  // (axis_value, accuracy)
  std::vector<double> seen;
  for (const Observation& o : observations)
    if (std::find(seen.begin(), seen.end(), o.axis_value) == seen.end())
      seen.push_back(o.axis_value);
  for (double v : seen) {
    int64_t n = 0, c = 0;
    for (const Observation& o : observations)
      if (o.axis_value == v) {
        ++n;
        if (o.correct) ++c;
      }
    out.emplace_back(v, n ? static_cast<double>(c) / n : 0.0);
  }
  return out;
}

std::string observations_csv(const std::vector<Observation>& observations) {
  std::ostringstream out;
  out << "axis_value,trial,world,target_index,query_set_index,guess,correct\n";
  for (const Observation& o : observations)
    out << o.axis_value << ',' << o.trial << ',' << o.world << ',' << o.target_index << ','
        << o.query_set_index << ',' << o.guess << ',' << (o.correct ? 1 : 0) << '\n';
  return out.str();
}

std::vector<Observation> parse_observations_csv(const std::string& text) {
  std::vector<Observation> out;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Observation o;
    std::istringstream row(line);
    std::string field;
    std::getline(row, field, ',');
    o.axis_value = std::stod(field);
    std::getline(row, field, ',');
    o.trial = std::stoi(field);
    std::getline(row, field, ',');
    o.world = std::stoi(field);
    std::getline(row, field, ',');
    o.target_index = std::stoi(field);
    std::getline(row, field, ',');
    o.query_set_index = std::stoi(field);
    std::getline(row, field, ',');
    o.guess = std::stoi(field);
    std::getline(row, field, ',');
    o.correct = field == "1";
    out.push_back(o);
  }
  return out;
}

void emit_plot_data(const ExperimentReport& report, PlotKind kind,
                    const std::string& out_path, int histogram_bins,
                    const attack::AttackConfig* base, double pi_v, double mu,
                    double sigma) {
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write file: " + out_path);
  out.precision(12);
  switch (kind) {
    case PlotKind::accuracy_curve: {
      out << "axis_value,accuracy,ci_lo,ci_hi,n_obs\n";
      for (const AxisResult& r : report.per_axis)
        out << r.axis_value << ',' << r.accuracy << ',' << r.ci_lo << ',' << r.ci_hi << ','
            << r.n_obs << '\n';
      break;
    }
    case PlotKind::logit_histogram: {
      out << "world,bin_lo,bin_hi,count\n";
      if (report.per_axis.empty()) break;
      const AxisResult& r = report.per_axis.front();
      for (int w = 0; w < 2; ++w) {
        const auto& logits = r.world_logits[w];
        if (logits.empty()) continue;
        double lo = *std::min_element(logits.begin(), logits.end());
        double hi = *std::max_element(logits.begin(), logits.end());
        if (hi <= lo) hi = lo + 1e-9;
        double width = (hi - lo) / histogram_bins;
        std::vector<int64_t> counts(histogram_bins, 0);
        for (double z : logits) {
          int b = static_cast<int>((z - lo) / width);
          if (b >= histogram_bins) b = histogram_bins - 1;
          ++counts[b];
        }
        for (int b = 0; b < histogram_bins; ++b)
          out << w << ',' << lo + b * width << ',' << lo + (b + 1) * width << ','
              << counts[b] << '\n';
      }
      break;
    }
    case PlotKind::theory_overlay: {
      if (!base) throw std::invalid_argument("theory_overlay needs the base config");
      std::vector<double> ps;
      for (const AxisResult& r : report.per_axis) ps.push_back(r.axis_value);
      out << theory::theory_curves_csv(base->t0, base->t1, pi_v, mu, sigma, ps);
      break;
    }
  }
}

std::string ExperimentPlan::to_json() const {
  json j;
  j["base"] = json::parse(base.to_json());
  j["axis"] = axis_name(axis);
  j["axis_values"] = axis_values;
  j["trials"] = trials;
  j["targets_per_world"] = targets_per_world;
  j["query_sets_per_target"] = query_sets_per_target;
  j["eval_size"] = eval_size;
  j["seed"] = seed;
  json src;
  if (!source.csv_path.empty()) {
    src["csv"] = source.csv_path;
    src["label_col"] = source.label_column;
  }
  if (!source.synth_spec_path.empty()) src["synth"] = source.synth_spec_path;
  if (source.inline_spec) src["inline_spec"] = json::parse(source.inline_spec->to_json());
  if (source.pool_n) src["pool_n"] = source.pool_n;
  j["source"] = src;
  return j.dump(2);
}

ExperimentPlan ExperimentPlan::from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  ExperimentPlan plan;
  plan.base = attack::AttackConfig::from_json(j.at("base").dump());
  plan.axis = axis_from_name(j.value("axis", "poison_rate"));
  plan.axis_values = j.at("axis_values").get<std::vector<double>>();
  plan.trials = j.value("trials", 5);
  plan.targets_per_world = j.value("targets_per_world", 10);
  plan.query_sets_per_target = j.value("query_sets_per_target", 10);
  plan.eval_size = j.value("eval_size", static_cast<size_t>(20000));
  plan.seed = j.value("seed", static_cast<uint64_t>(0));
  if (j.contains("source")) {
    const json& src = j.at("source");
    plan.source.csv_path = src.value("csv", "");
    plan.source.label_column = src.value("label_col", "label");
    plan.source.synth_spec_path = src.value("synth", "");
    plan.source.pool_n = src.value("pool_n", static_cast<size_t>(0));
    if (src.contains("inline_spec"))
      plan.source.inline_spec = synth::SynthSpec::from_json(src.at("inline_spec").dump());
  }
  return plan;
}

ExperimentPlan ExperimentPlan::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

std::string ExperimentPlan::plan_hash() const { return hex64(fnv1a64(to_json())); }

std::string ExperimentReport::to_json(bool include_observations) const {
  json j;
  j["plan_hash"] = plan_hash;
  j["seed"] = seed;
  j["per_axis"] = json::array();
  for (const AxisResult& r : per_axis) {
    json a;
    a["axis_value"] = r.axis_value;
    a["n_obs"] = r.n_obs;
    a["accuracy"] = r.accuracy;
    a["ci_lo"] = r.ci_lo;
    a["ci_hi"] = r.ci_hi;
    a["precision"] = r.precision;
    a["recall"] = r.recall;
    a["f1"] = r.f1;
    a["clean_f1"] = r.clean_f1;
    a["wall_seconds"] = r.wall_seconds;
    a["world0_logits"] = r.world_logits[0];
    a["world1_logits"] = r.world_logits[1];
    j["per_axis"].push_back(a);
  }
  if (include_observations) {
    j["observations"] = json::array();
    for (const Observation& o : observations)
      j["observations"].push_back({{"axis_value", o.axis_value},
                                   {"trial", o.trial},
                                   {"world", o.world},
                                   {"target_index", o.target_index},
                                   {"query_set_index", o.query_set_index},
                                   {"guess", o.guess},
                                   {"correct", o.correct}});
  }
  return j.dump(2);
}

ExperimentReport ExperimentReport::from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  ExperimentReport report;
  report.plan_hash = j.value("plan_hash", "");
  report.seed = j.value("seed", static_cast<uint64_t>(0));
  for (const auto& a : j.at("per_axis")) {
    AxisResult r;
    r.axis_value = a.at("axis_value").get<double>();
    r.n_obs = a.at("n_obs").get<int64_t>();
    r.accuracy = a.at("accuracy").get<double>();
    r.ci_lo = a.at("ci_lo").get<double>();
    r.ci_hi = a.at("ci_hi").get<double>();
    r.precision = a.value("precision", 0.0);
    r.recall = a.value("recall", 0.0);
    r.f1 = a.value("f1", 0.0);
    r.clean_f1 = a.value("clean_f1", 0.0);
    r.wall_seconds = a.value("wall_seconds", 0.0);
    if (a.contains("world0_logits"))
      r.world_logits[0] = a.at("world0_logits").get<std::vector<double>>();
    if (a.contains("world1_logits"))
      r.world_logits[1] = a.at("world1_logits").get<std::vector<double>>();
    report.per_axis.push_back(std::move(r));
  }
  if (j.contains("observations"))
    for (const auto& o : j.at("observations")) {
      Observation obs;
      obs.axis_value = o.at("axis_value").get<double>();
      obs.trial = o.at("trial").get<int>();
      obs.world = o.at("world").get<int>();
      obs.target_index = o.at("target_index").get<int>();
      obs.query_set_index = o.at("query_set_index").get<int>();
      obs.guess = o.at("guess").get<int>();
      obs.correct = o.at("correct").get<bool>();
      report.observations.push_back(obs);
    }
  return report;
}

}  // namespace propinf::harness
