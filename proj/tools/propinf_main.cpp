#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "propinf/attack.hpp"
#include "propinf/common.hpp"
#include "propinf/data.hpp"
#include "propinf/harness.hpp"
#include "propinf/models.hpp"
#include "propinf/poison.hpp"
#include "propinf/synth.hpp"
#include "propinf/theory.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace propinf;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << text;
}

// Attack-run config: the attack parameters plus the data source plus which
// world (or true fraction, for estimation) the demo target is trained on.
struct AttackRun {
  attack::AttackConfig cfg;
  harness::DataSource source;
  int true_world = 1;
  double true_t = 0.0;
};

AttackRun parse_attack_run(const std::string& path) {
  json j = json::parse(read_file(path));
  AttackRun run;
  run.cfg = attack::AttackConfig::from_json(j.dump());
  if (j.contains("source")) {
    const json& src = j.at("source");
    run.source.csv_path = src.value("csv", "");
    run.source.label_column = src.value("label_col", "label");
    run.source.synth_spec_path = src.value("synth", "");
    run.source.pool_n = src.value("pool_n", static_cast<size_t>(0));
    if (src.contains("inline_spec"))
      run.source.inline_spec = synth::SynthSpec::from_json(src.at("inline_spec").dump());
  }
  run.true_world = j.value("true_world", 1);
  run.true_t = j.value("true_t", 0.0);
  return run;
}

data::TabularDataset load_source(const harness::DataSource& src, uint64_t seed) {
  if (src.inline_spec) return synth::synth_sample(*src.inline_spec, src.pool_n, seed);
  if (!src.synth_spec_path.empty())
    return synth::synth_sample(synth::SynthSpec::load(src.synth_spec_path), src.pool_n, seed);
  return data::load_csv(src.csv_path, src.label_column);
}

void dump_logits_csv(const attack::ConfidenceLearning& learned, const std::string& path) {
  std::ofstream out(path);
  out << "world,logit\n";
  out.precision(12);
  for (int w = 0; w < 2; ++w)
    for (double z : learned.world_logits[w]) out << w << ',' << z << '\n';
}

// Trains the stand-in owner model and runs the selected distinguishing
// variant end to end.
int run_attack_command(const std::string& mode, const std::string& config_path,
                       uint64_t seed, const std::string& out_dir) {
  AttackRun run = parse_attack_run(config_path);
  if (seed) run.cfg.root_seed = seed;
  fs::create_directories(out_dir);

  data::TabularDataset master = load_source(run.source, derive_seed(run.cfg.root_seed, {100}));
  auto [attacker_pool, owner_pool] =
      data::split(master, 0.5, derive_seed(run.cfg.root_seed, {101}));

  if (mode == "estimate") {
    attack::EstimationConfig ecfg;
    ecfg.property = run.cfg.property;
    ecfg.poison_rate = run.cfg.poison.rate.value_or(0.0);
    ecfg.n = run.cfg.n;
    ecfg.query_size = run.cfg.query_size;
    ecfg.model = run.cfg.model;
    ecfg.train = run.cfg.train;
    ecfg.seed = run.cfg.root_seed;

    poison::PoisonConfig pcfg;
    pcfg.target_property = ecfg.property;
    pcfg.rate = ecfg.poison_rate;
    poison::PoisonSet dp = poison::build_poison_set(attacker_pool, pcfg, ecfg.n,
                                                    derive_seed(ecfg.seed, {102}));
    data::TabularDataset world = data::construct_world(
        owner_pool, ecfg.property, run.true_t, ecfg.n - dp.records.size(),
        derive_seed(ecfg.seed, {103}));
    models::TrainConfig tc = ecfg.train;
    tc.seed = derive_seed(ecfg.seed, {104});
    models::TrainedModel target =
        models::train(ecfg.model, data::concat(world, dp.records), tc);

    attack::EstimationTrace trace =
        attack::estimate_property_size(ecfg, attacker_pool, target);
    json result = json::parse(trace.to_json());
    result["config"] = json::parse(read_file(config_path));
    result["seed"] = ecfg.seed;
    write_file((fs::path(out_dir) / "estimation.json").string(), result.dump(2) + "\n");
    std::cout << result.dump(2) << std::endl;
    return 0;
  }

  attack::ConfidenceLearning learned =
      mode == "exist" ? attack::property_existence_learn(run.cfg, attacker_pool)
                      : attack::learn_confidence_model(run.cfg, attacker_pool);
  dump_logits_csv(learned, (fs::path(out_dir) / "shadow_logits.csv").string());

  double world_t = run.true_world == 0 ? run.cfg.t0 : run.cfg.t1;
  data::TabularDataset world = data::construct_world(
      owner_pool, run.cfg.property, world_t,
      run.cfg.n - learned.poison_set.records.size(), derive_seed(run.cfg.root_seed, {105}));
  models::TrainConfig tc = run.cfg.train;
  tc.seed = derive_seed(run.cfg.root_seed, {106});
  models::TrainedModel target =
      models::train(run.cfg.model, data::concat(world, learned.poison_set.records), tc);

  data::TabularDataset d_q = data::sample_query_set(
      attacker_pool, run.cfg.property, learned.test.victim_label, run.cfg.query_size,
      derive_seed(run.cfg.root_seed, {107}), learned.poison_set.source_indices);

  attack::AttackOutcome outcome =
      mode == "label-only"
          ? attack::label_only_distinguish(learned.test.target_label, target, d_q)
          : attack::distinguish(learned.test, target, d_q);

  json result = json::parse(outcome.to_json());
  result["true_world"] = run.true_world;
  result["threshold"] = learned.test.threshold.T;
  result["alpha"] = learned.test.threshold.alpha;
  result["beta"] = learned.test.threshold.beta;
  result["victim_label"] = learned.test.victim_label;
  result["target_label"] = learned.test.target_label;
  result["world_gaussians"] = {{"mu0", learned.test.pair.mu0},
                               {"sigma0", learned.test.pair.sigma0},
                               {"mu1", learned.test.pair.mu1},
                               {"sigma1", learned.test.pair.sigma1}};
  result["root_seed"] = run.cfg.root_seed;
  result["config"] = json::parse(read_file(config_path));
  write_file((fs::path(out_dir) / "outcome.json").string(), result.dump(2) + "\n");
  std::cout << result.dump(2) << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Property inference attack laboratory"};
  app.require_subcommand(1);

  std::string config_path, out_path = ".", dataset_path, label_col = "label";
  uint64_t seed = 0;
  size_t n = 0;

  auto add_common = [&](CLI::App* cmd, bool needs_config = true) {
    if (needs_config) cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--seed", seed, "RNG seed");
    cmd->add_option("--out", out_path, "output directory or file");
    cmd->add_option("--dataset", dataset_path, "input dataset CSV");
    cmd->add_option("--label-col", label_col, "label column name");
  };

  // synth: draw records from a SynthSpec into a CSV.
  auto* synth_cmd = app.add_subcommand("synth", "sample records from a synthetic spec");
  add_common(synth_cmd);
  synth_cmd->add_option("--n", n, "number of records")->required();

  auto* poison_cmd = app.add_subcommand("poison", "build a label-flip poison set");
  add_common(poison_cmd);
  poison_cmd->add_option("--n", n, "owner training size (for rate mode)");

  auto* train_cmd = app.add_subcommand("train", "train a classifier on a CSV");
  add_common(train_cmd);

  auto* attack_cmd = app.add_subcommand("attack", "run an attack pipeline");
  attack_cmd->require_subcommand(1);
  auto* distinguish_cmd = attack_cmd->add_subcommand("distinguish", "two-world test");
  auto* exist_cmd = attack_cmd->add_subcommand("exist", "property existence (t0 = 0)");
  auto* labelonly_cmd = attack_cmd->add_subcommand("label-only", "label-only variant");
  auto* estimate_cmd = attack_cmd->add_subcommand("estimate", "property size estimation");
  for (auto* cmd : {distinguish_cmd, exist_cmd, labelonly_cmd, estimate_cmd})
    add_common(cmd);

  auto* theory_cmd = app.add_subcommand("theory", "closed-form analysis");
  theory_cmd->require_subcommand(1);
  double t0 = 0.0, t1 = 0.0, pi_v = 1.0, mu = 0.0, sigma = 1.0;
  double alpha = 0.0, beta = 0.0, epsilon = 0.001;
  double mu0 = 0.0, sigma0 = 1.0, mu1 = 0.0, sigma1 = 1.0;
  double p_lo = 0.0, p_hi = 0.25, p_step = 0.001;
  auto* curves_cmd = theory_cmd->add_subcommand("curves", "p vs poisoned moments CSV");
  curves_cmd->add_option("--t0", t0)->required();
  curves_cmd->add_option("--t1", t1)->required();
  curves_cmd->add_option("--pi-v", pi_v);
  curves_cmd->add_option("--mu", mu)->required();
  curves_cmd->add_option("--sigma", sigma)->required();
  curves_cmd->add_option("--p-lo", p_lo);
  curves_cmd->add_option("--p-hi", p_hi);
  curves_cmd->add_option("--p-step", p_step);
  curves_cmd->add_option("--out", out_path, "output CSV path");
  auto* threshold_cmd = theory_cmd->add_subcommand("threshold", "optimal separation threshold");
  threshold_cmd->add_option("--mu0", mu0)->required();
  threshold_cmd->add_option("--sigma0", sigma0)->required();
  threshold_cmd->add_option("--mu1", mu1)->required();
  threshold_cmd->add_option("--sigma1", sigma1)->required();
  auto* queries_cmd = theory_cmd->add_subcommand("queries", "Chernoff query budget");
  queries_cmd->add_option("--alpha", alpha)->required();
  queries_cmd->add_option("--beta", beta)->required();
  queries_cmd->add_option("--epsilon", epsilon);
  auto* pstar_cmd = theory_cmd->add_subcommand("pstar", "label-only poison rate");
  pstar_cmd->add_option("--t0", t0)->required();
  pstar_cmd->add_option("--t1", t1)->required();
  pstar_cmd->add_option("--pi-v", pi_v);
  pstar_cmd->add_option("--mu", mu)->required();
  pstar_cmd->add_option("--sigma", sigma)->required();

  auto* experiment_cmd = app.add_subcommand("experiment", "orchestrated sweeps");
  experiment_cmd->require_subcommand(1);
  auto* run_cmd = experiment_cmd->add_subcommand("run", "execute a plan");
  add_common(run_cmd);
  auto* plot_cmd = experiment_cmd->add_subcommand("plot", "emit plot CSVs from a run");
  add_common(plot_cmd);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth_cmd) {
      synth::SynthSpec spec = synth::SynthSpec::load(config_path);
      data::TabularDataset ds = synth::synth_sample(spec, n, seed);
      data::write_csv(ds, out_path, label_col);
      std::cout << "wrote " << ds.size() << " records to " << out_path << std::endl;
    } else if (*poison_cmd) {
      data::TabularDataset pool = data::load_csv(dataset_path, label_col);
      poison::PoisonConfig pcfg = poison::PoisonConfig::from_json(read_file(config_path));
      poison::PoisonSet set = poison::build_poison_set(pool, pcfg, n ? n : pool.size(), seed);
      data::write_csv(set.records, out_path, label_col);
      std::cout << "wrote " << set.records.size() << " poison records (victim "
                << set.victim_label << " -> target " << set.target_label << ") to "
                << out_path << std::endl;
    } else if (*train_cmd) {
      data::TabularDataset ds = data::load_csv(dataset_path, label_col);
      json j = config_path.empty() ? json::object() : json::parse(read_file(config_path));
      models::ModelSpec spec;
      if (j.value("kind", "logistic") == "mlp") {
        spec.kind = models::ModelKind::mlp;
        spec.hidden_layers = j.value("hidden_layers", std::vector<int>{32, 16});
      }
      models::TrainConfig tc;
      tc.epochs = j.value("epochs", tc.epochs);
      tc.batch_size = j.value("batch_size", tc.batch_size);
      tc.learning_rate = j.value("learning_rate", tc.learning_rate);
      tc.l2 = j.value("l2", tc.l2);
      tc.seed = seed;
      models::TrainedModel model = models::train(spec, ds, tc);
      model.save(out_path);
      models::Metrics m = models::evaluate(model, ds);
      std::cout << "trained on " << ds.size() << " records; train accuracy " << m.accuracy
                << ", F1 " << m.f1 << "; saved to " << out_path << std::endl;
    } else if (*distinguish_cmd) {
      return run_attack_command("distinguish", config_path, seed, out_path);
    } else if (*exist_cmd) {
      return run_attack_command("exist", config_path, seed, out_path);
    } else if (*labelonly_cmd) {
      return run_attack_command("label-only", config_path, seed, out_path);
    } else if (*estimate_cmd) {
      return run_attack_command("estimate", config_path, seed, out_path);
    } else if (*curves_cmd) {
      std::vector<double> ps;
      for (double p = p_lo; p <= p_hi + 1e-12; p += p_step) ps.push_back(p);
      std::string csv = theory::theory_curves_csv(t0, t1, pi_v, mu, sigma, ps);
      if (out_path == ".") std::cout << csv;
      else {
        write_file(out_path, csv);
        std::cout << "wrote " << out_path << std::endl;
      }
    } else if (*threshold_cmd) {
      theory::ThresholdResult r = theory::optimal_threshold({mu0, sigma0, mu1, sigma1});
      json j{{"T", r.T},
             {"alpha", r.alpha},
             {"beta", r.beta},
             {"mode", r.mode == theory::ThresholdMode::equal_sigma ? "equal_sigma" : "general"}};
      std::cout << j.dump(2) << std::endl;
    } else if (*queries_cmd) {
      json j{{"queries", theory::required_queries(alpha, beta, epsilon)}};
      std::cout << j.dump(2) << std::endl;
    } else if (*pstar_cmd) {
      theory::LabelOnlyRate r = theory::label_only_rate(t0, t1, pi_v, mu, sigma);
      json j{{"p_lo", r.p_lo},
             {"p_hi", r.p_hi},
             {"p_star", r.p_star},
             {"lo_already_positive", r.lo_already_positive}};
      std::cout << j.dump(2) << std::endl;
    } else if (*run_cmd) {
      harness::ExperimentPlan plan = harness::ExperimentPlan::load(config_path);
      if (seed) plan.seed = seed;
      harness::ExperimentReport report = harness::run_experiment(plan, out_path);
      fs::path run_dir = fs::path(out_path) / "runs" / report.plan_hash;
      harness::emit_plot_data(report, harness::PlotKind::accuracy_curve,
                              (run_dir / "accuracy_curve.csv").string());
      harness::emit_plot_data(report, harness::PlotKind::logit_histogram,
                              (run_dir / "logit_histogram.csv").string());
      std::cout << report.to_json(false) << std::endl;
    } else if (*plot_cmd) {
      harness::ExperimentPlan plan = harness::ExperimentPlan::load(config_path);
      fs::path run_dir = fs::path(out_path) / "runs" / plan.plan_hash();
      harness::ExperimentReport report =
          harness::ExperimentReport::from_json(read_file((run_dir / "report.json").string()));
      harness::emit_plot_data(report, harness::PlotKind::accuracy_curve,
                              (run_dir / "accuracy_curve.csv").string());
      harness::emit_plot_data(report, harness::PlotKind::logit_histogram,
                              (run_dir / "logit_histogram.csv").string());
      std::cout << "wrote plot CSVs under " << run_dir.string() << std::endl;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
