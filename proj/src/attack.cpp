#include "propinf/attack.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "propinf/common.hpp"

namespace propinf::attack {

using nlohmann::json;

void AttackConfig::validate() const {
  if (!(t0 < t1)) throw std::invalid_argument("requires t0 < t1");
  if (t0 < 0.0 || t1 > 1.0) throw std::invalid_argument("fractions must be in [0,1]");
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (n == 0) throw std::invalid_argument("owner training size must be positive");
  if (query_size == 0) throw std::invalid_argument("query_size must be positive");
  model.validate();
  train.validate();
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (double x : xs) sum += x;
  double mean = sum / static_cast<double>(xs.size());
  double sq = 0.0;
  for (double x : xs) sq += (x - mean) * (x - mean);
  // Maximum-likelihood (population) sigma, pinned for reproducibility.
  return {mean, std::sqrt(sq / static_cast<double>(xs.size()))};
}

}  // namespace

ConfidenceLearning learn_confidence_model(const AttackConfig& cfg,
                                          const data::TabularDataset& attacker_pool) {
  cfg.validate();

  poison::PoisonConfig pcfg = cfg.poison;
  if (pcfg.target_property.clauses().empty()) pcfg.target_property = cfg.property;
  poison::PoisonSet dp =
      poison::build_poison_set(attacker_pool, pcfg, cfg.n, derive_seed(cfg.root_seed, {1}));
  if (dp.records.size() > cfg.n) throw std::invalid_argument("poison set exceeds n");
  size_t clean_n = cfg.n - dp.records.size();

  // D_s: property points with the victim label, excluding those whose
  // feature vectors were handed to the owner inside the poison set.
  std::vector<size_t> d_s_indices = data::sample_query_indices(
      attacker_pool, cfg.property, dp.victim_label, cfg.query_size,
      derive_seed(cfg.root_seed, {2}), dp.source_indices);
  data::TabularDataset d_s;
  d_s.schema = attacker_pool.schema;
  for (size_t idx : d_s_indices) d_s.records.push_back(attacker_pool.records[idx]);

  ConfidenceLearning out;
  out.poison_set = dp;
  out.query_pool = d_s;
  out.query_pool_indices = d_s_indices;
  out.test.victim_label = dp.victim_label;
  out.test.target_label = dp.target_label;

  double world_t[2] = {cfg.t0, cfg.t1};
  std::vector<std::vector<double>> per_model_logits(static_cast<size_t>(2 * cfg.k));
  parallel_for(static_cast<size_t>(2 * cfg.k), [&](size_t run) {
    int w = static_cast<int>(run) / cfg.k;
    int i = static_cast<int>(run) % cfg.k;
    uint64_t seed = derive_seed(cfg.root_seed, {3, static_cast<uint64_t>(w),
                                                static_cast<uint64_t>(i)});
    data::TabularDataset world =
        data::construct_world(attacker_pool, cfg.property, world_t[w], clean_n, seed);
    data::TabularDataset training = data::concat(world, dp.records);
    models::TrainConfig tc = cfg.train;
    tc.seed = derive_seed(seed, {4});
    models::TrainedModel shadow = models::train(cfg.model, training, tc);
    per_model_logits[run] = models::batch_logits(shadow, d_s, dp.target_label);
  });
  for (int w = 0; w < 2; ++w)
    for (int i = 0; i < cfg.k; ++i) {
      auto& src = per_model_logits[static_cast<size_t>(w) * cfg.k + i];
      out.world_logits[w].insert(out.world_logits[w].end(), src.begin(), src.end());
    }

  auto [m0, s0] = mean_std(out.world_logits[0]);
  auto [m1, s1] = mean_std(out.world_logits[1]);
  double floor0 = 1e-12 * std::max(1.0, std::fabs(m0));
  double floor1 = 1e-12 * std::max(1.0, std::fabs(m1));
  if (s0 <= floor0 || s1 <= floor1)
    throw std::runtime_error("degenerate logit distribution");
  out.test.pair = {m0, s0, m1, s1};

  // Claim-1 orientation wants the larger mean as X1; map back afterwards.
  if (m1 >= m0) {
    out.test.threshold = theory::optimal_threshold({m0, s0, m1, s1});
    out.test.larger_mean_world = 1;
  } else {
    out.test.threshold = theory::optimal_threshold({m1, s1, m0, s0});
    out.test.larger_mean_world = 0;
    std::swap(out.test.threshold.alpha, out.test.threshold.beta);
  }
  return out;
}

AttackOutcome distinguish(const DistinguishingTest& test, const models::TrainedModel& target,
                          const data::TabularDataset& query_set) {
  if (query_set.records.empty()) throw std::invalid_argument("empty query set");
  std::vector<double> logits =
      models::batch_logits(target, query_set, test.target_label);
  int64_t above = 0;
  for (double z : logits)
    if (z > test.threshold.T) ++above;
  AttackOutcome out;
  out.total_queries = static_cast<int64_t>(logits.size());
  out.votes_above_T = above;
  auto [mean, sd] = mean_std(logits);
  out.logit_mean = mean;
  out.logit_std = sd;
  if (2 * above > out.total_queries)
    out.guess = test.larger_mean_world;
  else if (2 * above < out.total_queries)
    out.guess = 1 - test.larger_mean_world;
  else
    out.guess = 1;  // exact tie: the larger-t world
  return out;
}

ConfidenceLearning property_existence_learn(const AttackConfig& cfg,
                                            const data::TabularDataset& attacker_pool) {
  if (cfg.t0 != 0.0) throw std::invalid_argument("property existence requires t0 = 0");
  if (!cfg.poison.count)
    throw std::invalid_argument("property existence takes an absolute poison count");
  return learn_confidence_model(cfg, attacker_pool);
}

AttackOutcome label_only_distinguish(int target_label, const models::TrainedModel& target,
                                     const data::TabularDataset& query_set) {
  if (query_set.records.empty()) throw std::invalid_argument("empty query set");
  // Predicted label equals the target label iff its confidence exceeds 1/2,
  // i.e. iff the target-label logit is positive.
  std::vector<double> logits = models::batch_logits(target, query_set, target_label);
  int64_t flipped = 0;
  for (double z : logits)
    if (z > 0.0) ++flipped;
  AttackOutcome out;
  out.total_queries = static_cast<int64_t>(logits.size());
  out.votes_above_T = flipped;
  auto [mean, sd] = mean_std(logits);
  out.logit_mean = mean;
  out.logit_std = sd;
  if (2 * flipped > out.total_queries)
    out.guess = 0;  // poisoning flipped the small world's predictions
  else
    out.guess = 1;
  return out;
}

EstimationTrace estimate_property_size(const EstimationConfig& cfg,
                                       const data::TabularDataset& attacker_pool,
                                       const models::TrainedModel& target) {
  if (cfg.max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
  if (cfg.precision <= 0.0 || cfg.precision > 0.5)
    throw std::invalid_argument("precision must be in (0, 0.5]");

  poison::PoisonConfig pcfg;
  pcfg.target_property = cfg.property;
  pcfg.rate = cfg.poison_rate;
  pcfg.victim_label = cfg.victim_label;
  pcfg.target_label = cfg.target_label;
  poison::PoisonSet dp =
      poison::build_poison_set(attacker_pool, pcfg, cfg.n, derive_seed(cfg.seed, {11}));
  size_t clean_n = cfg.n - dp.records.size();

  data::TabularDataset d_q = data::sample_query_set(
      attacker_pool, cfg.property, dp.victim_label, cfg.query_size,
      derive_seed(cfg.seed, {12}), dp.source_indices);

  std::vector<double> target_logits = models::batch_logits(target, d_q, dp.target_label);
  double t_min = *std::min_element(target_logits.begin(), target_logits.end());
  double t_max = *std::max_element(target_logits.begin(), target_logits.end());
  if (t_min == t_max) throw std::runtime_error("degenerate target logit interval");

  // Grid of candidate fractions {0, precision, ..., 1}, searched by halving.
  int64_t grid_n = static_cast<int64_t>(std::llround(1.0 / cfg.precision)) + 1;
  int64_t lo = 0, len = grid_n;

  EstimationTrace trace;
  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    int64_t middle = len / 2;
    double t_hat = static_cast<double>(lo + middle) * cfg.precision;

    std::vector<std::vector<double>> shadow_logits(static_cast<size_t>(cfg.k_per_guess));
    parallel_for(static_cast<size_t>(cfg.k_per_guess), [&](size_t i) {
      uint64_t seed = derive_seed(cfg.seed, {13, static_cast<uint64_t>(iter),
                                             static_cast<uint64_t>(i)});
      data::TabularDataset world =
          data::construct_world(attacker_pool, cfg.property, t_hat, clean_n, seed);
      data::TabularDataset training = data::concat(world, dp.records);
      models::TrainConfig tc = cfg.train;
      tc.seed = derive_seed(seed, {14});
      models::TrainedModel shadow = models::train(cfg.model, training, tc);
      shadow_logits[i] = models::batch_logits(shadow, d_q, dp.target_label);
    });
    trace.shadow_models_trained += cfg.k_per_guess;

    int64_t inside = 0, left = 0, right = 0, total = 0;
    for (const auto& logits : shadow_logits)
      for (double z : logits) {
        ++total;
        if (z < t_min) ++left;
        else if (z > t_max) ++right;
        else ++inside;
      }
    double overlap = static_cast<double>(inside) / static_cast<double>(total);

    EstimationStep step;
    step.t_hat = t_hat;
    step.overlap = overlap;
    step.left_count = left;
    step.right_count = right;
    step.search_lo = static_cast<double>(lo) * cfg.precision;
    step.search_hi = static_cast<double>(lo + len - 1) * cfg.precision;
    trace.iterations.push_back(step);

    if (overlap >= cfg.overlap_threshold) {
      trace.estimate = t_hat;
      trace.reason = EstimationStop::overlap;
      return trace;
    }
    // Shadow logits sitting below the target's interval mean the probe
    // fraction shifted less than the target did, i.e. t_hat is too large.
    if (left > right) {
      len = middle;  // keep the lower half
    } else {
      lo += middle;
      len -= middle;
    }
    if (len <= 0) len = 1;
  }
  trace.estimate = static_cast<double>(lo + len / 2) * cfg.precision;
  trace.reason = EstimationStop::iteration_cap;
  return trace;
}

namespace {

json predicate_json(const data::PropertyPredicate& p) {
  json arr = json::array();
  for (const auto& [f, v] : p.clauses()) arr.push_back({{"feature", f}, {"value", v}});
  return arr;
}

data::PropertyPredicate predicate_from_json(const json& arr) {
  std::vector<std::pair<std::string, std::string>> clauses;
  for (const auto& cl : arr)
    clauses.emplace_back(cl.at("feature").get<std::string>(),
                         cl.at("value").get<std::string>());
  return data::PropertyPredicate(std::move(clauses));
}

}  // namespace

std::string AttackConfig::to_json() const {
  json j;
  j["property"] = predicate_json(property);
  j["t0"] = t0;
  j["t1"] = t1;
  j["n"] = n;
  j["k"] = k;
  j["query_size"] = query_size;
  j["root_seed"] = root_seed;
  j["disjoint_query"] = disjoint_query;
  j["poison"] = json::parse(poison.to_json());
  j["model"]["kind"] = model.kind == models::ModelKind::logistic ? "logistic"
                       : model.kind == models::ModelKind::mlp   ? "mlp"
                                                                : "bayes_exact";
  j["model"]["hidden_layers"] = model.hidden_layers;
  j["train"]["epochs"] = train.epochs;
  j["train"]["batch_size"] = train.batch_size;
  j["train"]["learning_rate"] = train.learning_rate;
  j["train"]["optimizer"] =
      train.optimizer == models::TrainConfig::Optimizer::adam ? "adam" : "sgd";
  j["train"]["l2"] = train.l2;
  return j.dump(2);
}

AttackConfig AttackConfig::from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  AttackConfig cfg;
  cfg.property = predicate_from_json(j.at("property"));
  cfg.t0 = j.at("t0").get<double>();
  cfg.t1 = j.at("t1").get<double>();
  cfg.n = j.at("n").get<size_t>();
  if (j.contains("k")) cfg.k = j.at("k").get<int>();
  if (j.contains("query_size")) cfg.query_size = j.at("query_size").get<size_t>();
  if (j.contains("root_seed")) cfg.root_seed = j.at("root_seed").get<uint64_t>();
  if (j.contains("disjoint_query")) cfg.disjoint_query = j.at("disjoint_query").get<bool>();
  if (j.contains("poison")) cfg.poison = poison::PoisonConfig::from_json(j.at("poison").dump());
  if (j.contains("model")) {
    std::string kind = j.at("model").value("kind", "logistic");
    cfg.model.kind = kind == "mlp" ? models::ModelKind::mlp : models::ModelKind::logistic;
    if (j.at("model").contains("hidden_layers"))
      cfg.model.hidden_layers = j.at("model").at("hidden_layers").get<std::vector<int>>();
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    if (t.contains("epochs")) cfg.train.epochs = t.at("epochs").get<int>();
    if (t.contains("batch_size")) cfg.train.batch_size = t.at("batch_size").get<int>();
    if (t.contains("learning_rate"))
      cfg.train.learning_rate = t.at("learning_rate").get<double>();
    if (t.contains("l2")) cfg.train.l2 = t.at("l2").get<double>();
    if (t.contains("optimizer"))
      cfg.train.optimizer = t.at("optimizer").get<std::string>() == "sgd"
                                ? models::TrainConfig::Optimizer::sgd
                                : models::TrainConfig::Optimizer::adam;
  }
  return cfg;
}

std::string AttackOutcome::to_json() const {
  json j;
  j["guess"] = guess;
  j["votes_above_T"] = votes_above_T;
  j["total_queries"] = total_queries;
  j["logit_mean"] = logit_mean;
  j["logit_std"] = logit_std;
  return j.dump(2);
}

std::string EstimationTrace::to_json() const {
  json j;
  j["estimate"] = estimate;
  j["stop_reason"] = reason == EstimationStop::overlap ? "overlap" : "iteration_cap";
  j["shadow_models_trained"] = shadow_models_trained;
  j["iterations"] = json::array();
  for (const auto& s : iterations)
    j["iterations"].push_back({{"t_hat", s.t_hat},
                               {"overlap", s.overlap},
                               {"left_count", s.left_count},
                               {"right_count", s.right_count},
                               {"interval", {s.search_lo, s.search_hi}}});
  return j.dump(2);
}

}  // namespace propinf::attack
