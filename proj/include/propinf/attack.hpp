#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "propinf/data.hpp"
#include "propinf/models.hpp"
#include "propinf/poison.hpp"
#include "propinf/theory.hpp"

namespace propinf::attack {

struct AttackConfig {
  data::PropertyPredicate property;
  double t0 = 0.0;
  double t1 = 0.0;
  size_t n = 0;          // owner training size (clean part + poison = n)
  int k = 4;             // shadow models per world
  poison::PoisonConfig poison;
  size_t query_size = 1000;
  models::ModelSpec model;
  models::TrainConfig train;
  uint64_t root_seed = 0;
  bool disjoint_query = false;  // when true, query sets avoid D_s records

  void validate() const;
  std::string to_json() const;
  static AttackConfig from_json(const std::string& json_text);
};

// Fitted world Gaussians plus decision threshold. World indices are 0 for
// the t0 hypothesis and 1 for the t1 hypothesis throughout. threshold.alpha
// and threshold.beta are stored as the per-query error rates under world 0
// and world 1 respectively, whichever world carries the larger mean.
struct DistinguishingTest {
  theory::GaussianPair pair;   // mu0/sigma0 = world 0 fit, mu1/sigma1 = world 1 fit
  theory::ThresholdResult threshold;
  int larger_mean_world = 0;   // which world sits on the "> T" side
  int victim_label = 0;
  int target_label = 1;
};

struct AttackOutcome {
  int guess = 0;  // 0 => t0 world, 1 => t1 world
  int64_t votes_above_T = 0;
  int64_t total_queries = 0;
  double logit_mean = 0.0;
  double logit_std = 0.0;
  std::string to_json() const;
};

struct ConfidenceLearning {
  DistinguishingTest test;
  data::TabularDataset query_pool;        // D_s: property-and-victim-label records
  std::vector<size_t> query_pool_indices; // their positions in the attacker pool
  std::vector<double> world_logits[2];    // pooled shadow logits per world
  poison::PoisonSet poison_set;
};

// Algorithm steps: build the poison set, train k shadow models per world on
// a fresh world draw plus the poison set, query them on D_s w.r.t. the
// target label, fit one Gaussian per world, compute the threshold.
ConfidenceLearning learn_confidence_model(const AttackConfig& cfg,
                                          const data::TabularDataset& attacker_pool);

// Majority vote of target logits against T. Strict majority above T picks
// the larger-mean world; an exact tie picks the larger-t world.
AttackOutcome distinguish(const DistinguishingTest& test, const models::TrainedModel& target,
                          const data::TabularDataset& query_set);

// t0 = 0 special case; the world-0 draws contain no property records and the
// poison amount must be an absolute count.
ConfidenceLearning property_existence_learn(const AttackConfig& cfg,
                                            const data::TabularDataset& attacker_pool);

// Label-only variant: count queries predicted as the target label; strict
// majority picks world 0 (the smaller t). Identical to distinguish with the
// threshold forced to zero.
AttackOutcome label_only_distinguish(int target_label, const models::TrainedModel& target,
                                     const data::TabularDataset& query_set);

struct EstimationConfig {
  data::PropertyPredicate property;
  double poison_rate = 0.0;
  int k_per_guess = 2;
  size_t n = 0;
  size_t query_size = 1000;
  double precision = 0.001;
  int max_iter = 6;
  double overlap_threshold = 0.95;
  models::ModelSpec model;
  models::TrainConfig train;
  uint64_t seed = 0;
  int victim_label = -1;  // -1: resolve from the pool
  int target_label = -1;
};

struct EstimationStep {
  double t_hat = 0.0;
  double overlap = 0.0;
  int64_t left_count = 0;   // shadow logits below the target interval
  int64_t right_count = 0;  // shadow logits above it
  double search_lo = 0.0;
  double search_hi = 0.0;
};

enum class EstimationStop { overlap, iteration_cap };

struct EstimationTrace {
  std::vector<EstimationStep> iterations;
  double estimate = 0.0;
  EstimationStop reason = EstimationStop::iteration_cap;
  int shadow_models_trained = 0;
  std::string to_json() const;
};

// Binary search for the target's property fraction on the grid
// {0, precision, ..., 1}. Shadow logits below the target's [min, max]
// interval mean the probe fraction is too large (poisoning shifted the
// target more), so the search moves toward lower fractions, and vice versa.
EstimationTrace estimate_property_size(const EstimationConfig& cfg,
                                       const data::TabularDataset& attacker_pool,
                                       const models::TrainedModel& target);

}  // namespace propinf::attack
