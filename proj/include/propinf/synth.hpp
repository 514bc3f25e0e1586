#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "propinf/data.hpp"

namespace propinf::synth {

// Fully specified discrete joint distribution over a schema: a list of cells
// (full feature assignments) with cell probability and P[Y=1 | cell].
// Cells need not cover the whole product space; uncovered assignments are
// off-support. This is the ground truth behind the exact oracles.
struct SynthSpec {
  std::shared_ptr<const data::Schema> schema;
  struct Cell {
    std::vector<int> assignment;  // one value index per schema feature
    double prob = 0.0;
    double p_y1 = 0.0;
  };
  std::vector<Cell> cells;
  data::PropertyPredicate property;

  void validate() const;  // probs sum to 1 +- 1e-12, conditionals in [0,1], unique cells

  static SynthSpec from_json(const std::string& json_text);
  static SynthSpec load(const std::string& path);
  std::string to_json() const;
  void save(const std::string& path) const;
};

// n i.i.d. records: a cell by cell probability, then a Bernoulli label.
data::TabularDataset synth_sample(const SynthSpec& spec, size_t n, uint64_t seed);

// Closed-form t = Pr[f(X)=1] and pi_v = Pr[Y=v | f(X)=1].
std::pair<double, double> exact_marginals(const SynthSpec& spec, int v);

// The poisoned distribution at rate p with victim label v flipped to
// v_target. Cell masses follow the mixture p*D_p + (1-p)*D where D_p is the
// property-and-label-v mass renormalized; in-property conditionals follow
// the poisoned-posterior form
//   P'[Y=v | x] = t*pi_v*(1-p) / (p + t*pi_v*(1-p)) * P[Y=v | x],
// which is exactly what the exact-Bayes oracle must learn for the
// poisoned-logit identity to hold pointwise.
SynthSpec mix_poison_spec(const SynthSpec& spec, int v, int v_target, double p);

}  // namespace propinf::synth
