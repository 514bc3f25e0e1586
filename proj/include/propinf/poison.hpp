#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "propinf/data.hpp"

namespace propinf::poison {

// Label-flip poison construction: sample records satisfying the poison
// property with the victim label, overwrite the label with the target label.
struct PoisonConfig {
  data::PropertyPredicate target_property;
  // Defaults to target_property; when set, must imply target_property
  // (clause superset) — the sub-property variant poisons within the target.
  std::optional<data::PropertyPredicate> poison_property;
  // -1 means resolve from the pool (victim = majority label in the target
  // subpopulation, target label its complement).
  int victim_label = -1;
  int target_label = -1;
  // Either a rate of the owner's training size n, or an absolute count.
  std::optional<double> rate;   // in [0, 1)
  std::optional<size_t> count;

  const data::PropertyPredicate& effective_poison_property() const {
    return poison_property ? *poison_property : target_property;
  }
  size_t resolve_count(size_t n) const;
  void validate() const;

  std::string to_json() const;
  static PoisonConfig from_json(const std::string& json_text);
};

// Victim label = majority label among records with f(x)=1 (ties toward 0);
// target label = its complement.
std::pair<int, int> choose_labels(const data::TabularDataset& pool,
                                  const data::PropertyPredicate& f);

struct PoisonSet {
  data::TabularDataset records;        // labels already flipped to the target label
  std::vector<size_t> source_indices;  // positions in the pool the records came from
  int victim_label = 0;
  int target_label = 1;
};

// Draw resolve_count(n) eligible records without replacement and flip their
// labels. Errors when the eligible pool is too small or labels coincide.
PoisonSet build_poison_set(const data::TabularDataset& pool, const PoisonConfig& cfg,
                           size_t n, uint64_t seed);

}  // namespace propinf::poison
