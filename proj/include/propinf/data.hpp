#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace propinf::data {

// Categorical feature space with a binary label. Feature values are stored
// as indices into the per-feature domain; domains are pinned at schema
// construction so datasets sharing a schema encode identically.
struct Schema {
  struct Feature {
    std::string name;
    std::vector<std::string> values;
  };
  std::vector<Feature> features;

  void validate() const;
  int feature_index(const std::string& name) const;  // -1 if absent
  int value_index(int feature, const std::string& value) const;  // -1 if absent
  size_t one_hot_dim() const;
};

struct Record {
  std::vector<int> values;  // one domain index per schema feature
  int label = 0;            // 0 or 1
};

struct TabularDataset {
  std::shared_ptr<const Schema> schema;
  std::vector<Record> records;

  size_t size() const { return records.size(); }
};

// Conjunction of feature=value clauses; true iff all clauses match.
class PropertyPredicate {
 public:
  PropertyPredicate() = default;
  explicit PropertyPredicate(std::vector<std::pair<std::string, std::string>> clauses)
      : clauses_(std::move(clauses)) {}
  PropertyPredicate(std::initializer_list<std::pair<std::string, std::string>> clauses)
      : clauses_(clauses) {}

  const std::vector<std::pair<std::string, std::string>>& clauses() const {
    return clauses_;
  }

  // Resolve clause names/values against a schema once; throws if a clause
  // names an unknown feature or value.
  std::vector<std::pair<int, int>> bind(const Schema& schema) const;

  bool matches(const Schema& schema, const Record& r) const;

  // True when this predicate's clause set contains every clause of `other`
  // (so matching this implies matching `other`).
  bool implies(const PropertyPredicate& other) const;

 private:
  std::vector<std::pair<std::string, std::string>> clauses_;
};

// Fast repeated evaluation against one schema.
struct BoundPredicate {
  std::vector<std::pair<int, int>> clauses;  // (feature index, value index)
  bool matches(const Record& r) const {
    for (auto [f, v] : clauses)
      if (r.values[f] != v) return false;
    return true;
  }
};

// CSV (RFC-4180-style, header row, UTF-8). The label column must hold only
// "0"/"1"; remaining columns become categorical features with domains in
// first-seen order.
TabularDataset load_csv(const std::string& path, const std::string& label_column);
void write_csv(const TabularDataset& ds, const std::string& path,
               const std::string& label_column = "label");

// Draw `n` records without replacement so that exactly round_half_up(t * n)
// of them satisfy `f`; order shuffled by seed.
TabularDataset construct_world(const TabularDataset& pool, const PropertyPredicate& f,
                               double t, size_t n, uint64_t seed);

// Draw `m` records with f(x)=1 and label v, without replacement, skipping
// indices listed in `exclude` (pool indices).
TabularDataset sample_query_set(const TabularDataset& pool, const PropertyPredicate& f,
                                int v, size_t m, uint64_t seed,
                                const std::vector<size_t>& exclude = {});

// Same draw, returned as pool indices (callers wanting disjoint follow-up
// draws feed these back through `exclude`).
std::vector<size_t> sample_query_indices(const TabularDataset& pool,
                                         const PropertyPredicate& f, int v, size_t m,
                                         uint64_t seed,
                                         const std::vector<size_t>& exclude = {});

// Seeded disjoint split; first part gets round_half_up(ratio * n) records.
std::pair<TabularDataset, TabularDataset> split(const TabularDataset& pool, double ratio,
                                                uint64_t seed);

size_t round_half_up(double x);

TabularDataset concat(const TabularDataset& a, const TabularDataset& b);

}  // namespace propinf::data
