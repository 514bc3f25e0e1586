#include "propinf/poison.hpp"

#include <stdexcept>

#include "json.hpp"
#include "propinf/common.hpp"

namespace propinf::poison {

using nlohmann::json;

size_t PoisonConfig::resolve_count(size_t n) const {
  if (count) return *count;
  if (rate) {
    if (*rate < 0.0 || *rate >= 1.0)
      throw std::invalid_argument("poison rate must be in [0,1)");
    return data::round_half_up(*rate * static_cast<double>(n));
  }
  throw std::invalid_argument("poison amount not set (rate or count)");
}

void PoisonConfig::validate() const {
  if (rate && count) throw std::invalid_argument("set either rate or count, not both");
  if (!rate && !count) throw std::invalid_argument("poison amount not set");
  if (victim_label == target_label && victim_label != -1)
    throw std::invalid_argument("victim and target label must differ");
  if (poison_property && !poison_property->implies(target_property))
    throw std::invalid_argument("poison_property must imply target_property");
}

std::pair<int, int> choose_labels(const data::TabularDataset& pool,
                                  const data::PropertyPredicate& f) {
  data::BoundPredicate bound{f.bind(*pool.schema)};
  size_t ones = 0, total = 0;
  for (const auto& r : pool.records) {
    if (!bound.matches(r)) continue;
    ++total;
    ones += r.label;
  }
  if (total == 0) throw std::runtime_error("empty subpopulation");
  // Majority label is the victim; exact ties break toward v = 0.
  int v = (2 * ones > total) ? 1 : 0;
  return {v, 1 - v};
}

PoisonSet build_poison_set(const data::TabularDataset& pool, const PoisonConfig& cfg,
                           size_t n, uint64_t seed) {
  cfg.validate();
  int v = cfg.victim_label, vt = cfg.target_label;
  if (v < 0 || vt < 0) {
    auto [auto_v, auto_vt] = choose_labels(pool, cfg.target_property);
    if (v < 0) v = auto_v;
    if (vt < 0) vt = auto_vt;
  }
  if (v == vt) throw std::invalid_argument("victim and target label must differ");

  size_t want = cfg.resolve_count(n);
  const data::PropertyPredicate& pf = cfg.effective_poison_property();
  data::BoundPredicate bound{pf.bind(*pool.schema)};
  std::vector<size_t> eligible;
  for (size_t i = 0; i < pool.records.size(); ++i)
    if (pool.records[i].label == v && bound.matches(pool.records[i]))
      eligible.push_back(i);
  if (eligible.size() < want)
    throw std::runtime_error("insufficient eligible poison records: need " +
                             std::to_string(want) + ", have " +
                             std::to_string(eligible.size()));

  Rng rng(derive_seed(seed, {0xf11bULL}));
  PoisonSet out;
  out.victim_label = v;
  out.target_label = vt;
  out.records.schema = pool.schema;
  out.records.records.reserve(want);
  for (size_t idx : rng.sample_without_replacement(eligible.size(), want)) {
    size_t src = eligible[idx];
    data::Record r = pool.records[src];
    r.label = vt;
    out.records.records.push_back(std::move(r));
    out.source_indices.push_back(src);
  }
  return out;
}

std::string PoisonConfig::to_json() const {
  json j;
  auto clauses_json = [](const data::PropertyPredicate& p) {
    json arr = json::array();
    for (const auto& [f, v] : p.clauses())
      arr.push_back({{"feature", f}, {"value", v}});
    return arr;
  };
  j["target_property"] = clauses_json(target_property);
  if (poison_property) j["poison_property"] = clauses_json(*poison_property);
  if (victim_label >= 0) j["victim_label"] = victim_label;
  if (target_label >= 0) j["target_label"] = target_label;
  if (rate) j["rate"] = *rate;
  if (count) j["count"] = *count;
  return j.dump(2);
}

PoisonConfig PoisonConfig::from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  PoisonConfig cfg;
  auto parse_clauses = [](const json& arr) {
    std::vector<std::pair<std::string, std::string>> clauses;
    for (const auto& cl : arr)
      clauses.emplace_back(cl.at("feature").get<std::string>(),
                           cl.at("value").get<std::string>());
    return data::PropertyPredicate(std::move(clauses));
  };
  cfg.target_property = parse_clauses(j.at("target_property"));
  if (j.contains("poison_property"))
    cfg.poison_property = parse_clauses(j.at("poison_property"));
  if (j.contains("victim_label")) cfg.victim_label = j.at("victim_label").get<int>();
  if (j.contains("target_label")) cfg.target_label = j.at("target_label").get<int>();
  if (j.contains("rate")) cfg.rate = j.at("rate").get<double>();
  if (j.contains("count")) cfg.count = j.at("count").get<size_t>();
  cfg.validate();
  return cfg;
}

}  // namespace propinf::poison
