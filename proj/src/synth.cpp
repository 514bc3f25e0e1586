#include "propinf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "propinf/common.hpp"

namespace propinf::synth {

using nlohmann::json;

void SynthSpec::validate() const {
  if (!schema) throw std::invalid_argument("spec has no schema");
  schema->validate();
  double total = 0.0;
  std::map<std::vector<int>, int> seen;
  for (const auto& cell : cells) {
    if (cell.assignment.size() != schema->features.size())
      throw std::invalid_argument("cell assignment arity mismatch");
    for (size_t i = 0; i < cell.assignment.size(); ++i) {
      int v = cell.assignment[i];
      if (v < 0 || v >= static_cast<int>(schema->features[i].values.size()))
        throw std::invalid_argument("cell assignment out of domain");
    }
    if (cell.prob < 0.0) throw std::invalid_argument("negative cell probability");
    if (cell.p_y1 < 0.0 || cell.p_y1 > 1.0)
      throw std::invalid_argument("conditional out of [0,1]");
    if (++seen[cell.assignment] > 1)
      throw std::invalid_argument("duplicate cell assignment");
    total += cell.prob;
  }
  if (std::fabs(total - 1.0) > 1e-12)
    throw std::invalid_argument("cell probabilities sum to " + std::to_string(total));
  property.bind(*schema);
}

SynthSpec SynthSpec::from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  SynthSpec spec;
  auto schema = std::make_shared<data::Schema>();
  for (const auto& f : j.at("features"))
    schema->features.push_back(
        {f.at("name").get<std::string>(), f.at("values").get<std::vector<std::string>>()});
  spec.schema = schema;
  for (const auto& c : j.at("cells")) {
    Cell cell;
    cell.assignment.resize(schema->features.size());
    const auto& assign = c.at("assign");
    for (size_t i = 0; i < schema->features.size(); ++i) {
      const auto& name = schema->features[i].name;
      if (!assign.contains(name))
        throw std::invalid_argument("cell missing assignment for feature: " + name);
      int vi = schema->value_index(static_cast<int>(i), assign.at(name).get<std::string>());
      if (vi < 0) throw std::invalid_argument("cell assigns unknown value for: " + name);
      cell.assignment[i] = vi;
    }
    cell.prob = c.at("prob").get<double>();
    cell.p_y1 = c.at("p_y1").get<double>();
    spec.cells.push_back(std::move(cell));
  }
  std::vector<std::pair<std::string, std::string>> clauses;
  for (const auto& cl : j.at("property"))
    clauses.emplace_back(cl.at("feature").get<std::string>(),
                         cl.at("value").get<std::string>());
  spec.property = data::PropertyPredicate(std::move(clauses));
  spec.validate();
  return spec;
}

SynthSpec SynthSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

std::string SynthSpec::to_json() const {
  json j;
  j["features"] = json::array();
  for (const auto& f : schema->features)
    j["features"].push_back({{"name", f.name}, {"values", f.values}});
  j["cells"] = json::array();
  for (const auto& cell : cells) {
    json assign = json::object();
    for (size_t i = 0; i < cell.assignment.size(); ++i)
      assign[schema->features[i].name] = schema->features[i].values[cell.assignment[i]];
    j["cells"].push_back({{"assign", assign}, {"prob", cell.prob}, {"p_y1", cell.p_y1}});
  }
  j["property"] = json::array();
  for (const auto& [feature, value] : property.clauses())
    j["property"].push_back({{"feature", feature}, {"value", value}});
  return j.dump(2);
}

void SynthSpec::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << to_json() << '\n';
}

data::TabularDataset synth_sample(const SynthSpec& spec, size_t n, uint64_t seed) {
  spec.validate();
  std::vector<double> cumulative(spec.cells.size());
  double acc = 0.0;
  for (size_t i = 0; i < spec.cells.size(); ++i) {
    acc += spec.cells[i].prob;
    cumulative[i] = acc;
  }
  Rng rng(derive_seed(seed, {0x5a3f11ULL}));
  data::TabularDataset ds;
  ds.schema = spec.schema;
  ds.records.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    double u = rng.next_double() * acc;
    size_t cell_idx =
        std::lower_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin();
    if (cell_idx >= spec.cells.size()) cell_idx = spec.cells.size() - 1;
    const auto& cell = spec.cells[cell_idx];
    data::Record r;
    r.values = cell.assignment;
    r.label = rng.bernoulli(cell.p_y1) ? 1 : 0;
    ds.records.push_back(std::move(r));
  }
  return ds;
}

namespace {

double conditional(const SynthSpec::Cell& cell, int v) {
  return v == 1 ? cell.p_y1 : 1.0 - cell.p_y1;
}

}  // namespace

std::pair<double, double> exact_marginals(const SynthSpec& spec, int v) {
  data::BoundPredicate bound{spec.property.bind(*spec.schema)};
  double t = 0.0, mass_v = 0.0;
  for (const auto& cell : spec.cells) {
    data::Record r{cell.assignment, 0};
    if (!bound.matches(r)) continue;
    t += cell.prob;
    mass_v += cell.prob * conditional(cell, v);
  }
  if (t <= 0.0) throw std::runtime_error("empty property");
  return {t, mass_v / t};
}

SynthSpec mix_poison_spec(const SynthSpec& spec, int v, int v_target, double p) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("poison rate must be in [0,1)");
  if (v == v_target) throw std::invalid_argument("victim and target label must differ");
  auto [t, pi_v] = exact_marginals(spec, v);
  double mass_v = t * pi_v;
  if (mass_v <= 0.0) throw std::runtime_error("zero property-and-victim-label mass");

  data::BoundPredicate bound{spec.property.bind(*spec.schema)};
  double gamma = (t * pi_v * (1.0 - p)) / (p + t * pi_v * (1.0 - p));

  SynthSpec out;
  out.schema = spec.schema;
  out.property = spec.property;
  out.cells.reserve(spec.cells.size());
  for (const auto& cell : spec.cells) {
    SynthSpec::Cell c = cell;
    data::Record r{cell.assignment, 0};
    if (bound.matches(r)) {
      // Mixture mass: clean share plus the renormalized poison share.
      c.prob = (1.0 - p) * cell.prob + p * cell.prob * conditional(cell, v) / mass_v;
      double pv = gamma * conditional(cell, v);
      c.p_y1 = (v == 1) ? pv : 1.0 - pv;
    } else {
      c.prob = (1.0 - p) * cell.prob;
    }
    out.cells.push_back(std::move(c));
  }
  // The construction preserves total mass exactly up to rounding; correct the
  // last ulps so validate()'s 1e-12 budget is never spent on arithmetic noise.
  double total = 0.0;
  for (const auto& c : out.cells) total += c.prob;
  if (std::fabs(total - 1.0) > 1e-15 && total > 0.0)
    for (auto& c : out.cells) c.prob /= total;
  out.validate();
  return out;
}

}  // namespace propinf::synth
