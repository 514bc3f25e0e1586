#pragma once

// Shared synthetic distributions for tests. The "pocket" family puts the
// target property on one value of a group feature, with a small conditional
// spread inside the pocket (driven by a shade feature) so per-point logits
// are not all identical.

#include <algorithm>
#include <memory>
#include <string>
#include <vector>

#include "propinf/common.hpp"
#include "propinf/synth.hpp"

namespace fixtures {

struct PocketParams {
  double pocket_mass = 0.08;   // P[grp = g0] (the property)
  double pocket_py1 = 0.10;    // mean P[Y=1 | pocket]; pi_0 = 1 - this, exactly
  double pocket_spread = 0.04; // conditional is py1 + {-1,0,+1} * spread by shade
  int n_groups = 4;
  double outside_py1 = 0.45;   // base rate outside the pocket
};

inline propinf::synth::SynthSpec make_pocket_spec(const PocketParams& p = {}) {
  using namespace propinf;
  auto schema = std::make_shared<data::Schema>();
  data::Schema::Feature grp{"grp", {}};
  for (int g = 0; g < p.n_groups; ++g) grp.values.push_back("g" + std::to_string(g));
  schema->features.push_back(grp);
  schema->features.push_back({"shade", {"s0", "s1", "s2"}});
  schema->features.push_back({"noise", {"n0", "n1"}});

  synth::SynthSpec spec;
  spec.schema = schema;
  spec.property = data::PropertyPredicate({{"grp", "g0"}});

  double other_mass = (1.0 - p.pocket_mass) / (p.n_groups - 1);
  for (int g = 0; g < p.n_groups; ++g) {
    double g_mass = (g == 0) ? p.pocket_mass : other_mass;
    for (int s = 0; s < 3; ++s) {
      for (int nz = 0; nz < 2; ++nz) {
        synth::SynthSpec::Cell cell;
        cell.assignment = {g, s, nz};
        cell.prob = g_mass / 6.0;
        if (g == 0) {
          cell.p_y1 = p.pocket_py1 + (s - 1) * p.pocket_spread;
        } else {
          cell.p_y1 = p.outside_py1 + 0.10 * (s - 1) + 0.05 * nz + 0.02 * (g - 1);
        }
        cell.p_y1 = std::min(0.97, std::max(0.03, cell.p_y1));
        spec.cells.push_back(cell);
      }
    }
  }
  spec.validate();
  return spec;
}

// Random small spec: 2-3 features, 4-16 populated cells, conditionals kept
// away from the clamp boundary, property = one clause with positive mass.
inline propinf::synth::SynthSpec make_random_spec(uint64_t seed) {
  using namespace propinf;
  Rng rng(seed);
  auto schema = std::make_shared<data::Schema>();
  int n_features = 2 + static_cast<int>(rng.next_below(2));
  std::vector<int> domain_sizes;
  for (int f = 0; f < n_features; ++f) {
    int d = 2 + static_cast<int>(rng.next_below(3));
    domain_sizes.push_back(d);
    data::Schema::Feature feat{"f" + std::to_string(f), {}};
    for (int v = 0; v < d; ++v) feat.values.push_back("v" + std::to_string(v));
    schema->features.push_back(feat);
  }

  // Enumerate the full product space, then keep a random subset of cells.
  std::vector<std::vector<int>> assignments;
  std::vector<int> cursor(n_features, 0);
  while (true) {
    assignments.push_back(cursor);
    int f = n_features - 1;
    while (f >= 0 && ++cursor[f] == domain_sizes[f]) cursor[f--] = 0;
    if (f < 0) break;
  }
  size_t keep = std::min<size_t>(assignments.size(), 4 + rng.next_below(13));
  rng.shuffle(assignments);
  assignments.resize(keep);

  synth::SynthSpec spec;
  spec.schema = schema;
  double total = 0.0;
  for (const auto& a : assignments) {
    synth::SynthSpec::Cell cell;
    cell.assignment = a;
    cell.prob = rng.uniform(0.2, 1.0);
    cell.p_y1 = rng.uniform(0.05, 0.95);
    total += cell.prob;
    spec.cells.push_back(cell);
  }
  for (auto& c : spec.cells) c.prob /= total;
  double fixup = 0.0;
  for (const auto& c : spec.cells) fixup += c.prob;
  spec.cells.back().prob += 1.0 - fixup;

  // Pick a property clause that some kept cell satisfies.
  const auto& anchor = spec.cells[rng.next_below(spec.cells.size())].assignment;
  int pf = static_cast<int>(rng.next_below(n_features));
  spec.property = data::PropertyPredicate(
      {{schema->features[pf].name, schema->features[pf].values[anchor[pf]]}});
  spec.validate();
  return spec;
}

// Four equiprobable cells over two binary features with near-deterministic
// XOR labels: additive models top out at 3 of 4 cells.
inline propinf::synth::SynthSpec make_xor_spec() {
  using namespace propinf;
  auto schema = std::make_shared<data::Schema>();
  schema->features.push_back({"a", {"0", "1"}});
  schema->features.push_back({"b", {"0", "1"}});
  synth::SynthSpec spec;
  spec.schema = schema;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      spec.cells.push_back({{a, b}, 0.25, (a ^ b) ? 0.98 : 0.02});
  spec.property = data::PropertyPredicate({{"a", "1"}});
  spec.validate();
  return spec;
}

}  // namespace fixtures
