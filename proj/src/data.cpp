#include "propinf/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "propinf/common.hpp"

namespace propinf::data {

void Schema::validate() const {
  std::unordered_set<std::string> seen;
  for (const auto& f : features) {
    if (!seen.insert(f.name).second)
      throw std::invalid_argument("duplicate feature name: " + f.name);
    if (f.values.empty())
      throw std::invalid_argument("empty value domain for feature: " + f.name);
    std::unordered_set<std::string> vals(f.values.begin(), f.values.end());
    if (vals.size() != f.values.size())
      throw std::invalid_argument("duplicate value in domain of feature: " + f.name);
  }
}

int Schema::feature_index(const std::string& name) const {
  for (size_t i = 0; i < features.size(); ++i)
    if (features[i].name == name) return static_cast<int>(i);
  return -1;
}

int Schema::value_index(int feature, const std::string& value) const {
  const auto& vals = features[feature].values;
  for (size_t i = 0; i < vals.size(); ++i)
    if (vals[i] == value) return static_cast<int>(i);
  return -1;
}

size_t Schema::one_hot_dim() const {
  size_t d = 0;
  for (const auto& f : features) d += f.values.size();
  return d;
}

std::vector<std::pair<int, int>> PropertyPredicate::bind(const Schema& schema) const {
  std::vector<std::pair<int, int>> bound;
  bound.reserve(clauses_.size());
  for (const auto& [name, value] : clauses_) {
    int fi = schema.feature_index(name);
    if (fi < 0) throw std::invalid_argument("predicate names unknown feature: " + name);
    int vi = schema.value_index(fi, value);
    if (vi < 0)
      throw std::invalid_argument("predicate names unknown value '" + value +
                                  "' for feature: " + name);
    bound.emplace_back(fi, vi);
  }
  return bound;
}

bool PropertyPredicate::matches(const Schema& schema, const Record& r) const {
  for (const auto& [name, value] : clauses_) {
    int fi = schema.feature_index(name);
    if (fi < 0) throw std::invalid_argument("predicate names unknown feature: " + name);
    if (fi >= static_cast<int>(r.values.size())) return false;
    int vi = schema.value_index(fi, value);
    if (r.values[fi] != vi) return false;
  }
  return true;
}

bool PropertyPredicate::implies(const PropertyPredicate& other) const {
  for (const auto& clause : other.clauses_) {
    if (std::find(clauses_.begin(), clauses_.end(), clause) == clauses_.end())
      return false;
  }
  return true;
}

namespace {

// RFC-4180 parse of a whole document: quoted fields may contain commas,
// doubled quotes and newlines; rows end at unquoted LF (CR stripped).
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string cur;
  bool in_quotes = false;
  bool field_started = false;
  auto end_field = [&] {
    row.push_back(std::move(cur));
    cur.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
  };
  for (size_t i = 0; i < text.size(); ++i) {
    char ch = text[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cur.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"': in_quotes = true; field_started = true; break;
      case ',': end_field(); field_started = true; break;
      case '\r': break;
      case '\n': end_row(); break;
      default: cur.push_back(ch); field_started = true; break;
    }
  }
  if (in_quotes) throw std::runtime_error("unterminated quoted field");
  if (field_started || !cur.empty() || !row.empty()) end_row();
  return rows;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += "\"\"";
    else out.push_back(ch);
  }
  out += "\"";
  return out;
}

}  // namespace

TabularDataset load_csv(const std::string& path, const std::string& label_column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::vector<std::string>> rows = parse_csv(text);
  if (rows.empty()) throw std::runtime_error("empty file (no header row): " + path);

  const std::vector<std::string>& header = rows[0];
  int label_col = -1;
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == label_column) label_col = static_cast<int>(i);
  if (label_col < 0)
    throw std::runtime_error("label column '" + label_column + "' not found");

  auto schema = std::make_shared<Schema>();
  for (size_t i = 0; i < header.size(); ++i)
    if (static_cast<int>(i) != label_col)
      schema->features.push_back({header[i], {}});

  // Value-index maps built in first-seen order.
  std::vector<std::unordered_map<std::string, int>> value_ids(schema->features.size());

  TabularDataset ds;
  for (size_t row_i = 1; row_i < rows.size(); ++row_i) {
    const auto& fields = rows[row_i];
    if (fields.size() != header.size())
      throw std::runtime_error("ragged row at row " + std::to_string(row_i + 1));
    Record rec;
    rec.values.resize(schema->features.size());
    size_t fi = 0;
    for (size_t i = 0; i < fields.size(); ++i) {
      if (static_cast<int>(i) == label_col) {
        if (fields[i] == "0") rec.label = 0;
        else if (fields[i] == "1") rec.label = 1;
        else throw std::runtime_error("non-binary label '" + fields[i] + "' at row " +
                                      std::to_string(row_i + 1));
        continue;
      }
      auto& ids = value_ids[fi];
      auto it = ids.find(fields[i]);
      if (it == ids.end()) {
        int id = static_cast<int>(schema->features[fi].values.size());
        schema->features[fi].values.push_back(fields[i]);
        it = ids.emplace(fields[i], id).first;
      }
      rec.values[fi] = it->second;
      ++fi;
    }
    ds.records.push_back(std::move(rec));
  }
  // An empty dataset still needs non-empty domains to be a valid schema;
  // give each feature a placeholder domain in that case.
  if (ds.records.empty())
    for (auto& f : schema->features)
      if (f.values.empty()) f.values.push_back("");
  schema->validate();
  ds.schema = std::move(schema);
  return ds;
}

void write_csv(const TabularDataset& ds, const std::string& path,
               const std::string& label_column) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  const Schema& schema = *ds.schema;
  for (size_t i = 0; i < schema.features.size(); ++i) {
    if (i) out << ',';
    out << csv_escape(schema.features[i].name);
  }
  if (!schema.features.empty()) out << ',';
  out << csv_escape(label_column) << '\n';
  for (const Record& r : ds.records) {
    for (size_t i = 0; i < schema.features.size(); ++i) {
      if (i) out << ',';
      out << csv_escape(schema.features[i].values[r.values[i]]);
    }
    if (!schema.features.empty()) out << ',';
    out << r.label << '\n';
  }
}

size_t round_half_up(double x) {
  return static_cast<size_t>(std::floor(x + 0.5));
}

TabularDataset construct_world(const TabularDataset& pool, const PropertyPredicate& f,
                               double t, size_t n, uint64_t seed) {
  if (t < 0.0 || t > 1.0) throw std::invalid_argument("fraction must be in [0,1]");
  BoundPredicate bound{f.bind(*pool.schema)};
  std::vector<size_t> with, without;
  for (size_t i = 0; i < pool.records.size(); ++i)
    (bound.matches(pool.records[i]) ? with : without).push_back(i);

  size_t want_with = round_half_up(t * static_cast<double>(n));
  if (want_with > n) want_with = n;
  size_t want_without = n - want_with;
  if (with.size() < want_with)
    throw std::runtime_error("insufficient pool: need " + std::to_string(want_with) +
                             " property records, have " + std::to_string(with.size()));
  if (without.size() < want_without)
    throw std::runtime_error("insufficient pool: need " + std::to_string(want_without) +
                             " non-property records, have " + std::to_string(without.size()));

  Rng rng(derive_seed(seed, {0x77a11cafeULL}));
  TabularDataset out;
  out.schema = pool.schema;
  out.records.reserve(n);
  for (size_t idx : rng.sample_without_replacement(with.size(), want_with))
    out.records.push_back(pool.records[with[idx]]);
  for (size_t idx : rng.sample_without_replacement(without.size(), want_without))
    out.records.push_back(pool.records[without[idx]]);
  rng.shuffle(out.records);
  return out;
}

std::vector<size_t> sample_query_indices(const TabularDataset& pool,
                                         const PropertyPredicate& f, int v, size_t m,
                                         uint64_t seed, const std::vector<size_t>& exclude) {
  BoundPredicate bound{f.bind(*pool.schema)};
  std::unordered_set<size_t> excluded(exclude.begin(), exclude.end());
  std::vector<size_t> eligible;
  for (size_t i = 0; i < pool.records.size(); ++i) {
    if (excluded.count(i)) continue;
    if (pool.records[i].label == v && bound.matches(pool.records[i]))
      eligible.push_back(i);
  }
  if (eligible.size() < m)
    throw std::runtime_error("insufficient eligible records: need " + std::to_string(m) +
                             ", have " + std::to_string(eligible.size()));
  Rng rng(derive_seed(seed, {0x9e3779b9ULL}));
  std::vector<size_t> chosen;
  chosen.reserve(m);
  for (size_t idx : rng.sample_without_replacement(eligible.size(), m))
    chosen.push_back(eligible[idx]);
  return chosen;
}

TabularDataset sample_query_set(const TabularDataset& pool, const PropertyPredicate& f,
                                int v, size_t m, uint64_t seed,
                                const std::vector<size_t>& exclude) {
  TabularDataset out;
  out.schema = pool.schema;
  out.records.reserve(m);
  for (size_t idx : sample_query_indices(pool, f, v, m, seed, exclude))
    out.records.push_back(pool.records[idx]);
  return out;
}

std::pair<TabularDataset, TabularDataset> split(const TabularDataset& pool, double ratio,
                                                uint64_t seed) {
  if (ratio < 0.0 || ratio > 1.0) throw std::invalid_argument("ratio must be in [0,1]");
  size_t n_first = round_half_up(ratio * static_cast<double>(pool.records.size()));
  Rng rng(derive_seed(seed, {0x51171ULL}));
  std::vector<size_t> idx(pool.records.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  rng.shuffle(idx);
  TabularDataset a, b;
  a.schema = pool.schema;
  b.schema = pool.schema;
  for (size_t i = 0; i < idx.size(); ++i)
    (i < n_first ? a : b).records.push_back(pool.records[idx[i]]);
  return {std::move(a), std::move(b)};
}

namespace {

bool same_schema(const Schema& a, const Schema& b) {
  if (a.features.size() != b.features.size()) return false;
  for (size_t i = 0; i < a.features.size(); ++i)
    if (a.features[i].name != b.features[i].name ||
        a.features[i].values != b.features[i].values)
      return false;
  return true;
}

}  // namespace

TabularDataset concat(const TabularDataset& a, const TabularDataset& b) {
  if (a.schema != b.schema && !same_schema(*a.schema, *b.schema))
    throw std::invalid_argument("concat: schema mismatch");
  TabularDataset out;
  out.schema = a.schema;
  out.records = a.records;
  out.records.insert(out.records.end(), b.records.begin(), b.records.end());
  return out;
}

}  // namespace propinf::data
