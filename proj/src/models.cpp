#include "propinf/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "propinf/common.hpp"

namespace propinf::models {

using nlohmann::json;

namespace {

constexpr double kClamp = 1e-12;

double clamp_prob(double y) {
  return std::min(std::max(y, kClamp), 1.0 - kClamp);
}

double sigmoid(double z) {
  if (z >= 0.0) {
    double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow.
double softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z)));
}

}  // namespace

void ModelSpec::validate() const {
  if (kind == ModelKind::logistic && !hidden_layers.empty())
    throw std::invalid_argument("logistic model takes no hidden layers");
  for (int w : hidden_layers)
    if (w <= 0) throw std::invalid_argument("hidden layer widths must be positive");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be positive");
  if (l2 < 0.0) throw std::invalid_argument("l2 must be non-negative");
}

namespace detail {

Encoded encode(const data::TabularDataset& ds) {
  const data::Schema& schema = *ds.schema;
  Encoded enc;
  enc.offsets.resize(schema.features.size());
  size_t off = 0;
  for (size_t f = 0; f < schema.features.size(); ++f) {
    enc.offsets[f] = off;
    off += schema.features[f].values.size();
  }
  enc.dim = off;
  enc.active.reserve(ds.records.size());
  enc.labels.reserve(ds.records.size());
  for (const auto& r : ds.records) {
    std::vector<int> act(schema.features.size());
    for (size_t f = 0; f < schema.features.size(); ++f)
      act[f] = static_cast<int>(enc.offsets[f]) + r.values[f];
    enc.active.push_back(std::move(act));
    enc.labels.push_back(r.label);
  }
  return enc;
}

std::vector<int> encode_record(const data::Schema& schema, const data::Record& r) {
  if (r.values.size() != schema.features.size())
    throw std::invalid_argument("record arity does not match schema");
  std::vector<int> act(schema.features.size());
  size_t off = 0;
  for (size_t f = 0; f < schema.features.size(); ++f) {
    if (r.values[f] < 0 || r.values[f] >= static_cast<int>(schema.features[f].values.size()))
      throw std::invalid_argument("record value out of schema domain");
    act[f] = static_cast<int>(off) + r.values[f];
    off += schema.features[f].values.size();
  }
  return act;
}

void Net::init(uint64_t seed) {
  Rng rng(derive_seed(seed, {0x1417ULL}));
  weights.assign(dims.size() - 1, {});
  biases.assign(dims.size() - 1, {});
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    int fan_in = dims[l], fan_out = dims[l + 1];
    double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    weights[l].resize(static_cast<size_t>(fan_in) * fan_out);
    for (auto& w : weights[l]) w = rng.uniform(-a, a);
    biases[l].assign(fan_out, 0.0);
  }
}

double Net::forward(const std::vector<int>& active) const {
  std::vector<double> cur;
  // First layer consumes the sparse one-hot input directly.
  {
    int out_dim = dims[1];
    cur.assign(out_dim, 0.0);
    const auto& W = weights[0];
    int in_dim = dims[0];
    for (int j = 0; j < out_dim; ++j) {
      double z = biases[0][j];
      const double* row = &W[static_cast<size_t>(j) * in_dim];
      for (int col : active) z += row[col];
      cur[j] = (dims.size() == 2) ? z : std::tanh(z);
    }
  }
  for (size_t l = 1; l + 1 < dims.size(); ++l) {
    int in_dim = dims[l], out_dim = dims[l + 1];
    std::vector<double> next(out_dim, 0.0);
    const auto& W = weights[l];
    for (int j = 0; j < out_dim; ++j) {
      double z = biases[l][j];
      const double* row = &W[static_cast<size_t>(j) * in_dim];
      for (int i = 0; i < in_dim; ++i) z += row[i] * cur[i];
      next[j] = (l + 2 == dims.size()) ? z : std::tanh(z);
    }
    cur = std::move(next);
  }
  return sigmoid(cur[0]);
}

double Net::loss_and_grad(const Encoded& enc, const std::vector<size_t>& batch, double l2,
                          std::vector<std::vector<double>>& grad_w,
                          std::vector<std::vector<double>>& grad_b) const {
  size_t layers = dims.size() - 1;
  grad_w.resize(layers);
  grad_b.resize(layers);
  for (size_t l = 0; l < layers; ++l) {
    grad_w[l].assign(weights[l].size(), 0.0);
    grad_b[l].assign(biases[l].size(), 0.0);
  }

  double loss = 0.0;
  std::vector<std::vector<double>> acts(layers);  // post-activation per layer
  for (size_t bi = 0; bi < batch.size(); ++bi) {
    const auto& active = enc.active[batch[bi]];
    double y = enc.labels[batch[bi]];

    // Forward, keeping activations.
    for (size_t l = 0; l < layers; ++l) {
      int out_dim = dims[l + 1];
      acts[l].assign(out_dim, 0.0);
      for (int j = 0; j < out_dim; ++j) {
        double z = biases[l][j];
        const double* row = &weights[l][static_cast<size_t>(j) * dims[l]];
        if (l == 0) {
          for (int col : active) z += row[col];
        } else {
          for (int i = 0; i < dims[l]; ++i) z += row[i] * acts[l - 1][i];
        }
        acts[l][j] = (l + 1 == layers) ? z : std::tanh(z);
      }
    }
    double z_out = acts[layers - 1][0];
    loss += softplus(z_out) - y * z_out;

    // Backward. delta holds dL/dz for the current layer.
    std::vector<double> delta{sigmoid(z_out) - y};
    for (size_t l = layers; l-- > 0;) {
      std::vector<double> delta_prev;
      if (l > 0) delta_prev.assign(dims[l], 0.0);
      for (int j = 0; j < dims[l + 1]; ++j) {
        double d = delta[j];
        grad_b[l][j] += d;
        double* grow = &grad_w[l][static_cast<size_t>(j) * dims[l]];
        const double* wrow = &weights[l][static_cast<size_t>(j) * dims[l]];
        if (l == 0) {
          for (int col : active) grow[col] += d;
        } else {
          const auto& prev = acts[l - 1];
          for (int i = 0; i < dims[l]; ++i) {
            grow[i] += d * prev[i];
            delta_prev[i] += d * wrow[i];
          }
        }
      }
      if (l > 0) {
        // Through the tanh of layer l-1.
        for (int i = 0; i < dims[l]; ++i) {
          double a = acts[l - 1][i];
          delta_prev[i] *= (1.0 - a * a);
        }
        delta = std::move(delta_prev);
      }
    }
  }

  double inv_n = 1.0 / static_cast<double>(batch.size());
  loss *= inv_n;
  for (size_t l = 0; l < layers; ++l) {
    for (size_t i = 0; i < grad_w[l].size(); ++i)
      grad_w[l][i] = grad_w[l][i] * inv_n + l2 * weights[l][i];
    for (auto& g : grad_b[l]) g *= inv_n;
  }
  if (l2 > 0.0) {
    double sq = 0.0;
    for (size_t l = 0; l < layers; ++l)
      for (double w : weights[l]) sq += w * w;
    loss += 0.5 * l2 * sq;
  }
  return loss;
}

size_t Net::parameter_count() const {
  size_t n = 0;
  for (size_t l = 0; l + 1 < dims.size(); ++l)
    n += weights[l].size() + biases[l].size();
  return n;
}

}  // namespace detail

TrainedModel TrainedModel::from_net(ModelSpec spec,
                                    std::shared_ptr<const data::Schema> schema,
                                    detail::Net net) {
  TrainedModel m;
  m.spec_ = std::move(spec);
  m.schema_ = std::move(schema);
  m.net_ = std::move(net);
  return m;
}

TrainedModel TrainedModel::from_bayes(std::shared_ptr<const data::Schema> schema,
                                      std::map<std::vector<int>, double> cell_p_y1) {
  TrainedModel m;
  m.spec_.kind = ModelKind::bayes_exact;
  m.schema_ = std::move(schema);
  m.bayes_p_y1_ = std::move(cell_p_y1);
  return m;
}

std::pair<double, double> TrainedModel::predict_confidence(const data::Record& r) const {
  double y1;
  if (spec_.kind == ModelKind::bayes_exact) {
    auto it = bayes_p_y1_.find(r.values);
    if (it == bayes_p_y1_.end()) throw std::runtime_error("off-support query");
    y1 = it->second;
  } else {
    y1 = net_->forward(detail::encode_record(*schema_, r));
  }
  y1 = clamp_prob(y1);
  return {1.0 - y1, y1};
}

double TrainedModel::logit(const data::Record& r, int cls) const {
  auto [y0, y1] = predict_confidence(r);
  double z = std::log(y1) - std::log(y0);
  return cls == 1 ? z : -z;
}

int TrainedModel::predict_label(const data::Record& r) const {
  return predict_confidence(r).second > 0.5 ? 1 : 0;
}

TrainedModel train(const ModelSpec& spec, const data::TabularDataset& ds,
                   const TrainConfig& cfg) {
  spec.validate();
  cfg.validate();
  if (spec.kind == ModelKind::bayes_exact)
    throw std::invalid_argument("bayes_exact is constructed from a spec, not trained");
  if (ds.records.empty()) throw std::invalid_argument("training data is empty");

  detail::Encoded enc = detail::encode(ds);
  detail::Net net;
  net.dims.push_back(static_cast<int>(enc.dim));
  if (spec.kind == ModelKind::mlp)
    for (int w : spec.hidden_layers) net.dims.push_back(w);
  net.dims.push_back(1);
  net.init(cfg.seed);

  size_t layers = net.dims.size() - 1;
  std::vector<std::vector<double>> grad_w, grad_b;
  std::vector<std::vector<double>> m_w(layers), v_w(layers), m_b(layers), v_b(layers);
  for (size_t l = 0; l < layers; ++l) {
    m_w[l].assign(net.weights[l].size(), 0.0);
    v_w[l].assign(net.weights[l].size(), 0.0);
    m_b[l].assign(net.biases[l].size(), 0.0);
    v_b[l].assign(net.biases[l].size(), 0.0);
  }

  Rng shuffler(derive_seed(cfg.seed, {0x0badf00dULL}));
  std::vector<size_t> order(enc.active.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  int64_t step = 0;
  double last_loss = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffler.shuffle(order);
    double epoch_loss = 0.0;
    size_t n_batches = 0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<size_t> batch(order.begin() + start, order.begin() + end);
      double loss = net.loss_and_grad(enc, batch, cfg.l2, grad_w, grad_b);
      epoch_loss += loss;
      ++n_batches;
      ++step;

      if (cfg.optimizer == TrainConfig::Optimizer::sgd) {
        for (size_t l = 0; l < layers; ++l) {
          for (size_t i = 0; i < net.weights[l].size(); ++i)
            net.weights[l][i] -= cfg.learning_rate * grad_w[l][i];
          for (size_t i = 0; i < net.biases[l].size(); ++i)
            net.biases[l][i] -= cfg.learning_rate * grad_b[l][i];
        }
      } else {
        double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
        double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
        auto adam_update = [&](std::vector<double>& params, const std::vector<double>& grad,
                               std::vector<double>& m, std::vector<double>& v) {
          for (size_t i = 0; i < params.size(); ++i) {
            m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * grad[i];
            v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * grad[i] * grad[i];
            double m_hat = m[i] / bc1;
            double v_hat = v[i] / bc2;
            params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
          }
        };
        for (size_t l = 0; l < layers; ++l) {
          adam_update(net.weights[l], grad_w[l], m_w[l], v_w[l]);
          adam_update(net.biases[l], grad_b[l], m_b[l], v_b[l]);
        }
      }
    }
    last_loss = epoch_loss / static_cast<double>(n_batches);
    if (!std::isfinite(last_loss))
      throw std::runtime_error("training diverged (try a smaller learning rate)");
  }
  return TrainedModel::from_net(spec, ds.schema, std::move(net));
}

TrainedModel bayes_from_spec(const synth::SynthSpec& spec) {
  spec.validate();
  std::map<std::vector<int>, double> table;
  for (const auto& cell : spec.cells) table[cell.assignment] = cell.p_y1;
  return TrainedModel::from_bayes(spec.schema, std::move(table));
}

Metrics evaluate(const TrainedModel& model, const data::TabularDataset& ds) {
  int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (const auto& r : ds.records) {
    int pred = model.predict_label(r);
    if (pred == 1 && r.label == 1) ++tp;
    else if (pred == 1 && r.label == 0) ++fp;
    else if (pred == 0 && r.label == 0) ++tn;
    else ++fn;
  }
  Metrics m;
  int64_t total = tp + fp + tn + fn;
  m.accuracy = total ? static_cast<double>(tp + tn) / total : 0.0;
  if (tp + fp == 0) {
    m.precision = 0.0;
    m.no_positive_predictions = true;
  } else {
    m.precision = static_cast<double>(tp) / (tp + fp);
  }
  m.recall = (tp + fn) ? static_cast<double>(tp) / (tp + fn) : 0.0;
  m.f1 = (m.precision + m.recall > 0.0)
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

std::vector<double> batch_logits(const TrainedModel& model, const data::TabularDataset& ds,
                                 int cls) {
  std::vector<double> out;
  out.reserve(ds.records.size());
  for (const auto& r : ds.records) out.push_back(model.logit(r, cls));
  return out;
}

namespace {

constexpr const char* kFormatTag = "propinf-model-v1";

}  // namespace

std::string TrainedModel::to_json() const {
  json j;
  j["format"] = kFormatTag;
  json schema_json = json::array();
  for (const auto& f : schema_->features)
    schema_json.push_back({{"name", f.name}, {"values", f.values}});
  j["schema"] = schema_json;
  switch (spec_.kind) {
    case ModelKind::logistic: j["kind"] = "logistic"; break;
    case ModelKind::mlp: j["kind"] = "mlp"; break;
    case ModelKind::bayes_exact: j["kind"] = "bayes_exact"; break;
  }
  j["hidden_layers"] = spec_.hidden_layers;
  if (net_) {
    j["dims"] = net_->dims;
    j["weights"] = net_->weights;
    j["biases"] = net_->biases;
  } else {
    json cells = json::array();
    for (const auto& [assignment, p1] : bayes_p_y1_)
      cells.push_back({{"assignment", assignment}, {"p_y1", p1}});
    j["bayes_cells"] = cells;
  }
  return j.dump();
}

TrainedModel TrainedModel::from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  if (j.at("format").get<std::string>() != kFormatTag)
    throw std::runtime_error("unsupported model format");
  auto schema = std::make_shared<data::Schema>();
  for (const auto& f : j.at("schema"))
    schema->features.push_back(
        {f.at("name").get<std::string>(), f.at("values").get<std::vector<std::string>>()});
  schema->validate();

  std::string kind = j.at("kind").get<std::string>();
  if (kind == "bayes_exact") {
    std::map<std::vector<int>, double> table;
    for (const auto& c : j.at("bayes_cells"))
      table[c.at("assignment").get<std::vector<int>>()] = c.at("p_y1").get<double>();
    return from_bayes(std::move(schema), std::move(table));
  }
  ModelSpec spec;
  spec.kind = (kind == "mlp") ? ModelKind::mlp : ModelKind::logistic;
  spec.hidden_layers = j.at("hidden_layers").get<std::vector<int>>();
  detail::Net net;
  net.dims = j.at("dims").get<std::vector<int>>();
  net.weights = j.at("weights").get<std::vector<std::vector<double>>>();
  net.biases = j.at("biases").get<std::vector<std::vector<double>>>();
  return from_net(std::move(spec), std::move(schema), std::move(net));
}

void TrainedModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << to_json() << '\n';
}

TrainedModel TrainedModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

}  // namespace propinf::models
