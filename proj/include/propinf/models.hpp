#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "propinf/data.hpp"
#include "propinf/synth.hpp"

namespace propinf::models {

enum class ModelKind { logistic, mlp, bayes_exact };

struct ModelSpec {
  ModelKind kind = ModelKind::logistic;
  std::vector<int> hidden_layers;  // mlp only, e.g. {32, 16}
  void validate() const;
};

struct TrainConfig {
  enum class Optimizer { sgd, adam };
  int epochs = 40;
  int batch_size = 256;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double l2 = 0.0;
  uint64_t seed = 0;
  void validate() const;
};

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;  // class 1; 0 with the flag set when undefined
  double recall = 0.0;
  double f1 = 0.0;
  bool no_positive_predictions = false;
};

namespace detail {

// One-hot view of a dataset: each record activates one column per feature.
struct Encoded {
  size_t dim = 0;
  std::vector<size_t> offsets;            // per-feature column offset
  std::vector<std::vector<int>> active;   // per record: active column per feature
  std::vector<int> labels;
};

Encoded encode(const data::TabularDataset& ds);
std::vector<int> encode_record(const data::Schema& schema, const data::Record& r);

// Feed-forward net: one-hot input, tanh hidden layers, sigmoid head.
// Doubles throughout; forward/backward are plain loops so runs are
// bit-reproducible for a fixed seed.
struct Net {
  std::vector<int> dims;                   // [D, hidden..., 1]
  std::vector<std::vector<double>> weights;  // [l]: dims[l+1] x dims[l], row-major
  std::vector<std::vector<double>> biases;   // [l]: dims[l+1]

  void init(uint64_t seed);
  // Probability of class 1 for a one-hot record given by active columns.
  double forward(const std::vector<int>& active) const;
  // Mean cross-entropy over the batch plus (l2/2)*||W||^2; accumulates
  // parameter gradients into grad_w / grad_b (same shapes as weights/biases).
  double loss_and_grad(const Encoded& enc, const std::vector<size_t>& batch, double l2,
                       std::vector<std::vector<double>>& grad_w,
                       std::vector<std::vector<double>>& grad_b) const;
  size_t parameter_count() const;
};

}  // namespace detail

// Immutable trained classifier; confidences are clamped to
// [1e-12, 1 - 1e-12] so logits stay finite.
class TrainedModel {
 public:
  const ModelSpec& spec() const { return spec_; }
  const std::shared_ptr<const data::Schema>& schema() const { return schema_; }

  // (y0, y1), summing to 1.
  std::pair<double, double> predict_confidence(const data::Record& r) const;
  // log(y_c / y_{1-c}); antisymmetric in the class argument by construction.
  double logit(const data::Record& r, int cls) const;
  // argmax label; y1 > 0.5 predicts 1.
  int predict_label(const data::Record& r) const;

  std::string to_json() const;
  static TrainedModel from_json(const std::string& json_text);
  void save(const std::string& path) const;
  static TrainedModel load(const std::string& path);

  // Internal access for construction and for the gradient-check tests.
  static TrainedModel from_net(ModelSpec spec, std::shared_ptr<const data::Schema> schema,
                               detail::Net net);
  static TrainedModel from_bayes(std::shared_ptr<const data::Schema> schema,
                                 std::map<std::vector<int>, double> cell_p_y1);
  const detail::Net* net() const { return net_ ? &*net_ : nullptr; }

 private:
  ModelSpec spec_;
  std::shared_ptr<const data::Schema> schema_;
  std::optional<detail::Net> net_;
  std::map<std::vector<int>, double> bayes_p_y1_;  // full assignment -> P[Y=1|x]
};

// Mini-batch gradient descent on binary cross-entropy. Deterministic for a
// fixed (spec, record order, cfg.seed). Throws "training diverged" when the
// loss leaves the finite range.
TrainedModel train(const ModelSpec& spec, const data::TabularDataset& ds,
                   const TrainConfig& cfg);

// The classifier that outputs the spec's exact conditional label
// distribution; queries outside the spec's cells throw "off-support query".
TrainedModel bayes_from_spec(const synth::SynthSpec& spec);

Metrics evaluate(const TrainedModel& model, const data::TabularDataset& ds);

// Convenience: logits of every record w.r.t. class `cls`.
std::vector<double> batch_logits(const TrainedModel& model, const data::TabularDataset& ds,
                                 int cls);

}  // namespace propinf::models
