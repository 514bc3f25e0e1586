#include <cmath>
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "fixtures.hpp"
#include "propinf/common.hpp"
#include "propinf/models.hpp"
#include "propinf/synth.hpp"

using namespace propinf;

namespace {

data::TabularDataset two_cell_separable(size_t per_cell) {
  auto schema = std::make_shared<data::Schema>();
  schema->features.push_back({"x", {"p", "q"}});
  data::TabularDataset ds;
  ds.schema = schema;
  for (size_t i = 0; i < per_cell; ++i) {
    ds.records.push_back({{0}, 1});
    ds.records.push_back({{1}, 0});
  }
  return ds;
}

}  // namespace

TEST_CASE("logistic fits a separable two-cell set") {
  data::TabularDataset ds = two_cell_separable(100);
  models::TrainConfig tc;
  tc.epochs = 200;
  tc.learning_rate = 0.05;
  tc.seed = 3;
  models::TrainedModel m = models::train({models::ModelKind::logistic, {}}, ds, tc);
  CHECK(models::evaluate(m, ds).accuracy == doctest::Approx(1.0));
}

TEST_CASE("training is bitwise deterministic under a fixed seed") {
  synth::SynthSpec spec = fixtures::make_pocket_spec();
  data::TabularDataset ds = synth::synth_sample(spec, 2000, 11);
  models::TrainConfig tc;
  tc.epochs = 5;
  tc.seed = 99;
  models::ModelSpec ms{models::ModelKind::mlp, {8, 4}};
  models::TrainedModel a = models::train(ms, ds, tc);
  models::TrainedModel b = models::train(ms, ds, tc);
  REQUIRE(a.net() != nullptr);
  REQUIRE(b.net() != nullptr);
  for (size_t l = 0; l < a.net()->weights.size(); ++l) {
    CHECK(a.net()->weights[l] == b.net()->weights[l]);
    CHECK(a.net()->biases[l] == b.net()->biases[l]);
  }
}

TEST_CASE("capacity gap on the XOR cells") {
  synth::SynthSpec spec = fixtures::make_xor_spec();
  data::TabularDataset ds = synth::synth_sample(spec, 4000, 17);

  // Oracle: exhaustive prediction over the 4 cells against the majority label.
  auto cell_accuracy = [&](const models::TrainedModel& m) {
    int correct = 0;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        data::Record r{{a, b}, 0};
        int majority = (a ^ b) ? 1 : 0;
        if (m.predict_label(r) == majority) ++correct;
      }
    return correct / 4.0;
  };

  models::TrainConfig tc;
  tc.epochs = 120;
  tc.learning_rate = 0.01;
  tc.seed = 5;
  models::TrainedModel logistic = models::train({models::ModelKind::logistic, {}}, ds, tc);
  CHECK(cell_accuracy(logistic) <= 0.75);

  models::TrainedModel mlp = models::train({models::ModelKind::mlp, {8}}, ds, tc);
  CHECK(cell_accuracy(mlp) >= 0.99);
}

TEST_CASE("bayes_from_spec reads off conditionals") {
  auto schema = std::make_shared<data::Schema>();
  schema->features.push_back({"f", {"a", "b"}});
  synth::SynthSpec spec;
  spec.schema = schema;
  spec.cells.push_back({{0}, 0.5, 0.25});
  spec.cells.push_back({{1}, 0.5, 0.9});
  spec.property = data::PropertyPredicate({{"f", "a"}});
  models::TrainedModel bayes = models::bayes_from_spec(spec);

  data::Record r{{0}, 0};
  auto [y0, y1] = bayes.predict_confidence(r);
  CHECK(y0 == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(y1 == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(bayes.logit(r, 1) == doctest::Approx(-1.0986122886681098).epsilon(1e-12));

  // Off-support: the schema admits values the spec never listed.
  auto wide = std::make_shared<data::Schema>();
  wide->features.push_back({"f", {"a", "b", "c"}});
  synth::SynthSpec sparse = spec;
  sparse.schema = wide;
  models::TrainedModel bayes2 = models::bayes_from_spec(sparse);
  CHECK_THROWS_WITH(bayes2.predict_confidence({{2}, 0}), doctest::Contains("off-support"));
}

TEST_CASE("confidences normalize and logits are antisymmetric") {
  synth::SynthSpec spec = fixtures::make_pocket_spec();
  data::TabularDataset ds = synth::synth_sample(spec, 1500, 21);
  models::TrainConfig tc;
  tc.epochs = 10;
  tc.seed = 1;
  models::TrainedModel mlp = models::train({models::ModelKind::mlp, {6}}, ds, tc);
  models::TrainedModel bayes = models::bayes_from_spec(spec);

  for (const models::TrainedModel* m : {&mlp, &bayes}) {
    for (size_t i = 0; i < 300; ++i) {
      const data::Record& r = ds.records[i * 5 % ds.records.size()];
      auto [y0, y1] = m->predict_confidence(r);
      CHECK(std::fabs(y0 + y1 - 1.0) < 1e-9);
      CHECK(y0 > 0.0);
      CHECK(y1 < 1.0);
      CHECK(m->logit(r, 0) == -m->logit(r, 1));
    }
  }
}

TEST_CASE("forward pass matches hand arithmetic on a two-weight logistic") {
  auto schema = std::make_shared<data::Schema>();
  schema->features.push_back({"x", {"p", "q"}});
  models::detail::Net net;
  net.dims = {2, 1};
  net.weights = {{0.7, -1.3}};
  net.biases = {{0.25}};
  models::TrainedModel m = models::TrainedModel::from_net(
      {models::ModelKind::logistic, {}}, schema, net);

  auto sigmoid = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  CHECK(m.predict_confidence({{0}, 0}).second ==
        doctest::Approx(sigmoid(0.7 + 0.25)).epsilon(1e-15));
  CHECK(m.predict_confidence({{1}, 0}).second ==
        doctest::Approx(sigmoid(-1.3 + 0.25)).epsilon(1e-15));

  // All-zero parameters leave the output at (0.5, 0.5) and the logit at 0.
  models::detail::Net zero;
  zero.dims = {2, 1};
  zero.weights = {{0.0, 0.0}};
  zero.biases = {{0.0}};
  models::TrainedModel mz = models::TrainedModel::from_net(
      {models::ModelKind::logistic, {}}, schema, zero);
  auto [y0, y1] = mz.predict_confidence({{0}, 0});
  CHECK(y0 == 0.5);
  CHECK(y1 == 0.5);
  CHECK(mz.logit({{0}, 0}, 1) == 0.0);
}

TEST_CASE("logit values on pinned confidences") {
  // y = e/(1+e) has logit exactly 1.
  auto schema = std::make_shared<data::Schema>();
  schema->features.push_back({"f", {"a"}});
  synth::SynthSpec spec;
  spec.schema = schema;
  double e = std::exp(1.0);
  spec.cells.push_back({{0}, 1.0, e / (1.0 + e)});
  spec.property = data::PropertyPredicate({{"f", "a"}});
  models::TrainedModel m = models::bayes_from_spec(spec);
  CHECK(m.logit({{0}, 0}, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.logit({{0}, 0}, 0) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central finite differences") {
  synth::SynthSpec spec = fixtures::make_pocket_spec();
  data::TabularDataset ds = synth::synth_sample(spec, 64, 31);
  models::detail::Encoded enc = models::detail::encode(ds);

  models::detail::Net net;
  net.dims = {static_cast<int>(enc.dim), 7, 3, 1};
  net.init(123);

  std::vector<size_t> batch;
  for (size_t i = 0; i < 32; ++i) batch.push_back(i);
  const double l2 = 0.01;

  std::vector<std::vector<double>> gw, gb;
  net.loss_and_grad(enc, batch, l2, gw, gb);

  auto loss_at = [&]() {
    std::vector<std::vector<double>> tw, tb;
    return net.loss_and_grad(enc, batch, l2, tw, tb);
  };

  const double h = 1e-5;
  int checked = 0;
  Rng pick(7);
  for (size_t l = 0; l < net.weights.size(); ++l) {
    for (int rep = 0; rep < 12; ++rep) {
      size_t i = pick.next_below(net.weights[l].size());
      double saved = net.weights[l][i];
      net.weights[l][i] = saved + h;
      double up = loss_at();
      net.weights[l][i] = saved - h;
      double down = loss_at();
      net.weights[l][i] = saved;
      double fd = (up - down) / (2.0 * h);
      double scale = std::max({std::fabs(fd), std::fabs(gw[l][i]), 1e-8});
      CHECK(std::fabs(fd - gw[l][i]) / scale < 1e-4);
      ++checked;
    }
    // And one bias per layer.
    size_t i = pick.next_below(net.biases[l].size());
    double saved = net.biases[l][i];
    net.biases[l][i] = saved + h;
    double up = loss_at();
    net.biases[l][i] = saved - h;
    double down = loss_at();
    net.biases[l][i] = saved;
    double fd = (up - down) / (2.0 * h);
    double scale = std::max({std::fabs(fd), std::fabs(gb[l][i]), 1e-8});
    CHECK(std::fabs(fd - gb[l][i]) / scale < 1e-4);
  }
  CHECK(checked > 0);
}

TEST_CASE("evaluate against a hand confusion matrix") {
  // Deterministic model: predicts 1 exactly on value "a".
  auto schema = std::make_shared<data::Schema>();
  schema->features.push_back({"f", {"a", "b"}});
  synth::SynthSpec spec;
  spec.schema = schema;
  spec.cells.push_back({{0}, 0.5, 0.99});
  spec.cells.push_back({{1}, 0.5, 0.01});
  spec.property = data::PropertyPredicate({{"f", "a"}});
  models::TrainedModel m = models::bayes_from_spec(spec);

  data::TabularDataset ds;
  ds.schema = schema;
  // predictions: a->1, b->0. Records: (a,1) TP, (a,0) FP, (a,1) TP,
  // (b,0) TN, (b,1) FN, (b,0) TN  => TP=2 FP=1 TN=2 FN=1.
  ds.records = {{{0}, 1}, {{0}, 0}, {{0}, 1}, {{1}, 0}, {{1}, 1}, {{1}, 0}};
  models::Metrics metrics = models::evaluate(m, ds);
  CHECK(metrics.accuracy == doctest::Approx(4.0 / 6.0));
  CHECK(metrics.precision == doctest::Approx(2.0 / 3.0));
  CHECK(metrics.recall == doctest::Approx(2.0 / 3.0));
  CHECK(metrics.f1 == doctest::Approx(2.0 / 3.0));
  CHECK_FALSE(metrics.no_positive_predictions);

  // All-correct run has F1 = 1.
  data::TabularDataset perfect;
  perfect.schema = schema;
  perfect.records = {{{0}, 1}, {{1}, 0}};
  CHECK(models::evaluate(m, perfect).f1 == doctest::Approx(1.0));

  // A model that never predicts positive sets the flag.
  synth::SynthSpec negative = spec;
  negative.cells[0].p_y1 = 0.01;
  models::Metrics none = models::evaluate(models::bayes_from_spec(negative), ds);
  CHECK(none.no_positive_predictions);
  CHECK(none.precision == 0.0);
  CHECK(none.f1 == 0.0);
}

TEST_CASE("model json round-trip preserves predictions") {
  synth::SynthSpec spec = fixtures::make_pocket_spec();
  data::TabularDataset ds = synth::synth_sample(spec, 800, 41);
  models::TrainConfig tc;
  tc.epochs = 8;
  tc.seed = 2;
  models::TrainedModel m = models::train({models::ModelKind::mlp, {5}}, ds, tc);
  models::TrainedModel back = models::TrainedModel::from_json(m.to_json());
  for (size_t i = 0; i < 50; ++i) {
    const data::Record& r = ds.records[i];
    CHECK(back.logit(r, 1) == m.logit(r, 1));
  }

  models::TrainedModel bayes = models::bayes_from_spec(spec);
  models::TrainedModel bayes_back = models::TrainedModel::from_json(bayes.to_json());
  CHECK(bayes_back.logit(ds.records[0], 1) == bayes.logit(ds.records[0], 1));
}

TEST_CASE("exploding learning rate reports divergence") {
  data::TabularDataset ds = two_cell_separable(64);
  models::TrainConfig tc;
  tc.epochs = 30;
  tc.learning_rate = 1e308;  // adam momentum keeps stepping until overflow
  CHECK_THROWS_WITH(models::train({models::ModelKind::logistic, {}}, ds, tc),
                    doctest::Contains("diverged"));
}

TEST_CASE("train rejects unusable configs") {
  data::TabularDataset ds = two_cell_separable(4);
  models::TrainConfig tc;
  CHECK_THROWS(models::train({models::ModelKind::bayes_exact, {}}, ds, tc));
  data::TabularDataset empty;
  empty.schema = ds.schema;
  CHECK_THROWS(models::train({models::ModelKind::logistic, {}}, empty, tc));
  CHECK_THROWS(models::train({models::ModelKind::logistic, {7}}, ds, tc));
  tc.epochs = 0;
  CHECK_THROWS(models::train({models::ModelKind::logistic, {}}, ds, tc));
}
