#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "propinf/attack.hpp"
#include "propinf/data.hpp"
#include "propinf/harness.hpp"
#include "propinf/models.hpp"
#include "propinf/poison.hpp"
#include "propinf/synth.hpp"
#include "propinf/theory.hpp"

namespace py = pybind11;
using namespace propinf;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Property inference attack laboratory (C++ core)";

  // ---- data ----
  py::class_<data::Record>(m, "Record")
      .def(py::init<>())
      .def_readwrite("values", &data::Record::values)
      .def_readwrite("label", &data::Record::label);

  py::class_<data::TabularDataset>(m, "TabularDataset")
      .def("__len__", [](const data::TabularDataset& ds) { return ds.size(); })
      .def_property_readonly("records",
                             [](const data::TabularDataset& ds) { return ds.records; })
      .def("feature_names", [](const data::TabularDataset& ds) {
        std::vector<std::string> names;
        for (const auto& f : ds.schema->features) names.push_back(f.name);
        return names;
      })
      .def("value", [](const data::TabularDataset& ds, size_t row, size_t feature) {
        const auto& r = ds.records.at(row);
        return ds.schema->features.at(feature).values.at(r.values.at(feature));
      });

  py::class_<data::PropertyPredicate>(m, "PropertyPredicate")
      .def(py::init<std::vector<std::pair<std::string, std::string>>>())
      .def("clauses", &data::PropertyPredicate::clauses)
      .def("implies", &data::PropertyPredicate::implies);

  m.def("load_csv", &data::load_csv, py::arg("path"), py::arg("label_column"));
  m.def("write_csv", &data::write_csv, py::arg("dataset"), py::arg("path"),
        py::arg("label_column") = "label");
  m.def("construct_world", &data::construct_world, py::arg("pool"), py::arg("predicate"),
        py::arg("t"), py::arg("n"), py::arg("seed"));
  m.def("sample_query_set", &data::sample_query_set, py::arg("pool"), py::arg("predicate"),
        py::arg("v"), py::arg("m"), py::arg("seed"),
        py::arg("exclude") = std::vector<size_t>{});
  m.def("split", &data::split, py::arg("pool"), py::arg("ratio"), py::arg("seed"));
  m.def("concat", &data::concat, py::arg("a"), py::arg("b"));

  // ---- synth ----
  py::class_<synth::SynthSpec>(m, "SynthSpec")
      .def_static("from_json", &synth::SynthSpec::from_json)
      .def_static("load", &synth::SynthSpec::load)
      .def("to_json", &synth::SynthSpec::to_json)
      .def("save", &synth::SynthSpec::save)
      .def_property_readonly("property",
                             [](const synth::SynthSpec& s) { return s.property; });
  m.def("synth_sample", &synth::synth_sample, py::arg("spec"), py::arg("n"), py::arg("seed"));
  m.def("exact_marginals", &synth::exact_marginals, py::arg("spec"), py::arg("v"));
  m.def("mix_poison_spec", &synth::mix_poison_spec, py::arg("spec"), py::arg("v"),
        py::arg("v_target"), py::arg("p"));

  // ---- models ----
  py::class_<models::Metrics>(m, "Metrics")
      .def_readonly("accuracy", &models::Metrics::accuracy)
      .def_readonly("precision", &models::Metrics::precision)
      .def_readonly("recall", &models::Metrics::recall)
      .def_readonly("f1", &models::Metrics::f1)
      .def_readonly("no_positive_predictions", &models::Metrics::no_positive_predictions);

  py::class_<models::TrainedModel>(m, "TrainedModel")
      .def("predict_confidence", &models::TrainedModel::predict_confidence)
      .def("logit", &models::TrainedModel::logit)
      .def("predict_label", &models::TrainedModel::predict_label)
      .def("to_json", &models::TrainedModel::to_json)
      .def_static("from_json", &models::TrainedModel::from_json)
      .def("save", &models::TrainedModel::save)
      .def_static("load", &models::TrainedModel::load);

  m.def(
      "train",
      [](const std::string& kind, const std::vector<int>& hidden_layers,
         const data::TabularDataset& ds, int epochs, int batch_size, double learning_rate,
         const std::string& optimizer, double l2, uint64_t seed) {
        models::ModelSpec spec;
        spec.kind = kind == "mlp" ? models::ModelKind::mlp : models::ModelKind::logistic;
        if (spec.kind == models::ModelKind::mlp) spec.hidden_layers = hidden_layers;
        models::TrainConfig cfg;
        cfg.epochs = epochs;
        cfg.batch_size = batch_size;
        cfg.learning_rate = learning_rate;
        cfg.optimizer = optimizer == "sgd" ? models::TrainConfig::Optimizer::sgd
                                           : models::TrainConfig::Optimizer::adam;
        cfg.l2 = l2;
        cfg.seed = seed;
        return models::train(spec, ds, cfg);
      },
      py::arg("kind"), py::arg("hidden_layers"), py::arg("dataset"), py::arg("epochs") = 40,
      py::arg("batch_size") = 256, py::arg("learning_rate") = 1e-3,
      py::arg("optimizer") = "adam", py::arg("l2") = 0.0, py::arg("seed") = 0);
  m.def("bayes_from_spec", &models::bayes_from_spec);
  m.def("evaluate", &models::evaluate);
  m.def("batch_logits", &models::batch_logits);

  // ---- theory ----
  py::class_<theory::PoisonedMoments>(m, "PoisonedMoments")
      .def_readonly("M", &theory::PoisonedMoments::M)
      .def_readonly("V", &theory::PoisonedMoments::V)
      .def_readonly("mu_tilde", &theory::PoisonedMoments::mu_tilde)
      .def_readonly("sigma_tilde_sq", &theory::PoisonedMoments::sigma_tilde_sq);

  py::class_<theory::ThresholdResult>(m, "ThresholdResult")
      .def_readonly("T", &theory::ThresholdResult::T)
      .def_readonly("alpha", &theory::ThresholdResult::alpha)
      .def_readonly("beta", &theory::ThresholdResult::beta)
      .def_property_readonly("mode", [](const theory::ThresholdResult& r) {
        return r.mode == theory::ThresholdMode::equal_sigma ? "equal_sigma" : "general";
      });

  py::class_<theory::LabelOnlyRate>(m, "LabelOnlyRate")
      .def_readonly("p_lo", &theory::LabelOnlyRate::p_lo)
      .def_readonly("p_hi", &theory::LabelOnlyRate::p_hi)
      .def_readonly("p_star", &theory::LabelOnlyRate::p_star)
      .def_readonly("lo_already_positive", &theory::LabelOnlyRate::lo_already_positive);

  m.def("poisoned_logit", &theory::poisoned_logit, py::arg("p"), py::arg("t"),
        py::arg("pi_v"), py::arg("phi"));
  m.def(
      "poisoned_moments",
      [](double p, double t, double pi_v, double mu, double sigma) {
        return theory::poisoned_moments({p, t, pi_v, mu, sigma});
      },
      py::arg("p"), py::arg("t"), py::arg("pi_v"), py::arg("mu"), py::arg("sigma"));
  m.def(
      "optimal_threshold",
      [](double mu0, double sigma0, double mu1, double sigma1) {
        return theory::optimal_threshold({mu0, sigma0, mu1, sigma1});
      },
      py::arg("mu0"), py::arg("sigma0"), py::arg("mu1"), py::arg("sigma1"));
  m.def("required_queries", &theory::required_queries, py::arg("alpha"), py::arg("beta"),
        py::arg("epsilon"));
  m.def("select_poison_rate_by_variance", &theory::select_poison_rate_by_variance,
        py::arg("t0"), py::arg("t1"), py::arg("pi_v"), py::arg("mu"), py::arg("sigma"),
        py::arg("var_threshold") = 0.15, py::arg("p_max") = 0.25, py::arg("step") = 0.001);
  m.def("label_only_rate", &theory::label_only_rate, py::arg("t0"), py::arg("t1"),
        py::arg("pi_v"), py::arg("mu"), py::arg("sigma"));

  // ---- poison ----
  py::class_<poison::PoisonSet>(m, "PoisonSet")
      .def_readonly("records", &poison::PoisonSet::records)
      .def_readonly("source_indices", &poison::PoisonSet::source_indices)
      .def_readonly("victim_label", &poison::PoisonSet::victim_label)
      .def_readonly("target_label", &poison::PoisonSet::target_label);

  m.def("choose_labels", &poison::choose_labels, py::arg("pool"), py::arg("predicate"));
  m.def(
      "build_poison_set",
      [](const data::TabularDataset& pool, const data::PropertyPredicate& target_property,
         py::object rate, py::object count, size_t n, uint64_t seed) {
        poison::PoisonConfig cfg;
        cfg.target_property = target_property;
        if (!rate.is_none()) cfg.rate = rate.cast<double>();
        if (!count.is_none()) cfg.count = count.cast<size_t>();
        return poison::build_poison_set(pool, cfg, n, seed);
      },
      py::arg("pool"), py::arg("target_property"), py::arg("rate") = py::none(),
      py::arg("count") = py::none(), py::arg("n") = 0, py::arg("seed") = 0);

  // ---- attack ----
  py::class_<attack::AttackConfig>(m, "AttackConfig")
      .def_static("from_json", &attack::AttackConfig::from_json)
      .def("to_json", &attack::AttackConfig::to_json);

  py::class_<attack::DistinguishingTest>(m, "DistinguishingTest")
      .def_readonly("threshold", &attack::DistinguishingTest::threshold)
      .def_readonly("larger_mean_world", &attack::DistinguishingTest::larger_mean_world)
      .def_readonly("victim_label", &attack::DistinguishingTest::victim_label)
      .def_readonly("target_label", &attack::DistinguishingTest::target_label);

  py::class_<attack::AttackOutcome>(m, "AttackOutcome")
      .def_readonly("guess", &attack::AttackOutcome::guess)
      .def_readonly("votes_above_T", &attack::AttackOutcome::votes_above_T)
      .def_readonly("total_queries", &attack::AttackOutcome::total_queries)
      .def("to_json", &attack::AttackOutcome::to_json);

  py::class_<attack::ConfidenceLearning>(m, "ConfidenceLearning")
      .def_readonly("test", &attack::ConfidenceLearning::test)
      .def_readonly("query_pool", &attack::ConfidenceLearning::query_pool);

  m.def(
      "learn_confidence_model",
      [](const std::string& config_json, const data::TabularDataset& pool) {
        return attack::learn_confidence_model(attack::AttackConfig::from_json(config_json),
                                              pool);
      },
      py::arg("config_json"), py::arg("attacker_pool"));
  m.def("distinguish", &attack::distinguish, py::arg("test"), py::arg("target"),
        py::arg("query_set"));
  m.def("label_only_distinguish", &attack::label_only_distinguish, py::arg("target_label"),
        py::arg("target"), py::arg("query_set"));

  py::class_<attack::EstimationStep>(m, "EstimationStep")
      .def_readonly("t_hat", &attack::EstimationStep::t_hat)
      .def_readonly("overlap", &attack::EstimationStep::overlap)
      .def_readonly("left_count", &attack::EstimationStep::left_count)
      .def_readonly("right_count", &attack::EstimationStep::right_count)
      .def_readonly("search_lo", &attack::EstimationStep::search_lo)
      .def_readonly("search_hi", &attack::EstimationStep::search_hi);

  py::class_<attack::EstimationTrace>(m, "EstimationTrace")
      .def_readonly("iterations", &attack::EstimationTrace::iterations)
      .def_readonly("estimate", &attack::EstimationTrace::estimate)
      .def_readonly("shadow_models_trained", &attack::EstimationTrace::shadow_models_trained)
      .def_property_readonly("stop_reason",
                             [](const attack::EstimationTrace& t) {
                               return t.reason == attack::EstimationStop::overlap
                                          ? "overlap"
                                          : "iteration_cap";
                             })
      .def("to_json", &attack::EstimationTrace::to_json);

  m.def(
      "estimate_property_size",
      [](const data::PropertyPredicate& property, double poison_rate, size_t n,
         const data::TabularDataset& attacker_pool, const models::TrainedModel& target,
         size_t query_size, int k_per_guess, double precision, int max_iter,
         double overlap_threshold, uint64_t seed, const std::string& model_kind,
         const std::vector<int>& hidden_layers, int epochs, double learning_rate) {
        attack::EstimationConfig cfg;
        cfg.property = property;
        cfg.poison_rate = poison_rate;
        cfg.n = n;
        cfg.query_size = query_size;
        cfg.k_per_guess = k_per_guess;
        cfg.precision = precision;
        cfg.max_iter = max_iter;
        cfg.overlap_threshold = overlap_threshold;
        cfg.seed = seed;
        cfg.model.kind =
            model_kind == "mlp" ? models::ModelKind::mlp : models::ModelKind::logistic;
        if (cfg.model.kind == models::ModelKind::mlp) cfg.model.hidden_layers = hidden_layers;
        cfg.train.epochs = epochs;
        cfg.train.learning_rate = learning_rate;
        return attack::estimate_property_size(cfg, attacker_pool, target);
      },
      py::arg("property"), py::arg("poison_rate"), py::arg("n"), py::arg("attacker_pool"),
      py::arg("target"), py::arg("query_size") = 1000, py::arg("k_per_guess") = 2,
      py::arg("precision") = 0.001, py::arg("max_iter") = 6,
      py::arg("overlap_threshold") = 0.95, py::arg("seed") = 0,
      py::arg("model_kind") = "logistic", py::arg("hidden_layers") = std::vector<int>{},
      py::arg("epochs") = 40, py::arg("learning_rate") = 1e-3);
}
