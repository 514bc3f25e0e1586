"""Smoke tests for the Python bindings: exercise the main operations end to end."""

import json
import math

import pytest

import propinf


SPEC_JSON = json.dumps(
    {
        "features": [
            {"name": "grp", "values": ["g0", "g1", "g2", "g3"]},
            {"name": "shade", "values": ["s0", "s1", "s2"]},
        ],
        "cells": [
            {
                "assign": {"grp": f"g{g}", "shade": f"s{s}"},
                "prob": (0.30 if g == 0 else 0.70 / 3) / 3,
                "p_y1": (0.10 + 0.02 * (s - 1)) if g == 0 else 0.45 + 0.1 * (s - 1),
            }
            for g in range(4)
            for s in range(3)
        ],
        "property": [{"feature": "grp", "value": "g0"}],
    }
)


@pytest.fixture(scope="module")
def spec():
    return propinf.SynthSpec.from_json(SPEC_JSON)


def test_spec_roundtrip_and_marginals(spec):
    back = propinf.SynthSpec.from_json(spec.to_json())
    t, pi0 = propinf.exact_marginals(back, 0)
    assert t == pytest.approx(0.30)
    assert pi0 == pytest.approx(0.90)


def test_sampling_and_csv(tmp_path, spec):
    ds = propinf.synth_sample(spec, 2000, 7)
    assert len(ds) == 2000
    path = str(tmp_path / "sample.csv")
    propinf.write_csv(ds, path, "label")
    back = propinf.load_csv(path, "label")
    assert len(back) == 2000
    assert back.feature_names() == ["grp", "shade"]


def test_poisoned_logit_formula():
    c = 0.03 / (0.97 * 0.01)
    assert propinf.poisoned_logit(0.03, 0.01, 1.0, 0.0) == pytest.approx(
        math.log(2 * c + 1), abs=1e-12
    )
    assert propinf.poisoned_logit(0.0, 0.05, 0.9, -1.25) == -1.25


def test_theorem1_exactness_via_bayes(spec):
    p = 0.05
    t, pi0 = propinf.exact_marginals(spec, 0)
    clean = propinf.bayes_from_spec(spec)
    poisoned = propinf.bayes_from_spec(propinf.mix_poison_spec(spec, 0, 1, p))
    ds = propinf.synth_sample(spec, 500, 3)
    checked = 0
    for i, r in enumerate(ds.records):
        if ds.value(i, 0) != "g0" or r.label != 0:
            continue
        phi = clean.logit(r, 1)
        assert poisoned.logit(r, 1) == pytest.approx(
            propinf.poisoned_logit(p, t, pi0, phi), abs=1e-9
        )
        checked += 1
    assert checked > 0


def test_train_and_evaluate(spec):
    ds = propinf.synth_sample(spec, 3000, 11)
    model = propinf.train("logistic", [], ds, epochs=20, learning_rate=0.02, seed=1)
    metrics = propinf.evaluate(model, ds)
    assert 0.5 < metrics.accuracy <= 1.0
    y0, y1 = model.predict_confidence(ds.records[0])
    assert y0 + y1 == pytest.approx(1.0, abs=1e-9)
    assert model.logit(ds.records[0], 0) == -model.logit(ds.records[0], 1)


def test_model_json_roundtrip(spec):
    ds = propinf.synth_sample(spec, 800, 13)
    model = propinf.train("mlp", [6], ds, epochs=5, seed=4)
    back = propinf.TrainedModel.from_json(model.to_json())
    for i in range(20):
        assert back.logit(ds.records[i], 1) == model.logit(ds.records[i], 1)


def test_threshold_and_queries():
    r = propinf.optimal_threshold(0.0, 1.0, 2.0, 1.0)
    assert r.T == pytest.approx(1.0)
    assert r.mode == "equal_sigma"
    assert propinf.required_queries(0.2, 0.2, 0.001) == 54


def test_rate_selection_and_pstar():
    p = propinf.select_poison_rate_by_variance(0.02, 0.08, 0.9, -2.0, 1.0)
    assert 0 < p <= 0.25
    rate = propinf.label_only_rate(0.01, 0.035, 0.9, -2.0, 0.5)
    assert 0 < rate.p_lo < rate.p_hi
    assert rate.p_star == pytest.approx(math.sqrt(rate.p_lo * rate.p_hi))


def test_size_estimation(spec):
    pool = propinf.synth_sample(spec, 20000, 77)
    poison = propinf.build_poison_set(pool, spec.property, rate=0.02, n=2000, seed=1)
    world = propinf.construct_world(pool, spec.property, 0.08, 2000 - len(poison.records), 2)
    target = propinf.train(
        "logistic", [], propinf.concat(world, poison.records),
        epochs=30, learning_rate=0.02, seed=3,
    )
    trace = propinf.estimate_property_size(
        spec.property, 0.02, 2000, pool, target,
        query_size=300, epochs=30, learning_rate=0.02, seed=4,
    )
    assert trace.iterations[0].t_hat == pytest.approx(0.5)
    assert trace.shadow_models_trained <= 12
    assert len(trace.iterations) <= 6
    assert 0.0 <= trace.estimate <= 0.5


def test_attack_pipeline(spec):
    pool = propinf.synth_sample(spec, 16000, 21)
    config = {
        "property": [{"feature": "grp", "value": "g0"}],
        "t0": 0.02,
        "t1": 0.20,
        "n": 1500,
        "k": 1,
        "query_size": 200,
        "root_seed": 9,
        "poison": {
            "target_property": [{"feature": "grp", "value": "g0"}],
            "rate": 0.02,
        },
        "model": {"kind": "logistic"},
        "train": {"epochs": 25, "learning_rate": 0.02},
    }
    learned = propinf.learn_confidence_model(json.dumps(config), pool)
    assert learned.test.threshold.alpha + learned.test.threshold.beta < 0.2

    poison = propinf.build_poison_set(pool, spec.property, rate=0.02, n=1500, seed=6)
    world = propinf.construct_world(pool, spec.property, 0.20, 1500 - len(poison.records), 5)
    target = propinf.train(
        "logistic", [], propinf.concat(world, poison.records),
        epochs=25, learning_rate=0.02, seed=2,
    )
    d_q = propinf.sample_query_set(pool, spec.property, 0, 200, 31)
    outcome = propinf.distinguish(learned.test, target, d_q)
    assert outcome.guess == 1
    label_only = propinf.label_only_distinguish(1, target, d_q)
    assert label_only.total_queries == 200
