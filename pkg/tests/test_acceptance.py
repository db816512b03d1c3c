"""Desk-scale comparison of the flat and the grouped head (long running, marked slow)."""

import pytest
from groupseg.net import ModelConfig
from groupseg.presets import default_thresholds, toy_scene_spec, toy_schema
from groupseg.scenegen import generate_dataset
from groupseg.training import TrainConfig, evaluate_model, train


@pytest.mark.slow
def test_grouped_head_recovers_occluded_regions():
    schema = toy_schema()
    manifest = generate_dataset(toy_scene_spec(size=64), schema, default_thresholds(), 500, 100, seed=7, threads=None)
    train_set = [sample for split, sample in manifest["data"] if split == "train"]
    test_set = [sample for split, sample in manifest["data"] if split == "test"]
    settings = TrainConfig(learning_rate=2e-3, lr_decay=0.5, decay_every=6, epochs=12, batch_size=10, seed=1)

    reports = {}
    for mode in ("dss", "gss"):
        result = train(train_set, schema, ModelConfig(width=8, levels=3, mode=mode), settings)
        reports[mode] = evaluate_model(result.model, test_set, threads=None)

    dss, gss = reports["dss"], reports["gss"]
    assert gss["pa_pres_void"] > dss["pa_pres_void"]
    assert gss["miou_pres_void"] > dss["miou_pres_void"]
    assert abs(gss["pa_vis"] - dss["pa_vis"]) <= 0.05
    assert gss.data["plausibility"]["mean"] < 0.05


@pytest.mark.slow
def test_grouped_head_overfits_a_small_training_set(toy, toy_scenes):
    samples = toy_scenes[:10]
    settings = TrainConfig(learning_rate=3e-3, lr_decay=0.5, decay_every=100, epochs=200, batch_size=2, weight_decay=0.0, seed=1)
    result = train(samples, toy, ModelConfig(width=16, levels=2, mode="gss"), settings)
    assert result.history[-1]["train"]["pa_vis"] >= 0.95
    assert result.history[-1]["loss"] < result.history[0]["loss"]
