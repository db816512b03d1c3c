import json
import numpy as np
import pytest
from groupseg.dataset import regions_from_sample
from groupseg.errors import ConfigError, DivergenceError, SchemaError, ShapeError
from groupseg.head import GroupedPrediction
from groupseg.metrics import evaluate_predictions
from groupseg.net import Model, ModelConfig, read_checkpoint
from groupseg.presets import suncg_schema
from groupseg.training import CHECKPOINT_NAME, HISTORY_NAME, AdamState, TrainConfig, adam_step, evaluate_model, infer, parse_train_config, predict_samples, train, uniform_loss


MODEL = ModelConfig(width=4, levels=2)
SETTINGS = TrainConfig(learning_rate=1e-2, decay_every=1, lr_decay=0.5, epochs=2, batch_size=4, seed=3)


def test_learning_rate_schedule():
    config = TrainConfig(learning_rate=1e-3)
    assert config.lr_at(0) == pytest.approx(1e-3)
    assert config.lr_at(9) == pytest.approx(1e-3)
    assert config.lr_at(10) == pytest.approx(1e-4)
    assert config.lr_at(25) == pytest.approx(1e-5)


def test_parse_train_config():
    config = parse_train_config("learning_rate 0.01\nlambda 0.2\nepochs 5\n")
    assert (config.learning_rate, config.lam, config.epochs) == (0.01, 0.2, 5)
    assert parse_train_config(config.to_config()) == config
    with pytest.raises(ConfigError) as info:
        parse_train_config("epochs 5\nbatch_size many\n", "train.cfg")
    assert info.value.line == 2
    with pytest.raises(ConfigError):
        parse_train_config("learning_rate -1\n")
    with pytest.raises(ConfigError):
        parse_train_config("momentum 0.9\n")


def test_adam_first_step(toy):
    model = Model(ModelConfig(width=2, levels=1, dtype="float64"), toy)
    before = {name: value.copy() for name, value in model.params.items()}
    grads = {name: np.full(value.shape, -2.0) for name, value in model.params.items()}
    config = TrainConfig(learning_rate=0.1, weight_decay=0.01)
    state = AdamState(model)
    adam_step(model, grads, config, state)
    assert state.step == 1
    for name, value in model.params.items():
        expected = before[name] - 0.1 * (-2.0 / (2.0 + config.adam_eps) + 0.01 * before[name])
        np.testing.assert_allclose(value, expected, rtol=1e-12, atol=1e-12)


def test_adam_rejects_bad_gradients(toy):
    model = Model(ModelConfig(width=2, levels=1), toy)
    state = AdamState(model)
    grads = {name: np.zeros(value.shape, dtype=value.dtype) for name, value in model.params.items()}
    grads["head.b"][0] = np.nan
    with pytest.raises(DivergenceError):
        adam_step(model, grads, TrainConfig(), state)
    assert state.step == 0
    with pytest.raises(ShapeError):
        adam_step(model, {"head.b": np.zeros(2)}, TrainConfig(), state)


def test_adam_zero_gradient_without_decay_keeps_parameters(toy):
    model = Model(ModelConfig(width=2, levels=1, dtype="float64"), toy)
    before = {name: value.copy() for name, value in model.params.items()}
    grads = {name: np.zeros(value.shape) for name, value in model.params.items()}
    state = AdamState(model)
    for _ in range(3):
        adam_step(model, grads, TrainConfig(learning_rate=0.1, weight_decay=0.0), state)
    assert state.step == 3
    for name, value in model.params.items():
        np.testing.assert_array_equal(value, before[name])


def test_adam_step_decreases_a_quadratic(toy):
    model = Model(ModelConfig(width=2, levels=1, dtype="float64"), toy, seed=4)
    state = AdamState(model)
    config = TrainConfig(learning_rate=1e-3, weight_decay=0.0)

    def objective():
        return sum(float(np.sum(value**2)) for value in model.params.values())

    values = [objective()]
    for _ in range(3):
        adam_step(model, {name: 2.0 * value for name, value in model.params.items()}, config, state)
        values.append(objective())
    assert values[1] < values[0]
    assert values == sorted(values, reverse=True)


def test_training_writes_artifacts(toy, toy_scenes, tmp_path):
    result = train(toy_scenes[:8], toy, MODEL, SETTINGS.replace(epochs=3), str(tmp_path), validation=toy_scenes[8:])
    assert [record["epoch"] for record in result.history] == [0, 1, 2]
    assert [record["lr"] for record in result.history] == pytest.approx([1e-2, 5e-3, 2.5e-3])
    assert result.history[-1]["loss"] < uniform_loss(toy_scenes[:8], toy, "gss")
    assert set(result.history[0]["validation"]) == set(result.history[0]["train"])
    assert result.state.step == 6
    lines = (tmp_path / HISTORY_NAME).read_text().splitlines()
    assert [json.loads(line)["epoch"] for line in lines] == [0, 1, 2]
    checkpoint = read_checkpoint(str(tmp_path / CHECKPOINT_NAME), toy)
    assert checkpoint.info["epoch"] == 3
    assert checkpoint.info["step"] == 6
    table = result.history_table()
    assert list(table.index) == [0, 1, 2]
    assert "train.pa_vis" in table.columns


@pytest.mark.parametrize("mode", ["gss", "dss"])
def test_resume_continues_the_schedule(toy, toy_scenes, tmp_path, mode):
    config = MODEL.replace(mode=mode)
    straight = train(toy_scenes[:8], toy, config, SETTINGS, str(tmp_path / "straight"))
    train(toy_scenes[:8], toy, config, SETTINGS.replace(epochs=1), str(tmp_path / "resumed"))
    resumed = train(toy_scenes[:8], toy, config, SETTINGS, str(tmp_path / "resumed"), resume=True)
    assert resumed.history == straight.history
    assert resumed.history[1]["lr"] == pytest.approx(5e-3)
    for name, value in straight.model.params.items():
        np.testing.assert_array_equal(resumed.model.params[name], value)
    assert (tmp_path / "straight" / CHECKPOINT_NAME).read_bytes() == (tmp_path / "resumed" / CHECKPOINT_NAME).read_bytes()


def test_training_is_reproducible(toy, toy_scenes, tmp_path):
    train(toy_scenes[:8], toy, MODEL, SETTINGS, str(tmp_path / "a"))
    train(toy_scenes[:8], toy, MODEL, SETTINGS, str(tmp_path / "b"))
    for name in (CHECKPOINT_NAME, HISTORY_NAME):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_training_input_checks(toy, toy_scenes, tmp_path):
    with pytest.raises(ConfigError):
        train([], toy, MODEL, SETTINGS)
    with pytest.raises(ConfigError):
        train(toy_scenes[:2], toy, MODEL, SETTINGS)
    train(toy_scenes[:4], toy, MODEL, SETTINGS.replace(epochs=1), str(tmp_path))
    with pytest.raises(ConfigError):
        train(toy_scenes[:4], toy, MODEL.replace(width=2), SETTINGS, str(tmp_path), resume=True)


def test_inference(toy, toy_scenes):
    model = Model(MODEL, toy)
    prediction = infer(model, toy_scenes[0])
    assert isinstance(prediction, GroupedPrediction)
    assert prediction.shape == (16, 16)
    with pytest.raises(SchemaError):
        infer(model, toy_scenes[0], suncg_schema())
    flat = Model(MODEL.replace(mode="dss"), toy)
    posteriors = predict_samples(flat, toy_scenes[:3], batch_size=2)
    assert len(posteriors) == 3
    assert posteriors[0].shape == (16, 16, toy.N)
    report = evaluate_model(flat, toy_scenes[:3])
    assert report.mode == "dss"
    assert report.data["samples"] == 3


@pytest.mark.parametrize("mode", ["gss", "dss"])
def test_initial_loss_is_the_uniform_loss(toy, toy_scenes, mode):
    samples = toy_scenes[:8]
    model = Model(MODEL.replace(mode=mode), toy)
    assert not model.forward(np.stack([sample.depth for sample in samples])).any()
    model.clear_cache()

    result = train(samples, toy, MODEL.replace(mode=mode), SETTINGS.replace(learning_rate=1e-9, epochs=1))
    assert result.history[0]["loss"] == pytest.approx(uniform_loss(samples, toy, mode), rel=1e-5)
    if mode == "dss": assert result.history[0]["loss"] == pytest.approx(np.log(toy.N), rel=1e-5)


@pytest.mark.parametrize("mode", ["gss", "dss"])
def test_inference_reproduces_the_training_metrics(toy, toy_scenes, mode):
    samples = toy_scenes[:8]
    result = train(samples, toy, MODEL.replace(mode=mode, dtype="float64"), SETTINGS)
    regions = [regions_from_sample(sample, toy) for sample in samples]
    report = evaluate_predictions(regions, [infer(result.model, sample) for sample in samples], toy)
    assert report.metrics == pytest.approx(result.history[-1]["train"], nan_ok=True)
