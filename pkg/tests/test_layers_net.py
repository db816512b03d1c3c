import numpy as np
import pytest
from groupseg.dataset import regions_from_sample
from groupseg.errors import CacheError, ConfigError, FormatError, SchemaError, ShapeError
from groupseg.head import GroupedPrediction, loss_ce, loss_grouped
from groupseg.layers import NORM_EPS, conv2d_backward, conv2d_forward, he_uniform, instance_norm_backward, instance_norm_forward, maxpool_backward, maxpool_forward, relu_forward, upsample_backward, upsample_forward
from groupseg.net import Model, ModelConfig, backward, checkpoint_from_bytes, checkpoint_to_bytes, forward, parse_model_config, read_checkpoint, write_checkpoint
from groupseg.presets import suncg_schema
from groupseg.random_dist import derive_rng
from groupseg.tools import numerical_gradient, relative_error


def naive_conv(x, w, b):
    k = w.shape[0]
    pad = k // 2
    padded = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    batch, height, width, _ = x.shape
    y = np.zeros((batch, height, width, w.shape[3]))
    for n in range(batch):
        for r in range(height):
            for c in range(width):
                y[n, r, c] = np.tensordot(padded[n, r:r + k, c:c + k], w, axes=3) + b
    return y


def test_conv_matches_naive_loop():
    rng = derive_rng(1)
    x = rng.normal(size=(2, 5, 6, 3))
    for k in (1, 3, 5):
        w = rng.normal(size=(k, k, 3, 4))
        b = rng.normal(size=4)
        np.testing.assert_allclose(conv2d_forward(x, w, b)[0], naive_conv(x, w, b), atol=1e-12)


def test_conv_shape_errors():
    x = np.zeros((1, 4, 4, 2))
    with pytest.raises(ShapeError):
        conv2d_forward(x, np.zeros((2, 2, 2, 1)))
    with pytest.raises(ShapeError):
        conv2d_forward(x, np.zeros((3, 3, 3, 1)))


def test_conv_gradient():
    rng = derive_rng(2)
    x = rng.normal(size=(2, 4, 5, 3))
    w = rng.normal(size=(3, 3, 3, 2))
    b = rng.normal(size=2)
    upstream = rng.normal(size=(2, 4, 5, 2))
    objective = lambda: float(np.sum(conv2d_forward(x, w, b)[0] * upstream))
    dx, dw, db = conv2d_backward(upstream, conv2d_forward(x, w, b)[1])
    np.testing.assert_allclose(dx.reshape(-1), numerical_gradient(objective, x), rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(dw.reshape(-1), numerical_gradient(objective, w), rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(db, numerical_gradient(objective, b), rtol=1e-6, atol=1e-8)


def test_instance_norm():
    rng = derive_rng(3)
    x = rng.normal(loc=3, scale=2, size=(2, 4, 4, 3))
    y, cache = instance_norm_forward(x)
    np.testing.assert_allclose(y.mean(axis=(1, 2)), 0, atol=1e-12)
    np.testing.assert_allclose(y.var(axis=(1, 2)), x.var(axis=(1, 2)) / (x.var(axis=(1, 2)) + NORM_EPS), rtol=1e-10)
    upstream = rng.normal(size=x.shape)
    numeric = numerical_gradient(lambda: float(np.sum(instance_norm_forward(x)[0] * upstream)), x)
    np.testing.assert_allclose(instance_norm_backward(upstream, cache).reshape(-1), numeric, rtol=1e-5, atol=1e-7)


def test_maxpool_and_upsample():
    x = np.array([[1.0, 1.0, 0.0, 2.0], [0.0, 1.0, 3.0, 2.0]]).reshape(1, 2, 4, 1)
    y, cache = maxpool_forward(x)
    np.testing.assert_array_equal(y.reshape(-1), [1.0, 3.0])
    grad = maxpool_backward(np.array([5.0, 7.0]).reshape(1, 1, 2, 1), cache)
    np.testing.assert_array_equal(grad.reshape(2, 4), [[5.0, 0.0, 0.0, 0.0], [0.0, 0.0, 7.0, 0.0]])
    with pytest.raises(ShapeError):
        maxpool_forward(np.zeros((1, 3, 4, 1)))

    rng = derive_rng(4)
    small = rng.normal(size=(2, 3, 2, 4))
    up = upsample_forward(small)
    assert up.shape == (2, 6, 4, 4)
    upstream = rng.normal(size=up.shape)
    assert np.sum(up * upstream) == pytest.approx(np.sum(small * upsample_backward(upstream)))


def test_relu_and_init():
    y, mask = relu_forward(np.array([-1.0, 0.0, 2.0]))
    np.testing.assert_array_equal(y, [0.0, 0.0, 2.0])
    np.testing.assert_array_equal(mask, [False, False, True])
    w = he_uniform(derive_rng(5), (3, 3, 4, 8))
    assert np.abs(w).max() <= np.sqrt(6 / 36)
    assert w.dtype == np.float64


def test_parameter_counts_differ_by_head_only():
    schema = suncg_schema(True)
    for width in (4, 16):
        flat = Model(ModelConfig(width=width, mode="dss"), schema)
        grouped = Model(ModelConfig(width=width, mode="gss"), schema)
        assert grouped.parameter_count - flat.parameter_count == (46 - 36) * (width + 1)
        for name in flat.params:
            if not name.startswith("head"):
                np.testing.assert_array_equal(flat.params[name], grouped.params[name])


def test_forward_shapes_and_zero_head(toy):
    model = Model(ModelConfig(width=4, levels=2), toy, seed=1)
    logits = forward(model, np.ones((2, 8, 8)))
    assert logits.shape == (2, 8, 8, toy.activation_count)
    assert not logits.any()
    prediction = model.predict(np.ones((8, 8)))
    assert isinstance(prediction, GroupedPrediction)
    np.testing.assert_allclose(prediction.p, 1 / 3)
    flat = Model(ModelConfig(width=4, levels=2, mode="dss"), toy).predict(np.ones((1, 8, 8)))
    np.testing.assert_allclose(flat, 1 / 8)
    with pytest.raises(ShapeError):
        model.forward(np.ones((6, 8)))
    with pytest.raises(ShapeError):
        model.forward(np.ones((1, 8, 8, 2)))


def test_backward_needs_forward(toy):
    model = Model(ModelConfig(width=2, levels=1), toy)
    with pytest.raises(CacheError):
        backward(model, np.zeros((1, 4, 4, toy.activation_count)))
    model.forward(np.ones((4, 4)))
    with pytest.raises(CacheError):
        model.backward(np.zeros((1, 4, 4, 3)))
    model.clear_cache()
    with pytest.raises(CacheError):
        model.backward(np.zeros((1, 4, 4, toy.activation_count)))


@pytest.mark.parametrize("mode", ["gss", "dss"])
def test_network_gradient(toy, toy_scenes, mode):
    rng = derive_rng(6)
    sample = toy_scenes[0]
    depth = sample.depth[:8, :8].astype(np.float64)
    maps = sample.group_maps[:, :8, :8]
    sample = sample.replace(depth=depth, visible=sample.visible[:8, :8], group_maps=maps)
    regions = regions_from_sample(sample, toy)
    model = Model(ModelConfig(width=4, levels=2, mode=mode, dtype="float64"), toy, seed=3)
    model.params["head.w"][...] = rng.normal(scale=0.5, size=model.params["head.w"].shape)
    model.params["head.b"][...] = rng.normal(scale=0.5, size=model.params["head.b"].shape)

    def objective():
        logits = model.forward(depth)[0]
        if mode == "gss": return loss_grouped(logits, regions, toy).loss
        return loss_ce(logits, sample.visible).loss

    logits = model.forward(depth)[0]
    value = loss_grouped(logits, regions, toy) if mode == "gss" else loss_ce(logits, sample.visible)
    grads = model.backward(value.grad[None])
    for name, param in model.params.items():
        indices = rng.choice(param.size, size=min(6, param.size), replace=False)
        numeric = numerical_gradient(objective, param, indices)
        analytic = grads[name].reshape(-1)[indices]
        error = relative_error(analytic, numeric, floor=1e-6)
        assert error.max() < 1e-3, name


def test_backward_is_linear_in_the_upstream_gradient(toy, toy_scenes):
    rng = derive_rng(8)
    depth = toy_scenes[1].depth[None, :8, :8].astype(np.float64)
    model = Model(ModelConfig(width=4, levels=2, dtype="float64"), toy, seed=2)
    model.params["head.w"][...] = rng.normal(scale=0.5, size=model.params["head.w"].shape)
    upstream = rng.normal(size=(1, 8, 8, toy.activation_count))

    model.forward(depth)
    zero = model.backward(np.zeros_like(upstream))
    model.forward(depth)
    single = model.backward(upstream)
    model.forward(depth)
    double = model.backward(2.0 * upstream)

    assert list(single) == list(model.params)
    assert np.abs(single["enc0"]).max() > 0
    for name in model.params:
        assert not zero[name].any(), name
        np.testing.assert_allclose(double[name], 2.0 * single[name], rtol=1e-12, atol=1e-300)


def test_model_config_parsing():
    config = parse_model_config("width 8\nlevels 2\nmode dss\npre_sigmoid true\n")
    assert (config.width, config.levels, config.mode, config.pre_sigmoid) == (8, 2, "dss", True)
    assert parse_model_config(config.to_config()) == config
    assert config.replace(mode="gss").mode == "gss"
    with pytest.raises(ConfigError) as info:
        parse_model_config("width 8\nlevels two\n", "model.cfg")
    assert info.value.line == 2
    with pytest.raises(ConfigError):
        parse_model_config("kernel 4\n")
    with pytest.raises(ConfigError):
        parse_model_config("mode both\n")
    with pytest.raises(ConfigError):
        parse_model_config("depth 3\n")


def test_checkpoint_round_trip(toy, tmp_path):
    model = Model(ModelConfig(width=4, levels=2), toy, seed=9)
    model.params["head.w"][...] = 0.25
    path = str(tmp_path / "model.gssm")
    moments = {"adam.m.head.b": np.ones(toy.activation_count)}
    write_checkpoint(path, model, moments, {"epoch": 3})
    checkpoint = read_checkpoint(path, toy)
    assert checkpoint.info["epoch"] == 3
    assert checkpoint.model.config == model.config
    assert checkpoint.model.fingerprint == model.fingerprint
    for name, value in model.params.items():
        np.testing.assert_array_equal(checkpoint.model.params[name], value)
    np.testing.assert_array_equal(checkpoint.blocks["adam.m.head.b"], 1.0)
    depth = np.linspace(1, 9, 64).reshape(8, 8)
    np.testing.assert_array_equal(checkpoint.model.forward(depth), model.forward(depth))
    assert checkpoint_to_bytes(checkpoint.model, checkpoint.blocks, {"epoch": 3}) == checkpoint_to_bytes(model, moments, {"epoch": 3})


def test_checkpoint_errors(toy, tmp_path):
    model = Model(ModelConfig(width=2, levels=1), toy)
    data = checkpoint_to_bytes(model)
    with pytest.raises(FormatError, match="magic"):
        checkpoint_from_bytes(b"GSS1" + data[4:])
    with pytest.raises(FormatError):
        checkpoint_from_bytes(data[:-3])
    with pytest.raises(FormatError, match="trailing"):
        checkpoint_from_bytes(data + b"\0\0")
    path = str(tmp_path / "model.gssm")
    write_checkpoint(path, model)
    with pytest.raises(SchemaError):
        read_checkpoint(path, suncg_schema())
    with pytest.raises(FormatError):
        read_checkpoint(str(tmp_path / "missing.gssm"))
