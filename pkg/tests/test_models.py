import numpy as np
import pytest

from cfwgan.autodiff import ShapeError, Tensor
from cfwgan.models import (
    MlpSpec,
    Network,
    discriminator_forward,
    discriminator_spec,
    generator_forward,
    generator_spec,
    init_params,
    layer_names,
)


def test_init_bounds_and_zero_biases():
    spec = MlpSpec((512, 1682))
    params = init_params(spec, 0)
    assert np.abs(params["l00.W"]).max() < np.sqrt(6 / 2194)
    assert np.all(params["l00.b"] == 0)


def test_init_is_seeded():
    spec = generator_spec(20, 8)
    a, b, c = init_params(spec, 1), init_params(spec, 1), init_params(spec, 2)
    assert all(np.array_equal(a[k], b[k]) for k in a)
    assert not np.array_equal(a["l00.W"], c["l00.W"])


def test_generator_output_range_and_shape():
    spec = generator_spec(1682, 512)
    net = Network.init(spec, 0)
    x = (np.random.default_rng(0).random((3, 1682)) < 0.1).astype(float)
    out = net.predict(x)
    assert out.shape == (3, 1682)
    assert np.all((out > 0) & (out < 1))


def test_zero_generator_outputs_half():
    spec = generator_spec(6, 4, layers=2)
    zero = init_params(spec, 0).zeros_like()
    out = generator_forward(spec, zero.tensors(False), np.ones((2, 6))).value
    np.testing.assert_array_equal(out, 0.5)


def test_discriminator_input_is_condition_then_vector():
    n = 3
    spec = discriminator_spec(n, 4)
    assert spec.n_in == 2 * n and spec.n_out == 1 and spec.output == "identity"
    params = init_params(spec, 0).zeros_like()
    w, _ = layer_names(0)
    params[w][:n, 0] = 1.0  # hidden unit 0 reads only the condition half
    params["l01.W"][0, 0] = 1.0
    cond, vec = np.array([[1.0, 1.0, 0.0]]), np.array([[0.0, 0.0, 5.0]])
    assert discriminator_forward(spec, params.tensors(False), vec, cond).item() == 2.0
    assert discriminator_forward(spec, params.tensors(False), cond, vec).item() == 5.0


def test_zero_discriminator_is_zero():
    spec = discriminator_spec(5, 3)
    zero = init_params(spec, 0).zeros_like()
    out = discriminator_forward(spec, zero.tensors(False), np.ones((4, 5)), np.zeros((4, 5)))
    np.testing.assert_array_equal(out.value, 0.0)


def test_forward_is_pure():
    net = Network.init(generator_spec(10, 5), 3)
    x = np.eye(10)[:4]
    assert np.array_equal(net.predict(x), net.predict(x))
    assert np.array_equal(net.predict(x, batch_size=1), net.predict(x))


def test_shape_errors():
    spec = generator_spec(5, 3)
    with pytest.raises(ShapeError):
        generator_forward(spec, init_params(spec, 0).tensors(False), np.ones((2, 4)))
    d = discriminator_spec(5, 3)
    with pytest.raises(ShapeError):
        discriminator_forward(d, init_params(d, 0).tensors(False), np.ones((2, 5)), np.ones((3, 5)))
    with pytest.raises(ValueError):
        MlpSpec((3,))


def test_preset_sizes():
    assert generator_spec(1682, 512).sizes == (1682, 512, 1682)
    assert discriminator_spec(1682, 512).sizes == (3364, 512, 1)
