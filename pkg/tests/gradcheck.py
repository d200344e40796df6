"""Finite-difference checks of whole training losses on small random instances."""

from dataclasses import dataclass

import numpy as np

from cfwgan import autodiff as ad
from cfwgan.adversarial import Batch, discriminator_loss, generator_loss, sample_masks
from cfwgan.autodiff import Tensor
from cfwgan.baselines import mlc_loss, mlc_spec
from cfwgan.models import (
    discriminator_forward,
    discriminator_spec,
    generator_forward,
    generator_spec,
    init_params,
)


def jitter_biases(params, rng):
    """Fresh layers have zero biases, which puts all-zero input rows exactly on a ReLU kink."""
    for name in params:
        if name.endswith(".b"):
            params[name] = rng.normal(0.0, 0.3, params[name].shape)
    return params


def relative_error(a, b) -> float:
    a, b = np.ravel(a), np.ravel(b)
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if scale == 0 else float(np.linalg.norm(a - b) / scale)


def check_params_gradient(loss_fn, params, h=1e-6) -> float:
    """Relative error between the AD gradient and central differences over every parameter."""
    tensors = params.tensors()
    analytic = ad.backward(loss_fn(tensors), tensors)
    numeric = {}
    for name in params:
        def f(value, name=name):
            trial = params.tensors(requires_grad=False)
            trial[name] = Tensor(value)
            # recording stays on: the gradient penalty needs an input gradient even here
            return loss_fn(trial).item()
        numeric[name] = ad.finite_difference(f, params[name], h)
    names = sorted(params)
    return relative_error(
        np.concatenate([analytic[k].ravel() for k in names]),
        np.concatenate([numeric[k].ravel() for k in names]),
    )


@dataclass
class Instance:
    n: int
    batch: Batch
    g_spec: object
    d_spec: object
    g_params: object
    d_params: object
    eps: np.ndarray
    alpha: float


def random_instance(seed: int) -> Instance:
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 8))
    b = int(rng.integers(2, 5))
    real = np.zeros((b, n))
    k = np.zeros((b, n))
    zr = np.zeros((b, n))
    for i in range(b):
        pos = rng.choice(n, int(rng.integers(1, n - 1)), replace=False)
        real[i, pos] = 1.0
        s = sample_masks(np.sort(pos), n, 0.5, 0.5, rng)
        k[i, s.pm] = 1.0
        zr[i, s.zr] = 1.0
    layers = int(rng.integers(1, 3))
    g_spec = generator_spec(n, int(rng.integers(3, 7)), layers)
    d_spec = discriminator_spec(n, int(rng.integers(3, 7)), layers)
    return Instance(
        n,
        Batch(np.arange(b), real, k, zr),
        g_spec,
        d_spec,
        jitter_biases(init_params(g_spec, [seed, 1]), rng),
        jitter_biases(init_params(d_spec, [seed, 2]), rng),
        rng.uniform(size=(b, 1)),
        float(rng.uniform(0.01, 0.2)),
    )


def _generated(inst: Instance) -> np.ndarray:
    with ad.no_grad():
        return generator_forward(inst.g_spec, inst.g_params.tensors(False), inst.batch.condition).value


def critic_loss_error(inst: Instance, variant: str, gp_weight: float = 10.0) -> float:
    fake = _generated(inst)

    def loss(t):
        critic = lambda v, c: discriminator_forward(inst.d_spec, t, v, c)  # noqa: E731
        return discriminator_loss(variant, critic, fake, inst.batch, gp_weight, inst.eps)

    return check_params_gradient(loss, inst.d_params)


def generator_loss_error(inst: Instance, variant: str) -> float:
    d_t = inst.d_params.tensors(False)
    critic = lambda v, c: discriminator_forward(inst.d_spec, d_t, v, c)  # noqa: E731

    def loss(t):
        generated = generator_forward(inst.g_spec, t, inst.batch.condition)
        return generator_loss(variant, critic, generated, inst.batch, inst.alpha, zr=True)

    return check_params_gradient(loss, inst.g_params)


def mlc_loss_error(seed: int) -> float:
    rng = np.random.default_rng(seed)
    n, h, b = int(rng.integers(4, 8)), int(rng.integers(3, 7)), int(rng.integers(2, 5))
    x = (rng.random((b, n)) < 0.4).astype(float)
    spec = mlc_spec(n, h)
    params = jitter_biases(init_params(spec, [seed, 3]), rng)

    def loss(t):
        # a fresh generator with the same seed keeps the dropout mask fixed across evaluations
        return mlc_loss(spec, t, x, x, l2=1e-3, dropout=0.3, rng=np.random.default_rng(seed))

    return check_params_gradient(loss, params)
