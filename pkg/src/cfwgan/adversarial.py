"""Conditional WGAN-GP / GAN training over interaction vectors.

The generator maps a user's condition vector (their known interactions) to
a score for every item.  The critic sees ``[condition, vector]`` where the
vector is either the real interaction vector or the generator output masked
by ``x_u + k_u``; ``k_u`` marks the partially-masked negatives (PM) that stay
visible.  The generator is also penalised on a sampled set of negatives
(ZR, zero reconstruction).
"""

from __future__ import annotations

import enum
import logging
from collections.abc import Callable
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit

from . import autodiff as ad
from .autodiff import NonFiniteError, ParamSet, Tensor
from .data import InteractionMatrix, SplitDataset
from .errors import NumericalAbort
from .evaluation import LearningCurve, MetricsReport, evaluate_model
from .models import Network, discriminator_forward, discriminator_spec, generator_forward, generator_spec

_log = logging.getLogger(__name__)

LOG_EPS = 1e-7

# stream ids for the counter-based RNG keys
_D_BATCH, _D_MASK, _D_GP, _G_ORDER, _G_MASK, _INIT_G, _INIT_D = range(7)


class LossVariant(str, enum.Enum):
    WGAN_GP = "WGAN_GP"
    VANILLA_GAN = "VANILLA_GAN"


@dataclass
class GanHyperParams:
    lr: float = 1e-4
    d_iter: int = 5
    gp_weight: float = 10.0
    alpha: float = 0.04
    p_zr: float = 0.7
    p_pm: float = 0.6
    beta1: float = 0.0
    beta2: float = 0.9
    batch_size: int = 64
    max_epochs: int = 1000
    eval_every: int = 5
    patience: int = 10
    seed: int = 0
    loss: LossVariant = LossVariant.WGAN_GP
    zr: bool = True
    pm: bool = True
    g_layers: int = 1
    g_hidden: int = 512
    d_layers: int = 1
    d_hidden: int = 512

    def __post_init__(self):
        self.loss = LossVariant(self.loss)
        self.validate()

    def validate(self) -> None:
        checks = [
            ("p_zr", 0 <= self.p_zr <= 1),
            ("p_pm", 0 <= self.p_pm <= 1),
            ("gp_weight", self.gp_weight >= 0),
            ("alpha", self.alpha >= 0),
            ("d_iter", self.d_iter >= 1),
            ("lr", self.lr > 0),
            ("beta1", 0 <= self.beta1 < 1),
            ("beta2", 0 <= self.beta2 < 1),
            ("batch_size", self.batch_size >= 1),
            ("max_epochs", self.max_epochs >= 1),
            ("eval_every", self.eval_every >= 1),
            ("patience", self.patience >= 1),
            ("g_layers", self.g_layers >= 1),
            ("g_hidden", self.g_hidden >= 1),
            ("d_layers", self.d_layers >= 1),
            ("d_hidden", self.d_hidden >= 1),
        ]
        for name, ok in checks:
            if not ok:
                raise ValueError(f"invalid hyperparameter {name}={getattr(self, name)!r}")

    def as_dict(self) -> dict:
        d = asdict(self)
        d["loss"] = self.loss.value
        return d


def rng_for(*key: int) -> np.random.Generator:
    """Independent generator for an integer key such as (seed, epoch, step, stream, user)."""
    return np.random.default_rng([int(k) for k in key])


# ---------------------------------------------------------------------------
# masks


@dataclass(frozen=True)
class MaskSample:
    user: int
    zr: np.ndarray
    pm: np.ndarray
    k: np.ndarray


def _mask_size(p: float, n_neg: int) -> int:
    return min(int(np.floor(p * n_neg + 0.5)), n_neg)


def sample_masks(
    positives: np.ndarray, n_items: int, p_zr: float, p_pm: float, rng: np.random.Generator, user: int = -1
) -> MaskSample:
    """Draw ZR and PM item sets independently from the user's negatives."""
    negatives = np.setdiff1d(np.arange(n_items), positives, assume_unique=True)
    zr = np.sort(rng.choice(negatives, _mask_size(p_zr, len(negatives)), replace=False))
    pm = np.sort(rng.choice(negatives, _mask_size(p_pm, len(negatives)), replace=False))
    k = np.zeros(n_items)
    k[pm] = 1.0
    return MaskSample(user, zr, pm, k)


@dataclass
class Batch:
    """Dense per-step inputs; ``real`` doubles as the condition vector."""

    users: np.ndarray
    real: np.ndarray
    k: np.ndarray
    zr: np.ndarray

    @property
    def condition(self) -> np.ndarray:
        return self.real

    @property
    def fake_mask(self) -> np.ndarray:
        return self.real + self.k


def make_batch(
    rows: tuple[np.ndarray, ...],
    dense: np.ndarray,
    users: np.ndarray,
    p_zr: float,
    p_pm: float,
    key: tuple[int, ...],
) -> Batch:
    n = dense.shape[1]
    k = np.zeros((len(users), n))
    zr = np.zeros((len(users), n))
    for i, u in enumerate(users):
        if p_zr == 0 and p_pm == 0:
            break
        s = sample_masks(rows[u], n, p_zr, p_pm, rng_for(*key, u), int(u))
        k[i, s.pm] = 1.0
        zr[i, s.zr] = 1.0
    return Batch(np.asarray(users), dense[users], k, zr)


# ---------------------------------------------------------------------------
# losses

Critic = Callable[[Tensor, Tensor], Tensor]


def gradient_penalty(critic: Critic, real, fake, condition, gp_weight: float, eps) -> Tensor:
    """``gp_weight * mean((||grad_v critic(v | c)|| - 1)^2)`` on real/fake interpolates.

    ``eps`` holds one mixing weight per row (or a generator to draw them);
    the condition is not interpolated.
    """
    if gp_weight < 0:
        raise ValueError("gp_weight must be non-negative")
    real = np.asarray(real, dtype=np.float64)
    fake = fake.value if isinstance(fake, Tensor) else np.asarray(fake, dtype=np.float64)
    if isinstance(eps, np.random.Generator):
        eps = eps.uniform(0.0, 1.0, size=(real.shape[0], 1))
    eps = np.asarray(eps, dtype=np.float64).reshape(-1, 1)
    mixed = eps * real + (1.0 - eps) * fake
    cond = ad.as_tensor(condition)
    g = ad.grad_wrt_input(lambda v: critic(v, cond), mixed)
    gap = ad.sub(ad.l2norm(g, axis=1), 1.0)
    return ad.mul(ad.mean(ad.square(gap)), gp_weight)


def _log_clamped(x: Tensor) -> Tensor:
    return ad.log(ad.clamp_min(x, LOG_EPS))


def discriminator_loss(
    variant: LossVariant,
    critic: Critic,
    generated: np.ndarray,
    batch: Batch,
    gp_weight: float = 10.0,
    eps=None,
) -> Tensor:
    """Critic loss for one batch; ``generated`` is the detached generator output."""
    variant = LossVariant(variant)
    generated = generated.value if isinstance(generated, Tensor) else np.asarray(generated)
    cond = Tensor(batch.condition)
    fake = Tensor(generated * batch.fake_mask)
    d_real = critic(Tensor(batch.real), cond)
    d_fake = critic(fake, cond)
    if variant is LossVariant.WGAN_GP:
        loss = ad.sub(ad.mean(d_fake), ad.mean(d_real))
        if gp_weight > 0:
            if eps is None:
                raise ValueError("eps (or an rng) is required for the gradient penalty")
            loss = ad.add(loss, gradient_penalty(critic, batch.real, fake, cond, gp_weight, eps))
        return loss
    p_real = ad.sigmoid(d_real)
    p_fake = ad.sigmoid(d_fake)
    ll = ad.add(_log_clamped(p_real), _log_clamped(ad.sub(1.0, p_fake)))
    return ad.neg(ad.mean(ll))


def zr_penalty(generated: Tensor, zr_mask: np.ndarray, alpha: float) -> Tensor:
    """Per-row ``alpha * sum_{j in ZR_u} xhat_j^2``."""
    return ad.mul(ad.sum(ad.mul(ad.square(generated), Tensor(zr_mask)), axis=1, keepdims=True), alpha)


def generator_loss(
    variant: LossVariant,
    critic: Critic,
    generated: Tensor,
    batch: Batch,
    alpha: float = 0.0,
    zr: bool = True,
) -> Tensor:
    """Generator loss; ``critic`` must close over constant critic weights."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    variant = LossVariant(variant)
    cond = Tensor(batch.condition)
    d_fake = critic(ad.mul(generated, Tensor(batch.fake_mask)), cond)
    if variant is LossVariant.WGAN_GP:
        per_row = ad.neg(d_fake)
    else:
        per_row = _log_clamped(ad.sub(1.0, ad.sigmoid(d_fake)))
    if zr and alpha > 0:
        per_row = ad.add(per_row, zr_penalty(generated, batch.zr, alpha))
    return ad.mean(per_row)


# ---------------------------------------------------------------------------
# optimiser


@dataclass
class AdamState:
    m: ParamSet
    v: ParamSet
    t: int = 0

    @classmethod
    def for_params(cls, params: ParamSet) -> AdamState:
        return cls(params.zeros_like(), params.zeros_like(), 0)


@njit(cache=True, nogil=True, error_model="numpy")
def _adam_kernel(p, g, m, v, lr, beta1, beta2, eps, bc1, bc2):  # pragma: no cover - compiled
    for i in range(p.size):
        gi = g[i]
        mi = beta1 * m[i] + (1.0 - beta1) * gi
        vi = beta2 * v[i] + (1.0 - beta2) * gi * gi
        m[i] = mi
        v[i] = vi
        p[i] -= lr * (mi / bc1) / (np.sqrt(vi / bc2) + eps)


def adam_step(
    params: ParamSet,
    grads,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[ParamSet, AdamState]:
    """One bias-corrected Adam update, in place."""
    state.t += 1
    bc1 = 1.0 - beta1**state.t
    bc2 = 1.0 - beta2**state.t
    for name in params:
        p, g = params[name], np.ascontiguousarray(grads[name], dtype=np.float64)
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {name} {p.shape}")
        _adam_kernel(
            p.reshape(-1), g.reshape(-1), state.m[name].reshape(-1), state.v[name].reshape(-1),
            lr, beta1, beta2, eps, bc1, bc2,
        )
    return params, state


# ---------------------------------------------------------------------------
# training loop


@dataclass
class GanResult:
    generator: Network
    discriminator: Network
    curve: LearningCurve
    best_epoch: int
    epochs_run: int
    losses: list[tuple[int, float, float]] = field(default_factory=list)


def build_networks(n_items: int, hp: GanHyperParams) -> tuple[Network, Network]:
    g = Network.init(generator_spec(n_items, hp.g_hidden, hp.g_layers), [hp.seed, _INIT_G])
    d = Network.init(discriminator_spec(n_items, hp.d_hidden, hp.d_layers), [hp.seed, _INIT_D])
    return g, d


def mean_negative_output(generator: Network, known: InteractionMatrix) -> float:
    """Average generator score over every user's non-interacted items."""
    dense = known.to_dense()
    out = generator.predict(dense)
    neg = dense == 0
    per_user = (out * neg).sum(axis=1) / np.maximum(neg.sum(axis=1), 1)
    return float(per_user.mean())


def _critic(d: Network, tensors) -> Critic:
    return lambda v, c: discriminator_forward(d.spec, tensors, v, c)


def train_gan(
    train: InteractionMatrix,
    hp: GanHyperParams,
    evaluate: Callable[[Network, int], MetricsReport] | None = None,
    epochs: int | None = None,
    monitor: Callable[[Network, int], bool] | None = None,
) -> GanResult:
    """Alternate ``d_iter`` critic updates with one generator update.

    An epoch is ``ceil(m / batch_size)`` generator updates over a shuffled
    user order.  With ``evaluate`` set, validation N@20 is checked every
    ``eval_every`` epochs and training stops after ``patience`` checks
    without improvement; the best generator is returned.  ``epochs``
    overrides ``max_epochs`` and disables early stopping.  ``monitor`` is
    called after every epoch and ends training when it returns True.
    """
    hp.validate()
    dense = train.to_dense()
    m, n = dense.shape
    rows = train.rows
    G, D = build_networks(n, hp)
    g_state, d_state = AdamState.for_params(G.params), AdamState.for_params(D.params)
    p_zr = hp.p_zr if hp.zr else 0.0
    p_pm = hp.p_pm if hp.pm else 0.0
    bs = min(hp.batch_size, m)
    steps = -(-m // bs)
    max_epochs = epochs or hp.max_epochs

    curve = LearningCurve()
    best = (G.copy(), D.copy())
    best_epoch, best_score, bad = 0, -np.inf, 0
    losses = []
    epoch = 0
    for epoch in range(1, max_epochs + 1):
        order = rng_for(hp.seed, epoch, 0, _G_ORDER).permutation(m)
        d_loss = g_loss = np.nan
        for step in range(steps):
            try:
                for it in range(hp.d_iter):
                    sub = step * hp.d_iter + it
                    users = rng_for(hp.seed, epoch, sub, _D_BATCH).choice(m, bs, replace=False)
                    batch = make_batch(rows, dense, users, 0.0, p_pm, (hp.seed, epoch, sub, _D_MASK))
                    generated = G.predict(batch.condition)
                    dt = D.tensors()
                    loss = discriminator_loss(
                        hp.loss, _critic(D, dt), generated, batch, hp.gp_weight,
                        rng_for(hp.seed, epoch, sub, _D_GP),
                    )
                    d_loss = loss.item()
                    adam_step(D.params, ad.backward(loss, dt), d_state, hp.lr, hp.beta1, hp.beta2)

                users = order[step * bs : (step + 1) * bs]
                batch = make_batch(rows, dense, users, p_zr, p_pm, (hp.seed, epoch, step, _G_MASK))
                gt = G.tensors()
                generated = generator_forward(G.spec, gt, batch.condition)
                loss = generator_loss(hp.loss, _critic(D, D.tensors(False)), generated, batch, hp.alpha, hp.zr)
                g_loss = loss.item()
                adam_step(G.params, ad.backward(loss, gt), g_state, hp.lr, hp.beta1, hp.beta2)
            except NonFiniteError as exc:
                raise NumericalAbort(
                    f"non-finite value at epoch {epoch}, step {step}: {exc} "
                    f"(last D loss {d_loss}, last G loss {g_loss})"
                ) from exc
        losses.append((epoch, d_loss, g_loss))
        _log.debug("epoch %d: D loss %.5f, G loss %.5f", epoch, d_loss, g_loss)
        if monitor is not None and monitor(G, epoch):
            break

        if evaluate is not None and epochs is None and (epoch % hp.eval_every == 0 or epoch == max_epochs):
            report = evaluate(G, epoch)
            curve.add(epoch, "valid", report)
            _log.info("epoch %d: valid N@20 %.4f P@5 %.4f", epoch, report.N20, report.P5)
            if report.N20 > best_score:
                best_score, best_epoch, bad = report.N20, epoch, 0
                best = (G.copy(), D.copy())
            else:
                bad += 1
                if bad >= hp.patience:
                    break

    if evaluate is None or epochs is not None:
        return GanResult(G, D, curve, epoch, epoch, losses)
    return GanResult(best[0], best[1], curve, best_epoch, epoch, losses)


def train(
    split: SplitDataset,
    hp: GanHyperParams,
    eval_hook: Callable[[Network, int], MetricsReport] | None = None,
    include_validation: bool = False,
    epochs: int | None = None,
) -> GanResult:
    """Train on a split; by default early-stops on the validation interactions."""
    known = split.train_full() if include_validation else split.train
    if eval_hook is None and not include_validation and epochs is None:
        def eval_hook(g: Network, epoch: int) -> MetricsReport:
            return evaluate_model(g.predict, split, "valid")
    return train_gan(known, hp, eval_hook, epochs)
