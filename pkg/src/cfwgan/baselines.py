"""Non-adversarial baselines: a one-hidden-layer multi-label classifier and ItemPop."""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .adversarial import LOG_EPS, AdamState, adam_step, rng_for
from .autodiff import NonFiniteError, Tensor
from .data import InteractionMatrix, SplitDataset
from .errors import NumericalAbort
from .evaluation import LearningCurve, MetricsReport, evaluate_model
from .models import MlpSpec, Network, layer_names, mlp_forward

_log = logging.getLogger(__name__)

_ORDER, _DROPOUT, _INIT = range(3)


@dataclass
class MlcHyperParams:
    lr: float = 1e-4
    l2: float = 1e-5
    hidden: int = 256
    dropout: float = 0.8
    batch_size: int = 64
    max_epochs: int = 1000
    eval_every: int = 5
    patience: int = 10
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        checks = [
            ("dropout", 0 <= self.dropout < 1),
            ("l2", self.l2 >= 0),
            ("lr", self.lr > 0),
            ("hidden", self.hidden >= 1),
            ("batch_size", self.batch_size >= 1),
            ("max_epochs", self.max_epochs >= 1),
            ("eval_every", self.eval_every >= 1),
            ("patience", self.patience >= 1),
        ]
        for name, ok in checks:
            if not ok:
                raise ValueError(f"invalid hyperparameter {name}={getattr(self, name)!r}")

    def as_dict(self) -> dict:
        return asdict(self)


def mlc_spec(n_items: int, hidden: int) -> MlpSpec:
    return MlpSpec((n_items, hidden, n_items), output="sigmoid")


def dropout_mask(rng: np.random.Generator, shape, p: float) -> np.ndarray:
    """Inverted-dropout mask: zero with probability ``p``, else ``1 / (1 - p)``."""
    if p == 0:
        return np.ones(shape)
    return (rng.random(shape) >= p) / (1.0 - p)


def bce(predicted: Tensor, target: np.ndarray) -> Tensor:
    """Mean binary cross-entropy over all entries."""
    target = np.asarray(target, dtype=np.float64)
    pos = ad.mul(ad.log(ad.clamp_min(predicted, LOG_EPS)), Tensor(target))
    neg = ad.mul(ad.log(ad.clamp_min(ad.sub(1.0, predicted), LOG_EPS)), Tensor(1.0 - target))
    return ad.neg(ad.mean(ad.add(pos, neg)))


def mlc_loss(
    spec: MlpSpec,
    params,
    condition: np.ndarray,
    target: np.ndarray,
    l2: float = 0.0,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Binary cross-entropy of ``M(condition)`` against ``target`` plus ``l2 * sum ||W||^2``.

    Dropout on the hidden layer is applied only when ``rng`` is given.
    """
    hook = None
    if rng is not None and dropout > 0:
        def hook(h: Tensor) -> Tensor:
            return ad.mul(h, Tensor(dropout_mask(rng, h.shape, dropout)))

    predicted = mlp_forward(spec, params, Tensor(condition), dropout=hook)
    loss = bce(predicted, target)
    if l2 > 0:
        penalty = None
        for i in range(spec.n_layers):
            term = ad.sum(ad.square(params[layer_names(i)[0]]))
            penalty = term if penalty is None else ad.add(penalty, term)
        loss = ad.add(loss, ad.mul(penalty, l2))
    return loss


@dataclass
class MlcResult:
    model: Network
    curve: LearningCurve
    best_epoch: int
    epochs_run: int
    losses: list[tuple[int, float]] = field(default_factory=list)


def train_mlc_matrix(
    known: InteractionMatrix,
    hp: MlcHyperParams,
    evaluate: Callable[[Network, int], MetricsReport] | None = None,
    epochs: int | None = None,
) -> MlcResult:
    """Fit the classifier to reproduce each user's known interactions from themselves."""
    hp.validate()
    dense = known.to_dense()
    m, n = dense.shape
    model = Network.init(mlc_spec(n, hp.hidden), [hp.seed, _INIT])
    state = AdamState.for_params(model.params)
    bs = min(hp.batch_size, m)
    max_epochs = epochs or hp.max_epochs

    curve = LearningCurve()
    best, best_epoch, best_score, bad = model.copy(), 0, -np.inf, 0
    losses = []
    epoch = 0
    for epoch in range(1, max_epochs + 1):
        order = rng_for(hp.seed, epoch, _ORDER).permutation(m)
        total = 0.0
        for step, start in enumerate(range(0, m, bs)):
            x = dense[order[start : start + bs]]
            pt = model.tensors()
            try:
                loss = mlc_loss(model.spec, pt, x, x, hp.l2, hp.dropout, rng_for(hp.seed, epoch, step, _DROPOUT))
                adam_step(model.params, ad.backward(loss, pt), state, hp.lr, hp.beta1, hp.beta2)
            except NonFiniteError as exc:
                raise NumericalAbort(f"non-finite value at epoch {epoch}, step {step}: {exc}") from exc
            total += loss.item() * len(x)
        losses.append((epoch, total / m))

        if evaluate is not None and epochs is None and (epoch % hp.eval_every == 0 or epoch == max_epochs):
            report = evaluate(model, epoch)
            curve.add(epoch, "valid", report)
            _log.info("epoch %d: loss %.5f, valid N@20 %.4f", epoch, total / m, report.N20)
            if report.N20 > best_score:
                best, best_epoch, best_score, bad = model.copy(), epoch, report.N20, 0
            else:
                bad += 1
                if bad >= hp.patience:
                    break

    if evaluate is None or epochs is not None:
        return MlcResult(model, curve, epoch, epoch, losses)
    return MlcResult(best, curve, best_epoch, epoch, losses)


def train_mlc(
    split: SplitDataset,
    hp: MlcHyperParams,
    eval_hook: Callable[[Network, int], MetricsReport] | None = None,
    include_validation: bool = False,
    epochs: int | None = None,
) -> MlcResult:
    known = split.train_full() if include_validation else split.train
    if eval_hook is None and not include_validation and epochs is None:
        def eval_hook(model: Network, epoch: int) -> MetricsReport:
            return evaluate_model(model.predict, split, "valid")
    return train_mlc_matrix(known, hp, eval_hook, epochs)


def itempop_scores(known: InteractionMatrix | SplitDataset) -> np.ndarray:
    """Item popularity (number of known interactions), identical for every user."""
    if isinstance(known, SplitDataset):
        known = known.train
    return known.item_counts().astype(np.float64)
