"""Top-k ranking and P@k / R@k / NDCG@k."""

from __future__ import annotations

from collections.abc import Callable, Iterable
from dataclasses import dataclass, field

import numpy as np

from .data import InteractionMatrix, SplitDataset

KS = (5, 20)
METRIC_COLUMNS = ("P5", "P20", "R5", "R20", "N5", "N20")


def rank_items(scores, exclude: Iterable[int] = (), k: int = 20) -> np.ndarray:
    """Top-k item indices by descending score; ties go to the lower index."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return rank_matrix(np.asarray(scores, dtype=np.float64)[None, :], [np.asarray(list(exclude), dtype=np.int64)], k)[0]


def rank_matrix(scores: np.ndarray, exclude: list[np.ndarray], k: int) -> list[np.ndarray]:
    """Row-wise :func:`rank_items` over a score matrix."""
    scores = np.array(scores, dtype=np.float64)
    allowed = np.ones(scores.shape, dtype=bool)
    for i, ex in enumerate(exclude):
        allowed[i, ex] = False
    # stable sort on the negated score keeps ascending item order within ties
    key = np.where(allowed, -scores, np.inf)
    order = np.argsort(key, axis=1, kind="stable")[:, :k]
    counts = np.minimum(allowed.sum(axis=1), k)
    return [order[i, : counts[i]] for i in range(len(order))]


def _hits(ranked, test) -> np.ndarray:
    return np.isin(np.asarray(ranked), np.asarray(list(test), dtype=np.int64))


def precision_at_k(ranked, test, k: int) -> float:
    return float(_hits(ranked[:k], test).sum()) / k


def recall_at_k(ranked, test, k: int) -> float:
    return float(_hits(ranked[:k], test).sum()) / len(test)


def _discounts(k: int) -> np.ndarray:
    return 1.0 / np.log2(np.arange(2, k + 2))


def ndcg_at_k(ranked, test, k: int) -> float:
    hits = _hits(ranked[:k], test).astype(np.float64)
    dcg = float((hits * _discounts(len(hits))).sum())
    idcg = float(_discounts(min(k, len(test))).sum())
    return dcg / idcg


@dataclass(frozen=True)
class MetricsReport:
    P5: float
    P20: float
    R5: float
    R20: float
    N5: float
    N20: float
    n_users: int = 0
    n_skipped: int = 0

    def row(self) -> dict[str, float]:
        return {c: getattr(self, c) for c in METRIC_COLUMNS}


def score_users(
    ranked_lists: list[np.ndarray], targets: list[np.ndarray]
) -> MetricsReport:
    sums = dict.fromkeys(METRIC_COLUMNS, 0.0)
    used = skipped = 0
    for ranked, test in zip(ranked_lists, targets):
        if len(test) == 0:
            skipped += 1
            continue
        used += 1
        for k in KS:
            sums[f"P{k}"] += precision_at_k(ranked, test, k)
            sums[f"R{k}"] += recall_at_k(ranked, test, k)
            sums[f"N{k}"] += ndcg_at_k(ranked, test, k)
    if used == 0:
        raise ValueError("no user has interactions in the evaluation split")
    return MetricsReport(**{c: v / used for c, v in sums.items()}, n_users=used, n_skipped=skipped)


def protocol(split: SplitDataset, tag: str) -> tuple[InteractionMatrix, InteractionMatrix]:
    """(known interactions, target interactions) for a split tag."""
    if tag == "valid":
        return split.train, split.valid
    if tag == "test":
        return split.train_full(), split.test
    raise ValueError(f"unknown split tag {tag!r}")


def evaluate_model(
    score_fn: Callable[[np.ndarray], np.ndarray],
    split: SplitDataset,
    tag: str = "test",
    batch_size: int = 256,
) -> MetricsReport:
    """Rank every user's unseen items with ``score_fn`` and average the metrics.

    ``score_fn`` maps a batch of condition vectors (the known interactions)
    to a score matrix of the same shape.
    """
    known, target = protocol(split, tag)
    return evaluate_scores(score_fn, known, target, batch_size)


def evaluate_scores(score_fn, known: InteractionMatrix, target: InteractionMatrix, batch_size: int = 256) -> MetricsReport:
    k = max(KS)
    users = [u for u in range(known.m) if len(target.rows[u])]
    ranked, targets = [], []
    for start in range(0, len(users), batch_size):
        batch = users[start : start + batch_size]
        cond = known.to_dense(batch)
        scores = np.asarray(score_fn(cond), dtype=np.float64)
        if scores.shape != cond.shape:
            raise ValueError(f"score function returned shape {scores.shape}, expected {cond.shape}")
        ranked += rank_matrix(scores, [known.rows[u] for u in batch], k)
        targets += [target.rows[u] for u in batch]
    report = score_users(ranked, targets)
    skipped = known.m - len(users)
    return MetricsReport(**report.row(), n_users=report.n_users, n_skipped=skipped)


@dataclass
class LearningCurve:
    rows: list[tuple[int, str, MetricsReport]] = field(default_factory=list)

    def add(self, epoch: int, tag: str, report: MetricsReport) -> None:
        last = [e for e, t, _ in self.rows if t == tag]
        if last and epoch <= last[-1]:
            raise ValueError(f"epoch {epoch} does not increase for split {tag!r}")
        self.rows.append((epoch, tag, report))

    def __len__(self) -> int:
        return len(self.rows)

    def best(self, tag: str = "valid", metric: str = "N20") -> tuple[int, MetricsReport] | None:
        best = None
        for epoch, t, rep in self.rows:
            if t == tag and (best is None or getattr(rep, metric) > getattr(best[1], metric)):
                best = (epoch, rep)
        return best
