"""MovieLens parsing, implicit-feedback conversion and per-user splits."""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import DataError

_log = logging.getLogger(__name__)

FORMATS = {"ML100K": "\t", "ML1M": "::"}


@dataclass(frozen=True)
class RatingsTable:
    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray
    timestamps: np.ndarray

    def __len__(self) -> int:
        return len(self.users)


def parse_ratings(path, format: str = "ML100K") -> RatingsTable:  # noqa: A002
    """Read a MovieLens ratings file (``u.data`` or ``ratings.dat``)."""
    try:
        sep = FORMATS[format.upper()]
    except KeyError:
        raise DataError(f"unknown ratings format {format!r}") from None
    path = Path(path)
    if not path.is_file():
        raise DataError(f"ratings file not found: {path}")

    rows = []
    with path.open("r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(sep)
            try:
                if len(fields) != 4:
                    raise ValueError
                row = tuple(int(x) for x in fields)
            except ValueError:
                raise DataError(f"{path}:{lineno}: malformed line {line!r}") from None
            if not 1 <= row[2] <= 5:
                raise DataError(f"{path}:{lineno}: rating {row[2]} out of range 1-5")
            rows.append(row)
    if not rows:
        raise DataError(f"{path}: no ratings")

    arr = np.array(rows, dtype=np.int64)
    pairs = arr[:, 0] * (arr[:, 1].max() + 1) + arr[:, 1]
    if len(np.unique(pairs)) != len(pairs):
        raise DataError(f"{path}: duplicate (user, item) pairs")
    _log.info("parsed %d ratings from %s", len(arr), path)
    return RatingsTable(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3])


@dataclass(frozen=True)
class InteractionMatrix:
    """Binary user x item feedback, one sorted item array per user."""

    m: int
    n: int
    rows: tuple[np.ndarray, ...]

    @classmethod
    def from_pairs(cls, m: int, n: int, users, items) -> InteractionMatrix:
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        if len(items) and (items.min() < 0 or items.max() >= n):
            raise DataError("item index out of range")
        order = np.lexsort((items, users))
        users, items = users[order], items[order]
        bounds = np.searchsorted(users, np.arange(m + 1))
        rows = tuple(np.unique(items[bounds[u] : bounds[u + 1]]) for u in range(m))
        return cls(m, n, rows)

    @classmethod
    def from_csr(cls, x) -> InteractionMatrix:
        x = sp.csr_matrix(x)
        x.sum_duplicates()
        x.sort_indices()
        rows = tuple(
            x.indices[x.indptr[u] : x.indptr[u + 1]][x.data[x.indptr[u] : x.indptr[u + 1]] != 0].astype(np.int64)
            for u in range(x.shape[0])
        )
        return cls(x.shape[0], x.shape[1], rows)

    @property
    def nnz(self) -> int:
        return int(sum(len(r) for r in self.rows))

    @property
    def density(self) -> float:
        return self.nnz / (self.m * self.n)

    def degrees(self) -> np.ndarray:
        return np.array([len(r) for r in self.rows], dtype=np.int64)

    def to_csr(self) -> sp.csr_matrix:
        indptr = np.concatenate([[0], np.cumsum(self.degrees())])
        indices = np.concatenate(self.rows) if self.m else np.zeros(0, dtype=np.int64)
        data = np.ones(len(indices))
        return sp.csr_matrix((data, indices, indptr), shape=(self.m, self.n))

    def to_dense(self, users=None) -> np.ndarray:
        users = np.arange(self.m) if users is None else np.asarray(users)
        out = np.zeros((len(users), self.n))
        for i, u in enumerate(users):
            out[i, self.rows[u]] = 1.0
        return out

    def union(self, other: InteractionMatrix) -> InteractionMatrix:
        if (self.m, self.n) != (other.m, other.n):
            raise DataError("cannot merge interaction matrices of different shapes")
        rows = tuple(np.union1d(a, b) for a, b in zip(self.rows, other.rows))
        return InteractionMatrix(self.m, self.n, rows)

    def item_counts(self) -> np.ndarray:
        counts = np.zeros(self.n, dtype=np.int64)
        for r in self.rows:
            counts[r] += 1
        return counts


@dataclass(frozen=True)
class IdMaps:
    users: np.ndarray
    items: np.ndarray


def binarize_and_index(table: RatingsTable) -> tuple[InteractionMatrix, IdMaps]:
    """Every rating becomes a positive; dense ids follow ascending raw ids."""
    if len(table) == 0:
        raise DataError("empty ratings table")
    user_ids, users = np.unique(table.users, return_inverse=True)
    item_ids, items = np.unique(table.items, return_inverse=True)
    ix = InteractionMatrix.from_pairs(len(user_ids), len(item_ids), users, items)
    return ix, IdMaps(user_ids, item_ids)


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


@dataclass(frozen=True)
class SplitDataset:
    train: InteractionMatrix
    valid: InteractionMatrix
    test: InteractionMatrix
    ids: IdMaps | None = None

    @property
    def m(self) -> int:
        return self.train.m

    @property
    def n(self) -> int:
        return self.train.n

    def train_full(self) -> InteractionMatrix:
        """Training interactions plus the validation interactions."""
        return self.train.union(self.valid)

    def condition_vector(self, u: int, include_validation: bool = False) -> np.ndarray:
        return self.condition_matrix([u], include_validation)[0]

    def condition_matrix(self, users=None, include_validation: bool = False) -> np.ndarray:
        users = np.arange(self.m) if users is None else np.asarray(users)
        if len(users) and (users.min() < 0 or users.max() >= self.m):
            raise IndexError(f"user index out of range [0, {self.m})")
        out = self.train.to_dense(users)
        if include_validation:
            for i, u in enumerate(users):
                out[i, self.valid.rows[u]] = 1.0
        return out

    def manifest_lines(self):
        for u in range(self.m):
            tagged = [(i, "train") for i in self.train.rows[u]]
            tagged += [(i, "valid") for i in self.valid.rows[u]]
            tagged += [(i, "test") for i in self.test.rows[u]]
            for i, tag in sorted(tagged):
                yield f"{u} {i} {tag}\n"

    def write_manifest(self, path) -> str:
        """Write the split manifest and return its SHA-256 digest."""
        h = hashlib.sha256()
        with open(path, "w", encoding="ascii", newline="\n") as f:
            for line in self.manifest_lines():
                f.write(line)
                h.update(line.encode("ascii"))
        return h.hexdigest()

    def digest(self) -> str:
        h = hashlib.sha256()
        for line in self.manifest_lines():
            h.update(line.encode("ascii"))
        return h.hexdigest()


def split_dataset(
    ix: InteractionMatrix,
    test_ratio: float = 0.2,
    valid_ratio: float = 0.2,
    seed: int = 0,
    ids: IdMaps | None = None,
) -> SplitDataset:
    """Per-user random split into train / validation / test.

    Each user's interactions are shuffled, ``round(test_ratio * deg)`` go to
    test and the same rule on the remainder carves out validation.  At least
    one interaction always stays in train.
    """
    for name, r in (("test_ratio", test_ratio), ("valid_ratio", valid_ratio)):
        if not 0 < r < 1:
            raise DataError(f"{name} must be in (0, 1), got {r}")
    rng = np.random.default_rng(seed)
    train, valid, test = [], [], []
    for u, row in enumerate(ix.rows):
        deg = len(row)
        if deg < 2:
            raise DataError(f"user {u} has {deg} interaction(s); at least 2 are required")
        perm = rng.permutation(row)
        n_test = min(_round_half_up(test_ratio * deg), deg - 1)
        pool = deg - n_test
        n_valid = min(_round_half_up(valid_ratio * pool), pool - 1)
        test.append(np.sort(perm[:n_test]))
        valid.append(np.sort(perm[n_test : n_test + n_valid]))
        train.append(np.sort(perm[n_test + n_valid :]))
    return SplitDataset(
        InteractionMatrix(ix.m, ix.n, tuple(train)),
        InteractionMatrix(ix.m, ix.n, tuple(valid)),
        InteractionMatrix(ix.m, ix.n, tuple(test)),
        ids,
    )


def load_split(path, format: str = "ML100K", seed: int = 0, test_ratio: float = 0.2, valid_ratio: float = 0.2) -> SplitDataset:  # noqa: A002
    ix, ids = binarize_and_index(parse_ratings(path, format))
    return split_dataset(ix, test_ratio, valid_ratio, seed, ids)
