"""Dense float64 tensors with reverse-mode differentiation.

Every primitive records its parents and a vector-Jacobian product written in
terms of other primitives.  Running the backward pass while recording is
enabled therefore produces gradients that are themselves graph nodes, which
is what the gradient penalty needs (a loss that depends on an input gradient
of the critic, differentiated again with respect to the critic's weights).
"""

from __future__ import annotations

import itertools
import threading
from collections.abc import Callable, Iterator, Mapping, Sequence
from contextlib import contextmanager

import numpy as np
from scipy.special import expit

__all__ = [
    "Tensor",
    "ShapeError",
    "NonFiniteError",
    "ParamSet",
    "tensor",
    "constant",
    "as_tensor",
    "no_grad",
    "is_recording",
    "matmul",
    "affine",
    "relu",
    "sigmoid",
    "log",
    "clamp_min",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "square",
    "concat",
    "sum",
    "mean",
    "l2norm",
    "reshape",
    "broadcast_to",
    "transpose",
    "topological_order",
    "grad",
    "backward",
    "grad_wrt_input",
    "finite_difference",
]

_ids = itertools.count()
_state = threading.local()


class ShapeError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


def is_recording() -> bool:
    return getattr(_state, "recording", True)


@contextmanager
def _recording(flag: bool):
    prev = is_recording()
    _state.recording = flag
    try:
        yield
    finally:
        _state.recording = prev


def no_grad():
    """Context manager under which primitives build constants only."""
    return _recording(False)


class Tensor:
    """A node of the computation graph.

    ``id`` values come from a global counter, so a parent always has a
    smaller id than any of its children and sorting by id is a topological
    order.  Values must not be mutated once wrapped.
    """

    __slots__ = ("value", "op", "parents", "_vjp", "id", "requires_grad")

    def __init__(self, value, requires_grad: bool = False, op: str = "leaf", check: bool = True):
        value = np.asarray(value, dtype=np.float64)
        # unrecorded intermediates are checked where they leave the engine (grad, predict)
        if check and (op == "leaf" or is_recording()):
            _check_finite(value, op)
        self.value = value
        self.op = op
        self.parents: tuple[Tensor, ...] = ()
        self._vjp = None
        self.id = next(_ids)
        self.requires_grad = requires_grad

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def item(self) -> float:
        if self.value.size != 1:
            raise ShapeError(f"item: expected a single value, got shape {self.shape}")
        return float(self.value.reshape(()))

    def detach(self) -> Tensor:
        return Tensor(self.value)

    @property
    def T(self) -> Tensor:
        return transpose(self)

    def __repr__(self) -> str:
        return f"Tensor(op={self.op!r}, shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def tensor(value, requires_grad: bool = False) -> Tensor:
    return Tensor(value, requires_grad=requires_grad)


def constant(value) -> Tensor:
    return Tensor(value)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_finite(value: np.ndarray, op: str) -> None:
    if not np.isfinite(value).all():
        raise NonFiniteError(f"{op}: non-finite value produced")


def _node(value: np.ndarray, op: str, parents: tuple[Tensor, ...], vjp, check: bool = True) -> Tensor:
    # vjp(g, out) -> one Tensor (or None) per parent; check=False for pure data movement
    out = Tensor(value, op=op, check=check)
    if is_recording() and any(p.requires_grad for p in parents):
        out.parents = parents
        out._vjp = vjp
        out.requires_grad = True
    return out


def _elementwise_shapes(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape and a.shape != () and b.shape != ():
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def _unbroadcast(g: Tensor, shape: tuple[int, ...]) -> Tensor:
    if g.shape == shape:
        return g
    if shape == ():
        return sum(g)
    return sum_to(g, shape)


# ---------------------------------------------------------------------------
# primitives


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _elementwise_shapes("add", a, b)
    return _node(
        a.value + b.value,
        "add",
        (a, b),
        lambda g, out: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _elementwise_shapes("sub", a, b)
    return _node(
        a.value - b.value,
        "sub",
        (a, b),
        lambda g, out: (_unbroadcast(g, a.shape), _unbroadcast(neg(g), b.shape)),
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _elementwise_shapes("mul", a, b)
    return _node(
        a.value * b.value,
        "mul",
        (a, b),
        lambda g, out: (
            _unbroadcast(mul(g, b), a.shape) if a.requires_grad else None,
            _unbroadcast(mul(g, a), b.shape) if b.requires_grad else None,
        ),
    )


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _elementwise_shapes("div", a, b)
    if (b.value == 0).any():
        raise NonFiniteError("div: division by zero")
    return _node(
        a.value / b.value,
        "div",
        (a, b),
        lambda g, out: (
            _unbroadcast(div(g, b), a.shape),
            _unbroadcast(neg(div(mul(g, out), b)), b.shape),
        ),
    )


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _node(-a.value, "neg", (a,), lambda g, out: (neg(g),))


def square(a) -> Tensor:
    a = as_tensor(a)
    return _node(a.value * a.value, "square", (a,), lambda g, out: (mul(g, mul(a, 2.0)),))


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shape mismatch {a.shape} vs {b.shape}")
    return _node(
        a.value @ b.value,
        "matmul",
        (a, b),
        lambda g, out: (
            matmul(g, transpose(b)) if a.requires_grad else None,
            matmul(transpose(a), g) if b.requires_grad else None,
        ),
    )


def affine(x, w, b) -> Tensor:
    """``x @ w + b`` with the bias broadcast over rows."""
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeError(f"affine: shape mismatch {x.shape} vs {w.shape}")
    if b.shape != (w.shape[1],):
        raise ShapeError(f"affine: bias shape {b.shape} vs weight {w.shape}")
    return _node(
        x.value @ w.value + b.value,
        "affine",
        (x, w, b),
        lambda g, out: (
            matmul(g, transpose(w)) if x.requires_grad else None,
            matmul(transpose(x), g) if w.requires_grad else None,
            sum(g, axis=0) if b.requires_grad else None,
        ),
    )


def transpose(a) -> Tensor:
    a = as_tensor(a)
    if a.ndim != 2:
        raise ShapeError(f"transpose: expected a matrix, got shape {a.shape}")
    return _node(a.value.T, "transpose", (a,), lambda g, out: (transpose(g),), check=False)


def relu(a) -> Tensor:
    a = as_tensor(a)
    # subgradient 0 at the kink; the mask is a constant so the second derivative is 0
    mask = Tensor((a.value > 0).astype(np.float64))
    return _node(np.maximum(a.value, 0.0), "relu", (a,), lambda g, out: (mul(g, mask),))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    return _node(
        expit(a.value),
        "sigmoid",
        (a,),
        lambda g, out: (mul(g, mul(out, sub(1.0, out))),),
    )


def log(a) -> Tensor:
    a = as_tensor(a)
    if (a.value <= 0).any():
        raise NonFiniteError("log: non-positive operand")
    return _node(np.log(a.value), "log", (a,), lambda g, out: (div(g, a),))


def clamp_min(a, floor: float) -> Tensor:
    a = as_tensor(a)
    mask = Tensor((a.value > floor).astype(np.float64))
    return _node(np.maximum(a.value, floor), "clamp_min", (a,), lambda g, out: (mul(g, mask),))


def reshape(a, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    shape = tuple(shape)
    return _node(a.value.reshape(shape), "reshape", (a,), lambda g, out: (reshape(g, a.shape),), check=False)


def broadcast_to(a, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    shape = tuple(shape)
    try:
        value = np.broadcast_to(a.value, shape).copy()
    except ValueError:
        raise ShapeError(f"broadcast_to: cannot broadcast {a.shape} to {shape}") from None
    return _node(value, "broadcast_to", (a,), lambda g, out: (sum_to(g, a.shape),), check=False)


def sum_to(a, shape: Sequence[int]) -> Tensor:
    """Sum ``a`` over the axes along which ``shape`` was broadcast."""
    a = as_tensor(a)
    shape = tuple(shape)
    lead = a.ndim - len(shape)
    axes = tuple(range(lead)) + tuple(
        i + lead for i, s in enumerate(shape) if s == 1 and a.shape[i + lead] != 1
    )
    value = a.value.sum(axis=axes, keepdims=True) if axes else a.value
    value = value.reshape(shape)
    return _node(value, "sum_to", (a,), lambda g, out: (broadcast_to(g, a.shape),))


def sum(a, axis: int | None = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    a = as_tensor(a)
    value = a.value.sum(axis=axis, keepdims=keepdims)
    if axis is None:
        kept = (1,) * a.ndim
    else:
        kept = tuple(1 if i == axis % a.ndim else s for i, s in enumerate(a.shape))

    def vjp(g, out):
        return (broadcast_to(reshape(g, kept), a.shape),)

    return _node(value, "sum", (a,), vjp)


def mean(a, axis: int | None = None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    count = a.value.size if axis is None else a.shape[axis]
    return mul(sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def l2norm(a, axis: int = 1) -> Tensor:
    """Euclidean norm along ``axis`` (the gradient at a zero vector is taken as 0)."""
    a = as_tensor(a)
    value = np.sqrt((a.value * a.value).sum(axis=axis))
    kept = tuple(1 if i == axis % a.ndim else s for i, s in enumerate(a.shape))

    def vjp(g, out):
        safe = add(out, Tensor((out.value == 0).astype(np.float64)))
        scale = broadcast_to(reshape(div(g, safe), kept), a.shape)
        return (mul(a, scale),)

    return _node(value, "l2norm", (a,), vjp)


def _slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    width = a.shape[1]
    return _node(
        a.value[:, start:stop],
        "slice",
        (a,),
        lambda g, out: (_embed_cols(g, width, start),),
        check=False,
    )


def _embed_cols(a: Tensor, width: int, start: int) -> Tensor:
    stop = start + a.shape[1]
    value = np.zeros((a.shape[0], width))
    value[:, start:stop] = a.value
    return _node(value, "embed", (a,), lambda g, out: (_slice_cols(g, start, stop),), check=False)


def concat(parts: Sequence, axis: int = 1) -> Tensor:
    """Concatenate matrices along the feature axis."""
    if axis != 1:
        raise ValueError("concat: only the feature axis (1) is supported")
    parts = tuple(as_tensor(p) for p in parts)
    rows = {p.shape[0] for p in parts if p.ndim == 2}
    if any(p.ndim != 2 for p in parts) or len(rows) != 1:
        raise ShapeError("concat: shape mismatch " + " vs ".join(str(p.shape) for p in parts))
    bounds = np.cumsum([0] + [p.shape[1] for p in parts])

    def vjp(g, out):
        return tuple(_slice_cols(g, int(bounds[i]), int(bounds[i + 1])) for i in range(len(parts)))

    return _node(np.concatenate([p.value for p in parts], axis=1), "concat", parts, vjp, check=False)


# ---------------------------------------------------------------------------
# differentiation


def topological_order(output: Tensor) -> list[Tensor]:
    """All recorded ancestors of ``output`` (inclusive), parents first."""
    seen: dict[int, Tensor] = {}
    stack = [output]
    while stack:
        node = stack.pop()
        if node.id in seen:
            continue
        seen[node.id] = node
        stack.extend(p for p in node.parents if p.requires_grad)
    return [seen[k] for k in sorted(seen)]


def grad(output: Tensor, inputs: Sequence[Tensor], create_graph: bool = False) -> list[Tensor]:
    """Gradients of a scalar ``output`` with respect to ``inputs``.

    With ``create_graph`` the returned tensors are recorded nodes and can be
    differentiated again.
    """
    if output.value.size != 1:
        raise ShapeError(f"grad: output must be scalar, got shape {output.shape}")
    adjoints: dict[int, Tensor] = {output.id: Tensor(np.ones(output.shape))}
    owned: set[int] = set()
    with _recording(create_graph):
        for node in reversed(topological_order(output)):
            g = adjoints.pop(node.id, None) if node.id != output.id else adjoints[node.id]
            if node in inputs:
                adjoints[node.id] = g
            if g is None or node._vjp is None:
                continue
            for parent, pg in zip(node.parents, node._vjp(g, node)):
                if pg is None or not parent.requires_grad:
                    continue
                prev = adjoints.get(parent.id)
                if prev is None:
                    adjoints[parent.id] = pg
                elif create_graph:
                    adjoints[parent.id] = add(prev, pg)
                elif parent.id in owned:
                    prev.value += pg.value
                else:
                    # first accumulation: copy, since vjps may alias their input
                    adjoints[parent.id] = Tensor(prev.value + pg.value, check=False)
                    owned.add(parent.id)
    out = [adjoints.get(x.id, Tensor(np.zeros(x.shape))) for x in inputs]
    for g in out:
        _check_finite(g.value, "grad")
    return out


def backward(output: Tensor, params: Mapping[str, Tensor]) -> dict[str, np.ndarray]:
    """First-order gradients of a scalar node for each named parameter."""
    names = list(params)
    grads = grad(output, [params[k] for k in names])
    return {k: g.value for k, g in zip(names, grads)}


def grad_wrt_input(f: Callable[[Tensor], Tensor], x) -> Tensor:
    """Input gradient of a row-wise scalar function, kept differentiable.

    ``f`` maps a ``(batch, d)`` input to one scalar per row.  Rows do not
    interact, so the gradient of the summed output gives every row's own
    input gradient.
    """
    x = x.detach() if isinstance(x, Tensor) else Tensor(x)
    x.requires_grad = True
    out = f(x)
    if out.shape not in ((x.shape[0],), (x.shape[0], 1)):
        raise ShapeError(f"grad_wrt_input: expected one scalar per row, got shape {out.shape}")
    return grad(sum(out), [x], create_graph=True)[0]


def finite_difference(f: Callable[[np.ndarray], float], x, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient estimate of a scalar function."""
    if h <= 0:
        raise ValueError("finite_difference: step must be positive")
    x = np.array(x, dtype=np.float64)
    out = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = out.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = f(x)
        flat[i] = orig - h
        down = f(x)
        flat[i] = orig
        gflat[i] = (up - down) / (2 * h)
    return out


# ---------------------------------------------------------------------------


class ParamSet(Mapping):
    """Named parameter arrays, iterated in lexicographic name order."""

    def __init__(self, arrays: Mapping[str, np.ndarray] | None = None):
        self._arrays: dict[str, np.ndarray] = {}
        for k, v in (arrays or {}).items():
            self[k] = v

    def __setitem__(self, name: str, value) -> None:
        self._arrays[name] = np.asarray(value, dtype=np.float64)

    def __getitem__(self, name: str) -> np.ndarray:
        return self._arrays[name]

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._arrays))

    def __len__(self) -> int:
        return len(self._arrays)

    def __repr__(self) -> str:
        shapes = ", ".join(f"{k}: {self[k].shape}" for k in self)
        return f"ParamSet({shapes})"

    def tensors(self, requires_grad: bool = True) -> dict[str, Tensor]:
        return {k: Tensor(self[k], requires_grad=requires_grad) for k in self}

    def copy(self) -> ParamSet:
        return ParamSet({k: self[k].copy() for k in self})

    def zeros_like(self) -> ParamSet:
        return ParamSet({k: np.zeros_like(self[k]) for k in self})
