"""Minimal dense-matrix reverse-mode automatic differentiation.

Define-by-run: while a Tape is active, every op records a backward closure;
backward() replays them in exact reverse execution order. Tensors are 2-D
float64 throughout. Without an active tape, ops run forward-only, which is
what evaluation passes use.
"""

from __future__ import annotations

import numpy as np

from .errors import InternalError, ShapeError

_TAPE_STACK: list["Tape"] = []

_BCE_EPS = 1e-7  # clamp for log arguments in the cross-entropy


class Tensor:
    __slots__ = ("values", "grad", "requires_grad", "_track")

    def __init__(self, values, requires_grad=False):
        v = np.asarray(values, dtype=np.float64)
        if v.ndim == 0:
            v = v.reshape(1, 1)
        elif v.ndim == 1:
            v = v.reshape(1, -1)
        elif v.ndim != 2:
            raise ShapeError(f"tensors are 2-D, got ndim={v.ndim}")
        self.values = v
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(v) if requires_grad else None
        self._track = requires_grad

    @property
    def shape(self):
        return self.values.shape

    def item(self) -> float:
        if self.values.size != 1:
            raise ShapeError(f"item() needs a 1-element tensor, got shape {self.shape}")
        return float(self.values[0, 0])

    def zero_grad(self):
        if self.grad is not None:
            self.grad[...] = 0.0

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


class Tape:
    """Ordered record of executed ops; consumable once by backward()."""

    __slots__ = ("_records", "_consumed")

    def __init__(self):
        self._records = []
        self._consumed = False

    def __enter__(self):
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc):
        popped = _TAPE_STACK.pop()
        if popped is not self:
            raise InternalError("tape stack corrupted")
        return False

    def __len__(self):
        return len(self._records)


def _active_tape() -> Tape | None:
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def _result(values, inputs, backward_fn) -> Tensor:
    """Wrap an op result, recording backward_fn when gradients must flow."""
    out = Tensor(values)
    tape = _active_tape()
    if tape is not None and any(t._track for t in inputs):
        out._track = True
        out.grad = np.zeros_like(out.values)

        def record():
            backward_fn(out.grad)

        tape._records.append(record)
    return out


def _accumulate(t: Tensor, g):
    if t._track:
        if t.grad is None:
            t.grad = np.zeros_like(t.values)
        t.grad += g


def backward(loss: Tensor, tape: Tape):
    """Populate grads of every tracked tensor reachable from loss."""
    if tape._consumed:
        raise InternalError("tape has already been consumed by a backward pass")
    tape._consumed = True
    if loss.values.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss.grad is None:
        loss.grad = np.zeros_like(loss.values)
    loss.grad[...] = 1.0
    for record in reversed(tape._records):
        record()


# ---------------------------------------------------------------------------
# ops

def _check_same_shape(a: Tensor, b: Tensor, op: str):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dims differ, {a.shape} @ {b.shape}")
    av, bv = a.values, b.values

    def bwd(g):
        _accumulate(a, g @ bv.T)
        _accumulate(b, av.T @ g)

    return _result(av @ bv, (a, b), bwd)


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "add")

    def bwd(g):
        _accumulate(a, g)
        _accumulate(b, g)

    return _result(a.values + b.values, (a, b), bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "sub")

    def bwd(g):
        _accumulate(a, g)
        _accumulate(b, -g)

    return _result(a.values - b.values, (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product."""
    _check_same_shape(a, b, "mul")
    av, bv = a.values, b.values

    def bwd(g):
        _accumulate(a, g * bv)
        _accumulate(b, g * av)

    return _result(av * bv, (a, b), bwd)


def scale(a: Tensor, k: float) -> Tensor:
    k = float(k)

    def bwd(g):
        _accumulate(a, g * k)

    return _result(a.values * k, (a,), bwd)


def relu(a: Tensor) -> Tensor:
    mask = a.values > 0.0

    def bwd(g):
        _accumulate(a, g * mask)

    return _result(a.values * mask, (a,), bwd)


def sigmoid(a: Tensor) -> Tensor:
    out_vals = 1.0 / (1.0 + np.exp(-a.values))

    def bwd(g):
        _accumulate(a, g * out_vals * (1.0 - out_vals))

    return _result(out_vals, (a,), bwd)


def transpose(a: Tensor) -> Tensor:
    def bwd(g):
        _accumulate(a, g.T)

    return _result(a.values.T.copy(), (a,), bwd)


def row_mean(a: Tensor) -> Tensor:
    """Mean over rows: (r, c) -> (1, c). The subgraph readout."""
    r = a.shape[0]

    def bwd(g):
        _accumulate(a, np.repeat(g, r, axis=0) / r)

    return _result(a.values.mean(axis=0, keepdims=True), (a,), bwd)


def sum_cols(a: Tensor) -> Tensor:
    """Per-row sum across columns: (r, c) -> (r, 1)."""
    c = a.shape[1]

    def bwd(g):
        _accumulate(a, np.repeat(g, c, axis=1))

    return _result(a.values.sum(axis=1, keepdims=True), (a,), bwd)


def take_rows(a: Tensor, idx) -> Tensor:
    """Gather rows by index; backward scatter-adds."""
    idx = np.asarray(idx, dtype=np.int64)
    if idx.ndim != 1:
        raise ShapeError("take_rows: index must be 1-D")
    if len(idx) and (idx.min() < 0 or idx.max() >= a.shape[0]):
        raise ShapeError(f"take_rows: index out of range for {a.shape[0]} rows")

    def bwd(g):
        if a._track:
            buf = np.zeros_like(a.values)
            np.add.at(buf, idx, g)
            _accumulate(a, buf)

    return _result(a.values[idx], (a,), bwd)


def block_mean(a: Tensor, block: int) -> Tensor:
    """Mean over each consecutive block of rows: (B*block, c) -> (B, c)."""
    r = a.shape[0]
    if block < 1 or r % block != 0:
        raise ShapeError(f"block_mean: {r} rows not divisible into blocks of {block}")
    nb = r // block

    def bwd(g):
        _accumulate(a, np.repeat(g, block, axis=0) / block)

    vals = a.values.reshape(nb, block, -1).mean(axis=1)
    return _result(vals, (a,), bwd)


def block_mix(adj: np.ndarray, a: Tensor) -> Tensor:
    """Batched left-multiply by constant per-block matrices.

    adj has shape (B, c, c); a has shape (B*c, d). Block i of the output is
    adj[i] @ a_block_i. Gradient flows to a only (adj is data, not weights).
    """
    adj = np.asarray(adj, dtype=np.float64)
    if adj.ndim != 3 or adj.shape[1] != adj.shape[2]:
        raise ShapeError(f"block_mix: adjacency stack must be (B, c, c), got {adj.shape}")
    nb, c = adj.shape[0], adj.shape[1]
    if a.shape[0] != nb * c:
        raise ShapeError(f"block_mix: expected {nb * c} rows, got {a.shape[0]}")
    d = a.shape[1]
    adj_t = adj.transpose(0, 2, 1)

    def bwd(g):
        gb = g.reshape(nb, c, d)
        _accumulate(a, np.matmul(adj_t, gb).reshape(nb * c, d))

    vals = np.matmul(adj, a.values.reshape(nb, c, d)).reshape(nb * c, d)
    return _result(vals, (a,), bwd)


def concat_rows(tensors) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ShapeError("concat_rows: empty input")
    cols = tensors[0].shape[1]
    for t in tensors:
        if t.shape[1] != cols:
            raise ShapeError(f"concat_rows: column mismatch {t.shape[1]} vs {cols}")
    offsets = np.cumsum([0] + [t.shape[0] for t in tensors])

    def bwd(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            _accumulate(t, g[lo:hi])

    return _result(np.vstack([t.values for t in tensors]), tuple(tensors), bwd)


def bilinear(z: Tensor, w: Tensor, e: Tensor) -> Tensor:
    """Similarity sigmoid(z W e^T), rowwise when z and e carry a batch.

    z: (B, d'), w: (d', d'), e: (B, d') -> (B, 1) scores in (0, 1).
    """
    return sigmoid(sum_cols(mul(matmul(z, w), e)))


def bce_loss(scores, labels) -> Tensor:
    """Summed binary cross-entropy over scores in (0, 1).

    scores may be a Tensor of any shape or a list of scalar Tensors; labels
    are matching 0/1 values. Scores are clamped away from {0, 1} before the
    log; gradients at clamped entries are zero.
    """
    if isinstance(scores, (list, tuple)):
        if not scores:
            raise ShapeError("bce_loss: empty score list")
        scores = concat_rows(scores)
    y = np.asarray(labels, dtype=np.float64).reshape(scores.shape)
    s_raw = scores.values
    inside = (s_raw > _BCE_EPS) & (s_raw < 1.0 - _BCE_EPS)
    s = np.clip(s_raw, _BCE_EPS, 1.0 - _BCE_EPS)
    loss_val = -(y * np.log(s) + (1.0 - y) * np.log(1.0 - s)).sum()

    def bwd(g):
        _accumulate(scores, g[0, 0] * inside * (s - y) / (s * (1.0 - s)))

    return _result(np.array([[loss_val]]), (scores,), bwd)


# ---------------------------------------------------------------------------
# optimizer

class Adam:
    """Bias-corrected Adam over a list of parameter Tensors.

    step() applies the update and zeroes the gradients.
    """

    def __init__(self, params, learning_rate=0.001, beta1=0.9, beta2=0.999,
                 epsilon=1e-8):
        self.params = list(params)
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.step_count = 0
        self._m = [np.zeros_like(p.values) for p in self.params]
        self._v = [np.zeros_like(p.values) for p in self.params]

    def step(self):
        self.step_count += 1
        t = self.step_count
        b1, b2 = self.beta1, self.beta2
        for p, m, v in zip(self.params, self._m, self._v):
            g = p.grad if p.grad is not None else np.zeros_like(p.values)
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            m_hat = m / (1.0 - b1 ** t)
            v_hat = v / (1.0 - b2 ** t)
            p.values -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)
            p.zero_grad()


def adam_step(optimizer: Adam):
    optimizer.step()
