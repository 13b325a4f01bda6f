"""A small reverse-mode autodiff engine over float64 numpy arrays.

Only the operations the models and losses need are provided. Broadcasting is
limited to adding a bias row vector to every row of a matrix and to Python
scalar constants.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

DEFAULT_LOG_EPS = 1e-7


class ShapeError(ValueError):
    def __init__(self, op: str, *shapes):
        shown = " and ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{op}: incompatible shapes {shown}")
        self.op = op
        self.shapes = shapes


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None
        self.name = name

    @classmethod
    def _make(cls, data, parents: tuple[Tensor, ...], backward) -> Tensor:
        out = cls(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_lift(other, self.shape), self)

    def __neg__(self):
        return scalar_mul(self, -1.0)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scalar_mul(self, float(other))

    def __rmul__(self, other):
        return self.__mul__(other)

    def __matmul__(self, other):
        return matmul(self, other)


def _lift(x, shape) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.full(shape, float(x)))


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data, name: str | None = None) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True, name=name)


# ---------------------------------------------------------------------------
# forward ops


def matmul(a: Tensor, b: Tensor, row_stable: bool = False) -> Tensor:
    """Matrix product. With ``row_stable`` each output row is computed the same
    way whatever the number of rows (BLAS switches kernels by shape), at some
    cost in speed."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)
    A, B = a.data, b.data

    def backward(g):
        return (g @ B.T if a.requires_grad else None, A.T @ g if b.requires_grad else None)

    out = np.einsum("ij,jk->ik", A, B) if row_stable else A @ B
    return Tensor._make(out, (a, b), backward)


def pool_sum(a: Tensor, index) -> Tensor:
    """Row-set sums: ``out[i] = sum of a[j] for j in index[i]``, -1 entries skipped.

    Each set is added up in ascending value order per column, so the result
    depends only on the multiset of rows, not on how they are numbered.
    """
    a = as_tensor(a)
    index = np.asarray(index, dtype=np.int64)
    if a.data.ndim != 2 or index.ndim != 2:
        raise ShapeError("pool_sum", a.shape, index.shape)
    n, width = a.shape
    if index.size and (index.max() >= n or index.min() < -1):
        raise ShapeError("pool_sum (index out of range)", a.shape, index.shape)
    padded = np.vstack([a.data, np.zeros((1, width))])
    vals = np.sort(padded[index], axis=1)  # -1 picks the zero row
    out = np.zeros((index.shape[0], width))
    for j in range(index.shape[1]):
        out += vals[:, j]
    live = index >= 0
    src = index[live]
    dst = np.broadcast_to(np.arange(index.shape[0])[:, None], index.shape)[live]

    def backward(g):
        grad = np.zeros((n, width))
        np.add.at(grad, src, g[dst])
        return (grad,)

    return Tensor._make(out, (a,), backward)


def add(a, b) -> Tensor:
    a = as_tensor(a)
    b = _lift(b, a.shape)
    if a.shape == b.shape:
        return Tensor._make(a.data + b.data, (a, b), lambda g: (g, g))
    if a.data.ndim == 2 and b.data.ndim == 1 and b.shape[0] == a.shape[1]:
        return Tensor._make(a.data + b.data, (a, b), lambda g: (g, g.sum(axis=0)))
    if a.data.ndim == 2 and b.data.ndim == 2 and b.shape == (1, a.shape[1]):
        return Tensor._make(a.data + b.data, (a, b), lambda g: (g, g.sum(axis=0, keepdims=True)))
    raise ShapeError("add", a.shape, b.shape)


def sub(a, b) -> Tensor:
    a = as_tensor(a)
    b = _lift(b, a.shape)
    if a.shape != b.shape:
        raise ShapeError("sub", a.shape, b.shape)
    return Tensor._make(a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError("mul", a.shape, b.shape)
    A, B = a.data, b.data
    return Tensor._make(A * B, (a, b), lambda g: (g * B, g * A))


def scalar_mul(a: Tensor, c: float) -> Tensor:
    a = as_tensor(a)
    c = float(c)
    return Tensor._make(a.data * c, (a,), lambda g: (g * c,))


def relu(a: Tensor) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return Tensor._make(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def sigmoid(a: Tensor) -> Tensor:
    a = as_tensor(a)
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return Tensor._make(out, (a,), lambda g: (g * out * (1.0 - out),))


def absolute(a: Tensor) -> Tensor:
    a = as_tensor(a)
    sign = np.sign(a.data)
    return Tensor._make(np.abs(a.data), (a,), lambda g: (g * sign,))


def square(a: Tensor) -> Tensor:
    a = as_tensor(a)
    x = a.data
    return Tensor._make(x * x, (a,), lambda g: (2.0 * x * g,))


def log_guarded(a: Tensor, eps: float = DEFAULT_LOG_EPS) -> Tensor:
    """log(max(a, eps)); the gradient is zero where the guard is active."""
    if eps <= 0:
        raise ValueError(f"log guard eps must be > 0, got {eps}")
    a = as_tensor(a)
    clipped = np.maximum(a.data, eps)
    live = a.data > eps
    return Tensor._make(np.log(clipped), (a,), lambda g: (np.where(live, g / clipped, 0.0),))


def tsum(a: Tensor, axis: int | None = None) -> Tensor:
    a = as_tensor(a)
    shape = a.shape
    if axis is None:
        return Tensor._make(a.data.sum(), (a,), lambda g: (np.full(shape, float(g)),))
    if not -a.data.ndim <= axis < a.data.ndim:
        raise ShapeError(f"sum(axis={axis})", shape)

    def backward(g):
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return Tensor._make(a.data.sum(axis=axis), (a,), backward)


def mean(a: Tensor) -> Tensor:
    a = as_tensor(a)
    if a.size == 0:
        raise ShapeError("mean", a.shape)
    return scalar_mul(tsum(a), 1.0 / a.size)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ValueError("concat of an empty list")
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError(f"concat(axis={axis})", *(t.shape for t in tensors)) from None
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return Tensor._make(out, tuple(tensors), backward)


def take(a: Tensor, index) -> Tensor:
    """Gather rows ``a[index]`` along axis 0 (scatter-add on the way back)."""
    a = as_tensor(a)
    index = np.asarray(index, dtype=np.int64)
    shape = a.shape

    def backward(g):
        out = np.zeros(shape)
        np.add.at(out, index, g)
        return (out,)

    return Tensor._make(a.data[index], (a,), backward)


def reshape(a: Tensor, shape) -> Tensor:
    a = as_tensor(a)
    old = a.shape
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape to {shape}", old) from None
    return Tensor._make(out, (a,), lambda g: (g.reshape(old),))


# ---------------------------------------------------------------------------
# backward


def _toposort(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in reversed(node._parents):
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(output: Tensor) -> dict[Tensor, np.ndarray]:
    """Gradients of a scalar ``output`` with respect to every grad-requiring leaf.

    Each leaf's ``.grad`` is also overwritten with its gradient.
    """
    if output.size != 1:
        raise ShapeError("backward (output must be scalar)", output.shape)
    grads: dict[int, np.ndarray] = {id(output): np.ones_like(output.data)}
    leaves: dict[Tensor, np.ndarray] = {}
    if not output.requires_grad:
        return leaves
    for node in reversed(_toposort(output)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            leaves[node] = g
            node.grad = g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            pg = np.asarray(pg, dtype=np.float64).reshape(parent.shape)
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
    return leaves


def grad_check(f: Callable[[], Tensor], leaves: Iterable[Tensor], step: float = 1e-5) -> float:
    """Largest relative gap between analytic and central-difference gradients.

    ``f`` rebuilds the scalar from the current leaf values on every call; the
    relative error per coordinate is |a - n| / max(1, |a|, |n|).
    """
    leaves = list(leaves)
    analytic = backward(f())
    worst = 0.0
    for leaf in leaves:
        ga = analytic.get(leaf, np.zeros_like(leaf.data))
        flat = leaf.data.reshape(-1)
        gflat = ga.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = f().item()
            flat[i] = orig - step
            down = f().item()
            flat[i] = orig
            numeric = (up - down) / (2 * step)
            err = abs(gflat[i] - numeric) / max(1.0, abs(gflat[i]), abs(numeric))
            worst = max(worst, err)
    return worst


class Adam:
    """Adaptive-moment gradient descent over a fixed list of leaf tensors."""

    def __init__(self, params: Sequence[Tensor], lr=1e-3, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.0):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self, grads: dict[Tensor, np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = grads.get(p)
            if g is None:
                continue
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            tmp = np.multiply(g, 1.0 - b1)
            m *= b1
            m += tmp
            np.multiply(g, g, out=tmp)
            tmp *= 1.0 - b2
            v *= b2
            v += tmp
            np.multiply(v, 1.0 / c2, out=tmp)
            np.sqrt(tmp, out=tmp)
            tmp += self.eps
            np.divide(m, tmp, out=tmp)
            tmp *= self.lr / c1
            p.data -= tmp

    def state(self) -> dict:
        return {"t": self.t, "m": [m.copy() for m in self.m], "v": [v.copy() for v in self.v]}
