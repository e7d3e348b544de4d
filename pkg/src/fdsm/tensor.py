"""Reverse-mode automatic differentiation over named parameter sets.

Everything downstream (losses, the denoiser, the distillation head) is built
from the registered primitives in this module: matmul, elementwise
add/mul, GELU, ReLU, sigmoid, softmax, reductions and a couple of structural
ops (reshape/transpose).  The temporal frequency transforms register
themselves through the same node machinery from ``spectral``.

Arrays are always float64.  Operations never mutate their inputs; every
op validates that its result is finite and raises :class:`NonFiniteError`
naming the offending primitive otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Mapping

import numpy as np
from scipy.special import erf


class NonFiniteError(ArithmeticError):
    """A primitive produced NaN or infinity."""

    def __init__(self, op: str):
        super().__init__(f"non-finite value produced by primitive '{op}'")
        self.op = op


def _ensure_finite(data: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(op)


class Tensor:
    """A node in the computation graph wrapping a float64 ndarray."""

    __slots__ = ("data", "requires_grad", "_parents", "_vjp", "_op")

    # keep numpy from absorbing us in mixed expressions; reflected
    # operators on this class handle ndarray operands instead
    __array_ufunc__ = None

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        parents: tuple = (),
        vjp: Callable | None = None,
        op: str = "leaf",
    ):
        arr = np.asarray(data, dtype=np.float64)
        _ensure_finite(arr, op)
        self.data = arr
        self._parents = parents
        self._vjp = vjp
        self._op = op
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)

    # -- conveniences -------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __float__(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(op={self._op!r}, shape={self.data.shape})"

    # -- operator sugar ------------------------------------------------
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

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __truediv__(self, other):
        if isinstance(other, Tensor) or isinstance(other, np.ndarray):
            raise TypeError("tensor division is only supported by scalars")
        return mul(self, 1.0 / float(other))


def as_tensor(x) -> Tensor:
    """Wrap ``x`` as a constant leaf unless it already is a Tensor."""
    if isinstance(x, Tensor):
        return x
    return Tensor(x)


def parameter(x) -> Tensor:
    """A leaf tensor that participates in differentiation."""
    return Tensor(np.array(x, dtype=np.float64), requires_grad=True)


def node(data, parents: tuple, vjp: Callable, op: str) -> Tensor:
    """Register a differentiable primitive result (used by ``spectral`` too)."""
    return Tensor(data, parents=parents, vjp=vjp, op=op)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient down to the shape the operand actually had."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# registered primitives
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ash, bsh = a.data.shape, b.data.shape

    def vjp(g):
        return _unbroadcast(g, ash), _unbroadcast(g, bsh)

    return node(a.data + b.data, (a, b), vjp, "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ash, bsh = a.data.shape, b.data.shape

    def vjp(g):
        return _unbroadcast(g, ash), _unbroadcast(-g, bsh)

    return node(a.data - b.data, (a, b), vjp, "sub")


def neg(a) -> Tensor:
    a = as_tensor(a)

    def vjp(g):
        return (-g,)

    return node(-a.data, (a,), vjp, "neg")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data

    def vjp(g):
        return _unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)

    return node(ad * bd, (a, b), vjp, "mul")


def power(a, exponent: float) -> Tensor:
    a = as_tensor(a)
    p = float(exponent)
    ad = a.data

    def vjp(g):
        return (g * p * ad ** (p - 1.0),)

    return node(ad ** p, (a,), vjp, "power")


def _swap_last(x: np.ndarray) -> np.ndarray:
    return np.swapaxes(x, -1, -2)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    need_a, need_b = a.requires_grad, b.requires_grad

    def vjp(g):
        ga = _unbroadcast(np.matmul(g, _swap_last(bd)), ad.shape) if need_a else None
        gb = _unbroadcast(np.matmul(_swap_last(ad), g), bd.shape) if need_b else None
        return ga, gb

    return node(np.matmul(ad, bd), (a, b), vjp, "matmul")


_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def gelu(a) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    cdf = 0.5 * (1.0 + erf(ad * _INV_SQRT2))

    def vjp(g):
        pdf = np.exp(-0.5 * ad * ad) * _INV_SQRT_2PI
        return (g * (cdf + ad * pdf),)

    return node(ad * cdf, (a,), vjp, "gelu")


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0.0

    def vjp(g):
        return (g * mask,)

    return node(a.data * mask, (a,), vjp, "relu")


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = np.empty_like(a.data)
    pos = a.data >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a.data[pos]))
    ex = np.exp(a.data[~pos])
    out[~pos] = ex / (1.0 + ex)

    def vjp(g):
        return (g * out * (1.0 - out),)

    return node(out, (a,), vjp, "sigmoid")


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)

    def vjp(g):
        return (g * (1.0 - out * out),)

    return node(out, (a,), vjp, "tanh")


def log(a) -> Tensor:
    a = as_tensor(a)
    ad = a.data

    def vjp(g):
        return (g / ad,)

    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(ad)
    return node(out, (a,), vjp, "log")


def clamp(a, lo: float, hi: float) -> Tensor:
    a = as_tensor(a)
    mask = (a.data > lo) & (a.data < hi)

    def vjp(g):
        return (g * mask,)

    return node(np.clip(a.data, lo, hi), (a,), vjp, "clamp")


def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    ex = np.exp(shifted)
    out = ex / ex.sum(axis=axis, keepdims=True)

    def vjp(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - inner),)

    return node(out, (a,), vjp, "softmax")


def tsum(a, axis=None) -> Tensor:
    a = as_tensor(a)
    ash = a.data.shape

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, ash).copy(),)
        gx = np.expand_dims(g, axis)
        return (np.broadcast_to(gx, ash).copy(),)

    return node(a.data.sum(axis=axis), (a,), vjp, "sum")


def tmean(a, axis=None) -> Tensor:
    a = as_tensor(a)
    ash = a.data.shape
    count = a.data.size if axis is None else ash[axis]

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g / count, ash).copy(),)
        gx = np.expand_dims(g / count, axis)
        return (np.broadcast_to(gx, ash).copy(),)

    return node(a.data.mean(axis=axis), (a,), vjp, "mean")


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    ash = a.data.shape

    def vjp(g):
        return (g.reshape(ash),)

    return node(a.data.reshape(shape), (a,), vjp, "reshape")


def transpose(a, axes) -> Tensor:
    a = as_tensor(a)
    inverse = tuple(np.argsort(axes))

    def vjp(g):
        return (np.transpose(g, inverse),)

    return node(np.transpose(a.data, axes), (a,), vjp, "transpose")


# ---------------------------------------------------------------------------
# parameter sets and differentiation
# ---------------------------------------------------------------------------

class ParameterSet:
    """An ordered name -> leaf-tensor map with deterministic iteration."""

    def __init__(self, arrays: Mapping[str, np.ndarray] | Iterable[tuple[str, np.ndarray]] = ()):
        self._params: dict[str, Tensor] = {}
        items = arrays.items() if isinstance(arrays, Mapping) else arrays
        for name, arr in items:
            self.add(name, arr)

    def add(self, name: str, array) -> None:
        if name in self._params:
            raise ValueError(f"duplicate parameter name '{name}'")
        self._params[name] = parameter(array)

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def arrays(self) -> dict[str, np.ndarray]:
        """The underlying float64 arrays, in insertion order (do not mutate)."""
        return {name: t.data for name, t in self._params.items()}

    def copy(self) -> "ParameterSet":
        return ParameterSet({name: t.data.copy() for name, t in self._params.items()})

    def total_size(self) -> int:
        return sum(t.data.size for t in self._params.values())


def _backward(root: Tensor) -> dict[int, np.ndarray]:
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        tensor, expanded = stack.pop()
        if expanded:
            topo.append(tensor)
            continue
        if id(tensor) in seen:
            continue
        seen.add(id(tensor))
        stack.append((tensor, True))
        for p in tensor._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))

    grads: dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
    for tensor in reversed(topo):
        g = grads.get(id(tensor))
        if g is None or tensor._vjp is None:
            continue
        for parent, pg in zip(tensor._parents, tensor._vjp(g)):
            if pg is None or not parent.requires_grad:
                continue
            pid = id(parent)
            if pid in grads:
                grads[pid] = grads[pid] + pg
            else:
                grads[pid] = pg
    return grads


def grad(loss_fn: Callable[[ParameterSet], Tensor], params: ParameterSet) -> dict[str, np.ndarray]:
    """Gradient of a scalar loss with respect to every named parameter.

    Parameters absent from the loss graph get exact zero gradients.  The
    input set is never mutated.
    """
    if len(params) == 0:
        raise ValueError("parameter set is empty")
    out = loss_fn(params)
    if not isinstance(out, Tensor):
        raise TypeError("loss_fn must return a Tensor")
    if out.data.size != 1:
        raise ValueError(f"loss must be scalar, got shape {out.data.shape}")
    grads = _backward(out)
    return {
        name: grads.get(id(t), np.zeros_like(t.data)).reshape(t.data.shape)
        for name, t in params.items()
    }


def _loss_value(loss_fn, arrays: dict[str, np.ndarray]) -> float:
    out = loss_fn(ParameterSet(arrays))
    return float(out.data) if isinstance(out, Tensor) else float(out)


def finite_diff_grad(
    loss_fn: Callable[[ParameterSet], Tensor], params: ParameterSet, h: float = 1e-5
) -> dict[str, np.ndarray]:
    """Central-difference gradient oracle: one (+h, -h) pair per scalar entry."""
    base = {name: t.data.copy() for name, t in params.items()}
    result: dict[str, np.ndarray] = {}
    for name in base:
        fd = np.zeros_like(base[name])
        flat = fd.reshape(-1)
        for i in range(flat.size):
            arrays = dict(base)
            bumped = base[name].copy().reshape(-1)
            bumped[i] += h
            arrays[name] = bumped.reshape(base[name].shape)
            up = _loss_value(loss_fn, arrays)
            bumped[i] -= 2.0 * h
            arrays[name] = bumped.reshape(base[name].shape)
            down = _loss_value(loss_fn, arrays)
            flat[i] = (up - down) / (2.0 * h)
        result[name] = fd
    return result


def finite_diff_check(
    loss_fn: Callable[[ParameterSet], Tensor],
    params: ParameterSet,
    grads: dict[str, np.ndarray] | None = None,
    h: float = 1e-5,
    sample: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Max relative error between ``grad`` and central differences.

    With ``sample`` set, a seeded subset of coordinates is checked instead of
    every entry, spread across all parameter tensors (at least one per
    tensor).  The relative error uses a 1e-4 floor in the denominator so that
    near-zero gradients are compared absolutely.
    """
    if grads is None:
        grads = grad(loss_fn, params)
    base = {name: t.data.copy() for name, t in params.items()}
    names = list(base)
    coords: list[tuple[str, int]] = []
    if sample is None:
        for name in names:
            coords.extend((name, i) for i in range(base[name].size))
    else:
        rng = rng if rng is not None else np.random.default_rng(0)
        total = sum(base[name].size for name in names)
        budget = min(sample, total)
        for name in names:
            n = base[name].size
            take = max(1, int(round(budget * n / total)))
            take = min(take, n)
            idx = rng.choice(n, size=take, replace=False)
            coords.extend((name, int(i)) for i in idx)

    worst = 0.0
    for name, i in coords:
        arrays = dict(base)
        bumped = base[name].copy().reshape(-1)
        bumped[i] += h
        arrays[name] = bumped.reshape(base[name].shape)
        up = _loss_value(loss_fn, arrays)
        bumped[i] -= 2.0 * h
        arrays[name] = bumped.reshape(base[name].shape)
        down = _loss_value(loss_fn, arrays)
        fd = (up - down) / (2.0 * h)
        ad = grads[name].reshape(-1)[i]
        err = abs(ad - fd) / max(abs(ad), abs(fd), 1e-4)
        worst = max(worst, err)
    return worst


# ---------------------------------------------------------------------------
# AdamW with decoupled weight decay
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdamWState:
    """Optimizer moments plus hyperparameters; replaced, never mutated."""

    step: int
    lr: float
    weight_decay: float
    beta1: float
    beta2: float
    eps: float
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]

    def with_lr(self, lr: float) -> "AdamWState":
        return replace(self, lr=lr)


def adamw_init(
    params: ParameterSet,
    lr: float = 1e-4,
    weight_decay: float = 0.01,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> AdamWState:
    zeros = {name: np.zeros_like(t.data) for name, t in params.items()}
    return AdamWState(
        step=0, lr=lr, weight_decay=weight_decay, beta1=beta1, beta2=beta2, eps=eps,
        m=zeros, v={name: z.copy() for name, z in zeros.items()},
    )


def adamw_step(
    params: ParameterSet, grads: dict[str, np.ndarray], state: AdamWState
) -> tuple[ParameterSet, AdamWState]:
    """One AdamW update.  Decay is decoupled: p <- p - lr*wd*p, applied
    independently of the moment-based update.  Returns fresh objects."""
    for name, t in params.items():
        if name not in grads:
            raise ValueError(f"missing gradient for parameter '{name}'")
        if np.asarray(grads[name]).shape != t.data.shape:
            raise ValueError(
                f"gradient shape {np.asarray(grads[name]).shape} does not match "
                f"parameter '{name}' with shape {t.data.shape}"
            )
    t_step = state.step + 1
    bc1 = 1.0 - state.beta1 ** t_step
    bc2 = 1.0 - state.beta2 ** t_step
    new_arrays: dict[str, np.ndarray] = {}
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    for name, p in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        m = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[name] + (1.0 - state.beta2) * (g * g)
        update = (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        new_arrays[name] = p.data * (1.0 - state.lr * state.weight_decay) - state.lr * update
        new_m[name] = m
        new_v[name] = v
    return ParameterSet(new_arrays), replace(state, step=t_step, m=new_m, v=new_v)


def cosine_lr(step: int, total_steps: int, base_lr: float, warmup: int = 100) -> float:
    """Linear warmup to ``base_lr`` followed by a cosine decay to zero."""
    if total_steps <= warmup:
        raise ValueError(f"total_steps ({total_steps}) must exceed warmup ({warmup})")
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    if step < warmup:
        return base_lr * step / warmup
    progress = (step - warmup) / (total_steps - warmup)
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))
