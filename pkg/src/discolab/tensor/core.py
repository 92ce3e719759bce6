"""Tensor with reverse-mode autodiff over numpy arrays.

Every op records a closure that maps the upstream gradient to gradients of
its inputs. ``Tensor.backward`` walks the recorded graph in reverse
topological order, accumulates into the ``grad`` buffers of leaf tensors
that require gradients, and then releases the graph.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def is_grad_enabled() -> bool:
    return _GRAD_ENABLED


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "__weakref__")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None

    # -- basic properties -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    # -- autodiff ---------------------------------------------------------
    def backward(self, grad: np.ndarray | None = None) -> None:
        """Backpropagate from a scalar.

        Gradients accumulate into leaf ``grad`` buffers across calls until
        they are reset with ``zero_grad``. The graph is released afterwards,
        so a second call on the same output only reaches the output itself.
        """
        if self.data.size != 1 or self.data.ndim != 0:
            if grad is None:
                raise ValueError(f"backward() needs a scalar, got shape {self.shape}")
        if grad is None:
            grad = np.ones_like(self.data)

        order = _topo_order(self)
        grads: dict[int, np.ndarray] = {id(self): np.asarray(grad, dtype=self.dtype)}
        for node in order:
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.requires_grad:
                    node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            parent_grads = node._backward(g)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
        for node in order:
            node._parents = ()
            node._backward = None

    # -- operator sugar ---------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(as_tensor(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self):
        return tsum(self)

    def mean(self):
        return mean(self)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes)


def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    order.reverse()
    return order


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _check_finite(arr: np.ndarray, op: str) -> None:
    if not np.isfinite(arr).all():
        raise FloatingPointError(f"non-finite values produced by {op}")


def make_result(data: np.ndarray, parents: Iterable[Tensor], backward, op: str) -> Tensor:
    """Wrap an op output and record the backward closure if needed."""
    _check_finite(data, op)
    out = Tensor(data)
    parents = tuple(parents)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


# -- kink tracking for gradient checks ---------------------------------------
class KinkMonitor:
    """Smallest distance to a non-differentiable point seen by piecewise ops."""

    def __init__(self):
        self.margin = np.inf

    def observe(self, values: np.ndarray) -> None:
        if values.size:
            self.margin = min(self.margin, float(np.min(np.abs(values))))


_KINK_MONITORS: list[KinkMonitor] = []


@contextlib.contextmanager
def track_kinks():
    mon = KinkMonitor()
    _KINK_MONITORS.append(mon)
    try:
        yield mon
    finally:
        _KINK_MONITORS.remove(mon)


def _observe_kinks(values: np.ndarray) -> None:
    for mon in _KINK_MONITORS:
        mon.observe(values)


# -- elementwise --------------------------------------------------------------
def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and grad.shape[i] != 1:
            grad = grad.sum(axis=i, keepdims=True)
    return grad


def add(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, a.dtype)
    sa, sb = a.shape, b.shape
    return make_result(
        a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)), "add"
    )


def sub(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, a.dtype)
    sa, sb = a.shape, b.shape
    return make_result(
        a.data - b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)), "sub"
    )


def mul(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, a.dtype)
    ad, bd = a.data, b.data
    return make_result(
        ad * bd,
        (a, b),
        lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)),
        "mul",
    )


def neg(a: Tensor) -> Tensor:
    return make_result(-a.data, (a,), lambda g: (-g,), "neg")


def relu(x: Tensor) -> Tensor:
    """Elementwise max(0, x); the subgradient at 0 is 0."""
    if _KINK_MONITORS:
        _observe_kinks(x.data)
    mask = x.data > 0
    return make_result(np.maximum(x.data, 0), (x,), lambda g: (g * mask,), "relu")


def clamp(x: Tensor, lo: float, hi: float) -> Tensor:
    """Clip to [lo, hi]; gradient passes strictly inside the interval."""
    if _KINK_MONITORS:
        _observe_kinks(x.data - lo)
        _observe_kinks(x.data - hi)
    mask = (x.data > lo) & (x.data < hi)
    return make_result(np.clip(x.data, lo, hi), (x,), lambda g: (g * mask,), "clamp")


# -- shape ops ----------------------------------------------------------------
def reshape(x: Tensor, shape) -> Tensor:
    old = x.shape
    return make_result(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),), "reshape")


def transpose(x: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return make_result(
        np.ascontiguousarray(x.data.transpose(axes)),
        (x,),
        lambda g: (g.transpose(inv),),
        "transpose",
    )


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return make_result(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward, "concat")


def take(x: Tensor, indices: np.ndarray, axis: int) -> Tensor:
    """Gather along ``axis``; repeated indices accumulate their gradients."""
    indices = np.asarray(indices, dtype=np.intp)
    axis = axis % x.ndim
    shape = x.shape

    def backward(g):
        out = np.zeros(shape, dtype=g.dtype)
        moved = np.moveaxis(out, axis, 0)
        np.add.at(moved, indices, np.moveaxis(g, axis, 0))
        return (out,)

    return make_result(np.take(x.data, indices, axis=axis), (x,), backward, "take")


# -- reductions ---------------------------------------------------------------
def tsum(x: Tensor) -> Tensor:
    shape = x.shape
    return make_result(
        np.asarray(x.data.sum(), dtype=x.dtype),
        (x,),
        lambda g: (np.broadcast_to(g, shape).astype(g.dtype, copy=True),),
        "sum",
    )


def mean(x: Tensor) -> Tensor:
    shape, n = x.shape, x.size
    return make_result(
        np.asarray(x.data.mean(), dtype=x.dtype),
        (x,),
        lambda g: (np.full(shape, g / n, dtype=x.dtype),),
        "mean",
    )


# -- linear algebra -----------------------------------------------------------
def matmul(a: Tensor, b: Tensor) -> Tensor:
    ad, bd = a.data, b.data
    if ad.ndim != 2 or bd.ndim != 2:
        raise ValueError("matmul expects 2-D operands")
    if ad.shape[1] != bd.shape[0]:
        raise ValueError(f"matmul shape mismatch {ad.shape} @ {bd.shape}")
    return make_result(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g), "matmul")


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map over the last axis: ``x @ weight.T + bias``."""
    din = weight.shape[1]
    if x.shape[-1] != din:
        raise ValueError(f"linear: input last dim {x.shape[-1]} != weight in-dim {din}")
    lead = x.shape[:-1]
    xd = x.data.reshape(-1, din)
    wd = weight.data
    out = xd @ wd.T
    if bias is not None:
        out = out + bias.data
    out = out.reshape(*lead, wd.shape[0])

    def backward(g):
        g2 = g.reshape(-1, wd.shape[0])
        gx = (g2 @ wd).reshape(*lead, din)
        gw = g2.T @ xd
        if bias is None:
            return gx, gw
        return gx, gw, g2.sum(axis=0)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return make_result(out, parents, backward, "linear")


# -- convolution --------------------------------------------------------------
def _im2col(xp: np.ndarray, k: int, stride: int, ho: int, wo: int) -> np.ndarray:
    """Padded (N, C, Hp, Wp) -> columns (C*k*k, N*ho*wo)."""
    n, c = xp.shape[:2]
    cols = np.empty((c, k, k, n, ho, wo), dtype=xp.dtype)
    xt = xp.transpose(1, 0, 2, 3)
    for di in range(k):
        for dj in range(k):
            cols[:, di, dj] = xt[:, :, di : di + stride * ho : stride, dj : dj + stride * wo : stride]
    return cols.reshape(c * k * k, n * ho * wo)


def _col2im(cols: np.ndarray, shape_p, k: int, stride: int, ho: int, wo: int) -> np.ndarray:
    n, c, hp, wp = shape_p
    cols = cols.reshape(c, k, k, n, ho, wo)
    out = np.zeros((c, n, hp, wp), dtype=cols.dtype)
    for di in range(k):
        for dj in range(k):
            out[:, :, di : di + stride * ho : stride, dj : dj + stride * wo : stride] += cols[:, di, dj]
    return out.transpose(1, 0, 2, 3)


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """2-D cross-correlation with zero padding.

    Accepts (Cin, H, W) or (N, Cin, H, W) inputs; weight is (Cout, Cin, k, k).
    """
    unbatched = x.ndim == 3
    xd = x.data[None] if unbatched else x.data
    cout, cin, k, k2 = weight.shape
    if k != k2 or k % 2 == 0:
        raise ValueError(f"conv2d needs an odd square kernel, got {k}x{k2}")
    if stride < 1 or padding < 0:
        raise ValueError("conv2d: stride >= 1 and padding >= 0 required")
    if xd.shape[1] != cin:
        raise ValueError(f"conv2d: input has {xd.shape[1]} channels, weight expects {cin}")
    n, _, h, w = xd.shape
    ho = (h + 2 * padding - k) // stride + 1
    wo = (w + 2 * padding - k) // stride + 1
    if ho < 1 or wo < 1:
        raise ValueError("conv2d: kernel larger than padded input")
    xp = np.pad(xd, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else xd
    cols = _im2col(xp, k, stride, ho, wo)
    wmat = weight.data.reshape(cout, -1)
    out = wmat @ cols
    if bias is not None:
        out += bias.data[:, None]
    out = out.reshape(cout, n, ho, wo).transpose(1, 0, 2, 3)
    out = np.ascontiguousarray(out[0] if unbatched else out)
    pshape = xp.shape

    def backward(g):
        g4 = g[None] if unbatched else g
        gmat = g4.transpose(1, 0, 2, 3).reshape(cout, -1)
        gw = (gmat @ cols.T).reshape(weight.shape)
        gx = None
        if x.requires_grad:
            gxp = _col2im(wmat.T @ gmat, pshape, k, stride, ho, wo)
            if padding:
                gxp = gxp[:, :, padding:-padding, padding:-padding]
            gx = np.ascontiguousarray(gxp[0] if unbatched else gxp)
        if bias is None:
            return gx, gw
        return gx, gw, gmat.sum(axis=1)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return make_result(out, parents, backward, "conv2d")


def unfold(x: Tensor, k: int) -> Tensor:
    """Stack each k x k zero-padded neighbourhood along channels.

    (N, C, H, W) -> (N, C*k*k, H, W), channel index = c*k*k + di*k + dj, so
    each input channel contributes its neighbours in row-major order.
    """
    if k % 2 == 0:
        raise ValueError(f"unfold needs an odd kernel, got {k}")
    if k == 1:
        return x
    n, c, h, w = x.shape
    pad = k // 2
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = _im2col(xp, k, 1, h, w)
    out = cols.reshape(c * k * k, n, h, w).transpose(1, 0, 2, 3)

    def backward(g):
        gcols = g.transpose(1, 0, 2, 3).reshape(c * k * k, -1)
        gxp = _col2im(gcols, xp.shape, k, 1, h, w)
        return (np.ascontiguousarray(gxp[:, :, pad:-pad, pad:-pad]),)

    return make_result(np.ascontiguousarray(out), (x,), backward, "unfold")


def max_pool2d(x: Tensor, size: int = 2) -> Tensor:
    """Non-overlapping max pooling; ties route the gradient to the first max."""
    n, c, h, w = x.shape
    ho, wo = h // size, w // size
    xd = x.data[:, :, : ho * size, : wo * size]
    win = xd.reshape(n, c, ho, size, wo, size).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho, wo, size * size)
    arg = win.argmax(axis=-1)
    out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
    if _KINK_MONITORS:
        srt = np.sort(win, axis=-1)
        # windows whose max is an exact 0 stem from ReLU dead zones; those
        # margins are already tracked by relu, and the pool is flat there
        gap = (srt[..., -1] - srt[..., -2])[srt[..., -1] != 0]
        if gap.size:
            _observe_kinks(gap)

    def backward(g):
        gwin = np.zeros(win.shape, dtype=g.dtype)
        np.put_along_axis(gwin, arg[..., None], g[..., None], axis=-1)
        gx = np.zeros(x.shape, dtype=g.dtype)
        gx[:, :, : ho * size, : wo * size] = (
            gwin.reshape(n, c, ho, wo, size, size).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho * size, wo * size)
        )
        return (gx,)

    return make_result(np.ascontiguousarray(out), (x,), backward, "max_pool2d")


# -- losses -------------------------------------------------------------------
def l1_loss(pred: Tensor, target) -> Tensor:
    """Mean absolute error; subgradient 0 where pred == target."""
    target = target.data if isinstance(target, Tensor) else np.asarray(target)
    if pred.shape != target.shape:
        raise ValueError(f"l1_loss shape mismatch {pred.shape} vs {target.shape}")
    diff = pred.data - target
    if _KINK_MONITORS:
        _observe_kinks(diff)
    n = diff.size
    sgn = np.sign(diff)
    return make_result(
        np.asarray(np.abs(diff).mean(), dtype=pred.dtype),
        (pred,),
        lambda g: (sgn * (g / n),),
        "l1_loss",
    )


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean over the batch of -log softmax(logits)[label]."""
    labels = np.asarray(labels, dtype=np.intp)
    z = logits.data
    if z.ndim != 2 or labels.shape != (z.shape[0],):
        raise ValueError(f"expected logits (N, L) and labels (N,), got {z.shape} and {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= z.shape[1]):
        raise ValueError("label out of range")
    n = z.shape[0]
    shifted = z - z.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    logp = shifted - lse[:, None]
    loss = -logp[np.arange(n), labels].mean()

    def backward(g):
        p = np.exp(logp)
        p[np.arange(n), labels] -= 1.0
        return (p * (g / n),)

    return make_result(np.asarray(loss, dtype=z.dtype), (logits,), backward, "softmax_cross_entropy")
