"""Differentiable primitives.

Every function accepts plain ``numpy`` arrays or :class:`Var` handles.  With
no ``Var`` among the operands the result is a plain array and nothing is
recorded, so the same model code serves inference and training.
"""

from __future__ import annotations

import numpy as np

from .tape import ShapeError, Tape, Var


def tensor(data, checked: bool = True) -> np.ndarray:
    """Build a float64 array; in checked mode reject NaN/Inf entries."""
    arr = np.array(data, dtype=np.float64)
    if checked and not np.all(np.isfinite(arr)):
        raise ValueError("tensor contains non-finite entries")
    return arr


def value(a) -> np.ndarray:
    return a.value if isinstance(a, Var) else np.asarray(a, dtype=np.float64)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _apply(op: str, out: np.ndarray, args, vjps):
    """Record ``out`` on the tape of the Var operands.

    ``vjps[i](g)`` returns the gradient for positional argument ``i``; it is
    only evaluated for arguments that are Vars.
    """
    tape: Tape | None = None
    parents, fns = [], []
    for a, fn in zip(args, vjps):
        if isinstance(a, Var):
            if tape is None:
                tape = a.tape
            elif a.tape is not tape:
                raise ValueError("operands recorded on different tapes")
            parents.append(a.index)
            fns.append(fn)
    if tape is None:
        return out
    return tape.record(op, out, parents, lambda g: [f(g) for f in fns])


# -- elementwise arithmetic ---------------------------------------------------

def add(a, b):
    va, vb = value(a), value(b)
    return _apply("add", va + vb, (a, b),
                  (lambda g: _unbroadcast(g, va.shape), lambda g: _unbroadcast(g, vb.shape)))


def sub(a, b):
    va, vb = value(a), value(b)
    return _apply("sub", va - vb, (a, b),
                  (lambda g: _unbroadcast(g, va.shape), lambda g: _unbroadcast(-g, vb.shape)))


def mul(a, b):
    va, vb = value(a), value(b)
    return _apply("mul", va * vb, (a, b),
                  (lambda g: _unbroadcast(g * vb, va.shape),
                   lambda g: _unbroadcast(g * va, vb.shape)))


def div(a, b):
    va, vb = value(a), value(b)
    return _apply("div", va / vb, (a, b),
                  (lambda g: _unbroadcast(g / vb, va.shape),
                   lambda g: _unbroadcast(-g * va / vb**2, vb.shape)))


def neg(a):
    return _apply("neg", -value(a), (a,), (lambda g: -g,))


def square(a):
    va = value(a)
    return _apply("square", va * va, (a,), (lambda g: 2.0 * va * g,))


def absolute(a):
    va = value(a)
    return _apply("abs", np.abs(va), (a,), (lambda g: g * np.sign(va),))


def clamp_min(a, lo: float):
    va = value(a)
    return _apply("clamp_min", np.maximum(va, lo), (a,), (lambda g: g * (va > lo),))


def log(a):
    va = value(a)
    return _apply("log", np.log(va), (a,), (lambda g: g / va,))


def sigmoid(a):
    va = value(a)
    out = 0.5 * (1.0 + np.tanh(0.5 * va))
    return _apply("sigmoid", out, (a,), (lambda g: g * out * (1.0 - out),))


def tanh(a):
    out = np.tanh(value(a))
    return _apply("tanh", out, (a,), (lambda g: g * (1.0 - out**2),))


def softsign(a):
    """x / (1 + |x|), range (-1, 1)."""
    va = value(a)
    denom = 1.0 + np.abs(va)
    return _apply("softsign", va / denom, (a,), (lambda g: g / denom**2,))


# -- linear algebra and reductions --------------------------------------------

def matmul(a, b):
    va, vb = value(a), value(b)
    if va.ndim != 2 or vb.ndim != 2 or va.shape[1] != vb.shape[0]:
        raise ShapeError(f"matmul shapes {va.shape} and {vb.shape} do not align")
    return _apply("matmul", va @ vb, (a, b), (lambda g: g @ vb.T, lambda g: va.T @ g))


def transpose(a):
    return _apply("transpose", value(a).T, (a,), (lambda g: g.T,))


def sum_(a, axis=None, keepdims: bool = False):
    va = value(a)
    out = np.sum(va, axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, va.shape).copy()

    return _apply("sum", np.asarray(out), (a,), (vjp,))


def mean(a, axis=None):
    va = value(a)
    n = va.size if axis is None else va.shape[axis]
    return mul(sum_(a, axis=axis), 1.0 / n)


def l1_norm(a, axis=None, keepdims: bool = False):
    """Sum of absolute values; backward uses sign with 0 at 0."""
    va = value(a)
    out = np.sum(np.abs(va), axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return g * np.sign(va)

    return _apply("l1_norm", np.asarray(out), (a,), (vjp,))


def l2_norm(a, axis=None, keepdims: bool = False):
    va = value(a)
    out = np.sqrt(np.sum(va * va, axis=axis, keepdims=keepdims))

    def vjp(g):
        o = out
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
            o = np.expand_dims(o, axis)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(o > 0, g * va / np.where(o > 0, o, 1.0), 0.0)

    return _apply("l2_norm", np.asarray(out), (a,), (vjp,))


def getitem(a, idx):
    va = value(a)

    def vjp(g):
        full = np.zeros_like(va)
        full[idx] += g
        return full

    return _apply("getitem", np.array(va[idx]), (a,), (vjp,))


def concat(parts, axis: int = -1):
    vals = [value(p) for p in parts]
    out = np.concatenate(vals, axis=axis)
    bounds = np.cumsum([v.shape[axis] for v in vals])[:-1]

    def piece(i):
        return lambda g: np.split(g, bounds, axis=axis)[i]

    return _apply("concat", out, tuple(parts), tuple(piece(i) for i in range(len(parts))))


# -- thresholding ---------------------------------------------------------------

def soft_threshold(x, theta):
    """sign(x) * max(0, |x| - theta), broadcasting ``theta`` against ``x``.

    The derivative is 1 (w.r.t. x) where |x| > theta and 0 elsewhere,
    including the kink itself.
    """
    vx, vt = value(x), value(theta)
    active = np.abs(vx) > vt
    sx = np.sign(vx)
    out = sx * np.maximum(0.0, np.abs(vx) - vt)
    return _apply("soft_threshold", out, (x, theta),
                  (lambda g: g * active,
                   lambda g: _unbroadcast(-g * sx * active, vt.shape)))


def exemption_mask(x: np.ndarray, count: int) -> np.ndarray:
    """Boolean mask of the ``count`` largest |x| per row (lowest index wins ties)."""
    x = np.atleast_2d(x)
    mask = np.zeros(x.shape, dtype=bool)
    if count <= 0:
        return mask
    n = x.shape[-1]
    if count >= n:
        mask[...] = True
        return mask
    mag = np.abs(x)
    kth = np.partition(mag, n - count, axis=-1)[..., n - count: n - count + 1]
    above = mag > kth
    ties = mag == kth
    needed = count - above.sum(axis=-1, keepdims=True)
    if np.all(ties.sum(axis=-1, keepdims=True) == needed):
        return above | ties
    return above | (ties & (np.cumsum(ties, axis=-1) <= needed))


def support_select_threshold(x, theta, count: int):
    """Soft thresholding that passes the ``count`` largest-magnitude entries unchanged."""
    vx, vt = value(x), value(theta)
    vx2 = np.atleast_2d(vx)
    exempt = exemption_mask(vx2, count).reshape(vx.shape)
    if not exempt.any():
        return soft_threshold(x, theta)
    active = (np.abs(vx) > vt) & ~exempt
    sx = np.sign(vx)
    shrunk = sx * np.maximum(0.0, np.abs(vx) - vt)
    out = np.where(exempt, vx, shrunk)
    pass_x = exempt | active
    return _apply("support_select_threshold", out, (x, theta),
                  (lambda g: g * pass_x,
                   lambda g: _unbroadcast(-g * sx * active, vt.shape)))


# -- operator overloads -----------------------------------------------------------

Var.__add__ = lambda s, o: add(s, o)
Var.__radd__ = lambda s, o: add(o, s)
Var.__sub__ = lambda s, o: sub(s, o)
Var.__rsub__ = lambda s, o: sub(o, s)
Var.__mul__ = lambda s, o: mul(s, o)
Var.__rmul__ = lambda s, o: mul(o, s)
Var.__truediv__ = lambda s, o: div(s, o)
Var.__rtruediv__ = lambda s, o: div(o, s)
Var.__neg__ = lambda s: neg(s)
Var.__matmul__ = lambda s, o: matmul(s, o)
Var.__rmatmul__ = lambda s, o: matmul(o, s)
Var.__getitem__ = lambda s, idx: getitem(s, idx)
Var.T = property(lambda s: transpose(s))
