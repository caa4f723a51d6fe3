"""Reverse-mode autodiff over dense numpy arrays.

Small tape-based engine: each op builds a child Tensor holding a closure
that pushes gradients to its parents.  float32 is the working precision;
float64 tensors are supported for the finite-difference test harness.
Elementwise ops broadcast numpy-style and reduce gradients back.
"""

import numpy as np


class ShapeError(ValueError):
    pass


class Tensor:
    def __init__(self, data, requires_grad=False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.asarray(data, dtype=dtype or getattr(data, "dtype", None))
        if self.data.dtype not in (np.float32, np.float64):
            self.data = self.data.astype(np.float32)
        self.grad = None
        self.requires_grad = requires_grad
        self._backward = None
        self._prev = ()

    # -- plumbing -----------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, grad={self.grad is not None})"

    def _ensure(self, other):
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.dtype))

    def accumulate_grad(self, g):
        # first contribution is adopted without a copy; grads may alias
        # sibling tensors' grads, so only add in place once we own it
        if self.grad is None:
            self.grad = g
            self._grad_owned = False
        elif not getattr(self, "_grad_owned", True):
            self.grad = self.grad + g
            self._grad_owned = True
        else:
            self.grad += g

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data)

    def backward(self):
        if self.data.size != 1:
            raise ShapeError(f"backward() needs a scalar loss, got shape {self.data.shape}")
        topo, seen = [], set()

        def build(t):
            if id(t) in seen:
                return
            seen.add(id(t))
            for p in t._prev:
                build(p)
            topo.append(t)

        build(self)
        self.grad = np.ones_like(self.data)
        for t in reversed(topo):
            if t._backward is not None:
                t._backward()
            if t._prev:
                # interior node: its grad is fully consumed and its closure
                # (holding saved activations) is dead; free both
                t.grad = None
                t._backward = None
                t._prev = ()

    # -- elementwise with broadcasting ---------------------------------

    def __add__(self, other):
        other = self._ensure(other)
        out = _node(self.data + other.data, (self, other))

        def back():
            if self.requires_grad:
                self.accumulate_grad(_unbroadcast(out.grad, self.shape))
            if other.requires_grad:
                other.accumulate_grad(_unbroadcast(out.grad, other.shape))
        out._backward = back
        return out

    def __mul__(self, other):
        other = self._ensure(other)
        out = _node(self.data * other.data, (self, other))

        def back():
            if self.requires_grad:
                self.accumulate_grad(_unbroadcast(out.grad * other.data, self.shape))
            if other.requires_grad:
                other.accumulate_grad(_unbroadcast(out.grad * self.data, other.shape))
        out._backward = back
        return out

    def __sub__(self, other):
        return self + (self._ensure(other) * -1.0)

    def __neg__(self):
        return self * -1.0

    def __truediv__(self, other):
        other = self._ensure(other)
        out = _node(self.data / other.data, (self, other))

        def back():
            if self.requires_grad:
                self.accumulate_grad(_unbroadcast(out.grad / other.data, self.shape))
            if other.requires_grad:
                g = -out.grad * self.data / (other.data * other.data)
                other.accumulate_grad(_unbroadcast(g, other.shape))
        out._backward = back
        return out

    def __radd__(self, other):
        return self + other

    def __rmul__(self, other):
        return self * other

    def __rsub__(self, other):
        return self._ensure(other) - self

    def __pow__(self, p):
        assert np.isscalar(p)
        out = _node(self.data ** p, (self,))

        def back():
            if self.requires_grad:
                self.accumulate_grad(out.grad * p * self.data ** (p - 1))
        out._backward = back
        return out

    # -- unary ----------------------------------------------------------

    def log(self):
        out = _node(np.log(self.data), (self,))

        def back():
            if self.requires_grad:
                self.accumulate_grad(out.grad / self.data)
        out._backward = back
        return out

    def exp(self):
        out = _node(np.exp(self.data), (self,))

        def back():
            if self.requires_grad:
                self.accumulate_grad(out.grad * out.data)
        out._backward = back
        return out

    def sqrt(self):
        out = _node(np.sqrt(self.data), (self,))

        def back():
            if self.requires_grad:
                self.accumulate_grad(out.grad * 0.5 / out.data)
        out._backward = back
        return out

    def relu(self):
        out = _node(np.maximum(self.data, 0), (self,))

        def back():
            if self.requires_grad:
                self.accumulate_grad(out.grad * (self.data > 0))
        out._backward = back
        return out

    def sigmoid(self):
        with np.errstate(over="ignore"):
            y = 1.0 / (1.0 + np.exp(-self.data))
        out = _node(y, (self,))

        def back():
            if self.requires_grad:
                self.accumulate_grad(out.grad * out.data * (1.0 - out.data))
        out._backward = back
        return out

    def clip(self, lo, hi):
        """Clamp values; gradient passes through the interior only."""
        out = _node(np.clip(self.data, lo, hi), (self,))

        def back():
            if self.requires_grad:
                inside = (self.data >= lo) & (self.data <= hi)
                self.accumulate_grad(out.grad * inside)
        out._backward = back
        return out

    # -- shape ----------------------------------------------------------

    def reshape(self, *shape):
        out = _node(self.data.reshape(*shape), (self,))

        def back():
            if self.requires_grad:
                self.accumulate_grad(out.grad.reshape(self.shape))
        out._backward = back
        return out

    def transpose(self, *axes):
        axes = axes or tuple(reversed(range(self.data.ndim)))
        inv = np.argsort(axes)
        out = _node(self.data.transpose(axes), (self,))

        def back():
            if self.requires_grad:
                self.accumulate_grad(out.grad.transpose(inv))
        out._backward = back
        return out

    @property
    def T(self):
        return self.transpose()

    # -- reductions / matmul ---------------------------------------------

    def sum(self, axis=None, keepdims=False):
        out = _node(self.data.sum(axis=axis, keepdims=keepdims), (self,))

        def back():
            if self.requires_grad:
                g = out.grad
                if axis is not None and not keepdims:
                    g = np.expand_dims(g, axis)
                self.accumulate_grad(np.broadcast_to(g, self.shape).astype(self.dtype))
        out._backward = back
        return out

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def max(self, axis=None, keepdims=False):
        out = _node(self.data.max(axis=axis, keepdims=keepdims), (self,))

        def back():
            if self.requires_grad:
                g = out.grad
                m = out.data
                if axis is not None and not keepdims:
                    g = np.expand_dims(g, axis)
                    m = np.expand_dims(m, axis)
                mask = (self.data == m)
                # split gradient among ties to stay a subgradient
                counts = mask.sum(axis=axis, keepdims=True) if axis is not None else mask.sum()
                self.accumulate_grad(g * mask / counts)
        out._backward = back
        return out

    def matmul(self, other):
        other = self._ensure(other)
        out = _node(self.data @ other.data, (self, other))

        def back():
            if self.requires_grad:
                self.accumulate_grad(out.grad @ other.data.swapaxes(-1, -2))
            if other.requires_grad:
                other.accumulate_grad(self.data.swapaxes(-1, -2) @ out.grad)
        out._backward = back
        return out

    def __matmul__(self, other):
        return self.matmul(other)

    def item(self):
        return float(self.data)


def _node(data, prev):
    out = Tensor(data)
    out.requires_grad = any(p.requires_grad for p in prev)
    out._prev = tuple(prev) if out.requires_grad else ()
    return out


def _unbroadcast(grad, shape):
    """Sum a broadcast gradient back down to `shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and grad.shape[i] != 1:
            grad = grad.sum(axis=i, keepdims=True)
    return grad.reshape(shape)


def check_finite(t, what="tensor"):
    if not np.all(np.isfinite(t.data)):
        raise FloatingPointError(f"non-finite values in {what}")
    return t
