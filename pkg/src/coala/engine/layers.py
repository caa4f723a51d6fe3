"""Layer set used by the networks: conv, transposed conv, linear,
batchnorm, relu, sigmoid, dropout.

Functional ops build autodiff nodes with hand-written backward passes
(conv goes through the kernels backend); Module classes own parameters,
buffers and the train/eval flag.
"""

import numpy as np

from .tensor import Tensor, ShapeError, _node
from . import kernels

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


# ---------------------------------------------------------------- functional

def conv2d(x, w, b, stride=(1, 1), padding=(0, 0)):
    """Cross-correlation of [B,Cin,H,W] with weights [Cout,Cin,kh,kw]."""
    sh, sw = stride
    ph, pw = padding
    bsz, cin, h, wd = x.shape
    cout, cin_w, kh, kw = w.shape
    if cin != cin_w:
        raise ShapeError(f"conv2d: input {x.shape} does not match weights {w.shape}")
    if h + 2 * ph < kh or wd + 2 * pw < kw:
        raise ShapeError(f"conv2d: input {x.shape} smaller than kernel {w.shape} with padding {padding}")
    ho = (h + 2 * ph - kh) // sh + 1
    wo = (wd + 2 * pw - kw) // sw + 1

    cols = kernels.im2col(x.data, kh, kw, sh, sw, ph, pw)   # [B, CKK, L]
    wmat = w.data.reshape(cout, cin * kh * kw)
    y = wmat @ cols                                          # [B, Cout, L]
    if b is not None:
        y = y + b.data[:, None]
    out = _node(y.reshape(bsz, cout, ho, wo), (x, w, b) if b is not None else (x, w))

    def back():
        dy = out.grad.reshape(bsz, cout, ho * wo)
        if w.requires_grad:
            # sum_b dy[b] @ cols[b].T as one BLAS call over merged (b,l)
            dy_flat = np.ascontiguousarray(dy.transpose(1, 0, 2)).reshape(cout, -1)
            cols_flat = np.ascontiguousarray(cols.transpose(0, 2, 1)).reshape(-1, cin * kh * kw)
            w.accumulate_grad((dy_flat @ cols_flat).reshape(w.shape))
        if b is not None and b.requires_grad:
            b.accumulate_grad(dy.sum(axis=(0, 2)))
        if x.requires_grad:
            dcols = np.matmul(wmat.T[None], dy)
            x.accumulate_grad(kernels.col2im(dcols, cin, h, wd, kh, kw, sh, sw, ph, pw))
    out._backward = back
    return out


def conv_transpose2d(x, w, b, stride=(1, 1), padding=(0, 0)):
    """Transposed conv of [B,Cin,H,W] with weights [Cin,Cout,kh,kw].

    Forward is the linear adjoint of conv2d with the same geometry.
    """
    sh, sw = stride
    ph, pw = padding
    bsz, cin, hi, wi = x.shape
    cin_w, cout, kh, kw = w.shape
    if cin != cin_w:
        raise ShapeError(f"conv_transpose2d: input {x.shape} does not match weights {w.shape}")
    ho = (hi - 1) * sh - 2 * ph + kh
    wo = (wi - 1) * sw - 2 * pw + kw

    xmat = x.data.reshape(bsz, cin, hi * wi)
    wmat = w.data.reshape(cin, cout * kh * kw)
    cols = np.ascontiguousarray(np.matmul(wmat.T[None], xmat))  # [B, Cout*kh*kw, L]
    z = kernels.col2im(cols, cout, ho, wo, kh, kw, sh, sw, ph, pw)
    if b is not None:
        z = z + b.data[None, :, None, None]
    out = _node(z, (x, w, b) if b is not None else (x, w))

    def back():
        dz = out.grad
        dcols = kernels.im2col(dz, kh, kw, sh, sw, ph, pw)   # [B, Cout*kh*kw, L]
        if w.requires_grad:
            xm = np.ascontiguousarray(xmat.transpose(1, 0, 2)).reshape(cin, -1)
            dc = np.ascontiguousarray(dcols.transpose(0, 2, 1)).reshape(-1, cout * kh * kw)
            w.accumulate_grad((xm @ dc).reshape(w.shape))
        if b is not None and b.requires_grad:
            b.accumulate_grad(dz.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            dx = np.matmul(wmat[None], dcols)
            x.accumulate_grad(dx.reshape(x.shape))
    out._backward = back
    return out


def linear(x, w, b):
    """x [B,in] with weights [out,in]."""
    if x.shape[-1] != w.shape[1]:
        raise ShapeError(f"linear: input {x.shape} does not match weights {w.shape}")
    out = x.matmul(w.T)
    return out + b if b is not None else out


def batchnorm(x, gamma, beta, running_mean, running_var, training,
              eps=BN_EPS, momentum=BN_MOMENTUM):
    """Normalize per channel (axis 1); returns the output tensor.

    Training mode normalizes with batch statistics and updates the
    running buffers in place; eval mode uses the running buffers.
    """
    axes = (0,) if x.data.ndim == 2 else (0, 2, 3)
    shape = [1] * x.data.ndim
    shape[1] = x.shape[1]

    if training:
        if x.shape[0] < 2:
            raise ValueError("batchnorm: training mode needs batch size >= 2 (variance undefined)")
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        running_var *= 1.0 - momentum
        running_var += momentum * var

        ivar = 1.0 / np.sqrt(var + eps).reshape(shape)
        xhat = (x.data - mu.reshape(shape)) * ivar
        y = gamma.data.reshape(shape) * xhat + beta.data.reshape(shape)
        out = _node(y.astype(x.dtype), (x, gamma, beta))
        m = x.data.size // x.shape[1]

        def back():
            dy = out.grad
            if gamma.requires_grad:
                gamma.accumulate_grad((dy * xhat).sum(axis=axes))
            if beta.requires_grad:
                beta.accumulate_grad(dy.sum(axis=axes))
            if x.requires_grad:
                s1 = dy.sum(axis=axes, keepdims=True)
                s2 = (dy * xhat).sum(axis=axes, keepdims=True)
                dx = gamma.data.reshape(shape) * ivar / m * (m * dy - s1 - xhat * s2)
                x.accumulate_grad(dx.astype(x.dtype))
        out._backward = back
        return out

    # eval mode: fixed affine map from the running statistics
    ivar = (1.0 / np.sqrt(running_var + eps)).reshape(shape).astype(x.dtype)
    mu = running_mean.reshape(shape).astype(x.dtype)
    xhat = (x - Tensor(mu)) * Tensor(ivar)
    return xhat * gamma.reshape(*shape) + beta.reshape(*shape)


def dropout(x, rate, rng, training):
    """Inverted dropout: survivors scaled by 1/(1-rate)."""
    if not (0.0 <= rate < 1.0):
        raise ValueError(f"dropout rate must be in [0,1), got {rate}")
    if not training or rate == 0.0:
        return x
    u = rng.random(x.shape, dtype=np.float32) if x.dtype == np.float32 else rng.random(x.shape)
    mask = (u >= rate).astype(x.dtype) / (1.0 - rate)
    return x * Tensor(mask)


# ------------------------------------------------------------------- modules

def kaiming_uniform(rng, shape, fan_in):
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


class Module:
    def __init__(self):
        self.training = True

    def submodules(self):
        for v in self.__dict__.values():
            if isinstance(v, Module):
                yield v
            elif isinstance(v, (list, tuple)):
                for e in v:
                    if isinstance(e, Module):
                        yield e

    def train(self, mode=True):
        self.training = mode
        for m in self.submodules():
            m.train(mode)
        return self

    def eval(self):
        return self.train(False)

    def named_parameters(self, prefix=""):
        for name, v in self.__dict__.items():
            if isinstance(v, Tensor) and v.requires_grad:
                yield prefix + name, v
        for name, v in self.__dict__.items():
            if isinstance(v, Module):
                yield from v.named_parameters(prefix + name + ".")
            elif isinstance(v, (list, tuple)):
                for i, e in enumerate(v):
                    if isinstance(e, Module):
                        yield from e.named_parameters(f"{prefix}{name}.{i}.")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix=""):
        for name, v in self.__dict__.items():
            if isinstance(v, np.ndarray):
                yield prefix + name, v
        for name, v in self.__dict__.items():
            if isinstance(v, Module):
                yield from v.named_buffers(prefix + name + ".")
            elif isinstance(v, (list, tuple)):
                for i, e in enumerate(v):
                    if isinstance(e, Module):
                        yield from e.named_buffers(f"{prefix}{name}.{i}.")

    def set_dropout_rng(self, rng):
        if isinstance(self, Dropout):
            self.rng = rng
        for m in self.submodules():
            m.set_dropout_rng(rng)

    def __call__(self, x):
        return self.forward(x)


class Linear(Module):
    def __init__(self, in_features, out_features, rng):
        super().__init__()
        self.weight = Tensor(kaiming_uniform(rng, (out_features, in_features), in_features),
                             requires_grad=True)
        bound = 1.0 / np.sqrt(in_features)
        self.bias = Tensor(rng.uniform(-bound, bound, size=out_features).astype(np.float32),
                           requires_grad=True)

    def forward(self, x):
        return linear(x, self.weight, self.bias)


class Conv2d(Module):
    def __init__(self, in_channels, out_channels, kernel, stride, padding, rng):
        super().__init__()
        kh, kw = kernel
        fan_in = in_channels * kh * kw
        self.weight = Tensor(kaiming_uniform(rng, (out_channels, in_channels, kh, kw), fan_in),
                             requires_grad=True)
        bound = 1.0 / np.sqrt(fan_in)
        self.bias = Tensor(rng.uniform(-bound, bound, size=out_channels).astype(np.float32),
                           requires_grad=True)
        self.stride, self.padding = stride, padding

    def forward(self, x):
        return conv2d(x, self.weight, self.bias, self.stride, self.padding)


class ConvTranspose2d(Module):
    def __init__(self, in_channels, out_channels, kernel, stride, padding, rng):
        super().__init__()
        kh, kw = kernel
        fan_in = in_channels * kh * kw
        self.weight = Tensor(kaiming_uniform(rng, (in_channels, out_channels, kh, kw), fan_in),
                             requires_grad=True)
        bound = 1.0 / np.sqrt(fan_in)
        self.bias = Tensor(rng.uniform(-bound, bound, size=out_channels).astype(np.float32),
                           requires_grad=True)
        self.stride, self.padding = stride, padding

    def forward(self, x):
        return conv_transpose2d(x, self.weight, self.bias, self.stride, self.padding)


class BatchNorm(Module):
    def __init__(self, num_features):
        super().__init__()
        self.gamma = Tensor(np.ones(num_features, dtype=np.float32), requires_grad=True)
        self.beta = Tensor(np.zeros(num_features, dtype=np.float32), requires_grad=True)
        self.running_mean = np.zeros(num_features, dtype=np.float32)
        self.running_var = np.ones(num_features, dtype=np.float32)

    def forward(self, x):
        return batchnorm(x, self.gamma, self.beta, self.running_mean,
                         self.running_var, self.training)


class ReLU(Module):
    def forward(self, x):
        return x.relu()


class Sigmoid(Module):
    def forward(self, x):
        return x.sigmoid()


class Dropout(Module):
    def __init__(self, rate):
        super().__init__()
        if not (0.0 <= rate < 1.0):
            raise ValueError(f"dropout rate must be in [0,1), got {rate}")
        self.rate = rate
        self.rng = None

    def forward(self, x):
        rng = self.rng if self.rng is not None else np.random.default_rng(0)
        return dropout(x, self.rate, rng, self.training)


class Sequential(Module):
    def __init__(self, *layers):
        super().__init__()
        self.layers = list(layers)

    def forward(self, x):
        for layer in self.layers:
            x = layer(x)
        return x
