"""Dense float64 tensor engine with reverse-mode differentiation.

Tensors are immutable value carriers (NCHW convention for feature maps).
Differentiable operations record their inputs and a vector-Jacobian product
closure on the output tensor; ``Tensor.backward`` replays the recorded graph
in reverse topological order. Only the operations the attention modules and
the reconstruction harness need are provided; broadcasting follows NumPy
rules with gradient reduction over the broadcast axes.
"""

from __future__ import annotations

import numpy as np

from bioattn import kernels
from bioattn.errors import ConfigurationError, ShapeError


class Tensor:
    """Immutable dense array of float64 plus an optional gradient record.

    ``requires_grad=True`` marks a leaf (trainable or checked input); its
    ``grad`` starts at zeros so leaves that never participate in a backward
    pass report a zero gradient rather than None.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.array(data, dtype=np.float64, order="C")
        if 0 in arr.shape:
            raise ShapeError(f"tensor extents must be positive, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("tensor data must be finite")
        arr.flags.writeable = False
        self.data = arr
        self.requires_grad = requires_grad
        self.grad = np.zeros(arr.shape) if requires_grad else None
        self._parents = ()
        self._vjp = None

    @classmethod
    def _make(cls, arr, parents=(), vjp=None):
        t = cls.__new__(cls)
        arr = np.ascontiguousarray(arr, dtype=np.float64)
        arr.flags.writeable = False
        t.data = arr
        t.requires_grad = any(p.requires_grad for p in parents)
        t.grad = None
        t._parents = tuple(parents) if t.requires_grad else ()
        t._vjp = vjp if t.requires_grad else None
        return t

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        if self.size != 1:
            raise ShapeError(f"item() requires a single-element tensor, got {self.shape}")
        return float(self.data.reshape(()))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.data, dtype=dtype)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- autodiff ---------------------------------------------------------

    def backward(self):
        """Accumulate gradients of this scalar into every reachable tensor."""
        if self.size != 1:
            raise ShapeError(f"backward requires a scalar output, got shape {self.shape}")
        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        if self.grad is None:
            self.grad = np.ones(self.shape)
        else:
            self.grad = self.grad + np.ones(self.shape)
        for node in reversed(topo):
            if node._vjp is None:
                continue
            for parent, pg in zip(node._parents, node._vjp(node.grad)):
                if not parent.requires_grad or pg is None:
                    continue
                if parent.grad is None:
                    parent.grad = np.zeros(parent.shape)
                parent.grad = parent.grad + pg

    # -- operators --------------------------------------------------------

    def __add__(self, other):
        return add(self, _coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __neg__(self):
        return _from_op(-self.data, (self,), lambda g: (-g,))

    def __pow__(self, p):
        return power(self, p)

    def sum(self, axis=None, keepdims=False):
        return tensor_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tensor_mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, shape):
        return reshape(self, shape)

    def sqrt(self):
        return sqrt(self)


def _coerce(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    # copy so freezing never touches a caller-owned array
    return Tensor._make(np.array(x, dtype=np.float64))


def _from_op(data, parents, vjp) -> Tensor:
    return Tensor._make(data, parents=parents, vjp=vjp)


def _unbroadcast(g, shape):
    """Reduce gradient ``g`` back to ``shape`` after NumPy broadcasting."""
    if g.shape == tuple(shape):
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# -- elementwise arithmetic -------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    return _from_op(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a: Tensor, b: Tensor) -> Tensor:
    return _from_op(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    return _from_op(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def div(a: Tensor, b: Tensor) -> Tensor:
    return _from_op(
        a.data / b.data,
        (a, b),
        lambda g: (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        ),
    )


def power(x: Tensor, p: float) -> Tensor:
    p = float(p)
    data = np.power(x.data, p)
    return _from_op(data, (x,), lambda g: (g * p * np.power(x.data, p - 1.0),))


def exp(x: Tensor) -> Tensor:
    data = np.exp(x.data)
    return _from_op(data, (x,), lambda g: (g * data,))


def sqrt(x: Tensor) -> Tensor:
    data = np.sqrt(x.data)
    return _from_op(data, (x,), lambda g: (g * 0.5 / data,))


def relu(x: Tensor) -> Tensor:
    data = np.maximum(x.data, 0.0)
    return _from_op(data, (x,), lambda g: (g * (x.data > 0.0),))


def clamp_min(x: Tensor, lo: float) -> Tensor:
    """Elementwise floor; gradient is zero on the clamped region."""
    data = np.maximum(x.data, lo)
    return _from_op(data, (x,), lambda g: (g * (x.data > lo),))


def sigmoid(x: Tensor) -> Tensor:
    """Logistic function 1/(1+exp(-x)), numerically stable on both tails."""
    v = x.data
    data = np.empty_like(v)
    pos = v >= 0
    data[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    data[~pos] = ev / (1.0 + ev)
    return _from_op(data, (x,), lambda g: (g * data * (1.0 - data),))


# -- reductions and shape ops ------------------------------------------------


def _norm_axis(axis):
    if axis is None or isinstance(axis, tuple):
        return axis
    return (int(axis),)


def tensor_sum(x: Tensor, axis=None, keepdims=False) -> Tensor:
    axis = _norm_axis(axis)
    data = x.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape),)

    return _from_op(data, (x,), vjp)


def tensor_mean(x: Tensor, axis=None, keepdims=False) -> Tensor:
    axis = _norm_axis(axis)
    if axis is None:
        count = x.size
    else:
        count = int(np.prod([x.shape[a] for a in axis]))
    return tensor_sum(x, axis=axis, keepdims=keepdims) / float(count)


def reshape(x: Tensor, shape) -> Tensor:
    shape = tuple(int(s) for s in shape)
    return _from_op(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


# -- pooling, normalization and layer operations ------------------------------


def global_avg_pool(x: Tensor) -> Tensor:
    """Spatial mean per channel: N x C x H x W -> N x C."""
    if x.ndim != 4:
        raise ShapeError(f"global_avg_pool expects a rank-4 tensor, got {x.shape}")
    n, c, h, w = x.shape
    scale = 1.0 / (h * w)
    data = x.data.mean(axis=(2, 3))

    def vjp(g):
        return (np.broadcast_to(g[:, :, None, None] * scale, x.shape),)

    return _from_op(data, (x,), vjp)


def l2_normalize(v: Tensor, eps: float = 1e-12) -> Tensor:
    """Scale each row of an N x C tensor by 1/(||row||_2 + eps)."""
    if eps <= 0:
        raise ConfigurationError("l2_normalize eps must be positive")
    if v.ndim != 2:
        raise ShapeError(f"l2_normalize expects a rank-2 tensor, got {v.shape}")
    norm = sqrt((v * v).sum(axis=1, keepdims=True))
    return v / (norm + eps)


def spatial_moments(x: Tensor):
    """Per-channel spatial mean and variance (denominator H*W - 1)."""
    if x.ndim != 4:
        raise ShapeError(f"spatial_moments expects a rank-4 tensor, got {x.shape}")
    n, c, h, w = x.shape
    if h * w < 2:
        raise ShapeError("spatial_moments needs at least 2 spatial elements")
    mean = global_avg_pool(x)
    dev = x - mean.reshape((n, c, 1, 1))
    var = (dev * dev).sum(axis=(2, 3)) / float(h * w - 1)
    return mean, var


def conv1d_channels(v: Tensor, kernel: Tensor) -> Tensor:
    """Zero-padded 1-D convolution across the channel axis of an N x C tensor."""
    if v.ndim != 2:
        raise ShapeError(f"conv1d_channels expects a rank-2 tensor, got {v.shape}")
    if kernel.ndim != 1:
        raise ShapeError(f"kernel must be rank-1, got {kernel.shape}")
    k = kernel.shape[0]
    if k % 2 == 0:
        raise ConfigurationError(f"kernel length must be odd, got {k}")
    n, c = v.shape
    half = (k - 1) // 2
    vp = np.zeros((n, c + 2 * half))
    vp[:, half:half + c] = v.data
    kd = kernel.data
    out = np.zeros((n, c))
    for j in range(k):
        out += kd[j] * vp[:, j:j + c]

    def vjp(g):
        gvp = np.zeros((n, c + 2 * half))
        gk = np.zeros(k)
        for j in range(k):
            gvp[:, j:j + c] += kd[j] * g
            gk[j] = np.sum(vp[:, j:j + c] * g)
        return (gvp[:, half:half + c], gk)

    return _from_op(out, (v, kernel), vjp)


def dense(v: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map out = v @ weight.T (+ bias) for v: N x C, weight: M x C."""
    if v.ndim != 2 or weight.ndim != 2:
        raise ShapeError("dense expects rank-2 input and weight")
    if v.shape[1] != weight.shape[1]:
        raise ShapeError(f"dense inner extents disagree: {v.shape} vs {weight.shape}")
    out = v.data @ weight.data.T
    if bias is None:
        return _from_op(out, (v, weight), lambda g: (g @ weight.data, g.T @ v.data))
    if bias.shape != (weight.shape[0],):
        raise ShapeError(f"bias shape {bias.shape} does not match {weight.shape[0]} rows")
    return _from_op(
        out + bias.data[None, :],
        (v, weight, bias),
        lambda g: (g @ weight.data, g.T @ v.data, g.sum(axis=0)),
    )


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None,
           stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation convolution on NCHW input, routed to the kernel backend."""
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError("conv2d expects rank-4 input and weight")
    n, c, h, w = x.shape
    f, cw, kh, kw = weight.shape
    if cw != c:
        raise ShapeError(f"channel mismatch: input {c}, weight {cw}")
    if stride < 1 or padding < 0:
        raise ConfigurationError("stride must be >= 1 and padding >= 0")
    for extent, kk in ((h, kh), (w, kw)):
        span = extent + 2 * padding - kk
        if span < 0 or span % stride != 0:
            raise ShapeError(
                f"non-integral conv2d output extent for input {extent}, "
                f"kernel {kk}, stride {stride}, padding {padding}"
            )
    bd = None if bias is None else bias.data
    out = kernels.conv2d_forward(x.data, weight.data, bd, stride, padding)

    def vjp(g):
        gx, gw, gb = kernels.conv2d_backward(x.data, weight.data, g, stride, padding)
        if bias is None:
            return (gx, gw)
        return (gx, gw, gb)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return _from_op(out, parents, vjp)


# -- gradient checking --------------------------------------------------------


def grad_check(f, x, h: float = 1e-5) -> float:
    """Compare reverse-mode gradients of a scalar function against central
    finite differences.

    ``x`` may be a single tensor or a sequence of tensors; the return value is
    the worst relative error |g_ad - g_fd| / max(1, |g_ad|, |g_fd|) over all
    coordinates of all inputs.
    """
    if h <= 0:
        raise ConfigurationError("grad_check step h must be positive")
    xs = [x] if isinstance(x, Tensor) else list(x)
    leaves = [Tensor(t.data, requires_grad=True) for t in xs]
    out = f(*leaves)
    if out.size != 1:
        raise ShapeError("grad_check requires a scalar-valued function")
    out.backward()
    base = [t.data for t in xs]
    worst = 0.0
    for li in range(len(xs)):
        g_ad = leaves[li].grad.ravel()
        flat = base[li].ravel()
        for idx in range(flat.size):
            up = flat.copy()
            up[idx] += h
            dn = flat.copy()
            dn[idx] -= h
            args_up = [Tensor(up.reshape(base[li].shape)) if i == li else Tensor(base[i])
                       for i in range(len(xs))]
            args_dn = [Tensor(dn.reshape(base[li].shape)) if i == li else Tensor(base[i])
                       for i in range(len(xs))]
            g_fd = (f(*args_up).item() - f(*args_dn).item()) / (2.0 * h)
            err = abs(g_ad[idx] - g_fd) / max(1.0, abs(g_ad[idx]), abs(g_fd))
            worst = max(worst, err)
    return worst
