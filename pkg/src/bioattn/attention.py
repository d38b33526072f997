"""Channel attention zoo behind one forward contract.

Every module maps an N x C x H x W tensor to one of the same shape by
multiplying with a gate. The population-map gate (`BioAttention`), SimAM and
the Gaussian context gate are parameter-free; ECA, SE and LCT carry learnable
weights. ``param_count`` gives the analytic learnable-parameter totals used by
the comparison report.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from bioattn import tensor as T
from bioattn.errors import ConfigurationError, ShapeError
from bioattn.tenio import load_ten, save_ten
from bioattn.tensor import Tensor

PARAMETER_FREE_KINDS = ("bio", "simam", "gct", "identity")
ALL_KINDS = PARAMETER_FREE_KINDS + ("eca", "se", "lct")


@dataclass(frozen=True)
class BioConfig:
    """Hyperparameters of the population-map gate.

    ``wiring`` selects which pooled statistic feeds the density branch:
    v1 squashes the channel means through the sigmoid before L2-normalizing
    (keeps the base 1 + alpha*n1 >= 1), v2 normalizes the raw means and
    clamps the base at ``base_floor`` before the negative power.
    """

    alpha: float = 2.0
    b: float = 2.0
    lam: float = 1.0
    wiring: str = "v1"
    eps_norm: float = 1e-12
    base_floor: float = 1e-3

    def __post_init__(self):
        if self.alpha <= 0 or self.b <= 0 or self.lam <= 0:
            raise ConfigurationError("alpha, b and lam must be positive")
        if self.wiring not in ("v1", "v2"):
            raise ConfigurationError(f"unknown wiring {self.wiring!r}")
        if self.eps_norm <= 0 or self.base_floor <= 0:
            raise ConfigurationError("eps_norm and base_floor must be positive")


def _require_nchw(x: Tensor, kind: str) -> tuple:
    if x.ndim != 4:
        raise ShapeError(f"{kind} attention expects a rank-4 tensor, got {x.shape}")
    return x.shape


class AttentionModule:
    """Base class: shape-preserving forward, named learnable weights."""

    kind = "base"

    def __init__(self):
        self.weights: dict[str, Tensor] = {}

    def __call__(self, x: Tensor) -> Tensor:
        return self.forward(x)

    def forward(self, x: Tensor) -> Tensor:
        raise NotImplementedError

    @property
    def n_params(self) -> int:
        return sum(w.size for w in self.weights.values())

    def hyper(self) -> dict:
        return {}


class Identity(AttentionModule):
    kind = "identity"

    def forward(self, x: Tensor) -> Tensor:
        _require_nchw(x, self.kind)
        return x


class BioAttention(AttentionModule):
    """Parameter-free gate from the discrete population map.

    The pooled channel statistics play the role of the population density:
    one branch enters the density-dependent factor (1 + alpha*n1)^(-b), the
    other multiplies it, and lam scales the gate linearly.
    """

    kind = "bio"

    def __init__(self, cfg: BioConfig | None = None):
        super().__init__()
        self.cfg = cfg or BioConfig()

    def gate(self, x: Tensor) -> Tensor:
        _require_nchw(x, self.kind)
        cfg = self.cfg
        s = T.global_avg_pool(x)
        if cfg.wiring == "v1":
            t = T.sigmoid(s)
            n1 = T.l2_normalize(t, cfg.eps_norm)
            n2 = t
            base = n1 * cfg.alpha + 1.0
        else:
            n1 = T.l2_normalize(s, cfg.eps_norm)
            n2 = T.sigmoid(s)
            base = T.clamp_min(n1 * cfg.alpha + 1.0, cfg.base_floor)
        return T.power(base, -cfg.b) * n2 * cfg.lam

    def forward(self, x: Tensor) -> Tensor:
        n, c, _, _ = _require_nchw(x, self.kind)
        return x * self.gate(x).reshape((n, c, 1, 1))

    def hyper(self) -> dict:
        return asdict(self.cfg)


class SimAM(AttentionModule):
    """Parameter-free elementwise gate from the inverted energy of each unit."""

    kind = "simam"

    def __init__(self, lambda_e: float = 1e-4):
        super().__init__()
        if lambda_e <= 0:
            raise ConfigurationError("lambda_e must be positive")
        self.lambda_e = lambda_e

    def gate(self, x: Tensor) -> Tensor:
        n, c, h, w = _require_nchw(x, self.kind)
        if h * w < 2:
            raise ShapeError("simam needs at least 2 spatial elements per channel")
        mu = T.global_avg_pool(x).reshape((n, c, 1, 1))
        dev = x - mu
        var = (dev * dev).sum(axis=(2, 3), keepdims=True) / float(h * w - 1)
        e_inv = dev * dev / ((var + self.lambda_e) * 4.0) + 0.5
        return T.sigmoid(e_inv)

    def forward(self, x: Tensor) -> Tensor:
        return x * self.gate(x)

    def hyper(self) -> dict:
        return {"lambda_e": self.lambda_e}


class GCTAttention(AttentionModule):
    """Parameter-free Gaussian gate over standardized channel means."""

    kind = "gct"

    def __init__(self, c: float = 2.0, eps: float = 1e-5):
        super().__init__()
        if c <= 0 or eps <= 0:
            raise ConfigurationError("c and eps must be positive")
        self.c = c
        self.eps = eps

    def gate(self, x: Tensor) -> Tensor:
        n, ch, _, _ = _require_nchw(x, self.kind)
        if ch < 2:
            raise ShapeError("gct needs at least 2 channels")
        z = T.global_avg_pool(x)
        mu = z.mean(axis=1, keepdims=True)
        dev = z - mu
        std = T.sqrt((dev * dev).mean(axis=1, keepdims=True))
        zh = dev / (std + self.eps)
        return T.exp(zh * zh / (-2.0 * self.c * self.c))

    def forward(self, x: Tensor) -> Tensor:
        n, c, _, _ = _require_nchw(x, self.kind)
        return x * self.gate(x).reshape((n, c, 1, 1))

    def hyper(self) -> dict:
        return {"c": self.c, "eps": self.eps}


class ECAAttention(AttentionModule):
    """Gate from a 1-D convolution across neighboring channel means."""

    kind = "eca"

    def __init__(self, kernel: Tensor):
        super().__init__()
        if kernel.ndim != 1 or kernel.shape[0] % 2 == 0:
            raise ConfigurationError(f"eca kernel must be rank-1 with odd length, got {kernel.shape}")
        self.weights = {"kernel": kernel}

    @property
    def kernel_size(self) -> int:
        return self.weights["kernel"].shape[0]

    def gate(self, x: Tensor) -> Tensor:
        _require_nchw(x, self.kind)
        s = T.global_avg_pool(x)
        return T.sigmoid(T.conv1d_channels(s, self.weights["kernel"]))

    def forward(self, x: Tensor) -> Tensor:
        n, c, _, _ = _require_nchw(x, self.kind)
        return x * self.gate(x).reshape((n, c, 1, 1))

    def hyper(self) -> dict:
        return {"kernel_size": self.kernel_size}


class SEAttention(AttentionModule):
    """Squeeze-excite bottleneck gate, bias-free."""

    kind = "se"

    def __init__(self, w1: Tensor, w2: Tensor, reduction: int):
        super().__init__()
        c = w1.shape[1]
        if reduction < 1 or c % reduction != 0:
            raise ConfigurationError(f"reduction {reduction} must divide channels {c}")
        hidden = c // reduction
        if w1.shape != (hidden, c) or w2.shape != (c, hidden):
            raise ConfigurationError(
                f"se weights must be ({hidden},{c}) and ({c},{hidden}), got {w1.shape}, {w2.shape}"
            )
        self.reduction = reduction
        self.weights = {"w1": w1, "w2": w2}

    def gate(self, x: Tensor) -> Tensor:
        _require_nchw(x, self.kind)
        s = T.global_avg_pool(x)
        hidden = T.relu(T.dense(s, self.weights["w1"]))
        return T.sigmoid(T.dense(hidden, self.weights["w2"]))

    def forward(self, x: Tensor) -> Tensor:
        n, c, _, _ = _require_nchw(x, self.kind)
        return x * self.gate(x).reshape((n, c, 1, 1))

    def hyper(self) -> dict:
        return {"reduction": self.reduction}


class LCTAttention(AttentionModule):
    """Per-channel affine gate on group-standardized channel means."""

    kind = "lct"
    eps = 1e-5

    def __init__(self, weight: Tensor, bias: Tensor, groups: int = 1):
        super().__init__()
        if weight.ndim != 1 or bias.shape != weight.shape:
            raise ConfigurationError("lct weight and bias must be rank-1 with equal length")
        c = weight.shape[0]
        if groups < 1 or c % groups != 0:
            raise ConfigurationError(f"groups {groups} must divide channels {c}")
        self.groups = groups
        self.weights = {"weight": weight, "bias": bias}

    def gate(self, x: Tensor) -> Tensor:
        n, c, _, _ = _require_nchw(x, self.kind)
        if c != self.weights["weight"].shape[0]:
            raise ShapeError(f"lct configured for {self.weights['weight'].shape[0]} channels, got {c}")
        g = self.groups
        z = T.global_avg_pool(x).reshape((n, g, c // g))
        mu = z.mean(axis=2, keepdims=True)
        dev = z - mu
        std = T.sqrt((dev * dev).mean(axis=2, keepdims=True))
        zh = (dev / (std + self.eps)).reshape((n, c))
        w = self.weights["weight"].reshape((1, c))
        beta = self.weights["bias"].reshape((1, c))
        return T.sigmoid(zh * w + beta)

    def forward(self, x: Tensor) -> Tensor:
        n, c, _, _ = _require_nchw(x, self.kind)
        return x * self.gate(x).reshape((n, c, 1, 1))

    def hyper(self) -> dict:
        return {"groups": self.groups}


# -- construction, counting, serialization -----------------------------------


def make_attention(kind: str, channels: int, hyper: dict | None = None,
                   rng: np.random.Generator | None = None) -> AttentionModule:
    """Build a module of the given kind; learnable kinds draw small random
    weights from ``rng`` (zeros when no generator is supplied)."""
    hyper = dict(hyper or {})

    def _draw(shape, scale):
        if rng is None:
            return Tensor(np.zeros(shape), requires_grad=True)
        return Tensor(rng.normal(0.0, scale, size=shape), requires_grad=True)

    if kind == "identity":
        return Identity()
    if kind == "bio":
        return BioAttention(BioConfig(**hyper))
    if kind == "simam":
        return SimAM(**hyper)
    if kind == "gct":
        return GCTAttention(**hyper)
    if kind == "eca":
        k = int(hyper.pop("kernel_size", 3))
        return ECAAttention(_draw((k,), 1.0 / max(1, k)))
    if kind == "se":
        r = int(hyper.pop("reduction", min(16, channels)))
        if channels % r != 0:
            raise ConfigurationError(f"reduction {r} must divide channels {channels}")
        hidden = channels // r
        w1 = _draw((hidden, channels), (2.0 / channels) ** 0.5)
        w2 = _draw((channels, hidden), (2.0 / max(1, hidden)) ** 0.5)
        return SEAttention(w1, w2, r)
    if kind == "lct":
        g = int(hyper.pop("groups", 1))
        return LCTAttention(_draw((channels,), 0.1), _draw((channels,), 0.1), g)
    raise ConfigurationError(f"unknown attention kind {kind!r}")


def param_count(kind: str, channel_plan, *, kernel_size: int = 3,
                reduction: int = 16, **_ignored) -> int:
    """Analytic learnable-parameter total over all insertion points.

    Per block: bio/simam/gct/identity 0, eca k, se 2*C^2/r, lct 2*C.
    """
    plan = list(channel_plan)
    if kind in PARAMETER_FREE_KINDS:
        return 0
    if kind == "eca":
        if kernel_size % 2 == 0:
            raise ConfigurationError("eca kernel_size must be odd")
        return kernel_size * len(plan)
    if kind == "se":
        total = 0
        for c in plan:
            if c % reduction != 0:
                raise ConfigurationError(f"reduction {reduction} must divide channels {c}")
            total += 2 * c * c // reduction
        return total
    if kind == "lct":
        return sum(2 * c for c in plan)
    raise ConfigurationError(f"unknown attention kind {kind!r}")


def save_module(module: AttentionModule, json_path) -> None:
    """Write {"kind", "hyper", "weights"} JSON; weights go to .ten files
    named after the JSON stem, in the same directory."""
    json_path = Path(json_path)
    entry = {"kind": module.kind, "hyper": module.hyper(), "weights": {}}
    for name, w in module.weights.items():
        fname = f"{json_path.stem}.{name}.ten"
        save_ten(json_path.parent / fname, w.data)
        entry["weights"][name] = fname
    json_path.write_text(json.dumps(entry, indent=2) + "\n")


def load_module(json_path) -> AttentionModule:
    json_path = Path(json_path)
    entry = json.loads(json_path.read_text())
    kind = entry.get("kind")
    hyper = entry.get("hyper", {})
    weights = {
        name: Tensor(load_ten(json_path.parent / fname), requires_grad=True)
        for name, fname in entry.get("weights", {}).items()
    }
    if kind == "eca":
        return ECAAttention(weights["kernel"])
    if kind == "se":
        return SEAttention(weights["w1"], weights["w2"], int(hyper["reduction"]))
    if kind == "lct":
        return LCTAttention(weights["weight"], weights["bias"], int(hyper.get("groups", 1)))
    if kind in PARAMETER_FREE_KINDS:
        return make_attention(kind, channels=0, hyper=hyper)
    raise ConfigurationError(f"unknown attention kind {kind!r}")
