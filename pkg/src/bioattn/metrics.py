"""Image-quality metrics and the paired signed-rank test.

MSE, PSNR and Gaussian-windowed SSIM operate on 2-D arrays (any array-like,
including Tensor). The Wilcoxon routine computes the exact null distribution
of the signed rank sum whenever the effective sample is small enough, and
falls back to the tie- and continuity-corrected normal approximation above
that.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from bioattn.errors import ConfigurationError, ShapeError

#: largest effective n for which the exact null distribution is used
EXACT_LIMIT = 25


def _as_image(a) -> np.ndarray:
    return np.asarray(a, dtype=np.float64)


def mse(a, b) -> float:
    a, b = _as_image(a), _as_image(b)
    if a.shape != b.shape:
        raise ShapeError(f"mse shape mismatch: {a.shape} vs {b.shape}")
    d = a - b
    return float(np.mean(d * d))


def psnr(a, b, max_val: float = 1.0) -> float:
    if max_val <= 0:
        raise ConfigurationError("max_val must be positive")
    err = mse(a, b)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(max_val * max_val / err)


@dataclass(frozen=True)
class SSIMConfig:
    window: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 1.0

    def __post_init__(self):
        if self.window < 1 or self.window % 2 == 0:
            raise ConfigurationError(f"window must be odd and positive, got {self.window}")
        if self.sigma <= 0 or self.k1 <= 0 or self.k2 <= 0 or self.dynamic_range <= 0:
            raise ConfigurationError("sigma, k1, k2 and dynamic_range must be positive")


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    xs = np.arange(size) - (size - 1) / 2.0
    w = np.exp(-(xs * xs) / (2.0 * sigma * sigma))
    return w / w.sum()


def _filter_valid(img: np.ndarray, w: np.ndarray) -> np.ndarray:
    # separable Gaussian, valid mode, shift-and-add over the window taps
    k = w.size
    h, wd = img.shape
    tmp = np.zeros((h - k + 1, wd))
    for i in range(k):
        tmp += w[i] * img[i:i + h - k + 1, :]
    out = np.zeros((h - k + 1, wd - k + 1))
    for j in range(k):
        out += w[j] * tmp[:, j:j + wd - k + 1]
    return out


def ssim(a, b, cfg: SSIMConfig | None = None) -> float:
    """Mean structural similarity over Gaussian-weighted sliding windows."""
    cfg = cfg or SSIMConfig()
    a, b = _as_image(a), _as_image(b)
    if a.shape != b.shape:
        raise ShapeError(f"ssim shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim != 2:
        raise ShapeError(f"ssim expects 2-D images, got rank {a.ndim}")
    if min(a.shape) < cfg.window:
        raise ShapeError(f"image {a.shape} smaller than ssim window {cfg.window}")
    w = _gaussian_window(cfg.window, cfg.sigma)
    mu_a = _filter_valid(a, w)
    mu_b = _filter_valid(b, w)
    sig_aa = _filter_valid(a * a, w) - mu_a * mu_a
    sig_bb = _filter_valid(b * b, w) - mu_b * mu_b
    sig_ab = _filter_valid(a * b, w) - mu_a * mu_b
    c1 = (cfg.k1 * cfg.dynamic_range) ** 2
    c2 = (cfg.k2 * cfg.dynamic_range) ** 2
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * sig_ab + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (sig_aa + sig_bb + c2)
    return float(np.mean(num / den))


# -- Wilcoxon signed-rank ------------------------------------------------------


class WilcoxonResult(NamedTuple):
    statistic: float
    p_value: float
    p_one_sided: float
    n_effective: int
    mode: str  # "exact", "normal" or "degenerate"


def _ranks_with_ties(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size)
    sorted_vals = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _exact_tail_probs(doubled_ranks: np.ndarray, w2_obs: int):
    """Null distribution of the doubled positive-rank sum via the
    characteristic polynomial of the 2^n equally likely sign assignments."""
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for r in doubled_ranks:
        nxt = counts.copy()
        nxt[r:] += counts[:total + 1 - r]
        counts = nxt
    denom = float(2 ** len(doubled_ranks))
    p_le = counts[:w2_obs + 1].sum() / denom
    p_ge = counts[w2_obs:].sum() / denom
    return p_le, p_ge


def wilcoxon_signed_rank(x, y) -> WilcoxonResult:
    """Paired two-sided Wilcoxon signed-rank test.

    Zero differences are discarded; ties in |d| get average ranks. The
    statistic is W = min(W+, W-). Exact p for effective n <= EXACT_LIMIT,
    otherwise the normal approximation with tie and continuity corrections.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        raise ShapeError(f"paired samples must be equal-length 1-D, got {x.shape} vs {y.shape}")
    if x.size < 1:
        raise ConfigurationError("need at least one pair")
    d = x - y
    d = d[d != 0.0]
    n = d.size
    if n == 0:
        return WilcoxonResult(0.0, 1.0, 1.0, 0, "degenerate")
    ranks = _ranks_with_ties(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    stat = min(w_plus, w_minus)
    if n <= EXACT_LIMIT:
        r2 = np.rint(2.0 * ranks).astype(np.int64)
        w2 = int(round(2.0 * w_plus))
        p_le, p_ge = _exact_tail_probs(r2, w2)
        p_one = float(min(p_le, p_ge))
        return WilcoxonResult(stat, min(1.0, 2.0 * p_one), p_one, n, "exact")
    mean = n * (n + 1) / 4.0
    _, tie_sizes = np.unique(np.abs(d), return_counts=True)
    tie_term = float(np.sum(tie_sizes.astype(np.float64) ** 3 - tie_sizes))
    var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term / 48.0
    num = stat - mean
    if num != 0.0:
        num -= 0.5 * math.copysign(1.0, num)
    z = num / math.sqrt(var)
    p_two = min(1.0, math.erfc(abs(z) / math.sqrt(2.0)))
    return WilcoxonResult(stat, p_two, p_two / 2.0, n, "normal")


# -- report container ----------------------------------------------------------


@dataclass(frozen=True)
class MetricRow:
    method: str
    image_id: str
    mse: float
    psnr: float
    ssim: float


@dataclass(frozen=True)
class Comparison:
    method_a: str
    method_b: str
    metric: str
    statistic: float
    p_two_sided: float
    p_one_sided: float
    n_effective: int
    mode: str


@dataclass
class MetricsReport:
    """Per-image metric rows plus method aggregates and paired comparisons."""

    rows: list
    comparisons: list

    def methods(self) -> list:
        seen = []
        for r in self.rows:
            if r.method not in seen:
                seen.append(r.method)
        return seen

    def aggregates(self) -> dict:
        out = {}
        for m in self.methods():
            sub = [r for r in self.rows if r.method == m]
            out[m] = {
                "mse": float(np.mean([r.mse for r in sub])),
                "psnr": float(np.mean([r.psnr for r in sub])),
                "ssim": float(np.mean([r.ssim for r in sub])),
            }
        return out

    def to_csv(self) -> str:
        lines = ["method,image,mse,psnr,ssim"]
        for r in self.rows:
            lines.append(f"{r.method},{r.image_id},{r.mse!r},{r.psnr!r},{r.ssim!r}")
        for m, agg in self.aggregates().items():
            lines.append(f"{m},mean,{agg['mse']!r},{agg['psnr']!r},{agg['ssim']!r}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        payload = {
            "rows": [vars(r) for r in self.rows],
            "aggregates": self.aggregates(),
            "comparisons": [vars(c) for c in self.comparisons],
        }
        return json.dumps(payload, indent=2)
