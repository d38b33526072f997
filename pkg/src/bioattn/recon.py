"""Desk-scale undersampled-reconstruction harness.

Synthetic ellipse phantoms are pushed through a Cartesian k-space
undersampling mask, and a small residual convolutional network (with a
pluggable channel-attention module after each activation) is trained to
recover the fully sampled image from the zero-filled input. ``run_experiment``
trains one network per attention kind per seed and assembles the comparison
report.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from bioattn import attention as attn
from bioattn import metrics as M
from bioattn import tensor as T
from bioattn.errors import ConfigurationError, ShapeError, TrainingDivergence
from bioattn.fourier import fft2, ifft2
from bioattn.tensor import Tensor


# -- phantoms -----------------------------------------------------------------


def make_phantom(size, seed: int) -> np.ndarray:
    """Deterministic random-ellipse phantom, normalized to [0, 1]."""
    h, w = (size, size) if isinstance(size, int) else (int(size[0]), int(size[1]))
    if h < 32 or w < 32:
        raise ConfigurationError(f"phantom extent must be >= 32, got {(h, w)}")
    rng = np.random.default_rng(seed)
    ys = np.linspace(-1.0, 1.0, h)[:, None]
    xs = np.linspace(-1.0, 1.0, w)[None, :]
    img = 0.25 * np.exp(-(xs * xs + ys * ys) / 0.9)
    for _ in range(int(rng.integers(4, 9))):
        cy, cx = rng.uniform(-0.55, 0.55, size=2)
        ay, ax = rng.uniform(0.12, 0.45, size=2)
        theta = rng.uniform(0.0, np.pi)
        amp = rng.uniform(0.25, 1.0)
        ct, st = np.cos(theta), np.sin(theta)
        xr = (xs - cx) * ct + (ys - cy) * st
        yr = -(xs - cx) * st + (ys - cy) * ct
        r2 = (xr / ax) ** 2 + (yr / ay) ** 2
        img = img + amp * np.maximum(0.0, 1.0 - r2)
    img = img - img.min()
    peak = img.max()
    if peak > 0:
        img = img / peak
    return img


# -- k-space masks ------------------------------------------------------------

MASK_PATTERNS = ("uniform-random-lines", "equispaced-lines")


@dataclass(frozen=True)
class MaskSpec:
    height: int
    width: int
    accel: float
    acs_lines: int
    seed: int = 0
    pattern: str = "uniform-random-lines"

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ConfigurationError("mask extents must be positive")
        if self.accel < 1:
            raise ConfigurationError(f"acceleration factor must be >= 1, got {self.accel}")
        if not 0 <= self.acs_lines <= self.height:
            raise ConfigurationError(f"acs_lines must lie in [0, {self.height}]")
        if self.pattern not in MASK_PATTERNS:
            raise ConfigurationError(f"unknown mask pattern {self.pattern!r}")


def make_mask(spec: MaskSpec) -> np.ndarray:
    """Line mask over k-space rows, returned in unshifted DFT ordering.

    The ACS block (fully sampled center lines) is always kept; remaining
    lines are drawn to put the total near height/accel.
    """
    h = spec.height
    rng = np.random.default_rng(spec.seed)
    lines = np.zeros(h)
    acs_start = h // 2 - spec.acs_lines // 2
    lines[acs_start:acs_start + spec.acs_lines] = 1.0
    n_target = int(round(h / spec.accel))
    if spec.pattern == "uniform-random-lines":
        candidates = np.flatnonzero(lines == 0.0)
        n_extra = min(max(0, n_target - spec.acs_lines), candidates.size)
        if n_extra:
            chosen = rng.choice(candidates, size=n_extra, replace=False)
            lines[chosen] = 1.0
    else:
        step = int(round(spec.accel))
        offset = int(rng.integers(0, step))
        lines[offset::step] = 1.0
    lines = np.fft.ifftshift(lines)
    return np.repeat(lines[:, None], spec.width, axis=1)


def sampled_line_count(mask: np.ndarray) -> int:
    return int(np.count_nonzero(mask[:, 0]))


def undersample(image, mask: np.ndarray):
    """Mask the image's k-space; return (kspace, zero-filled magnitude)."""
    image = np.asarray(image, dtype=np.float64)
    if image.shape != mask.shape:
        raise ShapeError(f"mask shape {mask.shape} does not match image {image.shape}")
    kspace = fft2(image) * mask
    zero_filled = np.abs(ifft2(kspace))
    return kspace, zero_filled


# -- reconstruction network ----------------------------------------------------


class ReconNet:
    """Residual stack: depth x (conv3x3 -> relu -> attention), final conv3x3,
    output = input + correction. Zero-initialized final conv makes the
    untrained network the identity on the zero-filled input."""

    def __init__(self, depth: int, width: int, attention_kind: str,
                 attention_hyper: dict | None = None,
                 rng: np.random.Generator | None = None,
                 final_init: str = "zeros"):
        if depth < 1 or width < 1:
            raise ConfigurationError("depth and width must be >= 1")
        if final_init not in ("zeros", "he"):
            raise ConfigurationError(f"unknown final_init {final_init!r}")
        rng = rng or np.random.default_rng(0)
        self.depth = depth
        self.width = width
        self.attention_kind = attention_kind
        self.blocks = []
        c_in = 1
        for _ in range(depth):
            self.blocks.append({
                "w": Tensor(self._he(rng, (width, c_in, 3, 3)), requires_grad=True),
                "b": Tensor(np.zeros(width), requires_grad=True),
                "attn": attn.make_attention(attention_kind, width, attention_hyper, rng),
            })
            c_in = width
        if final_init == "zeros":
            fw = np.zeros((1, width, 3, 3))
        else:
            fw = self._he(rng, (1, width, 3, 3))
        self.final = {
            "w": Tensor(fw, requires_grad=True),
            "b": Tensor(np.zeros(1), requires_grad=True),
        }

    @staticmethod
    def _he(rng, shape):
        fan_in = int(np.prod(shape[1:]))
        return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)

    def forward(self, x: Tensor) -> Tensor:
        h = x
        for blk in self.blocks:
            h = T.relu(T.conv2d(h, blk["w"], blk["b"], padding=1))
            h = blk["attn"](h)
        correction = T.conv2d(h, self.final["w"], self.final["b"], padding=1)
        return x + correction

    def predict(self, image: np.ndarray) -> np.ndarray:
        out = self.forward(Tensor(image[None, None, :, :]))
        return out.data[0, 0].copy()

    def named_params(self):
        for i, blk in enumerate(self.blocks):
            yield f"blocks.{i}.w", blk["w"]
            yield f"blocks.{i}.b", blk["b"]
            for name, wt in blk["attn"].weights.items():
                yield f"blocks.{i}.attn.{name}", wt
        yield "final.w", self.final["w"]
        yield "final.b", self.final["b"]

    def set_param(self, name: str, value: Tensor) -> None:
        parts = name.split(".")
        if parts[0] == "final":
            self.final[parts[1]] = value
        elif parts[2] == "attn":
            self.blocks[int(parts[1])]["attn"].weights[parts[3]] = value
        else:
            self.blocks[int(parts[1])][parts[2]] = value

    @property
    def n_params(self) -> int:
        return sum(p.size for _, p in self.named_params())

    def channel_plan(self):
        return [self.width] * self.depth

    def attention_overhead(self) -> int:
        return sum(blk["attn"].n_params for blk in self.blocks)


def build_network(cfg: "ExperimentConfig", kind: str,
                  rng: np.random.Generator | None = None,
                  final_init: str = "zeros") -> ReconNet:
    hyper = cfg.attention_hyper.get(kind)
    return ReconNet(cfg.depth, cfg.width, kind, hyper, rng, final_init)


# -- training -------------------------------------------------------------------

DIVERGENCE_FACTOR = 1e3
OPTIMIZERS = ("adaptive", "sgd")


def train(model: ReconNet, dataset, lr: float, steps: int, batch_size: int,
          rng: np.random.Generator, optimizer: str = "adaptive",
          rho: float = 0.9, eps: float = 1e-8):
    """Minimize mean-squared reconstruction error over minibatches.

    ``dataset`` is a list of (zero_filled, ground_truth) image pairs.
    ``optimizer`` selects the update rule: "adaptive" scales each parameter's
    step by a running RMS of its gradient (momentum-free), "sgd" applies the
    plain fixed-rate update. Returns the per-step loss history; raises
    TrainingDivergence when the loss blows past DIVERGENCE_FACTOR x the
    initial loss.
    """
    if steps < 1 or batch_size < 1:
        raise ConfigurationError("steps and batch_size must be >= 1")
    if optimizer not in OPTIMIZERS:
        raise ConfigurationError(f"unknown optimizer {optimizer!r}")
    if not dataset:
        raise ConfigurationError("dataset is empty")
    history = []
    second_moment = {}
    for step_idx in range(steps):
        idx = rng.integers(0, len(dataset), size=batch_size)
        x = Tensor(np.stack([dataset[i][0] for i in idx])[:, None, :, :])
        target = Tensor(np.stack([dataset[i][1] for i in idx])[:, None, :, :])
        pred = model.forward(x)
        diff = pred - target
        loss = (diff * diff).mean()
        value = loss.item()
        history.append(value)
        if value > DIVERGENCE_FACTOR * max(history[0], 1e-300):
            raise TrainingDivergence(
                f"loss {value:.3e} exceeded {DIVERGENCE_FACTOR:g} x initial "
                f"{history[0]:.3e} at step {step_idx}"
            )
        loss.backward()
        for name, p in list(model.named_params()):
            g = p.grad
            if optimizer == "adaptive":
                v = rho * second_moment.get(name, 0.0) + (1.0 - rho) * g * g
                second_moment[name] = v
                update = lr * g / (np.sqrt(v) + eps)
            else:
                update = lr * g
            model.set_param(name, Tensor(p.data - update, requires_grad=True))
    return history


# -- experiment configuration ----------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    image_size: int = 64
    train_phantoms: int = 12
    test_phantoms: int = 4
    accel: float = 4.0
    acs_lines: int = 4
    mask_pattern: str = "uniform-random-lines"
    mask_seed: int = 1234
    depth: int = 2
    width: int = 16
    attention_kinds: tuple = ("identity", "bio", "simam", "gct")
    attention_hyper: dict = field(default_factory=dict)
    optimizer: str = "adaptive"
    lr: float = 3e-3
    steps: int = 100
    batch_size: int = 4
    seeds: tuple = (0, 1, 2, 3, 4)
    max_val: float = 1.0

    def __post_init__(self):
        n = self.image_size
        if n < 32 or (n & (n - 1)) != 0:
            raise ConfigurationError(f"image_size must be a power of two >= 32, got {n}")
        if self.train_phantoms < 1 or self.test_phantoms < 1:
            raise ConfigurationError("phantom counts must be positive")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigurationError(f"unknown optimizer {self.optimizer!r}")
        if not self.seeds:
            raise ConfigurationError("need at least one seed")
        for kind in self.attention_kinds:
            if kind not in attn.ALL_KINDS:
                raise ConfigurationError(f"unknown attention kind {kind!r}")

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        raw = json.loads(text)
        if not isinstance(raw, dict):
            raise ConfigurationError("experiment config must be a JSON object")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigurationError(f"unknown config fields: {sorted(unknown)}")
        for key in ("attention_kinds", "seeds"):
            if key in raw:
                raw[key] = tuple(raw[key])
        return cls(**raw)

    def to_json(self) -> str:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["attention_kinds"] = list(out["attention_kinds"])
        out["seeds"] = list(out["seeds"])
        return json.dumps(out, indent=2)


def _phantom_seed(run_seed: int, index: int) -> int:
    return run_seed * 100_000 + index


def make_dataset(cfg: ExperimentConfig, run_seed: int):
    """Per-run phantoms and their zero-filled counterparts (train, test)."""
    mask = make_mask(MaskSpec(cfg.image_size, cfg.image_size, cfg.accel,
                              cfg.acs_lines, seed=cfg.mask_seed + run_seed,
                              pattern=cfg.mask_pattern))
    total = cfg.train_phantoms + cfg.test_phantoms
    pairs = []
    for i in range(total):
        gt = make_phantom(cfg.image_size, _phantom_seed(run_seed, i))
        _, zf = undersample(gt, mask)
        pairs.append((zf, gt))
    return pairs[:cfg.train_phantoms], pairs[cfg.train_phantoms:], mask


# -- evaluation and reporting -----------------------------------------------------


def metric_rows(method: str, recon_pairs, max_val: float = 1.0, tag: str = ""):
    """MetricRow list for (reconstruction, ground truth) pairs."""
    ssim_cfg = M.SSIMConfig(dynamic_range=max_val)
    rows = []
    for i, (rec, gt) in enumerate(recon_pairs):
        rows.append(M.MetricRow(
            method=method,
            image_id=f"{tag}im{i}",
            mse=M.mse(rec, gt),
            psnr=M.psnr(rec, gt, max_val),
            ssim=M.ssim(rec, gt, ssim_cfg),
        ))
    return rows


def build_report(rows, proposed: str = "bio") -> M.MetricsReport:
    """Assemble a MetricsReport; Wilcoxon compares the proposed method's
    per-image SSIM against every other method over matching image ids."""
    report = M.MetricsReport(rows=list(rows), comparisons=[])
    methods = report.methods()
    if proposed in methods:
        by_method = {
            m: {r.image_id: r.ssim for r in rows if r.method == m} for m in methods
        }
        for other in methods:
            if other == proposed:
                continue
            ids = sorted(set(by_method[proposed]) & set(by_method[other]))
            if not ids:
                continue
            res = M.wilcoxon_signed_rank(
                [by_method[proposed][i] for i in ids],
                [by_method[other][i] for i in ids],
            )
            report.comparisons.append(M.Comparison(
                method_a=proposed, method_b=other, metric="ssim",
                statistic=res.statistic, p_two_sided=res.p_value,
                p_one_sided=res.p_one_sided, n_effective=res.n_effective,
                mode=res.mode,
            ))
    return report


def evaluate(models: dict, test_pairs, max_val: float = 1.0,
             proposed: str = "bio") -> M.MetricsReport:
    """Score trained models (plus the zero-filled input) on a test set."""
    if not test_pairs:
        raise ConfigurationError("empty test set")
    rows = metric_rows("zero_filled", [(zf, gt) for zf, gt in test_pairs], max_val)
    for name, model in models.items():
        recs = [(model.predict(zf), gt) for zf, gt in test_pairs]
        rows.extend(metric_rows(name, recs, max_val))
    return build_report(rows, proposed)


@dataclass
class BenchResult:
    config: ExperimentConfig
    report: M.MetricsReport
    overhead: dict
    loss_history: dict  # (kind, seed) -> list of losses
    recons: dict        # (kind, seed) -> list of (recon, abs-error) image pairs


def _run_variant(cfg: ExperimentConfig, kind: str, run_seed: int, train_pairs, test_pairs):
    kind_idx = cfg.attention_kinds.index(kind)
    model = build_network(cfg, kind, np.random.default_rng([run_seed, kind_idx, 17]))
    losses = train(model, train_pairs, cfg.lr, cfg.steps, cfg.batch_size,
                   np.random.default_rng([run_seed, kind_idx, 29]),
                   optimizer=cfg.optimizer)
    recons = []
    for zf, gt in test_pairs:
        rec = model.predict(zf)
        recons.append((rec, np.abs(rec - gt)))
    rows = metric_rows(kind, [(rec, gt) for (rec, _), (_, gt) in zip(recons, test_pairs)],
                       cfg.max_val, tag=f"seed{run_seed}/")
    return rows, losses, recons


def run_experiment(cfg: ExperimentConfig, threads: int = 1,
                   proposed: str = "bio") -> BenchResult:
    """Train every configured attention variant on every seed and build the
    comparison report. Deterministic for a fixed config."""
    datasets = {seed: make_dataset(cfg, seed) for seed in cfg.seeds}
    jobs = [(kind, seed) for seed in cfg.seeds for kind in cfg.attention_kinds]

    def _job(args):
        kind, seed = args
        train_pairs, test_pairs, _ = datasets[seed]
        return args, _run_variant(cfg, kind, seed, train_pairs, test_pairs)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = dict(pool.map(_job, jobs))
    else:
        results = dict(map(_job, jobs))

    rows = []
    loss_history = {}
    recons = {}
    for seed in cfg.seeds:
        _, test_pairs, _ = datasets[seed]
        rows.extend(metric_rows("zero_filled", test_pairs, cfg.max_val, tag=f"seed{seed}/"))
    for (kind, seed) in jobs:
        variant_rows, losses, variant_recons = results[(kind, seed)]
        rows.extend(variant_rows)
        loss_history[(kind, seed)] = losses
        recons[(kind, seed)] = variant_recons

    plan = [cfg.width] * cfg.depth
    overhead = {"zero_filled": None}
    for kind in cfg.attention_kinds:
        overhead[kind] = attn.param_count(kind, plan, **cfg.attention_hyper.get(kind, {}))
    report = build_report(rows, proposed)
    return BenchResult(config=cfg, report=report, overhead=overhead,
                       loss_history=loss_history, recons=recons)
