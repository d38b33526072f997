"""Discrete single-species population map: trajectories, equilibria, stability.

The map N -> lam * (1 + alpha*N)^(-b) * N has closed-form fixed point and
multiplier, which makes it the exact oracle for the attention gate built on
the same nonlinearity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from bioattn.errors import ConfigurationError, DomainError

#: |m| tolerance used when classifying the stability multiplier.
CLASS_TOL = 1e-12


@dataclass(frozen=True)
class EcologyParams:
    lam: float = 1.0
    alpha: float = 2.0
    b: float = 2.0

    def __post_init__(self):
        for name in ("lam", "alpha", "b"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigurationError(f"{name} must be positive and finite, got {v}")


@dataclass(frozen=True)
class Trajectory:
    params: EcologyParams
    n0: float
    values: tuple = field(repr=False)

    def __len__(self):
        return len(self.values)


def step(n: float, p: EcologyParams) -> float:
    """One application of the population map; domain is N >= 0."""
    if n < 0:
        raise DomainError(f"population must be nonnegative, got {n}")
    return p.lam * (1.0 + p.alpha * n) ** (-p.b) * n


def iterate(n0: float, p: EcologyParams, steps: int) -> Trajectory:
    """Trajectory N_0..N_steps from repeated application of ``step``."""
    if steps < 1:
        raise ConfigurationError(f"steps must be >= 1, got {steps}")
    values = [float(n0)]
    n = float(n0)
    for _ in range(steps):
        n = step(n, p)
        values.append(n)
    return Trajectory(params=p, n0=float(n0), values=tuple(values))


def fixed_point(p: EcologyParams) -> float | None:
    """Nontrivial equilibrium (lam^(1/b) - 1)/alpha, or None when lam <= 1."""
    if p.lam <= 1.0:
        return None
    return (p.lam ** (1.0 / p.b) - 1.0) / p.alpha


def multiplier(p: EcologyParams) -> float:
    """Map derivative at the nontrivial fixed point: 1 - b*(1 - lam^(-1/b))."""
    if fixed_point(p) is None:
        raise DomainError(f"no nontrivial fixed point for lam={p.lam} <= 1")
    return 1.0 - p.b * (1.0 - p.lam ** (-1.0 / p.b))


def stability(p: EcologyParams):
    """Multiplier and its stability class at the nontrivial fixed point.

    Classes: superstable (m = 0), stable-monotone (0 < m < 1),
    stable-oscillatory (-1 < m < 0), neutral (|m| = 1), unstable (|m| > 1).
    """
    m = multiplier(p)
    am = abs(m)
    if am <= CLASS_TOL:
        label = "superstable"
    elif abs(am - 1.0) <= CLASS_TOL:
        label = "neutral"
    elif am < 1.0:
        label = "stable-monotone" if m > 0 else "stable-oscillatory"
    else:
        label = "unstable"
    return m, label


def bifurcation_sweep(lambdas, alpha: float, b: float, n0: float,
                      transient: int, samples: int):
    """For each lam, discard ``transient`` iterates then record ``samples``
    successive values. Returns a list of (lam, tuple_of_samples) rows."""
    if transient < 0:
        raise ConfigurationError("transient must be >= 0")
    if samples < 1:
        raise ConfigurationError("samples must be >= 1")
    rows = []
    for lam in lambdas:
        p = EcologyParams(lam=float(lam), alpha=alpha, b=b)
        n = float(n0)
        for _ in range(transient):
            n = step(n, p)
        rec = []
        for _ in range(samples):
            n = step(n, p)
            rec.append(n)
        rows.append((float(lam), tuple(rec)))
    return rows
