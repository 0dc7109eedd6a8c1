"""Convex gauge functions: evaluation, derivative, inverse, moment norms.

Two parametric families are shipped: the power map x**q with q >= 1, and the
centered exponential expm1(a * x**b) with a > 0 and b >= 1. Both vanish at
zero and are non-decreasing and convex on [0, inf). Exponents b below one
are rejected because the exponential family loses convexity near the origin
there. User-supplied gauges enter through CustomPsi, whose convexity is
checked on a grid at construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .processes import DgpSpec, generate_panels, marginal_spec
from .seeding import PURPOSE_NORM, STREAM_PANEL


class PsiDomainError(ValueError):
    """Argument outside [0, inf)."""


class PsiValidationError(ValueError):
    """Gauge parameters violate the convex non-decreasing contract."""


class MomentExplosionError(RuntimeError):
    """Monte Carlo moment average is not finite."""


@dataclass(frozen=True)
class PsiSpec:
    """Parametric gauge: ``power`` uses q; ``exponential`` uses (a, b)."""

    kind: str
    q: float = 2.0
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if self.kind not in ("power", "exponential"):
            raise PsiValidationError(f"kind: unknown gauge kind {self.kind!r}")
        if self.kind == "power" and self.q < 1:
            raise PsiValidationError(f"q: power exponent must be >= 1, got {self.q}")
        if self.kind == "exponential":
            if self.a <= 0:
                raise PsiValidationError(f"a: scale must be > 0, got {self.a}")
            if self.b < 1:
                raise PsiValidationError(
                    f"b: exponent must be >= 1 for convexity on [0, inf), got {self.b}"
                )

    def to_json_dict(self) -> dict:
        if self.kind == "power":
            return {"kind": "power", "q": self.q}
        return {"kind": "exponential", "a": self.a, "b": self.b}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "PsiSpec":
        return cls(**obj)


@dataclass(frozen=True)
class CustomPsi:
    """User-supplied (eval, deriv, inverse) triple.

    Construction runs the convexity grid check on eval_fn; the derivative
    and inverse are trusted as given.
    """

    eval_fn: Callable
    deriv_fn: Callable
    inverse_fn: Callable
    name: str = "custom"
    grid_upper: float = 100.0

    def __post_init__(self):
        check_convexity(self.eval_fn, upper=self.grid_upper)


PsiLike = Union[PsiSpec, CustomPsi]


def _require_nonneg(x, what: str):
    if np.any(np.asarray(x) < 0):
        raise PsiDomainError(f"{what} must be >= 0")


def psi_eval(spec: PsiLike, x):
    """Gauge value at x >= 0; exactly zero at zero. Accepts arrays."""
    _require_nonneg(x, "x")
    x = np.asarray(x, dtype=float)
    if isinstance(spec, CustomPsi):
        out = np.asarray(spec.eval_fn(x), dtype=float)
    elif spec.kind == "power":
        out = x**spec.q
    else:
        with np.errstate(over="ignore"):
            out = np.expm1(spec.a * x**spec.b)
    return float(out) if out.ndim == 0 else out


def psi_deriv(spec: PsiLike, u):
    """Derivative of the gauge at u >= 0.

    Powers of zero follow the 0**0 = 1 convention, so the q = 1 power map
    has derivative 1 everywhere while q > 1 (and b > 1) vanish at zero.
    """
    _require_nonneg(u, "u")
    u = np.asarray(u, dtype=float)
    if isinstance(spec, CustomPsi):
        out = np.asarray(spec.deriv_fn(u), dtype=float)
    elif spec.kind == "power":
        out = spec.q * u ** (spec.q - 1.0)
    else:
        with np.errstate(over="ignore"):
            out = spec.a * spec.b * u ** (spec.b - 1.0) * np.exp(spec.a * u**spec.b)
    return float(out) if out.ndim == 0 else out


def psi_inverse(spec: PsiLike, y):
    """Unique x >= 0 with psi(x) = y, closed form for both shipped kinds."""
    _require_nonneg(y, "y")
    y = np.asarray(y, dtype=float)
    if isinstance(spec, CustomPsi):
        out = np.asarray(spec.inverse_fn(y), dtype=float)
    elif spec.kind == "power":
        out = y ** (1.0 / spec.q)
    else:
        out = (np.log1p(y) / spec.a) ** (1.0 / spec.b)
    return float(out) if out.ndim == 0 else out


def check_convexity(psi_fn: Callable, upper: float = 100.0, points: int = 201,
                    tol: float = 1e-9) -> None:
    """Grid check that psi_fn(0) = 0 and slopes are non-decreasing.

    Raises PsiValidationError on failure and ValueError when the gauge
    overflows on the grid (shrink ``upper`` in that case).
    """
    grid = np.linspace(0.0, upper, points)
    vals = np.asarray(psi_fn(grid), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError("gauge overflows on the check grid; use a smaller upper bound")
    if abs(vals[0]) > tol:
        raise PsiValidationError(f"gauge must vanish at 0, got {vals[0]!r}")
    if np.any(np.diff(vals) < -tol):
        raise PsiValidationError("gauge is not non-decreasing on the grid")
    slopes = np.diff(vals) / np.diff(grid)
    if np.any(np.diff(slopes) < -tol):
        raise PsiValidationError("gauge is not convex on the grid")


@dataclass(frozen=True)
class MomentNormEstimate:
    """Monte Carlo L_r-norm estimate with a delta-method standard error."""

    value: float
    se: float
    reps: int


def psi_moment_norm(
    spec: PsiLike,
    sample_law: DgpSpec,
    r: float,
    reps: int,
    seed: int,
) -> MomentNormEstimate:
    """L_r norm of psi(2 * max_i |x[t, i]|) over the stationary marginal.

    All shipped generator kinds are stationary, so a single time index
    carries the maximum over t. Each replication draws one fresh row from
    the marginal law, giving iid samples and a clean standard error.
    """
    if r <= 1:
        raise ValueError(f"Hoelder exponent r must be > 1, got {r}")
    if reps < 1000:
        raise ValueError(f"need reps >= 1000 for a stable norm estimate, got {reps}")
    law = marginal_spec(sample_law)
    powered = np.empty(reps)
    for start, panels in generate_panels(law, reps, seed, STREAM_PANEL, PURPOSE_NORM):
        rows = panels[:, 0, :]
        values = psi_eval(spec, 2.0 * np.abs(rows).max(axis=1))
        with np.errstate(over="ignore"):
            powered[start : start + len(rows)] = np.asarray(values) ** r
    if not np.all(np.isfinite(powered)):
        raise MomentExplosionError(
            f"moment average of psi(2 max|x|)^r is not finite for dgp kind "
            f"{sample_law.kind!r}; the gauge grows too fast for this tail"
        )
    mean = float(np.mean(powered))
    se_mean = float(np.std(powered, ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    value = mean ** (1.0 / r)
    # Delta method for the 1/r power of the mean.
    se = se_mean * value / (r * mean) if mean > 0 else 0.0
    return MomentNormEstimate(value=value, se=se, reps=reps)
