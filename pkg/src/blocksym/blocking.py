"""Block schemes, block sums, multiplier draws, and the max statistics.

The sample {1..n} is partitioned into count = n/b contiguous blocks of equal
length b. Multipliers are drawn once per block and expanded to a
piecewise-constant weight per time point. The two statistics of interest are
the largest absolute column mean of a panel and its block-multiplier
counterpart max_i |(1/n) sum_l eps_l S[l, i]|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .processes import PanelSample
from .seeding import STREAM_MULTIPLIER, substream

MULTIPLIER_KINDS = ("rademacher", "uniform_sym")


class BlockSchemeError(ValueError):
    pass


@dataclass(frozen=True)
class BlockScheme:
    """Equal-length contiguous partition of {0..n-1} into count blocks."""

    n: int
    b: int
    count: int
    blocks: tuple

    def describe(self) -> str:
        spans = " ".join(f"[{blk.start + 1}..{blk.stop}]" for blk in self.blocks)
        return f"BlockScheme(n={self.n}, b={self.b}, count={self.count}): {spans}"


@dataclass(frozen=True)
class MultiplierSpec:
    """Bounded, zero-mean, unit-variance multiplier law.

    ``rademacher`` puts mass 1/2 on each of -1 and +1; ``uniform_sym`` is
    uniform on [-sqrt(3), sqrt(3)]. Both have |eps| <= bound almost surely.
    """

    kind: str

    def __post_init__(self):
        if self.kind not in MULTIPLIER_KINDS:
            raise ValueError(f"unknown multiplier kind {self.kind!r}")

    @property
    def bound(self) -> float:
        return 1.0 if self.kind == "rademacher" else math.sqrt(3.0)

    def to_json_dict(self) -> dict:
        return {"kind": self.kind}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "MultiplierSpec":
        return cls(**obj)


def make_blocks(n: int, b: int) -> BlockScheme:
    """Blocks of length b covering {0..n-1}; b must divide n exactly."""
    if not 1 <= b <= n:
        raise BlockSchemeError(f"block size must satisfy 1 <= b <= n, got b={b}, n={n}")
    if n % b != 0:
        raise BlockSchemeError(f"block size must divide n (n={n}, b={b})")
    count = n // b
    blocks = tuple(range(l * b, (l + 1) * b) for l in range(count))
    return BlockScheme(n=n, b=b, count=count, blocks=blocks)


def block_sums(sample: PanelSample, scheme: BlockScheme) -> np.ndarray:
    """Matrix of within-block column sums, shape (count, p)."""
    if scheme.n != sample.n:
        raise BlockSchemeError(
            f"scheme is for n={scheme.n} but panel has n={sample.n}"
        )
    return sample.data.reshape(scheme.count, scheme.b, sample.p).sum(axis=1)


def draw_multipliers(spec: MultiplierSpec, count: int, seed: int) -> np.ndarray:
    """iid multiplier draws, deterministic in the seed."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    rng = substream(seed, STREAM_MULTIPLIER)
    return draw_multipliers_with(spec, count, rng)


def draw_multipliers_with(spec: MultiplierSpec, count: int, rng) -> np.ndarray:
    if spec.kind == "rademacher":
        return 2.0 * rng.integers(0, 2, size=count) - 1.0
    half = math.sqrt(3.0)
    return rng.uniform(-half, half, size=count)


def expand_multipliers(eps: np.ndarray, scheme: BlockScheme) -> np.ndarray:
    """Per-time weights, constant on blocks: eta[t] = eps[l] for t in block l."""
    eps = np.asarray(eps, dtype=float)
    if eps.shape != (scheme.count,):
        raise BlockSchemeError(
            f"expected {scheme.count} multipliers, got shape {eps.shape}"
        )
    return np.repeat(eps, scheme.b)


def max_abs_mean(sample: PanelSample) -> float:
    """Largest absolute column mean of the panel."""
    return float(np.abs(sample.data.mean(axis=0)).max())


def multiplier_max_abs_mean(
    sample: PanelSample, scheme: BlockScheme, eps: np.ndarray
) -> float:
    """max_i |(1/n) sum_l eps_l S[l, i]|, the block-multiplier mean statistic.

    Identical to max_abs_mean applied to the panel with each row scaled by
    its expanded multiplier.
    """
    sums = block_sums(sample, scheme)
    eps = np.asarray(eps, dtype=float)
    if eps.shape != (scheme.count,):
        raise BlockSchemeError(
            f"expected {scheme.count} multipliers, got shape {eps.shape}"
        )
    weighted = eps @ sums / scheme.n
    return float(np.abs(weighted).max())
