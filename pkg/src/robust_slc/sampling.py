"""Fluctuation parameters, training grids and random test draws.

Random streams use numpy's PCG64 generator. Each stream is keyed by
``SeedSequence(seed, spawn_key=(purpose, block))`` where ``purpose`` is one of
``PURPOSE_TRAIN``/``PURPOSE_TEST`` and ``block`` indexes consecutive blocks of
``BLOCK_SIZE`` test samples. A worker can therefore regenerate any block on its
own and the sample stream does not depend on how work is split.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtr, ndtri

UNIFORM = "uniform"
TRUNCATED_GAUSSIAN = "truncated_gaussian"
DISTRIBUTIONS = (UNIFORM, TRUNCATED_GAUSSIAN)

CONSTANT = "constant"
COSINE = "one_minus_vartheta_cos_t"
PROFILES = (CONSTANT, COSINE)

PURPOSE_TRAIN = 0
PURPOSE_TEST = 1
BLOCK_SIZE = 1024

# truncation at three standard deviations: sigma = bound / 3
TRUNCATION_SIGMAS = 3.0


@dataclass(frozen=True)
class FluctuationParameter:
    """A multiplicative fluctuation on one Hamiltonian term.

    For the constant profile the sampled value is the multiplier itself and
    lives in ``[1 - bound, 1 + bound]``. For the cosine profile the sampled
    value is the amplitude ``v`` of ``1 - v cos t`` and lives in
    ``[-bound, bound]``. Parameters sharing a ``tie_group`` are always sampled
    together and carry identical values.
    """

    name: str
    bound: float = 0.0
    distribution: str = UNIFORM
    profile: str = CONSTANT
    tie_group: str | None = None

    def __post_init__(self):
        if not (0.0 <= self.bound < 1.0):
            raise ValueError(f"{self.name}: bound must lie in [0, 1), got {self.bound!r}")
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"{self.name}: unknown distribution {self.distribution!r}")
        if self.profile not in PROFILES:
            raise ValueError(f"{self.name}: unknown profile {self.profile!r}")

    @property
    def center(self) -> float:
        return 1.0 if self.profile == CONSTANT else 0.0

    @property
    def group(self) -> str:
        return self.tie_group if self.tie_group is not None else self.name

    def support(self) -> tuple[float, float]:
        return self.center - self.bound, self.center + self.bound


@dataclass(frozen=True)
class TruncatedGaussianSpec:
    """Zero-mean normal with sigma = bound/3, truncated to [-bound, bound]."""

    bound: float

    def __post_init__(self):
        if not self.bound > 0:
            raise ValueError("truncated Gaussian needs a positive bound")

    @property
    def mu(self) -> float:
        return 0.0

    @property
    def sigma(self) -> float:
        return self.bound / TRUNCATION_SIGMAS

    @property
    def left(self) -> float:
        return -self.bound

    @property
    def right(self) -> float:
        return self.bound

    def pdf(self, x):
        """Density phi((x-mu)/sigma) / (sigma [Phi((r-mu)/sigma) - Phi((l-mu)/sigma)])."""
        x = np.asarray(x, dtype=float)
        s = self.sigma
        z = (x - self.mu) / s
        mass = ndtr((self.right - self.mu) / s) - ndtr((self.left - self.mu) / s)
        dens = np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi) / (s * mass)
        return np.where((x >= self.left) & (x <= self.right), dens, 0.0)

    def std(self) -> float:
        """Closed-form standard deviation of the truncated normal."""
        a = (self.left - self.mu) / self.sigma
        b = (self.right - self.mu) / self.sigma
        mass = ndtr(b) - ndtr(a)
        phi = lambda z: math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)  # noqa: E731
        var = 1.0 + (a * phi(a) - b * phi(b)) / mass - ((phi(a) - phi(b)) / mass) ** 2
        return self.sigma * math.sqrt(var)


def grid_values(bound: float, n: int, center: float = 1.0) -> np.ndarray:
    """``center - bound + (2m - 1) bound / n`` for m = 1..n (midpoints of n cells)."""
    if n < 1:
        raise ValueError(f"grid size must be >= 1, got {n!r}")
    if bound < 0:
        raise ValueError(f"bound must be non-negative, got {bound!r}")
    m = np.arange(1, n + 1, dtype=float)
    # same as center - bound + (2m - 1) bound / n; the signed offsets are exact
    # mirror images, so value(m) + value(n + 1 - m) == 2 center bit for bit
    return center + bound * ((2 * m - 1 - n) / n)


def tie_groups(params: Sequence[FluctuationParameter]) -> dict[str, list[int]]:
    """Group id -> parameter indices, in first-appearance order."""
    groups: dict[str, list[int]] = {}
    for i, p in enumerate(params):
        groups.setdefault(p.group, []).append(i)
    for gid, idx in groups.items():
        first = params[idx[0]]
        for i in idx[1:]:
            p = params[i]
            if (p.bound, p.distribution, p.profile) != (first.bound, first.distribution, first.profile):
                raise ValueError(f"tie group {gid!r} mixes parameters with different settings")
    return groups


def training_grid(params: Sequence[FluctuationParameter], n_per_param: int | dict[str, int]) -> np.ndarray:
    """Cartesian product of the per-group grids; returns shape (N, len(params)).

    ``n_per_param`` may be a single size or a mapping from tie-group id to size.
    """
    groups = tie_groups(params)
    axes = []
    for gid, idx in groups.items():
        n = n_per_param[gid] if isinstance(n_per_param, dict) else n_per_param
        p = params[idx[0]]
        axes.append(grid_values(p.bound, n, p.center))
    combos = list(itertools.product(*axes))
    out = np.empty((len(combos), len(params)))
    for row, combo in enumerate(combos):
        for value, idx in zip(combo, groups.values()):
            out[row, idx] = value
    return out


def make_rng(seed: int, purpose: int, block: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(purpose, block))))


def sample_uniform(bound: float, center: float, rng: np.random.Generator, size=None):
    if bound == 0:
        return center if size is None else np.full(size, float(center))
    return rng.uniform(center - bound, center + bound, size=size)


def sample_truncated_gaussian(spec: TruncatedGaussianSpec, center: float, rng: np.random.Generator,
                              size=None):
    """Inverse-CDF draw: the uniform variate is mapped into [Phi(a), Phi(b)] first."""
    s = spec.sigma
    lo = ndtr((spec.left - spec.mu) / s)
    hi = ndtr((spec.right - spec.mu) / s)
    q = lo + (hi - lo) * rng.random(size=size)
    x = spec.mu + s * ndtri(q)
    x = np.clip(x, spec.left, spec.right)
    if size is None:
        return center + float(x)
    return center + x


def draw(param: FluctuationParameter, rng: np.random.Generator, size: int,
         distribution: str | None = None) -> np.ndarray:
    """``size`` test draws for one parameter (or tie group representative)."""
    dist = distribution or param.distribution
    if param.bound == 0:
        return np.full(size, param.center)
    if dist == UNIFORM:
        return sample_uniform(param.bound, param.center, rng, size)
    if dist == TRUNCATED_GAUSSIAN:
        return sample_truncated_gaussian(TruncatedGaussianSpec(param.bound), param.center, rng, size)
    raise ValueError(f"unknown distribution {dist!r}")


def draw_block(params: Sequence[FluctuationParameter], seed: int, block: int, size: int,
               distribution: str | None = None) -> np.ndarray:
    """One block of test samples, shape (size, len(params)); tied values are shared."""
    rng = make_rng(seed, PURPOSE_TEST, block)
    out = np.empty((size, len(params)))
    for idx in tie_groups(params).values():
        values = draw(params[idx[0]], rng, size, distribution)
        out[:, idx] = values[:, None]
    return out


def random_samples(params: Sequence[FluctuationParameter], n: int, seed: int,
                 distribution: str | None = None) -> np.ndarray:
    """``n`` random test samples built from consecutive seeded blocks."""
    if n < 1:
        raise ValueError("need at least one test sample")
    blocks = []
    for b in range(math.ceil(n / BLOCK_SIZE)):
        size = min(BLOCK_SIZE, n - b * BLOCK_SIZE)
        blocks.append(draw_block(params, seed, b, size, distribution))
    return np.concatenate(blocks, axis=0)


def profile_value(param: FluctuationParameter, sampled, t):
    """Multiplier at time ``t`` (ns): the value itself, or 1 - v cos t."""
    if param.profile == CONSTANT:
        return sampled
    return 1.0 - sampled * np.cos(t)
