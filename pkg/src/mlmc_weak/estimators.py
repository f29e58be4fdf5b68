"""Monte Carlo / multilevel Monte Carlo estimators and weak-error estimators."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .rng import BrownianIncrements, Role, SeedSpec, derive_stream


@dataclass(frozen=True)
class MonteCarloEstimate:
    """Estimator output.

    For a multilevel estimate ``n`` is the total sample count, ``levels``
    holds the per-level estimates, and ``sample_variance`` is scaled so that
    ``sample_variance / n`` is the estimated variance of ``value``.
    """

    value: float
    n: int
    sample_variance: float
    levels: tuple["MonteCarloEstimate", ...] = field(default=(), repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.sample_variance < 0:
            raise ValueError("sample_variance must be >= 0")

    @property
    def estimator_variance(self) -> float:
        return self.sample_variance / self.n


@dataclass(frozen=True)
class LevelSchedule:
    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if not self.counts:
            raise ValueError("a schedule needs at least one level")
        if min(self.counts) < 1:
            raise ValueError("every level needs at least one sample")

    @property
    def max_level(self) -> int:
        return len(self.counts) - 1

    def __len__(self):
        return len(self.counts)

    def __iter__(self):
        return iter(self.counts)

    def __getitem__(self, i):
        return self.counts[i]


class Sampler:
    """Index-addressable source of independent samples.

    Samples are produced in fixed blocks of ``block_size``; block ``b`` is
    drawn by ``fn(stream, block_size)`` where ``stream`` is derived from
    ``spec`` with ``sample=b``.  Sample ``i`` therefore only depends on
    ``(spec, i)`` and never on how many samples are requested or how many
    worker threads are used.  ``fn`` must return an array whose first axis has
    length ``block_size``.
    """

    def __init__(self, fn: Callable[[np.random.Generator, int], np.ndarray],
                 spec: SeedSpec | None, block_size: int = 1024, workers: int = 1):
        if block_size < 1:
            raise ValueError("block_size must be >= 1")
        self.fn = fn
        self.spec = spec
        self.block_size = int(block_size)
        self.workers = max(1, int(workers))

    def block(self, b: int) -> np.ndarray:
        out = np.asarray(self.fn(derive_stream(self.spec.with_(sample=b)), self.block_size))
        if out.shape[0] != self.block_size:
            raise ValueError("sampler function returned a block of the wrong size")
        return out

    def take(self, n: int, start: int = 0) -> np.ndarray:
        """Samples ``start .. start+n-1`` stacked on the first axis."""
        if n < 1:
            raise ValueError("n must be >= 1")
        first, last = start // self.block_size, (start + n - 1) // self.block_size
        ids = range(first, last + 1)
        if self.workers > 1 and len(ids) > 1:
            with ThreadPoolExecutor(self.workers) as pool:
                blocks = list(pool.map(self.block, ids))
        else:
            blocks = [self.block(b) for b in ids]
        off = start - first * self.block_size
        return np.concatenate(blocks, axis=0)[off:off + n]

    def __call__(self, i: int):
        return self.take(1, start=i)[0]

    def reseeded(self, **changes) -> "Sampler":
        return Sampler(self.fn, self.spec.with_(**changes), self.block_size, self.workers)

    @classmethod
    def constant(cls, c: float) -> "Sampler":
        return ArraySampler(np.array([c]), cycle=True)

    @classmethod
    def from_values(cls, values, cycle: bool = False) -> "Sampler":
        return ArraySampler(np.asarray(values, dtype=float), cycle=cycle)


class ArraySampler(Sampler):
    """Deterministic sampler backed by a fixed array (optionally cycled)."""

    def __init__(self, values: np.ndarray, cycle: bool = False):
        super().__init__(None, None, block_size=1)
        self.values = values
        self.cycle = cycle

    def take(self, n: int, start: int = 0) -> np.ndarray:
        if n < 1:
            raise ValueError("n must be >= 1")
        idx = np.arange(start, start + n)
        if self.cycle:
            idx = idx % len(self.values)
        elif idx[-1] >= len(self.values):
            raise IndexError(f"sampler holds only {len(self.values)} samples")
        return self.values[idx]

    def reseeded(self, **changes) -> "ArraySampler":
        return self


def path_sampler(functional: Callable[[BrownianIncrements], np.ndarray], spec: SeedSpec,
                 steps: int, modes: int, dt: float, block_size: int = 1024,
                 workers: int = 1) -> Sampler:
    """Sampler of ``functional`` applied to batches of Brownian paths."""
    scale = math.sqrt(dt)

    def fn(stream, size):
        inc = BrownianIncrements(dt, stream.standard_normal((size, steps, modes)) * scale)
        return functional(inc)

    return Sampler(fn, spec, block_size, workers)


def _summarize(x: np.ndarray) -> MonteCarloEstimate:
    n = x.shape[0]
    value = float(np.mean(x))
    var = float(np.var(x, ddof=1)) if n > 1 else 0.0
    return MonteCarloEstimate(value, n, max(var, 0.0))


def mc_estimate(src: Sampler, n: int) -> MonteCarloEstimate:
    """Plain Monte Carlo mean of ``n`` samples with unbiased sample variance."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return _summarize(np.asarray(src.take(n), dtype=float))


def mlmc_estimate(level_samplers: Sequence[Sampler], schedule: LevelSchedule) -> MonteCarloEstimate:
    """Telescoping multilevel estimate.

    ``level_samplers[0]`` samples Y_0 and ``level_samplers[l]`` the coupled
    difference Y_l - Y_{l-1}.  The caller is responsible for giving the
    samplers independent streams.
    """
    if len(level_samplers) != len(schedule):
        raise ValueError(f"{len(level_samplers)} samplers for a schedule of {len(schedule)} levels")
    parts = tuple(mc_estimate(s, n) for s, n in zip(level_samplers, schedule))
    n_total = sum(p.n for p in parts)
    est_var = sum(p.estimator_variance for p in parts)
    return MonteCarloEstimate(sum(p.value for p in parts), n_total, est_var * n_total, parts)


def weak_error_type1(exact_mean: float, approx: Sampler, n: int) -> float:
    """|E[Y] - E_N[Y_n]|."""
    return abs(exact_mean - mc_estimate(approx, n).value)


def weak_error_type2(diff: Sampler, n: int) -> float:
    """|E_N[Y - Y_n]| for a sampler of coupled differences."""
    return abs(mc_estimate(diff, n).value)


def mlmc_weak_error_type1(exact_mean: float, level_samplers: Sequence[Sampler],
                          schedule: LevelSchedule) -> float:
    return abs(exact_mean - mlmc_estimate(level_samplers, schedule).value)


def mlmc_weak_error_type2(level_samplers: Sequence[Sampler], schedule: LevelSchedule) -> float:
    """|E_{N_0}[Y - Y_0] + sum_l E_{N_l}[Y_{l-1} - Y_l]|.

    ``level_samplers[0]`` must sample Y - Y_0 on a common path and
    ``level_samplers[l]`` the reversed differences Y_{l-1} - Y_l, so the
    telescoped expectation is E[Y - Y_L].
    """
    return abs(mlmc_estimate(level_samplers, schedule).value)


def corollary_schedule(bias: float, level_variances: Sequence[float], eps: float) -> LevelSchedule:
    """Sample sizes N_0 = ceil(bias^-2), N_l = ceil(bias^-2 Var_l l^(1+eps)), floored at 1."""
    if not bias > 0:
        raise ValueError("bias must be positive")
    if not eps > 0:
        raise ValueError("eps must be positive")
    if any(v < 0 for v in level_variances):
        raise ValueError("level variances must be non-negative")
    inv = bias ** -2
    counts = [max(1, math.ceil(inv))]
    for ell, v in enumerate(level_variances, start=1):
        counts.append(max(1, math.ceil(inv * v * ell ** (1 + eps))))
    return LevelSchedule(tuple(counts))


def replicate_average(error_fn: Callable[[int], float], m: int,
                      workers: int = 1) -> tuple[float, float]:
    """Mean and sample standard deviation of ``error_fn(0..m-1)``."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if workers > 1 and m > 1:
        with ThreadPoolExecutor(workers) as pool:
            vals = np.array(list(pool.map(error_fn, range(m))), dtype=float)
    else:
        vals = np.array([error_fn(r) for r in range(m)], dtype=float)
    std = float(np.std(vals, ddof=1)) if m > 1 else 0.0
    return float(np.mean(vals)), std


def pilot_variance(src: Sampler, n_pilot: int) -> float:
    """Unbiased sample variance of ``n_pilot`` draws on the sampler's Pilot stream."""
    if n_pilot < 2:
        raise ValueError("n_pilot must be >= 2")
    if src.spec is not None:
        src = src.reseeded(role=Role.PILOT)
    return float(np.var(np.asarray(src.take(n_pilot), dtype=float), ddof=1))
