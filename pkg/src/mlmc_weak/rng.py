"""Hierarchically seeded Gaussian randomness and Brownian increment helpers.

Every random quantity in the package is drawn from a stream addressed by a
:class:`SeedSpec`.  Streams are Philox (counter-based) generators keyed by a
``numpy.random.SeedSequence`` whose spawn key encodes the spec fields, so any
stream can be derived directly without touching any other one.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Iterator

import numpy as np

SampleStream = np.random.Generator


class Role(enum.IntEnum):
    PATH_NOISE = 0
    PILOT = 1
    REFERENCE = 2


@dataclass(frozen=True)
class SeedSpec:
    """Address of one random stream.

    ``tag`` is an extra namespace used to keep the estimators of different
    studies (or of different MLMC levels ``L``) apart.
    """

    master_seed: int
    replicate: int = 0
    level: int = 0
    sample: int = 0
    role: Role = Role.PATH_NOISE
    tag: int = 0

    def __post_init__(self):
        for name in ("replicate", "level", "sample", "tag"):
            if getattr(self, name) < 0:
                raise ValueError(f"SeedSpec.{name} must be >= 0")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must fit in 64 unsigned bits")

    def with_(self, **changes) -> "SeedSpec":
        return replace(self, **changes)


def derive_stream(spec: SeedSpec) -> SampleStream:
    """Return the generator for ``spec``; identical specs give identical streams."""
    seq = np.random.SeedSequence(
        entropy=int(spec.master_seed),
        spawn_key=(int(spec.role), spec.tag, spec.replicate, spec.level, spec.sample),
    )
    return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class BrownianIncrements:
    """Increments of ``modes`` independent scalar Wiener processes.

    ``values`` has shape ``(..., steps, modes)``; leading axes index a batch
    of independent samples.
    """

    dt: float
    values: np.ndarray

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.values.ndim < 2:
            raise ValueError("values must have shape (..., steps, modes)")

    @property
    def steps(self) -> int:
        return self.values.shape[-2]

    @property
    def modes(self) -> int:
        return self.values.shape[-1]

    @property
    def t_end(self) -> float:
        return self.steps * self.dt

    def endpoint(self) -> np.ndarray:
        """beta_j(T) for every mode, shape ``(..., modes)``."""
        return coarsen(self, self.steps).values[..., 0, :]


def _check_shape(steps: int, modes: int, dt: float) -> None:
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if modes < 1:
        raise ValueError("modes must be >= 1")
    if not dt > 0:
        raise ValueError("dt must be positive")


def sample_increments(stream: SampleStream, steps: int, modes: int, dt: float,
                      batch: int | None = None) -> BrownianIncrements:
    """Draw a ``steps x modes`` matrix of independent N(0, dt) variates.

    With ``batch`` set, ``batch`` independent matrices are drawn in one go and
    stacked on a leading axis.
    """
    _check_shape(steps, modes, dt)
    shape = (steps, modes) if batch is None else (batch, steps, modes)
    return BrownianIncrements(dt, stream.standard_normal(shape) * np.sqrt(dt))


def iter_increments(stream: SampleStream, steps: int, modes: int,
                    dt: float) -> Iterator[np.ndarray]:
    """Yield the rows of :func:`sample_increments` one time step at a time.

    Consumes the stream in the same order, so the rows match the matrix drawn
    from a fresh copy of the same stream.
    """
    _check_shape(steps, modes, dt)
    scale = np.sqrt(dt)
    for _ in range(steps):
        yield stream.standard_normal(modes) * scale


def _is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def coarsen(fine: BrownianIncrements, factor: int) -> BrownianIncrements:
    """Sum consecutive blocks of ``factor`` rows.

    Power-of-two factors are summed by repeated pairwise halving, which makes
    ``coarsen(x, a*b) == coarsen(coarsen(x, a), b)`` hold bitwise.  Other
    factors use a single left-to-right pass over each block.
    """
    if factor < 1 or fine.steps % factor:
        raise ValueError(f"factor {factor} does not divide {fine.steps} steps")
    vals = fine.values
    lead = vals.shape[:-2]
    if _is_power_of_two(factor):
        f = factor
        while f > 1:
            vals = vals.reshape(*lead, vals.shape[-2] // 2, 2, fine.modes)
            vals = vals[..., 0, :] + vals[..., 1, :]
            f //= 2
        if factor == 1:
            vals = vals.copy()
    else:
        blocks = vals.reshape(*lead, fine.steps // factor, factor, fine.modes)
        vals = blocks[..., 0, :].copy()
        for i in range(1, factor):
            vals += blocks[..., i, :]
    return BrownianIncrements(fine.dt * factor, vals)


def truncate_modes(inc: BrownianIncrements, kappa: int) -> BrownianIncrements:
    """Keep the first ``kappa`` mode columns."""
    if kappa < 1 or kappa > inc.modes:
        raise ValueError(f"kappa must lie in [1, {inc.modes}], got {kappa}")
    return BrownianIncrements(inc.dt, inc.values[..., :kappa])
