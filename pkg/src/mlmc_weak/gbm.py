"""Geometric Brownian motion testbed with phi(x) = |x|^2."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import BrownianIncrements


@dataclass(frozen=True)
class GbmConfig:
    mu: float = -0.5
    sigma: float = 1.0
    x0: float = 1.0
    t_end: float = 0.5

    def __post_init__(self):
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")


@dataclass(frozen=True)
class GbmLevel:
    """Uniform grid with 2**j steps (2**j + 1 grid points) on [0, t_end]."""

    j: int
    t_end: float = 0.5

    def __post_init__(self):
        if self.j < 0:
            raise ValueError("level index must be >= 0")

    @property
    def n_steps(self) -> int:
        return 2 ** self.j

    @property
    def k(self) -> float:
        return self.t_end / self.n_steps


def level(cfg: GbmConfig, j: int) -> GbmLevel:
    return GbmLevel(j, cfg.t_end)


def phi(x):
    return np.abs(x) ** 2


def exact_terminal(cfg: GbmConfig, w_T):
    return cfg.x0 * np.exp((cfg.mu - 0.5 * cfg.sigma ** 2) * cfg.t_end + cfg.sigma * np.asarray(w_T))


def exact_second_moment(cfg: GbmConfig, t: float) -> float:
    if not 0 <= t <= cfg.t_end:
        raise ValueError(f"t={t} outside [0, {cfg.t_end}]")
    return cfg.x0 ** 2 * float(np.exp((2 * cfg.mu + cfg.sigma ** 2) * t))


def euler_maruyama_terminal(cfg: GbmConfig, lvl: GbmLevel, increments: BrownianIncrements):
    """X^j = (1 + k mu + sigma dW_j) X^(j-1), started at x0.

    Accepts a batch of paths; returns the terminal values with the batch shape.
    """
    if increments.modes != 1 or increments.steps != lvl.n_steps:
        raise ValueError(f"expected ({lvl.n_steps}, 1) increments, got "
                         f"({increments.steps}, {increments.modes})")
    if not np.isclose(increments.dt, lvl.k, rtol=1e-12):
        raise ValueError(f"increment dt {increments.dt} does not match step {lvl.k}")
    dw = increments.values[..., 0]
    x = np.full(dw.shape[:-1], float(cfg.x0))
    growth = 1.0 + lvl.k * cfg.mu
    for i in range(lvl.n_steps):
        x = (growth + cfg.sigma * dw[..., i]) * x
    return x


def euler_second_moment_exact(cfg: GbmConfig, lvl: GbmLevel) -> float:
    """E|X^N|^2 of the Euler chain, available in closed form because the
    one-step factors are independent with mean 1 + k mu and variance sigma^2 k."""
    k = lvl.k
    return cfg.x0 ** 2 * ((1 + k * cfg.mu) ** 2 + cfg.sigma ** 2 * k) ** lvl.n_steps


def exact_bias(cfg: GbmConfig, lvl: GbmLevel) -> float:
    return abs(exact_second_moment(cfg, cfg.t_end) - euler_second_moment_exact(cfg, lvl))


def euler_fourth_moment_exact(cfg: GbmConfig, lvl: GbmLevel) -> float:
    """E|X^N|^4; gives Var[|X^N|^2] without sampling."""
    a, s2 = 1 + lvl.k * cfg.mu, cfg.sigma ** 2 * lvl.k
    return cfg.x0 ** 4 * (a ** 4 + 6 * a ** 2 * s2 + 3 * s2 ** 2) ** lvl.n_steps
