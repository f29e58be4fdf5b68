"""Convergence studies for the GBM and stochastic heat equation testbeds.

Every study is a pure function of its :class:`ExperimentConfig`; the random
streams used by each estimator are addressed by ``SeedSpec`` fields so that
results do not depend on the number of worker threads.
"""

from __future__ import annotations

import enum
import functools
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import gbm
from . import spde_heat as heat
from .bounds import BoundPair, corollary_constants, type1_bounds, type2_bounds
from .estimators import (
    LevelSchedule,
    Sampler,
    corollary_schedule,
    mc_estimate,
    mlmc_weak_error_type1,
    mlmc_weak_error_type2,
    path_sampler,
    pilot_variance,
    replicate_average,
    weak_error_type1,
    weak_error_type2,
)
from .rng import BrownianIncrements, Role, SeedSpec, coarsen, truncate_modes


class ConfigError(ValueError):
    pass


class TestbedKind(str, enum.Enum):
    GBM = "GBM"
    HEAT_G1 = "HeatG1"
    HEAT_G2 = "HeatG2"


class Study(str, enum.Enum):
    STRONG = "Strong"
    WEAK_TYPE1 = "WeakType1"
    WEAK_TYPE2 = "WeakType2"
    MLMC_WEAK_TYPE1 = "MlmcWeakType1"
    MLMC_WEAK_TYPE2 = "MlmcWeakType2"
    BOUNDS_CHECK = "BoundsCheck"


# stream namespaces; MLMC estimates add the level L so each L is independent
_TAG = {
    Study.STRONG: 1,
    Study.WEAK_TYPE1: 2,
    Study.WEAK_TYPE2: 3,
    Study.BOUNDS_CHECK: 4,
    "reference": 5,
    Study.MLMC_WEAK_TYPE1: 1000,
    Study.MLMC_WEAK_TYPE2: 2000,
}


@dataclass(frozen=True)
class ExperimentConfig:
    testbed: TestbedKind
    study: Study
    levels: tuple[int, ...]
    n_samples: int
    m_replications: int = 1
    reference_level: int | None = None
    eps: float = 1.0
    master_seed: int = 20170601
    gbm: gbm.GbmConfig = field(default_factory=gbm.GbmConfig)
    heat: heat.HeatConfig = field(default_factory=heat.HeatConfig)
    r: float = 0.0
    n_pilot: int = 10_000
    reference_samples: int = 2000
    exact_truncation: int = 1_000_000
    schedule_source: str = "oracle"
    normalize_schedule: bool = False
    sample_cap: int | None = None
    fit_skip_last: int = 0
    tau: float = 0.3
    block_size: int | None = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "testbed", TestbedKind(self.testbed))
            object.__setattr__(self, "study", Study(self.study))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        object.__setattr__(self, "levels", tuple(int(x) for x in self.levels))
        if not self.levels:
            raise ConfigError("levels must not be empty")
        if min(self.levels) < 0:
            raise ConfigError("levels must be >= 0")
        if self.n_samples < 1 or self.m_replications < 1:
            raise ConfigError("n_samples and m_replications must be >= 1")
        if not self.eps > 0:
            raise ConfigError("eps must be positive")
        if self.schedule_source not in ("oracle", "pilot"):
            raise ConfigError("schedule_source must be 'oracle' or 'pilot'")
        if self.fit_skip_last < 0:
            raise ConfigError("fit_skip_last must be >= 0")
        mlmc = self.study in (Study.MLMC_WEAK_TYPE1, Study.MLMC_WEAK_TYPE2)
        if self.testbed is not TestbedKind.GBM:
            if self.reference_level is None:
                if self.testbed is TestbedKind.HEAT_G2 or self.study is not Study.WEAK_TYPE1:
                    raise ConfigError(f"{self.study.value} on {self.testbed.value} needs reference_level")
            elif self.reference_level < max(self.levels) + (1 if mlmc else 0):
                # multilevel level L runs on the grid of single-level level L + 1
                raise ConfigError("reference_level must not be coarser than the finest level")
            if mlmc and self.schedule_source == "oracle":
                raise ConfigError("no closed-form bias oracle for the heat testbeds; use schedule_source: pilot")
            if min(self.levels) < (0 if mlmc else 1):
                raise ConfigError("single-level heat studies start at level 1")
        if self.study is Study.MLMC_WEAK_TYPE2 and self.testbed is not TestbedKind.GBM:
            raise ConfigError("MlmcWeakType2 needs exact-solution samples on every level; only GBM is supported")


@dataclass(frozen=True)
class ErrorTableRow:
    level: int
    k: float
    h: float
    kappa: int
    error_mean: float
    error_std: float
    n_used: int | tuple[int, ...]


@dataclass(frozen=True)
class BoundsCheckRow:
    estimator: str
    level: int
    k: float
    bias: float
    variance: float
    n: int
    empirical_rms: float
    lower: float
    upper: float
    inside: bool


# --- testbeds -----------------------------------------------------------------

class GbmTestbed:
    """Level j is the Euler scheme with 2**j steps; Y = |X(T)|^2."""

    modes_needed = 1
    default_block = 4096

    def __init__(self, cfg: gbm.GbmConfig):
        self.cfg = cfg

    def level(self, j: int) -> gbm.GbmLevel:
        return gbm.level(self.cfg, j)

    def row_geometry(self, j: int) -> tuple[float, float, int]:
        return self.level(j).k, 0.0, 0

    def path_shape(self, levels: Sequence[int], with_exact: bool = False) -> tuple[int, int, float]:
        steps = 2 ** max(levels)
        return steps, 1, self.cfg.t_end / steps

    def restrict(self, inc: BrownianIncrements, j: int) -> BrownianIncrements:
        return coarsen(inc, inc.steps // self.level(j).n_steps)

    def terminal(self, j: int, inc: BrownianIncrements) -> np.ndarray:
        return gbm.euler_maruyama_terminal(self.cfg, self.level(j), self.restrict(inc, j))

    def exact_terminal(self, inc: BrownianIncrements) -> np.ndarray:
        return gbm.exact_terminal(self.cfg, inc.endpoint()[..., 0])

    def qoi(self, j: int, inc: BrownianIncrements) -> np.ndarray:
        return gbm.phi(self.terminal(j, inc))

    def exact_qoi(self, inc: BrownianIncrements) -> np.ndarray:
        return gbm.phi(self.exact_terminal(inc))

    def strong_sq_errors(self, levels: Sequence[int], inc: BrownianIncrements) -> np.ndarray:
        x = self.exact_terminal(inc)
        return np.stack([(x - self.terminal(j, inc)) ** 2 for j in levels], axis=-1)

    def exact_mean(self, xcfg: ExperimentConfig) -> float:
        return gbm.exact_second_moment(self.cfg, self.cfg.t_end)

    def bias(self, j: int) -> float:
        return gbm.exact_bias(self.cfg, self.level(j))


class HeatTestbed:
    """Level l of the finite element / implicit Euler scheme; Y = ||X||^2 in
    the discrete nodal norm for approximations and the spectral norm for the
    exact G1 solution."""

    default_block = 64

    def __init__(self, cfg: heat.HeatConfig, reference_level: int | None, base_k: float = 1.0,
                 r: float = 0.0, exact_truncation: int = 1_000_000):
        self.cfg = cfg
        self.base_k = base_k
        self.r = r
        self.reference_level = reference_level
        self.exact_truncation = exact_truncation
        # reference quantities always live on the single-level hierarchy (base_k = 1)
        self.ref = None if reference_level is None else heat.level_params(
            reference_level, 1.0, r, cfg.t_end)

    @property
    def is_g1(self) -> bool:
        return self.cfg.operator is heat.Operator.G1

    def level(self, ell: int) -> heat.LevelParams:
        return heat.level_params(ell, self.base_k, self.r, self.cfg.t_end)

    def row_geometry(self, ell: int) -> tuple[float, float, int]:
        p = self.level(ell)
        return p.k, p.h, p.kappa

    def path_shape(self, levels: Sequence[int], with_exact: bool = False) -> tuple[int, int, float]:
        params = [self.level(ell) for ell in levels]
        steps = max(p.n_k for p in params)
        modes = max(p.kappa for p in params)
        if with_exact:
            if self.ref is None:
                raise ConfigError("a reference level is required")
            if self.is_g1:
                modes = max(modes, self.ref.kappa, self.ref.n_h)
            else:
                steps, modes = max(steps, self.ref.n_k), max(modes, self.ref.kappa)
        return steps, modes, self.cfg.t_end / steps

    def _restrict_to(self, inc: BrownianIncrements, p: heat.LevelParams) -> BrownianIncrements:
        return truncate_modes(coarsen(inc, inc.steps // p.n_k), p.kappa)

    def restrict(self, inc: BrownianIncrements, ell: int) -> BrownianIncrements:
        return self._restrict_to(inc, self.level(ell))

    def terminal(self, ell: int, inc: BrownianIncrements) -> np.ndarray:
        p = self.level(ell)
        return heat.implicit_euler_path(self.cfg, p, self._restrict_to(inc, p))

    def qoi(self, ell: int, inc: BrownianIncrements) -> np.ndarray:
        return heat.discrete_norm_sq(self.terminal(ell, inc), self.level(ell).n_h)

    def _reference_terminal(self, inc: BrownianIncrements) -> np.ndarray:
        return heat.implicit_euler_path(self.cfg, self.ref, self._restrict_to(inc, self.ref))

    def exact_qoi(self, inc: BrownianIncrements) -> np.ndarray:
        if self.is_g1:
            return heat.exact_norm_sq_g1(self.cfg, inc.endpoint(), self.ref.n_h)
        return heat.discrete_norm_sq(self._reference_terminal(inc), self.ref.n_h)

    def reference_state(self, inc: BrownianIncrements) -> np.ndarray:
        if self.is_g1:
            coeffs = heat.exact_terminal_g1(self.cfg, inc.endpoint(), self.ref.kappa)
            return heat.spectral_to_nodal(coeffs, self.ref.n_h)
        return self._reference_terminal(inc)

    def strong_sq_errors(self, levels: Sequence[int], inc: BrownianIncrements) -> np.ndarray:
        ref = self.reference_state(inc)
        cols = []
        for ell in levels:
            p = self.level(ell)
            fine = heat.prolong(self.terminal(ell, inc), p.n_h, self.ref.n_h)
            cols.append(heat.discrete_norm_sq(fine - ref, self.ref.n_h))
        return np.stack(cols, axis=-1)

    def exact_mean(self, xcfg: ExperimentConfig) -> float:
        if self.is_g1:
            return heat.exact_expected_norm_sq_g1(self.cfg, self.cfg.t_end, self.exact_truncation)
        if self.ref is None:
            raise ConfigError("HeatG2 needs a reference level for its expected value")
        return _g2_reference_mean(self.cfg, self.reference_level, self.r, xcfg.reference_samples,
                                  xcfg.master_seed, _block(xcfg, self))

    def bias(self, ell: int) -> float | None:
        return None


@functools.lru_cache(maxsize=16)
def _g2_reference_mean(cfg, reference_level, r, n, master_seed, block):
    tb = HeatTestbed(cfg, reference_level, 1.0, r)
    steps, modes, dt = tb.path_shape([reference_level])
    spec = SeedSpec(master_seed, role=Role.REFERENCE, tag=_TAG["reference"])
    src = path_sampler(lambda inc: tb.qoi(reference_level, inc), spec, steps, modes, dt, block)
    return mc_estimate(src, n).value


def make_testbed(cfg: ExperimentConfig, mlmc: bool = False):
    if cfg.testbed is TestbedKind.GBM:
        return GbmTestbed(cfg.gbm)
    op = heat.Operator.G1 if cfg.testbed is TestbedKind.HEAT_G1 else heat.Operator.G2
    hcfg = heat.HeatConfig(cfg.heat.t_end, cfg.heat.c_mu, cfg.heat.eta, op, cfg.heat.x0_kind)
    return HeatTestbed(hcfg, cfg.reference_level, 0.25 if mlmc else 1.0, cfg.r, cfg.exact_truncation)


def _block(cfg: ExperimentConfig, tb) -> int:
    return cfg.block_size or tb.default_block


def _row(tb, ell, mean, std, n_used) -> ErrorTableRow:
    k, h, kappa = tb.row_geometry(ell)
    return ErrorTableRow(ell, k, h, kappa, mean, std, n_used)


def _sampler(cfg, tb, functional, levels, spec, workers, with_exact=False) -> Sampler:
    steps, modes, dt = tb.path_shape(levels, with_exact)
    return path_sampler(functional, spec, steps, modes, dt, _block(cfg, tb), workers)


# --- studies ------------------------------------------------------------------

def strong_error_study(cfg: ExperimentConfig, workers: int = 1) -> list[ErrorTableRow]:
    """Root-mean-square pathwise error of every level against the exact or
    reference solution, all levels driven by each sample's shared path."""
    tb = make_testbed(cfg)
    levels = cfg.levels
    if cfg.reference_level is not None and max(levels) > cfg.reference_level:
        raise ConfigError("reference level must not be coarser than the studied levels")

    def estimate(rep: int) -> np.ndarray:
        spec = SeedSpec(cfg.master_seed, replicate=rep, tag=_TAG[Study.STRONG])
        src = _sampler(cfg, tb, lambda inc: tb.strong_sq_errors(levels, inc), levels, spec,
                       workers, with_exact=True)
        return np.sqrt(np.mean(src.take(cfg.n_samples), axis=0))

    errs = np.array([estimate(r) for r in range(cfg.m_replications)])
    std = errs.std(axis=0, ddof=1) if cfg.m_replications > 1 else np.zeros(len(levels))
    return [_row(tb, ell, float(errs[:, i].mean()), float(std[i]), cfg.n_samples)
            for i, ell in enumerate(levels)]


def weak_error_study(cfg: ExperimentConfig, kind: int | None = None,
                     workers: int = 1) -> list[ErrorTableRow]:
    """Replicate-averaged type-I or type-II weak error estimates per level.

    Type I uses an independent path set per level; type II evaluates all
    levels on one shared path set per replicate.
    """
    kind = kind or (2 if cfg.study is Study.WEAK_TYPE2 else 1)
    tb = make_testbed(cfg)
    levels = cfg.levels
    n, m = cfg.n_samples, cfg.m_replications
    if kind == 1:
        exact = tb.exact_mean(cfg)
        rows = []
        for ell in levels:
            def err(rep, ell=ell):
                spec = SeedSpec(cfg.master_seed, replicate=rep, level=ell, tag=_TAG[Study.WEAK_TYPE1])
                src = _sampler(cfg, tb, lambda inc: tb.qoi(ell, inc), [ell], spec, workers)
                return weak_error_type1(exact, src, n)
            mean, std = replicate_average(err, m)
            rows.append(_row(tb, ell, mean, std, n))
        return rows

    def diffs(inc):
        y = tb.exact_qoi(inc)
        return np.stack([y - tb.qoi(ell, inc) for ell in levels], axis=-1)

    per_rep = []
    for rep in range(m):
        spec = SeedSpec(cfg.master_seed, replicate=rep, tag=_TAG[Study.WEAK_TYPE2])
        samples = _sampler(cfg, tb, diffs, levels, spec, workers, with_exact=True).take(n)
        per_rep.append([weak_error_type2(Sampler.from_values(samples[:, i]), n)
                        for i in range(len(levels))])
    per_rep = np.array(per_rep)
    std = per_rep.std(axis=0, ddof=1) if m > 1 else np.zeros(len(levels))
    return [_row(tb, ell, float(per_rep[:, i].mean()), float(std[i]), n)
            for i, ell in enumerate(levels)]


def level_difference_sampler(cfg, tb, ell: int, spec: SeedSpec, workers: int = 1,
                             exact_coupled: bool = False) -> Sampler:
    """Sampler for the multilevel summand of level ``ell``.

    Default (type I): Y_0 for ell = 0 and Y_ell - Y_(ell-1) otherwise.
    ``exact_coupled`` (type II): Y - Y_0 for ell = 0 and Y_(ell-1) - Y_ell.
    """
    if ell == 0:
        if exact_coupled:
            fn = lambda inc: tb.exact_qoi(inc) - tb.qoi(0, inc)
            return _sampler(cfg, tb, fn, [0], spec, workers, with_exact=True)
        return _sampler(cfg, tb, lambda inc: tb.qoi(0, inc), [0], spec, workers)
    sign = -1.0 if exact_coupled else 1.0
    fn = lambda inc: sign * (tb.qoi(ell, inc) - tb.qoi(ell - 1, inc))
    return _sampler(cfg, tb, fn, [ell], spec, workers)


def _pilot_level_variances(cfg, tb, max_level: int, workers: int) -> list[float]:
    out = []
    for ell in range(1, max_level + 1):
        spec = SeedSpec(cfg.master_seed, level=ell, role=Role.PILOT, tag=_TAG[Study.MLMC_WEAK_TYPE1])
        out.append(pilot_variance(level_difference_sampler(cfg, tb, ell, spec, workers), cfg.n_pilot))
    return out


def _pilot_bias(cfg, tb, ell: int, workers: int) -> float:
    spec = SeedSpec(cfg.master_seed, level=ell, role=Role.PILOT, tag=_TAG[Study.BOUNDS_CHECK] + 2)
    src = _sampler(cfg, tb, lambda inc: tb.exact_qoi(inc) - tb.qoi(ell, inc), [ell], spec,
                   workers, with_exact=True)
    return abs(mc_estimate(src, cfg.n_pilot).value)


def mlmc_schedule(cfg: ExperimentConfig, tb, L: int, workers: int = 1,
                  level_vars: Sequence[float] | None = None) -> LevelSchedule:
    """Bias-driven multilevel schedule for level L from the configured source.

    With ``normalize_schedule`` the quantity of interest is measured in units
    of its pilot level-0 standard deviation, which turns N_0 into
    Var[Y_0]/bias^2 and leaves the other levels unchanged.  ``sample_cap``
    truncates each level count.
    """
    if level_vars is None:
        level_vars = _pilot_level_variances(cfg, tb, L, workers)
    level_vars = list(level_vars)[:L]
    if cfg.schedule_source == "oracle":
        bias = tb.bias(L)
    else:
        bias = _pilot_bias(cfg, tb, L, workers)
    if cfg.normalize_schedule:
        spec = SeedSpec(cfg.master_seed, level=0, role=Role.PILOT, tag=_TAG[Study.MLMC_WEAK_TYPE1])
        scale = math.sqrt(pilot_variance(level_difference_sampler(cfg, tb, 0, spec, workers), cfg.n_pilot))
        bias, level_vars = bias / scale, [v / scale ** 2 for v in level_vars]
    sched = corollary_schedule(bias, level_vars, cfg.eps)
    if cfg.sample_cap:
        sched = LevelSchedule(tuple(min(c, cfg.sample_cap) for c in sched.counts))
    return sched


def mlmc_weak_study(cfg: ExperimentConfig, kind: int | None = None,
                    workers: int = 1) -> list[ErrorTableRow]:
    """Replicate-averaged multilevel weak-error estimates for each final level L.

    Every (L, replicate, level) triple has its own stream, so the estimates for
    different L are mutually independent.
    """
    kind = kind or (2 if cfg.study is Study.MLMC_WEAK_TYPE2 else 1)
    if kind == 2 and cfg.testbed is not TestbedKind.GBM:
        raise ConfigError("the type-II multilevel estimator needs exact samples; GBM only")
    tb = make_testbed(cfg, mlmc=True)
    exact = tb.exact_mean(cfg) if kind == 1 else None
    study = Study.MLMC_WEAK_TYPE1 if kind == 1 else Study.MLMC_WEAK_TYPE2
    all_vars = _pilot_level_variances(cfg, tb, max(cfg.levels), workers) if max(cfg.levels) else []
    rows = []
    for L in cfg.levels:
        sched = mlmc_schedule(cfg, tb, L, workers, all_vars)

        def err(rep, L=L, sched=sched):
            samplers = [level_difference_sampler(
                cfg, tb, ell,
                SeedSpec(cfg.master_seed, replicate=rep, level=ell, tag=_TAG[study] + L),
                workers, exact_coupled=(kind == 2)) for ell in range(L + 1)]
            if kind == 1:
                return mlmc_weak_error_type1(exact, samplers, sched)
            return mlmc_weak_error_type2(samplers, sched)

        mean, std = replicate_average(err, cfg.m_replications)
        rows.append(_row(tb, L, mean, std, sched.counts))
    return rows


@dataclass(frozen=True)
class CorollaryBand:
    level: int
    bias: float
    var_y0: float
    schedule: LevelSchedule
    rms: float
    c_low: float
    c_high: float

    @property
    def ratio(self) -> float:
        return self.rms / self.bias

    def inside(self, tau: float = 0.0) -> bool:
        return self.c_low * (1 - tau) <= self.ratio <= self.c_high * (1 + tau)


def corollary_band_check(cfg: ExperimentConfig, L: int, workers: int = 1) -> CorollaryBand:
    """RMS of (bias - multilevel type-I output) over the configured replicates,
    next to the constants that bracket it under the bias-driven schedule.

    Replicate streams are the ones :func:`mlmc_weak_study` uses for level L.
    """
    tb = make_testbed(cfg, mlmc=True)
    sched = mlmc_schedule(cfg, tb, L, workers)
    bias = tb.bias(L) if cfg.schedule_source == "oracle" else _pilot_bias(cfg, tb, L, workers)
    spec0 = SeedSpec(cfg.master_seed, level=0, role=Role.PILOT, tag=_TAG[Study.MLMC_WEAK_TYPE1])
    var_y0 = pilot_variance(level_difference_sampler(cfg, tb, 0, spec0, workers), cfg.n_pilot)
    exact = tb.exact_mean(cfg)

    def err(rep):
        samplers = [level_difference_sampler(
            cfg, tb, ell, SeedSpec(cfg.master_seed, replicate=rep, level=ell,
                                   tag=_TAG[Study.MLMC_WEAK_TYPE1] + L), workers)
            for ell in range(L + 1)]
        return mlmc_weak_error_type1(exact, samplers, sched)

    outs = np.array([err(r) for r in range(cfg.m_replications)])
    rms = float(np.sqrt(np.mean((bias - outs) ** 2)))
    c_low, c_high = corollary_constants(var_y0, cfg.eps)
    return CorollaryBand(L, bias, var_y0, sched, rms, c_low, c_high)


def bounds_check_study(cfg: ExperimentConfig, workers: int = 1) -> tuple[list[ErrorTableRow], list[BoundsCheckRow]]:
    """Empirical RMS of (bias - estimator) over replicates next to the
    theoretical bounds, for the type-I and type-II estimators at every level.

    GBM uses its exact bias; the heat testbeds use a pilot estimate of the
    bias.  Variances always come from pilot runs.
    """
    tb = make_testbed(cfg)
    n, m = cfg.n_samples, cfg.m_replications
    exact = tb.exact_mean(cfg)
    rows, report = [], []
    for ell in cfg.levels:
        bias = tb.bias(ell)
        if bias is None:
            bias = _pilot_bias(cfg, tb, ell, workers)
        qoi_fn = lambda inc, ell=ell: tb.qoi(ell, inc)
        diff_fn = lambda inc, ell=ell: tb.exact_qoi(inc) - tb.qoi(ell, inc)
        pilot_spec = SeedSpec(cfg.master_seed, level=ell, role=Role.PILOT, tag=_TAG[Study.BOUNDS_CHECK])
        var_yn = pilot_variance(_sampler(cfg, tb, qoi_fn, [ell], pilot_spec, workers), cfg.n_pilot)
        var_diff = pilot_variance(
            _sampler(cfg, tb, diff_fn, [ell], pilot_spec.with_(tag=pilot_spec.tag + 1),
                     workers, with_exact=True), cfg.n_pilot)
        for name, fn, var, bound_fn, with_exact in (
                ("type1", qoi_fn, var_yn, type1_bounds, False),
                ("type2", diff_fn, var_diff, type2_bounds, True)):
            outs = []
            for rep in range(m):
                spec = SeedSpec(cfg.master_seed, replicate=rep, level=ell,
                                tag=_TAG[Study.BOUNDS_CHECK] + (0 if name == "type1" else 10))
                src = _sampler(cfg, tb, fn, [ell], spec, workers, with_exact)
                outs.append(weak_error_type1(exact, src, n) if name == "type1"
                            else weak_error_type2(src, n))
            outs = np.array(outs)
            rms = float(np.sqrt(np.mean((bias - outs) ** 2)))
            bp: BoundPair = bound_fn(bias, var, n)
            report.append(BoundsCheckRow(name, ell, tb.row_geometry(ell)[0], bias, var, n, rms,
                                         bp.lower, bp.upper, bp.contains(rms, cfg.tau)))
            if name == "type1":
                std = float(outs.std(ddof=1)) if m > 1 else 0.0
                rows.append(_row(tb, ell, float(outs.mean()), std, n))
    return rows, report


def fit_rate(rows: Sequence[ErrorTableRow], skip_last: int = 0) -> tuple[float, float]:
    """Least-squares slope and intercept of log2(error) against log2(k)."""
    use = list(rows)[: len(rows) - skip_last] if skip_last else list(rows)
    good = [r for r in use if r.error_mean > 0 and math.isfinite(r.error_mean)]
    if len(good) < len(use):
        warnings.warn(f"dropped {len(use) - len(good)} rows with non-positive errors from the rate fit")
    if len(good) < 2:
        raise ValueError("need at least two rows with positive errors")
    x = np.log2([r.k for r in good])
    y = np.log2([r.error_mean for r in good])
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


def run_study(cfg: ExperimentConfig, workers: int = 1):
    """Dispatch on ``cfg.study``.  Returns the error rows, plus the bounds
    report for BoundsCheck (``None`` otherwise)."""
    if cfg.study is Study.STRONG:
        return strong_error_study(cfg, workers), None
    if cfg.study in (Study.WEAK_TYPE1, Study.WEAK_TYPE2):
        return weak_error_study(cfg, workers=workers), None
    if cfg.study in (Study.MLMC_WEAK_TYPE1, Study.MLMC_WEAK_TYPE2):
        return mlmc_weak_study(cfg, workers=workers), None
    return bounds_check_study(cfg, workers)
