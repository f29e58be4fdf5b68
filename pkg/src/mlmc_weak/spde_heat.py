"""Stochastic heat equation on [0, 1] with multiplicative Q-Wiener noise.

Space: piecewise-linear finite elements on a uniform mesh with zero boundary
values.  Time: implicit Euler-Maruyama.  Noise: Karhunen-Loeve expansion in
the Dirichlet sine basis truncated after ``kappa`` modes.

States are plain arrays of interior nodal values with the node index on the
last axis; any leading axes are a batch of independent samples.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .rng import BrownianIncrements


class Operator(str, enum.Enum):
    G1 = "G1"
    G2 = "G2"


class InitialCondition(str, enum.Enum):
    PARABOLA = "Parabola"


@dataclass(frozen=True)
class HeatConfig:
    t_end: float = 1.0
    c_mu: float = 5.0
    eta: float = 5.0
    operator: Operator = Operator.G1
    x0_kind: InitialCondition = InitialCondition.PARABOLA

    def __post_init__(self):
        object.__setattr__(self, "operator", Operator(self.operator))
        object.__setattr__(self, "x0_kind", InitialCondition(self.x0_kind))
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if not self.c_mu > 0:
            raise ValueError("c_mu must be positive (covariance eigenvalues mu_j = c_mu j^-eta)")
        if not self.eta > 1:
            raise ValueError(f"eta must be > 1 for Q to be trace class (mu_j = c_mu j^-eta), got {self.eta}")


@dataclass(frozen=True)
class LevelParams:
    ell: int
    k: float
    n_k: int
    h: float
    n_h: int
    kappa: int


def level_params(ell: int, base_k: float = 1.0, r: float = 0.0, t_end: float = 1.0) -> LevelParams:
    """k = base_k 4^-ell, h^(1+r) = k^(1/2), kappa = k^(-1/2)."""
    if ell < 0:
        raise ValueError("level must be >= 0")
    if not 0 <= r < 1:
        raise ValueError("r must lie in [0, 1)")
    k = base_k * 2.0 ** (-2 * ell)
    h = k ** (1 / (2 * (1 + r)))
    n_h, n_k = round(1 / h), round(t_end / k)
    if abs(n_h * h - 1) > 1e-9 or abs(n_k * k - t_end) > 1e-9 * t_end:
        raise ValueError(f"level {ell} gives non-integer grid counts (1/h={1 / h}, T/k={t_end / k})")
    kappa = max(1, round(k ** -0.5))
    return LevelParams(ell, k, n_k, 1.0 / n_h, n_h, kappa)


def eigenpair(j: int) -> tuple[float, Callable]:
    """Eigenvalue j^2 pi^2 of -Laplace and the eigenfunction sqrt(2) sin(j pi x)."""
    if j < 1:
        raise ValueError("mode index starts at 1")
    return (j * math.pi) ** 2, lambda x: math.sqrt(2) * np.sin(j * math.pi * np.asarray(x))


def _modes(j) -> np.ndarray:
    j = np.asarray(j)
    if np.any(j < 1):
        raise ValueError("mode index starts at 1")
    return j.astype(float)


def laplace_eigenvalue(j):
    return (_modes(j) * math.pi) ** 2


def q_eigenvalue(j, cfg: HeatConfig):
    out = cfg.c_mu * _modes(j) ** -cfg.eta
    return float(out) if np.ndim(out) == 0 else out


def x0_coefficient(j):
    """<x - x^2, e_j>: 4 sqrt(2) / (j pi)^3 for odd j, 0 for even j."""
    jj = _modes(j)
    out = np.where(np.asarray(j) % 2 == 1, 4 * math.sqrt(2) / (jj * math.pi) ** 3, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def x0_function(x):
    x = np.asarray(x, dtype=float)
    return x - x * x


# --- linear algebra ---------------------------------------------------------

@dataclass(frozen=True)
class Tridiagonal:
    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray

    def __post_init__(self):
        n = len(self.diag)
        if len(self.sub) != n - 1 or len(self.sup) != n - 1:
            raise ValueError("off-diagonals must have length n - 1")

    @property
    def n(self) -> int:
        return len(self.diag)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        out = self.diag * x
        out[..., 1:] += self.sub * x[..., :-1]
        out[..., :-1] += self.sup * x[..., 1:]
        return out

    def __add__(self, other: "Tridiagonal") -> "Tridiagonal":
        return Tridiagonal(self.sub + other.sub, self.diag + other.diag, self.sup + other.sup)

    def scaled(self, a: float) -> "Tridiagonal":
        return Tridiagonal(a * self.sub, a * self.diag, a * self.sup)

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.sub, -1) + np.diag(self.sup, 1)


class ThomasFactor:
    """Thomas-algorithm factorization for repeated solves with one matrix.

    Requires a matrix for which elimination without pivoting is stable
    (diagonally dominant or symmetric positive definite).
    """

    def __init__(self, tri: Tridiagonal):
        n = tri.n
        self.sub = np.asarray(tri.sub, dtype=float)
        self.inv_denom = np.empty(n)
        self.cprime = np.empty(max(n - 1, 0))
        d = tri.diag[0]
        for i in range(n):
            if i > 0:
                d = tri.diag[i] - tri.sub[i - 1] * self.cprime[i - 1]
            if d == 0:
                raise ZeroDivisionError("zero pivot in tridiagonal elimination")
            self.inv_denom[i] = 1.0 / d
            if i < n - 1:
                self.cprime[i] = tri.sup[i] * self.inv_denom[i]
        self.n = n

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve along the last axis of ``rhs``."""
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[-1] != self.n:
            raise ValueError(f"rhs has {rhs.shape[-1]} rows, matrix has {self.n}")
        x = np.moveaxis(rhs, -1, 0).copy()
        x[0] *= self.inv_denom[0]
        for i in range(1, self.n):
            x[i] -= self.sub[i - 1] * x[i - 1]
            x[i] *= self.inv_denom[i]
        for i in range(self.n - 2, -1, -1):
            x[i] -= self.cprime[i] * x[i + 1]
        return np.moveaxis(x, 0, -1)


def thomas_solve(tri: Tridiagonal, rhs: np.ndarray) -> np.ndarray:
    return ThomasFactor(tri).solve(rhs)


def assemble_matrices(n_h: int) -> tuple[Tridiagonal, Tridiagonal]:
    """Mass (h/6)[1 4 1] and stiffness (1/h)[-1 2 -1] on the interior nodes."""
    if n_h < 2:
        raise ValueError("need at least one interior node (n_h >= 2)")
    h, n = 1.0 / n_h, n_h - 1
    ones = np.ones(n - 1)
    mass = Tridiagonal(ones * h / 6, np.full(n, 4 * h / 6), ones * h / 6)
    stiff = Tridiagonal(-ones / h, np.full(n, 2 / h), -ones / h)
    return mass, stiff


def nodes(n_h: int) -> np.ndarray:
    return np.arange(1, n_h) / n_h


def interpolate(f: Callable, n_h: int) -> np.ndarray:
    """Interior nodal values f(x_i), x_i = i/n_h."""
    return np.asarray(f(nodes(n_h)), dtype=float)


def sine_basis(n_h: int, kappa: int) -> np.ndarray:
    """Nodal values of I_h e_j for j = 1..kappa, shape (kappa, n_h - 1)."""
    j = np.arange(1, kappa + 1)[:, None]
    return math.sqrt(2) * np.sin(j * math.pi * nodes(n_h)[None, :])


def prolong(v: np.ndarray, n_coarse: int, n_fine: int) -> np.ndarray:
    """Evaluate the piecewise-linear function with interior values ``v`` on a
    grid of ``n_fine`` cells (``n_fine`` a multiple of ``n_coarse``)."""
    if n_fine % n_coarse:
        raise ValueError("fine grid must refine the coarse grid")
    xc = np.arange(n_coarse + 1) / n_coarse
    eye = np.zeros((n_coarse + 1, n_coarse - 1))
    eye[1:-1] = np.eye(n_coarse - 1)
    xf = nodes(n_fine)
    p = np.stack([np.interp(xf, xc, eye[:, i]) for i in range(n_coarse - 1)], axis=1)
    return v @ p.T


def discrete_norm_sq(v: np.ndarray, n_h: int) -> np.ndarray:
    """(1/n_h) sum of squared nodal values; the zero boundary adds nothing."""
    v = np.asarray(v, dtype=float)
    out = np.sum(v * v, axis=-1) / n_h
    return float(out) if np.ndim(out) == 0 else out


def kl_increment_coeffs(inc_row: np.ndarray, cfg: HeatConfig) -> np.ndarray:
    """sqrt(mu_j) * d beta_j, the e_j-coefficients of the truncated noise increment."""
    inc_row = np.asarray(inc_row, dtype=float)
    kappa = inc_row.shape[-1]
    return np.sqrt(q_eigenvalue(np.arange(1, kappa + 1), cfg)) * inc_row


def apply_g1h(v: np.ndarray, coeffs: np.ndarray, basis: np.ndarray,
              mass_basis: np.ndarray) -> np.ndarray:
    """sum_j <v, I_h e_j> coeffs_j I_h e_j.

    ``basis`` holds the nodal vectors of I_h e_j (kappa x n) and
    ``mass_basis`` = basis @ M, so ``v @ mass_basis.T`` is the exact L2 inner
    product of two piecewise-linear functions.
    """
    if coeffs.shape[-1] != basis.shape[0] or v.shape[-1] != basis.shape[1]:
        raise ValueError("shape mismatch between state, coefficients and basis")
    proj = v @ mass_basis.T
    return (proj * coeffs) @ basis


def apply_g2h(v: np.ndarray, coeffs: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Nodal values of sin(v(x)) dW^kappa(x)."""
    if coeffs.shape[-1] != basis.shape[0] or v.shape[-1] != basis.shape[1]:
        raise ValueError("shape mismatch between state, coefficients and basis")
    return np.sin(v) * (coeffs @ basis)


class HeatSolver:
    """Precomputed matrices for one (config, level) pair."""

    def __init__(self, cfg: HeatConfig, lvl: LevelParams):
        self.cfg, self.level = cfg, lvl
        self.mass, stiff = assemble_matrices(lvl.n_h)
        self.factor = ThomasFactor(self.mass + stiff.scaled(lvl.k))
        self.basis = sine_basis(lvl.n_h, lvl.kappa)
        self.mass_basis = self.mass.matvec(self.basis)
        self.sqrt_mu = np.sqrt(q_eigenvalue(np.arange(1, lvl.kappa + 1), cfg))
        self.x_init = interpolate(x0_function, lvl.n_h)

    def noise_term(self, x: np.ndarray, dbeta: np.ndarray) -> np.ndarray:
        coeffs = self.sqrt_mu * dbeta
        if self.cfg.operator is Operator.G1:
            return apply_g1h(x, coeffs, self.basis, self.mass_basis)
        return apply_g2h(x, coeffs, self.basis)

    def run(self, increments: BrownianIncrements, x_init: np.ndarray | None = None,
            record: bool = False):
        lvl = self.level
        if increments.steps != lvl.n_k or increments.modes != lvl.kappa:
            raise ValueError(f"level {lvl.ell} needs ({lvl.n_k}, {lvl.kappa}) increments, got "
                             f"({increments.steps}, {increments.modes})")
        if not math.isclose(increments.dt, lvl.k, rel_tol=1e-12):
            raise ValueError(f"increment dt {increments.dt} does not match k={lvl.k}")
        dbeta = increments.values
        x0 = self.x_init if x_init is None else np.asarray(x_init, dtype=float)
        x = np.broadcast_to(x0, dbeta.shape[:-2] + (lvl.n_h - 1,)).copy()
        history = [x] if record else None
        for i in range(lvl.n_k):
            g = self.noise_term(x, dbeta[..., i, :])
            x = self.factor.solve(self.mass.matvec(x + g))
            if record:
                history.append(x)
        return np.stack(history) if record else x


@functools.lru_cache(maxsize=64)
def get_solver(cfg: HeatConfig, lvl: LevelParams) -> HeatSolver:
    return HeatSolver(cfg, lvl)


def implicit_euler_path(cfg: HeatConfig, lvl: LevelParams, increments: BrownianIncrements,
                        x_init: np.ndarray | None = None, record: bool = False):
    """Advance (M + kA) x^j = M (x^(j-1) + g^j) over all time steps.

    Returns the terminal nodal state, or every state stacked on a new leading
    axis when ``record`` is set.
    """
    return get_solver(cfg, lvl).run(increments, x_init=x_init, record=record)


# --- closed-form solution for G1 --------------------------------------------

def exact_terminal_g1(cfg: HeatConfig, beta_T: np.ndarray, truncation: int,
                      t: float | None = None) -> np.ndarray:
    """Sine coefficients of X(t) for j <= truncation, given beta_j(t)."""
    t = cfg.t_end if t is None else t
    beta_T = np.asarray(beta_T, dtype=float)
    if beta_T.shape[-1] < truncation:
        raise ValueError(f"need {truncation} Wiener endpoints, got {beta_T.shape[-1]}")
    j = np.arange(1, truncation + 1)
    mu = q_eigenvalue(j, cfg)
    expo = -(laplace_eigenvalue(j) + mu / 2) * t + np.sqrt(mu) * beta_T[..., :truncation]
    return x0_coefficient(j) * np.exp(expo)


def exact_norm_sq_g1(cfg: HeatConfig, beta_T: np.ndarray, truncation: int,
                     t: float | None = None):
    t = cfg.t_end if t is None else t
    beta_T = np.asarray(beta_T, dtype=float)
    if beta_T.shape[-1] < truncation:
        raise ValueError(f"need {truncation} Wiener endpoints, got {beta_T.shape[-1]}")
    j = np.arange(1, truncation + 1)
    mu = q_eigenvalue(j, cfg)
    expo = -(2 * laplace_eigenvalue(j) + mu) * t + 2 * np.sqrt(mu) * beta_T[..., :truncation]
    out = np.sum(x0_coefficient(j) ** 2 * np.exp(expo), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def exact_expected_norm_sq_g1(cfg: HeatConfig, t: float, truncation: int) -> float:
    if t < 0:
        raise ValueError("t must be >= 0")
    j = np.arange(1, truncation + 1)
    terms = x0_coefficient(j) ** 2 * np.exp((-2 * laplace_eigenvalue(j) + q_eigenvalue(j, cfg)) * t)
    return float(np.sum(terms[::-1]))


def spectral_to_nodal(coeffs: np.ndarray, n_h: int) -> np.ndarray:
    """Nodal values of sum_j coeffs_j e_j on the interior nodes of an n_h-cell grid."""
    return coeffs @ sine_basis(n_h, coeffs.shape[-1])
