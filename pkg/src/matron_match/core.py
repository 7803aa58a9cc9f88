"""Market data model, extended-real helpers and equilibrium records.

Matrices are indexed ``[x, y]`` with rows following ``types_x`` and columns
following ``types_y``.  Extended reals use IEEE infinities as sentinels; any
product that mixes a zero with an infinity goes through :func:`ext_mul`, which
applies the ``0 * inf = 0`` convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ShapeError

DEFAULT_TOL = 1e-8


def ext_mul(a, b):
    """Entrywise product with the convention ``0 * (+-inf) = 0``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(invalid="ignore"):
        out = a * b
    zero = (a == 0.0) | (b == 0.0)
    return np.where(zero, 0.0, out)


def ext_dot(a, b) -> float:
    """Sum of :func:`ext_mul` products; ``+inf - inf`` is reported as ``nan``."""
    return float(np.sum(ext_mul(a, b)))


def _as_vector(v, name):
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


def _as_matrix(v, shape, name):
    arr = np.asarray(v, dtype=float)
    if arr.shape != shape:
        raise ShapeError(f"{name} must have shape {shape}, got {arr.shape}")
    return arr


def _freeze(*arrays):
    for a in arrays:
        a.setflags(write=False)


@dataclass(frozen=True)
class MarketInstance:
    """Aggregated NTU market: type masses and systematic utilities.

    ``alpha_x0`` and ``gamma_0y`` are the reservation utilities of staying
    unmatched; they default to zero.
    """

    types_x: tuple
    types_y: tuple
    n: np.ndarray
    m: np.ndarray
    alpha: np.ndarray
    gamma: np.ndarray
    alpha_x0: Optional[np.ndarray] = None
    gamma_0y: Optional[np.ndarray] = None

    def __post_init__(self):
        n = _as_vector(self.n, "n")
        m = _as_vector(self.m, "m")
        shape = (n.size, m.size)
        alpha = _as_matrix(self.alpha, shape, "alpha").copy()
        gamma = _as_matrix(self.gamma, shape, "gamma").copy()
        a0 = np.zeros(n.size) if self.alpha_x0 is None else _as_vector(self.alpha_x0, "alpha_x0")
        g0 = np.zeros(m.size) if self.gamma_0y is None else _as_vector(self.gamma_0y, "gamma_0y")
        if len(self.types_x) != n.size or len(self.types_y) != m.size:
            raise ShapeError("type labels do not match mass vectors")
        if a0.size != n.size or g0.size != m.size:
            raise ShapeError("reservation utilities do not match mass vectors")
        if np.any(n < 0) or np.any(m < 0) or not (np.all(np.isfinite(n)) and np.all(np.isfinite(m))):
            raise ValueError("masses must be finite and nonnegative")
        for name, arr in (("alpha", alpha), ("gamma", gamma), ("alpha_x0", a0), ("gamma_0y", g0)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
        n, m, a0, g0 = n.copy(), m.copy(), a0.copy(), g0.copy()
        _freeze(n, m, alpha, gamma, a0, g0)
        object.__setattr__(self, "types_x", tuple(self.types_x))
        object.__setattr__(self, "types_y", tuple(self.types_y))
        for name, arr in (("n", n), ("m", m), ("alpha", alpha), ("gamma", gamma),
                          ("alpha_x0", a0), ("gamma_0y", g0)):
            object.__setattr__(self, name, arr)

    @property
    def shape(self):
        return (self.n.size, self.m.size)

    @classmethod
    def from_arrays(cls, n, m, alpha, gamma, alpha_x0=None, gamma_0y=None,
                    types_x: Optional[Sequence] = None, types_y: Optional[Sequence] = None):
        n = np.asarray(n, dtype=float)
        m = np.asarray(m, dtype=float)
        tx = types_x if types_x is not None else [f"x{i}" for i in range(n.size)]
        ty = types_y if types_y is not None else [f"y{j}" for j in range(m.size)]
        return cls(tx, ty, n, m, alpha, gamma, alpha_x0, gamma_0y)


@dataclass(frozen=True)
class Matching:
    mu: np.ndarray
    mu_x0: np.ndarray
    mu_0y: np.ndarray

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float)
        if mu.ndim != 2:
            raise ShapeError("mu must be a matrix")
        mu_x0 = _as_vector(self.mu_x0, "mu_x0").copy()
        mu_0y = _as_vector(self.mu_0y, "mu_0y").copy()
        if mu_x0.size != mu.shape[0] or mu_0y.size != mu.shape[1]:
            raise ShapeError("unmatched masses do not match mu")
        _freeze(mu, mu_x0, mu_0y)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "mu_x0", mu_x0)
        object.__setattr__(self, "mu_0y", mu_0y)

    @classmethod
    def from_mu(cls, mu, n, m):
        """Complete ``mu`` with the unmatched masses implied by ``n`` and ``m``."""
        mu = np.asarray(mu, dtype=float)
        return cls(mu, np.asarray(n, float) - mu.sum(axis=1), np.asarray(m, float) - mu.sum(axis=0))

    @classmethod
    def autarky(cls, inst: MarketInstance):
        return cls(np.zeros(inst.shape), inst.n, inst.m)

    def min_entry(self) -> float:
        parts = [self.mu.ravel(), self.mu_x0, self.mu_0y]
        return float(min((p.min() for p in parts if p.size), default=0.0))


def feasibility_residual(mu: Matching, inst: MarketInstance) -> float:
    """Sup-norm of the two marginal constraints; 0 for a feasible matching."""
    if mu.mu.shape != inst.shape:
        raise ShapeError(f"matching shape {mu.mu.shape} != market shape {inst.shape}")
    rx = mu.mu.sum(axis=1) + mu.mu_x0 - inst.n
    ry = mu.mu.sum(axis=0) + mu.mu_0y - inst.m
    return float(max(np.abs(rx).max(initial=0.0), np.abs(ry).max(initial=0.0)))


@dataclass
class EquilibriumCheck:
    """Worst signed violations of the classical equilibrium conditions.

    Positive numbers are violations, negative ones are margins; each entry
    passes when ``<= tol``.
    """

    feasibility: float
    nonnegativity: float
    blocking: float
    participation: float
    complementarity: float
    tol: float
    witnesses: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v <= self.tol for v in (self.feasibility, self.nonnegativity, self.blocking,
                                           self.participation, self.complementarity))

    def to_dict(self):
        return {"pass": self.passed, "feasibility": self.feasibility,
                "nonnegativity": self.nonnegativity, "blocking": self.blocking,
                "participation": self.participation, "complementarity": self.complementarity,
                "tol": self.tol, "witnesses": self.witnesses}


def _argmax_witness(arr):
    if arr.size == 0:
        return -np.inf, None
    idx = np.unravel_index(int(np.argmax(arr)), arr.shape)
    return float(arr[idx]), [int(i) for i in idx]


def classical_equilibrium_check(mu: Matching, u, v, inst: MarketInstance,
                                tol: float = DEFAULT_TOL) -> EquilibriumCheck:
    """Check feasibility, no blocking pair, participation and weak complementarity.

    Violations are reported, never raised.
    """
    u = _as_vector(u, "u")
    v = _as_vector(v, "v")
    if u.size != inst.shape[0] or v.size != inst.shape[1]:
        raise ShapeError("payoff vectors do not match the market")
    feas = feasibility_residual(mu, inst)
    neg = max(0.0, -mu.min_entry())

    slack = np.maximum(u[:, None] - inst.alpha, v[None, :] - inst.gamma)
    blocking, w_block = _argmax_witness(-slack)
    part = max(float(np.max(inst.alpha_x0 - u, initial=-np.inf)),
               float(np.max(inst.gamma_0y - v, initial=-np.inf)))

    comp_xy = np.where(mu.mu > tol, np.abs(slack), 0.0)
    comp_x0 = np.where(mu.mu_x0 > tol, np.abs(u - inst.alpha_x0), 0.0)
    comp_0y = np.where(mu.mu_0y > tol, np.abs(v - inst.gamma_0y), 0.0)
    comp, w_comp = _argmax_witness(comp_xy)
    comp = max(comp, float(comp_x0.max(initial=0.0)), float(comp_0y.max(initial=0.0)))

    return EquilibriumCheck(
        feasibility=feas,
        nonnegativity=neg,
        blocking=blocking if np.isfinite(blocking) else 0.0,
        participation=part if np.isfinite(part) else 0.0,
        complementarity=comp,
        tol=tol,
        witnesses={"blocking_pair": w_block, "complementarity_pair": w_comp},
    )


def uv_from_scalar(mu, u, v, alpha, gamma):
    """Matrix utilities ``U = min(u_x, alpha_xy)`` and ``V = min(v_y, gamma_xy)``.

    ``mu`` is accepted for signature symmetry with the equilibrium record and
    is not used.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if alpha.shape != (u.size, v.size) or gamma.shape != alpha.shape:
        raise ShapeError("utility matrices do not match payoff vectors")
    return np.minimum(u[:, None], alpha), np.minimum(v[None, :], gamma)


@dataclass(frozen=True)
class EquilibriumOutcome:
    mu: Matching
    U: np.ndarray
    V: np.ndarray
    tau_alpha: np.ndarray
    tau_gamma: np.ndarray
    residuals: dict = field(default_factory=dict)

    def no_blocking_residual(self, alpha, gamma) -> float:
        """Sup-norm of ``max(U - alpha, V - gamma)`` in extended arithmetic."""
        with np.errstate(invalid="ignore"):
            du = np.asarray(self.U) - alpha
            dv = np.asarray(self.V) - gamma
        gap = np.maximum(du, dv)
        if gap.size == 0:
            return 0.0
        return float(np.abs(gap).max())
