"""Welfare functions: value, conjugate, capped demand and cap multipliers.

A welfare function ``G`` is convex with compact conjugate domain and
``0 = min dom G*``.  For a capacity ``mu_bar`` the capped demand solves
``max_{mu <= mu_bar} mu.alpha - G*(mu)`` and the multipliers are the
smallest Lagrange multipliers ``tau >= 0`` of the cap, so that the demand
lies in the subdifferential of ``G`` at ``alpha - tau``.

Three implementations are provided: :class:`LogitWelfare` (closed form),
:class:`QuadraticWelfare` (box QP) and :class:`GridWelfare` (exhaustive
lattice search, used as an oracle).
"""

from __future__ import annotations

import itertools
from typing import Optional, Protocol

import numpy as np
from scipy.special import logsumexp, xlogy

from .core import ext_dot
from .errors import DomainError, ShapeError, SizeError
from .grid import GridFunction
from .lcp import _check_spd, box_qp

ROW_TOL = 1e-12
MAX_EXP = 700.0


class WelfareFunction(Protocol):
    shape: tuple

    def value(self, U) -> float: ...

    def conjugate(self, mu) -> float: ...

    def demand_cap(self) -> np.ndarray: ...

    def constrained_demand(self, alpha, mu_bar, mu_lo=None) -> np.ndarray: ...

    def multipliers(self, alpha, mu_bar) -> np.ndarray: ...


def welfare_fenchel_residual(W, U, mu) -> float:
    """``W(U) + W*(mu) - mu.U``; zero exactly when ``mu`` is in the subdifferential at ``U``."""
    U = np.asarray(U, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if U.shape != mu.shape or U.shape != tuple(W.shape):
        raise ShapeError(f"U {U.shape}, mu {mu.shape} and welfare {W.shape} disagree")
    cj = W.conjugate(mu)
    if not np.isfinite(cj):
        return np.inf
    val = W.value(U) + cj - ext_dot(mu, U)
    return float(max(val, 0.0)) if val > -1e-9 * max(1.0, abs(W.value(U))) else float(val)


def kkt_residuals(W, alpha, mu_bar, mu, tau):
    """Certificate for a capped demand ``mu`` and multipliers ``tau``.

    Returns the worst negative multiplier, the worst complementary-slackness
    product ``tau * (mu_bar - mu)`` (with ``0 * inf = 0``) and the Fenchel
    residual of ``mu`` at ``alpha - tau``.
    """
    alpha = np.asarray(alpha, dtype=float)
    mu_bar = np.asarray(mu_bar, dtype=float)
    gap = np.where(np.isinf(mu_bar), np.inf, mu_bar - mu)
    with np.errstate(invalid="ignore"):
        prod = np.where((tau == 0) | (gap == 0), 0.0, np.abs(tau * gap))
    with np.errstate(invalid="ignore"):
        shifted = alpha - tau
    return {
        "min_tau": float(np.min(tau, initial=0.0)),
        "slackness": float(np.nan_to_num(prod, nan=np.inf).max(initial=0.0)),
        "cap_excess": float(np.max(np.where(np.isinf(mu_bar), 0.0, mu - mu_bar), initial=0.0)),
        "fenchel": welfare_fenchel_residual(W, shifted, mu),
    }


# ---------------------------------------------------------------- logit rows

def _row_roots(slopes, lo, hi, n):
    """Exact root ``t`` of ``t + sum_j clip(t * s_j, lo_j, hi_j) = n`` per row.

    The left side is piecewise linear and strictly increasing in ``t``; the
    root is located among the breakpoints and interpolated.  Rows with
    ``sum(lo) >= n`` return 0.
    """
    rows = n.size
    with np.errstate(divide="ignore", invalid="ignore"):
        b_lo = np.where(slopes > 0, lo / slopes, np.inf)
        b_hi = np.where(slopes > 0, hi / slopes, np.inf)
    cand = np.concatenate([np.zeros((rows, 1)), n[:, None], b_lo, b_hi], axis=1)
    cand = np.clip(np.nan_to_num(cand, nan=0.0, posinf=np.inf), 0.0, n[:, None])
    cand.sort(axis=1)
    with np.errstate(invalid="ignore"):
        F = cand + np.clip(cand[:, :, None] * slopes[:, None, :], lo[:, None, :],
                           hi[:, None, :]).sum(axis=2)
    above = F >= n[:, None]
    j = np.argmax(above, axis=1)
    j = np.where(above.any(axis=1), j, cand.shape[1] - 1)
    r = np.arange(rows)
    jm = np.maximum(j - 1, 0)
    t0, t1 = cand[r, jm], cand[r, j]
    f0, f1 = F[r, jm], F[r, j]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where((j == 0) | (f1 <= f0), t1, t0 + (n - f0) * (t1 - t0) / (f1 - f0))
    return np.clip(t, 0.0, n)


def row_equation_residual(mu0, slopes, lo, hi, n):
    val = mu0 + np.clip(mu0[:, None] * slopes, lo, hi).sum(axis=1)
    return np.abs(val - n)


def logit_rows(alpha, n, mu_bar=None, mu_lo=None, reservation=None):
    """Capped logit demand per row; returns ``(mu, mu_0)``.

    ``mu_xy = clip(mu_0 * exp(alpha_xy - r_x), lo_xy, mu_bar_xy)`` where the
    outside mass ``mu_0`` solves the row budget equation.
    """
    alpha = np.asarray(alpha, dtype=float)
    n = np.asarray(n, dtype=float)
    rows, cols = alpha.shape
    res = np.zeros(rows) if reservation is None else np.asarray(reservation, dtype=float)
    hi = np.full(alpha.shape, np.inf) if mu_bar is None else np.asarray(mu_bar, dtype=float)
    lo = np.zeros(alpha.shape) if mu_lo is None else np.asarray(mu_lo, dtype=float)
    if hi.shape != alpha.shape or lo.shape != alpha.shape:
        raise ShapeError("caps must match alpha")
    with np.errstate(over="ignore"):
        slopes = np.exp(np.minimum(alpha - res[:, None], MAX_EXP))
    lo = np.minimum(lo, hi)
    mu0 = _row_roots(slopes, lo, hi, n)
    mu = np.clip(mu0[:, None] * slopes, lo, hi)
    empty = n <= 0
    mu[empty] = 0.0
    mu0[empty] = 0.0
    return mu, mu0


def logit_value(alpha, n, reservation=None) -> float:
    """``sum_x n_x log(exp(r_x) + sum_y exp(alpha_xy))`` (``r = 0`` by default).

    Entries of ``-inf`` contribute nothing.
    """
    alpha = np.asarray(alpha, dtype=float)
    n = np.asarray(n, dtype=float)
    res = np.zeros(n.size) if reservation is None else np.asarray(reservation, dtype=float)
    full = np.concatenate([res[:, None], alpha], axis=1)
    return float(np.sum(np.where(n > 0, n * logsumexp(full, axis=1), 0.0)))


def logit_constrained_demand(alpha, mu_bar, n, mu_lo=None, reservation=None):
    """Capped logit demand ``(mu, mu_x0)`` for one side of the market."""
    return logit_rows(alpha, n, mu_bar, mu_lo, reservation)


def logit_multipliers(alpha, mu_bar, n, reservation=None):
    """Smallest cap multipliers ``max(0, alpha - r + log(mu_0 / mu_bar))``.

    ``log(mu_0 / 0) = +inf`` when ``mu_0 > 0``; rows with zero mass get 0.
    """
    alpha = np.asarray(alpha, dtype=float)
    mu_bar = np.asarray(mu_bar, dtype=float)
    n = np.asarray(n, dtype=float)
    res = np.zeros(n.size) if reservation is None else np.asarray(reservation, dtype=float)
    _, mu0 = logit_rows(alpha, n, mu_bar, None, res)
    with np.errstate(divide="ignore", invalid="ignore"):
        tau = alpha - res[:, None] + np.log(mu0[:, None]) - np.log(mu_bar)
    tau = np.where(np.isnan(tau), 0.0, tau)
    tau = np.maximum(tau, 0.0)
    tau[np.isneginf(alpha)] = 0.0
    tau[n <= 0] = 0.0
    return tau


def logit_conjugate_rows(mu, n, reservation=None, tol=1e-12) -> float:
    """Entropy conjugate of the logit welfare, ``+inf`` off its domain."""
    mu = np.asarray(mu, dtype=float)
    n = np.asarray(n, dtype=float)
    res = np.zeros(n.size) if reservation is None else np.asarray(reservation, dtype=float)
    if np.any(mu < -tol):
        return np.inf
    mu = np.maximum(mu, 0.0)
    mu0 = n - mu.sum(axis=1)
    if np.any(mu0 < -tol * np.maximum(1.0, n)):
        return np.inf
    mu0 = np.maximum(mu0, 0.0)
    if np.any((n <= 0) & (mu.sum(axis=1) > 0)):
        return np.inf
    safe_n = np.where(n > 0, n, 1.0)
    ent = xlogy(mu, mu / safe_n[:, None]).sum(axis=1) + xlogy(mu0, mu0 / safe_n)
    return float(np.sum(np.where(n > 0, ent - mu0 * res, 0.0)))


class LogitWelfare:
    """Logit welfare of one side of the market.

    ``axis=0``: choosers are the rows (the x side, masses ``n``).
    ``axis=1``: choosers are the columns (the y side, masses ``m``).
    """

    kind = "logit"

    def __init__(self, masses, shape, axis=0, reservation=None):
        self.masses = np.asarray(masses, dtype=float)
        self.shape = tuple(shape)
        self.axis = int(axis)
        if self.axis not in (0, 1):
            raise ValueError("axis must be 0 or 1")
        if self.masses.size != self.shape[self.axis]:
            raise ShapeError("masses do not match the chooser dimension")
        self.reservation = (np.zeros(self.masses.size) if reservation is None
                            else np.asarray(reservation, dtype=float))

    def _t(self, a):
        a = np.asarray(a, dtype=float)
        if a.shape != self.shape:
            raise ShapeError(f"expected shape {self.shape}, got {a.shape}")
        return a.T if self.axis == 1 else a

    def _back(self, a):
        return a.T.copy() if self.axis == 1 else a

    def value(self, U):
        return logit_value(self._t(U), self.masses, self.reservation)

    def conjugate(self, mu):
        return logit_conjugate_rows(self._t(mu), self.masses, self.reservation)

    def demand_cap(self):
        cap = np.broadcast_to(self.masses[:, None], self._t(np.zeros(self.shape)).shape)
        return self._back(np.array(cap))

    def constrained_demand(self, alpha, mu_bar, mu_lo=None):
        lo = None if mu_lo is None else self._t(mu_lo)
        mu, _ = logit_rows(self._t(alpha), self.masses, self._t(mu_bar), lo, self.reservation)
        return self._back(mu)

    def unmatched(self, alpha, mu_bar, mu_lo=None):
        lo = None if mu_lo is None else self._t(mu_lo)
        return logit_rows(self._t(alpha), self.masses, self._t(mu_bar), lo, self.reservation)[1]

    def multipliers(self, alpha, mu_bar):
        return self._back(logit_multipliers(self._t(alpha), self._t(mu_bar), self.masses,
                                            self.reservation))


class QuadraticWelfare:
    """``G*(mu) = mu'A mu / 2`` on the box ``0 <= mu <= cap`` (``mu`` flattened row-major)."""

    kind = "quadratic"

    def __init__(self, A, cap):
        self.cap = np.asarray(cap, dtype=float)
        self.shape = self.cap.shape
        k = self.cap.size
        self.A = _check_spd(np.asarray(A, dtype=float), "A")
        if self.A.shape != (k, k):
            raise ShapeError(f"A must be {k}x{k} for a {self.shape} market")
        if np.any(self.cap < 0) or not np.all(np.isfinite(self.cap)):
            raise ValueError("cap must be finite and nonnegative")

    def _solve(self, U, lo, hi):
        U = np.asarray(U, dtype=float).ravel()
        lo = np.zeros(U.size) if lo is None else np.asarray(lo, dtype=float).ravel()
        hi = np.minimum(self.cap.ravel(), np.asarray(hi, dtype=float).ravel())
        closed = np.isneginf(U)
        hi = np.where(closed, 0.0, hi)
        lo = np.minimum(lo, hi)
        b = np.where(closed, 0.0, U)
        return box_qp(self.A, b, lo, hi)

    def value(self, U):
        mu = self._solve(U, None, self.cap)
        return ext_dot(mu, np.asarray(U, dtype=float).ravel()) - mu @ self.A @ mu / 2

    def conjugate(self, mu, tol=1e-12):
        mu = np.asarray(mu, dtype=float).ravel()
        if np.any(mu < -tol) or np.any(mu > self.cap.ravel() + tol):
            return np.inf
        return float(mu @ self.A @ mu / 2)

    def demand_cap(self):
        return self.cap.copy()

    def constrained_demand(self, alpha, mu_bar, mu_lo=None):
        return self._solve(alpha, mu_lo, mu_bar).reshape(self.shape)

    def multipliers(self, alpha, mu_bar):
        alpha = np.asarray(alpha, dtype=float).ravel()
        mu_bar = np.asarray(mu_bar, dtype=float).ravel()
        mu = self._solve(alpha, None, mu_bar)
        active = mu_bar < self.cap.ravel()
        with np.errstate(invalid="ignore"):
            grad = np.where(np.isneginf(alpha), 0.0, alpha - self.A @ mu)
        tau = np.where(active & (mu >= mu_bar - 1e-12), np.maximum(grad, 0.0), 0.0)
        return tau.reshape(self.shape)


class GridWelfare:
    """Welfare whose conjugate is given on a lattice over flattened ``mu``.

    Every operation is an exhaustive search, so this is only usable for tiny
    markets; it serves as an independent oracle.
    """

    kind = "grid"

    def __init__(self, conjugate: GridFunction, shape, tau_axis=None, budget=5_000_000):
        self.gstar = conjugate
        self.shape = tuple(shape)
        if conjugate.ndim != int(np.prod(self.shape)):
            raise ShapeError("conjugate grid dimension must equal the number of pairs")
        dom = conjugate.domain()
        self.nodes = conjugate.points()[dom]
        self.costs = conjugate.flat()[dom]
        zero = conjugate.node_index(np.zeros(conjugate.ndim))
        if zero is None or not np.isfinite(conjugate.values[zero]):
            raise DomainError("the conjugate must be finite at 0")
        if np.any(self.nodes < -1e-12):
            raise DomainError("the conjugate domain must lie in the nonnegative orthant")
        self.tau_axis = (np.linspace(0.0, 10.0, 201) if tau_axis is None
                         else np.asarray(tau_axis, dtype=float))
        self.budget = budget

    def _scores(self, U):
        U = np.asarray(U, dtype=float).ravel()
        with np.errstate(invalid="ignore"):
            prod = self.nodes * U
        prod = np.where(self.nodes == 0, 0.0, prod)
        return prod.sum(axis=1) - self.costs

    def value(self, U):
        return float(self._scores(U).max())

    def conjugate(self, mu, tol=1e-9):
        idx = self.gstar.node_index(np.asarray(mu, dtype=float).ravel(), tol)
        return np.inf if idx is None else float(self.gstar.values[idx])

    def demand_cap(self):
        return self.nodes.max(axis=0).reshape(self.shape)

    def _feasible(self, lo, hi, tol=1e-12):
        ok = np.all(self.nodes <= np.asarray(hi, dtype=float).ravel() + tol, axis=1)
        if lo is not None:
            ok &= np.all(self.nodes >= np.asarray(lo, dtype=float).ravel() - tol, axis=1)
        return ok

    def constrained_demand(self, alpha, mu_bar, mu_lo=None):
        ok = self._feasible(mu_lo, mu_bar)
        if not ok.any():
            raise DomainError("no lattice node satisfies the bounds")
        scores = np.where(ok, self._scores(alpha), -np.inf)
        return self.nodes[int(np.argmax(scores))].reshape(self.shape).copy()

    def multipliers(self, alpha, mu_bar, tol=1e-9):
        """Coordinatewise smallest minimizer of ``mu_bar.tau + G(alpha - tau)`` on the tau lattice."""
        alpha = np.asarray(alpha, dtype=float).ravel()
        mu_bar = np.asarray(mu_bar, dtype=float).ravel()
        k = alpha.size
        axis = np.append(self.tau_axis, np.inf)
        if axis.size ** k * len(self.nodes) > self.budget:
            raise SizeError("tau lattice too large for exhaustive search")
        best, keep = np.inf, []
        for tau in itertools.product(axis, repeat=k):
            tau = np.array(tau)
            with np.errstate(invalid="ignore"):
                obj = np.sum(np.where(tau == 0, 0.0, mu_bar * tau)) + self.value(alpha - tau)
            obj = np.inf if np.isnan(obj) else obj
            if obj < best - tol:
                best, keep = obj, [tau]
            elif obj <= best + tol:
                keep.append(tau)
        return np.min(np.array(keep), axis=0).reshape(self.shape)


def grid_welfare_from_conjugate(gstar: GridFunction, cap, tau_axis=None) -> GridWelfare:
    """Oracle welfare from a sampled conjugate; ``cap`` fixes the market shape."""
    cap = np.asarray(cap, dtype=float)
    W = GridWelfare(gstar, cap.shape, tau_axis=tau_axis)
    if np.any(W.nodes > cap.ravel() + 1e-12):
        raise DomainError("conjugate domain exceeds the cap")
    return W


def welfare_from_spec(spec: dict, side: str, n, m, reservation: Optional[np.ndarray] = None):
    """Build a welfare function from its instance-file description."""
    n = np.asarray(n, dtype=float)
    m = np.asarray(m, dtype=float)
    shape = (n.size, m.size)
    kind = spec.get("kind")
    if kind == "logit":
        if side == "x":
            return LogitWelfare(n, shape, axis=0, reservation=reservation)
        return LogitWelfare(m, shape, axis=1, reservation=reservation)
    if kind == "quadratic":
        cap = np.asarray(spec.get("cap", np.minimum(n[:, None], m[None, :])), dtype=float)
        return QuadraticWelfare(np.asarray(spec["A"], dtype=float), cap)
    if kind == "grid":
        g = GridFunction.from_dict(spec["conjugate"])
        tau = spec.get("tau_axis")
        return GridWelfare(g, shape, tau_axis=None if tau is None else np.asarray(tau))
    raise ValueError(f"unknown welfare kind {kind!r}")
