"""Linear complementarity and box-constrained QP solvers.

Both problems are handled by projected Gauss-Seidel followed by an exact
solve on the detected free set.  PGS converges for symmetric positive
definite matrices, which covers every Stieltjes matrix.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ConditioningError, IterationLimitError, ShapeError

MAX_SWEEPS = 10_000
COND_LIMIT = 1e12


@dataclass(frozen=True)
class LCPInstance:
    """Find ``r, tau >= 0`` with ``r = S tau + rho`` and ``r . tau = 0``."""

    S: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        S = np.array(self.S, dtype=float)
        rho = np.array(self.rho, dtype=float).ravel()
        if S.ndim != 2 or S.shape != (rho.size, rho.size):
            raise ShapeError(f"S must be {rho.size}x{rho.size}, got {S.shape}")
        S.setflags(write=False)
        rho.setflags(write=False)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "rho", rho)

    def is_stieltjes(self, tol=0.0) -> bool:
        return is_stieltjes(self.S, tol)


def is_stieltjes(S, tol=0.0) -> bool:
    S = np.asarray(S, dtype=float)
    if not np.allclose(S, S.T, atol=1e-12):
        return False
    off = S - np.diag(np.diag(S))
    if np.any(off > tol):
        return False
    return bool(np.linalg.eigvalsh(S).min() > 0)


def _check_spd(A, what="matrix"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError(f"{what} must be square, got {A.shape}")
    if not np.allclose(A, A.T, atol=1e-10 * max(1.0, np.abs(A).max(initial=0.0))):
        raise ConditioningError(f"{what} is not symmetric")
    if A.size and np.linalg.cond(A) > COND_LIMIT:
        raise ConditioningError(f"{what} is singular or ill-conditioned")
    if A.size and np.linalg.eigvalsh(A).min() <= 0:
        raise ConditioningError(f"{what} is not positive definite")
    return A


def box_qp(A, b, lo, hi, tol=1e-12, max_sweeps=MAX_SWEEPS):
    """Minimize ``x'Ax/2 - b'x`` subject to ``lo <= x <= hi``.

    ``hi`` may contain ``+inf`` and ``lo`` may contain ``-inf``.  Returns the
    minimizer; raises :class:`IterationLimitError` when PGS stalls.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), b.shape)
    hi = np.broadcast_to(np.asarray(hi, dtype=float), b.shape)
    k = b.size
    if k == 0:
        return np.zeros(0)
    diag = np.diag(A)
    x = np.clip(np.zeros(k), lo, hi)
    for sweep in range(max_sweeps):
        change = 0.0
        for i in range(k):
            g = b[i] - A[i] @ x
            xi = min(max(x[i] + g / diag[i], lo[i]), hi[i])
            change = max(change, abs(xi - x[i]))
            x[i] = xi
        polished = _polish_box(A, b, lo, hi, x, tol)
        if polished is not None:
            return polished
        if change <= tol * max(1.0, np.abs(x[np.isfinite(x)]).max(initial=0.0)):
            return x
    grad = A @ x - b
    raise IterationLimitError("projected Gauss-Seidel did not converge",
                              {"sweeps": max_sweeps, "projected_gradient": float(
                                  np.abs(x - np.clip(x - grad, lo, hi)).max())})


def _polish_box(A, b, lo, hi, x, tol):
    """Solve exactly on the free set guessed from ``x``; None if the guess fails."""
    grad = A @ x - b
    at_lo = (x <= lo) & (grad >= 0)
    at_hi = (x >= hi) & (grad <= 0)
    free = ~(at_lo | at_hi)
    y = x.copy()
    y[at_lo] = lo[at_lo]
    y[at_hi] = hi[at_hi]
    if free.any():
        fixed = ~free
        rhs = b[free] - A[np.ix_(free, fixed)] @ y[fixed]
        try:
            y[free] = np.linalg.solve(A[np.ix_(free, free)], rhs)
        except np.linalg.LinAlgError:
            return None
    scale = max(1.0, np.abs(b).max(initial=0.0))
    if np.any(y < lo - tol * scale) or np.any(y > hi + tol * scale):
        return None
    y = np.clip(y, lo, hi)
    g = A @ y - b
    bad_lo = (y <= lo) & ~(y >= hi) & (g < -tol * scale)
    bad_hi = (y >= hi) & ~(y <= lo) & (g > tol * scale)
    interior = (y > lo) & (y < hi)
    if np.any(bad_lo) or np.any(bad_hi) or np.any(np.abs(g[interior]) > 1e3 * tol * scale):
        return None
    return y


def lcp_residuals(S, rho, tau):
    S = np.asarray(S, dtype=float)
    tau = np.asarray(tau, dtype=float)
    r = S @ tau + np.asarray(rho, dtype=float)
    return {
        "complementarity": float(abs(r @ tau)),
        "min_r": float(r.min(initial=0.0)),
        "min_tau": float(tau.min(initial=0.0)),
    }


def lcp_solve(inst: LCPInstance, tol=1e-12, max_sweeps=MAX_SWEEPS):
    """Solve the LCP ``r = S tau + rho``, ``r, tau >= 0``, ``r . tau = 0``.

    Returns ``(r, tau)``.  The LCP is the optimality system of
    ``min_{tau >= 0} tau'S tau/2 + rho'tau``.
    """
    S = _check_spd(inst.S, "S")
    rho = inst.rho
    if np.all(rho >= 0):
        return rho.copy(), np.zeros_like(rho)
    tau = box_qp(S, -rho, 0.0, np.inf, tol=tol, max_sweeps=max_sweeps)
    tau = np.maximum(tau, 0.0)
    r = S @ tau + rho
    # the exact solve on the free set leaves O(eps) noise where tau > 0
    snap = (tau > 0) & (np.abs(r) <= 1e-9 * max(1.0, np.abs(rho).max()))
    r[snap] = 0.0
    res = lcp_residuals(S, rho, tau)
    if res["min_r"] < -1e-10 or res["complementarity"] > 1e-10:
        raise IterationLimitError("LCP solution failed its residual check", res)
    return np.maximum(r, 0.0), tau


def lcp_enumerate(S, rho):
    """Brute-force LCP solve over all 2^k supports (test oracle, k <= 12)."""
    S = np.asarray(S, dtype=float)
    rho = np.asarray(rho, dtype=float)
    k = rho.size
    if k > 12:
        raise ValueError("enumeration is limited to k <= 12")
    best = None
    for mask in itertools.product([False, True], repeat=k):
        F = np.array(mask, dtype=bool)
        tau = np.zeros(k)
        if F.any():
            try:
                tau[F] = np.linalg.solve(S[np.ix_(F, F)], -rho[F])
            except np.linalg.LinAlgError:
                continue
        r = S @ tau + rho
        r[F] = 0.0
        viol = max(-tau.min(initial=0.0), -r.min(initial=0.0))
        if best is None or viol < best[0]:
            best = (viol, r, tau)
    return best[1], best[2]


def quadratic_residual(p, q_bar, A, tol=1e-12):
    """Unchosen quantities ``r = q_bar - q`` for ``max_{q <= q_bar} p'q - q'Aq/2``.

    Returns ``(r, tau)`` where ``tau`` is the multiplier of ``q <= q_bar``.
    """
    A = _check_spd(A, "A")
    p = np.asarray(p, dtype=float)
    q_bar = np.asarray(q_bar, dtype=float)
    if p.shape != (A.shape[0],) or q_bar.shape != p.shape:
        raise ShapeError("p and q_bar must match the size of A")
    S = np.linalg.inv(A)
    S = (S + S.T) / 2
    return lcp_solve(LCPInstance(S, q_bar - S @ p), tol=tol)
