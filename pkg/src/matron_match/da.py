"""Deferred acceptance for divisible goods, with trace and equilibrium checks.

Each iteration the x side proposes the capped demand ``mu_P`` within the
available mass ``mu_A`` (and above the previously accepted ``mu_T``), the y
side keeps its capped demand ``mu_T`` within ``mu_P``, and the rejected mass
``mu_P - mu_T`` is removed from ``mu_A``.  The cap multipliers ``tau_P`` and
``tau_T`` are recorded along the way; at the limit they become the waiting
times of the generalized equilibrium.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import DEFAULT_TOL, EquilibriumOutcome, Matching, ext_mul
from .errors import ShapeError, SolverIntegrityError, StateError
from .welfare import kkt_residuals, welfare_fenchel_residual

INTEGRITY_TOL = 1e-6
UPDATE_RULES = ("subtractive", "alkan_gale")


@dataclass(frozen=True)
class DAOptions:
    tol_stop: float = 1e-10
    max_iter: int = 100_000
    update_rule: str = "subtractive"
    selection: str = "inf-multiplier"
    seed: int = 0
    certify: bool = False
    integrity_tol: float = INTEGRITY_TOL

    def __post_init__(self):
        if not self.tol_stop > 0:
            raise ValueError("tol_stop must be positive")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be at least 1")
        if self.update_rule not in UPDATE_RULES:
            raise ValueError(f"update_rule must be one of {UPDATE_RULES}")
        if self.selection != "inf-multiplier":
            raise ValueError("only the inf-multiplier selection is available")


@dataclass
class DATrace:
    """Per-iteration record; ``mu_A[k]`` is the availability used at iteration k.

    ``mu_A`` holds one more entry than the other lists: the availability
    produced by the last update (equal to the last used one on convergence).
    ``kkt`` is filled only when ``DAOptions.certify`` is set.
    """

    options: DAOptions
    mu_A: list = field(default_factory=list)
    mu_P: list = field(default_factory=list)
    mu_T: list = field(default_factory=list)
    tau_P: list = field(default_factory=list)
    tau_T: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    kkt: list = field(default_factory=list)
    converged: bool = False
    reason: str = ""

    @property
    def iterations(self):
        return len(self.mu_P)

    def final(self):
        if not self.mu_P:
            raise StateError("trace is empty")
        return self.mu_P[-1], self.mu_T[-1], self.tau_P[-1], self.tau_T[-1]

    def to_jsonl(self, fh):
        """One JSON object per iteration, fixed key order; infinities as strings."""
        from .io import encode

        for k in range(self.iterations):
            row = {"k": k, "mu_A": self.mu_A[k], "mu_P": self.mu_P[k], "mu_T": self.mu_T[k],
                   "tau_P": self.tau_P[k] if self.tau_P else None,
                   "tau_T": self.tau_T[k] if self.tau_T else None,
                   "residual": self.residuals[k]}
            fh.write(json.dumps(encode(row), allow_nan=False) + "\n")


def _certify(trace, side, W, util, cap, mu, tau, opts, k):
    res = kkt_residuals(W, util, cap, mu, tau)
    if not res["fenchel"] <= opts.integrity_tol:
        raise SolverIntegrityError(
            f"{side} welfare failed its Fenchel certificate at iteration {k}: {res['fenchel']:.3e}")
    if opts.certify:
        res.update(side=side, k=k)
        trace.kkt.append(res)


def run_da(G, H, alpha, gamma, opts: Optional[DAOptions] = None) -> DATrace:
    """Deferred acceptance between welfare functions G (x side) and H (y side).

    Stops when ``max|mu_P - mu_T| <= tol_stop``; hitting ``max_iter`` returns
    the trace with ``converged=False``.  Raises :class:`SolverIntegrityError`
    when a welfare oracle returns a demand that fails its Fenchel
    certificate.
    """
    opts = opts or DAOptions()
    alpha = np.asarray(alpha, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if alpha.shape != gamma.shape or tuple(G.shape) != alpha.shape or tuple(H.shape) != alpha.shape:
        raise ShapeError("alpha, gamma and the welfare functions must share a shape")
    trace = DATrace(opts)
    mu_A = np.minimum(G.demand_cap(), H.demand_cap())
    mu_T = np.zeros_like(mu_A)
    trace.mu_A.append(mu_A.copy())
    for k in range(int(opts.max_iter)):
        mu_P = G.constrained_demand(alpha, mu_A, mu_lo=mu_T)
        tau_P = G.multipliers(alpha, mu_A)
        _certify(trace, "G", G, alpha, mu_A, mu_P, tau_P, opts, k)
        mu_T = H.constrained_demand(gamma, mu_P)
        tau_T = H.multipliers(gamma, mu_P)
        _certify(trace, "H", H, gamma, mu_P, mu_T, tau_T, opts, k)
        resid = float(np.abs(mu_P - mu_T).max(initial=0.0))
        trace.mu_P.append(mu_P)
        trace.mu_T.append(mu_T)
        trace.tau_P.append(tau_P)
        trace.tau_T.append(tau_T)
        trace.residuals.append(resid)
        if opts.update_rule == "subtractive":
            mu_A = mu_A - (mu_P - mu_T)
        else:
            mu_A = np.where(mu_T < mu_P, mu_T, mu_A)
        trace.mu_A.append(mu_A.copy())
        if resid <= opts.tol_stop:
            trace.converged = True
            trace.reason = "residual below tol_stop"
            return trace
    trace.reason = "max_iter reached"
    return trace


def run_alkan_gale(CX: Callable, CY: Callable, cap0, opts: Optional[DAOptions] = None) -> DATrace:
    """Alkan-Gale variant on point-valued choice maps.

    ``mu_X = CX(mu_A)``, ``mu_Y = CY(mu_X)``; entries with a rejection get
    their availability reset to ``mu_Y``, the others keep it.
    """
    opts = opts or DAOptions(update_rule="alkan_gale")
    mu_A = np.array(cap0, dtype=float)
    trace = DATrace(opts)
    trace.mu_A.append(mu_A.copy())
    for _ in range(int(opts.max_iter)):
        mu_X = np.asarray(CX(mu_A), dtype=float)
        mu_Y = np.asarray(CY(mu_X), dtype=float)
        resid = float(np.abs(mu_X - mu_Y).max(initial=0.0))
        trace.mu_P.append(mu_X)
        trace.mu_T.append(mu_Y)
        trace.residuals.append(resid)
        mu_A = np.where(mu_Y < mu_X, mu_Y, mu_A)
        trace.mu_A.append(mu_A.copy())
        if resid <= opts.tol_stop:
            trace.converged = True
            trace.reason = "residual below tol_stop"
            return trace
    trace.reason = "max_iter reached"
    return trace


def choice_maps(G, H, alpha, gamma):
    """Point-valued choice maps ``(CX, CY)`` built from the capped demands."""
    return (lambda cap: G.constrained_demand(alpha, cap),
            lambda cap: H.constrained_demand(gamma, cap))


def _masses(W, cap, axis):
    m = getattr(W, "masses", None)
    if m is not None and getattr(W, "axis", axis) == axis:
        return np.asarray(m, dtype=float)
    return cap.max(axis=1 - axis, initial=0.0)


def extract_equilibrium(trace: DATrace, G, H, alpha, gamma,
                        allow_unconverged=False) -> EquilibriumOutcome:
    """Equilibrium candidate from the last iterate of a converged trace.

    ``tau_alpha = tau_P 1{mu < n^G}``, ``tau_gamma = tau_T 1{mu < n^H}``,
    ``U = alpha - tau_alpha`` and ``V = gamma - tau_gamma``; ``mu`` is the
    accepted mass ``mu_T``.  ``allow_unconverged`` builds the same record from
    an unfinished trace (used for partial results).
    """
    if not trace.converged and not allow_unconverged:
        raise StateError(f"trace did not converge ({trace.reason})")
    _, mu, tau_P, tau_T = trace.final()
    nG, nH = G.demand_cap(), H.demand_cap()
    tau_a = ext_mul(tau_P, (mu < nG).astype(float))
    tau_g = ext_mul(tau_T, (mu < nH).astype(float))
    U = np.asarray(alpha, dtype=float) - tau_a
    V = np.asarray(gamma, dtype=float) - tau_g
    match = Matching.from_mu(mu, _masses(G, nG, 0), _masses(H, nH, 1))
    return EquilibriumOutcome(match, U, V, tau_a, tau_g,
                              {"iterations": trace.iterations, "residual": trace.residuals[-1]})


def _no_blocking(tau_a, tau_g):
    """Worst ``min(tau_alpha, tau_gamma)`` in absolute value, with its entry."""
    gap = np.minimum(tau_a, tau_g)
    gap = np.where(np.isnan(gap), np.inf, np.abs(gap))
    if gap.size == 0:
        return 0.0, None
    idx = np.unravel_index(int(np.argmax(gap)), gap.shape)
    return float(gap[idx]), [int(i) for i in idx]


@dataclass
class GeneralizedEquilibriumReport:
    passed: bool
    no_blocking: float
    fenchel_g: float
    fenchel_h: float
    min_tau: float
    tol: float
    witness: dict = field(default_factory=dict)

    def __bool__(self):
        return self.passed

    def to_dict(self):
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


def verify_generalized_equilibrium(out: EquilibriumOutcome, G, H, alpha, gamma,
                                   tol=DEFAULT_TOL) -> GeneralizedEquilibriumReport:
    """``max(U - alpha, V - gamma) = 0`` entrywise and ``mu`` in both subdifferentials.

    Waiting times are recovered as ``alpha - U`` and ``gamma - V`` so a
    perturbed ``U`` or ``V`` is judged on its own.
    """
    alpha = np.asarray(alpha, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    U = np.asarray(out.U, dtype=float)
    V = np.asarray(out.V, dtype=float)
    with np.errstate(invalid="ignore"):
        tau_a = alpha - U
        tau_g = gamma - V
    nb, where = _no_blocking(tau_a, tau_g)
    mu = out.mu.mu
    fg = welfare_fenchel_residual(G, U, mu)
    fh = welfare_fenchel_residual(H, V, mu)
    min_tau = float(min(np.min(tau_a, initial=0.0), np.min(tau_g, initial=0.0)))
    passed = bool(nb <= tol and fg <= tol and fh <= tol and min_tau >= -tol)
    witness = {"no_blocking_entry": where} if nb > tol else {}
    return GeneralizedEquilibriumReport(passed, nb, fg, fh, min_tau, tol, witness)


@dataclass
class TraceReport:
    passed: bool
    checks: dict
    witness: dict = field(default_factory=dict)

    def __bool__(self):
        return self.passed

    def to_dict(self):
        return {"pass": self.passed, "checks": self.checks, "witness": self.witness}


def _first_bad(seq, bad):
    for k in range(1, len(seq)):
        with np.errstate(invalid="ignore"):
            if np.any(bad(seq[k - 1], seq[k])):
                return k
    return None


def trace_invariants(trace: DATrace, tol=1e-12) -> TraceReport:
    """Monotonicity and bookkeeping invariants of a stored trace.

    Checks: ``mu_A`` weakly decreasing and nonnegative, ``tau_P`` weakly
    increasing, ``tau_T`` weakly decreasing, ``0 <= mu_T <= mu_P <= mu_A``,
    ``mu_T[k-1] <= mu_P[k]`` and, for the subtractive rule, that the summed
    rejections telescope to ``mu_A[0] - mu_A[K]``.
    """
    checks, witness = {}, {}

    def record(name, k):
        checks[name] = k is None
        if k is not None:
            witness[name] = k

    K = trace.iterations
    record("mu_A_decreasing", _first_bad(trace.mu_A, lambda a, b: b > a + tol))
    neg = [k for k, a in enumerate(trace.mu_A) if np.any(a < -tol)]
    record("mu_A_nonnegative", neg[0] if neg else None)
    record("tau_P_increasing", _first_bad(trace.tau_P, lambda a, b: (b < a - tol) & ~(a == b)))
    record("tau_T_decreasing", _first_bad(trace.tau_T, lambda a, b: (b > a + tol) & ~(a == b)))
    order = None
    for k in range(K):
        P, T, A = trace.mu_P[k], trace.mu_T[k], trace.mu_A[k]
        if np.any(T < -tol) or np.any(T > P + tol) or np.any(P > A + tol):
            order = k
            break
    record("sandwich", order)
    lower = None
    for k in range(1, K):
        if np.any(trace.mu_T[k - 1] > trace.mu_P[k] + tol):
            lower = k
            break
    record("proposal_above_accepted", lower)
    if trace.options.update_rule == "subtractive" and K:
        total = np.sum([P - T for P, T in zip(trace.mu_P, trace.mu_T)], axis=0)
        gap = float(np.abs(total - (trace.mu_A[0] - trace.mu_A[K])).max(initial=0.0))
        checks["telescoping_gap"] = gap
        checks["telescoping"] = gap <= max(tol, 1e-12 * max(1, K))
        if not checks["telescoping"]:
            witness["telescoping"] = gap
    passed = all(v for key, v in checks.items() if isinstance(v, bool))
    return TraceReport(passed, checks, witness)
