"""P-order, Q-order and their (eps, D) variants on lattice-sampled functions.

Every check visits pairs of lattice nodes exhaustively while the number of
(pair, exchange-vector) combinations stays under ``budget``; above it a
uniform random subset of pairs is drawn from ``seed`` and the report says so.
Exchange vectors live on the grid's own lattice, so moved points are always
nodes.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ShapeError
from .grid import GridFunction, legendre_transform
from .report import OrderReport

DEFAULT_BUDGET = 1_000_000
DEFAULT_SEED = 0
STRICT_EPS = 1e-15


def set_threads_from_env():
    """Honour ``MATRON_MATCH_THREADS`` for the parallel kernels."""
    raw = os.environ.get("MATRON_MATCH_THREADS")
    if raw:
        import numba

        numba.set_num_threads(max(1, min(int(raw), numba.config.NUMBA_NUM_THREADS)))


def _strides(shape):
    return np.array([int(np.prod(shape[i + 1:])) for i in range(len(shape))], dtype=np.int64)


def _d_mask(D, d):
    mask = np.zeros(d, dtype=np.bool_)
    for i in (range(d) if D is None else D):
        if not 0 <= int(i) < d:
            raise ShapeError(f"coordinate {i} outside 0..{d - 1}")
        mask[int(i)] = True
    return mask


def _require_same_axes(f, g):
    if not f.same_axes(g):
        raise ShapeError("both functions must live on the same lattice")
    f.steps  # raises on uneven axes


def _all_pairs(dom_f, dom_g):
    return np.repeat(dom_f, dom_g.size), np.tile(dom_g, dom_f.size)


def _sample_pairs(dom_f, dom_g, k, rng):
    return rng.choice(dom_f, size=k), rng.choice(dom_g, size=k)


def _node(f, flat_idx):
    idx = np.unravel_index(int(flat_idx), f.shape)
    return [float(a[i]) for a, i in zip(f.axes, idx)]


def _q_order(f, g, slack, D, budget, seed, stop_at_first, name):
    _require_same_axes(f, g)
    shape = np.array(f.shape, dtype=np.int64)
    strides = _strides(f.shape)
    in_D = _d_mask(D, f.ndim)
    dom_f, dom_g = f.domain(), g.domain()
    total = _kernels.q_count(dom_f, dom_g, shape, strides, in_D)
    exhaustive = total <= budget
    used_seed = None
    if exhaustive:
        xs, ys = _all_pairs(dom_f, dom_g)
    else:
        used_seed = seed
        k = max(1, int(dom_f.size * dom_g.size * budget / total))
        xs, ys = _sample_pairs(dom_f, dom_g, k, np.random.default_rng(seed))
    worst, t, z, combos = _kernels.q_scan(f.flat(), g.flat(), xs, ys, shape, strides, in_D,
                                          float(slack), bool(stop_at_first))
    passed = bool(worst <= slack)
    witness = {}
    if t >= 0 and not passed:
        h = f.steps
        witness = {"x": _node(f, xs[t]), "y": _node(g, ys[t]),
                   "delta1": [float(zi * hi) for zi, hi in zip(z, h)]}
    return OrderReport(passed, float(worst), witness, int(combos), used_seed, exhaustive, name)


def _p_pairs(dom_f, dom_g, shape, in_D):
    """All (a, b) in dom_f x dom_g whose coordinates agree outside D."""
    if in_D.all():
        return _all_pairs(dom_f, dom_g)
    strides = _strides(shape)
    keep = np.where(in_D, 0, 1)

    def key(dom):
        idx = np.stack(np.unravel_index(dom, shape), axis=1)
        return (idx * keep) @ strides

    kf, kg = key(dom_f), key(dom_g)
    order = np.argsort(kg, kind="stable")
    kg_sorted = kg[order]
    lo = np.searchsorted(kg_sorted, kf, side="left")
    hi = np.searchsorted(kg_sorted, kf, side="right")
    counts = hi - lo
    xs = np.repeat(dom_f, counts)
    ys = np.concatenate([dom_g[order[a:b]] for a, b in zip(lo, hi)]) if xs.size else xs
    return xs, ys


def _p_order(f, g, slack, D, budget, seed, name):
    _require_same_axes(f, g)
    shape = np.array(f.shape, dtype=np.int64)
    in_D = _d_mask(D, f.ndim)
    xs, ys = _p_pairs(f.domain(), g.domain(), f.shape, in_D)
    exhaustive = xs.size <= budget
    used_seed = None
    if not exhaustive:
        used_seed = seed
        pick = np.random.default_rng(seed).choice(xs.size, size=budget, replace=False)
        xs, ys = xs[pick], ys[pick]
    if xs.size == 0:
        return OrderReport(True, -np.inf, {}, 0, used_seed, exhaustive, name)
    excess = _kernels.p_scan(f.flat(), g.flat(), xs, ys, shape, _strides(f.shape), in_D)
    t = int(np.argmax(excess))
    worst = float(excess[t])
    passed = bool(worst <= slack)
    witness = {} if passed else {"p": _node(f, xs[t]), "p_prime": _node(g, ys[t])}
    return OrderReport(passed, worst, witness, int(xs.size), used_seed, exhaustive, name)


def check_submodular(f: GridFunction, tol=1e-9, budget=DEFAULT_BUDGET, seed=DEFAULT_SEED):
    """``f(p ^ p') + f(p v p') <= f(p) + f(p') + tol`` over all pairs in dom f."""
    return _p_order(f, f, tol, None, budget, seed, "submodular")


def check_p_order(f: GridFunction, g: GridFunction, tol=1e-9, budget=DEFAULT_BUDGET,
                  seed=DEFAULT_SEED):
    """``f <=_P g``: ``f(p ^ p') + g(p v p') <= f(p) + g(p') + tol``."""
    return _p_order(f, g, tol, None, budget, seed, "p_order")


def check_q_order_functions(f: GridFunction, g: GridFunction, tol=1e-9, budget=DEFAULT_BUDGET,
                            seed=DEFAULT_SEED, stop_at_first=True):
    """``f <=_Q g`` via the exchange characterization.

    For every ``q`` in dom f, ``q'`` in dom g and lattice ``delta1`` in
    ``[0, (q - q')+]`` some lattice ``delta2`` in ``[0, (q - q')-]`` must give
    ``f(q - delta1 + delta2) + g(q' + delta1 - delta2) <= f(q) + g(q') + tol``.
    With ``stop_at_first`` the scan ends at the first failing triple, which
    becomes the witness.
    """
    return _q_order(f, g, tol, None, budget, seed, stop_at_first, "q_order")


def check_exchangeable(c: GridFunction, tol=1e-9, budget=DEFAULT_BUDGET, seed=DEFAULT_SEED,
                       stop_at_first=True):
    """``c <=_Q c``: the exchange inequality of ``c`` with itself."""
    return _q_order(c, c, tol, None, budget, seed, stop_at_first, "exchangeable")


def check_eps_d_q_order(f: GridFunction, g: GridFunction, eps, D, budget=DEFAULT_BUDGET,
                        seed=DEFAULT_SEED, stop_at_first=False):
    """(eps, D) Q-order: delta1 supported on D, delta2 free off D, strict slack eps."""
    return _q_order(f, g, eps - STRICT_EPS, tuple(D), budget, seed, stop_at_first,
                    "eps_d_q_order")


def check_eps_d_p_order(f: GridFunction, g: GridFunction, eps, D, budget=DEFAULT_BUDGET,
                        seed=DEFAULT_SEED):
    """(eps, D) P-order over node pairs ``lambda + d_f``, ``lambda + d_g`` with d_f, d_g on D."""
    return _p_order(f, g, eps - STRICT_EPS, tuple(D), budget, seed, "eps_d_p_order")


@dataclass
class DualityReport:
    q_report: OrderReport
    p_report: OrderReport
    band: float
    eps: float

    @property
    def agree(self) -> bool:
        return self.q_report.passed == self.p_report.passed

    @property
    def within_band(self) -> bool:
        """Disagreement is tolerated only when a worst excess sits within ``band`` of eps."""
        if self.agree:
            return True
        return any(abs(r.worst_violation - self.eps) <= self.band
                   for r in (self.q_report, self.p_report))

    def to_dict(self):
        return {"agree": self.agree, "within_band": self.within_band, "band": self.band,
                "eps": self.eps, "q": self.q_report.to_dict(), "p": self.p_report.to_dict()}


def duality_check(f: GridFunction, g: GridFunction, eps, D, dual_axes, budget=DEFAULT_BUDGET,
                  seed=DEFAULT_SEED):
    """Evaluate both sides of ``f <=_(eps,D),Q g  <=>  g* <=_(eps,D),P f*``.

    Conjugates are computed on ``dual_axes``; ``band`` is twice the larger of
    their reported discretization error bounds.
    """
    q = check_eps_d_q_order(f, g, eps, D, budget=budget, seed=seed)
    fstar = legendre_transform(f, dual_axes, warn=False)
    gstar = legendre_transform(g, dual_axes, warn=False)
    p = check_eps_d_p_order(gstar, fstar, eps, D, budget=budget, seed=seed)
    band = 2.0 * max(fstar.error_bound, gstar.error_bound)
    return DualityReport(q, p, band, float(eps))
