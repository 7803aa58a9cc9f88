"""Finite point sets and set-function pairs: Q-order, matron, M-natural, paramodularity.

Point-set checks run on an integer lattice: every point is mapped to integer
coordinates ``round((p - origin) / step)``, exchange vectors are enumerated
on that lattice and membership is an exact key lookup.
"""

from __future__ import annotations

import itertools

import numpy as np

from .errors import ContractError, DomainError, ShapeError
from .report import OrderReport

MEMBER_TOL = 1e-9
MAX_SET_BITS = 16
PAIR_BUDGET = 1_000_000


class PointSet:
    """A finite set of points in R^d with tolerance-based membership."""

    def __init__(self, points, tol=MEMBER_TOL):
        pts = np.asarray(points, dtype=float)
        if pts.size == 0:
            pts = pts.reshape(0, pts.shape[-1] if pts.ndim == 2 else 0)
        pts = np.atleast_2d(pts)
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        self.points = pts
        self.tol = float(tol)
        self.points.setflags(write=False)
        if len(self) > 1:
            keys = np.round(pts / max(tol, 1e-300)).astype(np.int64) if tol > 0 else pts
            if np.unique(keys, axis=0).shape[0] != len(self):
                raise ValueError("duplicate points within tolerance")

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    def __contains__(self, p):
        if len(self) == 0:
            return False
        p = np.asarray(p, dtype=float).ravel()
        return bool(np.any(np.all(np.abs(self.points - p) <= self.tol, axis=1)))

    def __iter__(self):
        return iter(self.points)

    def to_list(self):
        return self.points.tolist()

    @classmethod
    def box(cls, lo, hi, step):
        """Lattice points of the box ``[lo, hi]`` with spacing ``step``."""
        axes = [np.arange(a, b + step / 2, step) for a, b in zip(lo, hi)]
        return cls(np.array(list(itertools.product(*axes)), dtype=float))


def _nonempty(*sets):
    for s in sets:
        if len(s) == 0:
            raise DomainError("point set is empty")
    if len({s.dim for s in sets}) != 1:
        raise ShapeError("point sets have different dimensions")


def _infer_step(points, tol):
    """Per-axis step: smallest positive gap between distinct coordinates (1 if none)."""
    out = []
    for col in points.T:
        u = np.unique(col)
        gaps = np.diff(u)
        gaps = gaps[gaps > tol]
        out.append(float(gaps.min()) if gaps.size else 1.0)
    return np.array(out)


class _Lattice:
    """Integer coordinates of several point sets on a shared lattice."""

    def __init__(self, sets, step, tol):
        allpts = np.vstack([s.points for s in sets])
        d = allpts.shape[1]
        self.step = (_infer_step(allpts, tol) if step is None
                     else np.broadcast_to(np.asarray(step, dtype=float), (d,)).copy())
        if np.any(self.step <= 0):
            raise ValueError("step must be positive")
        self.origin = allpts.min(axis=0)
        self.ints = []
        for s in sets:
            raw = (s.points - self.origin) / self.step
            k = np.round(raw)
            if np.any(np.abs(raw - k) * self.step > s.tol):
                raise DomainError("points do not lie on the requested lattice")
            self.ints.append(k.astype(np.int64))
        span = np.vstack(self.ints)
        # keys leave room for exchanges that step outside the bounding box
        self.lo = span.min(axis=0) - (span.max(axis=0) - span.min(axis=0)) - 1
        width = 3 * (span.max(axis=0) - span.min(axis=0)) + 3
        self.strides = np.array([int(np.prod(width[i + 1:])) for i in range(d)], dtype=np.int64)
        self.keys = [np.sort(self.key(k)) for k in self.ints]

    def key(self, k):
        return (np.asarray(k) - self.lo) @ self.strides

    def member(self, which, k):
        keys = self.keys[which]
        q = self.key(k)
        pos = np.clip(np.searchsorted(keys, q), 0, keys.size - 1)
        return keys[pos] == q

    def point(self, k):
        return (self.origin + np.asarray(k) * self.step).tolist()


def _box_lattice(lo, hi):
    return np.array(list(itertools.product(*[range(a, b + 1) for a, b in zip(lo, hi)])),
                    dtype=np.int64).reshape(-1, len(lo))


def check_q_order_sets(X: PointSet, Y: PointSet, tol=MEMBER_TOL, step=None, name="q_order_sets"):
    """``X <=_Q Y``: every lattice delta1 in ``[0,(x-y)+]`` has a lattice delta2 in
    ``[0,(x-y)-]`` with ``x - delta1 + delta2`` in X and ``y + delta1 - delta2`` in Y.

    ``step`` sets the lattice spacing (scalar or per axis); by default it is the
    smallest coordinate gap found in the two sets.
    """
    _nonempty(X, Y)
    lat = _Lattice([X, Y], step, tol)
    KX, KY = lat.ints
    checked = 0
    worst = 0.0
    for a in KX:
        for b in KY:
            v = a - b
            pos, neg = np.maximum(v, 0), np.maximum(-v, 0)
            d1 = _box_lattice(np.zeros_like(pos), pos)
            d2 = _box_lattice(np.zeros_like(neg), neg)
            z = d1[:, None, :] - d2[None, :, :]
            ok = lat.member(0, a - z) & lat.member(1, b + z)
            good = ok.any(axis=1)
            checked += d1.shape[0]
            if not good.all():
                bad = d1[int(np.argmin(good))]
                return OrderReport(False, 1.0, {"x": lat.point(a), "y": lat.point(b),
                                                "delta1": (bad * lat.step).tolist()},
                                   checked, None, True, name)
    return OrderReport(True, worst, {}, checked, None, True, name)


def check_matron(X: PointSet, tol=MEMBER_TOL, step=None):
    """``X <=_Q X``."""
    return check_q_order_sets(X, X, tol, step, name="matron")


def check_m_natural(X: PointSet, step=None, tol=MEMBER_TOL, max_multiple=1):
    """Exchange along ``e_i - e_j`` (``e_0 = 0``) for every ``i`` in supp+(x - y).

    For each pair and each such ``i`` some ``alpha = k * step`` with
    ``1 <= k <= max_multiple`` and ``j`` in supp-(x - y) or 0 must give
    ``x - alpha(e_i - e_j)`` and ``y + alpha(e_i - e_j)`` in X.  The default
    ``max_multiple=1`` is the unit exchange of discrete M-natural sets; larger
    multiples let sets with holes pass.
    """
    _nonempty(X)
    lat = _Lattice([X], step, tol)
    K = lat.ints[0]
    d = K.shape[1]
    eye = np.eye(d, dtype=np.int64)
    checked = 0
    for a in K:
        for b in K:
            v = a - b
            js = [None] + [int(j) for j in np.flatnonzero(v < 0)]
            for i in np.flatnonzero(v > 0):
                checked += 1
                dirs = np.array([eye[i] - (eye[j] if j is not None else 0) for j in js])
                top = min(int(max_multiple), int(v[i]))
                found = False
                for k in range(1, top + 1):
                    z = k * dirs
                    if np.any(lat.member(0, a - z) & lat.member(0, b + z)):
                        found = True
                        break
                if not found:
                    return OrderReport(False, 1.0, {"x": lat.point(a), "y": lat.point(b),
                                                    "i": int(i)}, checked, None, True, "m_natural")
    return OrderReport(True, 0.0, {}, checked, None, True, "m_natural")


def support_function(X: PointSet, d) -> float:
    """``max_{x in X} x . d``."""
    if len(X) == 0:
        raise DomainError("support function of the empty set")
    d = np.asarray(d, dtype=float).ravel()
    if d.size != X.dim:
        raise ShapeError("direction dimension does not match the set")
    return float((X.points @ d).max())


class SetFunctionPair:
    """Two set functions on subsets of {0..n-1}, stored as tables indexed by bitmask."""

    def __init__(self, g, h, n=None):
        g = np.asarray(g, dtype=float).ravel()
        h = np.asarray(h, dtype=float).ravel()
        if g.size != h.size:
            raise ShapeError("tables differ in size")
        bits = int(round(np.log2(g.size))) if g.size else -1
        if g.size == 0 or 2 ** bits != g.size or (n is not None and n != bits):
            raise ShapeError("tables must have 2^n entries")
        if bits > MAX_SET_BITS:
            raise ShapeError(f"ground sets are limited to n <= {MAX_SET_BITS}")
        self.n = bits
        self.g = g
        self.h = h

    @classmethod
    def from_callables(cls, g, h, n):
        """Tables from functions of a frozenset of indices."""
        subsets = [frozenset(i for i in range(n) if mask >> i & 1) for mask in range(2 ** n)]
        return cls([g(s) for s in subsets], [h(s) for s in subsets], n)


def _local_defect(t, n):
    """Worst ``t(S+i+j) + t(S) - t(S+i) - t(S+j)`` (positive means not submodular)."""
    worst, wit = -np.inf, None
    masks = np.arange(2 ** n)
    for i in range(n):
        for j in range(i + 1, n):
            S = masks[((masks >> i) & 1 == 0) & ((masks >> j) & 1 == 0)]
            ex = t[S | 1 << i | 1 << j] + t[S] - t[S | 1 << i] - t[S | 1 << j]
            k = int(np.argmax(ex))
            if ex[k] > worst:
                worst, wit = float(ex[k]), (int(S[k]), i, j)
    return worst, wit


def _members(mask, n):
    return [i for i in range(n) if mask >> i & 1]


def check_paramodular(pair: SetFunctionPair, tol=1e-9, budget=PAIR_BUDGET, seed=0):
    """``h(A) - g(B) >= h(A minus B) - g(B minus A)`` for all subsets A, B.

    Pre-checks that ``h`` is submodular and ``g`` supermodular (local
    exchange form); a failure there is reported with ``stage`` in the
    witness.  Only 0/1 test vectors are covered.
    """
    if abs(pair.g[0]) > tol or abs(pair.h[0]) > tol:
        raise ContractError("set functions must vanish on the empty set")
    n = pair.n
    for label, table in (("h_submodular", pair.h), ("g_supermodular", -pair.g)):
        worst, wit = _local_defect(table, n)
        if worst > tol:
            S, i, j = wit
            return OrderReport(False, worst, {"stage": label, "S": _members(S, n), "i": i, "j": j},
                               0, None, True, "paramodular")
    size = 2 ** n
    total = size * size
    exhaustive = total <= budget
    if exhaustive:
        A = np.repeat(np.arange(size), size)
        B = np.tile(np.arange(size), size)
        used = None
    else:
        rng = np.random.default_rng(seed)
        A = rng.integers(0, size, budget)
        B = rng.integers(0, size, budget)
        used = seed
    excess = (pair.h[A & ~B] - pair.g[B & ~A]) - (pair.h[A] - pair.g[B])
    k = int(np.argmax(excess))
    worst = float(excess[k])
    passed = worst <= tol
    witness = {} if passed else {"stage": "compatibility", "A": _members(int(A[k]), n),
                                 "B": _members(int(B[k]), n)}
    return OrderReport(passed, worst, witness, int(A.size), used, exhaustive, "paramodular")
