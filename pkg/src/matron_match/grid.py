"""Convex functions sampled on rectangular lattices, and their conjugates."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError

CHUNK = 2_000_000


class GridSaturationWarning(UserWarning):
    """A conjugate grid does not enclose the subgradients of the primal function."""


@dataclass(frozen=True)
class GridFunction:
    """A function sampled on the product of ``axes``; ``+inf`` outside its domain.

    ``error_bound`` and ``saturated`` are only set on functions produced by
    :func:`legendre_transform`.
    """

    axes: tuple
    values: np.ndarray
    convex: bool = False
    error_bound: float = 0.0
    saturated: bool = False

    def __post_init__(self):
        axes = tuple(np.array(a, dtype=float).ravel() for a in self.axes)
        if not axes:
            raise ShapeError("a grid function needs at least one axis")
        for a in axes:
            if a.size < 2 or np.any(np.diff(a) <= 0):
                raise ShapeError("axes need at least 2 strictly increasing samples")
        values = np.array(self.values, dtype=float)
        shape = tuple(a.size for a in axes)
        if values.shape != shape:
            values = values.reshape(shape) if values.size == np.prod(shape) else None
            if values is None:
                raise ShapeError(f"values do not match axes shape {shape}")
        if np.any(np.isnan(values)) or np.any(values == -np.inf):
            raise ValueError("values must be real or +inf")
        if not np.any(np.isfinite(values)):
            raise DomainError("grid function is +inf everywhere")
        for a in axes:
            a.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", values)
        if self.convex:
            bad = lattice_convexity_defect(self)
            if bad is not None:
                raise ValueError(f"function flagged convex fails the midpoint test at node {bad}")

    @classmethod
    def from_callable(cls, fn, axes, convex=False):
        """Sample ``fn(point)`` (point is a 1-D array) at every lattice node."""
        axes = [np.asarray(a, dtype=float) for a in axes]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        vals = np.array([fn(p) for p in pts], dtype=float)
        return cls(tuple(axes), vals.reshape(mesh[0].shape), convex=convex)

    @classmethod
    def indicator(cls, axes, members):
        """``0`` on lattice nodes listed in ``members`` (points), ``+inf`` elsewhere."""
        axes = tuple(np.asarray(a, dtype=float) for a in axes)
        vals = np.full(tuple(a.size for a in axes), np.inf)
        for pt in np.atleast_2d(np.asarray(members, dtype=float)):
            idx = []
            for a, c in zip(axes, pt):
                j = int(np.argmin(np.abs(a - c)))
                if abs(a[j] - c) > 1e-9 * max(1.0, abs(c)):
                    raise DomainError(f"point {pt} is not a lattice node")
                idx.append(j)
            vals[tuple(idx)] = 0.0
        return cls(axes, vals)

    @property
    def ndim(self):
        return len(self.axes)

    @property
    def shape(self):
        return self.values.shape

    @property
    def steps(self):
        """Uniform step per axis; raises if an axis is not evenly spaced."""
        out = []
        for a in self.axes:
            d = np.diff(a)
            if not np.allclose(d, d[0], rtol=1e-9, atol=1e-12):
                raise ShapeError("lattice checks need evenly spaced axes")
            out.append(float(d[0]))
        return np.array(out)

    def points(self):
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def flat(self):
        return np.ascontiguousarray(self.values).ravel()

    def domain(self):
        """Flat indices of nodes with a finite value."""
        return np.flatnonzero(np.isfinite(self.flat()))

    def node_index(self, point, tol=1e-9):
        """Multi-index of the lattice node at ``point``, or None."""
        point = np.asarray(point, dtype=float).ravel()
        if point.size != self.ndim:
            raise ShapeError("point dimension does not match the grid")
        idx = []
        for a, c in zip(self.axes, point):
            j = int(np.argmin(np.abs(a - c)))
            if abs(a[j] - c) > tol * max(1.0, abs(c)):
                return None
            idx.append(j)
        return tuple(idx)

    def __call__(self, point):
        idx = self.node_index(point)
        return np.inf if idx is None else float(self.values[idx])

    def same_axes(self, other) -> bool:
        return self.ndim == other.ndim and all(
            a.shape == b.shape and np.allclose(a, b, rtol=0, atol=1e-12)
            for a, b in zip(self.axes, other.axes))

    def to_dict(self):
        return {"axes": [a.tolist() for a in self.axes],
                "values": ["inf" if not np.isfinite(v) else float(v) for v in self.flat()],
                "convex": bool(self.convex),
                "error_bound": float(self.error_bound),
                "saturated": bool(self.saturated)}

    @classmethod
    def from_dict(cls, doc):
        axes = [np.asarray(a, dtype=float) for a in doc["axes"]]
        vals = np.array([np.inf if v is None or v == "inf" else float(v) for v in doc["values"]])
        return cls(tuple(axes), vals.reshape(tuple(a.size for a in axes)),
                   convex=bool(doc.get("convex", False)))


def lattice_convexity_defect(f: GridFunction, tol=1e-9):
    """First node violating the axis-aligned midpoint test, or None.

    Also rejects domains with a gap along an axis (finite, +inf, finite).
    """
    v = f.values
    for ax in range(f.ndim):
        if v.shape[ax] < 3:
            continue
        lo = np.take(v, np.arange(0, v.shape[ax] - 2), axis=ax)
        mid = np.take(v, np.arange(1, v.shape[ax] - 1), axis=ax)
        hi = np.take(v, np.arange(2, v.shape[ax]), axis=ax)
        both = np.isfinite(lo) & np.isfinite(hi)
        with np.errstate(invalid="ignore"):
            excess = np.where(both, mid - (lo + hi) / 2, -np.inf)
        scale = tol * np.maximum(1.0, np.abs(np.where(both, lo + hi, 0.0)))
        bad = excess > scale
        if np.any(bad):
            idx = list(np.unravel_index(int(np.argmax(bad)), bad.shape))
            idx[ax] += 1
            return tuple(int(i) for i in idx)
    return None


def _lipschitz(f: GridFunction):
    out = []
    for ax, a in enumerate(f.axes):
        with np.errstate(invalid="ignore"):
            d = np.diff(f.values, axis=ax)
        h = np.diff(a).reshape([-1 if i == ax else 1 for i in range(f.ndim)])
        with np.errstate(invalid="ignore"):
            slope = np.abs(d / h)
        slope = slope[np.isfinite(slope)]
        out.append(float(slope.max(initial=0.0)))
    return np.array(out)


def _max_affine(P, S, c):
    """max_j P[i] . S[j] - c[j] for each row of P, chunked."""
    out = np.empty(P.shape[0])
    arg = np.empty(P.shape[0], dtype=np.int64)
    rows = max(1, CHUNK // max(1, S.shape[0]))
    for start in range(0, P.shape[0], rows):
        block = P[start:start + rows] @ S.T - c
        arg[start:start + rows] = np.argmax(block, axis=1)
        out[start:start + rows] = block[np.arange(block.shape[0]), arg[start:start + rows]]
    return out, arg


def legendre_transform(f: GridFunction, dual_axes, warn=True) -> GridFunction:
    """Sampled conjugate ``f*(p) = max_s p.s - f(s)`` on the dual lattice.

    The result carries ``error_bound``, a bound on the gap between the sampled
    and the continuous supremum, and ``saturated``, set when some primal node
    has its subgradients outside the dual box (a
    :class:`GridSaturationWarning` is issued unless ``warn`` is false).
    """
    dual_axes = tuple(np.asarray(a, dtype=float).ravel() for a in dual_axes)
    if len(dual_axes) != f.ndim:
        raise ShapeError("dual axes dimension does not match the function")
    dom = f.domain()
    if dom.size == 0:
        raise DomainError("empty effective domain")
    S = f.points()[dom]
    c = f.flat()[dom]
    mesh = np.meshgrid(*dual_axes, indexing="ij")
    P = np.stack([m.ravel() for m in mesh], axis=1)
    vals, _ = _max_affine(P, S, c)

    hs = np.array([np.diff(a).max() for a in f.axes])
    pmax = np.array([np.abs(a).max() for a in dual_axes])
    err = float(np.sum(hs / 2 * (pmax + _lipschitz(f))))

    saturated = _saturation(S, c, P, vals, dual_axes)
    if saturated and warn:
        warnings.warn("dual grid does not enclose the subgradient range; conjugate is truncated",
                      GridSaturationWarning, stacklevel=2)
    return GridFunction(dual_axes, vals.reshape(mesh[0].shape), error_bound=err,
                        saturated=saturated)


def _saturation(S, c, P, fstar, dual_axes, tol=1e-9):
    """True if some primal node attains its biconjugate only on the dual boundary."""
    interior = np.ones(P.shape[0], dtype=bool)
    for i, a in enumerate(dual_axes):
        interior &= (P[:, i] > a[0]) & (P[:, i] < a[-1])
    if not interior.any():
        return True
    full, _ = _max_affine(S, P, fstar)
    inner, _ = _max_affine(S, P[interior], fstar[interior])
    return bool(np.any(inner < full - tol * np.maximum(1.0, np.abs(full))))


def default_dual_axes(f: GridFunction, num=201, pad=0.5):
    """Symmetric dual axes enclosing the finite-difference slopes of ``f``."""
    axes = []
    for ax, a in enumerate(f.axes):
        with np.errstate(invalid="ignore"):
            d = np.diff(f.values, axis=ax)
        h = np.diff(a).reshape([-1 if i == ax else 1 for i in range(f.ndim)])
        with np.errstate(invalid="ignore"):
            s = (d / h)[np.isfinite(d)]
        r = float(np.abs(s).max(initial=1.0)) * (1 + pad)
        axes.append(np.linspace(-r, r, num))
    return tuple(axes)


def subdifferential(f: GridFunction, s, tol=1e-9, dual_axes=None):
    """Dual lattice nodes ``p`` with ``f*(p) + f(s) - p.s <= tol``."""
    from .sets import PointSet

    fs = f(s)
    if not np.isfinite(fs):
        raise DomainError(f"f is +inf at {s}")
    if dual_axes is None:
        dual_axes = default_dual_axes(f)
    fstar = legendre_transform(f, dual_axes, warn=False)
    P = fstar.points()
    gap = fstar.flat() + fs - P @ np.asarray(s, dtype=float)
    return PointSet(P[gap <= tol])


def biconjugate_gap(f: GridFunction, dual_axes):
    """``f - f**`` on the primal nodes (nonnegative up to rounding)."""
    fstar = legendre_transform(f, dual_axes, warn=False)
    fss = legendre_transform(fstar, f.axes, warn=False)
    with np.errstate(invalid="ignore"):
        return f.values - fss.values
