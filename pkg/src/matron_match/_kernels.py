"""Compiled brute-force scans over lattice node pairs.

Grid functions are passed as flat C-ordered value arrays together with the
grid shape and strides; nodes are flat indices.  ``+inf`` marks nodes outside
the effective domain.
"""

import os

import numba
import numpy as np
from numba import njit, prange

# the default layer probes TBB first and warns when it is too old
if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER = "workqueue"

INF = np.inf


@njit(cache=True)
def _decode(idx, strides, out):
    rem = idx
    for i in range(strides.size):
        out[i] = rem // strides[i]
        rem = rem % strides[i]


@njit(cache=True)
def _exchange_ranges(xi, yi, shape, in_D, lo, hi, forced):
    """Index ranges of the exchange vector z = delta1 - delta2 per coordinate.

    forced[i] is True when z_i is universally quantified (the delta1 part).
    """
    d = shape.size
    for i in range(d):
        v = xi[i] - yi[i]
        if in_D[i]:
            if v > 0:
                lo[i] = 0
                hi[i] = v
                forced[i] = True
            elif v < 0:
                lo[i] = v
                hi[i] = 0
                forced[i] = False
            else:
                lo[i] = 0
                hi[i] = 0
                forced[i] = False
        else:
            # delta2 unrestricted outside D; keep both moved points on the grid
            lo[i] = max(xi[i] - (shape[i] - 1), -yi[i])
            hi[i] = min(xi[i], shape[i] - 1 - yi[i])
            forced[i] = False


@njit(cache=True)
def q_count(dom_f, dom_g, shape, strides, in_D):
    """Number of (pair, delta1) combinations over dom_f x dom_g."""
    d = shape.size
    xi = np.empty(d, np.int64)
    yi = np.empty(d, np.int64)
    total = 0
    for s in range(dom_f.size):
        _decode(dom_f[s], strides, xi)
        for t in range(dom_g.size):
            _decode(dom_g[t], strides, yi)
            c = 1
            for i in range(d):
                v = xi[i] - yi[i]
                if in_D[i] and v > 0:
                    c *= v + 1
            total += c
    return total


@njit(cache=True)
def q_scan(fv, gv, xs, ys, shape, strides, in_D, slack, stop_at_first):
    """Worst exchange excess over pairs (xs[t], ys[t]) and lattice delta1.

    For each pair and each delta1 the best delta2 is found by exhaustive
    search; the excess is f(x - z) + g(y + z) - f(x) - g(y).  Returns
    (worst, t_witness, z_witness, combos); when stop_at_first is set the scan
    ends at the first combination whose best excess exceeds ``slack``.
    """
    d = shape.size
    xi = np.empty(d, np.int64)
    yi = np.empty(d, np.int64)
    lo = np.empty(d, np.int64)
    hi = np.empty(d, np.int64)
    forced = np.empty(d, np.bool_)
    z = np.empty(d, np.int64)
    wz = np.zeros(d, np.int64)
    worst = -INF
    wt = -1
    combos = 0
    for t in range(xs.size):
        base = fv[xs[t]] + gv[ys[t]]
        _decode(xs[t], strides, xi)
        _decode(ys[t], strides, yi)
        _exchange_ranges(xi, yi, shape, in_D, lo, hi, forced)
        # outer counter over forced coordinates
        for i in range(d):
            if forced[i]:
                z[i] = lo[i]
        while True:
            combos += 1
            # inner counter over existential coordinates
            for i in range(d):
                if not forced[i]:
                    z[i] = lo[i]
            best = INF
            while True:
                ix = xs[t]
                iy = ys[t]
                for i in range(d):
                    ix -= z[i] * strides[i]
                    iy += z[i] * strides[i]
                val = fv[ix] + gv[iy] - base
                if val < best:
                    best = val
                k = d - 1
                while k >= 0:
                    if forced[k]:
                        k -= 1
                        continue
                    if z[k] < hi[k]:
                        z[k] += 1
                        break
                    z[k] = lo[k]
                    k -= 1
                if k < 0:
                    break
            if best > worst:
                worst = best
                wt = t
                # recover the forced part of the witness
                for i in range(d):
                    wz[i] = z[i] if forced[i] else 0
            if stop_at_first and best > slack:
                return worst, wt, wz, combos
            k = d - 1
            while k >= 0:
                if not forced[k]:
                    k -= 1
                    continue
                if z[k] < hi[k]:
                    z[k] += 1
                    break
                z[k] = lo[k]
                k -= 1
            if k < 0:
                break
    return worst, wt, wz, combos


@njit(cache=True, parallel=True)
def p_scan(fv, gv, xs, ys, shape, strides, in_D):
    """Excess f(a ^ b) + g(a v b) - f(a) - g(b) for pairs that agree off D.

    Pairs whose coordinates differ outside D are skipped (excess -inf).
    Returns the per-pair excess array.
    """
    d = shape.size
    out = np.empty(xs.size)
    for t in prange(xs.size):
        a = xs[t]
        b = ys[t]
        ra = a
        rb = b
        meet = 0
        join = 0
        ok = True
        for i in range(d):
            ai = ra // strides[i]
            bi = rb // strides[i]
            ra = ra % strides[i]
            rb = rb % strides[i]
            if not in_D[i] and ai != bi:
                ok = False
            meet += min(ai, bi) * strides[i]
            join += max(ai, bi) * strides[i]
        if ok:
            out[t] = fv[meet] + gv[join] - fv[a] - gv[b]
        else:
            out[t] = -INF
    return out
