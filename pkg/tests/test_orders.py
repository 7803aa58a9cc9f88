import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from matron_match import (GridFunction, ShapeError, check_eps_d_p_order, check_eps_d_q_order,
                          check_exchangeable, check_p_order, check_q_order_functions,
                          check_submodular, duality_check, legendre_transform)
from matron_match.orders import STRICT_EPS

AX5 = [np.linspace(-1, 1, 5)] * 2


def quad(A, axes=AX5):
    A = np.asarray(A, dtype=float)
    return GridFunction.from_callable(lambda q: 0.5 * q @ A @ q, axes, convex=True)


def singleton(axes, point):
    return GridFunction.indicator(axes, [point])


def test_submodular_examples():
    assert check_submodular(GridFunction.from_callable(lambda p: -p[0] * p[1], AX5)).passed
    rep = check_submodular(GridFunction.from_callable(lambda p: p[0] * p[1], AX5))
    assert not rep.passed and rep.worst_violation > 0 and "p" in rep.witness
    S = np.array([[2, -1], [-1, 2]]) / 3
    assert check_submodular(quad(S, [np.linspace(-2, 2, 9)] * 2)).passed


def test_p_order_singletons():
    ax = [np.array([0.0, 1.0])] * 2
    assert check_p_order(singleton(ax, (0, 0)), singleton(ax, (1, 1))).passed
    assert not check_p_order(singleton(ax, (1, 0)), singleton(ax, (0, 1))).passed


def test_p_order_reduces_to_submodular():
    f = GridFunction.from_callable(lambda p: -p[0] * p[1] + p[0] ** 2, AX5)
    assert check_p_order(f, f).worst_violation == check_submodular(f).worst_violation


def test_q_order_quadratics():
    assert check_q_order_functions(quad([[2, 1], [1, 2]]), quad([[2, 1], [1, 2]])).passed
    rep = check_exchangeable(quad([[2, -1], [-1, 2]]))
    assert not rep.passed
    assert set(rep.witness) == {"x", "y", "delta1"}
    ind = singleton(AX5, (0.5, -0.5))
    assert check_q_order_functions(ind, ind).passed


def test_q_order_singletons_is_coordinatewise():
    ax = [np.arange(4.0)] * 2
    for a, b in itertools.product(itertools.product(range(4), repeat=2), repeat=2):
        rep = check_q_order_functions(singleton(ax, a), singleton(ax, b))
        assert rep.passed == (a[0] <= b[0] and a[1] <= b[1])


def test_mismatched_axes():
    with pytest.raises(ShapeError):
        check_q_order_functions(quad(np.eye(2)), quad(np.eye(2), [np.linspace(-1, 1, 3)] * 2))


def test_budget_subsampling_reports_seed():
    f = quad([[2, 1], [1, 2]], [np.linspace(-1, 1, 7)] * 2)
    rep = check_q_order_functions(f, f, budget=100, seed=7, stop_at_first=False)
    assert not rep.exhaustive and rep.seed == 7 and rep.passed
    again = check_q_order_functions(f, f, budget=100, seed=7, stop_at_first=False)
    assert again.to_dict() == rep.to_dict()
    full = check_q_order_functions(f, f)
    assert full.exhaustive and full.seed is None


def test_eps_d_orders_examples():
    f = quad([[1, 0.8], [0.8, 3]])
    g = quad([[3, -0.9], [-0.9, 1]])
    assert check_eps_d_q_order(f, g, 1e9, (0, 1)).passed
    assert check_eps_d_p_order(f, g, 1e9, (0, 1)).passed
    # D empty: delta1 is zero and every comparison is x against itself
    assert check_eps_d_q_order(f, g, 1e-6, ()).passed
    assert check_eps_d_p_order(f, g, 1e-6, ()).passed
    c = quad([[2, 1], [1, 2]])
    assert check_eps_d_q_order(c, c, 1e-6, (0, 1)).passed
    cs = legendre_transform(c, [np.linspace(-4, 4, 9)] * 2, warn=False)
    assert check_eps_d_p_order(cs, cs, 1e-6, (0, 1)).passed


def test_eps_is_strict():
    # f <=_(eps,D),Q f with f constant: the excess is exactly 0, so eps=0 must fail
    f = GridFunction.from_callable(lambda q: 0.0, AX5)
    assert not check_eps_d_q_order(f, f, 0.0, (0, 1)).passed
    assert check_eps_d_q_order(f, f, 10 * STRICT_EPS, (0, 1)).passed


def test_duality_examples():
    dual = [np.linspace(-4, 4, 17)] * 2
    good = quad([[2, 1], [1, 2]])
    rep = duality_check(good, good, 1e-6, (0, 1), dual)
    assert rep.q_report.passed and rep.p_report.passed and rep.agree
    bad = quad([[2, -1], [-1, 2]])
    rep = duality_check(bad, bad, 1e-6, (0, 1), dual)
    assert not rep.q_report.passed and not rep.p_report.passed and rep.agree
    ind = singleton(AX5, (0.5, 0.0))
    rep = duality_check(ind, ind, 1e-6, (0, 1), dual)
    assert rep.agree and rep.q_report.passed
    assert set(rep.to_dict()) >= {"agree", "band", "q", "p"}


def brute_q(f, g, tol, D=None):
    """Pure-python reference for the (eps, D) Q check on a 2-D grid."""
    shape = f.shape
    D = set(range(2)) if D is None else set(D)
    worst = -np.inf
    fv, gv = f.values, g.values
    for x in itertools.product(*map(range, shape)):
        for y in itertools.product(*map(range, shape)):
            if not (np.isfinite(fv[x]) and np.isfinite(gv[y])):
                continue
            forced, free = [], []
            for i in range(2):
                v = x[i] - y[i]
                if i in D:
                    forced.append(range(0, v + 1) if v > 0 else range(0, 1))
                    free.append(range(v, 1) if v < 0 else range(0, 1))
                else:
                    forced.append(range(0, 1))
                    free.append(range(max(x[i] - shape[i] + 1, -y[i]), min(x[i], shape[i] - 1 - y[i]) + 1))
            for z1 in itertools.product(*forced):
                best = np.inf
                for z2 in itertools.product(*free):
                    z = [a + b for a, b in zip(z1, z2)]
                    a = tuple(x[i] - z[i] for i in range(2))
                    b = tuple(y[i] + z[i] for i in range(2))
                    best = min(best, fv[a] + gv[b] - fv[x] - gv[y])
                worst = max(worst, best)
    return worst


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([(), (0,), (1,), (0, 1)]))
def test_q_kernel_matches_reference(seed, D):
    rng = np.random.default_rng(seed)
    ax = [np.linspace(0, 1, 4)] * 2
    f = GridFunction(tuple(ax), rng.normal(size=(4, 4)))
    g = GridFunction(tuple(ax), rng.normal(size=(4, 4)))
    rep = check_eps_d_q_order(f, g, 0.1, D)
    assert rep.worst_violation == pytest.approx(brute_q(f, g, 0.1, D), abs=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_p_kernel_matches_reference(seed):
    rng = np.random.default_rng(seed)
    ax = [np.linspace(0, 1, 3)] * 2
    f = GridFunction(tuple(ax), rng.normal(size=(3, 3)))
    g = GridFunction(tuple(ax), rng.normal(size=(3, 3)))
    worst = -np.inf
    for a in itertools.product(range(3), repeat=2):
        for b in itertools.product(range(3), repeat=2):
            lo = tuple(map(min, a, b))
            hi = tuple(map(max, a, b))
            worst = max(worst, f.values[lo] + g.values[hi] - f.values[a] - g.values[b])
    assert check_p_order(f, g).worst_violation == pytest.approx(worst, abs=1e-12)


def test_report_serialization():
    rep = check_submodular(GridFunction.from_callable(lambda p: p[0] * p[1], AX5))
    d = rep.to_dict()
    assert set(d) >= {"pass", "worst_violation", "witness", "pairs_checked", "seed"}
    assert "FAIL" in rep.summary()
