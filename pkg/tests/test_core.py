import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from matron_match import (EquilibriumOutcome, MarketInstance, Matching, ShapeError,
                          classical_equilibrium_check, ext_dot, ext_mul, feasibility_residual,
                          uv_from_scalar)


def one_by_one(n=1.0, m=1.0, a=1.0, g=1.0):
    return MarketInstance.from_arrays([n], [m], [[a]], [[g]])


def test_ext_mul_zero_times_inf():
    assert ext_mul(0.0, np.inf) == 0.0
    assert ext_mul(np.inf, 0.0) == 0.0
    assert ext_mul(2.0, np.inf) == np.inf
    assert ext_dot([0.0, 1.0], [-np.inf, 3.0]) == 3.0


def test_instance_validation():
    with pytest.raises(ShapeError):
        MarketInstance.from_arrays([1, 1], [1], [[0]], [[0]])
    with pytest.raises(ValueError):
        MarketInstance.from_arrays([-1], [1], [[0]], [[0]])
    with pytest.raises(ValueError):
        MarketInstance.from_arrays([1], [1], [[np.nan]], [[0]])
    inst = one_by_one()
    assert inst.shape == (1, 1)
    assert inst.alpha_x0.tolist() == [0.0]
    with pytest.raises(ValueError):
        inst.alpha[0, 0] = 5.0


def test_feasibility_autarky():
    inst = MarketInstance.from_arrays([1.0, 2.0], [0.5], [[0], [0]], [[0], [0]])
    assert feasibility_residual(Matching.autarky(inst), inst) == 0.0


def test_feasibility_split_and_residual():
    inst = one_by_one()
    assert feasibility_residual(Matching([[0.5]], [0.5], [0.5]), inst) == 0.0
    assert feasibility_residual(Matching([[0.5]], [0.4], [0.5]), inst) == pytest.approx(0.1)


def test_feasibility_shape_error():
    inst = one_by_one()
    with pytest.raises(ShapeError):
        feasibility_residual(Matching(np.zeros((2, 1)), [1, 1], [1]), inst)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 10.0), st.integers(0, 10_000))
def test_feasibility_homogeneous(scale, seed):
    rng = np.random.default_rng(seed)
    n, m = rng.uniform(0.5, 2, 3), rng.uniform(0.5, 2, 2)
    mu = rng.uniform(0, 0.3, (3, 2))
    match = Matching(mu, rng.uniform(0, 1, 3), rng.uniform(0, 1, 2))
    inst = MarketInstance.from_arrays(n, m, np.zeros((3, 2)), np.zeros((3, 2)))
    scaled = Matching(mu * scale, match.mu_x0 * scale, match.mu_0y * scale)
    inst2 = MarketInstance.from_arrays(n * scale, m * scale, np.zeros((3, 2)), np.zeros((3, 2)))
    assert feasibility_residual(scaled, inst2) == pytest.approx(scale * feasibility_residual(match, inst), rel=1e-9, abs=1e-12)


def test_classical_autarky_blocking_free():
    inst = MarketInstance.from_arrays([1, 1], [1, 1], [[-1, 0.5], [0.2, -0.3]],
                                      [[2.0, -1], [-0.5, 1.0]])
    # each pair has alpha <= alpha_x0 = 0 or gamma <= gamma_0y = 0
    rep = classical_equilibrium_check(Matching.autarky(inst), [0, 0], [0, 0], inst)
    assert rep.passed, rep.to_dict()


def test_classical_one_by_one_pass_and_fail():
    inst = one_by_one()
    match = Matching([[1.0]], [0.0], [0.0])
    assert classical_equilibrium_check(match, [1.0], [1.0], inst).passed
    bad = classical_equilibrium_check(match, [2.0], [1.0], inst)
    assert not bad.passed
    assert bad.complementarity == pytest.approx(1.0)


def test_classical_reports_blocking_pair():
    inst = one_by_one()
    rep = classical_equilibrium_check(Matching.autarky(inst), [0.0], [0.0], inst)
    assert not rep.passed
    assert rep.blocking == pytest.approx(1.0)
    assert rep.witnesses["blocking_pair"] == [0, 0]


def test_uv_from_scalar_examples():
    U, V = uv_from_scalar(None, [1.0], [5.0, 5.0], [[0.5, 2.0]], [[1.0, 1.0]])
    assert U.tolist() == [[0.5, 1.0]]
    assert V.tolist() == [[1.0, 1.0]]
    alpha = np.array([[0.3, -0.2]])
    U, _ = uv_from_scalar(None, [1e300], [0, 0], alpha, alpha)
    assert np.array_equal(U, alpha)
    U, _ = uv_from_scalar(None, [0.3], [0, 0], [[0.3, 0.3]], alpha)
    assert np.array_equal(U, [[0.3, 0.3]])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_uv_round_trip_on_stable_outcomes(seed):
    # u, v chosen so that condition (ii) holds; the reduction must then give max{U-a, V-g} = 0
    rng = np.random.default_rng(seed)
    alpha, gamma = rng.uniform(-1, 1, (3, 4)), rng.uniform(-1, 1, (3, 4))
    u = rng.uniform(-1, 1, 3)
    v = np.max(np.where(u[:, None] >= alpha, -np.inf, gamma), axis=0)
    v = np.maximum(v, rng.uniform(-1, 1, 4))
    inst = MarketInstance.from_arrays(np.ones(3), np.ones(4), alpha, gamma, np.full(3, -5.0), np.full(4, -5.0))
    rep = classical_equilibrium_check(Matching.autarky(inst), u, v, inst)
    assert rep.blocking <= 1e-12
    U, V = uv_from_scalar(None, u, v, alpha, gamma)
    assert np.abs(np.maximum(U - alpha, V - gamma)).max() == 0.0


def test_outcome_no_blocking_residual():
    out = EquilibriumOutcome(Matching([[0.5]], [0.5], [0.5]), np.array([[-np.inf]]),
                             np.array([[0.0]]), np.array([[np.inf]]), np.array([[0.0]]))
    assert out.no_blocking_residual(np.array([[0.0]]), np.array([[0.0]])) == 0.0
