import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import brute_force_assignment
from sysdist.errors import InvalidArgument
from sysdist.sphere import chordal_distance, inverse_stereo
from sysdist.transport import (
    CostMatrix,
    CouplingPlan,
    EmpiricalMeasure,
    max_cost_coupling,
    min_cost_coupling,
    wasserstein_q,
)


def uniform(n):
    return EmpiricalMeasure(list(range(n)))


def test_weights_validated():
    with pytest.raises(InvalidArgument):
        EmpiricalMeasure([1, 2], [0.5, 0.6])
    with pytest.raises(InvalidArgument):
        EmpiricalMeasure([1, 2], [1.5, -0.5])
    with pytest.raises(InvalidArgument):
        EmpiricalMeasure([])
    assert EmpiricalMeasure([1, 2, 3]).is_uniform()


def test_cost_validated():
    with pytest.raises(InvalidArgument):
        CostMatrix([[1.0, -1.0]])
    with pytest.raises(InvalidArgument):
        CostMatrix([[np.inf]])
    with pytest.raises(InvalidArgument):
        min_cost_coupling(uniform(2), uniform(3), np.ones((2, 2)))


def test_plan_check():
    a = np.array([0.5, 0.5])
    CouplingPlan(np.eye(2) / 2).check(a, a)
    with pytest.raises(InvalidArgument):
        CouplingPlan(np.array([[0.5, 0.5], [0.0, 0.0]])).check(a, a)


def test_identical_measures_diagonal_plan():
    pts = [inverse_stereo(c) for c in (0, 1, 2j, -3)]
    mu = EmpiricalMeasure(pts)
    c = np.array([[chordal_distance(x, y) ** 2 for y in pts] for x in pts])
    plan, v = min_cost_coupling(mu, mu, c)
    assert v == 0 and np.allclose(plan.pi, np.eye(4) / 4)


def test_single_atoms():
    one = uniform(1)
    assert min_cost_coupling(one, one, [[0.7]])[1] == 0.7
    assert max_cost_coupling(one, one, [[0.7]])[1] == 0.7


def test_constant_cost():
    mu = EmpiricalMeasure([0, 1, 2], [0.2, 0.3, 0.5])
    nu = EmpiricalMeasure([0, 1], [0.6, 0.4])
    assert max_cost_coupling(mu, nu, np.full((3, 2), 0.4))[1] == pytest.approx(0.4, abs=1e-12)
    assert min_cost_coupling(mu, nu, np.full((3, 2), 0.4))[1] == pytest.approx(0.4, abs=1e-12)


def test_wasserstein_singletons():
    r1, r2 = inverse_stereo(0), inverse_stereo(0.3 / np.sqrt(1 - 0.09))  # chordal 0.3
    mu, nu = EmpiricalMeasure([r1]), EmpiricalMeasure([r2])
    assert wasserstein_q(mu, nu, chordal_distance, 2) == pytest.approx(0.09, abs=1e-12)
    with pytest.raises(InvalidArgument):
        wasserstein_q(mu, nu, chordal_distance, 0.5)


def test_weighted_lp_known_value():
    # moving mass 0.5 -> [0.25, 0.25] on a line, |x - y|
    mu = EmpiricalMeasure([0.0, 1.0], [0.5, 0.5])
    nu = EmpiricalMeasure([0.0, 0.5, 1.0], [0.25, 0.5, 0.25])
    c = np.abs(np.subtract.outer([0.0, 1.0], [0.0, 0.5, 1.0]))
    plan, v = min_cost_coupling(mu, nu, c)
    plan.check(mu.weights, nu.weights)
    assert v == pytest.approx(0.25, abs=1e-12)


def test_zero_weight_atoms_dropped():
    mu = EmpiricalMeasure([0, 1, 2], [0.5, 0.0, 0.5])
    nu = EmpiricalMeasure([0, 1], [0.5, 0.5])
    c = np.array([[0.0, 1.0], [0.0, 0.0], [1.0, 0.0]])
    plan, v = min_cost_coupling(mu, nu, c)
    assert v == 0 and not plan.pi[1].any()
    plan.check(mu.weights, nu.weights)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_brute_force_agreement(n):
    rng = np.random.default_rng(n)
    for _ in range(10):
        c = rng.uniform(size=(n, n))
        mu = uniform(n)
        assert min_cost_coupling(mu, mu, c)[1] == pytest.approx(brute_force_assignment(c), abs=1e-12)
        assert max_cost_coupling(mu, mu, c)[1] == pytest.approx(brute_force_assignment(c, True), abs=1e-12)


def test_wasserstein_on_sphere_matches_assignment():
    rng = np.random.default_rng(7)
    a = [inverse_stereo(c) for c in rng.standard_normal(5) + 1j * rng.standard_normal(5)]
    b = [inverse_stereo(c) for c in rng.standard_normal(5) + 1j * rng.standard_normal(5)]
    c = np.array([[chordal_distance(x, y) for y in b] for x in a])
    assert wasserstein_q(EmpiricalMeasure(a), EmpiricalMeasure(b), chordal_distance) == pytest.approx(
        brute_force_assignment(c), abs=1e-12
    )


def _weights(draw, n):
    w = np.array(draw(st.lists(st.floats(0.01, 1.0), min_size=n, max_size=n)))
    w = w / w.sum()
    w[-1] = 1.0 - w[:-1].sum()
    return w


@st.composite
def problems(draw):
    n1 = draw(st.integers(1, 5))
    n2 = draw(st.integers(1, 5))
    a, b = _weights(draw, n1), _weights(draw, n2)
    c = np.array(draw(st.lists(st.floats(0, 1), min_size=n1 * n2, max_size=n1 * n2))).reshape(n1, n2)
    return EmpiricalMeasure(list(range(n1)), a), EmpiricalMeasure(list(range(n2)), b), c


@given(problems())
def test_plans_are_couplings_and_values_bounded(p):
    mu, nu, c = p
    for solver in (min_cost_coupling, max_cost_coupling):
        plan, v = solver(mu, nu, c)
        plan.check(mu.weights, nu.weights)
        assert c.min() - 1e-12 <= v <= c.max() + 1e-12
        assert v == pytest.approx(float(np.sum(plan.pi * c)), abs=1e-12)
    assert min_cost_coupling(mu, nu, c)[1] <= max_cost_coupling(mu, nu, c)[1] + 1e-9


@given(problems())
def test_symmetry(p):
    mu, nu, c = p
    assert min_cost_coupling(mu, nu, c)[1] == pytest.approx(min_cost_coupling(nu, mu, c.T)[1], abs=1e-10)


@given(problems(), st.floats(1, 4), st.floats(0, 3))
def test_monotone_in_q(p, q, dq):
    mu, nu, c = p
    assert min_cost_coupling(mu, nu, c ** (q + dq))[1] <= min_cost_coupling(mu, nu, c**q)[1] + 1e-9
