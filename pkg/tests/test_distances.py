import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factories import random_ensemble_pair, random_family
from oracles import chordal_formula
from sysdist.distances import (
    BoundViolation,
    DistanceReport,
    FrequencyEnsemble,
    GapCache,
    comparison_check,
    freq_distance,
    freq_lower_bound,
    freq_upper_bound,
    frequency_ensemble_from_systems,
    nominal_distance,
    perturbed_frequency_ensemble,
    project_ensemble,
    support_distance_complex,
    support_distance_sphere,
    time_distance,
    time_lower_bound,
    time_upper_bound_diameter,
    time_upper_bound_moment,
)
from sysdist.errors import InvalidArgument
from sysdist.gap import gap_metric
from sysdist.lti_core import (
    AffineParametricFamily,
    FrequencyGrid,
    GaussianParameter,
    RationalTransferFunction,
    StateSpaceModel,
    sample_ensemble,
)

P1 = RationalTransferFunction([1.0], [1.0, 0.5])
P2 = RationalTransferFunction([1.0], [1.0, 0.9, 0.14])
GRID = FrequencyGrid.log(0.1, 1e3, 40)


def demo_pair(N=12, rho=0.05, grid=GRID, seed=1):
    return (
        perturbed_frequency_ensemble(P1, grid, N, rho, seed),
        perturbed_frequency_ensemble(P2, grid, N, rho, seed + 1),
    )


def means_lower_bound(fe1, fe2, q):
    # for uniform marginals every coupling gives E[dev1 + dev2] = mean(dev1) + mean(dev2)
    out = []
    for m in range(fe1.M):
        dbar = float(chordal_formula(fe1.nominal[m], fe2.nominal[m]))
        dev1 = chordal_formula(fe1.samples[m], fe1.nominal[m]).mean()
        dev2 = chordal_formula(fe2.samples[m], fe2.nominal[m]).mean()
        out.append(max(dbar - dev1 - dev2, 0.0) ** q)
    return max(out)


# --- frequency ensembles -------------------------------------------------


def test_frequency_ensemble_shape_checked():
    with pytest.raises(InvalidArgument):
        FrequencyEnsemble(GRID, np.zeros((3, 2)))
    with pytest.raises(InvalidArgument):
        FrequencyEnsemble(GRID, np.zeros((40, 2)), np.zeros(3))


def test_projection_examples():
    g = FrequencyGrid([1.0, 2.0])
    mu = project_ensemble(FrequencyEnsemble(g, np.full((2, 3), 2 - 1j)), 0)
    assert len({p.as_array().tobytes() for p in mu.atoms}) == 1
    mu = project_ensemble(FrequencyEnsemble(g, np.array([[0, 1], [0, 1]])), 1)
    assert mu.atoms[0].as_array() == pytest.approx([0, 0, 0]) and mu.atoms[1].as_array() == pytest.approx([0.5, 0, 0.5])
    assert np.allclose(mu.weights, 0.5)
    with pytest.raises(InvalidArgument):
        project_ensemble(FrequencyEnsemble(g, np.zeros((2, 1))), 2)


def test_projection_invariants_on_demo():
    fe, _ = demo_pair()
    for m in (0, 17, 39):
        mu = project_ensemble(fe, m)
        assert len(mu) == fe.N and mu.weights.sum() == pytest.approx(1.0, abs=1e-12)


# --- frequency-domain distance -------------------------------------------


def test_identical_ensembles_zero():
    fe, _ = demo_pair()
    r = freq_distance(fe, fe)
    assert r.value == 0 and r.lower_bound == 0 and freq_upper_bound(fe, fe) >= 0


def test_coincident_supports_zero_upper():
    g = FrequencyGrid([1.0, 2.0])
    fe = FrequencyEnsemble(g, np.full((2, 1), 0.5 + 0.5j), np.full(2, 0.5 + 0.5j))
    assert freq_upper_bound(fe, fe) == 0


@pytest.mark.parametrize("q", [1.0, 2.0])
def test_single_samples_are_pointwise_chordal(q):
    g = GRID.omegas
    a = FrequencyEnsemble(GRID, P1(1j * g), P1(1j * g))
    b = FrequencyEnsemble(GRID, P2(1j * g), P2(1j * g))
    expected = float(np.max(chordal_formula(P1(1j * g), P2(1j * g)))) ** q
    r = freq_distance(a, b, q)
    assert r.value == pytest.approx(expected, abs=1e-12)
    assert r.upper_bound == pytest.approx(expected, abs=1e-12)
    assert r.lower_bound == pytest.approx(expected, abs=1e-12)


def test_grid_mismatch_and_q():
    fe, _ = demo_pair()
    other = perturbed_frequency_ensemble(P2, FrequencyGrid.log(0.1, 1e3, 41), 12, 0.05, 3)
    with pytest.raises(InvalidArgument):
        freq_distance(fe, other)
    with pytest.raises(InvalidArgument):
        freq_distance(fe, fe, 0.5)


def test_per_frequency_rows():
    fe1, fe2 = demo_pair()
    r = freq_distance(fe1, fe2)
    assert len(r.per_frequency) == GRID.omegas.size
    assert [row[0] for row in r.per_frequency] == GRID.omegas.tolist()
    assert r.value == max(row[1] for row in r.per_frequency)
    assert r.argmax_omega == r.per_frequency[int(np.argmax([row[1] for row in r.per_frequency]))][0]


@pytest.mark.parametrize("q", [1.0, 1.5, 3.0])
def test_lower_bound_matches_means_oracle(q):
    fe1, fe2 = demo_pair(rho=0.02)
    assert freq_lower_bound(fe1, fe2, q) == pytest.approx(means_lower_bound(fe1, fe2, q), abs=1e-12)


def test_lower_bound_examples():
    g = GRID.omegas
    a = FrequencyEnsemble(GRID, np.repeat(P1(1j * g)[:, None], 3, axis=1), P1(1j * g))
    b = FrequencyEnsemble(GRID, np.repeat(P2(1j * g)[:, None], 4, axis=1), P2(1j * g))
    dmax = float(np.max(chordal_formula(P1(1j * g), P2(1j * g))))
    assert freq_lower_bound(a, b, 2.0) == pytest.approx(dmax**2, abs=1e-12)
    fe1, fe2 = demo_pair()
    same_nominal = FrequencyEnsemble(GRID, fe2.samples, fe1.nominal)
    assert freq_lower_bound(fe1, same_nominal) == 0
    with pytest.raises(InvalidArgument):
        freq_lower_bound(fe1, FrequencyEnsemble(GRID, fe2.samples))
    assert math.isnan(freq_distance(fe1, FrequencyEnsemble(GRID, fe2.samples)).lower_bound)


def test_support_distances():
    g = FrequencyGrid([1.0, 2.0])
    a = FrequencyEnsemble(g, np.zeros((2, 1)))
    b = FrequencyEnsemble(g, np.array([[3 + 4j], [0]]))
    assert support_distance_complex(a, b) == 5.0
    assert support_distance_sphere(a, a) == 0
    far = FrequencyEnsemble(g, np.full((2, 1), 1e8))
    assert support_distance_sphere(a, far) == pytest.approx(1.0, abs=1e-7)


def test_support_ordering_on_demo():
    fe1, fe2 = demo_pair(rho=0.3)
    assert support_distance_complex(fe1, fe2) >= support_distance_sphere(fe1, fe2)
    for q in (1.0, 2.0):
        assert freq_upper_bound(fe1, fe2, q) >= freq_distance(fe1, fe2, q).value


def test_grid_refinement_is_monotone():
    ens = random_ensemble_pair(3, 6)
    coarse = FrequencyGrid.log(0.01, 100, 30)
    fine = FrequencyGrid(np.union1d(coarse.omegas, np.logspace(-2.1, 2.1, 57)))
    d_c = freq_distance(*(frequency_ensemble_from_systems(e, coarse) for e in ens)).value
    d_f = freq_distance(*(frequency_ensemble_from_systems(e, fine) for e in ens)).value
    assert d_f >= d_c


def test_perturbation_determinism_and_zero_rho():
    a1, _ = demo_pair(seed=5)
    a2, _ = demo_pair(seed=5)
    assert a1.samples.tobytes() == a2.samples.tobytes()
    z1 = perturbed_frequency_ensemble(P1, GRID, 7, 0.0, 1)
    z2 = perturbed_frequency_ensemble(P2, GRID, 7, 0.0, 2)
    r = freq_distance(z1, z2)
    assert r.value == pytest.approx(r.lower_bound, abs=1e-12) and r.value == pytest.approx(r.upper_bound, abs=1e-12)


@settings(max_examples=20)
@given(st.integers(0, 10_000), st.floats(0.0, 0.5), st.sampled_from([1.0, 2.0]))
def test_freq_sandwich_symmetry_and_range(seed, rho, q):
    fe1 = perturbed_frequency_ensemble(P1, GRID, 6, rho, seed)
    fe2 = perturbed_frequency_ensemble(P2, GRID, 5, rho, seed + 1)
    r = freq_distance(fe1, fe2, q)  # the report checks its own sandwich
    assert 0 <= r.value <= 1
    assert r.lower_bound <= r.value + 1e-9 <= r.upper_bound + 2e-9
    s = freq_distance(fe2, fe1, q)
    assert s.value == pytest.approx(r.value, abs=1e-9)
    assert s.lower_bound == pytest.approx(r.lower_bound, abs=1e-9)
    assert s.upper_bound == pytest.approx(r.upper_bound, abs=1e-9)


def test_report_rejects_violated_sandwich():
    with pytest.raises(BoundViolation):
        DistanceReport(0.5, 0.6, 0.9, 1.0)
    with pytest.raises(BoundViolation):
        DistanceReport(0.5, 0.1, 0.4, 1.0)
    DistanceReport(0.5, math.nan, 0.9, 1.0)


# --- time-domain distance ------------------------------------------------


def single_model_ensemble(model, seed=0):
    fam = AffineParametricFamily(model, [(np.zeros((model.n, model.n)), np.zeros((model.n, 1)), np.zeros((1, model.n)))])
    return sample_ensemble(fam, GaussianParameter([0.0], [[0.0]]), 1, seed)


def test_time_distance_same_ensemble():
    e1, _ = random_ensemble_pair(4, 6)
    r = time_distance(e1, e1)
    assert r.value <= 2e-5


def test_time_distance_singletons():
    a = StateSpaceModel([[0.0, 1.0], [-2.0, -0.5]], [[0.0], [1.0]], [[1.0, 0.0]])
    b = StateSpaceModel([[-1.0]], [[1.0]], [[2.0]])
    e1, e2 = single_model_ensemble(a), single_model_ensemble(b)
    g = gap_metric(a, b).value
    for q in (1.0, 2.0):
        r = time_distance(e1, e2, q)
        assert r.value == pytest.approx(g**q, abs=1e-12)
        assert time_upper_bound_diameter(e1, e2, q) == pytest.approx(r.value, abs=1e-12)
        assert time_lower_bound(e1, e2, q) == pytest.approx(g**q, abs=1e-5)
    assert time_distance(e1, e1).value <= 1e-5


def test_zero_covariance_gives_nominal():
    rng = np.random.default_rng(8)
    fams = [random_family(rng, 2), random_family(rng, 2)]
    ens = [sample_ensemble(f, GaussianParameter(np.zeros(2), np.zeros((2, 2))), 4, k) for k, f in enumerate(fams)]
    cache = GapCache(*ens)
    nominal = nominal_distance(*ens, cache)
    assert nominal == pytest.approx(gap_metric(fams[0].base, fams[1].base).value, abs=1e-12)
    r = time_distance(*ens, 2.0, cache)
    assert r.value == pytest.approx(nominal**2, abs=1e-9)
    assert time_lower_bound(*ens, 2.0, cache) == pytest.approx(nominal**2, abs=1e-4)
    mb = time_upper_bound_moment(*ens, 2.0, cache=cache)
    assert mb.raw == pytest.approx(nominal**2, abs=1e-12) and mb.moments == (0.0, 0.0)
    assert time_upper_bound_moment(*ens, 1.0, 0.0, 0.0, cache).raw == pytest.approx(nominal, abs=1e-12)


def test_lower_bound_clamps():
    e1, e2 = random_ensemble_pair(5, 5)
    c = GapCache(e1, e2)
    slack = c.nominal_gap - c.to_nominal(0).mean() - c.to_nominal(1).mean()
    assert time_lower_bound(e1, e2, 1.0, c) == pytest.approx(max(slack, 0.0), abs=1e-15)
    # ensembles far from their nominals
    wide = random_ensemble_pair(6, 5)
    wide = [sample_ensemble(e.family, GaussianParameter(e.param.mean, 25 * e.param.covariance), 5, 1) for e in wide]
    assert time_lower_bound(*wide) >= 0


def test_cache_rejects_foreign_pair():
    e1, e2 = random_ensemble_pair(7, 3)
    with pytest.raises(InvalidArgument):
        time_distance(e2, e1, cache=GapCache(e1, e2))


@pytest.mark.parametrize("seed", range(4))
def test_time_sandwich_moment_bound_and_symmetry(seed):
    e1, e2 = random_ensemble_pair(100 + seed, 6)
    c = GapCache(e1, e2)
    r = time_distance(e1, e2, 1.0, c, lipschitz="estimate")
    assert r.lower_bound <= r.value <= r.upper_bound
    mb = r.bound_details["moment_bound"]
    assert mb["raw"] >= r.value and mb["estimated"]
    s = time_distance(e2, e1)
    assert s.value == pytest.approx(r.value, abs=1e-9)
    assert s.lower_bound == pytest.approx(r.lower_bound, abs=1e-9)


def test_workers_do_not_change_result():
    e1, e2 = random_ensemble_pair(9, 4)
    a = time_distance(e1, e2)
    b = time_distance(e1, e2, workers=2)
    assert a.value == b.value and a.upper_bound == b.upper_bound


# --- comparison ----------------------------------------------------------


def test_comparison_identical():
    e1, _ = random_ensemble_pair(10, 4)
    r = comparison_check(e1, e1, FrequencyGrid.log(0.01, 100, 30))
    assert r.d_freq == 0 and r.d_time <= 2e-5 and r.holds


@pytest.mark.parametrize("seed", range(3))
def test_comparison_holds(seed):
    e1, e2 = random_ensemble_pair(200 + seed, 6)
    r = comparison_check(e1, e2, FrequencyGrid.log(0.01, 100, 40))
    assert r.holds and r.d_freq <= r.d_time + r.tol
