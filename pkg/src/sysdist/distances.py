"""Wasserstein distances between stochastic plants and their bounds.

Frequency domain: at every grid frequency the two sample clouds are pushed
onto the Riemann sphere and compared with chordal-cost transport; the
distance is the worst frequency.  Time domain: whole sampled plants are
compared with gap-metric-cost transport.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import gap as _gap
from .errors import DomainError, InvalidArgument, SysdistError
from .lti_core import FrequencyGrid, SystemEnsemble, frequency_response
from .sphere import chordal_matrix, to_sphere
from .transport import CostMatrix, EmpiricalMeasure, max_cost_coupling, min_cost_coupling

__all__ = [
    "FrequencyGrid",
    "FrequencyEnsemble",
    "DistanceReport",
    "BoundViolation",
    "GapCache",
    "MomentBound",
    "ComparisonResult",
    "project_ensemble",
    "freq_distance",
    "support_distance_complex",
    "support_distance_sphere",
    "freq_upper_bound",
    "freq_lower_bound",
    "time_distance",
    "nominal_distance",
    "time_upper_bound_diameter",
    "time_upper_bound_moment",
    "time_lower_bound",
    "comparison_check",
    "frequency_ensemble_from_systems",
    "perturbed_frequency_ensemble",
]

SANDWICH_TOL = 1e-9


class BoundViolation(SysdistError, AssertionError):
    """A computed bound is on the wrong side of the distance it brackets."""


@dataclass(frozen=True, eq=False)
class FrequencyEnsemble:
    """N complex response samples at each of M grid frequencies.

    ``samples`` has shape (M, N); ``nominal`` (optional) has shape (M,).
    """

    grid: FrequencyGrid
    samples: np.ndarray
    nominal: np.ndarray | None = None

    def __post_init__(self):
        grid = self.grid if isinstance(self.grid, FrequencyGrid) else FrequencyGrid(self.grid)
        s = np.asarray(self.samples, dtype=complex)
        if s.ndim == 1:
            s = s[:, None]
        if s.ndim != 2 or s.shape[0] != len(grid) or s.shape[1] < 1:
            raise InvalidArgument(f"samples must have shape ({len(grid)}, N), got {s.shape}")
        if not np.all(np.isfinite(s)):
            raise InvalidArgument("samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "samples", s)
        if self.nominal is not None:
            nom = np.asarray(self.nominal, dtype=complex).ravel()
            if nom.shape != (len(grid),):
                raise InvalidArgument(f"nominal must have length {len(grid)}")
            nom.setflags(write=False)
            object.__setattr__(self, "nominal", nom)

    @property
    def M(self) -> int:
        return self.samples.shape[0]

    @property
    def N(self) -> int:
        return self.samples.shape[1]

    @property
    def omegas(self) -> np.ndarray:
        return self.grid.omegas


@dataclass(eq=False)
class DistanceReport:
    """Outcome of one distance computation with its bounds.

    ``per_frequency`` rows are ``(omega, W_q^q, C(omega)^q, lower(omega))``
    for frequency-domain reports and empty otherwise.  Construction raises
    :class:`BoundViolation` if ``lower_bound <= value <= upper_bound`` fails.
    """

    value: float
    lower_bound: float
    upper_bound: float
    q: float
    per_frequency: list = field(default_factory=list)
    argmax_omega: float | None = None
    bound_details: dict = field(default_factory=dict)
    seed: int | None = None
    timings: dict = field(default_factory=dict)

    def __post_init__(self):
        check_sandwich(self.lower_bound, self.value, self.upper_bound)


def check_sandwich(lower: float, value: float, upper: float, tol: float = SANDWICH_TOL) -> None:
    if all(math.isfinite(x) for x in (lower, value, upper)):
        if lower > value + tol or value > upper + tol:
            raise BoundViolation(f"bound sandwich violated: {lower!r} <= {value!r} <= {upper!r}")


# ---------------------------------------------------------------------------
# frequency domain


def _check_grids(fe1: FrequencyEnsemble, fe2: FrequencyEnsemble) -> None:
    if fe1.grid != fe2.grid:
        raise InvalidArgument("frequency ensembles are defined on different grids")


def _check_q(q: float) -> None:
    if not q >= 1:
        raise InvalidArgument(f"q must be at least 1, got {q}")


def project_ensemble(fe: FrequencyEnsemble, omega_index: int) -> EmpiricalMeasure:
    """Uniform measure on the sphere images of the samples at one frequency."""
    if not -fe.M <= omega_index < fe.M:
        raise InvalidArgument(f"frequency index {omega_index} out of range")
    from .sphere import SpherePoint

    pts = to_sphere(fe.samples[omega_index])
    return EmpiricalMeasure([SpherePoint.from_array(p) for p in pts])


class _FreqCurves(NamedTuple):
    wqq: np.ndarray
    c_q: np.ndarray
    lower: np.ndarray | None
    d_nominal: np.ndarray | None


def _freq_curves(fe1: FrequencyEnsemble, fe2: FrequencyEnsemble, q: float, bounds: bool = True) -> _FreqCurves:
    _check_grids(fe1, fe2)
    _check_q(q)
    M = fe1.M
    w1 = np.full(fe1.N, 1.0 / fe1.N)
    w2 = np.full(fe2.N, 1.0 / fe2.N)
    mu = EmpiricalMeasure(range(fe1.N), w1)
    nu = EmpiricalMeasure(range(fe2.N), w2)
    has_nominal = bounds and fe1.nominal is not None and fe2.nominal is not None
    wqq = np.empty(M)
    c_q = np.empty(M)
    lower = np.empty(M) if has_nominal else None
    d_nom = np.empty(M) if has_nominal else None
    r1_all = to_sphere(fe1.samples)
    r2_all = to_sphere(fe2.samples)
    if has_nominal:
        n1_all = to_sphere(fe1.nominal)
        n2_all = to_sphere(fe2.nominal)
    for m in range(M):
        chord = chordal_matrix(r1_all[m], r2_all[m])
        cost = chord**q
        wqq[m] = min_cost_coupling(mu, nu, CostMatrix(cost, "chordal^q", q))[1]
        c_q[m] = np.max(chord) ** q
        if has_nominal:
            dbar = float(np.linalg.norm(n1_all[m] - n2_all[m]))
            dev1 = np.linalg.norm(r1_all[m] - n1_all[m], axis=1)
            dev2 = np.linalg.norm(r2_all[m] - n2_all[m], axis=1)
            spread = CostMatrix(dev1[:, None] + dev2[None, :], "custom", 1.0)
            best = max_cost_coupling(mu, nu, spread)[1]
            lower[m] = max(dbar - best, 0.0) ** q
            d_nom[m] = dbar
    return _FreqCurves(wqq, c_q, lower, d_nom)


def freq_distance(fe1: FrequencyEnsemble, fe2: FrequencyEnsemble, q: float = 1.0, seed=None) -> DistanceReport:
    """Worst-frequency chordal Wasserstein distance (q-th power) with bounds.

    The upper bound is the worst-frequency spread of the projected supports,
    ``max_w C(w)^q``.  The lower bound needs nominal responses in both
    ensembles and is ``nan`` otherwise.
    """
    curves = _freq_curves(fe1, fe2, q)
    omegas = fe1.omegas
    i = int(np.argmax(curves.wqq))
    lower = curves.lower if curves.lower is not None else np.full(fe1.M, math.nan)
    rows = [(float(w), float(a), float(b), float(c)) for w, a, b, c in zip(omegas, curves.wqq, curves.c_q, lower)]
    details = {
        "upper_argmax_omega": float(omegas[int(np.argmax(curves.c_q))]),
        "support_distance_sphere": float(np.max(curves.c_q) ** (1.0 / q)),
    }
    lb = math.nan
    if curves.lower is not None:
        j = int(np.argmax(curves.lower))
        lb = float(curves.lower[j])
        details["lower_argmax_omega"] = float(omegas[j])
        details["max_nominal_chordal"] = float(np.max(curves.d_nominal))
    return DistanceReport(
        value=float(curves.wqq[i]),
        lower_bound=lb,
        upper_bound=float(np.max(curves.c_q)),
        q=q,
        per_frequency=rows,
        argmax_omega=float(omegas[i]),
        bound_details=details,
        seed=seed,
    )


def support_distance_complex(fe1: FrequencyEnsemble, fe2: FrequencyEnsemble) -> float:
    """Largest planar distance between samples of the two ensembles at a common frequency."""
    _check_grids(fe1, fe2)
    diff = np.abs(fe1.samples[:, :, None] - fe2.samples[:, None, :])
    return float(np.max(diff))


def support_distance_sphere(fe1: FrequencyEnsemble, fe2: FrequencyEnsemble) -> float:
    """Largest chordal distance between projected samples at a common frequency."""
    _check_grids(fe1, fe2)
    r1, r2 = to_sphere(fe1.samples), to_sphere(fe2.samples)
    return float(max(np.max(chordal_matrix(a, b)) for a, b in zip(r1, r2)))


def freq_upper_bound(fe1: FrequencyEnsemble, fe2: FrequencyEnsemble, q: float = 1.0) -> float:
    _check_q(q)
    return support_distance_sphere(fe1, fe2) ** q


def freq_lower_bound(fe1: FrequencyEnsemble, fe2: FrequencyEnsemble, q: float = 1.0) -> float:
    """Nominal-distance lower bound: worst frequency of ``(dbar - max_pi E[dev1 + dev2])_+^q``."""
    if fe1.nominal is None or fe2.nominal is None:
        raise InvalidArgument("the lower bound needs nominal responses for both ensembles")
    return float(np.max(_freq_curves(fe1, fe2, q).lower))


def frequency_ensemble_from_systems(ensemble: SystemEnsemble, grid: FrequencyGrid) -> FrequencyEnsemble:
    """Evaluate every sampled plant (and the nominal) on the grid."""
    w = grid.omegas
    samples = np.stack([frequency_response(m, w) for m in ensemble.models], axis=1)
    return FrequencyEnsemble(grid, samples, frequency_response(ensemble.nominal(), w))


def perturbed_frequency_ensemble(nominal_model, grid: FrequencyGrid, N: int, rho: float, seed: int) -> FrequencyEnsemble:
    """Independent relative complex Gaussian perturbations of a nominal response.

    Sample ``i`` at frequency ``w`` is ``P(jw) + rho |P(jw)| (x + j y)`` with
    ``x, y`` standard normal.  Draws come from a PCG64 stream seeded with
    ``seed`` as one ``(M, N, 2)`` array (last axis: real, imaginary).
    """
    if N < 1:
        raise InvalidArgument("N must be at least 1")
    if rho < 0:
        raise InvalidArgument("rho must be nonnegative")
    nom = frequency_response(nominal_model, grid.omegas)
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    z = rng.standard_normal((len(grid), N, 2))
    samples = nom[:, None] + rho * np.abs(nom)[:, None] * (z[..., 0] + 1j * z[..., 1])
    return FrequencyEnsemble(grid, samples, nom)


# ---------------------------------------------------------------------------
# time domain


def _row_gaps(args):
    i, f, others = args
    out = np.empty(len(others))
    for k, g in enumerate(others):
        try:
            out[k] = _gap.gap_metric(f, g).value
        except (DomainError, np.linalg.LinAlgError) as exc:
            raise DomainError(f"gap computation failed for pair ({i}, {k}): {exc}") from exc
    return out


def _gap_table(rows, cols, workers: int | None) -> np.ndarray:
    tasks = [(i, f, cols) for i, f in enumerate(rows)]
    if workers and workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            # map preserves task order, so the result is scheduling independent
            return np.vstack(list(pool.map(_row_gaps, tasks)))
    return np.vstack([_row_gaps(t) for t in tasks])


def _factor_all(models, label):
    out = []
    for i, m in enumerate(models):
        try:
            out.append(_gap.nrcf(m))
        except (DomainError, np.linalg.LinAlgError) as exc:
            raise DomainError(f"coprime factorization failed for {label} sample {i}: {exc}") from exc
    return out


class GapCache:
    """Lazily computed gap-metric tables for one pair of ensembles.

    Every table is computed at most once and shared by the distance and the
    bounds.  ``workers > 1`` spreads rows over processes.
    """

    def __init__(self, e1: SystemEnsemble, e2: SystemEnsemble, workers: int | None = None):
        self.e1, self.e2 = e1, e2
        self.workers = workers
        self._f1 = _factor_all(e1.models, "first")
        self._f2 = _factor_all(e2.models, "second")
        self._nom = (_gap.nrcf(e1.nominal()), _gap.nrcf(e2.nominal()))
        self._cross = None
        self._nominal_gap = None
        self._to_nominal = [None, None]
        self._within = [None, None]

    @property
    def cross(self) -> np.ndarray:
        """``gap(sample_i of e1, sample_k of e2)`` for all pairs."""
        if self._cross is None:
            self._cross = _gap_table(self._f1, self._f2, self.workers)
        return self._cross

    @property
    def nominal_gap(self) -> float:
        if self._nominal_gap is None:
            self._nominal_gap = _gap.gap_metric(*self._nom).value
        return self._nominal_gap

    def to_nominal(self, which: int) -> np.ndarray:
        """Gaps between each sample of ensemble ``which`` (0 or 1) and its nominal."""
        if self._to_nominal[which] is None:
            fs = (self._f1, self._f2)[which]
            self._to_nominal[which] = _gap_table([self._nom[which]], fs, None)[0]
        return self._to_nominal[which]

    def within(self, which: int) -> np.ndarray:
        """Symmetric table of gaps between samples of one ensemble."""
        if self._within[which] is None:
            fs = (self._f1, self._f2)[which]
            n = len(fs)
            table = np.zeros((n, n))
            for i in range(n - 1):
                row = _row_gaps((i, fs[i], fs[i + 1 :]))
                table[i, i + 1 :] = row
                table[i + 1 :, i] = row
            self._within[which] = table
        return self._within[which]


def _cache(e1, e2, cache, workers=None) -> GapCache:
    if cache is None:
        return GapCache(e1, e2, workers)
    if cache.e1 is not e1 or cache.e2 is not e2:
        raise InvalidArgument("gap cache belongs to a different pair of ensembles")
    return cache


class MomentBound(NamedTuple):
    raw: float
    clamped: float
    L: tuple
    moments: tuple
    estimated: bool


def nominal_distance(e1: SystemEnsemble, e2: SystemEnsemble, cache: GapCache | None = None) -> float:
    if cache is not None:
        return cache.nominal_gap
    return _gap.gap_metric(e1.nominal(), e2.nominal()).value


def time_upper_bound_diameter(e1, e2, q: float = 1.0, cache: GapCache | None = None) -> float:
    """Largest gap between any two samples of the two ensembles, to the q."""
    _check_q(q)
    return float(np.max(_cache(e1, e2, cache).cross)) ** q


def time_lower_bound(e1, e2, q: float = 1.0, cache: GapCache | None = None) -> float:
    """``(nominal gap - mean gap-to-nominal of e1 - same for e2)_+^q``."""
    _check_q(q)
    c = _cache(e1, e2, cache)
    slack = c.nominal_gap - float(np.mean(c.to_nominal(0))) - float(np.mean(c.to_nominal(1)))
    return max(slack, 0.0) ** q


def _lipschitz_estimate(ens: SystemEnsemble, within: np.ndarray, to_nominal: np.ndarray) -> float:
    """Largest gap-to-parameter-distance ratio over sample pairs and sample-nominal pairs."""
    th = np.asarray(ens.thetas)
    dist = np.linalg.norm(th[:, None, :] - th[None, :, :], axis=-1)
    dnom = np.linalg.norm(th - ens.family.nominal_theta, axis=1)
    ratios = [0.0]
    mask = dist > 0
    if np.any(mask):
        ratios.append(float(np.max(within[mask] / dist[mask])))
    if np.any(dnom > 0):
        ratios.append(float(np.max(to_nominal[dnom > 0] / dnom[dnom > 0])))
    return max(ratios)


def time_upper_bound_moment(e1, e2, q: float = 1.0, L1=None, L2=None, cache: GapCache | None = None) -> MomentBound:
    """Lipschitz/moment upper bound ``(nominal gap + sum_i L_i E[|t_i - tbar_i|^q]^(1/q))^q``.

    Missing Lipschitz constants are estimated from the ensembles themselves
    (pairs of samples and sample/nominal pairs), so the result is an
    estimate of the bound.  ``clamped`` caps it at 1.
    """
    _check_q(q)
    c = _cache(e1, e2, cache)
    estimated = L1 is None or L2 is None
    Ls = []
    moments = []
    for which, (ens, L) in enumerate(((e1, L1), (e2, L2))):
        if ens.thetas.size == 0 and ens.family.d:
            raise InvalidArgument("ensemble carries no parameter draws")
        if L is None:
            L = _lipschitz_estimate(ens, c.within(which), c.to_nominal(which))
        if L < 0:
            raise InvalidArgument("Lipschitz constants must be nonnegative")
        dev = np.linalg.norm(ens.thetas - ens.family.nominal_theta, axis=1) if ens.family.d else np.zeros(len(ens))
        Ls.append(float(L))
        moments.append(float(np.mean(dev**q)))
    raw = (c.nominal_gap + sum(L * m ** (1.0 / q) for L, m in zip(Ls, moments))) ** q
    return MomentBound(float(raw), min(float(raw), 1.0), tuple(Ls), tuple(moments), estimated)


def time_distance(
    e1: SystemEnsemble,
    e2: SystemEnsemble,
    q: float = 1.0,
    cache: GapCache | None = None,
    *,
    lipschitz=None,
    workers: int | None = None,
) -> DistanceReport:
    """Gap-metric Wasserstein distance (q-th power) between two plant ensembles.

    Parameters
    ----------
    lipschitz : None, "estimate" or (L1, L2)
        When given, the moment upper bound is added to ``bound_details``.
    """
    _check_q(q)
    c = _cache(e1, e2, cache, workers)
    table = c.cross
    mu = EmpiricalMeasure(range(len(e1)))
    nu = EmpiricalMeasure(range(len(e2)))
    plan, value = min_cost_coupling(mu, nu, CostMatrix(table**q, "gap^q", q))
    nominal = c.nominal_gap
    lower = time_lower_bound(e1, e2, q, c)
    upper = time_upper_bound_diameter(e1, e2, q, c)
    details = {
        "nominal_gap": nominal,
        "mean_gap_to_nominal": [float(np.mean(c.to_nominal(0))), float(np.mean(c.to_nominal(1)))],
        "diameter": float(np.max(table)),
    }
    if lipschitz is not None:
        L1, L2 = (None, None) if lipschitz == "estimate" else lipschitz
        mb = time_upper_bound_moment(e1, e2, q, L1, L2, c)
        details["moment_bound"] = mb._asdict()
    return DistanceReport(value, lower, upper, q, bound_details=details, seed=e1.seed)


class ComparisonResult(NamedTuple):
    d_freq: float
    d_time: float
    holds: bool
    tol: float
    freq_report: DistanceReport
    time_report: DistanceReport


def comparison_check(e1, e2, grid: FrequencyGrid, q: float = 1.0, tol: float = 2e-3, cache=None) -> ComparisonResult:
    """Compare the frequency-domain distance of two ensembles with their time-domain one.

    The frequency ensembles are the responses of the sampled plants, so
    the samples are correlated across frequency.
    """
    fr = freq_distance(frequency_ensemble_from_systems(e1, grid), frequency_ensemble_from_systems(e2, grid), q, e1.seed)
    tr = time_distance(e1, e2, q, cache)
    return ComparisonResult(fr.value, tr.value, fr.value <= tr.value + tol, tol, fr, tr)
