"""Robust-control metrics for SISO plants: coprime factors, H-infinity norm,
chordal distance, nu-gap, gap metric and the generalized stability margin.

Directed gap
------------
For normalized right graph symbols ``G1``, ``G2`` the directed gap
``inf_Q ||G1 - G2 Q||`` equals ``inf_Q ||[a - Q; b]||`` with ``a = G2~ G1``
and ``b = D2 N1 - N2 D1`` (``G2`` and its left complement form a unitary
pair; for SISO plants the normalized left factors are the right ones).  For
a level ``gamma > ||b||`` factor ``gamma^2 - b~ b = w~ w`` with ``w`` a
stable unit; then ``inf_Q ||[a - Q; b]|| <= gamma`` exactly when the Hankel
norm of ``a w^-1`` is at most one (Nehari).  The level is located by a
bracketing root finder on that Hankel norm.  ``method="laguerre"`` instead
minimizes over a truncated Laguerre expansion of ``Q`` on a frequency grid;
it is slower and approximate and is kept as an independent cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq, minimize_scalar

from . import _ss
from .errors import DomainError, IllConditionedError, InvalidArgument, PoleOnAxisError, ResolutionError
from .lti_core import FrequencyGrid, to_ss

__all__ = [
    "NormalizedCoprimeFactors",
    "GapResult",
    "NuGapResult",
    "BpcResult",
    "solve_care",
    "nrcf",
    "hinf_norm",
    "kappa",
    "nu_gap",
    "directed_gap",
    "gap_metric",
    "bpc",
]

_AXIS_TOL = 1e-9


def _schur_stable_subspace(H: np.ndarray, n: int):
    """Ordered real Schur form of a 2n x 2n Hamiltonian; returns (U1, U2, eigs)."""
    T, Z, sdim = sla.schur(H, sort="lhp")
    eigs = _schur_eigs(T)
    scale = max(1.0, np.linalg.norm(H, 1))
    if np.min(np.abs(eigs.real)) <= _AXIS_TOL * scale:
        raise IllConditionedError("Hamiltonian has eigenvalues on the imaginary axis")
    if sdim != n:
        raise DomainError(f"Hamiltonian stable subspace has dimension {sdim}, expected {n}")
    return Z[:n, :n], Z[n:, :n], eigs


def _schur_eigs(T: np.ndarray) -> np.ndarray:
    # eigenvalues read off the 1x1 / 2x2 diagonal blocks of a real Schur form
    out = []
    i, m = 0, T.shape[0]
    while i < m:
        if i + 1 < m and T[i + 1, i] != 0.0:
            out.extend(np.linalg.eigvals(T[i : i + 2, i : i + 2]))
            i += 2
        else:
            out.append(T[i, i])
            i += 1
    return np.asarray(out, dtype=complex)


def _riccati(A: np.ndarray, G: np.ndarray, Q: np.ndarray):
    """Stabilizing solution of ``A'X + XA - XGX + Q = 0``; returns (X, cond(U1))."""
    n = A.shape[0]
    if n == 0:
        return np.zeros((0, 0)), 1.0
    # solve for X / s with s = sqrt(|Q| / |G|): a similarity of the Hamiltonian
    # that balances its off-diagonal blocks without moving any eigenvalue
    gn, qn = np.linalg.norm(G, 1), np.linalg.norm(Q, 1)
    s = math.sqrt(qn / gn) if gn > 0 and qn > 0 else 1.0
    H = np.block([[A, -s * G], [-Q / s, -A.T]])
    U1, U2, _ = _schur_stable_subspace(H, n)
    cond = np.linalg.cond(U1)
    if not np.isfinite(cond) or cond > 1e14:
        raise DomainError("no stabilizing Riccati solution (singular stable subspace basis)")
    X = s * np.linalg.solve(U1.T, U2.T).T
    return 0.5 * (X + X.T), float(cond)


def solve_care(A, B, Q, R=None):
    """Stabilizing solution of ``A'X + XA - X B R^-1 B' X + Q = 0``.

    Computed from the stable invariant subspace of the Hamiltonian matrix via
    an ordered real Schur decomposition.

    Returns
    -------
    X : ndarray
    cond : float
        Condition number of the subspace basis block that gets inverted.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    R = np.eye(B.shape[1]) if R is None else np.atleast_2d(np.asarray(R, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    return _riccati(A, B @ np.linalg.solve(R, B.T), Q)


# ---------------------------------------------------------------------------
# coprime factors


@dataclass(frozen=True, eq=False)
class NormalizedCoprimeFactors:
    """``P = N D^-1`` with ``N~N + D~D = 1``; both factors share ``(A + BF, B R^-1/2)``."""

    numerator: _ss.SS
    denominator: _ss.SS
    X: np.ndarray
    F: np.ndarray
    cond: float

    @property
    def graph(self) -> _ss.SS:
        """Graph symbol ``[D; N]`` as a single-input, two-output system."""
        A, B, Cd, Dd = self.denominator
        _, _, Cn, Dn = self.numerator
        return _ss.SS(A, B, np.vstack([Cd, Cn]), np.vstack([Dd, Dn]))

    def response(self, omega):
        """``(N(jw), D(jw))`` on an array of frequencies."""
        g = _ss.freqresp(self.graph, omega)
        return g[:, 1, 0], g[:, 0, 0]


def nrcf(model) -> NormalizedCoprimeFactors:
    """Normalized right coprime factorization from the control Riccati equation."""
    A, B, C, D = to_ss(model)
    if D.shape != (1, 1):
        raise InvalidArgument("only SISO plants are supported")
    n = A.shape[0]
    R = 1.0 + (D.T @ D)[0, 0]
    S = 1.0 + (D @ D.T)[0, 0]
    Ar = A - B @ D.T @ C / R
    X, cond = _riccati(Ar, B @ B.T / R, C.T @ C / S)
    F = -(D.T @ C + B.T @ X) / R
    Ac = A + B @ F
    if n and np.max(np.linalg.eigvals(Ac).real) >= 0:
        raise DomainError("Riccati solution is not stabilizing")
    rh = 1.0 / math.sqrt(R)
    Bc = B * rh
    num = _ss.SS(Ac, Bc, C + D @ F, D * rh)
    den = _ss.SS(Ac, Bc, F, np.array([[rh]]))
    return NormalizedCoprimeFactors(num, den, X, F, cond)


# ---------------------------------------------------------------------------
# H-infinity norm


def _sigma_max(s: _ss.SS, omegas) -> np.ndarray:
    g = _ss.freqresp(s, omegas)
    if g.shape[1] == 1 or g.shape[2] == 1:
        return np.sqrt(np.sum(np.abs(g) ** 2, axis=(1, 2)))
    return np.linalg.svd(g, compute_uv=False)[:, 0]


def _imag_axis_freqs(s: _ss.SS, gamma: float) -> np.ndarray:
    """Frequencies where ``gamma`` is a singular value of ``s(jw)``."""
    A, B, C, D = s
    p, m = D.shape
    R = gamma**2 * np.eye(m) - D.T @ D
    S = gamma**2 * np.eye(p) - D @ D.T
    Ri = np.linalg.inv(R)
    Ah = A + B @ Ri @ D.T @ C
    H = np.block([[Ah, B @ Ri @ B.T], [-(gamma**2) * C.T @ np.linalg.solve(S, C), -Ah.T]])
    eigs = np.linalg.eigvals(H)
    scale = max(1.0, np.linalg.norm(H, 1))
    on_axis = np.abs(eigs.real) <= 1e-8 * np.maximum(scale, np.abs(eigs))
    w = np.abs(eigs[on_axis].imag)
    return np.unique(np.round(w, 12))


def _hinf(s: _ss.SS, rtol: float = 1e-6, max_iter: int = 60) -> tuple[float, float]:
    """Two-sided bracket iteration on the Hamiltonian imaginary-eigenvalue test.

    Returns ``(lower, omega)`` where ``lower`` is attained at ``omega`` and the
    true norm lies in ``[lower, (1 + 2 rtol) lower]``.
    """
    A, B, C, D = s
    d_norm = float(np.linalg.norm(D, 2)) if D.size else 0.0
    if s.n == 0:
        return d_norm, math.inf
    eigs = np.linalg.eigvals(A)
    if np.max(eigs.real) >= 0:
        raise DomainError("H-infinity norm requested for a system with closed right half-plane poles")
    # candidate peak frequencies: DC, and the modulus of every pole
    cand = np.concatenate([[0.0], np.abs(eigs)])
    sig = _sigma_max(s, cand)
    k = int(np.argmax(sig))
    lower, w_peak = float(sig[k]), float(cand[k])
    if d_norm > lower:
        lower, w_peak = d_norm, math.inf
    if lower == 0.0:
        return 0.0, 0.0
    for _ in range(max_iter):
        gamma = (1.0 + 2.0 * rtol) * lower
        w = _imag_axis_freqs(s, gamma)
        if w.size == 0:
            break
        w = np.concatenate([[0.0], w]) if w.size == 1 else w
        mids = 0.5 * (w[:-1] + w[1:])
        sig = _sigma_max(s, mids)
        k = int(np.argmax(sig))
        if sig[k] <= lower:
            break
        lower, w_peak = float(sig[k]), float(mids[k])
    return lower, w_peak


def hinf_norm(sys, rtol: float = 1e-6) -> float:
    """Peak gain over frequency of a stable system.

    Parameters
    ----------
    sys : StateSpaceModel, RationalTransferFunction, scalar, or internal SS
        Must have all poles in the open left half-plane.
    rtol : float
        Relative accuracy of the returned value.
    """
    return _hinf(to_ss(sys), rtol)[0]


# ---------------------------------------------------------------------------
# pointwise chordal distance and nu-gap


def kappa(p1, p2):
    """Chordal distance between two complex numbers (projected on the sphere)."""
    p1 = np.asarray(p1, dtype=complex)
    p2 = np.asarray(p2, dtype=complex)
    out = np.abs(p1 - p2) / np.sqrt((1.0 + np.abs(p1) ** 2) * (1.0 + np.abs(p2) ** 2))
    return float(out) if out.ndim == 0 else out


class NuGapResult(NamedTuple):
    value: float
    winding_ok: bool
    argmax_omega: float
    kappa_curve: list


def _rhp_poles(s: _ss.SS) -> int:
    if s.n == 0:
        return 0
    return int(np.sum(np.linalg.eigvals(s.A).real > 0))


def _resp(s: _ss.SS, omegas) -> np.ndarray:
    if s.n:
        eig = np.linalg.eigvals(s.A)
        if np.min(np.abs(eig.real)) <= 1e-12 * (1.0 + np.linalg.norm(s.A, 1)):
            raise PoleOnAxisError("plant has a pole on the imaginary axis")
    return _ss.freqresp(s, omegas)[:, 0, 0]


def _winding(s1: _ss.SS, s2: _ss.SS, omegas: np.ndarray, refine: bool, max_depth: int = 40):
    """Net phase change of ``1 + conj(P2) P1`` over ``[0, inf)``, in units of pi.

    Returns None if the function vanishes on the axis.
    """

    def g(w):
        w = np.atleast_1d(np.asarray(w, dtype=float))
        return 1.0 + np.conj(_resp(s2, w)) * _resp(s1, w)

    def g_inf():
        return complex(1.0 + np.conj(s2.D[0, 0]) * s1.D[0, 0])

    grid = np.concatenate([[0.0], omegas])
    vals = list(g(grid))
    vals.append(g_inf())
    pts = list(grid) + [math.inf]
    total = 0.0
    for i in range(len(pts) - 1):
        total += _phase_increment(g, pts[i], pts[i + 1], vals[i], vals[i + 1], refine, max_depth)
        if not math.isfinite(total):
            return None
    return total / math.pi


def _phase_increment(g, w0, w1, v0, v1, refine, depth):
    if abs(v0) == 0.0 or abs(v1) == 0.0:
        return math.nan
    step = float(np.angle(v1 / v0))
    if abs(step) < 0.5 * math.pi:
        return step
    if not refine or depth == 0:
        raise ResolutionError(
            f"phase step of {abs(step):.3g} rad between omega={w0:g} and {w1:g}; refine the grid"
        )
    # bisect geometrically (or onto the tail when w1 is infinite)
    if math.isinf(w1):
        wm = max(2.0 * w0, 1.0) * 10.0
    elif w0 == 0.0:
        wm = 0.5 * w1
    else:
        wm = math.sqrt(w0 * w1)
    vm = complex(g(wm)[0])
    a = _phase_increment(g, w0, wm, v0, vm, refine, depth - 1)
    b = _phase_increment(g, wm, w1, vm, v1, refine, depth - 1)
    return a + b


def nu_gap(P1, P2, grid, refine: bool = True) -> NuGapResult:
    """Nu-gap metric evaluated on a frequency grid.

    The winding condition is checked by unwrapping the phase of
    ``1 + conj(P2) P1`` from 0 through the grid to infinity, subdividing
    any interval whose phase step reaches pi/2 (``refine=False`` raises a
    :class:`ResolutionError` instead).  When it holds, the value is the grid
    maximum of the chordal distance (DC and infinity included) polished by a
    golden-section search around the best grid point; otherwise it is 1.
    """
    s1, s2 = to_ss(P1), to_ss(P2)
    omegas = grid.omegas if isinstance(grid, FrequencyGrid) else FrequencyGrid(grid).omegas
    r1, r2 = _resp(s1, omegas), _resp(s2, omegas)
    k = kappa(r1, r2)
    curve = list(zip(omegas.tolist(), k.tolist()))

    wno = _winding(s1, s2, omegas, refine)
    required = _rhp_poles(s1) - _rhp_poles(s2)
    if wno is None or round(wno) != required:
        return NuGapResult(1.0, False, math.nan, curve)

    i = int(np.argmax(k))
    best, w_best = float(k[i]), float(omegas[i])
    if 0 < i < omegas.size - 1:
        lw = np.log(omegas[i - 1 : i + 2])

        def neg(x):
            w = np.array([math.exp(x)])
            return -float(kappa(_resp(s1, w)[0], _resp(s2, w)[0]))

        res = minimize_scalar(neg, bracket=tuple(lw), method="golden", options={"xtol": 1e-10})
        if -res.fun > best and lw[0] <= res.x <= lw[2]:
            best, w_best = -float(res.fun), math.exp(res.x)
    for w, val in ((0.0, kappa(_resp(s1, [0.0])[0], _resp(s2, [0.0])[0])), (math.inf, kappa(s1.D[0, 0], s2.D[0, 0]))):
        if val > best:
            best, w_best = float(val), w
    return NuGapResult(best, True, w_best, curve)


# ---------------------------------------------------------------------------
# gap metric


class GapResult(NamedTuple):
    value: float
    directed_12: float
    directed_21: float
    diagnostics: dict


def _factors(P) -> NormalizedCoprimeFactors:
    return P if isinstance(P, NormalizedCoprimeFactors) else nrcf(P)


def _left_complement(f: NormalizedCoprimeFactors) -> _ss.SS:
    """Row ``[-N, D]`` on the same states, so ``[-N2, D2] G1 = D2 N1 - N2 D1``.

    Scalar factors commute, so the row is the transpose of the column ``[-N; D]``.
    """
    A, B, Cd, Dd = f.denominator
    _, _, Cn, Dn = f.numerator
    return _ss.SS(A.T, np.hstack([-Cn.T, Cd.T]), B.T, np.hstack([-Dn, Dd]))


def _spectral_inverse(b: _ss.SS, gamma: float) -> _ss.SS:
    """Stable ``w^-1`` where ``w~ w = gamma^2 - b~ b`` and ``w`` is a stable unit."""
    A, B, C, D = b
    # factor 1 - (b/gamma)~(b/gamma) instead; keeps the Hamiltonian well scaled for small gamma
    C, D = C / gamma, D / gamma
    R = np.eye(D.shape[1]) - D.T @ D
    Ri = np.linalg.inv(R)
    S = -C.T @ D
    Ah = A - B @ Ri @ S.T
    X, _ = _riccati(Ah, B @ Ri @ B.T, -C.T @ C - S @ Ri @ S.T)
    K = Ri @ (B.T @ X + S.T)
    Rhi = np.linalg.inv(sla.sqrtm(R).real)
    return _ss.SS(A - B @ K, B @ Rhi, -K / gamma, Rhi / gamma)


def _antistable_hankel(s: _ss.SS) -> float:
    """Hankel norm of the strictly antistable part of ``s`` (no axis poles)."""
    A, B, C, _ = s
    T, Z, k = sla.schur(A, sort="lhp")
    n = A.shape[0]
    if k == n:
        return 0.0
    T11, T12, T22 = T[:k, :k], T[:k, k:], T[k:, k:]
    Bt, Ct = Z.T @ B, C @ Z
    if k:
        # block-diagonalize: T11 Y - Y T22 = -T12
        Y = sla.solve_sylvester(T11, -T22, -T12)
        Cu = Ct[:, :k] @ Y + Ct[:, k:]
    else:
        Cu = Ct
    Bu = Bt[k:]
    # mirror the antistable part to a stable one and use its gramians
    Am = -T22
    P = sla.solve_continuous_lyapunov(Am, -Bu @ Bu.T)
    Q = sla.solve_continuous_lyapunov(Am.T, -Cu.T @ Cu)
    return float(np.sqrt(np.max(np.abs(np.linalg.eigvals(P @ Q)))))


def _directed_hankel(f1: NormalizedCoprimeFactors, f2: NormalizedCoprimeFactors, xtol: float):
    G1, G2 = f1.graph, f2.graph
    a = _ss.series(G1, _ss.paraconj(G2))
    b = _ss.series(G1, _left_complement(f2))
    b_low, _ = _hinf(b, rtol=1e-10)
    b_norm = b_low * (1.0 + 2e-10)
    diag = {"b_norm": b_norm, "evaluations": 0}

    def excess(gamma):
        diag["evaluations"] += 1
        try:
            h = _antistable_hankel(_ss.series(_spectral_inverse(b, gamma), a))
        except (DomainError, np.linalg.LinAlgError):
            return 1.0
        return h - 1.0

    lo = b_norm + 1e-12
    if lo >= 1.0:
        diag["bracket"] = 0.0
        return 1.0, diag
    if excess(lo) <= 0.0:
        diag["bracket"] = 0.0
        return lo, diag
    if excess(1.0) > 0.0:
        diag["bracket"] = 0.0
        return 1.0, diag
    value = brentq(excess, lo, 1.0, xtol=xtol, rtol=4 * np.finfo(float).eps)
    diag["bracket"] = xtol
    return float(value), diag


def _laguerre_basis(omegas: np.ndarray, order: int, pole: float) -> np.ndarray:
    s = 1j * omegas
    psi = np.ones((omegas.size, order + 1), dtype=complex)
    lead = math.sqrt(2.0 * pole) / (s + pole)
    allpass = (pole - s) / (s + pole)
    for k in range(1, order + 1):
        psi[:, k] = lead * allpass ** (k - 1)
    return psi


def _directed_laguerre(f1, f2, orders, pole, omegas, tol):
    import cvxpy as cp

    g1 = _ss.freqresp(f1.graph, omegas)[:, :, 0]
    g2 = _ss.freqresp(f2.graph, omegas)[:, :, 0]
    values = []
    for K in orders:
        psi = _laguerre_basis(omegas, K, pole)
        q = cp.Variable(K + 1)
        t = cp.Variable()
        rows = []
        for o in range(2):
            basis = g2[:, o : o + 1] * psi
            rows += [g1[:, o].real - basis.real @ q, g1[:, o].imag - basis.imag @ q]
        prob = cp.Problem(cp.Minimize(t), [cp.norm(cp.vstack(rows), 2, axis=0) <= t])
        prob.solve(solver="CLARABEL")
        values.append(float(t.value))
        if len(values) > 1 and abs(values[-2] - values[-1]) < tol:
            break
    return min(1.0, values[-1]), {"orders": list(orders[: len(values)]), "values": values}


def directed_gap(
    P1,
    P2,
    method: str = "hankel",
    *,
    xtol: float = 1e-9,
    orders=(4, 8, 16, 32),
    pole: float = 1.0,
    grid=None,
    return_diagnostics: bool = False,
):
    """``inf_Q ||G1 - G2 Q||`` over stable Q for normalized graph symbols.

    Parameters
    ----------
    P1, P2 : model or NormalizedCoprimeFactors
        Precomputed factors can be passed to avoid repeated Riccati solves.
    method : {"hankel", "laguerre"}
        ``"hankel"`` is exact up to ``xtol``.  ``"laguerre"`` is a grid-based
        approximation over Laguerre expansions of Q with the given basis pole,
        increasing the order until successive values agree to 5e-4.
    """
    f1, f2 = _factors(P1), _factors(P2)
    if method == "hankel":
        value, diag = _directed_hankel(f1, f2, xtol)
    elif method == "laguerre":
        omegas = np.logspace(-3, 3, 2000) if grid is None else np.asarray(getattr(grid, "omegas", grid))
        value, diag = _directed_laguerre(f1, f2, tuple(orders), pole, omegas, 5e-4)
    else:
        raise InvalidArgument(f"unknown directed gap method {method!r}")
    value = min(max(value, 0.0), 1.0)
    return (value, diag) if return_diagnostics else value


def gap_metric(P1, P2, method: str = "hankel", **kwargs) -> GapResult:
    """Gap between two plants, the larger of the two directed gaps."""
    f1, f2 = _factors(P1), _factors(P2)
    d12, diag12 = directed_gap(f1, f2, method, return_diagnostics=True, **kwargs)
    d21, diag21 = directed_gap(f2, f1, method, return_diagnostics=True, **kwargs)
    diag = {"12": diag12, "21": diag21, "riccati_cond": (f1.cond, f2.cond)}
    return GapResult(max(d12, d21), d12, d21, diag)


# ---------------------------------------------------------------------------
# generalized stability margin


class BpcResult(NamedTuple):
    value: float
    stabilizing: bool


def _closed_loop(P: _ss.SS, C: _ss.SS) -> _ss.SS:
    """Map ``(w1, w2) -> (y, u)`` for ``u = C (y - w1) + w2``, ``y = P u``.

    Its transfer matrix is ``[P; 1] (1 - C P)^-1 [-C, 1]``.
    """
    Ap, Bp, Cp, Dp = P
    Ac, Bc, Cc, Dc = C
    np_, nc = Ap.shape[0], Ac.shape[0]
    e = 1.0 - (Dc @ Dp)[0, 0]
    if abs(e) < 1e-12:
        raise DomainError("feedback loop is not well posed")
    # u = (Dc Cp xp + Cc xc - Dc w1 + w2) / e
    Ku = np.hstack([Dc @ Cp, Cc]) / e
    Kw = np.hstack([-Dc, np.ones((1, 1))]) / e
    # y = Cp xp + Dp u
    Cy = np.hstack([Cp, np.zeros((1, nc))]) + Dp @ Ku
    Dy = Dp @ Kw
    A = _ss._blkdiag(Ap, Ac)
    A[:np_, :] += Bp @ Ku
    A[np_:, :] += Bc @ Cy
    B = np.zeros((np_ + nc, 2))
    B[:np_, :] += Bp @ Kw
    B[np_:, :] += Bc @ Dy
    B[np_:, 0:1] -= Bc
    Dc_in = np.vstack([Dy, Kw])
    return _ss.SS(A, B, np.vstack([Cy, Ku]), Dc_in)


def bpc(P, C) -> BpcResult:
    """Generalized stability margin of the positive-feedback loop ``(P, C)``.

    Returns value 0 with ``stabilizing=False`` if the loop is not internally
    stable.
    """
    cl = _closed_loop(to_ss(P), to_ss(C))
    if cl.n and np.max(np.linalg.eigvals(cl.A).real) >= 0:
        return BpcResult(0.0, False)
    norm = _hinf(cl, rtol=1e-9)[0]
    return BpcResult(1.0 / norm, True)
