"""SISO LTI plants, affine Gaussian perturbation families and ensembles.

Random draws use numpy's PCG64 bit generator seeded with a 64-bit integer.
Standard normals come from ``Generator.standard_normal`` (ziggurat) and are
mapped through a factor ``L`` of the covariance (``L @ L.T == cov``): the
Cholesky factor when the covariance is positive definite, otherwise the
eigendecomposition with negative eigenvalues clipped to zero.  All N
parameter draws are taken from a single stream, in order, before any model
is built.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import _ss
from .errors import InvalidArgument, PoleOnAxisError

__all__ = [
    "StateSpaceModel",
    "RationalTransferFunction",
    "AffineParametricFamily",
    "GaussianParameter",
    "SystemEnsemble",
    "instantiate",
    "vectorize_model",
    "vectorize_family",
    "pushforward_gaussian",
    "sample_ensemble",
    "frequency_response",
    "realize_transfer_function",
    "to_ss",
    "FrequencyGrid",
]

_SYM_TOL = 1e-12
_PSD_TOL = 1e-12


def _frozen(x) -> np.ndarray:
    x = np.array(x, dtype=float)
    x.setflags(write=False)
    return x


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    """Continuous-time SISO plant ``dx = A x + B u``, ``y = C x + D u``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: float = 0.0

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = A.shape[0]
        if n < 1 or A.shape != (n, n):
            raise InvalidArgument(f"A must be square with n >= 1, got shape {A.shape}")
        B = np.asarray(self.B, dtype=float)
        C = np.asarray(self.C, dtype=float)
        if B.size != n or (B.ndim == 2 and B.shape != (n, 1)):
            raise InvalidArgument(f"B must be {n}x1, got shape {B.shape}")
        if C.size != n or (C.ndim == 2 and C.shape != (1, n)):
            raise InvalidArgument(f"C must be 1x{n}, got shape {C.shape}")
        D = np.asarray(self.D, dtype=float)
        if D.size != 1:
            raise InvalidArgument("D must be a scalar for a SISO model")
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "B", _frozen(B.reshape(n, 1)))
        object.__setattr__(self, "C", _frozen(C.reshape(1, n)))
        object.__setattr__(self, "D", float(D.reshape(())))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def to_ss(self) -> _ss.SS:
        return _ss.SS(np.array(self.A), np.array(self.B), np.array(self.C), np.array([[self.D]]))

    def __repr__(self):
        return f"StateSpaceModel(n={self.n}, D={self.D})"


@dataclass(frozen=True, eq=False)
class RationalTransferFunction:
    """``num(s) / den(s)`` with coefficients in ascending powers of s."""

    num: np.ndarray
    den: np.ndarray
    axis_tol: float = 1e-10

    def __post_init__(self):
        num = np.trim_zeros(np.atleast_1d(np.asarray(self.num, dtype=float)), "b")
        den = np.atleast_1d(np.asarray(self.den, dtype=float))
        if den.size == 0 or den[-1] == 0.0:
            raise InvalidArgument("leading denominator coefficient must be nonzero")
        if num.size == 0:
            num = np.zeros(1)
        if num.size > den.size:
            raise InvalidArgument("transfer function must be proper")
        if den.size > 1:
            poles = np.roots(den[::-1])
            close = np.abs(poles.real) <= self.axis_tol * np.maximum(1.0, np.abs(poles))
            if np.any(close):
                raise PoleOnAxisError(f"pole on the imaginary axis: {poles[close][0]}")
        object.__setattr__(self, "num", _frozen(num))
        object.__setattr__(self, "den", _frozen(den))

    @property
    def order(self) -> int:
        return self.den.size - 1

    def __call__(self, s):
        return np.polyval(self.num[::-1], s) / np.polyval(self.den[::-1], s)

    def to_ss(self) -> _ss.SS:
        """Controllable canonical realization."""
        den = self.den / self.den[-1]
        num = np.zeros(den.size)
        num[: self.num.size] = self.num / self.den[-1]
        n = den.size - 1
        d = num[n]
        if n == 0:
            return _ss.gain(d)
        A = np.zeros((n, n))
        A[:-1, 1:] = np.eye(n - 1)
        A[-1, :] = -den[:n]
        B = np.zeros((n, 1))
        B[-1, 0] = 1.0
        C = (num[:n] - d * den[:n]).reshape(1, n)
        return _ss.SS(A, B, C, np.array([[d]]))


Model = Union[StateSpaceModel, RationalTransferFunction]


def to_ss(model) -> _ss.SS:
    if isinstance(model, (StateSpaceModel, RationalTransferFunction)):
        return model.to_ss()
    if isinstance(model, _ss.SS):
        return model
    if np.isscalar(model):
        return _ss.gain(model)
    raise InvalidArgument(f"cannot interpret {type(model).__name__} as an LTI model")


@dataclass(frozen=True, eq=False)
class GaussianParameter:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        d = mean.size
        if mean.ndim != 1 or cov.shape != (d, d):
            raise InvalidArgument(f"covariance must be {d}x{d}, got {cov.shape}")
        scale = max(1.0, float(np.max(np.abs(cov)))) if cov.size else 1.0
        if np.max(np.abs(cov - cov.T), initial=0.0) > _SYM_TOL * scale:
            raise InvalidArgument("covariance is not symmetric")
        cov = 0.5 * (cov + cov.T)
        if d and np.min(np.linalg.eigvalsh(cov)) < -_PSD_TOL * scale:
            raise InvalidArgument("covariance is not positive semidefinite")
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "covariance", _frozen(cov))

    @property
    def dim(self) -> int:
        return self.mean.size

    def factor(self) -> np.ndarray:
        """Return L with L @ L.T == covariance."""
        try:
            return np.linalg.cholesky(self.covariance)
        except np.linalg.LinAlgError:
            w, V = np.linalg.eigh(self.covariance)
            return V * np.sqrt(np.clip(w, 0.0, None))


@dataclass(frozen=True, eq=False)
class AffineParametricFamily:
    """Plants ``(A0 + sum_k t_k A_k, B0 + sum_k t_k B_k, C0 + sum_k t_k C_k)``.

    ``nominal_theta`` is the parameter value at which the family reproduces
    the nominal plant; it need not coincide with the mean of the parameter law.
    """

    base: StateSpaceModel
    directions: tuple = ()
    nominal_theta: np.ndarray = field(default=None)

    def __post_init__(self):
        n = self.base.n
        dirs = []
        for k, triple in enumerate(self.directions):
            if len(triple) != 3:
                raise InvalidArgument(f"direction {k} must be an (A, B, C) triple")
            Ak, Bk, Ck = (np.asarray(x, dtype=float) for x in triple)
            if Ak.shape != (n, n) or Bk.size != n or Ck.size != n:
                raise InvalidArgument(f"direction {k} does not match base dimensions (n={n})")
            dirs.append((_frozen(Ak), _frozen(Bk.reshape(n, 1)), _frozen(Ck.reshape(1, n))))
        object.__setattr__(self, "directions", tuple(dirs))
        theta = np.zeros(len(dirs)) if self.nominal_theta is None else self.nominal_theta
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.shape != (len(dirs),):
            raise InvalidArgument(f"nominal_theta must have length {len(dirs)}")
        object.__setattr__(self, "nominal_theta", _frozen(theta))

    @property
    def d(self) -> int:
        return len(self.directions)

    @property
    def n(self) -> int:
        return self.base.n

    def nominal(self) -> StateSpaceModel:
        return instantiate(self, self.nominal_theta)


def instantiate(family: AffineParametricFamily, theta) -> StateSpaceModel:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.shape != (family.d,):
        raise InvalidArgument(f"theta must have length {family.d}, got shape {theta.shape}")
    A = np.array(family.base.A)
    B = np.array(family.base.B)
    C = np.array(family.base.C)
    for t, (Ak, Bk, Ck) in zip(theta, family.directions):
        A += t * Ak
        B += t * Bk
        C += t * Ck
    return StateSpaceModel(A, B, C, family.base.D)


def vectorize_model(model: StateSpaceModel) -> np.ndarray:
    """Column-major stack ``[vec(A); vec(B); vec(C)]``."""
    return np.concatenate([model.A.ravel("F"), model.B.ravel("F"), model.C.ravel("F")])


def vectorize_family(family: AffineParametricFamily) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(z0, J)`` with ``vectorize_model(instantiate(family, t)) == z0 + J @ t``."""
    z0 = vectorize_model(family.base)
    p = z0.size
    J = np.zeros((p, family.d))
    for k, (Ak, Bk, Ck) in enumerate(family.directions):
        J[:, k] = np.concatenate([Ak.ravel("F"), Bk.ravel("F"), Ck.ravel("F")])
    return z0, J


def pushforward_gaussian(family: AffineParametricFamily, param: GaussianParameter) -> GaussianParameter:
    """Law of the vectorized plant when the parameter is Gaussian."""
    if param.dim != family.d:
        raise InvalidArgument(f"parameter dimension {param.dim} != family dimension {family.d}")
    z0, J = vectorize_family(family)
    cov = J @ param.covariance @ J.T
    return GaussianParameter(J @ param.mean + z0, 0.5 * (cov + cov.T))


@dataclass(frozen=True, eq=False)
class SystemEnsemble:
    family: AffineParametricFamily
    param: GaussianParameter
    thetas: np.ndarray
    models: tuple
    seed: int

    def __post_init__(self):
        if len(self.models) < 1:
            raise InvalidArgument("an ensemble needs at least one sample")
        object.__setattr__(self, "thetas", _frozen(np.atleast_2d(self.thetas)))
        object.__setattr__(self, "models", tuple(self.models))

    def __len__(self):
        return len(self.models)

    @property
    def samples(self):
        return list(zip(self.thetas, self.models))

    def nominal(self) -> StateSpaceModel:
        return self.family.nominal()


def sample_ensemble(
    family: AffineParametricFamily, param: GaussianParameter, N: int, seed: int
) -> SystemEnsemble:
    if N < 1:
        raise InvalidArgument("N must be at least 1")
    if param.dim != family.d:
        raise InvalidArgument(f"parameter dimension {param.dim} != family dimension {family.d}")
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    z = rng.standard_normal((N, family.d))
    thetas = param.mean + z @ param.factor().T
    models = tuple(instantiate(family, t) for t in thetas)
    return SystemEnsemble(family, param, thetas, models, int(seed))


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """Strictly increasing positive frequencies in rad/s."""

    omegas: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.omegas, dtype=float).ravel()
        if w.size < 2:
            raise InvalidArgument("a frequency grid needs at least two points")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise InvalidArgument("grid frequencies must be finite and positive")
        if np.any(np.diff(w) <= 0):
            raise InvalidArgument("grid frequencies must be strictly increasing")
        object.__setattr__(self, "omegas", _frozen(w))

    @classmethod
    def log(cls, w_min: float, w_max: float, M: int) -> "FrequencyGrid":
        if not 0 < w_min < w_max:
            raise InvalidArgument("need 0 < w_min < w_max")
        return cls(np.logspace(np.log10(w_min), np.log10(w_max), int(M)))

    @classmethod
    def linear(cls, w_min: float, w_max: float, M: int) -> "FrequencyGrid":
        if not 0 < w_min < w_max:
            raise InvalidArgument("need 0 < w_min < w_max")
        return cls(np.linspace(w_min, w_max, int(M)))

    def __len__(self):
        return self.omegas.size

    def __eq__(self, other):
        return isinstance(other, FrequencyGrid) and np.array_equal(self.omegas, other.omegas)

    __hash__ = None


def _check_axis_poles(A: np.ndarray, omegas: np.ndarray) -> None:
    if A.size == 0:
        return
    eig = np.linalg.eigvals(A)
    scale = 1.0 + np.linalg.norm(A, 1)
    gap = np.min(np.abs(eig[None, :] - 1j * omegas[:, None]), axis=1)
    bad = gap <= 1e-12 * scale
    if np.any(bad):
        raise PoleOnAxisError(f"pole on the imaginary axis at omega={omegas[bad][0]:g}")


def frequency_response(model, omega):
    """Evaluate ``P(j omega)``; scalar in, complex out, array in, array out."""
    w = np.asarray(omega, dtype=float)
    flat = np.atleast_1d(w).ravel()
    if isinstance(model, RationalTransferFunction):
        den = np.polyval(model.den[::-1], 1j * flat)
        if np.any(np.abs(den) == 0.0):
            raise PoleOnAxisError("pole on the imaginary axis")
        out = np.polyval(model.num[::-1], 1j * flat) / den
    else:
        sys = to_ss(model)
        _check_axis_poles(sys.A, flat)
        out = _ss.freqresp(sys, flat)[:, 0, 0]
    if w.ndim == 0:
        return complex(out[0])
    return out.reshape(w.shape)


def realize_transfer_function(model: StateSpaceModel) -> RationalTransferFunction:
    """Numerator and denominator via the Faddeev-LeVerrier recursion.

    The denominator is the characteristic polynomial of ``A``; common factors
    with the numerator are kept.
    """
    A, B, C = model.A, model.B, model.C
    n = model.n
    # (sI - A)^-1 = sum_k s^(n-1-k) M_k / det(sI - A)
    coeffs = [1.0]
    M = np.eye(n)
    mats = [M]
    for k in range(1, n + 1):
        AM = A @ M
        c = -np.trace(AM) / k
        coeffs.append(c)
        M = AM + c * np.eye(n)
        if k < n:
            mats.append(M)
    # descending powers: den = s^n + c1 s^(n-1) + ... + cn
    den_desc = np.array(coeffs)
    num_desc = np.zeros(n + 1)
    for k, Mk in enumerate(mats):
        num_desc[k + 1] = (C @ Mk @ B)[0, 0]
    num_desc = num_desc + model.D * den_desc
    return RationalTransferFunction(num_desc[::-1], den_desc[::-1])
