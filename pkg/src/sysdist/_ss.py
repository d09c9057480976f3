"""Bare state-space algebra on (A, B, C, D) array tuples.

Everything here works on plain numpy arrays so the gap and norm code can
build interconnections without going through the public, SISO-only types.
Zero-state systems (pure gains) are allowed.
"""

from typing import NamedTuple

import numpy as np


class SS(NamedTuple):
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.D.shape


def ss(A, B, C, D) -> SS:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    D = np.atleast_2d(np.asarray(D, dtype=float))
    n = A.shape[0] if A.size else 0
    p, m = D.shape
    B = np.asarray(B, dtype=float).reshape(n, m)
    C = np.asarray(C, dtype=float).reshape(p, n)
    A = A.reshape(n, n)
    return SS(A, B, C, D)


def gain(k) -> SS:
    k = np.atleast_2d(np.asarray(k, dtype=float))
    p, m = k.shape
    return SS(np.zeros((0, 0)), np.zeros((0, m)), np.zeros((p, 0)), k)


def series(first: SS, second: SS) -> SS:
    """Return ``second * first`` (signal passes through ``first`` first)."""
    A1, B1, C1, D1 = first
    A2, B2, C2, D2 = second
    n1, n2 = A1.shape[0], A2.shape[0]
    A = np.block([[A1, np.zeros((n1, n2))], [B2 @ C1, A2]])
    B = np.vstack([B1, B2 @ D1])
    C = np.hstack([D2 @ C1, C2])
    return SS(A, B, C, D2 @ D1)


def parallel(s1: SS, s2: SS, sign: float = 1.0) -> SS:
    A = _blkdiag(s1.A, s2.A)
    B = np.vstack([s1.B, s2.B])
    C = np.hstack([s1.C, sign * s2.C])
    return SS(A, B, C, s1.D + sign * s2.D)


def vstack(s1: SS, s2: SS) -> SS:
    """Stack outputs of two systems driven by the same input."""
    A = _blkdiag(s1.A, s2.A)
    B = np.vstack([s1.B, s2.B])
    C = _blkdiag(s1.C, s2.C)
    return SS(A, B, C, np.vstack([s1.D, s2.D]))


def hstack(s1: SS, s2: SS) -> SS:
    """Sum the outputs of two systems with separate inputs: [s1 s2]."""
    A = _blkdiag(s1.A, s2.A)
    B = _blkdiag(s1.B, s2.B)
    C = np.hstack([s1.C, s2.C])
    return SS(A, B, C, np.hstack([s1.D, s2.D]))


def paraconj(s: SS) -> SS:
    """G~(s) = G(-s)^T."""
    A, B, C, D = s
    return SS(-A.T, C.T, -B.T, D.T)


def inverse(s: SS) -> SS:
    A, B, C, D = s
    Di = np.linalg.inv(D)
    return SS(A - B @ Di @ C, B @ Di, -Di @ C, Di)


def scale_output(s: SS, k) -> SS:
    k = np.atleast_2d(np.asarray(k, dtype=float))
    return SS(s.A, s.B, k @ s.C, k @ s.D)


def positive_feedback(s: SS) -> SS:
    """Map w -> v defined by v = w + s v, i.e. (I - s)^-1 for square ``s``."""
    A, B, C, D = s
    p = D.shape[0]
    E = np.linalg.inv(np.eye(p) - D)
    return SS(A + B @ E @ C, B @ E, E @ C, E)


def freqresp(s: SS, omegas) -> np.ndarray:
    """Evaluate at s = j*omega; returns an array of shape (len(omegas), p, m)."""
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    A, B, C, D = s
    n = A.shape[0]
    if n == 0:
        return np.broadcast_to(D.astype(complex), (omegas.size,) + D.shape).copy()
    lhs = 1j * omegas[:, None, None] * np.eye(n) - A
    x = np.linalg.solve(lhs, np.broadcast_to(B.astype(complex), (omegas.size,) + B.shape))
    return C @ x + D


def is_stable(s: SS, margin: float = 0.0) -> bool:
    if s.n == 0:
        return True
    return bool(np.all(np.linalg.eigvals(s.A).real < -margin))


def _blkdiag(X, Y):
    r1, c1 = X.shape
    r2, c2 = Y.shape
    out = np.zeros((r1 + r2, c1 + c2))
    out[:r1, :c1] = X
    out[r1:, c1:] = Y
    return out
