"""Discrete optimal transport between weighted empirical measures.

Uniform measures with the same number of atoms are solved as an assignment
problem (an optimal plan of such a problem can always be taken to be a
permutation); anything else goes to the HiGHS simplex solver as a
transportation LP.  Both are exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog

from .errors import InvalidArgument

__all__ = [
    "EmpiricalMeasure",
    "CostMatrix",
    "CouplingPlan",
    "min_cost_coupling",
    "max_cost_coupling",
    "wasserstein_q",
]

_WEIGHT_TOL = 1e-12
_MARGINAL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """Finitely supported probability measure; atoms can be of any kind."""

    atoms: Sequence[Any]
    weights: np.ndarray | None = None

    def __post_init__(self):
        atoms = list(self.atoms)
        if not atoms:
            raise InvalidArgument("an empirical measure needs at least one atom")
        if self.weights is None:
            w = np.full(len(atoms), 1.0 / len(atoms))
        else:
            w = np.asarray(self.weights, dtype=float).ravel()
        if w.size != len(atoms):
            raise InvalidArgument(f"{len(atoms)} atoms but {w.size} weights")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise InvalidArgument("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > _WEIGHT_TOL:
            raise InvalidArgument(f"weights sum to {w.sum()!r}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return len(self.atoms)

    @classmethod
    def uniform(cls, atoms) -> "EmpiricalMeasure":
        return cls(list(atoms))

    def is_uniform(self) -> bool:
        return bool(np.all(self.weights == self.weights[0]))


@dataclass(frozen=True, eq=False)
class CostMatrix:
    entries: np.ndarray
    kind: str = "custom"
    q: float = 1.0

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.entries, dtype=float))
        if c.ndim != 2:
            raise InvalidArgument("cost must be a matrix")
        if not np.all(np.isfinite(c)):
            raise InvalidArgument("cost entries must be finite")
        if np.any(c < 0):
            raise InvalidArgument("cost entries must be nonnegative")
        object.__setattr__(self, "entries", c)

    @property
    def shape(self):
        return self.entries.shape


@dataclass(frozen=True, eq=False)
class CouplingPlan:
    pi: np.ndarray

    def check(self, a: np.ndarray, b: np.ndarray, tol: float = _MARGINAL_TOL) -> None:
        """Raise if ``pi`` is not a coupling of weight vectors ``a`` and ``b``."""
        if self.pi.shape != (a.size, b.size):
            raise InvalidArgument(f"plan shape {self.pi.shape} != ({a.size}, {b.size})")
        if np.any(self.pi < -tol):
            raise InvalidArgument("plan has negative mass")
        if np.max(np.abs(self.pi.sum(axis=1) - a)) > tol or np.max(np.abs(self.pi.sum(axis=0) - b)) > tol:
            raise InvalidArgument("plan marginals do not match the measures")


def _cost_array(mu, nu, cost) -> np.ndarray:
    c = cost.entries if isinstance(cost, CostMatrix) else CostMatrix(cost).entries
    if c.shape != (len(mu), len(nu)):
        raise InvalidArgument(f"cost shape {c.shape} does not match atom counts ({len(mu)}, {len(nu)})")
    return c


def _solve(a: np.ndarray, b: np.ndarray, c: np.ndarray, maximize: bool):
    """Exact transport LP on the support of ``a`` and ``b``; returns the full-size plan."""
    rows = np.flatnonzero(a > 0)
    cols = np.flatnonzero(b > 0)
    a_s, b_s = a[rows], b[cols]
    c_s = c[np.ix_(rows, cols)]
    obj = -c_s if maximize else c_s
    n1, n2 = c_s.shape
    pi_s = np.zeros((n1, n2))

    if n1 == n2 and np.all(a_s == a_s[0]) and np.all(b_s == b_s[0]):
        r, k = linear_sum_assignment(obj)
        pi_s[r, k] = 1.0 / n1
    elif n1 == 1 or n2 == 1:
        pi_s = np.outer(a_s, b_s)
    else:
        # row-sum and column-sum equalities on the row-major flattened plan
        A_eq = np.vstack(
            [
                np.kron(np.eye(n1), np.ones((1, n2))),
                np.kron(np.ones((1, n1)), np.eye(n2)),
            ]
        )
        b_eq = np.concatenate([a_s, b_s])
        res = linprog(obj.ravel(), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
        if res.status != 0:
            raise InvalidArgument(f"transport LP failed: {res.message}")
        pi_s = np.clip(res.x.reshape(n1, n2), 0.0, None)

    pi = np.zeros(c.shape)
    pi[np.ix_(rows, cols)] = pi_s
    return CouplingPlan(pi), float(np.sum(c * pi))


def min_cost_coupling(mu: EmpiricalMeasure, nu: EmpiricalMeasure, cost) -> tuple[CouplingPlan, float]:
    """Optimal plan and value of ``min sum_ik cost[i, k] pi[i, k]`` over couplings."""
    c = _cost_array(mu, nu, cost)
    return _solve(mu.weights, nu.weights, c, maximize=False)


def max_cost_coupling(mu: EmpiricalMeasure, nu: EmpiricalMeasure, cost) -> tuple[CouplingPlan, float]:
    """Same as :func:`min_cost_coupling` but maximizing the transport cost."""
    c = _cost_array(mu, nu, cost)
    return _solve(mu.weights, nu.weights, c, maximize=True)


def wasserstein_q(
    mu: EmpiricalMeasure,
    nu: EmpiricalMeasure,
    metric: Callable[[Any, Any], float],
    q: float = 1.0,
) -> float:
    """Optimal transport cost with ground cost ``metric(x, y) ** q``.

    Note this is the q-th power of the Wasserstein distance, not its q-th root.
    """
    if not q >= 1:
        raise InvalidArgument(f"q must be at least 1, got {q}")
    c = np.array([[metric(x, y) for y in nu.atoms] for x in mu.atoms], dtype=float) ** q
    return min_cost_coupling(mu, nu, CostMatrix(c, "custom", q))[1]
