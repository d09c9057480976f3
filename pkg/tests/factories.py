"""Seeded random inputs shared by several test modules."""

import numpy as np

from oracles import random_stable
from sysdist.lti_core import AffineParametricFamily, GaussianParameter, StateSpaceModel, sample_ensemble


def random_family(rng, n, d=2, scale=0.3):
    A, B, C = random_stable(rng, n, margin=(0.3, 1.0))
    dirs = []
    for _ in range(d):
        dirs.append((scale * rng.standard_normal((n, n)), scale * rng.standard_normal((n, 1)), np.zeros((1, n))))
    return AffineParametricFamily(StateSpaceModel(A, B, C), dirs)


def random_ensemble_pair(seed, N, n=None, d=2):
    """Two independent small families with Gaussian parameters and their samples."""
    rng = np.random.default_rng(seed)
    out = []
    for l in range(2):
        k = n if n is not None else int(rng.integers(1, 4))
        fam = random_family(rng, k, d)
        L = 0.2 * rng.standard_normal((d, d))
        param = GaussianParameter(0.05 * rng.standard_normal(d), L @ L.T + 0.01 * np.eye(d))
        out.append(sample_ensemble(fam, param, N, seed + l))
    return out
