"""Riemann sphere of unit diameter resting on the complex plane at the origin.

Scalar functions take and return :class:`SpherePoint`; the ``*_array``
helpers do the same on numpy arrays of shape ``(..., 3)`` and are what the
distance pipelines use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, PointAtInfinityError

__all__ = [
    "CENTER",
    "NORTH",
    "SOUTH",
    "SpherePoint",
    "inverse_stereo",
    "stereo",
    "chordal_distance",
    "geodesic_distance",
    "sphere_density_factor",
    "to_sphere",
    "chordal_matrix",
]

CENTER = np.array([0.0, 0.0, 0.5])
RADIUS = 0.5
_ON_SPHERE_TOL = 1e-10


@dataclass(frozen=True)
class SpherePoint:
    x: float
    y: float
    z: float

    def __post_init__(self):
        r = math.sqrt(self.x**2 + self.y**2 + (self.z - 0.5) ** 2)
        if abs(r - RADIUS) > _ON_SPHERE_TOL:
            if r == 0.0:
                raise InvalidArgument("the centre of the sphere has no radial projection")
            # pull drifted points back onto the sphere along the ray from the centre
            s = RADIUS / r
            object.__setattr__(self, "x", self.x * s)
            object.__setattr__(self, "y", self.y * s)
            object.__setattr__(self, "z", 0.5 + (self.z - 0.5) * s)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @classmethod
    def from_array(cls, r) -> "SpherePoint":
        x, y, z = (float(v) for v in r)
        return cls(x, y, z)


NORTH = SpherePoint(0.0, 0.0, 1.0)
SOUTH = SpherePoint(0.0, 0.0, 0.0)


def inverse_stereo(c: complex) -> SpherePoint:
    c = complex(c)
    if not (math.isfinite(c.real) and math.isfinite(c.imag)):
        raise InvalidArgument(f"cannot project non-finite value {c}")
    return SpherePoint.from_array(to_sphere(c))


def stereo(p: SpherePoint) -> complex:
    if p.z > 0.5:
        # on the sphere 1 - z == (x^2 + y^2) / z; avoids cancellation near the pole
        rho2 = p.x**2 + p.y**2
        if rho2 == 0.0:
            raise PointAtInfinityError("the north pole projects to the point at infinity")
        k = p.z / rho2
    else:
        k = 1.0 / (1.0 - p.z)
    return complex(p.x * k, p.y * k)


def chordal_distance(r1: SpherePoint, r2: SpherePoint) -> float:
    return float(np.linalg.norm(r1.as_array() - r2.as_array()))


def geodesic_distance(r1: SpherePoint, r2: SpherePoint) -> float:
    # half the central angle; atan2 of |u - v| and |u + v| stays accurate for
    # nearly coincident and nearly antipodal points where acos does not
    u = 2.0 * (r1.as_array() - CENTER)
    v = 2.0 * (r2.as_array() - CENTER)
    return math.atan2(float(np.linalg.norm(u - v)), float(np.linalg.norm(u + v)))


def sphere_density_factor(c: complex) -> float:
    """Factor ``(r + r**3) / 2`` with ``r = |c|`` relating a planar density
    to its image on the sphere."""
    r = abs(complex(c))
    return 0.5 * (r + r**3)


def to_sphere(c) -> np.ndarray:
    """Vectorized inverse projection: complex array of shape S -> real (*S, 3)."""
    c = np.asarray(c, dtype=complex)
    m2 = c.real**2 + c.imag**2
    inv = 1.0 / (1.0 + m2)
    return np.stack([c.real * inv, c.imag * inv, m2 * inv], axis=-1)


def chordal_matrix(r1: np.ndarray, r2: np.ndarray) -> np.ndarray:
    """Pairwise Euclidean distances between two stacks of sphere points."""
    diff = r1[:, None, :] - r2[None, :, :]
    return np.sqrt(np.einsum("ikj,ikj->ik", diff, diff))
