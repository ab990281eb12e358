"""Integer toral automorphisms, eigen data, and arithmetic on T^2 x S^1.

Points live on the 3-torus with coordinates (x1, x2, theta), each taken
modulo 1.  Tangent vectors split into a toral part (2-vector) and a circle
part (scalar).  All norms and angles downstream are measured in the
orthogonal-by-convention frame (e_s, e_u, d/dtheta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NotHyperbolic


def circle_dist(t1, t2):
    """Distance on R/Z: min over integers n of |t1 - t2 + n|.  Vectorized."""
    r = np.mod(np.asarray(t1, dtype=float) - np.asarray(t2, dtype=float), 1.0)
    d = np.minimum(r, 1.0 - r)
    if np.ndim(d) == 0:
        return float(d)
    return d


def eigen_data(matrix):
    """Stable eigenvalue in (0,1) and unit eigenvectors of a hyperbolic SL(2,Z) matrix.

    Returns (lam, e_s, e_u) with A e_s = lam e_s and A e_u = (1/lam) e_u.
    Eigenvectors are unit length, oriented so the first component is positive
    (second positive when the first vanishes).
    """
    m = np.asarray(matrix)
    if m.shape != (2, 2):
        raise NotHyperbolic("matrix must be 2x2, got shape %s" % (m.shape,))
    if not np.all(m == np.round(m)):
        raise NotHyperbolic("matrix entries must be integers")
    a, b, c, d = (int(m[0, 0]), int(m[0, 1]), int(m[1, 0]), int(m[1, 1]))
    det = a * d - b * c
    tr = a + d
    if det != 1:
        raise NotHyperbolic("determinant must be 1, got %d" % det)
    if abs(tr) <= 2:
        raise NotHyperbolic("|trace| must exceed 2 for hyperbolicity, got %d" % tr)
    if tr < 0:
        raise NotHyperbolic(
            "trace %d < -2 gives a negative stable eigenvalue; use the negated matrix" % tr
        )
    s = math.sqrt(tr * tr - 4)
    lam = (tr - s) / 2.0
    lam_u = (tr + s) / 2.0

    def unit_eigvec(ev):
        # rows of (A - ev*I) are parallel; b != 0 for any hyperbolic integer case
        if b != 0:
            v = np.array([float(b), ev - a])
        else:
            v = np.array([ev - d, float(c)])
        v = v / np.linalg.norm(v)
        if v[0] < 0 or (v[0] == 0 and v[1] < 0):
            v = -v
        return v

    e_s = unit_eigvec(lam)
    e_u = unit_eigvec(lam_u)
    if abs(float(np.cross(e_s, e_u))) < 1e-12:
        raise NotHyperbolic("eigenvectors are not linearly independent")
    return lam, e_s, e_u


@dataclass
class ToralAutomorphism:
    """Hyperbolic element of SL(2,Z) acting on T^2, with cached eigen data."""

    a: int
    b: int
    c: int
    d: int
    lam: float = field(init=False)
    e_s: np.ndarray = field(init=False)
    e_u: np.ndarray = field(init=False)

    def __post_init__(self):
        self.lam, self.e_s, self.e_u = eigen_data([[self.a, self.b], [self.c, self.d]])

    @classmethod
    def from_matrix(cls, matrix):
        m = np.asarray(matrix)
        return cls(int(m[0, 0]), int(m[0, 1]), int(m[1, 0]), int(m[1, 1]))

    @property
    def matrix(self):
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=float)

    def act(self, x):
        """Apply the matrix to a toral point (mod 1)."""
        return np.mod(self.matrix @ np.asarray(x, dtype=float), 1.0)


@dataclass(frozen=True)
class Point3:
    """Point of T^2 x S^1; representatives are reduced into [0,1)."""

    x1: float
    x2: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "x1", float(np.mod(self.x1, 1.0)))
        object.__setattr__(self, "x2", float(np.mod(self.x2, 1.0)))
        object.__setattr__(self, "theta", float(np.mod(self.theta, 1.0)))

    @property
    def x(self):
        return np.array([self.x1, self.x2])


def wrap_point(x1, x2, theta):
    """Reduce raw coordinates into the fundamental domain [0,1)^3."""
    return Point3(x1, x2, theta)


@dataclass(frozen=True)
class Tangent3:
    """Tangent vector: toral 2-vector part plus circle part."""

    v: np.ndarray
    t: float

    def __post_init__(self):
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))
        object.__setattr__(self, "t", float(self.t))
