"""Intrinsic geometry of round spheres and products of spheres.

Points are unit coordinate arrays in R^(n+1); product points are pairs
of equal-dimension sphere points stacked as shape (2, n+1). Distances
are geodesic (radians); the product carries the L2 product metric
sqrt(d1^2 + d2^2). The diagonal {(x, x)} is then isometric to the
sphere scaled by sqrt(2).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "AntipodalError",
    "SpherePoint",
    "TangentVector",
    "ProductPoint",
    "geo_dist",
    "stable_dist",
    "product_dist",
    "sample_sphere",
    "tangent_basis",
    "geodesic",
    "log_map",
    "exp_map",
]

_UNIT_TOL = 1e-12
_TANGENT_TOL = 1e-10


class AntipodalError(ValueError):
    """Shortest geodesic is ambiguous between antipodal endpoints."""


@dataclass(frozen=True)
class SpherePoint:
    """A unit vector in R^(n+1); n is the sphere dimension."""

    coords: np.ndarray = field(repr=False)

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.float64)
        if coords.ndim != 1 or coords.shape[0] < 2:
            raise ValueError("sphere point needs a 1-d coordinate array in R^(n+1)")
        if abs(np.linalg.norm(coords) - 1.0) > _UNIT_TOL:
            raise ValueError("sphere point coordinates must have unit norm")
        object.__setattr__(self, "coords", coords)

    @property
    def dim(self) -> int:
        return self.coords.shape[0] - 1

    def __repr__(self) -> str:
        return f"SpherePoint({self.coords.tolist()})"


@dataclass(frozen=True)
class TangentVector:
    """A vector attached to, and orthogonal to, a sphere point."""

    base: SpherePoint
    vec: np.ndarray = field(repr=False)

    def __post_init__(self):
        vec = np.asarray(self.vec, dtype=np.float64)
        if vec.shape != self.base.coords.shape:
            raise ValueError("tangent vector dimension mismatch")
        if abs(float(vec @ self.base.coords)) > _TANGENT_TOL:
            raise ValueError("tangent vector is not orthogonal to its base point")
        object.__setattr__(self, "vec", vec)


@dataclass(frozen=True)
class ProductPoint:
    """A point of S^n x S^n, two unit factors of equal dimension."""

    first: SpherePoint
    second: SpherePoint

    def __post_init__(self):
        if self.first.dim != self.second.dim:
            raise ValueError("product point factors must have equal dimensions")

    @property
    def array(self) -> np.ndarray:
        return np.stack([self.first.coords, self.second.coords])


def _check_same_dim(a: np.ndarray, b: np.ndarray):
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"dimension mismatch: {a.shape[-1]} != {b.shape[-1]}")


def geo_dist(a, b):
    """Geodesic distance on the unit sphere, in [0, pi].

    Vectorizes over leading axes. Inner products are clamped into
    [-1, 1] before arccos to guard against roundoff at the endpoints.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_same_dim(a, b)
    dot = np.clip(np.sum(a * b, axis=-1), -1.0, 1.0)
    return np.arccos(dot)


def stable_dist(a, b):
    """Geodesic distance with uniform relative accuracy.

    Same metric as geo_dist, but evaluated through chords near the two
    ends of [0, pi], where arccos of the inner product loses relative
    precision: nearly coincident points use 2 asin(|a - b| / 2) and
    nearly antipodal ones pi - 2 asin(|a + b| / 2).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_same_dim(a, b)
    dot = np.clip(np.sum(a * b, axis=-1), -1.0, 1.0)
    near = 2.0 * np.arcsin(np.clip(np.linalg.norm(a - b, axis=-1) / 2.0, 0.0, 1.0))
    far = np.pi - 2.0 * np.arcsin(np.clip(np.linalg.norm(a + b, axis=-1) / 2.0, 0.0, 1.0))
    return np.where(dot > 0.5, near, np.where(dot < -0.5, far, np.arccos(dot)))


def product_dist(p, q):
    """Product metric distance sqrt(d(p1,q1)^2 + d(p2,q2)^2).

    p, q: arrays of shape (..., 2, n+1).
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    d1 = geo_dist(p[..., 0, :], q[..., 0, :])
    d2 = geo_dist(p[..., 1, :], q[..., 1, :])
    return np.hypot(d1, d2)


def sample_sphere(n: int, count: int, seed) -> np.ndarray:
    """count i.i.d. uniform points on S^n, shape (count, n+1).

    Normalized standard Gaussian vectors; deterministic for a fixed
    seed (accepts an int seed or a Generator).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    v = rng.standard_normal((count, n + 1))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def tangent_basis(x: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the tangent space at x, shape (n, n+1).

    Gram-Schmidt over the coordinate vectors, skipping the one most
    parallel to x. Deterministic; no continuity across base points.
    """
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[0]
    skip = int(np.argmax(np.abs(x)))
    rows = np.empty((d, d))
    rows[0] = x / np.linalg.norm(x)
    k = 1
    for i in range(d):
        if i == skip:
            continue
        v = np.zeros(d)
        v[i] = 1.0
        for j in range(k):
            v -= (v @ rows[j]) * rows[j]
        rows[k] = v / np.linalg.norm(v)
        k += 1
    return rows[1:]


def batch_tangent_basis(xs: np.ndarray) -> np.ndarray:
    """tangent_basis vectorized over a batch: (N, n+1) -> (N, n, n+1).

    Same algorithm and arithmetic per point as tangent_basis.
    """
    xs = np.asarray(xs, dtype=np.float64)
    n_pts, d = xs.shape
    skip = np.argmax(np.abs(xs), axis=1)
    cols = np.arange(d)
    keep = cols[None, :] != skip[:, None]
    idx = np.broadcast_to(cols, (n_pts, d))[keep].reshape(n_pts, d - 1)
    rows = np.zeros((n_pts, d, d))
    rows[:, 0] = xs / np.linalg.norm(xs, axis=1, keepdims=True)
    for k in range(1, d):
        v = np.zeros((n_pts, d))
        v[np.arange(n_pts), idx[:, k - 1]] = 1.0
        for j in range(k):
            v -= np.einsum("ij,ij->i", v, rows[:, j])[:, None] * rows[:, j]
        rows[:, k] = v / np.linalg.norm(v, axis=1, keepdims=True)
    return rows[:, 1:]


def geodesic(a, b, t: float) -> np.ndarray:
    """Constant-speed shortest geodesic between non-antipodal points.

    geodesic(a, b, 0) = a and geodesic(a, b, 1) = b; the parameter is
    proportional to arc length.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_same_dim(a, b)
    dot = float(np.clip(a @ b, -1.0, 1.0))
    if dot <= -1.0 + 1e-14:
        raise AntipodalError("antipodal endpoints: shortest geodesic is not unique")
    omega = np.arccos(dot)
    if omega < 1e-12:
        return a.copy()
    return (np.sin((1.0 - t) * omega) * a + np.sin(t * omega) * b) / np.sin(omega)


def log_map(base, target):
    """Tangent vector at base pointing to target, with |log| = d(base, target).

    Vectorizes over leading axes; returns the zero vector at coincident
    points and raises for antipodal pairs.
    """
    base = np.asarray(base, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    dot = np.clip(np.sum(base * target, axis=-1, keepdims=True), -1.0, 1.0)
    if np.any(dot <= -1.0 + 1e-14):
        raise AntipodalError("log map undefined for antipodal points")
    rest = target - dot * base
    rest_norm = np.linalg.norm(rest, axis=-1, keepdims=True)
    angle = np.arccos(dot)
    safe = np.where(rest_norm > 0.0, rest_norm, 1.0)
    return np.where(rest_norm > 0.0, angle * rest / safe, 0.0)


def exp_map(base, vec):
    """Geodesic exponential: walk from base along tangent vec by |vec| radians."""
    base = np.asarray(base, dtype=np.float64)
    vec = np.asarray(vec, dtype=np.float64)
    norm = np.linalg.norm(vec, axis=-1, keepdims=True)
    safe = np.where(norm > 0.0, norm, 1.0)
    return np.cos(norm) * base + np.sin(norm) * (vec / safe)
