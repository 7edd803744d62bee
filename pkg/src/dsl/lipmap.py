"""Maps between spheres and their Lipschitz/dilation/degree machinery.

A SphereMap evaluates points of a sphere (or product of spheres) into a
sphere, optionally with an exact differential. Local dilation is the
largest singular value of the differential written in orthonormal
tangent frames; its supremum over samples is a certified lower bound
for the Lipschitz constant, and equals it for the constant-dilation map
kinds handled here. Degree comes in two flavors: exact winding for
circle maps and a Monte Carlo signed-Jacobian mean for S^n -> S^n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels
from .algebra import MAX_LEVEL, conj_arrays, mul_arrays
from .sphere import (
    batch_tangent_basis,
    geo_dist,
    product_dist,
    sample_sphere,
    stable_dist,
    tangent_basis,
)

SQRT2 = math.sqrt(2.0)

__all__ = [
    "ResolutionError",
    "SphereDomain",
    "ProductDomain",
    "SphereMap",
    "MultiplicationMap",
    "DiagonalSquareMap",
    "HopfMap",
    "ProjectionMap",
    "PointwiseMap",
    "CompositionMap",
    "identity_map",
    "linear_map",
    "conjugation_map",
    "DilationReport",
    "DegreeEstimate",
    "tangent_frame",
    "differential",
    "local_dilation",
    "dilation_report",
    "lipschitz_estimate",
    "degree_winding",
    "degree_jacobian",
    "degree_jacobian_rounded",
    "level_to_sphere_dim",
]


class ResolutionError(ValueError):
    """Angular sampling too coarse to track a winding number."""


def level_to_sphere_dim(level: int) -> int:
    """Algebra level k -> sphere dimension 2**k - 1 of its unit sphere."""
    if not 1 <= level <= MAX_LEVEL:
        raise ValueError(f"level must be in 1..{MAX_LEVEL}, got {level}")
    return 2**level - 1


@dataclass(frozen=True)
class SphereDomain:
    """The round sphere scale * S^dim in R^(dim+1)."""

    dim: int
    scale: float = 1.0

    @property
    def tangent_dim(self) -> int:
        return self.dim

    def contains(self, point: np.ndarray, tol: float = 1e-10) -> bool:
        point = np.asarray(point)
        return point.shape == (self.dim + 1,) and abs(
            np.linalg.norm(point) - self.scale
        ) <= tol * max(1.0, self.scale)

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        return self.scale * sample_sphere(self.dim, count, rng)

    def distance(self, a, b):
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        return self.scale * geo_dist(a / self.scale, b / self.scale)


@dataclass(frozen=True)
class ProductDomain:
    """S^dim x S^dim with the product metric, both factors unit."""

    dim: int

    @property
    def tangent_dim(self) -> int:
        return 2 * self.dim

    def contains(self, point: np.ndarray, tol: float = 1e-10) -> bool:
        point = np.asarray(point)
        return point.shape == (2, self.dim + 1) and bool(
            np.all(np.abs(np.linalg.norm(point, axis=-1) - 1.0) <= tol)
        )

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        first = sample_sphere(self.dim, count, rng)
        second = sample_sphere(self.dim, count, rng)
        return np.stack([first, second], axis=1)

    def distance(self, a, b):
        return product_dist(a, b)


class SphereMap:
    """Base class: evaluable map with an optional exact differential."""

    domain: SphereDomain | ProductDomain
    codomain: SphereDomain
    #: known point-independent local dilation, or None
    constant_dilation: Optional[float] = None

    @property
    def has_exact_differential(self) -> bool:
        return type(self).push is not SphereMap.push

    def __call__(self, point: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def batch(self, points: np.ndarray) -> np.ndarray:
        """Evaluate a batch of points; default falls back to a loop."""
        return np.stack([self(p) for p in points])

    def push(self, point: np.ndarray, tangent: np.ndarray) -> np.ndarray:
        """Exact differential applied to one ambient tangent vector."""
        raise NotImplementedError(f"{type(self).__name__} has no exact differential")

    def push_batch(self, points: np.ndarray, tangents: np.ndarray) -> np.ndarray:
        return np.stack([self.push(p, t) for p, t in zip(points, tangents)])


class MultiplicationMap(SphereMap):
    """The algebra product as a map S^n x S^n -> S^n, n = 2**level - 1."""

    constant_dilation = SQRT2

    def __init__(self, level: int):
        self.level = level
        n = level_to_sphere_dim(level)
        self.domain = ProductDomain(n)
        self.codomain = SphereDomain(n)

    def __call__(self, point):
        return mul_arrays(point[0], point[1])

    def batch(self, points):
        return mul_arrays(points[:, 0], points[:, 1])

    def push(self, point, tangent):
        x, y = point
        tx, ty = tangent
        return mul_arrays(tx, y) + mul_arrays(x, ty)

    def push_batch(self, points, tangents):
        return mul_arrays(tangents[:, 0], points[:, 1]) + mul_arrays(
            points[:, 0], tangents[:, 1]
        )


class DiagonalSquareMap(SphereMap):
    """x -> x^2 pulled to the sphere of radius domain_scale.

    With the default scale sqrt(2) this is the restriction of the
    multiplication map to its diagonal, which is isometric to the
    sqrt(2)-scaled sphere; the local dilation is then sqrt(2)
    everywhere. At unit scale the dilation is 2.
    """

    def __init__(self, level: int, domain_scale: float = SQRT2):
        self.level = level
        n = level_to_sphere_dim(level)
        self.domain = SphereDomain(n, domain_scale)
        self.codomain = SphereDomain(n)
        self.constant_dilation = 2.0 / domain_scale

    def __call__(self, point):
        return mul_arrays(point, point) / self.domain.scale**2

    def batch(self, points):
        return mul_arrays(points, points) / self.domain.scale**2

    def push(self, point, tangent):
        s2 = self.domain.scale**2
        return (mul_arrays(tangent, point) + mul_arrays(point, tangent)) / s2

    def push_batch(self, points, tangents):
        s2 = self.domain.scale**2
        return (mul_arrays(tangents, points) + mul_arrays(points, tangents)) / s2


class HopfMap(SphereMap):
    """(z1, z2) -> (z1 z2, (|z1|^2 - |z2|^2)/2) on the sqrt(2)-sphere.

    Domain: sqrt(2) * S^(2n+1) in R^(2n+2), points are the two algebra
    halves concatenated. The image always lands on the unit sphere
    S^(n+1); restricted to |z1| = |z2| = 1 it is the multiplication map
    followed by the equatorial inclusion. Its local dilation is the
    constant sqrt(2): it is a Riemannian submersion onto the sphere of
    radius 1/sqrt(2), composed with scaling to the unit sphere.
    """

    constant_dilation = SQRT2

    def __init__(self, level: int):
        self.level = level
        n = level_to_sphere_dim(level)
        self.half = n + 1
        self.domain = SphereDomain(2 * n + 1, SQRT2)
        self.codomain = SphereDomain(n + 1)

    def __call__(self, point):
        z1, z2 = point[: self.half], point[self.half :]
        prod = mul_arrays(z1, z2)
        return np.concatenate([prod, [(z1 @ z1 - z2 @ z2) / 2.0]])

    def batch(self, points):
        z1, z2 = points[:, : self.half], points[:, self.half :]
        prod = mul_arrays(z1, z2)
        last = (np.sum(z1 * z1, axis=-1) - np.sum(z2 * z2, axis=-1)) / 2.0
        return np.concatenate([prod, last[:, None]], axis=-1)

    def push(self, point, tangent):
        z1, z2 = point[: self.half], point[self.half :]
        t1, t2 = tangent[: self.half], tangent[self.half :]
        prod = mul_arrays(t1, z2) + mul_arrays(z1, t2)
        return np.concatenate([prod, [z1 @ t1 - z2 @ t2]])

    def push_batch(self, points, tangents):
        h = self.half
        z1, z2 = points[:, :h], points[:, h:]
        t1, t2 = tangents[:, :h], tangents[:, h:]
        prod = mul_arrays(t1, z2) + mul_arrays(z1, t2)
        last = np.sum(z1 * t1, axis=-1) - np.sum(z2 * t2, axis=-1)
        return np.concatenate([prod, last[:, None]], axis=-1)


class ProjectionMap(SphereMap):
    """Coordinate projection of S^n x S^n onto one factor."""

    constant_dilation = 1.0

    def __init__(self, level: int, axis: int = 0):
        if axis not in (0, 1):
            raise ValueError("axis must be 0 or 1")
        self.axis = axis
        n = level_to_sphere_dim(level)
        self.domain = ProductDomain(n)
        self.codomain = SphereDomain(n)

    def __call__(self, point):
        return np.asarray(point[self.axis], dtype=np.float64)

    def batch(self, points):
        return np.asarray(points[:, self.axis], dtype=np.float64)

    def push(self, point, tangent):
        return np.asarray(tangent[self.axis], dtype=np.float64)

    def push_batch(self, points, tangents):
        return np.asarray(tangents[:, self.axis], dtype=np.float64)


class PointwiseMap(SphereMap):
    """Map defined by a closure, with an optional exact differential."""

    def __init__(
        self,
        fn: Callable[[np.ndarray], np.ndarray],
        domain: SphereDomain | ProductDomain,
        codomain: SphereDomain,
        push_fn: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
        constant_dilation: Optional[float] = None,
    ):
        self.fn = fn
        self.domain = domain
        self.codomain = codomain
        self.push_fn = push_fn
        self.constant_dilation = constant_dilation

    @property
    def has_exact_differential(self) -> bool:
        return self.push_fn is not None

    def __call__(self, point):
        return self.fn(np.asarray(point, dtype=np.float64))

    def push(self, point, tangent):
        if self.push_fn is None:
            raise NotImplementedError("pointwise map has no exact differential")
        return self.push_fn(point, tangent)


class CompositionMap(SphereMap):
    """Sequential composition: maps[0] is applied first."""

    def __init__(self, maps: Sequence[SphereMap]):
        if not maps:
            raise ValueError("empty composition")
        self.maps = list(maps)
        self.domain = self.maps[0].domain
        self.codomain = self.maps[-1].codomain

    @property
    def has_exact_differential(self) -> bool:
        return all(m.has_exact_differential for m in self.maps)

    def __call__(self, point):
        for m in self.maps:
            point = m(point)
        return point

    def batch(self, points):
        for m in self.maps:
            points = m.batch(points)
        return points

    def push(self, point, tangent):
        for m in self.maps:
            tangent = m.push(point, tangent)
            point = m(point)
        return tangent

    def push_batch(self, points, tangents):
        for m in self.maps:
            tangents = m.push_batch(points, tangents)
            points = m.batch(points)
        return tangents


def identity_map(dim: int, scale: float = 1.0) -> PointwiseMap:
    dom = SphereDomain(dim, scale)
    return PointwiseMap(
        lambda p: np.array(p, dtype=np.float64),
        dom,
        dom,
        push_fn=lambda p, t: np.array(t, dtype=np.float64),
        constant_dilation=1.0,
    )


def linear_map(matrix: np.ndarray, scale: float = 1.0) -> PointwiseMap:
    """The sphere map induced by an orthogonal matrix."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if np.max(np.abs(matrix.T @ matrix - np.eye(matrix.shape[1]))) > 1e-10:
        raise ValueError("linear sphere maps require an orthogonal matrix")
    dim = matrix.shape[0] - 1
    dom = SphereDomain(dim, scale)
    return PointwiseMap(
        lambda p: matrix @ p,
        dom,
        SphereDomain(dim, scale),
        push_fn=lambda p, t: matrix @ t,
        constant_dilation=1.0,
    )


def conjugation_map(level: int) -> PointwiseMap:
    """x -> conj(x) on the unit sphere of the level-k algebra."""
    n = level_to_sphere_dim(level)
    signs = np.ones(n + 1)
    signs[1:] = -1.0
    return linear_map(np.diag(signs))


# ---------------------------------------------------------------------------
# Tangent frames and differentials


def tangent_frame(domain, point: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal tangent frame at a point of the domain.

    Sphere domains: (n, n+1) rows. Product domains: (2n, 2, n+1) where
    the first n vectors move the first factor only.
    """
    point = np.asarray(point, dtype=np.float64)
    if isinstance(domain, ProductDomain):
        n = domain.dim
        d = n + 1
        fx = tangent_basis(point[0])
        fy = tangent_basis(point[1])
        frame = np.zeros((2 * n, 2, d))
        frame[:n, 0] = fx
        frame[n:, 1] = fy
        return frame
    return tangent_basis(point / domain.scale)


def _batch_frames(domain, points: np.ndarray) -> np.ndarray:
    if isinstance(domain, ProductDomain):
        n = domain.dim
        d = n + 1
        fx = batch_tangent_basis(points[:, 0])
        fy = batch_tangent_basis(points[:, 1])
        frame = np.zeros((points.shape[0], 2 * n, 2, d))
        frame[:, :n, 0] = fx
        frame[:, n:, 1] = fy
        return frame
    return batch_tangent_basis(points / domain.scale)


def _domain_exp(domain, point: np.ndarray, tangent: np.ndarray, h: float) -> np.ndarray:
    """Walk distance h from point along the unit tangent vector."""
    if isinstance(domain, ProductDomain):
        out = np.empty_like(point)
        for i in (0, 1):
            speed = np.linalg.norm(tangent[i])
            if speed == 0.0:
                out[i] = point[i]
            else:
                ang = h * speed
                out[i] = math.cos(ang) * point[i] + math.sin(ang) * tangent[i] / speed
        return out
    s = domain.scale
    ang = h / s
    return math.cos(ang) * point + s * math.sin(ang) * tangent


def differential(
    map: SphereMap, point: np.ndarray, mode: str = "auto", step: float = 1e-5
) -> np.ndarray:
    """Differential matrix from the domain tangent frame to codomain ambient.

    Columns are the images of tangent_frame(map.domain, point). mode is
    "exact", "finite_difference", or "auto" (exact when available).
    Finite differences use central steps of the given size along domain
    geodesics and project the result onto the codomain tangent space.
    """
    point = np.asarray(point, dtype=np.float64)
    if not map.domain.contains(point):
        raise ValueError("point is not on the map's domain")
    if mode == "auto":
        mode = "exact" if map.has_exact_differential else "finite_difference"
    frame = tangent_frame(map.domain, point)
    if mode == "exact":
        cols = [map.push(point, v) for v in frame]
        return np.stack(cols, axis=1)
    if mode != "finite_difference":
        raise ValueError(f"unknown differential mode: {mode}")
    if step <= 0:
        raise ValueError("finite-difference step must be positive")
    image = map(point)
    normal = image / np.linalg.norm(image)
    cols = []
    for v in frame:
        plus = map(_domain_exp(map.domain, point, v, step))
        minus = map(_domain_exp(map.domain, point, v, -step))
        col = (plus - minus) / (2.0 * step)
        col = col - (col @ normal) * normal
        cols.append(col)
    return np.stack(cols, axis=1)


def _batch_differentials(map: SphereMap, points: np.ndarray) -> np.ndarray:
    """(N, c_ambient, tangent_dim) stack of exact differential matrices."""
    frames = _batch_frames(map.domain, points)
    cols = [map.push_batch(points, frames[:, i]) for i in range(frames.shape[1])]
    return np.stack(cols, axis=2)


def local_dilation(map: SphereMap, point: np.ndarray, mode: str = "auto") -> float:
    """Largest singular value of the tangent-frame differential."""
    jac = differential(map, point, mode=mode)
    return float(_kernels.batch_singular_values(jac[None])[0, 0])


@dataclass
class DilationReport:
    """Sampled local dilations of a map."""

    points: np.ndarray = field(repr=False)
    dilations: np.ndarray = field(repr=False)
    sup: float
    argmax_point: np.ndarray = field(repr=False)
    #: True when the exact differential exists and the map kind has
    #: point-independent dilation, making sup the Lipschitz constant.
    exact: bool = False


def dilation_report(map: SphereMap, n_local: int, seed) -> DilationReport:
    if n_local < 1:
        raise ValueError("n_local must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    points = map.domain.sample(n_local, rng)
    if map.has_exact_differential:
        jacs = _batch_differentials(map, points)
        dils = _kernels.batch_singular_values(jacs)[:, 0]
    else:
        dils = np.array([local_dilation(map, p) for p in points])
    top = int(np.argmax(dils))
    return DilationReport(
        points=points,
        dilations=dils,
        sup=float(dils[top]),
        argmax_point=points[top],
        exact=map.has_exact_differential and map.constant_dilation is not None,
    )


def _stable_domain_dist(domain, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if isinstance(domain, ProductDomain):
        return np.hypot(
            stable_dist(a[..., 0, :], b[..., 0, :]),
            stable_dist(a[..., 1, :], b[..., 1, :]),
        )
    s = domain.scale
    return s * stable_dist(a / s, b / s)


def lipschitz_estimate(
    map: SphereMap, n_local: int, n_pairs: int, seed
) -> tuple[DilationReport, float]:
    """Sampled Lipschitz lower bounds: local dilations and pair quotients.

    Returns (DilationReport, max over pairs of d(f(a), f(b)) / d(a, b)).
    Both are lower bounds for the Lipschitz constant.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    report = dilation_report(map, n_local, rng)
    a = map.domain.sample(n_pairs, rng)
    b = map.domain.sample(n_pairs, rng)
    dom = _stable_domain_dist(map.domain, a, b)
    cod = _stable_domain_dist(map.codomain, map.batch(a), map.batch(b))
    ok = dom > 1e-12
    quotients = cod[ok] / dom[ok]
    return report, float(np.max(quotients))


# ---------------------------------------------------------------------------
# Degree


def degree_winding(map: SphereMap, resolution: int = 4096) -> int:
    """Degree of a circle-to-circle map by tracking the image angle.

    Requires every successive image step to stay below pi; raises
    ResolutionError otherwise.
    """
    if map.domain.tangent_dim != 1 or map.codomain.dim != 1:
        raise ValueError("winding degree needs a circle-to-circle map")
    theta = np.linspace(0.0, 2.0 * math.pi, resolution + 1)
    pts = map.domain.scale * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    img = map.batch(pts)
    ang = np.arctan2(img[:, 1], img[:, 0])
    inc = np.diff(ang)
    inc = (inc + math.pi) % (2.0 * math.pi) - math.pi
    if np.any(np.abs(inc) >= math.pi * (1.0 - 1e-9)):
        raise ResolutionError("angular step of at least pi; increase the resolution")
    return int(round(float(np.sum(inc)) / (2.0 * math.pi)))


@dataclass
class DegreeEstimate:
    """Monte Carlo estimate of a mapping degree."""

    value: float
    stderr: float
    n_samples: int


def degree_jacobian(
    map: SphereMap, n_samples: int, seed, chunk: int = 131072
) -> DegreeEstimate:
    """Monte Carlo degree: mean signed Jacobian over uniform samples.

    The Jacobian is written in positively oriented orthonormal frames
    on both sides, so its mean times vol(domain)/vol(codomain) converges
    to the degree with O(n_samples^(-1/2)) error. Returns the raw float
    and its standard error; see degree_jacobian_rounded.
    """
    if not isinstance(map.domain, SphereDomain):
        raise ValueError("Jacobian degree needs a sphere-to-sphere map")
    if map.domain.dim != map.codomain.dim:
        raise ValueError("Jacobian degree needs equal-dimension spheres")
    if not map.has_exact_differential:
        raise ValueError("Jacobian degree needs an exact differential")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = map.domain.dim
    scale_ratio = (map.domain.scale / map.codomain.scale) ** n
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        points = map.domain.sample(m, rng)
        jacs = _batch_differentials(map, points)  # (m, n+1, n)
        frames = _batch_frames(map.domain, points)  # (m, n, n+1)
        unit_pts = points / map.domain.scale
        m_dom = np.concatenate([unit_pts[:, :, None], np.transpose(frames, (0, 2, 1))], axis=2)
        sign_dom = np.sign(np.linalg.det(m_dom))
        images = map.batch(points) / map.codomain.scale
        m_cod = np.concatenate([images[:, :, None], jacs], axis=2)
        dets = np.linalg.det(m_cod) * sign_dom * scale_ratio
        total += float(np.sum(dets))
        total_sq += float(np.sum(dets * dets))
        done += m
    mean = total / n_samples
    var = max(0.0, total_sq / n_samples - mean * mean)
    stderr = math.sqrt(var / n_samples)
    return DegreeEstimate(value=mean, stderr=stderr, n_samples=n_samples)


def degree_jacobian_rounded(map: SphereMap, n_samples: int, seed) -> int:
    """Convenience wrapper rounding the Monte Carlo degree to an integer."""
    return int(round(degree_jacobian(map, n_samples, seed).value))
