"""Fibers of sphere maps and the geometry that constrains them.

For the multiplication map the fiber over p is the graph {(x, x^-1 p)},
so exact fibers are available in closed form; numeric extraction by
projected gradient descent covers arbitrary maps. On top of fiber
samples this module checks the pair inequalities that constrain fibers
of sqrt(2)-Lipschitz maps homotopic to the multiplication map, fits the
isometry whose graph a fiber is, measures fiber parallelism, evaluates
the extension of the multiplication map to the sqrt(2)-sphere (the
scaled Hopf fibration), and builds the cycle surface whose intersection
with fibers certifies the pair inequalities on instances.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .algebra import conj_arrays, mul_arrays
from .lipmap import HopfMap, SphereMap, differential, tangent_frame
from .sphere import (
    AntipodalError,
    exp_map,
    geo_dist,
    geodesic,
    log_map,
    product_dist,
    sample_sphere,
    stable_dist,
    tangent_basis,
)

SQRT2 = math.sqrt(2.0)
TWO_PI = 2.0 * math.pi

__all__ = [
    "DegenerateFitError",
    "FiberSample",
    "FittedIsometry",
    "Arc",
    "CycleSurface",
    "fiber_exact_mult",
    "fiber_numeric",
    "check_pair_inequalities",
    "fit_isometry",
    "check_parallel",
    "fiber_separation",
    "hopf_eval",
    "hopf_singular_values",
    "arc_alpha",
    "build_cycle",
    "cycle_intersection_probe",
]


class DegenerateFitError(ValueError):
    """Fiber points do not determine an isometery fit."""


@dataclass
class FiberSample:
    """Finite approximation of a fiber f^-1(p).

    points has shape (N, 2, n+1); residuals[i] = d(f(points[i]), p).
    An empty sample is an extraction-failure report, not an error.
    """

    base_point: np.ndarray = field(repr=False)
    points: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)
    tol: float = 1e-12
    dropped: int = 0

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def failed(self) -> bool:
        return len(self) == 0

    @property
    def xs(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def ys(self) -> np.ndarray:
        return self.points[:, 1]


def fiber_exact_mult(p: np.ndarray, xs: np.ndarray) -> FiberSample:
    """Exact multiplication-map fiber points (x, x^-1 p) over the given xs."""
    p = np.asarray(p, dtype=np.float64)
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    if xs.shape[-1] != p.shape[-1]:
        raise ValueError("dimension mismatch between p and xs")
    if p.shape[-1] not in (2, 4, 8):
        raise ValueError("fiber points must live in an algebra unit sphere")
    ys = mul_arrays(conj_arrays(xs), np.broadcast_to(p, xs.shape))
    points = np.stack([xs, ys], axis=1)
    residuals = stable_dist(mul_arrays(xs, ys), p)
    return FiberSample(base_point=p, points=points, residuals=residuals)


def fiber_numeric(
    map: SphereMap,
    p: np.ndarray,
    seeds: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> FiberSample:
    """Extract fiber points of an arbitrary map by projected descent.

    From each seed, descends d(f(q), p)^2 with backtracking steps until
    the residual drops below tol or the iteration cap is hit; seeds that
    fail to converge are dropped and counted. An empty result reports
    extraction failure rather than raising.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    p = np.asarray(p, dtype=np.float64)
    seeds = np.asarray(seeds, dtype=np.float64)
    converged = []
    residuals = []
    dropped = 0
    for seed in seeds:
        q = np.array(seed, dtype=np.float64)
        ok = False
        for _ in range(max_iter):
            img = map(q)
            dist = float(stable_dist(img, p))
            if dist < tol:
                ok = True
                break
            try:
                u = log_map(img, p)
            except AntipodalError:
                # move off the cut locus in an arbitrary tangent direction
                u = math.pi * tangent_basis(img)[0]
            jac = differential(map, q)
            frame = tangent_frame(map.domain, q)
            coeffs = jac.T @ u
            step_vec = np.tensordot(coeffs, frame, axes=(0, 0))
            value = 0.5 * dist * dist
            eta = 0.5
            for _ in range(30):
                cand = _retract(map, q, eta * step_vec)
                cand_dist = float(stable_dist(map(cand), p))
                if 0.5 * cand_dist * cand_dist < value:
                    q = cand
                    break
                eta *= 0.5
            else:
                break
        if ok:
            converged.append(q)
            residuals.append(float(stable_dist(map(q), p)))
        else:
            dropped += 1
    if converged:
        pts = np.stack(converged)
        res = np.array(residuals)
    else:
        pts = np.empty((0,) + seeds.shape[1:])
        res = np.empty(0)
    return FiberSample(base_point=p, points=pts, residuals=res, tol=tol, dropped=dropped)


def _retract(map: SphereMap, q: np.ndarray, vec: np.ndarray) -> np.ndarray:
    out = q + vec
    if out.ndim == 2:
        return out / np.linalg.norm(out, axis=-1, keepdims=True)
    return map.domain.scale * out / np.linalg.norm(out)


def check_pair_inequalities(q1, q2):
    """Residuals of the fiber pair inequalities; vectorizes over pairs.

    For product points (x1, y1), (x2, y2) with a = d(x1, x2) and
    b = d(y1, y2), returns

        r1 = (2 pi - a)^2 + b^2 - 2 pi^2,
        r2 = a^2 + (2 pi - b)^2 - 2 pi^2.

    A pair drawn from a common fiber of a sqrt(2)-Lipschitz map in the
    multiplication map's homotopy class must have r1 >= 0 and r2 >= 0;
    on exact multiplication fibers both reduce to 2 (a - pi)^2.
    """
    q1 = np.asarray(q1, dtype=np.float64)
    q2 = np.asarray(q2, dtype=np.float64)
    a = stable_dist(q1[..., 0, :], q2[..., 0, :])
    b = stable_dist(q1[..., 1, :], q2[..., 1, :])
    r1 = (TWO_PI - a) ** 2 + b**2 - 2.0 * math.pi**2
    r2 = a**2 + (TWO_PI - b) ** 2 - 2.0 * math.pi**2
    return r1, r2


@dataclass
class FittedIsometry:
    """Orthogonal matrix fitted to a fiber, with its max residual."""

    matrix: np.ndarray = field(repr=False)
    residual: float = 0.0

    def orthogonality_defect(self) -> float:
        a = self.matrix
        return float(np.max(np.abs(a.T @ a - np.eye(a.shape[1]))))


def fit_isometry(fiber: FiberSample) -> FittedIsometry:
    """Orthogonal Procrustes fit of y = A x over the fiber points.

    Minimizes sum |A x_i - y_i|^2 over orthogonal A via the SVD of the
    cross-covariance; no determinant constraint, so orientation-
    reversing isometries (conjugation is one) are admitted. Raises
    DegenerateFitError when the points do not span.
    """
    xs, ys = fiber.xs, fiber.ys
    d = xs.shape[-1]
    if len(fiber) < d:
        raise DegenerateFitError(f"need at least {d} fiber points, got {len(fiber)}")
    cross = xs.T @ ys
    u, sing, vt = _kernels.jacobi_svd(cross)
    if sing[-1] <= 1e-12 * max(1.0, sing[0]):
        raise DegenerateFitError("fiber points are rank deficient")
    matrix = vt.T @ u.T
    residual = float(np.max(np.linalg.norm(xs @ matrix.T - ys, axis=-1)))
    return FittedIsometry(matrix=matrix, residual=residual)


def _min_dist_to_graph(targets: np.ndarray, matrix: np.ndarray, starts: np.ndarray,
                       iters: int = 300) -> np.ndarray:
    """Min over x of sqrt(d(x1,x)^2 + d(y1,Ax)^2), one per target row.

    targets: (N, 2, d) product points; starts: (N, d) initial x guesses.
    Projected gradient descent with per-point backtracking.
    """
    x1 = targets[:, 0]
    y1 = targets[:, 1]
    x = starts.copy()

    def objective(xc):
        return stable_dist(x1, xc) ** 2 + stable_dist(y1, xc @ matrix.T) ** 2

    value = objective(x)
    eta = np.full(x.shape[0], 0.25)
    for _ in range(iters):
        grad = -2.0 * (log_map(x, x1) + log_map(x @ matrix.T, y1) @ matrix)
        cand = exp_map(x, -eta[:, None] * grad)
        cand_value = objective(cand)
        better = cand_value < value
        x = np.where(better[:, None], cand, x)
        value = np.where(better, cand_value, value)
        eta = np.where(better, np.minimum(eta * 1.2, 0.5), eta * 0.5)
        if np.all(eta < 1e-18):
            break
    return np.sqrt(value)


def check_parallel(
    fiberA: FiberSample,
    fiberB: FiberSample,
    pA: np.ndarray,
    pB: np.ndarray,
    refine: bool = True,
) -> float:
    """Max deviation of point-to-fiber distances from d(pA, pB)/sqrt(2).

    For each point of fiberA, computes the product-metric distance to
    fiberB (grid minimum over the sample, then local descent over the
    fitted isometry graph) and returns the largest deviation from the
    parallel-fibers prediction d(pA, pB)/sqrt(2).
    """
    if len(fiberB) < 1000:
        warnings.warn(
            "fiberB has fewer than 1000 points; expect mesh-limited accuracy",
            stacklevel=2,
        )
    expected = float(geo_dist(pA, pB)) / SQRT2
    dists, guesses = _grid_min_dists(fiberA.points, fiberB.points)
    if refine:
        fit = None
        try:
            fit = fit_isometry(fiberB)
        except DegenerateFitError:
            pass
        if fit is not None and fit.residual < 1e-8:
            dists = _min_dist_to_graph(fiberA.points, fit.matrix, guesses)
        else:
            warnings.warn(
                "fiberB is not a clean isometry graph; using grid minimum only",
                stacklevel=2,
            )
    return float(np.max(np.abs(dists - expected)))


def _grid_min_dists(points_a: np.ndarray, points_b: np.ndarray, chunk: int = 256):
    """Min product distance from each a-point to the b sample.

    Returns (distances, argmin x-coordinates of the b sample).
    """
    n_a = points_a.shape[0]
    out = np.empty(n_a)
    arg = np.empty((n_a, points_a.shape[-1]))
    for lo in range(0, n_a, chunk):
        hi = min(lo + chunk, n_a)
        block = product_dist(points_a[lo:hi, None], points_b[None, :])
        idx = np.argmin(block, axis=1)
        out[lo:hi] = block[np.arange(hi - lo), idx]
        arg[lo:hi] = points_b[idx, 0]
    return out, arg


def fiber_separation(fiberA: FiberSample, fiberB: FiberSample) -> float:
    """Minimum product-metric distance between two fiber samples."""
    dists, _ = _grid_min_dists(fiberA.points, fiberB.points)
    return float(np.min(dists))


# ---------------------------------------------------------------------------
# Hopf extension


def _coords(z) -> np.ndarray:
    return np.asarray(getattr(z, "coords", z), dtype=np.float64)


def hopf_eval(z1, z2) -> np.ndarray:
    """(z1, z2) -> (z1 z2, (|z1|^2 - |z2|^2) / 2) on the sqrt(2)-sphere.

    Accepts AlgebraElements or coordinate arrays; requires
    |z1|^2 + |z2|^2 = 2 (a point of the sqrt(2)-sphere) and returns a
    unit vector in R^(n+2). On |z1| = |z2| = 1 this is the value of the
    multiplication map followed by the equatorial inclusion.
    """
    z1 = _coords(z1)
    z2 = _coords(z2)
    if z1.shape != z2.shape:
        raise ValueError("z1 and z2 must have equal dimensions")
    n1 = float(z1 @ z1)
    n2 = float(z2 @ z2)
    if abs(n1 + n2 - 2.0) > 1e-10:
        raise ValueError("off-sphere input: |z1|^2 + |z2|^2 must equal 2")
    prod = mul_arrays(z1, z2)
    return np.concatenate([prod, [(n1 - n2) / 2.0]])


def hopf_singular_values(z1, z2, step: float = 1e-5) -> np.ndarray:
    """Singular values of the extension's differential, submersion-normalized.

    Finite-difference differential in the tangent frame of the
    sqrt(2)-sphere, as a linear operator on the full (2n+1)-dimensional
    tangent space. The map factors as a Riemannian submersion onto the
    sphere of radius 1/sqrt(2) followed by scaling to the unit sphere;
    the constant scale sqrt(2) is divided out, so the expected spectrum
    is n+1 ones and n zeros.
    """
    z1 = _coords(z1)
    z2 = _coords(z2)
    level = int(math.log2(z1.shape[0]))
    hmap = HopfMap(level)
    point = np.concatenate([z1, z2])
    if not hmap.domain.contains(point):
        raise ValueError("off-sphere input")
    jac = differential(hmap, point, mode="finite_difference", step=step)
    sing = _kernels.batch_singular_values(jac[None])[0]
    full = np.zeros(hmap.domain.tangent_dim)
    full[: sing.shape[0]] = sing
    return full / SQRT2


# ---------------------------------------------------------------------------
# The cycle surface


@dataclass
class Arc:
    """Constant-speed circular arc on a sphere, tangent data included."""

    points: np.ndarray = field(repr=False)
    length: float = 0.0
    radius: float = 1.0
    sweep_angle: float = 0.0
    center: np.ndarray = field(default=None, repr=False)
    plane: np.ndarray = field(default=None, repr=False)  # rows e1, e2

    def at(self, ts: np.ndarray) -> np.ndarray:
        theta = np.asarray(ts, dtype=np.float64) * self.sweep_angle
        return (
            self.center
            + self.radius * np.cos(theta)[..., None] * self.plane[0]
            + self.radius * np.sin(theta)[..., None] * self.plane[1]
        )


def arc_alpha(y1: np.ndarray, y2: np.ndarray, tangent: np.ndarray, samples: int = 64) -> Arc:
    """Arc from y1 to y2 leaving y1 in the given unit tangent direction.

    The arc is the piece of the circle cut on the sphere by the plane
    through y1 and y2 with direction tangent, traversed from y1 with
    initial velocity along tangent. Its length never exceeds
    2 pi - d(y1, y2), and the complementary arc (direction -tangent) is
    never shorter than d(y1, y2). For y2 = +-y1 the circle degenerates
    to the great circle in the plane of y1 and the tangent: a full loop
    for y2 = y1, a half loop for y2 = -y1.
    """
    y1 = np.asarray(y1, dtype=np.float64)
    y2 = np.asarray(y2, dtype=np.float64)
    x_dir = np.asarray(tangent, dtype=np.float64)
    if abs(np.linalg.norm(x_dir) - 1.0) > 1e-10:
        raise ValueError("tangent direction must be a unit vector")
    if abs(float(x_dir @ y1)) > 1e-10:
        raise ValueError("direction is not tangent at y1")
    dist = float(geo_dist(y1, y2))
    if dist < 1e-9 or math.pi - dist < 1e-9:
        center = np.zeros_like(y1)
        radius = 1.0
        sweep = TWO_PI if dist < 1e-9 else math.pi
        e1, e2 = y1, x_dir
    else:
        u = y2 - y1
        w = u - (u @ x_dir) * x_dir
        w = w / np.linalg.norm(w)
        beta = float(y1 @ w)
        center = y1 - beta * w
        radius = abs(beta)
        e1 = (y1 - center) / radius
        e2 = x_dir
        rel = y2 - center
        sweep = math.atan2(float(rel @ e2), float(rel @ e1)) % TWO_PI
    ts = np.linspace(0.0, 1.0, samples)
    arc = Arc(
        points=None,
        length=radius * sweep,
        radius=radius,
        sweep_angle=sweep,
        center=center,
        plane=np.stack([e1, e2]),
    )
    arc.points = arc.at(ts)
    return arc


def _geodesic_points(a: np.ndarray, b: np.ndarray, ts: np.ndarray) -> np.ndarray:
    dot = float(np.clip(a @ b, -1.0, 1.0))
    if dot <= -1.0 + 1e-14:
        raise AntipodalError("antipodal endpoints: shortest geodesic is not unique")
    omega = math.acos(dot)
    if omega < 1e-12:
        return np.broadcast_to(a, (ts.shape[0], a.shape[0])).copy()
    return (
        np.sin((1.0 - ts) * omega)[:, None] * a + np.sin(ts * omega)[:, None] * b
    ) / math.sin(omega)


@dataclass
class CycleSurface:
    """Sampled topological sphere joining two product points.

    Curves gamma_X(t) = (beta(t), alpha_X(t)): beta the shortest
    geodesic between the first factors, alpha_X the arc family between
    the second factors indexed by unit tangent directions X at y1.
    """

    endpoint1: np.ndarray = field(repr=False)
    endpoint2: np.ndarray = field(repr=False)
    directions: np.ndarray = field(repr=False)
    t_grid: np.ndarray = field(repr=False)
    points: np.ndarray = field(repr=False)  # (G, T, 2, n+1)
    alpha_lengths: np.ndarray = field(repr=False)
    beta_length: float = 0.0
    gamma_lengths: np.ndarray = field(repr=False, default=None)  # fine polyline sums
    mesh: float = 0.0

    @property
    def flat_points(self) -> np.ndarray:
        g, t, _, d = self.points.shape
        return self.points.reshape(g * t, 2, d)


def _sample_directions(y1: np.ndarray, grid_u: int, seed) -> np.ndarray:
    """Unit tangent directions at y1: both signs on the circle, seeded
    uniform samples in higher dimensions (no regular grids exist there)."""
    frame = tangent_basis(y1)
    n = frame.shape[0]
    if n == 1:
        return np.stack([frame[0], -frame[0]])
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    coeffs = rng.standard_normal((grid_u, n))
    coeffs /= np.linalg.norm(coeffs, axis=1, keepdims=True)
    return coeffs @ frame


def build_cycle(
    x1: np.ndarray,
    y1: np.ndarray,
    x2: np.ndarray,
    y2: np.ndarray,
    grid_u: int = 64,
    grid_t: int = 64,
    seed=0,
    length_samples: int = 8192,
    probe_count: int = 2048,
) -> CycleSurface:
    """Build the cycle surface through (x1, y1) and (x2, y2).

    Every curve gamma_X runs from (x1, y1) to (x2, y2); its length obeys
    the product-metric Pythagoras identity and the bound
    sqrt((2 pi - d(y1, y2))^2 + d(x1, x2)^2). gamma_lengths are measured
    on a fine polyline (length_samples points per curve) independently
    of the stored probe grid. The mesh field is a Monte Carlo covering
    estimate: the largest distance from a random surface point to the
    stored sample.
    """
    if grid_u < 2 or grid_t < 2:
        raise ValueError("grid sizes must be >= 2")
    x1 = np.asarray(x1, dtype=np.float64)
    y1 = np.asarray(y1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    y2 = np.asarray(y2, dtype=np.float64)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    directions = _sample_directions(y1, grid_u, rng)
    ts = np.linspace(0.0, 1.0, grid_t)
    beta_pts = _geodesic_points(x1, x2, ts)
    beta_length = float(geo_dist(x1, x2))

    arcs = [arc_alpha(y1, y2, d, samples=grid_t) for d in directions]
    g = len(arcs)
    d_amb = x1.shape[0]
    points = np.empty((g, grid_t, 2, d_amb))
    for i, arc in enumerate(arcs):
        points[i, :, 0] = beta_pts
        points[i, :, 1] = arc.points
    alpha_lengths = np.array([a.length for a in arcs])

    fine_ts = np.linspace(0.0, 1.0, length_samples)
    beta_fine = _geodesic_points(x1, x2, fine_ts)
    gamma_lengths = np.empty(g)
    for i, arc in enumerate(arcs):
        alpha_fine = arc.at(fine_ts)
        seg = np.hypot(
            stable_dist(beta_fine[:-1], beta_fine[1:]),
            stable_dist(alpha_fine[:-1], alpha_fine[1:]),
        )
        gamma_lengths[i] = float(np.sum(seg))

    mesh = _covering_estimate(points, directions, x1, x2, y1, y2, probe_count, rng)
    return CycleSurface(
        endpoint1=np.stack([x1, y1]),
        endpoint2=np.stack([x2, y2]),
        directions=directions,
        t_grid=ts,
        points=points,
        alpha_lengths=alpha_lengths,
        beta_length=beta_length,
        gamma_lengths=gamma_lengths,
        mesh=mesh,
    )


def _arc_points_at(y1: np.ndarray, y2: np.ndarray, dirs: np.ndarray,
                   ts: np.ndarray) -> np.ndarray:
    """Vectorized arc evaluation: point of alpha_X(t) per (direction, t) row."""
    dist = float(geo_dist(y1, y2))
    g = dirs.shape[0]
    if dist < 1e-9 or math.pi - dist < 1e-9:
        center = np.zeros((g, y1.shape[0]))
        radius = np.ones(g)
        sweep = np.full(g, TWO_PI if dist < 1e-9 else math.pi)
        e1 = np.broadcast_to(y1, dirs.shape)
        e2 = dirs
    else:
        u = y2 - y1
        w = u[None] - (dirs @ u)[:, None] * dirs
        w /= np.linalg.norm(w, axis=1, keepdims=True)
        beta = w @ y1
        center = y1[None] - beta[:, None] * w
        radius = np.abs(beta)
        e1 = np.sign(beta)[:, None] * w
        e2 = dirs
        rel = y2[None] - center
        sweep = np.arctan2(np.einsum("ij,ij->i", rel, e2),
                           np.einsum("ij,ij->i", rel, e1)) % TWO_PI
    theta = ts * sweep
    return center + radius[:, None] * (
        np.cos(theta)[:, None] * e1 + np.sin(theta)[:, None] * e2
    )


def _covering_estimate(points, directions, x1, x2, y1, y2, probe_count, rng) -> float:
    """Monte Carlo covering radius of the stored grid on the surface."""
    n_dir = directions.shape[1] - 1  # tangent sphere dimension at y1
    if n_dir == 1:
        # both tangent directions are stored; only the t grid can miss
        probe_dirs = directions[rng.integers(0, 2, probe_count)]
    else:
        probe_dirs = _sample_directions(y1, probe_count, rng)
    probe_ts = rng.uniform(0.0, 1.0, probe_count)
    probes = np.stack(
        [_geodesic_points(x1, x2, probe_ts), _arc_points_at(y1, y2, probe_dirs, probe_ts)],
        axis=1,
    )
    flat = points.reshape(-1, 2, points.shape[-1])
    worst = 0.0
    for lo in range(0, probe_count, 256):
        hi = min(lo + 256, probe_count)
        block = product_dist(probes[lo:hi, None], flat[None, :])
        worst = max(worst, float(np.max(np.min(block, axis=1))))
    return worst


def cycle_intersection_probe(cycle: CycleSurface, map: SphereMap, p_prime: np.ndarray) -> float:
    """Minimum of d(map(point), p_prime) over the sampled cycle surface."""
    p_prime = np.asarray(p_prime, dtype=np.float64)
    images = map.batch(cycle.flat_points)
    return float(np.min(geo_dist(images, p_prime)))
