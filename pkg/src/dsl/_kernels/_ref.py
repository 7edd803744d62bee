"""Pure numpy reference implementation of the hot kernels.

Same contracts as the compiled extension in _fast.pyx; used as the
fallback backend and as the ground truth for backend parity tests.
"""

import math

import numpy as np

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# Cayley-Dickson products, convention (a,b)(c,d) = (ac - conj(d)b, da + b conj(c))


def cd_conj(a):
    out = np.array(a, dtype=np.float64, copy=True)
    out[..., 1:] *= -1.0
    return out


def cd_mul(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    dim = a.shape[-1]
    if dim == 1:
        return a * b
    h = dim // 2
    p, q = a[..., :h], a[..., h:]
    r, s = b[..., :h], b[..., h:]
    return np.concatenate(
        [cd_mul(p, r) - cd_mul(cd_conj(s), q), cd_mul(s, p) + cd_mul(q, cd_conj(r))],
        axis=-1,
    )


# ---------------------------------------------------------------------------
# One-sided Jacobi SVD for small matrices

_JACOBI_EPS = 1e-15
_JACOBI_SWEEPS = 60


def jacobi_svd(a):
    """Full SVD of one small matrix: a = u @ diag(s) @ vt, s descending.

    Columns of u associated with (numerically) zero singular values are
    left as zero vectors; callers needing full rank must check s.
    """
    a = np.array(a, dtype=np.float64, copy=True)
    m, n = a.shape
    transposed = m < n
    if transposed:
        a = a.T.copy()
        m, n = n, m
    v = np.eye(n)
    for _ in range(_JACOBI_SWEEPS):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                app = a[:, p] @ a[:, p]
                aqq = a[:, q] @ a[:, q]
                apq = a[:, p] @ a[:, q]
                scale = math.sqrt(app * aqq)
                if scale == 0.0 or abs(apq) <= _JACOBI_EPS * scale:
                    continue
                off = max(off, abs(apq) / scale)
                theta = 0.5 * math.atan2(2.0 * apq, app - aqq)
                c, s = math.cos(theta), math.sin(theta)
                ap = c * a[:, p] + s * a[:, q]
                a[:, q] = -s * a[:, p] + c * a[:, q]
                a[:, p] = ap
                vp = c * v[:, p] + s * v[:, q]
                v[:, q] = -s * v[:, p] + c * v[:, q]
                v[:, p] = vp
        if off <= _JACOBI_EPS:
            break
    sing = np.sqrt(np.sum(a * a, axis=0))
    order = np.argsort(-sing, kind="stable")
    sing = sing[order]
    a = a[:, order]
    v = v[:, order]
    u = np.zeros_like(a)
    nz = sing > 0.0
    u[:, nz] = a[:, nz] / sing[nz]
    if transposed:
        return v, sing, u.T
    return u, sing, v.T


def batch_singular_values(a):
    """Singular values of a batch of small matrices, descending per row.

    a: (N, m, n) -> (N, min(m, n)). Vectorized one-sided Jacobi across
    the batch; every matrix sees the same deterministic sweep order.
    """
    a = np.array(a, dtype=np.float64, copy=True)
    if a.ndim != 3:
        raise ValueError("expected a batch of matrices (N, m, n)")
    _, m, n = a.shape
    if m < n:
        a = np.transpose(a, (0, 2, 1)).copy()
        m, n = n, m
    for _ in range(_JACOBI_SWEEPS):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                ap = a[:, :, p]
                aq = a[:, :, q]
                app = np.einsum("ij,ij->i", ap, ap)
                aqq = np.einsum("ij,ij->i", aq, aq)
                apq = np.einsum("ij,ij->i", ap, aq)
                scale = np.sqrt(app * aqq)
                active = np.abs(apq) > _JACOBI_EPS * scale
                if not active.any():
                    continue
                off = max(off, float(np.max(np.abs(apq[active]) / scale[active])))
                theta = np.where(active, 0.5 * np.arctan2(2.0 * apq, app - aqq), 0.0)
                c = np.cos(theta)[:, None]
                s = np.sin(theta)[:, None]
                new_p = c * ap + s * aq
                a[:, :, q] = -s * ap + c * aq
                a[:, :, p] = new_p
        if off <= _JACOBI_EPS:
            break
    sing = np.sqrt(np.einsum("ijk,ijk->ik", a, a))
    sing.sort(axis=1)
    return sing[:, ::-1]


# ---------------------------------------------------------------------------
# Torus integrators, profile r(x) = 2 - cos(4 pi x) hardcoded


def _profile(x):
    return 2.0 - math.cos(2.0 * TWO_PI * x)


def _level_rhs(x):
    r = _profile(x)
    root = math.sqrt(max(0.0, 1.0 - 1.0 / (r * r)))
    sign = 1.0 if (x % 1.0) < 0.5 else -1.0
    return 1.0 / r, sign * root / r


def _grad_rhs(x):
    r = _profile(x)
    root = math.sqrt(max(0.0, 1.0 - 1.0 / (r * r)))
    sign = 1.0 if (x % 1.0) < 0.5 else -1.0
    return -sign * root, 1.0 / (r * r)


def _rk4(rhs, x, y, h):
    k1x, k1y = rhs(x)
    k2x, k2y = rhs(x + 0.5 * h * k1x)
    k3x, k3y = rhs(x + 0.5 * h * k2x)
    k4x, k4y = rhs(x + h * k3x)
    dx = h * (k1x + 2.0 * k2x + 2.0 * k3x + k4x) / 6.0
    dy = h * (k1y + 2.0 * k2y + 2.0 * k3y + k4y) / 6.0
    return x + dx, y + dy


def integrate_level_curve(a, step):
    """Integrate the unit-speed level curve from (0, a) until x reaches 1.

    Returns (t, x, y) sample arrays with x strictly increasing in [0, 1]
    and y unwrapped. The final sample lands on x = 1 via a bisected
    partial step, so the caller can read the closure defect off y[-1].
    """
    ts, xs, ys = [0.0], [0.0], [float(a)]
    t, x, y = 0.0, 0.0, float(a)
    # x' = 1/r >= 1/3 guarantees progress; cap guards a broken step
    max_steps = int(4.0 / step) + 16
    for _ in range(max_steps):
        nx, ny = _rk4(_level_rhs, x, y, step)
        if nx >= 1.0:
            lo, hi = 0.0, step
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                mx, _ = _rk4(_level_rhs, x, y, mid)
                if mx < 1.0:
                    lo = mid
                else:
                    hi = mid
            nx, ny = _rk4(_level_rhs, x, y, hi)
            t += hi
            ts.append(t)
            xs.append(nx)
            ys.append(ny)
            break
        x, y = nx, ny
        t += step
        ts.append(t)
        xs.append(x)
        ys.append(y)
    return np.array(ts), np.array(xs), np.array(ys)


def integrate_gradient_flow(x0, y0, step, n_steps):
    """Integrate the metric gradient flow of the level function.

    Returns (t, x, y) with both coordinates unwrapped.
    """
    n_steps = int(n_steps)
    ts = np.empty(n_steps + 1)
    xs = np.empty(n_steps + 1)
    ys = np.empty(n_steps + 1)
    t, x, y = 0.0, float(x0), float(y0)
    ts[0], xs[0], ys[0] = t, x, y
    for i in range(1, n_steps + 1):
        x, y = _rk4(_grad_rhs, x, y, step)
        t += step
        ts[i], xs[i], ys[i] = t, x, y
    return ts, xs, ys
