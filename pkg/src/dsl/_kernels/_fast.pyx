# Compiled implementation of the hot kernels; contracts match _ref.py.

import numpy as np

cimport numpy as cnp
from libc.math cimport atan2, cos, fabs, sin, sqrt

cnp.import_array()

DEF MAX_DIM = 8
DEF JACOBI_EPS = 1e-15
DEF JACOBI_SWEEPS = 60


# ---------------------------------------------------------------------------
# Cayley-Dickson products

cdef void _mul_rec(double* a, double* b, double* out, int dim) noexcept nogil:
    # (a,b)(c,d) = (ac - conj(d) b, da + b conj(c))
    cdef double p[MAX_DIM]
    cdef double q[MAX_DIM]
    cdef double t1[MAX_DIM]
    cdef double t2[MAX_DIM]
    cdef int h, i
    if dim == 1:
        out[0] = a[0] * b[0]
        return
    h = dim // 2
    # conj(d) b  and  ac
    p[0] = b[h]
    for i in range(1, h):
        p[i] = -b[h + i]
    _mul_rec(p, a + h, t1, h)
    _mul_rec(a, b, t2, h)
    for i in range(h):
        out[i] = t2[i] - t1[i]
    # da  and  b conj(c)
    _mul_rec(b + h, a, t1, h)
    q[0] = b[0]
    for i in range(1, h):
        q[i] = -b[i]
    _mul_rec(a + h, q, t2, h)
    for i in range(h):
        out[h + i] = t1[i] + t2[i]


def cd_mul(a, b):
    a_arr = np.ascontiguousarray(a, dtype=np.float64)
    b_arr = np.ascontiguousarray(b, dtype=np.float64)
    if a_arr.shape != b_arr.shape:
        a_arr, b_arr = np.broadcast_arrays(a_arr, b_arr)
        a_arr = np.ascontiguousarray(a_arr)
        b_arr = np.ascontiguousarray(b_arr)
    cdef int dim = a_arr.shape[a_arr.ndim - 1]
    if dim not in (1, 2, 4, 8):
        raise ValueError("coordinate length must be 1, 2, 4 or 8")
    shape = a_arr.shape
    cdef cnp.ndarray[double, ndim=2] av = a_arr.reshape(-1, dim)
    cdef cnp.ndarray[double, ndim=2] bv = b_arr.reshape(-1, dim)
    cdef cnp.ndarray[double, ndim=2] out = np.empty_like(av)
    cdef Py_ssize_t i, n = av.shape[0]
    with nogil:
        for i in range(n):
            _mul_rec(&av[i, 0], &bv[i, 0], &out[i, 0], dim)
    return out.reshape(shape)


def cd_conj(a):
    out = np.array(a, dtype=np.float64, copy=True)
    out[..., 1:] *= -1.0
    return out


# ---------------------------------------------------------------------------
# One-sided Jacobi SVD

cdef double _sweep(double[:, ::1] a, double[:, ::1] v, Py_ssize_t m, Py_ssize_t n,
                   bint with_v) noexcept nogil:
    cdef Py_ssize_t p, q, i
    cdef double app, aqq, apq, scale, theta, c, s, tp, off
    off = 0.0
    for p in range(n - 1):
        for q in range(p + 1, n):
            app = 0.0
            aqq = 0.0
            apq = 0.0
            for i in range(m):
                app += a[i, p] * a[i, p]
                aqq += a[i, q] * a[i, q]
                apq += a[i, p] * a[i, q]
            scale = sqrt(app * aqq)
            if scale == 0.0 or fabs(apq) <= JACOBI_EPS * scale:
                continue
            if fabs(apq) / scale > off:
                off = fabs(apq) / scale
            theta = 0.5 * atan2(2.0 * apq, app - aqq)
            c = cos(theta)
            s = sin(theta)
            for i in range(m):
                tp = c * a[i, p] + s * a[i, q]
                a[i, q] = -s * a[i, p] + c * a[i, q]
                a[i, p] = tp
            if with_v:
                for i in range(n):
                    tp = c * v[i, p] + s * v[i, q]
                    v[i, q] = -s * v[i, p] + c * v[i, q]
                    v[i, p] = tp
    return off


def jacobi_svd(a):
    a_arr = np.array(a, dtype=np.float64, copy=True, order="C")
    if a_arr.ndim != 2:
        raise ValueError("expected a single matrix")
    cdef bint transposed = a_arr.shape[0] < a_arr.shape[1]
    if transposed:
        a_arr = np.ascontiguousarray(a_arr.T)
    cdef Py_ssize_t m = a_arr.shape[0], n = a_arr.shape[1]
    v_arr = np.eye(n)
    cdef double[:, ::1] av = a_arr
    cdef double[:, ::1] vv = v_arr
    cdef int sweep
    for sweep in range(JACOBI_SWEEPS):
        if _sweep(av, vv, m, n, True) <= JACOBI_EPS:
            break
    sing = np.sqrt(np.sum(a_arr * a_arr, axis=0))
    order = np.argsort(-sing, kind="stable")
    sing = sing[order]
    a_arr = a_arr[:, order]
    v_arr = v_arr[:, order]
    u = np.zeros_like(a_arr)
    nz = sing > 0.0
    u[:, nz] = a_arr[:, nz] / sing[nz]
    if transposed:
        return v_arr, sing, u.T
    return u, sing, v_arr.T


def batch_singular_values(a):
    a_arr = np.array(a, dtype=np.float64, copy=True, order="C")
    if a_arr.ndim != 3:
        raise ValueError("expected a batch of matrices (N, m, n)")
    if a_arr.shape[1] < a_arr.shape[2]:
        a_arr = np.ascontiguousarray(np.transpose(a_arr, (0, 2, 1)))
    cdef Py_ssize_t count = a_arr.shape[0], m = a_arr.shape[1], n = a_arr.shape[2]
    cdef double[:, :, ::1] av = a_arr
    cdef double[:, ::1] dummy = np.empty((1, 1))
    cdef Py_ssize_t k
    cdef int sweep
    with nogil:
        for k in range(count):
            for sweep in range(JACOBI_SWEEPS):
                if _sweep(av[k], dummy, m, n, False) <= JACOBI_EPS:
                    break
    sing = np.sqrt(np.einsum("ijk,ijk->ik", a_arr, a_arr))
    sing.sort(axis=1)
    return sing[:, ::-1]


# ---------------------------------------------------------------------------
# Torus integrators, profile r(x) = 2 - cos(4 pi x) hardcoded

DEF TWO_PI = 6.283185307179586


cdef inline double _profile(double x) noexcept nogil:
    return 2.0 - cos(2.0 * TWO_PI * x)


cdef inline void _level_rhs(double x, double* dx, double* dy) noexcept nogil:
    cdef double r = _profile(x)
    cdef double arg = 1.0 - 1.0 / (r * r)
    cdef double root = sqrt(arg) if arg > 0.0 else 0.0
    cdef double xm = x % 1.0
    if xm < 0.0:
        xm += 1.0
    dx[0] = 1.0 / r
    dy[0] = (root if xm < 0.5 else -root) / r


cdef inline void _grad_rhs(double x, double* dx, double* dy) noexcept nogil:
    cdef double r = _profile(x)
    cdef double arg = 1.0 - 1.0 / (r * r)
    cdef double root = sqrt(arg) if arg > 0.0 else 0.0
    cdef double xm = x % 1.0
    if xm < 0.0:
        xm += 1.0
    dx[0] = -root if xm < 0.5 else root
    dy[0] = 1.0 / (r * r)


ctypedef void (*rhs_t)(double, double*, double*) noexcept nogil


cdef inline void _rk4_step(rhs_t rhs, double x, double y, double h,
                           double* nx, double* ny) noexcept nogil:
    cdef double k1x, k1y, k2x, k2y, k3x, k3y, k4x, k4y
    rhs(x, &k1x, &k1y)
    rhs(x + 0.5 * h * k1x, &k2x, &k2y)
    rhs(x + 0.5 * h * k2x, &k3x, &k3y)
    rhs(x + h * k3x, &k4x, &k4y)
    nx[0] = x + h * (k1x + 2.0 * k2x + 2.0 * k3x + k4x) / 6.0
    ny[0] = y + h * (k1y + 2.0 * k2y + 2.0 * k3y + k4y) / 6.0


def integrate_level_curve(double a, double step):
    cdef Py_ssize_t cap = <Py_ssize_t> (4.0 / step) + 16
    cdef cnp.ndarray[double, ndim=1] ts = np.empty(cap + 2)
    cdef cnp.ndarray[double, ndim=1] xs = np.empty(cap + 2)
    cdef cnp.ndarray[double, ndim=1] ys = np.empty(cap + 2)
    cdef double t = 0.0, x = 0.0, y = a
    cdef double nx, ny, mx, my, lo, hi, mid
    cdef Py_ssize_t count = 1, i, j
    ts[0] = 0.0
    xs[0] = 0.0
    ys[0] = a
    with nogil:
        for i in range(cap):
            _rk4_step(_level_rhs, x, y, step, &nx, &ny)
            if nx >= 1.0:
                lo = 0.0
                hi = step
                for j in range(80):
                    mid = 0.5 * (lo + hi)
                    _rk4_step(_level_rhs, x, y, mid, &mx, &my)
                    if mx < 1.0:
                        lo = mid
                    else:
                        hi = mid
                _rk4_step(_level_rhs, x, y, hi, &nx, &ny)
                t += hi
                ts[count] = t
                xs[count] = nx
                ys[count] = ny
                count += 1
                break
            x = nx
            y = ny
            t += step
            ts[count] = t
            xs[count] = x
            ys[count] = y
            count += 1
    return ts[:count].copy(), xs[:count].copy(), ys[:count].copy()


def integrate_gradient_flow(double x0, double y0, double step, n_steps):
    cdef Py_ssize_t n = int(n_steps)
    cdef cnp.ndarray[double, ndim=1] ts = np.empty(n + 1)
    cdef cnp.ndarray[double, ndim=1] xs = np.empty(n + 1)
    cdef cnp.ndarray[double, ndim=1] ys = np.empty(n + 1)
    cdef double t = 0.0, x = x0, y = y0
    cdef Py_ssize_t i
    ts[0] = t
    xs[0] = x
    ys[0] = y
    with nogil:
        for i in range(1, n + 1):
            _rk4_step(_grad_rhs, x, y, step, &x, &y)
            t += step
            ts[i] = t
            xs[i] = x
            ys[i] = y
    return ts, xs, ys
