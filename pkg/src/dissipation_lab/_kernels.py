"""Hot loops: multilinear interpolation, kernel quadrature, increment sums.

Each public function dispatches to a numba implementation or a vectorised numpy
twin depending on :func:`dissipation_lab._backend.backend`.  Grid geometry is
passed as plain arrays so the numba signatures stay simple:

    shape    int64[2]    (n0, n1); n1 == 1 for one-dimensional grids
    origin   float64[2]
    spacing  float64[2]
    periodic bool[2]

Sampled values are flattened row-major to ``(n0 * n1, m)``.  Nodes are cell
centred, node ``i`` sits at ``origin + (i + 1/2) * spacing``.
"""
import numpy as np

from ._backend import backend, njit

# ---------------------------------------------------------------------------
# numba implementations


@njit
def _locate(x, o, h, n, per):
    f = (x - o) / h - 0.5
    if per:
        f = f % n
        i0 = int(np.floor(f))
        t = f - i0
        if i0 >= n:
            i0 -= n
        i1 = i0 + 1
        if i1 >= n:
            i1 = 0
    else:
        i0 = int(np.floor(f))
        if i0 < 0:
            i0 = 0
        if i0 > n - 2:
            i0 = n - 2
        t = f - i0
        i1 = i0 + 1
    return i0, i1, t


@njit
def _interp_into(vals, shape, origin, spacing, periodic, dim, x0, x1, out):
    m = vals.shape[1]
    i0, i1, t0 = _locate(x0, origin[0], spacing[0], shape[0], periodic[0])
    if dim == 1:
        for c in range(m):
            a = vals[i0, c]
            out[c] = a + t0 * (vals[i1, c] - a)
        return
    n1 = shape[1]
    j0, j1, t1 = _locate(x1, origin[1], spacing[1], n1, periodic[1])
    for c in range(m):
        v00 = vals[i0 * n1 + j0, c]
        v10 = vals[i1 * n1 + j0, c]
        v01 = vals[i0 * n1 + j1, c]
        v11 = vals[i1 * n1 + j1, c]
        a = v00 + t0 * (v10 - v00)
        b = v01 + t0 * (v11 - v01)
        out[c] = a + t1 * (b - a)


@njit
def _interp_nb(vals, shape, origin, spacing, periodic, dim, pts):
    npts = pts.shape[0]
    m = vals.shape[1]
    out = np.empty((npts, m))
    tmp = np.empty(m)
    for p in range(npts):
        x1 = pts[p, 1] if dim == 2 else 0.0
        _interp_into(vals, shape, origin, spacing, periodic, dim, pts[p, 0], x1, tmp)
        for c in range(m):
            out[p, c] = tmp[c]
    return out


@njit
def _convolve_nb(vals, shape, origin, spacing, periodic, dim, pts, offs, wv, wg, ngrad):
    npts = pts.shape[0]
    m = vals.shape[1]
    nk = offs.shape[0]
    out = np.zeros((npts, m))
    gout = np.zeros((npts, ngrad, dim))
    tmp = np.empty(m)
    for p in range(npts):
        for k in range(nk):
            x0 = pts[p, 0] - offs[k, 0]
            x1 = pts[p, 1] - offs[k, 1] if dim == 2 else 0.0
            _interp_into(vals, shape, origin, spacing, periodic, dim, x0, x1, tmp)
            w = wv[k]
            for c in range(m):
                out[p, c] += w * tmp[c]
            for c in range(ngrad):
                for a in range(dim):
                    gout[p, c, a] += wg[k, a] * tmp[c]
    return out, gout


@njit
def _dr_nb(vals, shape, origin, spacing, periodic, dim, pts, base, offs, wg):
    npts = pts.shape[0]
    m = vals.shape[1]
    nk = offs.shape[0]
    out = np.zeros(npts)
    tmp = np.empty(m)
    for p in range(npts):
        acc = 0.0
        for k in range(nk):
            x0 = pts[p, 0] + offs[k, 0]
            x1 = pts[p, 1] + offs[k, 1] if dim == 2 else 0.0
            _interp_into(vals, shape, origin, spacing, periodic, dim, x0, x1, tmp)
            proj = 0.0
            sq = 0.0
            for c in range(m):
                dlt = tmp[c] - base[p, c]
                sq += dlt * dlt
                if c < dim:
                    proj += wg[k, c] * dlt
            acc += proj * sq
        out[p] = acc
    return out


@njit
def _bump_mixture_nb(z, mats, coefs):
    n = z.shape[0]
    d = z.shape[1]
    nm = mats.shape[0]
    rho = np.zeros(n)
    grad = np.zeros((n, d))
    w = np.empty(d)
    for p in range(n):
        for k in range(nm):
            r2 = 0.0
            for i in range(d):
                s = 0.0
                for j in range(d):
                    s += mats[k, i, j] * z[p, j]
                w[i] = s
                r2 += s * s
            if r2 >= 1.0:
                continue
            q = 1.0 - r2
            v = coefs[k] * np.exp(-1.0 / q)
            rho[p] += v
            fac = -2.0 * v / (q * q)
            # grad of rho0(E z) = E^T grad rho0(w)
            for j in range(d):
                s = 0.0
                for i in range(d):
                    s += mats[k, i, j] * w[i]
                grad[p, j] += fac * s
    return rho, grad


@njit
def _wrap(i, n, per):
    if per:
        i = i % n
        if i < 0:
            i += n
        return i
    if i < 0:
        return 0
    if i > n - 1:
        return n - 1
    return i


@njit
def _shift_setup(f):
    i0 = int(np.floor(f))
    return i0, f - i0


@njit
def _grid_shift_into(vals, shape, periodic, dim, lo, cnt, f0, f1, buf, bidx0, bidx1):
    """buf[p, q, c] = u interpolated at window node (p, q) displaced by (f0, f1) cells."""
    m = vals.shape[2]
    i0, t0 = _shift_setup(f0)
    if dim == 1:
        for p in range(cnt[0]):
            a0 = _wrap(lo[0] + p + i0, shape[0], periodic[0])
            a1 = _wrap(lo[0] + p + i0 + 1, shape[0], periodic[0])
            for c in range(m):
                v0 = vals[a0, 0, c]
                buf[p, 0, c] = v0 + t0 * (vals[a1, 0, c] - v0)
        return
    j0, t1 = _shift_setup(f1)
    for q in range(cnt[1]):
        bidx0[q] = _wrap(lo[1] + q + j0, shape[1], periodic[1])
        bidx1[q] = _wrap(lo[1] + q + j0 + 1, shape[1], periodic[1])
    for p in range(cnt[0]):
        a0 = _wrap(lo[0] + p + i0, shape[0], periodic[0])
        a1 = _wrap(lo[0] + p + i0 + 1, shape[0], periodic[0])
        r0 = vals[a0]
        r1 = vals[a1]
        bp = buf[p]
        for q in range(cnt[1]):
            b0 = bidx0[q]
            b1 = bidx1[q]
            for c in range(m):
                v00 = r0[b0, c]
                v01 = r0[b1, c]
                a = v00 + t0 * (r1[b0, c] - v00)
                b = v01 + t0 * (r1[b1, c] - v01)
                bp[q, c] = a + t1 * (b - a)


@njit
def _grid_convolve_nb(vals, shape, periodic, dim, lo, cnt, shifts, wv, wg, ngrad):
    m = vals.shape[2]
    out = np.zeros((cnt[0], cnt[1], m))
    gout = np.zeros((cnt[0], cnt[1], ngrad, dim))
    buf = np.empty((cnt[0], cnt[1], m))
    bidx0 = np.empty(cnt[1], dtype=np.int64)
    bidx1 = np.empty(cnt[1], dtype=np.int64)
    for k in range(shifts.shape[0]):
        _grid_shift_into(vals, shape, periodic, dim, lo, cnt, shifts[k, 0], shifts[k, 1], buf,
                         bidx0, bidx1)
        w = wv[k]
        for p in range(cnt[0]):
            for q in range(cnt[1]):
                for c in range(m):
                    out[p, q, c] += w * buf[p, q, c]
                for c in range(ngrad):
                    for a in range(dim):
                        gout[p, q, c, a] += wg[k, a] * buf[p, q, c]
    return out, gout


@njit
def _grid_dr_nb(vals, shape, periodic, dim, lo, cnt, shifts, wg):
    m = vals.shape[2]
    out = np.zeros((cnt[0], cnt[1]))
    buf = np.empty((cnt[0], cnt[1], m))
    bidx0 = np.empty(cnt[1], dtype=np.int64)
    bidx1 = np.empty(cnt[1], dtype=np.int64)
    for k in range(shifts.shape[0]):
        _grid_shift_into(vals, shape, periodic, dim, lo, cnt, shifts[k, 0], shifts[k, 1], buf,
                         bidx0, bidx1)
        for p in range(cnt[0]):
            for q in range(cnt[1]):
                proj = 0.0
                sq = 0.0
                for c in range(m):
                    dlt = buf[p, q, c] - vals[lo[0] + p, lo[1] + q, c]
                    sq += dlt * dlt
                    if c < dim:
                        proj += wg[k, c] * dlt
                out[p, q] += proj * sq
    return out


# ---------------------------------------------------------------------------
# numpy twins


def _locate_np(x, o, h, n, per):
    f = (x - o) / h - 0.5
    if per:
        f = np.mod(f, n)
        i0 = np.floor(f).astype(np.int64)
        t = f - i0
        i0 = np.where(i0 >= n, i0 - n, i0)
        i1 = i0 + 1
        i1 = np.where(i1 >= n, 0, i1)
    else:
        i0 = np.clip(np.floor(f).astype(np.int64), 0, n - 2)
        t = f - i0
        i1 = i0 + 1
    return i0, i1, t


def _interp_np(vals, shape, origin, spacing, periodic, dim, pts):
    i0, i1, t0 = _locate_np(pts[:, 0], origin[0], spacing[0], shape[0], periodic[0])
    t0 = t0[:, None]
    if dim == 1:
        a = vals[i0]
        return a + t0 * (vals[i1] - a)
    n1 = shape[1]
    j0, j1, t1 = _locate_np(pts[:, 1], origin[1], spacing[1], n1, periodic[1])
    t1 = t1[:, None]
    v00 = vals[i0 * n1 + j0]
    v10 = vals[i1 * n1 + j0]
    v01 = vals[i0 * n1 + j1]
    v11 = vals[i1 * n1 + j1]
    a = v00 + t0 * (v10 - v00)
    b = v01 + t0 * (v11 - v01)
    return a + t1 * (b - a)


def _convolve_np(vals, shape, origin, spacing, periodic, dim, pts, offs, wv, wg, ngrad):
    npts = pts.shape[0]
    m = vals.shape[1]
    out = np.zeros((npts, m))
    gout = np.zeros((npts, ngrad, dim))
    for k in range(offs.shape[0]):
        tmp = _interp_np(vals, shape, origin, spacing, periodic, dim, pts - offs[k])
        out += wv[k] * tmp
        if ngrad:
            gout += tmp[:, :ngrad, None] * wg[k][None, None, :]
    return out, gout


def _dr_np(vals, shape, origin, spacing, periodic, dim, pts, base, offs, wg):
    out = np.zeros(pts.shape[0])
    for k in range(offs.shape[0]):
        dlt = _interp_np(vals, shape, origin, spacing, periodic, dim, pts + offs[k]) - base
        proj = dlt[:, :dim] @ wg[k]
        out += proj * np.einsum("pc,pc->p", dlt, dlt)
    return out


def _bump_mixture_np(z, mats, coefs):
    rho = np.zeros(z.shape[0])
    grad = np.zeros_like(z)
    for E, c in zip(mats, coefs):
        w = z @ E.T
        r2 = np.einsum("pi,pi->p", w, w)
        inside = r2 < 1.0
        q = 1.0 - r2[inside]
        v = c * np.exp(-1.0 / q)
        rho[inside] += v
        grad[inside] += (-2.0 * v / (q * q))[:, None] * (w[inside] @ E)
    return rho, grad


def _axis_index(lo, cnt, i0, n, per):
    idx = lo + np.arange(cnt) + i0
    if per:
        return np.mod(idx, n), np.mod(idx + 1, n)
    return np.clip(idx, 0, n - 1), np.clip(idx + 1, 0, n - 1)


def _grid_shift_np(vals, shape, periodic, dim, lo, cnt, f0, f1):
    i0 = int(np.floor(f0))
    t0 = f0 - i0
    a0, a1 = _axis_index(lo[0], cnt[0], i0, shape[0], periodic[0])
    if dim == 1:
        v0 = vals[a0, :1]
        return v0 + t0 * (vals[a1, :1] - v0)
    j0 = int(np.floor(f1))
    t1 = f1 - j0
    b0, b1 = _axis_index(lo[1], cnt[1], j0, shape[1], periodic[1])
    v00 = vals[np.ix_(a0, b0)]
    v10 = vals[np.ix_(a1, b0)]
    v01 = vals[np.ix_(a0, b1)]
    v11 = vals[np.ix_(a1, b1)]
    a = v00 + t0 * (v10 - v00)
    b = v01 + t0 * (v11 - v01)
    return a + t1 * (b - a)


def _grid_convolve_np(vals, shape, periodic, dim, lo, cnt, shifts, wv, wg, ngrad):
    m = vals.shape[2]
    out = np.zeros((cnt[0], cnt[1], m))
    gout = np.zeros((cnt[0], cnt[1], ngrad, dim))
    for k in range(shifts.shape[0]):
        buf = _grid_shift_np(vals, shape, periodic, dim, lo, cnt, shifts[k, 0], shifts[k, 1])
        out += wv[k] * buf
        if ngrad:
            gout += buf[:, :, :ngrad, None] * wg[k][None, None, None, :]
    return out, gout


def _grid_dr_np(vals, shape, periodic, dim, lo, cnt, shifts, wg):
    base = vals[lo[0]:lo[0] + cnt[0], lo[1]:lo[1] + cnt[1]]
    out = np.zeros((cnt[0], cnt[1]))
    for k in range(shifts.shape[0]):
        dlt = _grid_shift_np(vals, shape, periodic, dim, lo, cnt, shifts[k, 0], shifts[k, 1]) - base
        proj = dlt[..., :dim] @ wg[k]
        out += proj * np.einsum("pqc,pqc->pq", dlt, dlt)
    return out


# ---------------------------------------------------------------------------
# dispatch


def _geometry(grid):
    shape = np.array(list(grid.counts) + [1] * (2 - grid.dim), dtype=np.int64)
    origin = np.array(list(grid.origin) + [0.0] * (2 - grid.dim), dtype=np.float64)
    spacing = np.array(list(grid.spacing) + [1.0] * (2 - grid.dim), dtype=np.float64)
    periodic = np.array(list(grid.periodic) + [False] * (2 - grid.dim), dtype=np.bool_)
    return shape, origin, spacing, periodic


def _as_pts(pts, dim):
    pts = np.ascontiguousarray(np.asarray(pts, dtype=np.float64).reshape(-1, dim))
    if dim == 1:
        # numba kernels index column 1 only when dim == 2
        return np.ascontiguousarray(np.concatenate([pts, np.zeros_like(pts)], axis=1))
    return pts


def interpolate(grid, flat_values, pts):
    """Multilinear interpolation of flattened samples at ``pts`` (n, dim)."""
    geo = _geometry(grid)
    p = _as_pts(pts, grid.dim)
    vals = np.ascontiguousarray(flat_values, dtype=np.float64)
    if backend() == "numba":
        return _interp_nb(vals, *geo, grid.dim, p)
    return _interp_np(vals, *geo, grid.dim, p[:, : grid.dim] if grid.dim == 2 else p)


def convolve(grid, flat_values, pts, offsets, wv, wg=None, ngrad=0):
    """Sum_k wv_k u(x - offsets_k) and Sum_k wg_k u_c(x - offsets_k) for c < ngrad."""
    geo = _geometry(grid)
    dim = grid.dim
    p = _as_pts(pts, dim)
    offs = _as_pts(offsets, dim)
    vals = np.ascontiguousarray(flat_values, dtype=np.float64)
    wv = np.ascontiguousarray(wv, dtype=np.float64)
    if wg is None:
        wg = np.zeros((offs.shape[0], dim))
    wg = np.ascontiguousarray(np.asarray(wg, dtype=np.float64).reshape(-1, dim))
    if backend() == "numba":
        return _convolve_nb(vals, *geo, dim, p, offs, wv, wg, int(ngrad))
    return _convolve_np(vals, *geo, dim, p, offs, wv, wg, int(ngrad))


def dr_sums(grid, flat_values, pts, base, offsets, wg):
    """Sum_k (wg_k . d_k) |d_k|^2 with d_k = u(x + offsets_k) - base(x)."""
    geo = _geometry(grid)
    dim = grid.dim
    p = _as_pts(pts, dim)
    offs = _as_pts(offsets, dim)
    vals = np.ascontiguousarray(flat_values, dtype=np.float64)
    base = np.ascontiguousarray(base, dtype=np.float64)
    wg = np.ascontiguousarray(np.asarray(wg, dtype=np.float64).reshape(-1, dim))
    if backend() == "numba":
        return _dr_nb(vals, *geo, dim, p, base, offs, wg)
    return _dr_np(vals, *geo, dim, p, base, offs, wg)


def bump_mixture(z, mats, coefs):
    """Evaluate sum_k coefs_k * exp(-1/(1-|E_k z|^2)) and its gradient."""
    z = np.ascontiguousarray(z, dtype=np.float64)
    mats = np.ascontiguousarray(mats, dtype=np.float64)
    coefs = np.ascontiguousarray(coefs, dtype=np.float64)
    if backend() == "numba":
        return _bump_mixture_nb(z, mats, coefs)
    return _bump_mixture_np(z, mats, coefs)


def _grid_args(grid, flat_values, window_slices, displacements):
    shape, _, spacing, periodic = _geometry(grid)
    vals = np.ascontiguousarray(flat_values, dtype=np.float64).reshape(shape[0], shape[1], -1)
    lo = np.array([sl.start for sl in window_slices] + [0] * (2 - grid.dim), dtype=np.int64)
    cnt = np.array([sl.stop - sl.start for sl in window_slices] + [1] * (2 - grid.dim),
                   dtype=np.int64)
    disp = np.asarray(displacements, dtype=np.float64).reshape(-1, grid.dim)
    shifts = np.zeros((disp.shape[0], 2))
    shifts[:, : grid.dim] = disp / spacing[: grid.dim]
    return vals, shape, periodic, lo, cnt, np.ascontiguousarray(shifts)


def grid_convolve(grid, flat_values, window_slices, displacements, wv, wg=None, ngrad=0):
    """Quadrature sums at the nodes of a window, sampling u at node + displacement_k.

    Same sums as :func:`convolve` at grid nodes, but each displacement is
    applied to the whole window at once so memory is streamed.  Returns
    ``(out (n, m), gout (n, ngrad, dim))`` flattened row-major over the window.
    """
    dim = grid.dim
    vals, shape, periodic, lo, cnt, shifts = _grid_args(grid, flat_values, window_slices,
                                                        displacements)
    wv = np.ascontiguousarray(wv, dtype=np.float64)
    if wg is None:
        wg = np.zeros((shifts.shape[0], dim))
    wg = np.ascontiguousarray(np.asarray(wg, dtype=np.float64).reshape(-1, dim))
    fn = _grid_convolve_nb if backend() == "numba" else _grid_convolve_np
    out, gout = fn(vals, shape, periodic, dim, lo, cnt, shifts, wv, wg, int(ngrad))
    n = int(cnt[0] * cnt[1])
    return out.reshape(n, -1), gout.reshape(n, int(ngrad), dim)


def grid_dr_sums(grid, flat_values, window_slices, displacements, wg):
    """Sum_k (wg_k . d_k)|d_k|^2 at window nodes, d_k = u(node + displacement_k) - u(node)."""
    dim = grid.dim
    vals, shape, periodic, lo, cnt, shifts = _grid_args(grid, flat_values, window_slices,
                                                        displacements)
    wg = np.ascontiguousarray(np.asarray(wg, dtype=np.float64).reshape(-1, dim))
    fn = _grid_dr_nb if backend() == "numba" else _grid_dr_np
    return fn(vals, shape, periodic, dim, lo, cnt, shifts, wg).reshape(-1)
