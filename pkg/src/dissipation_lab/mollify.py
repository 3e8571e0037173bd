"""Admissible mollifiers, their quadrature, and convolution of sampled fields.

A kernel is stored as a symmetric node set ``z_k`` inside its support ball with
positive weights ``W_k``, exact profile values ``rho(z_k)`` and analytic
gradients.  The discrete mass ``sum W_k rho(z_k)`` is exactly one after
normalisation, and the node set is invariant under ``z -> -z`` so evenness
holds node by node.

Every profile is a finite mixture of linear images of the bump
``rho0(w) = exp(-1/(1 - |w|^2))``:

    rho(z) = sum_k c_k rho0(E_k z).

``standard-bump`` is the single image ``E = I / radius``; ``anisotropic-bump``
is ``E = A`` rescaled so the ellipse fits the support ball;
``flow-averaged-bump`` averages images ``exp(t G)`` over ``t in [-1, 1]``.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from . import _kernels
from .errors import InputError, ParameterError, PreconditionError, ResolutionError
from .grid import SampledField, interior_window

MIN_RESOLUTION = 17
FAMILIES = ("standard-bump", "anisotropic-bump", "flow-averaged-bump")


@dataclass(frozen=True)
class KernelProfile:
    family: str = "standard-bump"
    radius: float = 1.0
    matrix: tuple = None        # anisotropy A (anisotropic-bump)
    generator: tuple = None     # G (flow-averaged-bump)
    levels: int = 48            # mixture levels (flow-averaged-bump)
    taper: float = 0.1          # fraction of the t-range with tapered weights

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown kernel family {self.family!r}")
        if self.radius not in (1.0, 0.5):
            raise ParameterError("support radius must be 1 or 1/2")
        for name in ("matrix", "generator"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, tuple(map(tuple, np.atleast_2d(val).tolist())))

    @property
    def tag(self):
        parts = [self.family, f"r={self.radius:g}"]
        if self.family == "anisotropic-bump":
            parts.append("A=" + ",".join(f"{v:.6g}" for row in self.matrix for v in row))
        if self.family == "flow-averaged-bump":
            parts.append("G=" + ",".join(f"{v:.6g}" for row in self.generator for v in row))
            parts.append(f"K={self.levels}")
        return ":".join(parts)


@dataclass(frozen=True, eq=False)
class Kernel:
    dim: int
    support_radius: float
    nodes: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    gradients: np.ndarray
    radial: bool
    half_support: bool
    kernel_id: str
    profile: KernelProfile = None
    # closed form: z -> (values, gradients), already normalised
    evaluator: object = field(default=None, repr=False)

    @property
    def mass(self):
        return float(np.sum(self.weights * self.values))

    def masses(self):
        """Per-node masses W_k rho(z_k)."""
        return self.weights * self.values

    def second_moments(self):
        m = self.masses()
        return np.einsum("k,ki,kj->ij", m, self.nodes, self.nodes)

    def abs_mass(self):
        return float(np.sum(self.weights * np.abs(self.values)))

    def evaluate(self, z):
        if self.evaluator is None:
            raise InputError("kernel has no closed form")
        return self.evaluator(np.asarray(z, dtype=float).reshape(-1, self.dim))

    def is_nonnegative(self):
        return bool(np.all(self.values >= 0))


def _base_nodes(dim, resolution):
    h = 1.0 / resolution
    c = (np.arange(-resolution, resolution) + 0.5) * h
    w = np.stack(np.meshgrid(*([c] * dim), indexing="ij"), -1).reshape(-1, dim)
    return w[np.einsum("pi,pi->p", w, w) < 1.0], h**dim


def _fit_to_ball(mats, radius):
    """Scale all images so the largest ellipse semi-axis equals ``radius``."""
    smin = min(np.linalg.svd(E, compute_uv=False).min() for E in mats)
    return [E * (1.0 / (radius * smin)) for E in mats]


def _is_conformal(E, tol=1e-12):
    s = np.linalg.svd(E, compute_uv=False)
    return s.max() - s.min() <= tol * s.max()


def _flow_levels(profile, dim):
    K = int(profile.levels)
    if K < 2:
        raise ParameterError("flow-averaged kernels need at least two levels")
    G = np.asarray(profile.generator, dtype=float)
    if G.shape != (dim, dim):
        raise ParameterError("generator shape does not match the dimension")
    t = (np.arange(K) + 0.5) / K * 2.0 - 1.0
    w = np.ones(K)
    if profile.taper > 0:
        edge = 1.0 - profile.taper
        s = (np.abs(t) - edge) / profile.taper
        m = s > 0
        w[m] = np.exp(1.0 - 1.0 / np.maximum(1.0 - s[m] ** 2, 1e-300))
    return [expm(ti * G) for ti in t], w / w.sum()


def build_kernel(profile=None, dim=2, resolution=MIN_RESOLUTION):
    """Discretise an admissible kernel profile on its support ball."""
    profile = profile or KernelProfile()
    if dim not in (1, 2):
        raise InputError("kernels are built for dim 1 or 2")
    if resolution < MIN_RESOLUTION:
        raise ResolutionError(f"resolution {resolution} below {MIN_RESOLUTION} nodes per radius")
    r = profile.radius
    if profile.family == "standard-bump":
        mats, mix = [np.eye(dim) / r], np.ones(1)
    elif profile.family == "anisotropic-bump":
        A = np.asarray(profile.matrix, dtype=float)
        if A.shape != (dim, dim):
            raise ParameterError("anisotropy matrix shape does not match the dimension")
        det = np.linalg.det(A)
        if not np.isfinite(det) or det <= 0 or np.linalg.cond(A) > 1e12:
            raise ParameterError("anisotropy matrix must be nonsingular with det > 0")
        mats, mix = _fit_to_ball([A], r), np.ones(1)
    else:
        if profile.generator is None:
            raise ParameterError("flow-averaged kernels need a generator matrix")
        mats, mix = _flow_levels(profile, dim)
        mats = _fit_to_ball(mats, r)
    mats = np.array(mats)
    dets = np.abs(np.linalg.det(mats))
    coefs = mix * dets

    w, hd = _base_nodes(dim, resolution)
    nodes, weights, own = [], [], []
    for E, d, c in zip(mats, dets, coefs):
        nodes.append(w @ np.linalg.inv(E).T)
        weights.append(np.full(len(w), hd / d))
        own.append(c * np.exp(-1.0 / (1.0 - np.einsum("pi,pi->p", w, w))))
    nodes = np.concatenate(nodes)
    weights = np.concatenate(weights)
    own = np.concatenate(own)
    vals, grads = _kernels.bump_mixture(nodes, mats, coefs)
    if len(mats) > 1:
        # partition of unity: node k of image j integrates the share c_j rho0(E_j z) / rho(z)
        # nodes where every image underflows carry no mass
        share = np.divide(own, vals, out=np.zeros_like(own), where=vals > 0)
        weights = weights * share
    mass = float(np.sum(weights * vals))
    coefs = coefs / mass
    vals = vals / mass
    grads = grads / mass

    def evaluator(z, _m=mats, _c=coefs):
        return _kernels.bump_mixture(z, _m, _c)

    radial = all(_is_conformal(E) for E in mats)
    kid = f"{profile.tag}:d={dim}:n={resolution}"
    return Kernel(dim, r, nodes, weights, vals, grads, radial, r <= 0.5, kid, profile, evaluator)


# ---------------------------------------------------------------------------
# convolution


def _check_pair(u, rho, ell):
    if rho.dim != u.grid.dim:
        raise InputError("kernel and field dimensions differ")
    if ell <= 0:
        raise InputError("scale must be positive")
    u.grid.check_scale(ell)


def mollify_points(u, rho, ell, pts, ngrad=0):
    """u * rho_ell and the first ``ngrad`` component gradients at arbitrary points.

    Returns ``(values (n, m), gradients (n, ngrad, d))``.
    """
    _check_pair(u, rho, ell)
    pts = np.asarray(pts, dtype=float).reshape(-1, u.grid.dim)
    reach = ell * rho.support_radius
    for sgn in (-1, 1):
        shifted = pts.copy()
        shifted += sgn * reach
        u.grid.require_inside(shifted, "mollifier support")
        if u.grid.dim == 2:
            shifted = pts + sgn * reach * np.array([1.0, -1.0])
            u.grid.require_inside(shifted, "mollifier support")
    wv = rho.weights * rho.values
    wg = (rho.weights[:, None] * rho.gradients) / ell
    return _kernels.convolve(u.grid, u.flat(), pts, ell * rho.nodes, wv, wg, ngrad)


def double_mollify_points(u, rho, ell, pts):
    """(u_ell)_ell at ``pts`` by nested point quadrature (no intermediate grid)."""
    pts = np.asarray(pts, dtype=float).reshape(-1, u.grid.dim)
    inner = (pts[:, None, :] - ell * rho.nodes[None, :, :]).reshape(-1, u.grid.dim)
    vals, _ = mollify_points(u, rho, ell, inner)
    vals = vals.reshape(len(pts), len(rho.nodes), -1)
    return np.einsum("k,pkc->pc", rho.masses(), vals)


def _window_for(u, rho, ell, margin=None, box=None):
    return interior_window(u.grid, ell * rho.support_radius if margin is None else margin, box)


def mollify(u, rho, ell, with_gradient=False, margin=None, box=None):
    """u_ell = u * rho_ell on the interior window (margin ell * support radius).

    ``box = (lower, upper)`` limits the output to window nodes inside the box.

    With ``with_gradient`` the exact convolution derivative (u * grad rho_ell)
    is returned too, as an array of shape ``counts + (m, d)``.
    """
    _check_pair(u, rho, ell)
    win = _window_for(u, rho, ell, margin, box)
    ngrad = u.components if with_gradient else 0
    wv = rho.weights * rho.values
    wg = (rho.weights[:, None] * rho.gradients) / ell
    vals, grads = _kernels.grid_convolve(u.grid, u.flat(), win.slices, -ell * rho.nodes,
                                         wv, wg, ngrad)
    shape = tuple(win.subgrid.counts)
    out = SampledField(win.subgrid, vals.reshape(shape + (-1,)), u.time, u.name + "_l")
    if with_gradient:
        return out, grads.reshape(shape + (u.components, u.grid.dim))
    return out


def self_convolve(rho):
    """eta = rho * rho for a kernel supported in B_{1/2}.

    Node masses of eta are the exact discrete convolution of the node masses of
    rho, so mollifying twice with rho and once with eta use the same sample
    points and agree to rounding.  Nodes of eta lie on the lattice h Z^d.
    """
    if not rho.half_support:
        raise PreconditionError("self-convolution needs a kernel supported in B_1/2")
    if rho.profile is None or rho.profile.family == "flow-averaged-bump":
        raise PreconditionError("self-convolution needs a single-image lattice kernel")
    n = int(rho.kernel_id.rsplit("n=", 1)[-1])
    if rho.profile.family == "anisotropic-bump":
        raise PreconditionError("self-convolution is implemented for lattice-aligned radial kernels")
    h = rho.support_radius / n
    idx = np.rint(rho.nodes / h - 0.5).astype(np.int64)
    lo = idx.min(axis=0)
    span = idx.max(axis=0) - lo + 1
    size = tuple(2 * span - 1)
    mass = np.zeros(size)
    grad = np.zeros(size + (rho.dim,))
    masses = rho.masses()
    rel = idx - lo
    for k in range(len(masses)):
        tgt = tuple((rel + rel[k]).T)
        np.add.at(mass, tgt, masses[k] * masses)
        np.add.at(grad, tgt, masses[k] * rho.gradients)
    keep = np.argwhere(mass > 0)
    nodes = (keep + 2 * lo + 1) * h
    weights = np.full(len(keep), h**rho.dim)
    vals = mass[tuple(keep.T)] / h**rho.dim
    grads = grad[tuple(keep.T)]
    total = float(np.sum(weights * vals))
    vals = vals / total
    grads = grads / total

    def evaluator(z, _rho=rho, _m=masses / total):
        z = np.asarray(z, dtype=float).reshape(-1, _rho.dim)
        out = np.zeros(len(z))
        g = np.zeros_like(z)
        for zk, mk in zip(_rho.nodes, _m):
            v, dv = _rho.evaluate(z - zk)
            out += mk * v
            g += mk * dv
        return out, g

    return Kernel(rho.dim, 2 * rho.support_radius, nodes, weights, vals, grads,
                  rho.radial, False, f"selfconv({rho.kernel_id})", rho.profile, evaluator)


def commutator_norm(phi, u, rho, ell):
    """sup |(phi u_ell)_ell - phi (u_ell)_ell| over the doubly interior window."""
    u1 = mollify(u, rho, ell)
    pts1 = u1.grid.points()
    phi1 = phi(pts1)[:, None]
    prod = SampledField(u1.grid, (phi1 * u1.flat()).reshape(u1.values.shape), u.time)
    a = mollify(prod, rho, ell)
    b = mollify(u1, rho, ell)
    diff = a.flat() - phi(a.grid.points())[:, None] * b.flat()
    return float(np.max(np.linalg.norm(diff, axis=1)))


def write_kernel_table(rho, path):
    """Node list as a flat text table: z_1..z_d, rho, drho_1..drho_d, w."""
    d = rho.dim
    cols = [f"z{i + 1}" for i in range(d)] + ["rho"] + [f"drho{i + 1}" for i in range(d)] + ["w"]
    data = np.column_stack([rho.nodes, rho.values, rho.gradients, rho.weights])
    with open(path, "w") as fh:
        fh.write(f"# kernel {rho.kernel_id}\n")
        fh.write(",".join(cols) + "\n")
        for row in data:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_kernel_table(path):
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    cols = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    d = (len(cols) - 2) // 2
    return {"nodes": data[:, :d], "values": data[:, d], "gradients": data[:, d + 1:2 * d + 1],
            "weights": data[:, -1]}
