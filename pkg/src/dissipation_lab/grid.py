"""Uniform cell-centred grids, sampled fields, increments and diagnostics.

Node ``i`` along an axis sits at ``origin + (i + 1/2) * spacing`` so that
analytic discontinuities placed on cell faces are never sampled directly.
Field values are stored as an array of shape ``counts + (components,)``.
"""
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DomainError, InputError, ResolutionError

MIN_COUNT = 8
#: every operation taking a scale requires ell >= SCALE_FACTOR * max spacing
SCALE_FACTOR = 4.0


@dataclass(frozen=True)
class Grid:
    dim: int
    origin: tuple
    spacing: tuple
    counts: tuple
    periodic: tuple = None

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise InputError(f"dim must be 1 or 2, got {self.dim}")
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))
        object.__setattr__(self, "spacing", tuple(float(v) for v in self.spacing))
        object.__setattr__(self, "counts", tuple(int(v) for v in self.counts))
        per = self.periodic if self.periodic is not None else (False,) * self.dim
        object.__setattr__(self, "periodic", tuple(bool(v) for v in per))
        for name in ("origin", "spacing", "counts", "periodic"):
            if len(getattr(self, name)) != self.dim:
                raise InputError(f"{name} must have {self.dim} entries")
        if min(self.spacing) <= 0:
            raise InputError("spacing must be positive")
        if min(self.counts) < MIN_COUNT:
            raise InputError(f"need at least {MIN_COUNT} nodes per axis")

    @classmethod
    def from_bounds(cls, lower, upper, counts, periodic=None):
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        counts = tuple(int(c) for c in np.atleast_1d(counts))
        spacing = (upper - lower) / np.asarray(counts)
        return cls(len(counts), tuple(lower), tuple(spacing), counts, periodic)

    @property
    def extent(self):
        return tuple(h * n for h, n in zip(self.spacing, self.counts))

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    @property
    def size(self):
        return int(np.prod(self.counts))

    def axes(self):
        return [o + (np.arange(n) + 0.5) * h
                for o, h, n in zip(self.origin, self.spacing, self.counts)]

    def mesh(self):
        """Node coordinates with shape ``counts + (dim,)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def points(self):
        return self.mesh().reshape(-1, self.dim)

    def node_bounds(self):
        """First and last node coordinate per axis."""
        lo = np.array([o + 0.5 * h for o, h in zip(self.origin, self.spacing)])
        hi = np.array([o + (n - 0.5) * h
                       for o, h, n in zip(self.origin, self.spacing, self.counts)])
        return lo, hi

    def check_scale(self, ell):
        if ell < SCALE_FACTOR * max(self.spacing) * (1 - 1e-12):
            raise ResolutionError(
                f"scale {ell:g} below {SCALE_FACTOR:g} x spacing {max(self.spacing):g}")

    def contains(self, pts, tol=1e-12):
        """True for points inside the interpolation hull (periodic axes always)."""
        pts = np.asarray(pts, dtype=float).reshape(-1, self.dim)
        lo, hi = self.node_bounds()
        ok = np.ones(len(pts), dtype=bool)
        for a in range(self.dim):
            if self.periodic[a]:
                continue
            pad = tol * self.spacing[a]
            ok &= (pts[:, a] >= lo[a] - pad) & (pts[:, a] <= hi[a] + pad)
        return ok

    def require_inside(self, pts, what="evaluation point"):
        ok = self.contains(pts)
        if not ok.all():
            bad = np.asarray(pts, dtype=float).reshape(-1, self.dim)[~ok][0]
            raise DomainError(f"{what} {tuple(bad)} outside the grid")


@dataclass(frozen=True)
class InteriorWindow:
    """Nodes farther than ``margin`` from every non-periodic boundary."""

    grid: Grid
    margin: float
    slices: tuple
    subgrid: Grid

    @property
    def indices(self):
        return self.slices


def interior_window(grid, margin, box=None):
    """Nodes at distance >= margin from non-periodic boundaries.

    ``box = (lower, upper)`` further restricts the window to nodes inside the box.
    """
    lo, hi = grid.node_bounds()
    slices, origin, counts = [], [], []
    for a, axis in enumerate(grid.axes()):
        tol = 1e-9 * grid.spacing[a]
        if grid.periodic[a]:
            ok = np.ones(len(axis), dtype=bool)
        else:
            ok = (axis - lo[a] >= margin - tol) & (hi[a] - axis >= margin - tol)
        if box is not None:
            ok &= (axis >= box[0][a] - tol) & (axis <= box[1][a] + tol)
        if grid.periodic[a] and box is None:
            slices.append(slice(0, grid.counts[a]))
            origin.append(grid.origin[a])
            counts.append(grid.counts[a])
            continue
        keep = np.nonzero(ok)[0]
        if len(keep) < 2:
            raise DomainError(f"interior window with margin {margin:g} is empty")
        slices.append(slice(int(keep[0]), int(keep[-1]) + 1))
        origin.append(grid.origin[a] + keep[0] * grid.spacing[a])
        counts.append(len(keep))
    if min(counts) < MIN_COUNT:
        raise DomainError(f"interior window with margin {margin:g} has fewer than "
                          f"{MIN_COUNT} nodes on an axis")
    # a cropped periodic axis is no longer periodic
    per = tuple(p and c == n for p, c, n in zip(grid.periodic, counts, grid.counts))
    sub = Grid(grid.dim, tuple(origin), grid.spacing, tuple(counts), per)
    return InteriorWindow(grid, float(margin), tuple(slices), sub)


@dataclass(frozen=True)
class SampledField:
    grid: Grid
    values: np.ndarray
    time: float = 0.0
    name: str = field(default="u", compare=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape == tuple(self.grid.counts):
            vals = vals[..., None]
        if vals.shape[:-1] != tuple(self.grid.counts):
            raise InputError(f"values shape {vals.shape} does not match grid {self.grid.counts}")
        if not np.all(np.isfinite(vals)):
            raise InputError("field values must be finite")
        vals = np.array(vals)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, grid, fn, time=0.0, name="u"):
        vals = np.asarray(fn(grid.points()), dtype=float)
        return cls(grid, vals.reshape(tuple(grid.counts) + (-1,)), time, name)

    @property
    def components(self):
        return self.values.shape[-1]

    def flat(self):
        return self.values.reshape(-1, self.components)

    def sup_norm(self):
        return float(np.max(np.linalg.norm(self.values, axis=-1)))

    def restrict(self, window):
        """Samples on an interior window of this field's grid."""
        if window.grid != self.grid:
            raise InputError("window belongs to a different grid")
        return SampledField(window.subgrid, self.values[window.slices], self.time, self.name)

    def evaluate(self, pts):
        """Multilinear interpolation at arbitrary points."""
        pts = np.asarray(pts, dtype=float).reshape(-1, self.grid.dim)
        self.grid.require_inside(pts)
        return _kernels.interpolate(self.grid, self.flat(), pts)


def increment(u, x, ell, z):
    """u(x + ell z) - u(x) under multilinear interpolation."""
    x = np.asarray(x, dtype=float).reshape(u.grid.dim)
    z = np.asarray(z, dtype=float).reshape(u.grid.dim)
    if ell <= 0:
        raise InputError("scale must be positive")
    u.grid.check_scale(ell)
    vals = u.evaluate(np.stack([x + ell * z, x]))
    return vals[0] - vals[1]


def grid_integral(grid, integrand):
    return float(np.sum(integrand) * grid.cell_volume)


def _require_support(grid, phi, margin=0.0):
    lo, hi = grid.node_bounds()
    slo, shi = phi.support_box()
    for a in range(grid.dim):
        if grid.periodic[a]:
            continue
        if slo[a] < lo[a] + margin - 1e-12 or shi[a] > hi[a] - margin + 1e-12:
            raise DomainError(f"test function support leaves the interior window on axis {a}")


def divergence_residual(u, phi):
    """Weak divergence  int u . grad(phi) dx  by grid quadrature."""
    if u.components != u.grid.dim:
        raise InputError("divergence needs a vector field")
    _require_support(u.grid, phi, margin=u.grid.spacing[0])
    pts = u.grid.points()
    g = phi.gradient(pts)
    return grid_integral(u.grid, np.einsum("pi,pi->p", u.flat(), g))


def structure_norm(u, h, mode="absolute", margin=None):
    """Difference-quotient norms characterising BV (absolute) and BD (longitudinal).

    absolute:      ||u(. + h) - u(.)||_L1 / |h|
    longitudinal:  ||<h, u(. + h) - u(.)>||_L1 / |h|^2

    Both are integrated over the interior window whose margin defaults to |h|;
    pass a fixed ``margin`` to compare a ladder of shifts on the same window.
    """
    h = np.asarray(h, dtype=float).reshape(u.grid.dim)
    hn = float(np.linalg.norm(h))
    if hn < max(u.grid.spacing) * (1 - 1e-12):
        raise ResolutionError(f"|h| = {hn:g} below grid spacing")
    win = interior_window(u.grid, hn if margin is None else max(margin, hn))
    pts = win.subgrid.points()
    dlt = u.evaluate(pts + h) - u.restrict(win).flat()
    if mode == "absolute":
        dens = np.linalg.norm(dlt, axis=1) / hn
    elif mode == "longitudinal":
        if u.components != u.grid.dim:
            raise InputError("longitudinal mode needs a vector field")
        dens = np.abs(dlt @ h) / hn**2
    else:
        raise InputError(f"unknown mode {mode!r}")
    return grid_integral(win.subgrid, dens)


# ---------------------------------------------------------------------------
# flat table format

_HEADER_KEYS = ("dim", "counts", "spacing", "origin", "periodic", "components", "time")


def write_field_table(u, path):
    """Write a field as a text table.

    Header lines start with ``#`` and carry ``key: values``; the body has one
    row per node in row-major order (last axis fastest) and one column per
    component.
    """
    g = u.grid
    lines = ["# sampled field v1",
             f"# dim: {g.dim}",
             "# counts: " + " ".join(str(c) for c in g.counts),
             "# spacing: " + " ".join(repr(h) for h in g.spacing),
             "# origin: " + " ".join(repr(o) for o in g.origin),
             "# periodic: " + " ".join(str(int(p)) for p in g.periodic),
             f"# components: {u.components}",
             f"# time: {u.time!r}"]
    body = "\n".join(" ".join(repr(float(v)) for v in row) for row in u.flat())
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n" + body + "\n")


def read_field_table(path):
    header = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition(":")
                if val:
                    header[key.strip()] = val.split()
                continue
            rows.append([float(v) for v in line.split()])
    missing = [k for k in _HEADER_KEYS if k not in header]
    if missing:
        raise InputError(f"field table header lacks {missing}")
    dim = int(header["dim"][0])
    grid = Grid(dim, [float(v) for v in header["origin"]],
                [float(v) for v in header["spacing"]],
                [int(v) for v in header["counts"]],
                [bool(int(v)) for v in header["periodic"]])
    vals = np.array(rows, dtype=float)
    m = int(header["components"][0])
    if vals.shape != (grid.size, m):
        raise InputError("field table body does not match its header")
    return SampledField(grid, vals.reshape(tuple(grid.counts) + (m,)),
                        float(header["time"][0]))
