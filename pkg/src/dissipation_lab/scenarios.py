"""Registry of analytic weak solutions with known dissipation.

Every scenario carries its closed-form velocity (and pressure for Euler),
the expected dissipation, and where applicable the exact jump data used as
ground truth by the classifier.
"""
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import bv_ledger
from .errors import InputError, RegistryError
from .grid import Grid, SampledField, divergence_residual, grid_integral, _require_support
from .testfunctions import bump


@dataclass(frozen=True)
class Scenario:
    id: str
    dim: int
    velocity: object              # (pts, t) -> (n, dim)
    pressure: object = None       # (pts, t) -> (n,)
    bounds: tuple = ()
    counts: tuple = ()
    periodic: tuple = None
    divergence_free: bool = True
    burgers: bool = False
    dissipation: object = 0       # 0, or the exact defect atom per unit time
    jump_set: str = ""
    shock: object = None          # bv_ledger.ShockDescription for Burgers
    jump_truth: object = None     # x -> (u_plus, u_minus, nu) on the jump set
    params: dict = field(default_factory=dict)
    jump_distance: object = None  # (x, t) -> distance to the jump set

    def grid(self, counts=None, bounds=None):
        lo, hi = bounds or self.bounds
        return Grid.from_bounds(lo, hi, counts or self.counts, self.periodic)


@dataclass(frozen=True)
class Realization:
    scenario: Scenario
    grid: Grid
    u: SampledField
    p: SampledField = None
    f: SampledField = None


def _rot(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def _flat_shear(angle=0.0):
    t = _rot(angle) @ np.array([1.0, 0.0])
    nu = _rot(angle) @ np.array([0.0, 1.0])

    def vel(pts, time=0.0):
        return np.sign(pts @ nu)[:, None] * t[None, :]

    def pres(pts, time=0.0):
        return np.zeros(len(pts))

    return Scenario("flat_shear", 2, vel, pres, ((-1.0, -1.0), (1.0, 1.0)), (512, 512),
                    jump_set="line through the origin with normal (-sin a, cos a)",
                    jump_truth=lambda x: (t.copy(), -t, nu.copy()),
                    params={"angle": angle},
                    jump_distance=lambda x, time=0.0: abs(float(np.dot(x, nu))))


def _circular_sheet(radius=1.0):
    def vel(pts, time=0.0):
        r2 = np.einsum("pi,pi->p", pts, pts)
        inside = (r2 < radius**2)[:, None]
        return np.where(inside, np.stack([-pts[:, 1], pts[:, 0]], 1), 0.0)

    def pres(pts, time=0.0):
        r2 = np.einsum("pi,pi->p", pts, pts)
        return np.where(r2 < radius**2, (r2 - radius**2) / 2.0, 0.0)

    def truth(x):
        x = np.asarray(x, dtype=float)
        er = x / np.linalg.norm(x)
        et = np.array([-er[1], er[0]])
        return np.zeros(2), radius * et, er

    return Scenario("circular_vortex_sheet", 2, vel, pres,
                    ((0.2, -0.8), (1.8, 0.8)), (512, 512),
                    jump_set=f"circle of radius {radius:g}", jump_truth=truth,
                    params={"radius": radius},
                    jump_distance=lambda x, time=0.0: abs(float(np.linalg.norm(x)) - radius))


def _taylor_green():
    def vel(pts, time=0.0):
        x, y = pts[:, 0], pts[:, 1]
        return np.stack([np.sin(x) * np.cos(y), -np.cos(x) * np.sin(y)], 1)

    def pres(pts, time=0.0):
        return (np.cos(2 * pts[:, 0]) + np.cos(2 * pts[:, 1])) / 4.0

    return Scenario("taylor_green", 2, vel, pres, ((0.0, 0.0), (2 * np.pi, 2 * np.pi)),
                    (256, 256), periodic=(True, True), jump_set="none",
                    jump_distance=lambda x, time=0.0: np.inf)


def _sawtooth_shear(period=1.0):
    def vel(pts, time=0.0):
        y = pts[:, 1] / period
        saw = 2.0 * (y - np.floor(y + 0.5))
        return np.stack([saw, np.zeros(len(pts))], 1)

    def pres(pts, time=0.0):
        return np.zeros(len(pts))

    def truth(x):
        return np.array([-1.0, 0.0]), np.array([1.0, 0.0]), np.array([0.0, 1.0])

    def dist(x, time=0.0):
        y = x[1] / period - 0.5
        return abs(y - np.round(y)) * period

    return Scenario("sawtooth_shear", 2, vel, pres, ((-1.0, -1.0), (1.0, 1.0)), (512, 512),
                    jump_set="lines y = period * (k + 1/2)", jump_truth=truth,
                    params={"period": period}, jump_distance=dist)


def _burgers(u_minus, u_plus, sid):
    shock = bv_ledger.ShockDescription(u_minus, u_plus, Fraction(u_minus + u_plus) / 2)

    def vel(pts, time=0.0):
        return shock.state(time, pts[:, 0])[:, None]

    defect = bv_ledger.burgers_entropy_defect(shock).atoms
    return Scenario(sid, 1, vel, None, ((-1.0,), (1.0,)), (4096,), divergence_free=False,
                    burgers=True, dissipation=defect[0][1] if defect else 0,
                    jump_set="x = s t", shock=shock,
                    jump_truth=lambda x: (np.array([float(u_plus)]), np.array([float(u_minus)]),
                                          np.array([1.0])),
                    params={"u_minus": u_minus, "u_plus": u_plus},
                    jump_distance=lambda x, time=0.0: abs(float(x[0]) - float(shock.speed) * time))


REGISTRY = {
    "flat_shear": _flat_shear,
    "circular_vortex_sheet": _circular_sheet,
    "taylor_green": _taylor_green,
    "burgers_stationary_shock": lambda: _burgers(1, -1, "burgers_stationary_shock"),
    "burgers_moving_shock": lambda: _burgers(1, 0, "burgers_moving_shock"),
    "sawtooth_shear": _sawtooth_shear,
}


def scenario_ids():
    return tuple(REGISTRY)


def get_scenario(sid, params=None):
    if sid not in REGISTRY:
        raise RegistryError(f"unknown scenario {sid!r}; known: {', '.join(REGISTRY)}")
    try:
        return REGISTRY[sid](**(params or {}))
    except TypeError as exc:
        raise InputError(f"bad parameters for {sid}: {exc}") from exc


def _cell_average(fn, g, time, sub):
    """Midpoint-rule average of fn over each cell with sub points per axis."""
    pts = g.points()
    h = np.asarray(g.spacing)
    off = (np.arange(sub) + 0.5) / sub - 0.5
    acc = 0.0
    for o in np.stack(np.meshgrid(*[off] * g.dim, indexing="ij"), -1).reshape(-1, g.dim):
        acc = acc + fn(pts + o * h, time)
    return acc / sub**g.dim


def generate_scenario(sid, params=None, counts=None, bounds=None, time=0.0, subsamples=1):
    """Sample a registered scenario on a grid (defaults from the registry).

    ``subsamples > 1`` stores cell averages (midpoint rule with that many
    points per axis) instead of point values, which places jumps at the
    right position on average.
    """
    sc = get_scenario(sid, params)
    g = sc.grid(counts, bounds)
    sub = int(subsamples)
    if sub < 1:
        raise InputError("subsamples must be a positive integer")
    shape = tuple(g.counts)
    if sub == 1:
        pts = g.points()
        vel = sc.velocity(pts, time)
        pres = None if sc.pressure is None else sc.pressure(pts, time)
    else:
        vel = _cell_average(sc.velocity, g, time, sub)
        pres = None if sc.pressure is None else _cell_average(sc.pressure, g, time, sub)
    u = SampledField(g, vel.reshape(shape + (sc.dim,)), time, "u")
    p = f = None
    if pres is not None:
        p = SampledField(g, pres.reshape(shape + (1,)), time, "p")
        f = SampledField(g, np.zeros(shape + (sc.dim,)), time, "f")
    return Realization(sc, g, u, p, f)


# ---------------------------------------------------------------------------
# audit


@dataclass(frozen=True)
class AuditCheck:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self):
        return bool(abs(self.value) <= self.tolerance)


def _audit_bumps(grid, n=3):
    lo, hi = grid.node_bounds()
    c = (lo + hi) / 2
    r = 0.3 * float(np.min(hi - lo))
    out = [bump(tuple(c), r)]
    for k in range(1, n):
        shift = 0.15 * (hi - lo) * np.array([np.cos(2.1 * k), np.sin(2.1 * k)])[: grid.dim]
        out.append(bump(tuple(c + shift), 0.8 * r))
    return out


def momentum_residual(real, phi):
    """Stationary weak Euler residual: int u_k u_j d_j phi + p d_k phi, per k."""
    u, p = real.u, real.p
    _require_support(u.grid, phi, margin=u.grid.spacing[0])
    pts = u.grid.points()
    g = phi.gradient(pts)
    v = u.flat()
    pv = p.flat()[:, 0]
    dens = v * np.einsum("pj,pj->p", v, g)[:, None] + pv[:, None] * g
    return np.array([grid_integral(u.grid, dens[:, k]) for k in range(u.components)])


def audit(sid, params=None, counts=None):
    """Self-consistency checks on a reference grid (>= 512 nodes per axis)."""
    sc = get_scenario(sid, params)
    counts = counts or tuple(max(512, c) for c in sc.counts)
    real = generate_scenario(sid, params, counts)
    dx = max(real.grid.spacing)
    checks = []
    if sc.burgers:
        sh = sc.shock
        checks.append(AuditCheck("rankine_hugoniot", float(sh.rankine_hugoniot_gap()), 0.0))
        phi = bump((0.5, 0.1), 0.35)
        mass = bv_ledger.shock_time_mass(sh, phi, (0.15, 0.85))
        weak = bv_ledger.burgers_weak_residual(sh, phi, (0.15, 0.85), (-0.25, 0.95))
        checks.append(AuditCheck("energy_defect", weak - float(sc.dissipation) * mass, 1e-6))
        checks.append(AuditCheck("admissible", 0.0 if sh.is_admissible() else 1.0, 0.0))
        return checks
    for k, phi in enumerate(_audit_bumps(real.grid)):
        if sc.divergence_free:
            checks.append(AuditCheck(f"divergence[{k}]", divergence_residual(real.u, phi), dx))
        if real.p is not None:
            r = momentum_residual(real, phi)
            checks.append(AuditCheck(f"momentum[{k}]", float(np.max(np.abs(r))), dx))
    return checks
