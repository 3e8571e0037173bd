"""Approximate dissipation fluxes at scale ell, weak pairings and scale scans.

Sign convention: the local energy balance reads

    d_t |u|^2/2 + div(u (|u|^2/2 + p)) = -D + f.u

so a dissipative solution has D >= 0.  The increment flux uses the constant
1/4 for Euler (vector increments) and 1/12 for scalar Burgers; with these,
both converge to the same D as the commutator flux.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DomainError, InputError, PreconditionError, ResolutionError
from .grid import SampledField, _require_support, grid_integral, interior_window
from .mollify import mollify

EULER_DR_CONSTANT = 0.25
BURGERS_DR_CONSTANT = 1.0 / 12.0
CSV_SCHEMA = "flux-scan v1"
CSV_COLUMNS = ("kind", "scenario", "kernel", "ell", "pairing", "sup_stat", "fit_exponent")
KINDS = ("cet", "dr", "bd", "energy")


@dataclass(frozen=True, eq=False)
class ReynoldsStress:
    """Symmetric subscale stress on an interior window; values have shape counts + (m, m)."""

    grid: object
    values: np.ndarray
    ell: float

    def as_field(self):
        m = self.values.shape[-1]
        flat = self.values.reshape(self.values.shape[:-2] + (m * m,))
        return SampledField(self.grid, flat, name="R")

    def asymmetry(self):
        return float(np.max(np.abs(self.values - np.swapaxes(self.values, -1, -2))))


def _products(u):
    """Upper-triangular products u_i u_j as a field, and the index pairs."""
    m = u.components
    pairs = [(i, j) for i in range(m) for j in range(i, m)]
    v = u.values
    prod = np.stack([v[..., i] * v[..., j] for i, j in pairs], axis=-1)
    return SampledField(u.grid, prod, u.time, "uu"), pairs


def _symmetric(flat_upper, pairs, m):
    out = np.empty(flat_upper.shape[:-1] + (m, m))
    for c, (i, j) in enumerate(pairs):
        out[..., i, j] = flat_upper[..., c]
        out[..., j, i] = flat_upper[..., c]
    return out


def support_box(phi, grid, pad=1.0):
    """Support box of phi grown by ``pad`` grid spacings."""
    lo, hi = phi.support_box()
    h = np.asarray(grid.spacing) * pad
    return tuple(lo - h), tuple(hi + h)


def _grow(box, by):
    return tuple(np.asarray(box[0]) - by), tuple(np.asarray(box[1]) + by)


def _stress_and_gradient(u, rho, ell, with_gradient=True, box=None):
    uu, pairs = _products(u)
    if with_gradient:
        ul, grad = mollify(u, rho, ell, with_gradient=True, box=box)
    else:
        ul, grad = mollify(u, rho, ell, box=box), None
    uul = mollify(uu, rho, ell, box=box)
    v = ul.values
    m = u.components
    outer = np.stack([v[..., i] * v[..., j] for i, j in pairs], axis=-1)
    R = _symmetric(uul.values - outer, pairs, m)
    return ReynoldsStress(ul.grid, R, ell), ul, grad


def reynolds_stress(u, rho, ell, box=None):
    """R^ell = (u (x) u)_ell - u_ell (x) u_ell, exactly symmetric."""
    return _stress_and_gradient(u, rho, ell, with_gradient=False, box=box)[0]


def cet_flux(u, rho, ell, box=None):
    """Pointwise R^ell : grad u_ell with the exact convolution derivative.

    ``box`` restricts the output to interior nodes inside ``(lower, upper)``.
    """
    if u.components != u.grid.dim:
        raise InputError("the commutator flux needs a vector field")
    R, ul, grad = _stress_and_gradient(u, rho, ell, box=box)
    D = np.einsum("...ij,...ij->...", R.values, grad)
    return SampledField(ul.grid, D[..., None], u.time, "D_cet")


def dr_flux(u, rho, ell, burgers=False, box=None):
    """Increment flux  c/ell * sum_k W_k grad rho(z_k) . du |du|^2,  du = u(x + ell z_k) - u(x)."""
    if u.components != u.grid.dim:
        raise InputError("the increment flux needs a vector field (or a 1D scalar)")
    u.grid.check_scale(ell)
    win = interior_window(u.grid, ell * rho.support_radius, box)
    wg = rho.weights[:, None] * rho.gradients
    sums = _kernels.grid_dr_sums(u.grid, u.flat(), win.slices, ell * rho.nodes, wg)
    c = BURGERS_DR_CONSTANT if burgers else EULER_DR_CONSTANT
    D = (c / ell) * sums
    return SampledField(win.subgrid, D.reshape(tuple(win.subgrid.counts) + (1,)), u.time, "D_dr")


def pair(field_, phi):
    """Grid quadrature of phi * field over the field's grid (scalar or summed components)."""
    _require_support(field_.grid, phi)
    vals = field_.flat()
    w = phi(field_.grid.points())
    return grid_integral(field_.grid, w[:, None] * vals)


def bd_flux_pair(u, rho, ell, phi):
    """-int u . div(phi T) with T = (R^ell)_ell, the weak form of int phi T : Eu."""
    if not rho.radial:
        raise PreconditionError("the deformation flux needs a radial kernel")
    if u.grid.dim != 2 or u.components != 2:
        raise InputError("the deformation flux needs a 2D vector field")
    return _bd_terms(u, rho, ell, phi)[0]


def _bd_terms(u, rho, ell, phi):
    """Pairing and T on the support box of phi."""
    box = support_box(phi, u.grid)
    R = reynolds_stress(u, rho, ell, box=_grow(box, ell * rho.support_radius + max(u.grid.spacing)))
    T, dT = mollify(R.as_field(), rho, ell, with_gradient=True, box=box)
    _require_support(T.grid, phi)
    return _bd_pairing(u, T, dT, phi), T


def _bd_pairing(u, T, dT, phi):
    m = u.components
    pts = T.grid.points()
    Tv = T.flat().reshape(-1, m, m)
    dTv = dT.reshape(-1, m, m, m)  # [p, i, j, a] = d_a T_ij
    div_T = _div_rows(dTv)
    g = phi.gradient(pts)
    w = phi(pts)
    vec = np.einsum("pij,pj->pi", Tv, g) + w[:, None] * div_T
    uu = _node_values(u, T.grid)
    return -grid_integral(T.grid, np.einsum("pi,pi->p", uu, vec))


def _div_rows(dTv):
    """div of each row: sum_j d_j T_ij."""
    m = dTv.shape[1]
    return sum(dTv[:, :, j, j] for j in range(m))


def _node_values(u, subgrid):
    """Samples of u at the nodes of a subgrid of its grid (no interpolation)."""
    idx = []
    for a in range(u.grid.dim):
        off = (subgrid.origin[a] - u.grid.origin[a]) / u.grid.spacing[a]
        i0 = int(round(off))
        if abs(off - i0) > 1e-6:
            raise InputError("subgrid is not aligned with the field grid")
        idx.append(slice(i0, i0 + subgrid.counts[a]))
    return u.values[tuple(idx)].reshape(-1, u.components)


def energy_balance_residual(u, phi, rho, ell, p=None, f=None, burgers=False,
                            u_next=None, dt=None, p_next=None):
    """<d_t |u_ell|^2/2 + div(u_ell (|u_ell|^2/2 + p_ell)), phi> - <f_ell . u_ell, phi>.

    Burgers mode uses the energy flux u_ell^3/3 and no pressure.  With
    ``u_next`` and ``dt`` the time derivative is the difference of the two
    slices and the spatial terms are averaged; otherwise the field is
    treated as stationary.  The limit as ell -> 0 is -<D, phi>.
    """
    if not burgers and p is None:
        raise InputError("an Euler energy balance needs the pressure")
    slices = [(u, p)]
    if u_next is not None:
        if dt is None or dt <= 0:
            raise InputError("two-slice input needs a positive dt")
        slices.append((u_next, p_next if p_next is not None else p))
    total = 0.0
    energies = []
    box = support_box(phi, u.grid)
    for uu, pp in slices:
        ul = mollify(uu, rho, ell, box=box)
        _require_support(ul.grid, phi)
        pts = ul.grid.points()
        v = ul.flat()
        e = 0.5 * np.einsum("pc,pc->p", v, v)
        energies.append(e)
        if burgers:
            flux = (v[:, 0] ** 3 / 3.0)[:, None]
        else:
            pl = mollify(pp, rho, ell, box=box).flat()[:, 0]
            flux = v * (e + pl)[:, None]
        term = -grid_integral(ul.grid, np.einsum("pc,pc->p", flux, phi.gradient(pts)))
        if f is not None:
            fl = mollify(f, rho, ell, box=box).flat()
            term -= grid_integral(ul.grid, phi(pts) * np.einsum("pc,pc->p", fl, v))
        total += term / len(slices)
    if len(slices) == 2:
        total += grid_integral(ul.grid, phi(pts) * (energies[1] - energies[0]) / dt)
    return total


def vorticity_form_residual(u, rho, ell, phi):
    """int phi (Lambda u_ell) : (u_ell (x) u_ell) with Lambda_ij = d_j u_i - d_i u_j."""
    if u.grid.dim != 2 or u.components != 2:
        raise InputError("the vorticity form needs a 2D vector field")
    if not rho.half_support:
        raise PreconditionError("the vorticity form needs a kernel supported in B_1/2")
    ul, g = mollify(u, rho, ell, with_gradient=True, box=support_box(phi, u.grid))
    _require_support(ul.grid, phi)
    v = ul.flat()
    g = g.reshape(-1, 2, 2)
    lam = g - np.swapaxes(g, 1, 2)
    dens = np.zeros(len(v))
    for i in range(2):
        for j in range(2):
            dens += lam[:, i, j] * (v[:, i] * v[:, j])
    return grid_integral(ul.grid, phi(ul.grid.points()) * dens)


# ---------------------------------------------------------------------------
# scans


def fit_exponent(ells, values):
    """Least-squares slope of log|values| against log ell; nan if any value is 0."""
    ells = np.asarray(ells, dtype=float)
    vals = np.abs(np.asarray(values, dtype=float))
    if len(ells) < 2 or np.any(vals <= 0) or not np.all(np.isfinite(vals)):
        return float("nan")
    return float(np.polyfit(np.log(ells), np.log(vals), 1)[0])


def richardson(values, ratio=2.0, order=1.0):
    """Extrapolate the last two entries of a ratio ladder assuming error ~ ell^order.

    Returns ``(limit, observed_order)``; the observed order uses the last
    three entries when available.
    """
    v = np.asarray(values, dtype=float)
    if len(v) < 2:
        raise InputError("extrapolation needs at least two scales")
    limit = v[-1] + (v[-1] - v[-2]) / (ratio**order - 1.0)
    obs = float("nan")
    if len(v) >= 3:
        a, b = v[-3] - v[-2], v[-2] - v[-1]
        if a != 0 and b != 0 and a / b > 0:
            obs = math.log(a / b) / math.log(ratio)
    return float(limit), obs


def geometric_ladder(ell_max, ratio=2.0, count=5):
    if ratio <= 1 or count < 1 or ell_max <= 0:
        raise InputError("ladder needs ell_max > 0, ratio > 1 and count >= 1")
    return tuple(ell_max / ratio**k for k in range(count))


def check_ladder(grid, ladder, ratio=2.0):
    ladder = [float(v) for v in ladder]
    if len(ladder) < 2:
        raise ResolutionError("a scan needs at least two scales")
    for a, b in zip(ladder, ladder[1:]):
        if not b < a:
            raise ResolutionError("ladder must be strictly decreasing")
        if abs(a / b - ratio) > 1e-9 * ratio:
            raise ResolutionError(f"ladder ratio must be {ratio:g}")
    grid.check_scale(ladder[-1])
    return ladder


@dataclass(frozen=True)
class FluxScan:
    kind: str
    ladder: tuple
    pairings: tuple
    sup_stats: tuple
    scenario: str = ""
    kernel: str = ""
    fit_exponent: float = float("nan")        # decay of sup_stats
    pairing_exponent: float = float("nan")    # decay of |pairings|
    extra: dict = field(default_factory=dict, compare=False)

    def extrapolate(self, order=1.0):
        return richardson(self.pairings, self.ladder[0] / self.ladder[1], order)

    def rows(self):
        for ell, pv, sv in zip(self.ladder, self.pairings, self.sup_stats):
            yield (self.kind, self.scenario, self.kernel, ell, pv, sv, self.fit_exponent)


def flux_scan(u, rho, kind, ladder, phi, scenario="", burgers=False, p=None, f=None,
              region="support", u_next=None, dt=None):
    """Pairings <D_ell, phi> and sup |D_ell| over a ratio-2 ladder.

    With ``region="support"`` fluxes are evaluated only on interior nodes in
    the support box of phi, which leaves the pairing unchanged and takes the
    sup statistic over that box; ``region="window"`` uses the whole interior
    window.  For ``bd`` the sup statistic is max |(R^ell)_ell|, for
    ``energy`` it is max |u_ell|^3, the size of the cubic flux; the pairing
    for ``energy`` is the balance residual, whose limit is -<D, phi>.  For a
    moving solution pass a second slice ``u_next`` a time ``dt`` later.
    """
    if kind not in KINDS:
        raise InputError(f"unknown flux kind {kind!r}")
    if kind == "bd" and not rho.radial:
        raise PreconditionError("the deformation flux needs a radial kernel")
    if region not in ("support", "window"):
        raise InputError(f"unknown region {region!r}")
    ladder = check_ladder(u.grid, ladder)
    margin = (2.0 if kind == "bd" else 1.0) * ladder[0] * rho.support_radius
    try:
        win = interior_window(u.grid, margin)
    except DomainError as exc:
        raise ResolutionError(f"largest scale leaves no interior: {exc}") from exc
    _require_support(win.subgrid, phi)
    box = support_box(phi, u.grid) if region == "support" else None
    pairings, sups = [], []
    for ell in ladder:
        if kind == "cet":
            D = cet_flux(u, rho, ell, box=box)
        elif kind == "dr":
            D = dr_flux(u, rho, ell, burgers=burgers, box=box)
        if kind in ("cet", "dr"):
            pairings.append(pair(D, phi))
            sups.append(float(np.max(np.abs(D.values))))
        elif kind == "bd":
            val, T = _bd_terms(u, rho, ell, phi)
            pairings.append(val)
            sups.append(float(np.max(np.linalg.norm(T.values, axis=-1))))
        else:
            pairings.append(energy_balance_residual(u, phi, rho, ell, p=p, f=f, burgers=burgers,
                                                    u_next=u_next, dt=dt))
            ul = mollify(u, rho, ell, box=box)
            sups.append(float(np.max(np.abs(ul.values)) ** 3))
    return FluxScan(kind, tuple(ladder), tuple(pairings), tuple(sups), scenario, rho.kernel_id,
                    fit_exponent(ladder, sups), fit_exponent(ladder, pairings))


def write_scan_csv(scans, path):
    """One CSV for a list of scans; a schema comment precedes the header row."""
    import csv

    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {CSV_SCHEMA}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for scan in scans:
            for row in scan.rows():
                w.writerow([row[0], row[1], row[2]] + [repr(float(v)) for v in row[3:]])


def read_scan_csv(path):
    import csv

    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.DictReader(lines))
    for r in rows:
        for k in ("ell", "pairing", "sup_stat", "fit_exponent"):
            r[k] = float(r[k])
    return rows
