"""Blow-ups at a point: Lebesgue values, jump profiles and the limit stress.

For a radial kernel the shifted average of a two-sided profile is

    int u(x0 + ell (y - z)) rho(z) dz  ->  alpha(y) u+ + (1 - alpha(y)) u-

with ``alpha(y)`` the mass of rho on the half-space ``{z . nu < y . nu}``.
The classifier fits this model over a fixed set of probes ``y`` and a
hemisphere of directions.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ClassificationError, InputError, PreconditionError
from .flux import richardson
from .mollify import mollify_points

LEBESGUE_TOL = 1e-3
JUMP_TOL = 1e-2
JUMP_MARGIN = 10.0


@dataclass(frozen=True)
class JumpProfile:
    """One-sided limits and the unit normal pointing from the minus to the plus side."""

    location: tuple
    u_plus: tuple
    u_minus: tuple
    nu: tuple

    def __post_init__(self):
        for name in ("location", "u_plus", "u_minus", "nu"):
            object.__setattr__(self, name, tuple(float(v) for v in np.atleast_1d(getattr(self, name))))
        if abs(np.linalg.norm(self.nu) - 1.0) > 1e-9:
            raise InputError("nu must be a unit vector")

    @property
    def jump(self):
        return np.asarray(self.u_plus) - np.asarray(self.u_minus)

    def canonical(self):
        """Flip (nu, u+, u-) so the first nonzero component of nu is positive."""
        for c in self.nu:
            if abs(c) > 1e-12:
                if c < 0:
                    return JumpProfile(self.location, self.u_minus, self.u_plus,
                                       tuple(-v for v in self.nu))
                break
        return self


@dataclass(frozen=True)
class BlowupClass:
    tag: str                      # lebesgue | jump | unresolved
    value: tuple = None           # Lebesgue value
    profile: JumpProfile = None
    residuals: dict = field(default_factory=dict, compare=False)   # ell -> (constant, two-sided)
    location: tuple = None


# ---------------------------------------------------------------------------
# alpha and alpha-bar


def _require_radial(rho):
    if not rho.radial:
        raise PreconditionError("a radial kernel is required")
    if not rho.is_nonnegative():
        raise PreconditionError("a nonnegative kernel is required")


def _cell_width(rho):
    return rho.support_radius / int(rho.kernel_id.rsplit("n=", 1)[-1])


def _row_masses(rho):
    """Node masses lumped per lattice row along the last axis."""
    h = _cell_width(rho)
    z = rho.nodes[:, -1]
    rows = np.rint(z / h - 0.5).astype(np.int64)
    keys, inv = np.unique(rows, return_inverse=True)
    return (keys + 0.5) * h, np.bincount(inv, weights=rho.masses()), h


def _alpha_scalar(rho, s):
    """Half-space mass as a function of s = y . nu, along the last axis of the node set.

    Each node mass is spread uniformly over its quadrature cell, which keeps
    alpha(s) + alpha(-s) = 1 exact on the symmetric node set.
    """
    zr, mr, h = _row_masses(rho)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    frac = np.clip((s[:, None] - zr[None, :]) / h + 0.5, 0.0, 1.0)
    return frac @ mr


def alpha_profile(rho, y, nu=None):
    """alpha(y) for the half-space {z . nu > 0}; nu defaults to the last axis."""
    _require_radial(rho)
    y = np.asarray(y, dtype=float).reshape(-1, rho.dim)
    if nu is None:
        nu = np.eye(rho.dim)[-1]
    out = _alpha_scalar(rho, y @ np.asarray(nu, dtype=float))
    return out if len(out) > 1 else float(out[0])


class _ByIdentity:
    """Hashable wrapper so the cache keys on the kernel id only."""

    def __init__(self, rho):
        self.rho = rho

    def __hash__(self):
        return hash(self.rho.kernel_id)

    def __eq__(self, other):
        return self.rho.kernel_id == other.rho.kernel_id


@lru_cache(maxsize=64)
def _alpha_bar_for(key):
    rho = key.rho
    a = _alpha_scalar(rho, rho.nodes[:, -1])
    return float(np.sum(rho.masses() * a * (1.0 - a)))


def alpha_bar(rho):
    """int alpha (1 - alpha) rho over B_1, computed once per kernel id."""
    _require_radial(rho)
    return _alpha_bar_for(_ByIdentity(rho))


# ---------------------------------------------------------------------------
# averages and classification


def shifted_average(u, x0, ell, y, rho):
    """int u(x0 + ell (y - z)) rho(z) dz for one probe or a stack of probes."""
    _require_radial(rho)
    x0 = np.asarray(x0, dtype=float).reshape(u.grid.dim)
    y = np.asarray(y, dtype=float).reshape(-1, u.grid.dim)
    vals, _ = mollify_points(u, rho, ell, x0[None, :] + ell * y)
    return vals if len(y) > 1 else vals[0]


def probe_set(dim, radii=(0.15, 0.3, 0.45, 0.6, 0.75), angles=16):
    if dim == 1:
        r = np.asarray(radii)
        return np.concatenate([[0.0], r, -r])[:, None]
    th = 2 * np.pi * np.arange(angles) / angles
    ring = np.stack([np.cos(th), np.sin(th)], 1)
    return np.concatenate([np.zeros((1, 2))] + [r * ring for r in radii])


def _direction(theta, dim):
    if dim == 1:
        return np.array([1.0])
    return np.array([np.cos(theta), np.sin(theta)])


def _lstsq_rms(A, vals):
    coef, *_ = np.linalg.lstsq(A, vals, rcond=None)
    res = vals - A @ coef
    return float(np.sqrt(np.mean(np.sum(res**2, axis=1)))), coef


def _constant_fit(probes, vals):
    """Constant plus a linear drift in y; the constant is the blow-up value."""
    A = np.column_stack([np.ones(len(probes)), probes])
    rms, coef = _lstsq_rms(A, vals)
    return rms, coef[0]


def _two_sided_fit(rho, probes, vals, nu):
    a = _alpha_scalar(rho, probes @ nu)
    A = np.column_stack([a, 1.0 - a, probes])
    coef, *_ = np.linalg.lstsq(A, vals, rcond=None)
    res = vals - A @ coef
    rms = float(np.sqrt(np.mean(np.sum(res**2, axis=1))))
    return rms, coef[0], coef[1]


def _fit_direction(rho, probes, vals, dim, n_dir=180):
    if dim == 1:
        nu = np.array([1.0])
        return (0.0,) + _two_sided_fit(rho, probes, vals, nu)
    thetas = np.pi * np.arange(n_dir) / n_dir
    errs = [_two_sided_fit(rho, probes, vals, _direction(t, 2))[0] for t in thetas]
    k = int(np.argmin(errs))
    step = np.pi / n_dir
    opt = minimize_scalar(lambda t: _two_sided_fit(rho, probes, vals, _direction(t, 2))[0],
                          bounds=(thetas[k] - step, thetas[k] + step), method="bounded",
                          options={"xatol": 1e-7})
    th = float(opt.x)
    return (th,) + _two_sided_fit(rho, probes, vals, _direction(th, 2))


def classify_point(u, x0, ladder, rho, lebesgue_tol=LEBESGUE_TOL, jump_tol=JUMP_TOL,
                   jump_margin=JUMP_MARGIN, probes=None):
    """Lebesgue point, jump point or unresolved, from shifted averages over a ladder.

    Both models carry a linear drift ``B y`` absorbing the smooth part of u
    at finite scale; it vanishes in the blow-up limit.

    Thresholds are relative to the sup norm of u.  Lebesgue: constant-fit
    residual below ``lebesgue_tol`` at the two finest scales.  Jump:
    two-sided residual below ``jump_tol`` at the three finest scales and a
    jump larger than ``jump_margin`` times that residual.  One-sided limits
    and the normal angle are extrapolated from the two finest scales.
    """
    _require_radial(rho)
    ladder = [float(v) for v in ladder]
    if len(ladder) < 4:
        raise PreconditionError("classification needs at least four scales")
    if any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise InputError("ladder must be strictly decreasing")
    x0 = np.asarray(x0, dtype=float).reshape(u.grid.dim)
    dim = u.grid.dim
    probes = probe_set(dim) if probes is None else np.asarray(probes, dtype=float)
    scale = max(u.sup_norm(), 1e-300)
    consts, fits, residuals = [], [], {}
    for ell in ladder:
        vals = np.atleast_2d(shifted_average(u, x0, ell, probes, rho))
        c_res, mean = _constant_fit(probes, vals)
        th, j_res, up, um = _fit_direction(rho, probes, vals, dim)
        consts.append(mean)
        fits.append((th, up, um))
        residuals[ell] = (c_res / scale, j_res / scale)
    fin = ladder[-2:]
    if all(residuals[e][0] < lebesgue_tol for e in fin):
        value = _extrapolate([c for c in consts[-2:]])
        return BlowupClass("lebesgue", tuple(value), None, residuals, tuple(x0))
    fin3 = ladder[-3:]
    worst = max(residuals[e][1] for e in fin3)
    # keep the angle branch continuous before extrapolating
    th = np.unwrap([f[0] for f in fits[-2:]], period=np.pi)
    ups = [f[1] for f in fits[-2:]]
    ums = [f[2] for f in fits[-2:]]
    if abs(th[1] - th[0]) > np.pi / 2:
        ups, ums = [ups[0], ums[1]], [ums[0], ups[1]]
    up, um = _extrapolate(ups), _extrapolate(ums)
    theta = float(_extrapolate([np.array([t]) for t in th])[0])
    nu = _direction(theta, dim)
    jump_size = float(np.linalg.norm(up - um)) / scale
    if worst < jump_tol and jump_size > jump_margin * worst:
        prof = JumpProfile(tuple(x0), tuple(up), tuple(um), tuple(nu)).canonical()
        return BlowupClass("jump", None, prof, residuals, tuple(x0))
    return BlowupClass("unresolved", None, None, residuals, tuple(x0))


def _extrapolate(pair):
    a, b = (np.asarray(v, dtype=float) for v in pair)
    return np.array([richardson([x, y])[0] for x, y in zip(a, b)])


def precise_representative(cls):
    if cls.tag == "lebesgue":
        return np.asarray(cls.value)
    if cls.tag == "jump":
        return (np.asarray(cls.profile.u_plus) + np.asarray(cls.profile.u_minus)) / 2
    raise ClassificationError("no precise representative at an unresolved point")


def limit_reynolds(profile, rho):
    """alpha_bar (u+ - u-) (x) (u+ - u-)."""
    j = profile.jump
    return alpha_bar(rho) * np.outer(j, j)


def jump_flux_density(profile, rho):
    """alpha_bar |u+ - u-|^2 <u+ - u-, nu>."""
    j = profile.jump
    return alpha_bar(rho) * float(j @ j) * float(j @ np.asarray(profile.nu))


def classification_report(results):
    """Structured text, one block per probe point."""
    lines = ["# blow-up classification v1"]
    for cls in results:
        if cls.tag == "jump":
            p = cls.profile
            head = (f"tag=jump u_plus={_fmt(p.u_plus)} "
                    f"u_minus={_fmt(p.u_minus)} nu={_fmt(p.nu)}")
        elif cls.tag == "lebesgue":
            head = f"tag=lebesgue value={_fmt(cls.value)}"
        else:
            head = "tag=unresolved"
        lines.append(f"x0={_fmt(cls.location)} " + head)
        for ell, (c, j) in cls.residuals.items():
            lines.append(f"  ell={ell!r} constant_residual={c:.6e} two_sided_residual={j:.6e}")
    return "\n".join(lines) + "\n"


def _fmt(v):
    return "(" + ",".join(f"{x:.8g}" for x in v) + ")"
