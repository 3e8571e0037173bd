"""Exact one-dimensional BV calculus on piecewise polynomials.

Functions are piecewise polynomials with rational coefficients and rational
breakpoints (floats convert exactly to binary rationals, so every input is
exact).  Distributional derivatives are a piecewise-polynomial density plus
atoms at the breakpoints.  Products of a measure with a function use the
function's precise value, the midpoint ``(u+ + u-)/2``, at atoms.

Orientation: the normal is +1, so ``u-`` is the left limit and ``u+`` the
right limit at every breakpoint.
"""
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import integrate

from .errors import InputError

IDENTITIES = ("cr1", "cr2", "cr3", "burgers")


def _q(v):
    if isinstance(v, Fraction):
        return v
    if isinstance(v, str):
        return Fraction(v.strip())
    return Fraction(v)


@dataclass(frozen=True)
class Poly:
    """Ascending coefficients, exact."""

    coefs: tuple = ()

    def __post_init__(self):
        c = [_q(v) for v in self.coefs]
        while c and c[-1] == 0:
            c.pop()
        object.__setattr__(self, "coefs", tuple(c))

    @classmethod
    def const(cls, v):
        return cls((v,))

    def is_zero(self):
        return not self.coefs

    def __call__(self, x):
        x = _q(x)
        acc = Fraction(0)
        for c in reversed(self.coefs):
            acc = acc * x + c
        return acc

    def evalf(self, x):
        return np.polynomial.polynomial.polyval(x, [float(c) for c in self.coefs]) \
            if self.coefs else np.zeros_like(np.asarray(x, dtype=float))

    def deriv(self):
        return Poly(tuple(k * c for k, c in enumerate(self.coefs))[1:])

    def __add__(self, other):
        other = other if isinstance(other, Poly) else Poly.const(other)
        n = max(len(self.coefs), len(other.coefs))
        a = self.coefs + (Fraction(0),) * (n - len(self.coefs))
        b = other.coefs + (Fraction(0),) * (n - len(other.coefs))
        return Poly(tuple(x + y for x, y in zip(a, b)))

    __radd__ = __add__

    def __neg__(self):
        return Poly(tuple(-c for c in self.coefs))

    def __sub__(self, other):
        return self + (-(other if isinstance(other, Poly) else Poly.const(other)))

    def __mul__(self, other):
        if not isinstance(other, Poly):
            return Poly(tuple(c * _q(other) for c in self.coefs))
        if self.is_zero() or other.is_zero():
            return Poly()
        out = [Fraction(0)] * (len(self.coefs) + len(other.coefs) - 1)
        for i, a in enumerate(self.coefs):
            for j, b in enumerate(other.coefs):
                out[i + j] += a * b
        return Poly(tuple(out))

    __rmul__ = __mul__

    def __pow__(self, k):
        out = Poly.const(1)
        for _ in range(int(k)):
            out = out * self
        return out

    def __str__(self):
        return " ".join(str(c) for c in self.coefs) or "0"


@dataclass(frozen=True)
class PiecewiseBV:
    """``pieces[i]`` lives on (x_{i-1}, x_i) with x_{-1} = -inf, x_k = +inf."""

    breakpoints: tuple
    pieces: tuple
    name: str = ""

    def __post_init__(self):
        bps = tuple(_q(b) for b in self.breakpoints)
        if any(b >= c for b, c in zip(bps, bps[1:])):
            raise InputError("breakpoints must be strictly increasing")
        pcs = tuple(p if isinstance(p, Poly) else
                    Poly(tuple(p) if isinstance(p, (tuple, list)) else (p,))
                    for p in self.pieces)
        if len(pcs) != len(bps) + 1:
            raise InputError("need one more piece than breakpoints")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "pieces", pcs)

    def left(self, i):
        return self.pieces[i](self.breakpoints[i])

    def right(self, i):
        return self.pieces[i + 1](self.breakpoints[i])

    def jump(self, i):
        return self.right(i) - self.left(i)

    def precise(self, i):
        return (self.left(i) + self.right(i)) / 2

    def map(self, fn):
        """Apply a polynomial map piecewise (fn acts on Poly)."""
        return PiecewiseBV(self.breakpoints, tuple(fn(p) for p in self.pieces), self.name)

    def piece_index(self, x):
        return int(np.searchsorted([float(b) for b in self.breakpoints], x, side="right"))

    def evalf(self, x):
        """Float evaluation away from breakpoints (vectorised)."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted([float(b) for b in self.breakpoints], x, side="right")
        out = np.empty_like(x)
        for i, p in enumerate(self.pieces):
            m = idx == i
            out[m] = p.evalf(x[m])
        return out


@dataclass(frozen=True)
class SignedMeasure1D:
    """Piecewise-polynomial density on the partition of ``breakpoints`` plus atoms."""

    breakpoints: tuple
    density: tuple
    atoms: tuple = ()

    def __post_init__(self):
        locs = [a[0] for a in self.atoms]
        if len(set(locs)) != len(locs):
            raise InputError("atom locations must be distinct")

    def atom_dict(self):
        return {x: w for x, w in self.atoms}

    def __sub__(self, other):
        return self + other.scaled(-1)

    def __add__(self, other):
        if self.breakpoints != other.breakpoints:
            raise InputError("measures live on different partitions")
        dens = tuple(a + b for a, b in zip(self.density, other.density))
        atoms = dict(self.atoms)
        for x, w in other.atoms:
            atoms[x] = atoms.get(x, Fraction(0)) + w
        return SignedMeasure1D(self.breakpoints, dens, tuple(sorted(atoms.items())))

    def scaled(self, c):
        c = _q(c)
        return SignedMeasure1D(self.breakpoints, tuple(p * c for p in self.density),
                               tuple((x, w * c) for x, w in self.atoms))

    def times(self, u):
        """Multiply by a BV function, using its precise value at atoms."""
        if u.breakpoints != self.breakpoints:
            raise InputError("function and measure live on different partitions")
        pos = {x: i for i, x in enumerate(u.breakpoints)}
        atoms = tuple((x, w * u.precise(pos[x])) for x, w in self.atoms)
        return SignedMeasure1D(self.breakpoints, tuple(p * q for p, q in zip(self.density, u.pieces)),
                               atoms)

    def times_atoms(self, values):
        """Multiply atoms only by per-breakpoint exact values (dict x -> value); density -> 0."""
        return SignedMeasure1D(self.breakpoints, tuple(Poly() for _ in self.density),
                               tuple((x, w * values[x]) for x, w in self.atoms))

    def atomic_part(self):
        return SignedMeasure1D(self.breakpoints, tuple(Poly() for _ in self.density), self.atoms)

    def working_interval(self, pad=1):
        if not self.breakpoints:
            return Fraction(-pad), Fraction(pad)
        return self.breakpoints[0] - pad, self.breakpoints[-1] + pad

    def total_variation(self, interval=None):
        """Exact when the density vanishes identically; otherwise float on ``interval``."""
        tv = sum((abs(w) for _, w in self.atoms), Fraction(0))
        if all(p.is_zero() for p in self.density):
            return tv
        a, b = interval or self.working_interval()
        edges = [a] + [x for x in self.breakpoints if a < x < b] + [b]
        acc = 0.0
        for lo, hi in zip(edges, edges[1:]):
            p = self.density[np.searchsorted([float(x) for x in self.breakpoints],
                                             float((lo + hi) / 2), side="right")]
            if not p.is_zero():
                acc += integrate.quad(lambda x: abs(float(p.evalf(x))), float(lo), float(hi),
                                      epsabs=1e-13, limit=200)[0]
        return float(tv) + acc

    def pair(self, phi, dphi=None):
        """<mu, phi> for a callable phi (float quadrature on each piece)."""
        bps = [float(x) for x in self.breakpoints]
        edges = [-np.inf] + bps + [np.inf]
        acc = sum(float(w) * float(phi(float(x))) for x, w in self.atoms)
        for i, p in enumerate(self.density):
            if p.is_zero():
                continue
            lo, hi = edges[i], edges[i + 1]
            acc += _quad(lambda x, p=p: float(p.evalf(x)) * float(phi(x)), lo, hi)
        return acc


def _quad(fn, lo, hi, support=(-50.0, 50.0)):
    lo = max(lo, support[0])
    hi = min(hi, support[1])
    if hi <= lo:
        return 0.0
    return integrate.quad(fn, lo, hi, epsabs=1e-14, epsrel=1e-13, limit=400)[0]


def derivative_measure(u):
    """Du: classical derivative as density, jumps as atoms (zero jumps dropped)."""
    dens = tuple(p.deriv() for p in u.pieces)
    atoms = tuple((x, u.jump(i)) for i, x in enumerate(u.breakpoints) if u.jump(i) != 0)
    return SignedMeasure1D(u.breakpoints, dens, atoms)


def weak_derivative_defect(u, phi, dphi, support):
    """<Du, phi> + int u phi'  (zero for a correct derivative measure)."""
    lo, hi = support
    bps = [float(x) for x in u.breakpoints if lo < float(x) < hi]
    edges = [lo] + bps + [hi]
    acc = 0.0
    for a, b in zip(edges, edges[1:]):
        p = u.pieces[u.piece_index((a + b) / 2)]
        acc += integrate.quad(lambda x: float(p.evalf(x)) * dphi(x), a, b,
                              epsabs=1e-13, epsrel=1e-12, limit=400)[0]
    return derivative_measure(u).pair(phi) + acc


def _sides(u, identity):
    Du = derivative_measure(u)
    half = Fraction(1, 2)
    sq = u.map(lambda p: p * p)
    if identity == "cr1":
        lhs = derivative_measure(sq)
        rhs = Du.times(u).scaled(2)
        corr = None
    elif identity == "cr2":
        lhs = derivative_measure(sq.map(lambda p: p * half))
        rhs = Du.times(u)
        corr = None
    elif identity == "cr3":
        half_sq = sq.map(lambda p: p * half)
        lhs = derivative_measure(u.map(lambda p: p * p * p * half))
        # the factor is (u~)^2/2, not the precise value of u^2/2
        rhs = derivative_measure(half_sq).times(u) + _times_precise_sq_half(Du, u)
        corr = Du.times_atoms({x: u.jump(i) ** 2 / 8 for i, x in enumerate(u.breakpoints)})
    elif identity == "burgers":
        half_sq = sq.map(lambda p: p * half)
        lhs = derivative_measure(u.map(lambda p: p * p * p * Fraction(1, 3)))
        rhs = derivative_measure(half_sq).times(u)
        corr = Du.times_atoms({x: u.jump(i) ** 2 / 12 for i, x in enumerate(u.breakpoints)})
    else:
        raise InputError(f"unknown identity {identity!r}; expected one of {IDENTITIES}")
    _align(lhs, rhs)
    return lhs, rhs, corr


def _times_precise_sq_half(mu, u):
    """mu times (u~)^2/2: density times u^2/2, atoms times the square of the midpoint over 2."""
    pos = {x: i for i, x in enumerate(u.breakpoints)}
    atoms = tuple((x, w * u.precise(pos[x]) ** 2 / 2) for x, w in mu.atoms)
    dens = tuple(p * q * q * Fraction(1, 2) for p, q in zip(mu.density, u.pieces))
    return SignedMeasure1D(mu.breakpoints, dens, atoms)


def _align(*measures):
    bps = {m.breakpoints for m in measures}
    if len(bps) != 1:
        raise InputError("measures live on different partitions")


def chain_rule_check(u, identity, drop_correction=False):
    """Total variation of LHS - RHS for one of the identities.

    cr1:     D(u^2)     = 2 u~ Du
    cr2:     D(u^2/2)   = u~ Du
    cr3:     D(u^3/2)   = u~ D(u^2/2) + (u~^2/2) Du + (1/8)[u]^2 D^j u
    burgers: D(u^3/3)   = u~ D(u^2/2) + (1/12)[u]^2 D^j u

    Returns a Fraction when the density part cancels identically.
    """
    lhs, rhs, corr = _sides(u, identity)
    if corr is not None and not drop_correction:
        rhs = rhs + corr
    return (lhs - rhs).total_variation()


# ---------------------------------------------------------------------------
# Burgers shocks


@dataclass(frozen=True)
class ShockDescription:
    u_minus: Fraction
    u_plus: Fraction
    speed: Fraction = Fraction(0)
    orientation: int = 1     # +1: u_minus is the left state
    x0: Fraction = Fraction(0)
    burgers: bool = True

    def __post_init__(self):
        for name in ("u_minus", "u_plus", "speed", "x0"):
            object.__setattr__(self, name, _q(getattr(self, name)))
        if self.orientation not in (1, -1):
            raise InputError("orientation must be +1 or -1")
        if self.burgers and self.speed != (self.u_minus + self.u_plus) / 2:
            raise InputError("Rankine-Hugoniot fails: speed must be (u- + u+)/2")

    @property
    def left(self):
        return self.u_minus if self.orientation == 1 else self.u_plus

    @property
    def right(self):
        return self.u_plus if self.orientation == 1 else self.u_minus

    def location(self, t):
        return self.x0 + self.speed * _q(t)

    def state(self, t, x):
        """Piecewise-constant solution (floats, vectorised)."""
        x = np.asarray(x, dtype=float)
        xs = float(self.x0) + float(self.speed) * np.asarray(t, dtype=float)
        return np.where(x < xs, float(self.left), float(self.right))

    def rankine_hugoniot_gap(self):
        """s [u] - [u^2/2], zero for a Burgers shock."""
        return self.speed * (self.right - self.left) - (self.right**2 - self.left**2) / 2

    def is_admissible(self):
        return self.left > self.right


def moving_frame_rate(shock):
    """[u^3/3] - s [u^2/2] across the shock (right minus left)."""
    l, r, s = shock.left, shock.right, shock.speed
    return (r**3 - l**3) / 3 - s * (r**2 - l**2) / 2


def burgers_entropy_defect(shock, t=0):
    """Energy defect d_t u^2/2 + d_x u^3/3 as an atom per unit time.

    The weight is (1/12)(u+ - u-)^3 nu_x; it is checked against the
    moving-frame budget and returned exactly.
    """
    if not shock.burgers:
        raise InputError("the entropy defect needs a Burgers shock")
    if shock.rankine_hugoniot_gap() != 0:
        raise InputError("Rankine-Hugoniot fails")
    w = Fraction(1, 12) * (shock.u_plus - shock.u_minus) ** 3 * shock.orientation
    if w != moving_frame_rate(shock):
        raise AssertionError("jump formula and moving-frame budget disagree")
    x = shock.location(t)
    atoms = ((x, w),) if w != 0 else ()
    return SignedMeasure1D((x,), (Poly(), Poly()), atoms)


def shock_time_mass(shock, phi, t_range):
    """int phi(t, x_s(t)) dt along the shock line."""
    s, x0 = float(shock.speed), float(shock.x0)
    return integrate.quad(lambda t: float(phi(np.array([[t, x0 + s * t]]))[0]),
                          *t_range, epsabs=1e-14, epsrel=1e-13, limit=400)[0]


def burgers_weak_residual(shock, phi, t_range, x_range):
    """-int int (u^2/2 d_t phi + u^3/3 d_x phi) dx dt on the support box.

    ``phi`` is a space-time test function of (t, x) with a ``gradient``
    method.  The box is split along the shock line and each side is
    integrated by adaptive quadrature.
    """
    if not isinstance(shock, ShockDescription):
        raise InputError("only single-shock solutions are supported")
    s, x0 = float(shock.speed), float(shock.x0)
    xl, xr = x_range

    def dens(x, t, u):
        g = phi.gradient(np.array([[t, x]]))[0]
        return u * u / 2 * g[0] + u**3 / 3 * g[1]

    def xs(t):
        return min(max(x0 + s * t, xl), xr)

    opts = dict(epsabs=1e-13, epsrel=1e-12)
    left, _ = integrate.dblquad(dens, *t_range, lambda t: xl, xs,
                                args=(float(shock.left),), **opts)
    right, _ = integrate.dblquad(dens, *t_range, xs, lambda t: xr,
                                 args=(float(shock.right),), **opts)
    return -(left + right)


# ---------------------------------------------------------------------------
# fixtures


def parse_fixtures(text):
    """Parse the fixture format.

    ::

        [fixture heaviside]
        breakpoints = 0
        piece = 0
        piece = 1

    Coefficients are ascending and may be rationals such as ``1/3``.
    """
    fixtures = []
    cur = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            head = line[1:-1].split()
            if len(head) != 2 or head[0] != "fixture":
                raise InputError(f"line {lineno}: bad section header")
            cur = {"name": head[1], "breakpoints": [], "pieces": []}
            fixtures.append(cur)
            continue
        if cur is None:
            raise InputError(f"line {lineno}: entry outside a fixture")
        key, sep, val = line.partition("=")
        if not sep:
            raise InputError(f"line {lineno}: expected key = value")
        key = key.strip()
        vals = [Fraction(v) for v in val.split()]
        if key == "breakpoints":
            cur["breakpoints"] = vals
        elif key == "piece":
            cur["pieces"].append(Poly(tuple(vals)))
        else:
            raise InputError(f"line {lineno}: unknown key {key!r}")
    return [PiecewiseBV(f["breakpoints"], f["pieces"], f["name"]) for f in fixtures]


def format_fixtures(functions):
    out = []
    for u in functions:
        out.append(f"[fixture {u.name or 'unnamed'}]")
        out.append("breakpoints = " + " ".join(str(b) for b in u.breakpoints))
        for p in u.pieces:
            out.append(f"piece = {p}")
        out.append("")
    return "\n".join(out)


DEFAULT_FIXTURES = """\
[fixture heaviside]
breakpoints = 0
piece = 0
piece = 1

[fixture sign]
breakpoints = 0
piece = -1
piece = 1

[fixture abs]
breakpoints = 0
piece = 0 -1
piece = 0 1

[fixture heaviside_plus_square]
breakpoints = 0
piece = 0 0 1
piece = 1 0 1

[fixture staircase]
breakpoints = -1 1/3
piece = 0
piece = 1
piece = -1/2

[fixture mixed_polynomial]
breakpoints = -1/2 1
piece = -1 0 1
piece = 1 3
piece = 2 0 0 -1

[fixture burgers_shock]
breakpoints = 0
piece = 1
piece = -1
"""


def default_fixtures():
    return parse_fixtures(DEFAULT_FIXTURES)


def ledger_report(functions, identities=IDENTITIES):
    """Structured text: one line per (fixture, identity) with the exact residual."""
    lines = ["# chain-rule ledger v1", "fixture identity residual residual_without_correction"]
    for u in functions:
        for ident in identities:
            r = chain_rule_check(u, ident)
            rd = chain_rule_check(u, ident, drop_correction=True)
            lines.append(f"{u.name} {ident} {r} {rd}")
    return "\n".join(lines) + "\n"
