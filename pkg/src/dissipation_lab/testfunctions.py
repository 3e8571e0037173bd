"""Closed-form compactly supported test functions.

Every test function is ``P(x - c) * B(|x - c| / R)`` where ``B`` is the
standard bump ``exp(1 - 1/(1 - s^2))`` (peak value 1 at the centre) and ``P`` a
polynomial in the shifted coordinates.  Values and gradients are exact.
"""
from dataclasses import dataclass

import numpy as np

from .errors import InputError


def _bump_and_derivative(s2):
    """B and dB/d(s^2) for the peak-normalised bump."""
    b = np.zeros_like(s2)
    db = np.zeros_like(s2)
    inside = s2 < 1.0
    q = 1.0 - s2[inside]
    b[inside] = np.exp(1.0 - 1.0 / q)
    db[inside] = -b[inside] / q**2
    return b, db


@dataclass(frozen=True)
class TestFunction:
    """Polynomial times bump.

    ``poly`` maps exponent tuples to coefficients, e.g. ``{(0, 0): 1.0}`` for a
    plain bump or ``{(1, 0): 1.0}`` for ``(x_1 - c_1) * bump``.
    """

    __test__ = False  # not a pytest class

    center: tuple
    radius: float
    poly: tuple = ()
    label: str = "bump"

    def __post_init__(self):
        c = tuple(float(v) for v in np.atleast_1d(self.center))
        object.__setattr__(self, "center", c)
        if self.radius <= 0:
            raise InputError("test function radius must be positive")
        poly = dict(self.poly) if self.poly else {(0,) * len(c): 1.0}
        for exps in poly:
            if len(exps) != len(c):
                raise InputError("polynomial exponents do not match the dimension")
        object.__setattr__(self, "poly", tuple(sorted(poly.items())))

    @property
    def dim(self):
        return len(self.center)

    def support_box(self):
        c = np.asarray(self.center)
        return c - self.radius, c + self.radius

    def _parts(self, pts):
        pts = np.asarray(pts, dtype=float).reshape(-1, self.dim)
        y = pts - np.asarray(self.center)
        s2 = np.einsum("pi,pi->p", y, y) / self.radius**2
        b, db = _bump_and_derivative(s2)
        p = np.zeros(len(y))
        dp = np.zeros_like(y)
        for exps, coef in self.poly:
            mono = coef * np.ones(len(y))
            for a, e in enumerate(exps):
                mono = mono * y[:, a] ** e
            p += mono
            for a, e in enumerate(exps):
                if e == 0:
                    continue
                term = coef * e * np.ones(len(y))
                for b_, e2 in enumerate(exps):
                    term = term * y[:, b_] ** (e2 - 1 if b_ == a else e2)
                dp[:, a] += term
        return y, b, db, p, dp

    def __call__(self, pts):
        _, b, _, p, _ = self._parts(pts)
        return p * b

    def gradient(self, pts):
        y, b, db, p, dp = self._parts(pts)
        return dp * b[:, None] + (p * db * 2.0 / self.radius**2)[:, None] * y

    def lipschitz(self, samples=201):
        """sup |grad phi| estimated on a dense tensor sample of the support."""
        axes = [np.linspace(c - self.radius, c + self.radius, samples) for c in self.center]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, self.dim)
        return float(np.max(np.linalg.norm(self.gradient(pts), axis=1)))

    def describe(self):
        return f"{self.label}(center={list(self.center)}, radius={self.radius:g})"


def bump(center, radius):
    return TestFunction(center, radius, label="bump")


def coordinate_bump(center, radius, axis=0):
    center = tuple(np.atleast_1d(center))
    exps = tuple(1 if a == axis else 0 for a in range(len(center)))
    return TestFunction(center, radius, {exps: 1.0}, label=f"x{axis + 1}-bump")


def random_test_function(rng, lower, upper, degree=2, radius_range=(0.15, 0.35)):
    """Random polynomial-times-bump with support inside ``[lower, upper]``."""
    lower = np.atleast_1d(np.asarray(lower, float))
    upper = np.atleast_1d(np.asarray(upper, float))
    dim = len(lower)
    span = float(np.min(upper - lower))
    r = rng.uniform(*radius_range) * span / 2
    c = rng.uniform(lower + r, upper - r)
    poly = {}
    for _ in range(3):
        exps = tuple(int(v) for v in rng.integers(0, degree + 1, size=dim))
        poly[exps] = poly.get(exps, 0.0) + float(rng.normal())
    return TestFunction(tuple(c), r, poly, label="random")


LIBRARY = {
    "bump": bump,
    "offset_bump": bump,
    "coordinate_bump": coordinate_bump,
}


def from_spec(spec):
    """Build a test function from a config mapping."""
    kind = spec.get("kind", "bump")
    if kind not in LIBRARY:
        raise InputError(f"unknown test function kind {kind!r}")
    kwargs = {k: v for k, v in spec.items() if k != "kind"}
    return LIBRARY[kind](**kwargs)
