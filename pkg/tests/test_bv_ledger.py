from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dissipation_lab.bv_ledger import (IDENTITIES, PiecewiseBV, Poly, ShockDescription,
                                       burgers_entropy_defect, burgers_weak_residual,
                                       chain_rule_check, default_fixtures, derivative_measure,
                                       format_fixtures, ledger_report, moving_frame_rate,
                                       parse_fixtures, shock_time_mass, weak_derivative_defect)
from dissipation_lab.errors import InputError
from dissipation_lab.testfunctions import bump


def _fixture(name):
    return {u.name: u for u in default_fixtures()}[name]


def _phi1(c=0.1, r=1.5):
    """Scalar bump and its derivative in closed form."""
    def phi(x):
        s = (x - c) / r
        return np.exp(-1.0 / (1.0 - s * s)) if abs(s) < 1 else 0.0

    def dphi(x):
        s = (x - c) / r
        if abs(s) >= 1:
            return 0.0
        return phi(x) * (-2.0 * s / (1.0 - s * s) ** 2) / r
    return phi, dphi


def test_derivative_measure_examples():
    H = derivative_measure(_fixture("heaviside"))
    assert H.atoms == ((Fraction(0), Fraction(1)),)
    assert all(p.is_zero() for p in H.density)
    A = derivative_measure(_fixture("abs"))
    assert A.atoms == ()
    assert A.density == (Poly((-1,)), Poly((1,)))
    S = derivative_measure(_fixture("staircase"))
    assert S.atom_dict() == {Fraction(-1): Fraction(1), Fraction(1, 3): Fraction(-3, 2)}
    assert S.total_variation() == Fraction(5, 2)


def test_weak_derivative_defect_small():
    phi, dphi = _phi1()
    for u in default_fixtures():
        assert abs(weak_derivative_defect(u, phi, dphi, (-1.4, 1.6))) < 1e-10


@pytest.mark.parametrize("identity", IDENTITIES)
def test_identities_hold_exactly(identity):
    for u in default_fixtures():
        r = chain_rule_check(u, identity)
        assert isinstance(r, Fraction) and r == 0, (u.name, identity)


def test_correction_terms_are_needed():
    h = _fixture("heaviside")
    assert chain_rule_check(h, "burgers", drop_correction=True) == Fraction(1, 12)
    assert chain_rule_check(h, "cr3", drop_correction=True) == Fraction(1, 8)
    s = _fixture("sign")
    assert chain_rule_check(s, "burgers", drop_correction=True) == Fraction(2, 3)
    assert chain_rule_check(s, "cr3", drop_correction=True) == Fraction(1)
    # continuous functions need no correction
    assert chain_rule_check(_fixture("abs"), "cr3", drop_correction=True) == 0


@settings(max_examples=25, deadline=None)
@given(st.lists(st.fractions(-3, 3, max_denominator=7), min_size=2, max_size=4),
       st.fractions(-2, 2, max_denominator=5))
def test_identities_random_step_functions(values, slope):
    bps = tuple(Fraction(k, 2) for k in range(len(values) - 1))
    u = PiecewiseBV(bps, tuple(Poly((v, slope)) for v in values))
    for ident in IDENTITIES:
        assert chain_rule_check(u, ident) == 0


def test_entropy_defect_atoms():
    st_ = burgers_entropy_defect(ShockDescription(1, -1, 0))
    assert st_.atoms == ((Fraction(0), Fraction(-2, 3)),)
    mv = ShockDescription(1, 0, Fraction(1, 2))
    d = burgers_entropy_defect(mv, t=2)
    assert d.atoms == ((Fraction(1), Fraction(-1, 12)),)
    assert moving_frame_rate(mv) == Fraction(-1, 12)
    assert burgers_entropy_defect(ShockDescription(0, 0, 0)).atoms == ()
    with pytest.raises(InputError):
        ShockDescription(1, 0, 0)


def test_weak_residual_matches_defect():
    for sh in (ShockDescription(1, -1, 0), ShockDescription(1, 0, Fraction(1, 2))):
        phi = bump((0.5, 0.1), 0.35)   # (t, x)
        weak = burgers_weak_residual(sh, phi, (0.15, 0.85), (-0.25, 0.95))
        atom = burgers_entropy_defect(sh).atoms[0][1]
        mass = shock_time_mass(sh, phi, (0.15, 0.85))
        assert weak == pytest.approx(float(atom) * mass, abs=1e-8)
        assert sh.is_admissible() and sh.rankine_hugoniot_gap() == 0


def test_fixture_roundtrip_and_errors():
    fx = default_fixtures()
    again = parse_fixtures(format_fixtures(fx))
    assert [(u.name, u.breakpoints, u.pieces) for u in again] == \
           [(u.name, u.breakpoints, u.pieces) for u in fx]
    with pytest.raises(InputError):
        parse_fixtures("[fixture a]\nbreakpoints = 1 0\npiece = 0\npiece = 1\npiece = 2\n")
    with pytest.raises(InputError):
        parse_fixtures("piece = 1\n")
    with pytest.raises(InputError):
        parse_fixtures("[fixture a]\ncolour = 2\n")
    with pytest.raises(InputError):
        chain_rule_check(fx[0], "cr9")


def test_ledger_report_lines():
    text = ledger_report(default_fixtures())
    lines = text.strip().splitlines()
    assert len(lines) == 2 + len(default_fixtures()) * len(IDENTITIES)
    assert "heaviside cr3 0 1/8" in lines
    assert "heaviside burgers 0 1/12" in lines
