"""Acceptance suite: one PASS/FAIL line per criterion at the stated tolerances.

Lines are collected in ``RESULTS`` and echoed in the pytest terminal summary;
``python tests/test_acceptance.py`` runs the suite standalone.
"""
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate

from dissipation_lab.bv_ledger import (IDENTITIES, ShockDescription, burgers_entropy_defect,
                                       burgers_weak_residual, chain_rule_check,
                                       default_fixtures, shock_time_mass)
from dissipation_lab.flux import (cet_flux, dr_flux, fit_exponent, flux_scan,
                                  reynolds_stress, richardson, vorticity_form_residual)
from dissipation_lab.kernel_opt import (AnisotropyProblem, anisotropy_functional,
                                        optimize_kernel, trace_lower_bound)
from dissipation_lab.local_structure import alpha_profile, classify_point
from dissipation_lab.mollify import KernelProfile, build_kernel, commutator_norm, mollify_points
from dissipation_lab.scenarios import generate_scenario
from dissipation_lab.testfunctions import bump, random_test_function

RESULTS = []


def report(tag, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} {tag}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def alpha_bar_oracle():
    """Continuum int alpha (1 - alpha) rho for the 2D bump, by nested adaptive quadrature."""
    f = lambda s, t: np.exp(-1.0 / (1.0 - s * s - t * t)) if s * s + t * t < 1 else 0.0
    raw = lambda t: integrate.quad(lambda s: f(s, t), -np.sqrt(max(1 - t * t, 0)),
                                   np.sqrt(max(1 - t * t, 0)), epsabs=1e-14)[0]
    tot = integrate.quad(raw, -1, 1, epsabs=1e-14)[0]
    A = lambda t: integrate.quad(raw, -1, t, epsabs=1e-14)[0] / tot
    return integrate.quad(lambda t: A(t) * (1 - A(t)) * raw(t) / tot, -1, 1, epsabs=1e-12)[0]


@pytest.fixture(scope="module")
def rho():
    return build_kernel(KernelProfile(), 2, 17)


# --------------------------------------------------------------------------- 1


def test_c1_exact_cancellations(rho):
    shear = generate_scenario("flat_shear")
    worst = 0.0
    for ell in (0.2, 0.1, 0.05, 0.025):
        worst = max(worst, float(np.max(np.abs(cet_flux(shear.u, rho, ell).values))),
                    float(np.max(np.abs(dr_flux(shear.u, rho, ell).values))))
    half = build_kernel(KernelProfile(radius=0.5), 2, 17)
    rng = np.random.default_rng(0)
    vort, count = 0.0, 0
    for sid in ("flat_shear", "circular_vortex_sheet", "taylor_green", "sawtooth_shear"):
        real = generate_scenario(sid)
        lo, hi = real.grid.node_bounds()
        for _ in range(10):
            phi = random_test_function(rng, lo + 0.1, hi - 0.1)
            vort = max(vort, abs(vorticity_form_residual(real.u, half, 0.1, phi)))
            count += 1
    report("C1 exact cancellations", worst < 1e-12 and vort < 1e-12,
           f"flat_shear max|D_cet|,|D_dr| = {worst:.2e}; vorticity residual max = {vort:.2e} "
           f"over {count} (scenario, phi) pairs")


# --------------------------------------------------------------------------- 2


C2_LADDER = [0.2 / 2**k for k in range(5)]


@pytest.fixture(scope="module")
def sheet():
    t0 = time.time()
    real = generate_scenario("circular_vortex_sheet", counts=(1024, 1024))
    return real, time.time() - t0


def _c2_line(kind, rho, sheet):
    real, setup = sheet
    t0 = time.time()
    s = flux_scan(real.u, rho, kind, C2_LADDER, bump((1.0, 0.0), 0.3), p=real.p)
    mags = np.abs(s.pairings)
    mono = bool(np.all(np.diff(mags) < 0))
    rel = abs(s.extrapolate()[0]) / mags[0]
    dt = setup + time.time() - t0
    detail = (f"|pairings| = {', '.join(f'{m:.3e}' for m in mags)}; monotone={mono}; "
              f"|limit|/|p0| = {rel:.4f}; runtime {dt:.0f} s")
    return mono and rel < 0.02 and dt < 120, detail


def test_c2a_vortex_sheet_cet_pairing(sheet):
    # a radial kernel makes D_cet vanish pointwise on the circle, so this scan uses an
    # anisotropic kernel to get a nonzero finite-scale flux
    aniso = build_kernel(KernelProfile("anisotropic-bump", matrix=((2.0, 0.3), (0.3, 0.5))), 2, 17)
    ok, detail = _c2_line("cet", aniso, sheet)
    report("C2a vortex-sheet CET pairing -> 0", ok, detail)


def test_c2b_vortex_sheet_bd_pairing(sheet):
    # the deformation flux requires a radial kernel, for which the pairing vanishes
    # identically by symmetry; what remains is rounding and grid noise
    ok, detail = _c2_line("bd", build_kernel(KernelProfile(), 2, 17), sheet)
    report("C2b vortex-sheet BD pairing -> 0", ok, detail)


# --------------------------------------------------------------------------- 3


def test_c3_burgers_defect():
    real = generate_scenario("burgers_stationary_shock")
    rho1 = build_kernel(KernelProfile(), 1, 17)
    phi = bump((0.0,), 0.5)
    s = flux_scan(real.u, rho1, "dr", [0.4, 0.2, 0.1, 0.05], phi, burgers=True)
    mass = float(phi(np.zeros((1, 1)))[0])
    # the flux pairs with -D; D = -(2/3) delta on the shock
    D_est = -s.extrapolate()[0]
    target = -2.0 / 3.0 * mass
    err = abs(D_est / target - 1)
    atom = burgers_entropy_defect(ShockDescription(1, -1, 0)).atoms[0][1]
    mv = ShockDescription(1, 0, Fraction(1, 2))
    psi = bump((0.5, 0.1), 0.35)
    rate = burgers_weak_residual(mv, psi, (0.15, 0.85), (-0.25, 0.95)) / \
        shock_time_mass(mv, psi, (0.15, 0.85))
    ok = err < 0.02 and atom == Fraction(-2, 3) and abs(rate + 1 / 12) < 1e-6
    report("C3 Burgers defect", ok,
           f"dr limit {D_est:.6f} vs {target:.6f} (rel err {err:.2e}); exact atom {atom}; "
           f"moving rate {rate:.9f} vs -1/12")


# --------------------------------------------------------------------------- 4


def test_c4a_chain_rule_identities():
    fx = default_fixtures()
    res = {(u.name, i): chain_rule_check(u, i) for u in fx for i in IDENTITIES}
    ok = len(fx) >= 6 and all(isinstance(r, Fraction) and r == 0 for r in res.values())
    report("C4a chain-rule identities exact", ok,
           f"{len(fx)} fixtures x {len(IDENTITIES)} identities, nonzero residuals: "
           f"{sum(r != 0 for r in res.values())}")


def test_c4b_dropped_correction_heaviside():
    h = {u.name: u for u in default_fixtures()}["heaviside"]
    r = chain_rule_check(h, "cr3", drop_correction=True)
    report("C4b Heaviside cr3 without correction == 1/12", r == Fraction(1, 12),
           f"residual {r} (the 1/8 term's weight; the u^3/3 identity gives "
           f"{chain_rule_check(h, 'burgers', drop_correction=True)})")


# --------------------------------------------------------------------------- 5


def test_c5_limit_reynolds_stress(rho):
    real = generate_scenario("flat_shear")
    x0 = np.array([[0.1, 0.0]])
    vals = []
    for ell in (0.2, 0.1, 0.05, 0.025):
        box = ((x0[0] - 2.2 * ell).tolist(), (x0[0] + 2.2 * ell).tolist())
        R = reynolds_stress(real.u, rho, ell, box=box)
        v, _ = mollify_points(R.as_field(), rho, ell, x0)
        vals.append(v[0])
    lim = np.array([richardson([a, b])[0] for a, b in zip(vals[-2], vals[-1])]).reshape(2, 2)
    ab = alpha_bar_oracle()
    target = 4 * ab * np.array([[1.0, 0.0], [0.0, 0.0]])
    rel = np.linalg.norm(lim - target) / np.linalg.norm(target)
    ys = np.random.default_rng(5).uniform(-1, 1, size=(50, 2))
    sym = float(np.max(np.abs(alpha_profile(rho, ys) + alpha_profile(rho, -ys) - 1)))
    ok = rel < 0.01 and 0 < ab <= 0.25 and sym < 1e-8
    report("C5 limit Reynolds stress", ok,
           f"R11 limit {lim[0, 0]:.5f} vs 4*abar {4 * ab:.5f} (rel err {rel:.2e}); "
           f"abar oracle {ab:.8f}; max|a(y)+a(-y)-1| {sym:.1e}")


# --------------------------------------------------------------------------- 6


def test_c6_kernel_optimization():
    J_I = anisotropy_functional(build_kernel(KernelProfile(), 2, 24), np.eye(2))
    t0 = time.time()
    prob = AnisotropyProblem(((1.0, 0.0), (0.0, -1.0)))
    res = optimize_kernel(prob)
    ratio = res.J / res.baseline
    ok = abs(J_I - 2) < 1e-3 and res.evaluations <= 500 and ratio <= 0.2 and res.violations == 0
    report("C6 kernel optimization", ok,
           f"J(I) = {J_I:.6f}; diag(1,-1): J = {res.J:.5f}, baseline {res.baseline:.5f}, "
           f"ratio {ratio:.3f} in {res.evaluations} evaluations, lower-bound violations "
           f"{res.violations} (|tr M| = {trace_lower_bound(prob.M):g}); {time.time() - t0:.0f} s")


# --------------------------------------------------------------------------- 7


CLS_LADDER = (0.1, 0.05, 0.025, 0.0125)


def _local(sid, x0):
    hw = 2.5 * CLS_LADDER[0]
    n = int(np.ceil(2 * hw / (CLS_LADDER[-1] / 16)))
    return generate_scenario(sid, counts=(n, n),
                             bounds=((x0[0] - hw, x0[1] - hw), (x0[0] + hw, x0[1] + hw)))


def test_c7_blowup_classifier():
    rho64 = build_kernel(KernelProfile(), 2, 64)
    th = np.linspace(0, 2 * np.pi, 8, endpoint=False) + 0.1
    probes = {"flat_shear": [np.array([0.4 * np.cos(t), 0.0]) for t in th],
              "circular_vortex_sheet": [np.array([np.cos(t), np.sin(t)]) for t in th]}
    worst_u, worst_ang, tags = 0.0, 0.0, []
    for sid, pts in probes.items():
        for x0 in pts:
            real = _local(sid, x0)
            c = classify_point(real.u, x0, CLS_LADDER, rho64)
            tags.append(c.tag)
            if c.tag != "jump":
                continue
            up, um, nu = real.scenario.jump_truth(x0)
            p = c.profile
            if np.dot(nu, p.nu) < 0:
                up, um, nu = um, up, -nu
            worst_u = max(worst_u, np.max(np.abs(np.array(p.u_plus) - up)),
                          np.max(np.abs(np.array(p.u_minus) - um)))
            worst_ang = max(worst_ang, np.degrees(np.arccos(min(1.0, float(np.dot(nu, p.nu))))))
    smooth_res, smooth_tags = 0.0, []
    for t in th[:4]:
        x0 = np.array([np.pi + 1.5 * np.cos(t), np.pi + 1.5 * np.sin(t)])
        c = classify_point(_local("taylor_green", x0).u, x0, CLS_LADDER, rho64)
        smooth_tags.append(c.tag)
        smooth_res = max(smooth_res, max(r[0] for r in list(c.residuals.values())[-2:]))
    ok = (all(t == "jump" for t in tags) and worst_u < 2e-2 and worst_ang < 2.0
          and all(t == "lebesgue" for t in smooth_tags) and smooth_res < 1e-3)
    report("C7 blow-up classifier", ok,
           f"{tags.count('jump')}/{len(tags)} jumps, max u-error {worst_u:.2e}, max nu-error "
           f"{worst_ang:.3f} deg; smooth {smooth_tags.count('lebesgue')}/{len(smooth_tags)} "
           f"lebesgue, residual {smooth_res:.1e}")


# --------------------------------------------------------------------------- 8


def test_c8_order_checks(rho):
    tg = generate_scenario("taylor_green")
    phi = bump((np.pi, np.pi), 1.5)
    ladder = [0.8, 0.4, 0.2, 0.1]
    s = flux_scan(tg.u, rho, "cet", ladder, phi)
    cn = [commutator_norm(phi, tg.u, rho, e) for e in ladder]
    q = fit_exponent(ladder, cn)
    report("C8 order checks", s.fit_exponent >= 1.7 and q >= 0.9,
           f"CET sup exponent {s.fit_exponent:.2f}; commutator exponent {q:.2f}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
