from fractions import Fraction

import numpy as np
import pytest

from dissipation_lab.errors import InputError, RegistryError
from dissipation_lab.scenarios import audit, generate_scenario, get_scenario, scenario_ids


@pytest.mark.parametrize("sid", scenario_ids())
def test_audit_passes(sid):
    checks = audit(sid)
    assert checks
    for c in checks:
        assert c.passed, (c.name, c.value, c.tolerance)


def test_registry_errors():
    with pytest.raises(RegistryError):
        get_scenario("kelvin_helmholtz")
    with pytest.raises(InputError):
        get_scenario("flat_shear", {"tilt": 1.0})
    with pytest.raises(InputError):
        generate_scenario("flat_shear", counts=(16, 16), subsamples=0)


def test_dissipation_values():
    assert get_scenario("burgers_stationary_shock").dissipation == Fraction(-2, 3)
    assert get_scenario("burgers_moving_shock").dissipation == Fraction(-1, 12)
    for sid in ("flat_shear", "circular_vortex_sheet", "taylor_green", "sawtooth_shear"):
        assert get_scenario(sid).dissipation == 0


def test_jump_distance_and_truth():
    sc = get_scenario("flat_shear", {"angle": np.pi / 6})
    nu = np.array([-0.5, np.sqrt(3) / 2])
    assert sc.jump_distance(np.array([np.sqrt(3), 1.0]) * 0.3) < 1e-12
    assert sc.jump_distance(0.2 * nu) == pytest.approx(0.2)
    up, um, n = sc.jump_truth(np.zeros(2))
    assert np.allclose(n, nu) and np.allclose(up, -um)
    circ = get_scenario("circular_vortex_sheet")
    assert circ.jump_distance(np.array([0.6, 0.8])) < 1e-12
    up, um, n = circ.jump_truth(np.array([0.6, 0.8]))
    # inside rotates rigidly, outside at rest
    assert np.allclose(um, [-0.8, 0.6]) and np.allclose(up, 0.0) and np.allclose(n, [0.6, 0.8])
    saw = get_scenario("sawtooth_shear")
    assert saw.jump_distance(np.array([0.0, 0.5])) < 1e-12
    assert saw.jump_distance(np.array([0.0, 0.1])) == pytest.approx(0.4)
    mv = get_scenario("burgers_moving_shock")
    assert mv.jump_distance(np.array([0.25]), 0.5) == 0.0
    assert get_scenario("taylor_green").jump_distance(np.zeros(2)) == np.inf


def test_generate_and_cell_average():
    r = generate_scenario("flat_shear", counts=(32, 32))
    assert r.u.values.shape == (32, 32, 2) and r.p is not None and r.f is not None
    assert np.array_equal(np.unique(r.u.values[..., 0]), [-1.0, 1.0])
    b = generate_scenario("burgers_moving_shock", counts=(64,), time=0.5)
    x = b.grid.points()[:, 0]
    assert np.all(b.u.values[x < 0.25, 0] == 1.0) and np.all(b.u.values[x > 0.25, 0] == 0.0)
    assert b.p is None
    # cell averages of the sheet put intermediate values only in the cells it crosses
    a = generate_scenario("flat_shear", counts=(33, 33), subsamples=4)
    mid = a.u.values[:, 16, 0]
    assert np.allclose(mid, 0.0, atol=1e-14)
    assert np.allclose(np.abs(a.u.values[:, [15, 17], 0]), 1.0)
