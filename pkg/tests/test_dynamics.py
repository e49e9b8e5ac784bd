"""Total-system integrator: structure of the equations, conservation,
convergence order, and the secular-to-single-channel reduction."""

import numpy as np
import pytest

from qjumps import BathSpec, build_grid, integrate, make_system
from qjumps.oracles import exact_amplitude


def _system(name, gamma0, detunings, n_modes, window=None):
    grid = build_grid(BathSpec(gamma0=gamma0, detunings=detunings,
                               n_modes=n_modes, window=window))
    return make_system(name, grid, detunings)


def test_rhs_uncoupled_is_zero():
    sysm = _system("tla", 0.0, (2.0,), 16)
    y = sysm.initial_state()
    np.testing.assert_array_equal(sysm.rhs(0.7, y), np.zeros_like(y))


def test_rhs_single_resonant_mode_structure():
    sysm = _system("tla", 2.0, (0.0,), 1, window=5.0)
    g = sysm.grid.couplings[0]
    y = np.zeros(3, dtype=complex)
    y[1] = 1.0
    out = sysm.rhs(1.3, y)  # on resonance the phases drop out
    assert out[0] == 0.0
    assert out[1] == pytest.approx(0.0)
    assert out[2] == pytest.approx(g)
    y2 = np.zeros(3, dtype=complex)
    y2[2] = 1.0
    out2 = sysm.rhs(1.3, y2)
    assert out2[1] == pytest.approx(-g)
    assert out2[2] == pytest.approx(0.0)


def test_single_mode_rabi_population():
    # one resonant mode: |c_e|^2 = cos^2(g t)
    sysm = _system("tla", 2.0, (0.0,), 1, window=5.0)
    g = sysm.grid.couplings[0]
    traj = integrate(sysm, 6.0 / g, 1e-3)
    err = np.abs(np.abs(traj.csys[:, 1]) ** 2 - np.cos(g * traj.t) ** 2)
    assert err.max() < 1e-6


def test_norm_conservation_and_frozen_ground_amplitude():
    sysm = _system("tla", 0.8, (3.0,), 60)
    traj = integrate(sysm, 2.0, 1e-3)
    budget = 1e-8 * np.maximum(traj.t, traj.dt)
    assert np.all(traj.drift() <= budget)
    # the ground amplitude never appears in any derivative: bit identical
    assert np.all(traj.csys[:, 0] == traj.csys[0, 0])


def test_population_matches_continuum():
    sysm = _system("tla", 4.0, (-4.0,), 180)
    traj = integrate(sysm, 2.0, 1e-3)
    exact = np.abs(exact_amplitude(4.0, 1.0, -4.0, traj.t)) ** 2
    assert np.max(np.abs(np.abs(traj.csys[:, 1]) ** 2 - exact)) < 2e-3


def test_mode_doubling_converges_to_continuum():
    errs = []
    for n in (20, 40, 80):
        a = integrate(_system("tla", 4.0, (-4.0,), n), 2.0, 2e-3)
        b = integrate(_system("tla", 4.0, (-4.0,), 2 * n), 2.0, 2e-3)
        errs.append(np.max(np.abs(np.abs(a.csys[:, 1]) ** 2
                                  - np.abs(b.csys[:, 1]) ** 2)))
    assert errs[0] > errs[1] > errs[2]


def test_v_secular_with_empty_b_reduces_to_tla():
    tla = _system("tla", 4.0, (-4.0,), 24)
    vsec = _system("v_secular", 4.0, (-4.0, 1.5), 24)
    init = np.zeros(vsec.dim_total, dtype=complex)
    init[1] = 1.0  # all weight on level a, channel b never populates
    ta = integrate(tla, 1.5, 1e-3)
    tv = integrate(vsec, 1.5, 1e-3, initial=init)
    assert np.max(np.abs(tv.csys[:, 1] - ta.csys[:, 1])) < 1e-12
    assert np.max(np.abs(tv.csys[:, 2])) == 0.0
    assert np.max(np.abs(tv.p1[:, 1])) == 0.0


def test_v_nonsecular_shared_register_cross_feeds():
    # a shared register lets the bath repopulate level b even when it
    # starts empty; the split-register variant cannot do that
    vnon = _system("v_nonsecular", 4.0, (-4.0, 1.5), 24)
    init = np.zeros(vnon.dim_total, dtype=complex)
    init[1] = 1.0
    tv = integrate(vnon, 1.5, 1e-3, initial=init)
    assert np.max(np.abs(tv.csys[:, 2])) > 1e-3


def test_rk4_fourth_order_in_dt():
    sysm = _system("tla", 4.0, (-4.0,), 8, window=5.0)
    ref = integrate(sysm, 1.0, 1.25e-4).csys[-1, 1]
    e1 = abs(integrate(sysm, 1.0, 1e-3).csys[-1, 1] - ref)
    e2 = abs(integrate(sysm, 1.0, 5e-4).csys[-1, 1] - ref)
    assert 12.0 < e1 / e2 < 20.0


def test_snapshot_bookkeeping():
    sysm = _system("tla", 0.8, (3.0,), 12)
    traj = integrate(sysm, 0.1, 1e-3, stride=7)
    assert traj.snap_steps[0] == 0
    assert traj.snap_steps[-1] == traj.n_steps
    assert np.all(np.diff(traj.snap_steps[:-1]) == 7)
    assert traj.mode_snaps.shape == (traj.snap_steps.size, 1, 12)


def test_initial_state_validation():
    sysm = _system("tla", 0.8, (3.0,), 12)
    with pytest.raises(ValueError):
        integrate(sysm, 1.0, 1e-3, initial=np.zeros(5, dtype=complex))
    bad = sysm.initial_state() * 2.0
    with pytest.raises(ValueError):
        integrate(sysm, 1.0, 1e-3, initial=bad)
    with pytest.raises(ValueError):
        integrate(sysm, -1.0, 1e-3)
    with pytest.raises(ValueError):
        integrate(sysm, 1.0, -1e-3)


def test_norm_abort_on_unstable_step():
    # dt far beyond the stability limit must trip the norm guard, not
    # silently return garbage
    sysm = _system("tla", 20.0, (0.0,), 16, window=30.0)
    with pytest.raises(RuntimeError):
        integrate(sysm, 40.0, 1.0)


def test_make_system_validation():
    grid = build_grid(BathSpec(gamma0=1.0, detunings=(0.0,), n_modes=8))
    with pytest.raises(ValueError):
        make_system("nope", grid, (0.0,))
    with pytest.raises(ValueError):
        make_system("tla", grid, (0.0, 1.0))
    with pytest.raises(ValueError):
        make_system("v_secular", grid, (0.0,))
