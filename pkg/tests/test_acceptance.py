"""Acceptance gate: one test per stated criterion, each at its stated
tolerance, reporting a pass/fail line into the terminal summary.

The six stock scenarios run once at full fidelity (module fixture); the
criteria then read the bundles, the summaries, or recompute library-level
quantities where a bundle-independent check is wanted.
"""

import json
import time

import numpy as np
import pytest
from conftest import record

from qjumps import (BathSpec, build_grid, compare, gaw_rates, integrate,
                    make_system, nmqj_rate_factors, rate_series, run)
from qjumps import current_series
from qjumps import gaw as gaw_engine
from qjumps import nmqj as nmqj_engine
from qjumps.cli import main
from qjumps.harness import _read_rho, _read_table
from qjumps.oracles import exact_rates

SCENARIOS = ("fig1", "fig2", "fig3", "fig4", "fig5", "fig6")


@pytest.fixture(scope="module")
def bundles(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance")
    out = {}
    for name in SCENARIOS:
        t0 = time.perf_counter()
        summary = run(name, root / name)
        out[name] = (root / name, summary, time.perf_counter() - t0)
    return out


def _flat_summaries(bundles):
    """(label, summary) for every single-system run, expanding the two-part
    scenario into its sub-runs."""
    for name, (_, s, _) in bundles.items():
        if "cross" in s:
            yield f"{name}/secular", s["secular"]
            yield f"{name}/nonsecular", s["nonsecular"]
        else:
            yield name, s


def test_criterion_1_norm_and_runtime(bundles):
    worst_drift = max(s["integration"]["max_drift_per_time"]
                      for _, s in _flat_summaries(bundles))
    worst_wall = max(wall for _, _, wall in bundles.values())
    ok = worst_drift <= 1e-8 and worst_wall < 10.0
    assert record(1, ok,
                  f"norm drift <= {worst_drift:.2e} * t (allowed 1e-8 * t), "
                  f"slowest scenario {worst_wall:.1f} s (allowed 10 s)")


def test_criterion_2_rate_current_bridge(bundles):
    worst = 0.0
    for label, s in _flat_summaries(bundles):
        if label.endswith("nonsecular") or s["system"] == "v_nonsecular":
            continue  # shared register has no per-channel identity
        for ch, entry in s["rates"]["per_channel"].items():
            worst = max(worst, entry["bridge_max_err"])
    assert record(2, worst <= 1e-10,
                  f"max |J - Delta |c|^2| = {worst:.2e} (allowed 1e-10)")


def test_criterion_3_markovian_combined_positive_modes_negative(bundles):
    _, s, _ = bundles["fig1"]
    cur = s["currents"]
    comb_min = cur["per_channel"]["e"]["min_tpos"]
    mode_min = cur["per_mode_min"]
    ok = comb_min > 0.0 and mode_min < 0.0
    assert record(3, ok,
                  f"combined current min (t > 0) = {comb_min:.2e} > 0 while "
                  f"per-mode min = {mode_min:.2e} < 0")


def test_criterion_4_negative_interval_and_reverse_jump_legality(bundles):
    _, s, _ = bundles["fig3"]
    neg = s["currents"]["per_channel"]["e"]["has_negative_interval"]
    em = s["ensembles"]["nmqj"]
    ok = neg and em["trajectories"] == 10000 and em["reverse_events"] > 0 \
        and em["reverse_sign_violations"] == 0
    assert record(4, ok,
                  f"negative current interval present; {em['reverse_events']} "
                  f"reverse jumps over M=10^4, {em['reverse_sign_violations']} "
                  "outside Delta < 0 windows")


def test_criterion_5_continuum_agreement_improves_with_modes():
    # At a fixed window the error floors at the spectral truncation of the
    # far Lorentzian tails (visible at short times), so refining toward the
    # continuum doubles the covered bandwidth along with the mode count,
    # holding the comb spacing fixed.
    errs = {}
    for n, w in ((180, None), (360, 40.0)):
        grid = build_grid(BathSpec(gamma0=4.0, detunings=(-4.0,), n_modes=n,
                                   window=w))
        traj = integrate(make_system("tla", grid, (-4.0,)), 4.0, 1e-3)
        rs = rate_series(traj)
        dl, _ = exact_rates(4.0, 1.0, -4.0, traj.t)
        ok = rs.defined[:, 0]
        errs[n] = float(np.max(np.abs(rs.delta[ok, 0] - dl[ok])))
    good = errs[180] <= 0.05 * 4.0 and errs[360] < errs[180]
    assert record(5, good,
                  f"rate L_inf vs continuum on [0,4]: {errs[180]:.4f} at "
                  f"N=180 (allowed 0.2), {errs[360]:.4f} at N=360 with the "
                  "comb spacing held fixed")


def test_criterion_6_unraveling_equivalence():
    grid = build_grid(BathSpec(gamma0=4.0, detunings=(-4.0,), n_modes=180))
    traj = integrate(make_system("tla", grid, (-4.0,)), 5.0, 1e-3)
    cs = current_series(traj)
    t10, t01 = gaw_rates(cs)
    fwd, rev = nmqj_rate_factors(cs)

    # deterministic bridge: the reverse transition probabilities agree
    # wherever both constructions are defined
    p0, p1 = cs.p0, cs.p1[:, 0]
    both = (np.isfinite(t01[:, 0]) & np.isfinite(rev[:, 0])
            & (p0 > 1e-12) & (p1 > 1e-12))
    det_err = float(np.max(np.abs(
        t01[both, 0] - rev[both, 0] * p0[both] / p1[both])))

    snaps = traj.snap_steps
    tds = []
    for seed in (3, 5, 7, 11, 13):
        ens_g = gaw_engine.run_ensemble(t10, t01, traj.dt, 10000, seed,
                                        channel_names=cs.channels)
        ens_n = nmqj_engine.run_ensemble(fwd, rev, traj.dt, 10000, seed,
                                         channel_names=cs.channels)
        rho_g = gaw_engine.reduced_density(ens_g, traj, snaps)
        rho_n = nmqj_engine.reduced_density(ens_n, traj, snaps)
        from qjumps import trace_distance
        tds.append(float(np.max(trace_distance(rho_g, rho_n))))
    mean_td = float(np.mean(tds))
    ok = mean_td <= 0.02 and det_err <= 1e-10
    assert record(6, ok,
                  f"mean max trace distance over 5 seeds at M=10^4: "
                  f"{mean_td:.4f} (allowed 0.02); deterministic reverse-rate "
                  f"identity error {det_err:.1e} (allowed 1e-10)")


def test_criterion_7_populations_inside_binomial_bands(bundles):
    path, s, _ = bundles["fig3"]
    rho = _read_rho(path / "rho.csv")
    _, rho_x = rho["exact"]
    pe_x = rho_x[:, 1, 1].real
    sig = np.sqrt(np.clip(pe_x * (1.0 - pe_x), 0.0, None) / 10000)
    fracs = {}
    for engine in ("gaw", "nmqj"):
        _, rho_e = rho[engine]
        pe = rho_e[:, 1, 1].real
        fracs[engine] = float(np.mean(np.abs(pe - pe_x) <= 3.0 * sig + 1e-12))
    ok = all(f >= 0.99 for f in fracs.values())
    assert record(7, ok,
                  "rho_ee within 3 sigma of the closed form at "
                  f"{fracs['gaw']:.1%} (gaw) / {fracs['nmqj']:.1%} (nmqj) "
                  "of samples (need >= 99%)")


def _tcl2_gaps(path):
    """Per-channel L_inf between the sampled rates and each reference on
    t <= 3, from a secular bundle."""
    rt = _read_table(path / "rates.csv")
    t_r = np.asarray(rt["t"], dtype=float)
    ch_r = np.asarray(rt["channel"])
    dl_r = np.asarray(rt["delta"], dtype=float)
    ok_r = np.asarray(rt["defined"], dtype=int) == 1
    ot = _read_table(path / "oracle_rates.csv")
    t_o = np.asarray(ot["t"], dtype=float)
    ch_o = np.asarray(ot["channel"])
    src_o = np.asarray(ot["source"])
    dl_o = np.asarray(ot["delta"], dtype=float)
    gaps = {}
    for ch in dict.fromkeys(ch_o.tolist()):
        sel_r = (ch_r == ch) & ok_r & (t_r <= 3.0)
        grid_r = {t: d for t, d in zip(t_r[sel_r], dl_r[sel_r])}
        for source in ("tcl2", "exact"):
            sel_o = (ch_o == ch) & (src_o == source) & (t_o <= 3.0)
            diffs = [abs(grid_r[t] - d)
                     for t, d in zip(t_o[sel_o], dl_o[sel_o]) if t in grid_r]
            gaps[(ch, source)] = max(diffs)
    return gaps


def test_criterion_8_secular_rates_vs_second_order_reference(bundles):
    # The sampled rates are compared against the second-order reference at
    # the stated 0.05 * gamma0 budget. At gamma0 = 4 lam the second-order
    # rate is structurally wrong (it stays nonnegative and oscillates at the
    # detuning frequency, while the true rate oscillates faster and turns
    # negative), so the gap is an order-of-coupling effect, not a
    # discretization artifact; the companion check below pins that down.
    path, _, _ = bundles["fig6"]
    gaps = _tcl2_gaps(path / "secular")
    worst = max(v for (ch, src), v in gaps.items() if src == "tcl2")
    ok = worst <= 0.05 * 4.0
    record(8, ok,
           f"rate L_inf vs second-order reference on [0,3]: {worst:.3f} "
           "(allowed 0.2); the second-order expansion does not hold at "
           "gamma0 = 4 lam, see the exact-reference companion line")
    assert ok, (
        f"L_inf(delta, second-order reference) = {worst:.3f} exceeds 0.2 on "
        "[0,3]. The discrete-bath rates are correct (companion check against "
        "the all-orders rate passes at the same tolerance); the gap is the "
        "truncation error of the second-order reference itself at strong "
        "coupling.")


def test_criterion_8_companion_exact_reference(bundles):
    path, _, _ = bundles["fig6"]
    gaps = _tcl2_gaps(path / "secular")
    worst = max(v for (ch, src), v in gaps.items() if src == "exact")
    assert record("8 companion", worst <= 0.05 * 4.0,
                  f"same rates vs all-orders reference on [0,3]: {worst:.3f} "
                  "(allowed 0.2), isolating the gap to the second-order "
                  "truncation")


def test_criterion_9_interference_changes_sign_structure(bundles):
    _, s, _ = bundles["fig6"]
    cross = s["cross"]
    n_disagree = cross["nonsec_negative_while_secular_sum_positive"]
    td = cross["max_trace_distance_total"]
    ok = n_disagree >= 1 and td > 0.01
    assert record(9, ok,
                  f"{n_disagree} grid points with non-secular current < 0 "
                  f"while the secular channel sum > 0; max trace distance "
                  f"{td:.3f} (> 0.01)")


def test_criterion_10_single_mode_oscillation():
    # one resonant mode at unit coupling: population must follow cos^2(g t)
    grid = build_grid(BathSpec(gamma0=1.0, detunings=(0.0,), n_modes=1,
                               window=np.pi))
    assert grid.couplings[0] == pytest.approx(1.0, abs=1e-12)
    traj = integrate(make_system("tla", grid, (0.0,)), 10.0, 1e-3)
    err = float(np.max(np.abs(np.abs(traj.csys[:, 1]) ** 2
                              - np.cos(traj.t) ** 2)))
    assert record(10, err <= 1e-6,
                  f"|c_e|^2 vs cos^2(g t) for g t <= 10: max err {err:.2e} "
                  "(allowed 1e-6)")


def test_criterion_11_byte_identical_bundles(tmp_path):
    args = ["run", "--scenario", "fig3", "--modes", "24", "--t-max", "1.2",
            "--stride", "5", "--trajectories", "2500"]
    dirs = [tmp_path / d for d in ("r1", "r2", "r3")]
    assert main(args + ["--out", str(dirs[0])]) == 0
    assert main(args + ["--out", str(dirs[1])]) == 0
    assert main(args + ["--out", str(dirs[2]), "--workers", "2"]) == 0
    names = sorted(p.name for p in dirs[0].iterdir())
    same = all((d / n).read_bytes() == (dirs[0] / n).read_bytes()
               for d in dirs[1:] for n in names)
    rep = compare(dirs[0], dirs[2])
    assert record(11, same and rep["p0_linf"] == 0.0,
                  f"{len(names)} files byte-identical across reruns and "
                  "worker counts (seeded per-trajectory streams)")


def test_criterion_12_figure_package(bundles, tmp_path):
    qjf = pytest.importorskip(
        "qjumps_figures",
        reason="figure package not installed; its own suite covers this")
    from qjumps_figures import render
    path, _, _ = bundles["fig1"]
    out = tmp_path / "fig1.png"
    render("fig1", path, out)
    ok = out.exists() and out.stat().st_size > 0
    assert record(12, ok, f"figure package rendered fig1 ({out.stat().st_size} "
                          "bytes); full coverage in its own test suite")
