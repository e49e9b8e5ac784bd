"""Scenario runner: build a system, solve it, run the requested stochastic
engines, and write a delimited bundle plus summary metrics.

Bundles are plain CSV/JSON, deterministic to the byte for a fixed
(config, seed) pair: floats are written with shortest round-trip repr,
JSON keys are sorted, events are sorted by (engine, trajectory, step), and
nothing time- or host-dependent goes into the files.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import gaw, nmqj, oracles
from . import observables as obs
from .bath import BathSpec, build_grid, recurrence_time
from .dynamics import integrate, make_system

SCHEMA_VERSION = 1
ENGINES = ("total", "gaw", "nmqj")
SYSTEMS = ("tla", "v_secular", "v_nonsecular", "v_both")

# tolerance used when counting sign structure in currents
SIGN_EPS = 1e-12


@dataclass(frozen=True)
class Scenario:
    """Everything needed to reproduce one run."""

    name: str
    system: str
    bath: BathSpec
    t_max: float = 5.0
    dt: float = 1e-3
    stride: int = 10
    trajectories: int = 10000
    seed: int = 7
    workers: int = 1
    engines: tuple = ("total",)

    def __post_init__(self):
        object.__setattr__(self, "engines", tuple(self.engines))
        if self.system not in SYSTEMS:
            raise ValueError(f"unknown system {self.system!r}; expected one of {SYSTEMS}")
        bad = [e for e in self.engines if e not in ENGINES]
        if bad:
            raise ValueError(f"unknown engines {bad}; expected a subset of {ENGINES}")
        if not self.engines:
            raise ValueError("need at least one engine")
        if self.system == "v_nonsecular" and "nmqj" in self.engines:
            raise ValueError("nmqj is undefined for v_nonsecular: a shared "
                             "register has no per-channel one-photon sector")
        want = 1 if self.system == "tla" else 2
        if len(self.bath.detunings) != want:
            raise ValueError(f"system {self.system!r} needs {want} detuning(s), "
                             f"got {len(self.bath.detunings)}")
        if self.t_max <= 0 or self.dt <= 0:
            raise ValueError("t_max and dt must be positive")
        if self.stride < 1:
            raise ValueError("stride must be at least 1")
        if self.trajectories < 1:
            raise ValueError("trajectories must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        t_rec = recurrence_time(build_grid(self.bath))
        if t_rec <= self.t_max:
            raise ValueError(
                f"mode comb revives at t = {t_rec:.3g} inside the run window "
                f"t_max = {self.t_max:.3g}; increase n_modes or shrink t_max")


def builtin_scenarios() -> dict:
    """The six stock parameter points."""
    mk = lambda **kw: Scenario(**kw)
    return {
        "fig1": mk(name="fig1", system="tla",
                   bath=BathSpec(gamma0=0.8, detunings=(3.0,), n_modes=180),
                   engines=("total", "gaw", "nmqj"), seed=11),
        "fig2": mk(name="fig2", system="tla",
                   bath=BathSpec(gamma0=4.0, detunings=(-4.0,), n_modes=180),
                   engines=("total",), seed=7),
        "fig3": mk(name="fig3", system="tla",
                   bath=BathSpec(gamma0=4.0, detunings=(-4.0,), n_modes=180),
                   engines=("total", "gaw", "nmqj"), seed=7),
        "fig4": mk(name="fig4", system="v_nonsecular",
                   bath=BathSpec(gamma0=4.0, detunings=(3.0, -3.0), n_modes=240),
                   engines=("total", "gaw"), seed=5),
        "fig5": mk(name="fig5", system="v_secular",
                   bath=BathSpec(gamma0=4.0, detunings=(3.0, -3.0), n_modes=240),
                   engines=("total", "gaw", "nmqj"), seed=3),
        "fig6": mk(name="fig6", system="v_both",
                   bath=BathSpec(gamma0=4.0, detunings=(3.0, -3.0), n_modes=240),
                   engines=("total",), seed=7),
    }


def scenario_to_config(sc: Scenario) -> dict:
    # workers is an execution knob with no effect on results, so it is not
    # part of the bundle's identity and stays out of the echoed config
    return {
        "name": sc.name,
        "system": sc.system,
        "bath": {
            "gamma0": sc.bath.gamma0,
            "detunings": list(sc.bath.detunings),
            "lam": sc.bath.lam,
            "n_modes": sc.bath.n_modes,
            "window": sc.bath.window,
        },
        "t_max": sc.t_max,
        "dt": sc.dt,
        "stride": sc.stride,
        "trajectories": sc.trajectories,
        "seed": sc.seed,
        "engines": list(sc.engines),
    }


def scenario_from_config(cfg: dict) -> Scenario:
    try:
        bath_cfg = dict(cfg["bath"])
        bath = BathSpec(gamma0=bath_cfg.pop("gamma0"),
                        detunings=tuple(bath_cfg.pop("detunings")),
                        lam=bath_cfg.pop("lam", 1.0),
                        n_modes=bath_cfg.pop("n_modes", 180),
                        window=bath_cfg.pop("window", None))
        if bath_cfg:
            raise ValueError(f"unknown bath keys {sorted(bath_cfg)}")
        known = {"name", "system", "bath", "t_max", "dt", "stride",
                 "trajectories", "seed", "workers", "engines"}
        extra = set(cfg) - known
        if extra:
            raise ValueError(f"unknown config keys {sorted(extra)}")
        return Scenario(
            name=cfg.get("name", "custom"),
            system=cfg["system"],
            bath=bath,
            t_max=cfg.get("t_max", 5.0),
            dt=cfg.get("dt", 1e-3),
            stride=cfg.get("stride", 10),
            trajectories=cfg.get("trajectories", 10000),
            seed=cfg.get("seed", 7),
            workers=cfg.get("workers", 1),
            engines=tuple(cfg.get("engines", ("total",))),
        )
    except KeyError as e:
        raise ValueError(f"config missing required key {e.args[0]!r}") from e


def load_scenario(source, **overrides) -> Scenario:
    """Scenario from a builtin name, a config file path, or a dict.

    Keyword overrides (seed, trajectories, dt, ...) replace the loaded
    values; bath_n_modes replaces the mode count inside the bath.
    """
    if isinstance(source, Scenario):
        sc = source
    elif isinstance(source, dict):
        sc = scenario_from_config(source)
    else:
        builtins = builtin_scenarios()
        if source in builtins:
            sc = builtins[source]
        else:
            path = Path(source)
            if not path.exists():
                raise ValueError(f"{source!r} is neither a builtin scenario "
                                 f"({sorted(builtins)}) nor a config file")
            sc = scenario_from_config(json.loads(path.read_text()))
    n_modes = overrides.pop("bath_n_modes", None)
    if n_modes is not None:
        overrides["bath"] = replace(overrides.get("bath", sc.bath),
                                    n_modes=int(n_modes))
    # one replace so the combined overrides are validated together
    if overrides:
        sc = replace(sc, **overrides)
    return sc


# ---------------------------------------------------------------- writers

def _fmt(x) -> str:
    return repr(float(x))


def _write_rows(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    return x


def _write_grid(outdir, grid):
    rows = ((k, _fmt(grid.offsets[k]), _fmt(grid.couplings[k]))
            for k in range(grid.n_modes))
    _write_rows(outdir / "grid.csv", ["k", "nu_offset", "coupling"], rows)


def _write_currents(outdir, grid, cs):
    def rows():
        for i, t in enumerate(cs.mode_times):
            ts = _fmt(t)
            for r, ch in enumerate(cs.channels):
                jrow = cs.per_mode[i, r]
                for k in range(grid.n_modes):
                    yield (ts, ch, k, _fmt(grid.offsets[k]), _fmt(jrow[k]))
    _write_rows(outdir / "currents.csv",
                ["t", "channel", "k", "nu_offset", "current"], rows())


def _write_combined(outdir, cs):
    def rows():
        for i, t in enumerate(cs.t):
            ts = _fmt(t)
            p0 = _fmt(cs.p0[i])
            for r, ch in enumerate(cs.channels):
                yield (ts, ch, _fmt(cs.combined[i, r]), p0, _fmt(cs.p1[i, r]))
    _write_rows(outdir / "combined.csv",
                ["t", "channel", "current", "p0", "p1"], rows())


def _write_rates(outdir, rs):
    def rows():
        for i, t in enumerate(rs.t):
            ts = _fmt(t)
            for c, ch in enumerate(rs.channels):
                if rs.defined[i, c]:
                    yield (ts, ch, _fmt(rs.delta[i, c]), _fmt(rs.shift[i, c]), 1)
                else:
                    yield (ts, ch, "nan", "nan", 0)
    _write_rows(outdir / "rates.csv",
                ["t", "channel", "delta", "shift", "defined"], rows())


def _write_oracle_rates(outdir, times, entries):
    """entries: list of (channel, source, delta array, shift array)."""
    def rows():
        for i, t in enumerate(times):
            ts = _fmt(t)
            for ch, source, dl, sh in entries:
                yield (ts, ch, source, _fmt(dl[i]), _fmt(sh[i]))
    _write_rows(outdir / "oracle_rates.csv",
                ["t", "channel", "source", "delta", "shift"], rows())


def _write_rho(outdir, times, blocks):
    """blocks: list of (engine, rho array (n, d, d)) on the same time grid,
    or (engine, times, rho) with its own grid."""
    def rows():
        for entry in blocks:
            if len(entry) == 2:
                engine, rho = entry
                tgrid = times
            else:
                engine, tgrid, rho = entry
            d = rho.shape[1]
            for i, t in enumerate(tgrid):
                ts = _fmt(t)
                for a in range(d):
                    for b in range(d):
                        yield (ts, engine, a, b,
                               _fmt(rho[i, a, b].real), _fmt(rho[i, a, b].imag))
    _write_rows(outdir / "rho.csv", ["t", "engine", "row", "col", "re", "im"], rows())


def _write_ensembles(outdir, snaps, times, ensembles):
    def rows():
        for engine, ens in ensembles:
            w = ens.weights
            for i, s in enumerate(snaps):
                ts = _fmt(times[i])
                for l, lbl in enumerate(ens.label_names):
                    yield (ts, engine, lbl, int(ens.counts[s, l]), _fmt(w[s, l]))
    _write_rows(outdir / "ensemble.csv",
                ["t", "engine", "label", "count", "weight"], rows())


def _write_events(outdir, dt, ensembles):
    def rows():
        for engine, ens in ensembles:
            ev = ens.events
            for i in range(ev.n_events):
                yield (engine, int(ev.trajectory[i]), int(ev.step[i]),
                       _fmt(dt * ev.step[i]),
                       ens.label_names[ev.src[i]], ens.label_names[ev.dst[i]],
                       ens.channel_names[ev.channel[i]])
    _write_rows(outdir / "events.csv",
                ["engine", "trajectory", "step", "t", "src_label", "dst_label",
                 "channel"], rows())


# ---------------------------------------------------------------- metrics

def _band_fraction(w, p, n_traj):
    """Fraction of points where an ensemble weight leaves the 3 sigma
    binomial band around probability p."""
    sigma = np.sqrt(np.clip(p * (1.0 - p), 0.0, None) / n_traj)
    return float(np.mean(np.abs(w - p) > 3.0 * sigma + 1e-12))


def _current_metrics(cs):
    per_channel = {}
    for r, ch in enumerate(cs.channels):
        j = cs.combined[:, r]
        per_channel[ch] = {
            "min": float(j.min()),
            "min_tpos": float(j[1:].min()),
            "max": float(j.max()),
            "has_negative_interval": bool((j < -SIGN_EPS).any()),
        }
    jk = cs.per_mode
    flat = int(np.argmin(jk))
    i, r, k = np.unravel_index(flat, jk.shape)
    sums = jk.sum(axis=2)
    return per_channel, {
        "per_mode_min": float(jk.min()),
        "per_mode_min_time": float(cs.mode_times[i]),
        "per_mode_min_channel": cs.channels[r],
        "per_mode_min_k": int(k),
    }, sums


def _density_blocks(sc, traj, rs, ensembles, snaps):
    """(blocks for rho.csv, density metrics)."""
    sysm = traj.system
    times = traj.t[snaps]
    rho_total = obs.total_density(traj, snaps)
    blocks = [("total", rho_total)]
    metrics = {}
    rhos = {"total": rho_total}

    if sc.system == "tla":
        ce = oracles.exact_amplitude(sc.bath.gamma0, sc.bath.lam,
                                     sc.bath.detunings[0], times)
        pe = np.abs(ce) ** 2
        rho_exact = np.zeros((times.size, 2, 2), dtype=complex)
        rho_exact[:, 1, 1] = pe
        rho_exact[:, 0, 0] = 1.0 - pe
        blocks.append(("exact", rho_exact))
        rhos["exact"] = rho_exact

    if sc.system in ("tla", "v_secular"):
        p0_0 = float(np.vdot(traj.csys[0], traj.csys[0]).real)
        psi0 = traj.csys[0] / np.sqrt(p0_0)
        rho0 = np.outer(psi0, np.conj(psi0))
        nodes, rho_m = oracles.master_evolve(rs, rho0, sysm.ground,
                                             sysm.excited, sc.dt)
        node_of = {int(s): i for i, s in enumerate(nodes)}
        keep = [(i, node_of[int(s)]) for i, s in enumerate(snaps)
                if int(s) in node_of]
        if keep:
            ti = np.asarray([times[i] for i, _ in keep])
            rm = rho_m[[j for _, j in keep]]
            blocks.append(("master", ti, rm))
            sub = rho_total[[i for i, _ in keep]]
            metrics["td_total_vs_master_max"] = float(
                np.max(obs.trace_distance(sub, rm)))

    for engine, ens in ensembles:
        rho_e = (gaw if engine == "gaw" else nmqj).reduced_density(ens, traj, snaps)
        blocks.append((engine, rho_e))
        rhos[engine] = rho_e

    pairs = [("total", "gaw"), ("total", "nmqj"), ("gaw", "nmqj"),
             ("total", "exact")]
    for a, b in pairs:
        if a in rhos and b in rhos:
            metrics[f"td_{a}_vs_{b}_max"] = float(
                np.max(obs.trace_distance(rhos[a], rhos[b])))
    return blocks, metrics


def _run_single(sc: Scenario, outdir: Path) -> dict:
    outdir.mkdir(parents=True, exist_ok=True)
    grid = build_grid(sc.bath)
    sysm = make_system(sc.system, grid, sc.bath.detunings)
    traj = integrate(sysm, sc.t_max, sc.dt, sc.stride)
    cs = obs.current_series(traj)
    rs = obs.rate_series(traj)
    snaps = traj.snap_steps
    times = traj.t[snaps]

    ensembles = []
    if "gaw" in sc.engines:
        t10, t01 = obs.gaw_rates(cs)
        ens = gaw.run_ensemble(t10, t01, sc.dt, sc.trajectories, sc.seed,
                               channel_names=cs.channels, workers=sc.workers)
        ensembles.append(("gaw", ens))
    if "nmqj" in sc.engines:
        fwd, rev = obs.nmqj_rate_factors(cs)
        ens = nmqj.run_ensemble(fwd, rev, sc.dt, sc.trajectories, sc.seed,
                                channel_names=rs.channels)
        ensembles.append(("nmqj", ens))

    # ---- metrics
    drift = traj.drift()
    with np.errstate(divide="ignore", invalid="ignore"):
        per_time = drift[1:] / traj.t[1:]
    per_channel_currents, mode_metrics, mode_sums = _current_metrics(cs)

    sum_rule_err = float(np.max(np.abs(
        mode_sums - cs.combined[snaps, :])))

    rate_metrics = {}
    sign_mismatch_total = 0
    for c, ch in enumerate(rs.channels):
        ok = rs.defined[:, c]
        d = rs.delta[ok, c]
        entry = {
            "delta_min": float(d.min()),
            "delta_max": float(d.max()),
            "masked_fraction": float(1.0 - ok.mean()),
        }
        if tuple(cs.channels) != ("ab",):
            amp2 = np.abs(traj.csys[:, sysm.excited[c]]) ** 2
            bridge = np.abs(cs.combined[:, c] - rs.delta[:, c] * amp2)
            entry["bridge_max_err"] = float(np.nanmax(np.where(ok, bridge, 0.0)))
            j = cs.combined[:, c]
            live = ok & (np.abs(j) > 1e-9)
            mism = int(np.sum(np.sign(j[live]) != np.sign(rs.delta[live, c])))
            entry["sign_mismatches"] = mism
            sign_mismatch_total += mism
        rate_metrics[ch] = entry

    ens_metrics = {}
    for engine, ens in ensembles:
        w0 = ens.weights[:, 0]
        em = {
            "trajectories": ens.n_traj,
            "n_events": ens.events.n_events,
            "max_step_prob": float(ens.max_step_prob),
            "final_weights": {lbl: float(ens.weights[-1, l])
                              for l, lbl in enumerate(ens.label_names)},
            "max_w0_dev_from_p0": float(np.max(np.abs(w0 - cs.p0))),
            "band_violation_fraction": _band_fraction(w0[snaps], cs.p0[snaps],
                                                      ens.n_traj),
        }
        if engine == "nmqj":
            rev = ens.events.src == 1
            steps_rev = ens.events.step[rev]
            ch_rev = ens.events.channel[rev]
            dl = rs.delta[steps_rev, ch_rev]
            em["reverse_events"] = int(rev.sum())
            em["reverse_sign_violations"] = int(np.sum(~(dl < 0.0)))
        else:
            rev = ens.events.src != 0
            j_at = cs.combined[ens.events.step[rev], ens.events.channel[rev]]
            em["reverse_events"] = int(rev.sum())
            em["reverse_sign_violations"] = int(np.sum(~(j_at < 0.0)))
        ens_metrics[engine] = em

    rho_blocks, density_metrics = _density_blocks(sc, traj, rs, ensembles, snaps)

    oracle_metrics = {}
    oracle_entries = []
    if sc.system in ("tla", "v_secular"):
        for c, ch in enumerate(rs.channels):
            delta_i = sc.bath.detunings[c]
            dl_x, sh_x = oracles.exact_rates(sc.bath.gamma0, sc.bath.lam,
                                             delta_i, times)
            dl_2, sh_2 = oracles.tcl2_rates(sc.bath.gamma0, sc.bath.lam,
                                            delta_i, times)
            oracle_entries.append((ch, "exact", dl_x, sh_x))
            oracle_entries.append((ch, "tcl2", dl_2, sh_2))
            ok = rs.defined[snaps, c]
            oracle_metrics[ch] = {
                "delta_linf_exact": float(np.max(np.abs(
                    rs.delta[snaps, c][ok] - dl_x[ok]))),
                "delta_linf_tcl2": float(np.max(np.abs(
                    rs.delta[snaps, c][ok] - dl_2[ok]))),
            }
        if sc.system == "tla":
            ce = oracles.exact_amplitude(sc.bath.gamma0, sc.bath.lam,
                                         sc.bath.detunings[0], traj.t)
            oracle_metrics["e"]["pop_linf_exact"] = float(np.max(np.abs(
                np.abs(traj.csys[:, 1]) ** 2 - np.abs(ce) ** 2)))

    summary = {
        "schema_version": SCHEMA_VERSION,
        "name": sc.name,
        "system": sc.system,
        "engines": list(sc.engines),
        "grid": {
            "n_modes": grid.n_modes,
            "spacing": float(grid.spacing),
            "window_halfwidth": float(sc.bath.window_halfwidth),
            "recurrence_time": float(recurrence_time(grid)),
            "coupling_sq_sum": float(np.sum(grid.couplings ** 2)),
        },
        "integration": {
            "n_steps": int(traj.n_steps),
            "dt": float(sc.dt),
            "max_norm_drift": float(drift.max()),
            "max_drift_per_time": float(np.max(per_time)) if traj.n_steps else 0.0,
        },
        "currents": {
            "per_channel": per_channel_currents,
            "sum_rule_max_err": sum_rule_err,
            **mode_metrics,
        },
        "rates": {
            "per_channel": rate_metrics,
            "sign_mismatches_total": sign_mismatch_total,
        },
        "oracle": oracle_metrics,
        "ensembles": ens_metrics,
        "density": density_metrics,
    }

    # ---- files
    _write_json(outdir / "config.json", scenario_to_config(sc))
    _write_grid(outdir, grid)
    _write_currents(outdir, grid, cs)
    _write_combined(outdir, cs)
    _write_rates(outdir, rs)
    if oracle_entries:
        _write_oracle_rates(outdir, times, oracle_entries)
    _write_rho(outdir, times, rho_blocks)
    if ensembles:
        _write_ensembles(outdir, snaps, times, ensembles)
        _write_events(outdir, sc.dt, ensembles)
    _write_json(outdir / "summary.json", _jsonable(summary))
    return summary


def _run_both(sc: Scenario, outdir: Path) -> dict:
    outdir.mkdir(parents=True, exist_ok=True)
    eng_sec = sc.engines
    eng_non = tuple(e for e in sc.engines if e != "nmqj")
    sub_sec = replace(sc, system="v_secular", name=f"{sc.name}_secular",
                      engines=eng_sec)
    sub_non = replace(sc, system="v_nonsecular", name=f"{sc.name}_nonsecular",
                      engines=eng_non)
    sum_sec = _run_single(sub_sec, outdir / "secular")
    sum_non = _run_single(sub_non, outdir / "nonsecular")

    # cross metrics on the dense grid, recomputed from fresh solves kept in
    # memory would double the work; read back the combined currents instead
    t_s, ch_s, cols_s = _read_combined(outdir / "secular" / "combined.csv")
    t_n, ch_n, cols_n = _read_combined(outdir / "nonsecular" / "combined.csv")
    j_sec_sum = np.zeros(t_s.size)
    for ch in ch_s:
        j_sec_sum += cols_s[ch]["current"]
    j_non = cols_n[ch_n[0]]["current"]
    if t_s.size != t_n.size or np.max(np.abs(t_s - t_n)) > 0:
        raise RuntimeError("sub-run grids differ")

    disagree = int(np.sum((j_sec_sum > SIGN_EPS) & (j_non < -SIGN_EPS)))
    rho_s = _read_rho(outdir / "secular" / "rho.csv")["total"]
    rho_n = _read_rho(outdir / "nonsecular" / "rho.csv")["total"]
    td = obs.trace_distance(rho_s[1], rho_n[1])

    summary = {
        "schema_version": SCHEMA_VERSION,
        "name": sc.name,
        "system": sc.system,
        "engines": list(sc.engines),
        "sub_bundles": ["secular", "nonsecular"],
        "cross": {
            "current_linf_diff": float(np.max(np.abs(j_sec_sum - j_non))),
            "nonsec_negative_while_secular_sum_positive": disagree,
            "max_trace_distance_total": float(np.max(td)),
        },
        "secular": sum_sec,
        "nonsecular": sum_non,
    }
    _write_json(outdir / "config.json", scenario_to_config(sc))
    _write_json(outdir / "summary.json", _jsonable(summary))
    return summary


def run(scenario, outdir) -> dict:
    """Run a scenario (Scenario, builtin name, config path or dict) and
    write its bundle into outdir. Returns the summary dict."""
    sc = load_scenario(scenario)
    outdir = Path(outdir)
    if sc.system == "v_both":
        return _run_both(sc, outdir)
    return _run_single(sc, outdir)


# ---------------------------------------------------------------- readers

def _read_table(path: Path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        cols = {h: [] for h in header}
        for row in r:
            for h, v in zip(header, row):
                cols[h].append(v)
    return cols


def _read_combined(path: Path):
    cols = _read_table(path)
    t_all = np.asarray(cols["t"], dtype=float)
    ch_all = np.asarray(cols["channel"])
    channels = list(dict.fromkeys(cols["channel"]))
    out = {}
    t = None
    for ch in channels:
        sel = ch_all == ch
        out[ch] = {k: np.asarray(cols[k], dtype=float)[sel]
                   for k in ("current", "p0", "p1")}
        t = t_all[sel]
    return t, channels, out


def _read_rho(path: Path):
    cols = _read_table(path)
    engines = list(dict.fromkeys(cols["engine"]))
    eng_all = np.asarray(cols["engine"])
    t_all = np.asarray(cols["t"], dtype=float)
    row = np.asarray(cols["row"], dtype=int)
    col = np.asarray(cols["col"], dtype=int)
    re = np.asarray(cols["re"], dtype=float)
    im = np.asarray(cols["im"], dtype=float)
    d = int(row.max()) + 1
    out = {}
    for eng in engines:
        sel = eng_all == eng
        t = np.unique(t_all[sel])
        rho = np.zeros((t.size, d, d), dtype=complex)
        ti = np.searchsorted(t, t_all[sel])
        rho[ti, row[sel], col[sel]] = re[sel] + 1j * im[sel]
        out[eng] = (t, rho)
    return out


def _read_ensemble(path: Path):
    cols = _read_table(path)
    eng_all = np.asarray(cols["engine"])
    lbl_all = np.asarray(cols["label"])
    t_all = np.asarray(cols["t"], dtype=float)
    w_all = np.asarray(cols["weight"], dtype=float)
    n_all = np.asarray(cols["count"], dtype=int)
    out = {}
    for eng in dict.fromkeys(cols["engine"]):
        for lbl in dict.fromkeys(lbl_all[eng_all == eng].tolist()):
            sel = (eng_all == eng) & (lbl_all == lbl)
            out[(eng, lbl)] = (t_all[sel], w_all[sel], n_all[sel])
    return out


def _infer_m(counts, weights) -> int:
    """Total trajectory count behind a (count, weight) label series."""
    idx = np.nonzero(weights > 0)[0]
    if idx.size == 0:
        return max(int(counts.max()), 1) if counts.size else 1
    return max(int(round(counts[idx[0]] / weights[idx[0]])), 1)


def compare(dir_a, dir_b) -> dict:
    """Compare two bundles: currents (L_inf and average L1 per channel),
    reduced densities (max trace distance per engine), ensemble weights
    (3 sigma binomial compatibility)."""
    dir_a, dir_b = Path(dir_a), Path(dir_b)
    t_a, ch_a, cols_a = _read_combined(dir_a / "combined.csv")
    t_b, ch_b, cols_b = _read_combined(dir_b / "combined.csv")
    if ch_a != ch_b or t_a.size != t_b.size or np.max(np.abs(t_a - t_b)) > 0:
        raise ValueError("bundles have different time grids or channels; "
                         "nothing comparable")
    out = {
        "schema_version": SCHEMA_VERSION,
        "bundles": [str(dir_a), str(dir_b)],
        "currents": {},
    }
    for ch in ch_a:
        diff = cols_a[ch]["current"] - cols_b[ch]["current"]
        out["currents"][ch] = {
            "linf": float(np.max(np.abs(diff))),
            "avg_l1": float(np.mean(np.abs(diff))),
        }
    out["p0_linf"] = float(np.max(np.abs(cols_a[ch_a[0]]["p0"]
                                         - cols_b[ch_a[0]]["p0"])))

    rho_a = _read_rho(dir_a / "rho.csv")
    rho_b = _read_rho(dir_b / "rho.csv")
    out["rho"] = {}
    pairs = [(e, e) for e in rho_a if e in rho_b]
    mc_a = [e for e in rho_a if e in ("gaw", "nmqj")]
    mc_b = [e for e in rho_b if e in ("gaw", "nmqj")]
    if len(mc_a) == 1 and len(mc_b) == 1 and mc_a[0] != mc_b[0]:
        pairs.append((mc_a[0], mc_b[0]))
    for ea, eb in pairs:
        ta, ra = rho_a[ea]
        tb, rb = rho_b[eb]
        n = min(ta.size, tb.size)
        if ta.size != tb.size or np.max(np.abs(ta - tb)) > 0:
            continue
        td = obs.trace_distance(ra[:n], rb[:n])
        key = ea if ea == eb else f"{ea}_vs_{eb}"
        out["rho"][key] = {"max_trace_distance": float(np.max(td))}

    out["ensemble"] = {}
    pa = dir_a / "ensemble.csv"
    pb = dir_b / "ensemble.csv"
    if pa.exists() and pb.exists():
        ens_a = _read_ensemble(pa)
        ens_b = _read_ensemble(pb)
        for key in ens_a:
            if key not in ens_b:
                continue
            ta, wa, na = ens_a[key]
            tb, wb, nb = ens_b[key]
            if ta.size != tb.size:
                continue
            ma = _infer_m(na, wa)
            mb = _infer_m(nb, wb)
            sig = np.sqrt(np.clip(wa * (1 - wa), 0, None) / ma
                          + np.clip(wb * (1 - wb), 0, None) / mb)
            viol = int(np.sum(np.abs(wa - wb) > 3.0 * sig + 1e-12))
            out["ensemble"]["/".join(key)] = {
                "max_weight_diff": float(np.max(np.abs(wa - wb))),
                "band_violations": viol,
                "points": int(ta.size),
                "compatible_3sigma": bool(viol <= max(1, ta.size // 100)),
            }
    return _jsonable(out)
