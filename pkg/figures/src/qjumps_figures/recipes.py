"""The six stock figures, each drawn from bundle CSVs alone.

Every recipe declares exactly which files and columns it consumes; the
renderer validates and hashes those before any drawing happens.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .io import fcol, scol


# ------------------------------------------------------------ table slicing

def _channels(cols):
    return list(dict.fromkeys(cols["channel"]))


def _series(cols, channel, ycol):
    sel = scol(cols, "channel") == channel
    return fcol(cols, "t")[sel], fcol(cols, ycol)[sel]


def _rho_entry(cols, engine, a, b):
    sel = ((scol(cols, "engine") == engine)
           & (fcol(cols, "row") == a) & (fcol(cols, "col") == b))
    t = fcol(cols, "t")[sel]
    z = fcol(cols, "re")[sel] + 1j * fcol(cols, "im")[sel]
    return t, z


def _rho_matrix(cols, engine):
    sel = scol(cols, "engine") == engine
    t_all = fcol(cols, "t")[sel]
    row = fcol(cols, "row")[sel].astype(int)
    col = fcol(cols, "col")[sel].astype(int)
    z = fcol(cols, "re")[sel] + 1j * fcol(cols, "im")[sel]
    t = np.unique(t_all)
    d = int(row.max()) + 1
    rho = np.zeros((t.size, d, d), dtype=complex)
    rho[np.searchsorted(t, t_all), row, col] = z
    return t, rho


def _trace_distance(a, b):
    ev = np.linalg.eigvalsh(a - b)
    return 0.5 * np.sum(np.abs(ev), axis=-1)


# ----------------------------------------------------------------- drawing

def _current_panel(ax, comb, shade_negative=False):
    for ch in _channels(comb):
        t, j = _series(comb, ch, "current")
        ax.plot(t, j, lw=1.3, label=f"channel {ch}")
        if shade_negative:
            ax.fill_between(t, j, 0.0, where=j < 0.0, color="crimson",
                            alpha=0.3, lw=0)
    ax.axhline(0.0, color="k", lw=0.6)
    ax.set_ylabel("probability current")
    ax.legend(frameon=False, fontsize=8)


def _heatmap_panel(ax, cur, channel, title):
    sel = scol(cur, "channel") == channel
    t = fcol(cur, "t")[sel]
    nu = fcol(cur, "nu_offset")[sel]
    j = fcol(cur, "current")[sel]
    tu, nu_u = np.unique(t), np.unique(nu)
    grid = np.full((nu_u.size, tu.size), np.nan)
    grid[np.searchsorted(nu_u, nu), np.searchsorted(tu, t)] = j
    vmax = max(float(np.nanmax(np.abs(grid))), 1e-30)
    pm = ax.pcolormesh(tu, nu_u, grid, cmap="RdBu_r", vmin=-vmax, vmax=vmax,
                       shading="nearest", rasterized=True)
    ax.set_ylabel("mode offset")
    ax.set_title(title, fontsize=9)
    return pm


def _population_panel(ax, rho, entries, index=(1, 1), ylabel="upper population"):
    styles = {"exact": "k--", "total": "-", "master": "-.",
              "gaw": ":", "nmqj": ":"}
    for engine in entries:
        t, z = _rho_entry(rho, engine, *index)
        if t.size:
            ax.plot(t, z.real, styles.get(engine, "-"), lw=1.2, label=engine)
    ax.set_ylabel(ylabel)
    ax.legend(frameon=False, fontsize=8)


def _fig1(fig, data):
    # positive combined flow on top of mode-resolved back-flow pockets
    axes = fig.subplots(2, 1, sharex=True)
    _current_panel(axes[0], data["combined.csv"])
    cur = data["currents.csv"]
    pm = _heatmap_panel(axes[1], cur, _channels(cur)[0], "mode-resolved current")
    fig.colorbar(pm, ax=axes[1])
    axes[1].set_xlabel("t")


def _fig2(fig, data):
    axes = fig.subplots(2, 1, sharex=True)
    _population_panel(axes[0], data["rho.csv"], ("exact", "total"))
    _current_panel(axes[1], data["combined.csv"], shade_negative=True)
    axes[1].set_xlabel("t")


def _fig3(fig, data):
    axes = fig.subplots(1, 2)
    rt, orc = data["rates.csv"], data["oracle_rates.csv"]
    ch = _channels(rt)[0]
    sel = (scol(rt, "channel") == ch) & (fcol(rt, "defined") == 1)
    axes[0].plot(fcol(rt, "t")[sel], fcol(rt, "delta")[sel], "k-", lw=1.4,
                 label="discrete bath")
    for source, style in (("exact", "--"), ("tcl2", ":")):
        osel = (scol(orc, "channel") == ch) & (scol(orc, "source") == source)
        axes[0].plot(fcol(orc, "t")[osel], fcol(orc, "delta")[osel], style,
                     lw=1.2, label=source)
    axes[0].axhline(0.0, color="k", lw=0.6)
    axes[0].set_xlabel("t")
    axes[0].set_ylabel("decay rate")
    axes[0].legend(frameon=False, fontsize=8)
    _population_panel(axes[1], data["rho.csv"],
                      ("exact", "total", "gaw", "nmqj"))
    axes[1].set_xlabel("t")


def _fig4(fig, data):
    axes = fig.subplots(2, 1, sharex=True)
    _current_panel(axes[0], data["combined.csv"], shade_negative=True)
    rho = data["rho.csv"]
    for (a, b), label in (((1, 1), "level a"), ((2, 2), "level b")):
        t, z = _rho_entry(rho, "total", a, b)
        axes[1].plot(t, z.real, lw=1.2, label=label)
    t, z = _rho_entry(rho, "total", 1, 2)
    axes[1].plot(t, np.abs(z), "k:", lw=1.2, label="|coherence|")
    axes[1].set_ylabel("population")
    axes[1].set_xlabel("t")
    axes[1].legend(frameon=False, fontsize=8)


def _fig5(fig, data):
    axes = fig.subplots(3, 1, sharex=True)
    _current_panel(axes[0], data["combined.csv"])
    cur = data["currents.csv"]
    for ax, ch in zip(axes[1:], _channels(cur)):
        pm = _heatmap_panel(ax, cur, ch, f"mode-resolved current, channel {ch}")
        fig.colorbar(pm, ax=ax)
    axes[-1].set_xlabel("t")


def _fig6(fig, data):
    axes = fig.subplots(2, 1, sharex=True)
    sec, non = data["secular/combined.csv"], data["nonsecular/combined.csv"]
    t = jsum = None
    for ch in _channels(sec):
        tc, j = _series(sec, ch, "current")
        t, jsum = tc, (j if jsum is None else jsum + j)
    axes[0].plot(t, jsum, lw=1.3, label="secular channel sum")
    tn, jn = _series(non, _channels(non)[0], "current")
    axes[0].plot(tn, jn, lw=1.3, label="non-secular")
    axes[0].fill_between(tn, jn, 0.0, where=(jn < 0.0) & (jsum > 0.0),
                         color="crimson", alpha=0.3, lw=0)
    axes[0].axhline(0.0, color="k", lw=0.6)
    axes[0].set_ylabel("probability current")
    axes[0].legend(frameon=False, fontsize=8)
    ts, rs = _rho_matrix(data["secular/rho.csv"], "total")
    tn2, rn = _rho_matrix(data["nonsecular/rho.csv"], "total")
    n = min(ts.size, tn2.size)
    axes[1].plot(ts[:n], _trace_distance(rs[:n], rn[:n]), lw=1.3)
    axes[1].set_ylabel("trace distance")
    axes[1].set_xlabel("t")


# ---------------------------------------------------------------- registry

_COMBINED = ["t", "channel", "current", "p0", "p1"]
_CURRENTS = ["t", "channel", "k", "nu_offset", "current"]
_RHO = ["t", "engine", "row", "col", "re", "im"]


@dataclass(frozen=True)
class FigureRecipe:
    name: str
    panels: str
    requires: dict = field(repr=False)
    figsize: tuple
    draw: callable = field(repr=False)


FIGURES = {
    "fig1": FigureRecipe(
        "fig1", "combined current; mode-resolved current heatmap",
        {"combined.csv": _COMBINED, "currents.csv": _CURRENTS},
        (6.0, 6.0), _fig1),
    "fig2": FigureRecipe(
        "fig2", "upper population vs closed form; current with negative "
        "intervals shaded",
        {"rho.csv": _RHO, "combined.csv": _COMBINED},
        (6.0, 6.0), _fig2),
    "fig3": FigureRecipe(
        "fig3", "decay rate (sampled vs references); population overlays "
        "for every engine",
        {"rates.csv": ["t", "channel", "delta", "shift", "defined"],
         "oracle_rates.csv": ["t", "channel", "source", "delta", "shift"],
         "rho.csv": _RHO},
        (9.0, 4.0), _fig3),
    "fig4": FigureRecipe(
        "fig4", "shared-register current with negative intervals shaded; "
        "level populations and coherence",
        {"combined.csv": _COMBINED, "rho.csv": _RHO},
        (6.0, 6.0), _fig4),
    "fig5": FigureRecipe(
        "fig5", "per-channel currents; one mode-resolved heatmap per channel",
        {"combined.csv": _COMBINED, "currents.csv": _CURRENTS},
        (6.0, 8.0), _fig5),
    "fig6": FigureRecipe(
        "fig6", "secular channel sum vs non-secular current; trace distance "
        "between the two reduced states",
        {"secular/combined.csv": _COMBINED,
         "nonsecular/combined.csv": _COMBINED,
         "secular/rho.csv": _RHO, "nonsecular/rho.csv": _RHO},
        (6.0, 6.0), _fig6),
}
