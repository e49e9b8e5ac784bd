"""Property-state jump unraveling driven by probability currents.

Each trajectory carries a discrete label: 0 for the vacuum-conditioned
state, or 1+c for the one-photon state of channel c. The deterministic
part is shared by every trajectory (one total-system solve), so stepping
an ensemble is a vectorized label update against precomputed rate tables.

Trajectories are independent given the rate tables, which makes the run
embarrassingly parallel; results are identical for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .observables import mixed_density
from .pdp import (EventLog, JumpEnsemble, enforce_step_bound, forward_partition,
                  trajectory_generators)

# trajectories per work block; fixed so blocking never depends on workers
BLOCK = 2048


def _run_block(seed, n_traj, lo, hi, cum_fwd, ptot_fwd, p_rev, chunk):
    """Label evolution for trajectories [lo, hi). Returns (counts, event arrays)."""
    n_steps, n_ch = p_rev.shape
    gens = trajectory_generators(seed, n_traj, lo, hi)
    m = hi - lo
    labels = np.zeros(m, dtype=np.int64)
    counts = np.zeros((n_steps + 1, n_ch + 1), dtype=np.int64)
    ev_traj, ev_step, ev_src, ev_dst, ev_ch = [], [], [], [], []

    u = np.empty((m, chunk))
    for c0 in range(0, n_steps, chunk):
        c1 = min(c0 + chunk, n_steps)
        width = c1 - c0
        for i, g in enumerate(gens):
            u[i, :width] = g.random(width)
        for j in range(width):
            n = c0 + j
            counts[n] = np.bincount(labels, minlength=n_ch + 1)
            un = u[:, j]
            at0 = labels == 0
            rev_p = p_rev[n][np.maximum(labels, 1) - 1]
            p = np.where(at0, ptot_fwd[n], rev_p)
            hit = un < p
            if hit.any():
                idx = np.nonzero(hit)[0]
                src = labels[idx].copy()
                fwd = src == 0
                ch = np.empty(idx.size, dtype=np.int64)
                if fwd.any():
                    ch[fwd] = np.searchsorted(cum_fwd[n], un[idx[fwd]], side="right")
                ch[~fwd] = src[~fwd] - 1
                dst = np.where(fwd, ch + 1, 0)
                labels[idx] = dst
                ev_traj.append(idx + lo)
                ev_step.append(np.full(idx.size, n, dtype=np.int64))
                ev_src.append(src)
                ev_dst.append(dst)
                ev_ch.append(ch)
    counts[n_steps] = np.bincount(labels, minlength=n_ch + 1)
    return counts, (ev_traj, ev_step, ev_src, ev_dst, ev_ch)


def run_ensemble(t10, t01, dt, n_traj, seed, *, channel_names=None,
                 chunk: int = 1024, workers: int = 1) -> JumpEnsemble:
    """Run n_traj label trajectories against rate tables on the dense grid.

    t10[n, c]: rate out of label 0 into channel c at step n.
    t01[n, c]: rate from channel c's one-photon label back to 0.
    Rates at the final step are never consumed (no step starts there).
    Infinite entries force the corresponding jump with probability one.
    """
    t10 = np.asarray(t10, dtype=float)
    t01 = np.asarray(t01, dtype=float)
    if t10.shape != t01.shape or t10.ndim != 2:
        raise ValueError("rate tables must share shape (n_steps + 1, n_channels)")
    if n_traj < 1:
        raise ValueError("need at least one trajectory")
    n_ch = t10.shape[1]
    if channel_names is None:
        channel_names = tuple(str(c) for c in range(n_ch))
    if len(channel_names) != n_ch:
        raise ValueError("channel_names length mismatch")

    worst = max(enforce_step_bound(dt, t10[:-1], "forward"),
                enforce_step_bound(dt, t01[:-1], "reverse"))
    cum_fwd, ptot_fwd = forward_partition(dt * t10[:-1])
    p_rev = np.minimum(dt * t01[:-1], 1.0)

    spans = [(lo, min(lo + BLOCK, n_traj)) for lo in range(0, n_traj, BLOCK)]
    args = [(seed, n_traj, lo, hi, cum_fwd, ptot_fwd, p_rev, chunk) for lo, hi in spans]
    if workers > 1 and len(spans) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_block_star, args))
    else:
        parts = [_run_block(*a) for a in args]

    counts = np.sum([p[0] for p in parts], axis=0)
    events = EventLog.concat(
        EventLog.from_lists(*p[1]) for p in parts).sorted_by_trajectory()
    label_names = ("0",) + tuple("1" + c for c in channel_names)
    return JumpEnsemble(engine="gaw", label_names=label_names,
                        channel_names=tuple(channel_names), dt=float(dt),
                        n_traj=int(n_traj), counts=counts, events=events,
                        max_step_prob=worst)


def _run_block_star(a):
    return _run_block(*a)


def reduced_density(ens: JumpEnsemble, traj, steps=None) -> np.ndarray:
    """Ensemble-averaged system density: vacuum-conditioned weight on the
    shared normalized state, everything else on the ground level."""
    sel = slice(None) if steps is None else steps
    w0 = ens.weights[sel, 0]
    return mixed_density(w0, traj.csys[sel], traj.system.ground)
