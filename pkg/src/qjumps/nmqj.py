"""Reduced-space jump unraveling with reverse jumps.

The ensemble needs only two member states at any time: the evolving
normalized state psi0 (label 0) and the ground state (label 1). Forward
jumps fire at the positive part of the channel decay rate; where a rate
goes negative, members of the target state jump back, with a per-member
probability carrying the empirical population ratio N0/N1 so that the
expected reverse flux matches N0 |Delta| <psi0|C^dag C|psi0>. N1 = 0 or
N0 = 0 means no reverse flux.
"""

from __future__ import annotations

import numpy as np

from .observables import RateSeries, mixed_density
from .pdp import (EventLog, JumpEnsemble, enforce_step_bound, forward_partition,
                  trajectory_generators)

OCCUPANCY_FLOOR = 1e-12


def effective_coeffs(rates: RateSeries) -> np.ndarray:
    """Per-channel coefficient lam_i(t) = -(Delta_i + i S_i)/2 of the
    non-Hermitian effective evolution d c_i/dt = lam_i c_i. NaN where the
    rates are undefined."""
    return -0.5 * (rates.delta + 1j * rates.shift)


def deterministic_step(psi, excited, lam_nodes, h: float) -> np.ndarray:
    """One raw RK4 step of the effective evolution (no renormalization).

    lam_nodes holds the channel coefficients at the start, middle and end
    of the step, shape (3, n_ch). Only the excited components move.
    """
    idx = list(excited)
    l0, lm, l1 = lam_nodes
    c = psi[idx]
    k1 = l0 * c
    k2 = lm * (c + 0.5 * h * k1)
    k3 = lm * (c + 0.5 * h * k2)
    k4 = l1 * (c + h * k3)
    out = psi.copy()
    out[idx] = c + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return out


def deterministic_evolve(rates: RateSeries, psi0, excited):
    """Renormalized effective evolution of psi0 across the whole rate grid.

    Steps span two grid intervals (the middle node supplies the RK4
    midpoint), so the result lives on every second step of the dense grid.
    A channel whose rate is masked while its amplitude is still occupied is
    a hard error; masked but empty channels just stay empty.

    Returns (node_steps, states) with unit-norm states.
    """
    lam = effective_coeffs(rates)
    n_steps = rates.t.size - 1
    dt = float(rates.t[1] - rates.t[0])
    psi = np.asarray(psi0, dtype=complex).copy()
    nrm = np.sqrt(np.vdot(psi, psi).real)
    if abs(nrm - 1.0) > 1e-8:
        raise ValueError("psi0 must be normalized")
    idx = list(excited)

    node_steps = [0]
    states = [psi.copy()]
    n = 0
    while n < n_steps:
        if n + 2 <= n_steps:
            lam3 = np.stack([lam[n], lam[n + 1], lam[n + 2]])
            h, nxt = 2.0 * dt, n + 2
        else:
            mid = 0.5 * (lam[n] + lam[n + 1])
            lam3 = np.stack([lam[n], mid, lam[n + 1]])
            h, nxt = dt, n + 1
        bad = np.isnan(lam3).any(axis=0)
        if bad.any():
            occ = np.abs(psi[idx]) > OCCUPANCY_FLOOR
            if np.any(bad & occ):
                ch = int(np.nonzero(bad & occ)[0][0])
                raise RuntimeError(
                    f"rate for channel {rates.channels[ch]} undefined at step {n} "
                    "while its amplitude is occupied")
            lam3 = np.where(np.isnan(lam3), 0.0, lam3)
        psi = deterministic_step(psi, excited, lam3, h)
        psi /= np.sqrt(np.vdot(psi, psi).real)
        node_steps.append(nxt)
        states.append(psi.copy())
        n = nxt
    return np.asarray(node_steps), np.asarray(states)


def jump_rates(n0: int, n1: int, forward, rev_factor):
    """Per-member jump rates given the current label counts.

    forward applies to members of the evolving state as is. The reverse
    per-member rate scales the factor |Delta_i| <psi0|C_i^dag C_i|psi0| by
    N0/N1; with no target members (or no source weight) it is zero.
    """
    forward = np.asarray(forward, dtype=float)
    rev_factor = np.asarray(rev_factor, dtype=float)
    if n1 == 0 or n0 == 0:
        return forward, np.zeros_like(rev_factor)
    return forward, (n0 / n1) * rev_factor


def jump_apply(label: int, delta_at_t: float) -> int:
    """Label after a jump. Reverse jumps (label 1 -> 0) are only legal where
    the channel decay rate is negative; the ensemble runner enforces the
    same rule through the rate construction."""
    if label == 0:
        return 1
    if not delta_at_t < 0.0:
        raise ValueError("reverse jump where the decay rate is nonnegative")
    return 0


def run_ensemble(forward, rev_factor, dt, n_traj, seed, *, channel_names=None,
                 chunk: int = 1024) -> JumpEnsemble:
    """Run the two-label ensemble against per-channel rate factors.

    forward[n, c] is the per-member rate out of the evolving state through
    channel c; rev_factor[n, c] is |Delta_c|<psi0|C^dag C|psi0> whose
    per-member reverse rate gains the live N0/N1 ratio. The ratio makes the
    reverse probability state-dependent, so it is capped at one rather than
    bound-checked; the largest observed step probability is reported.
    """
    forward = np.asarray(forward, dtype=float)
    rev_factor = np.asarray(rev_factor, dtype=float)
    if forward.shape != rev_factor.shape or forward.ndim != 2:
        raise ValueError("rate tables must share shape (n_steps + 1, n_channels)")
    if n_traj < 1:
        raise ValueError("need at least one trajectory")
    n_ch = forward.shape[1]
    if channel_names is None:
        channel_names = tuple(str(c) for c in range(n_ch))

    worst = enforce_step_bound(dt, forward[:-1], "forward")
    cum_fwd, ptot_fwd = forward_partition(dt * forward[:-1])
    prf = dt * rev_factor[:-1]

    n_steps = forward.shape[0] - 1
    gens = trajectory_generators(seed, n_traj)
    labels = np.zeros(n_traj, dtype=np.int64)
    counts = np.zeros((n_steps + 1, 2), dtype=np.int64)
    ev_traj, ev_step, ev_src, ev_dst, ev_ch = [], [], [], [], []

    u = np.empty((n_traj, chunk))
    for c0 in range(0, n_steps, chunk):
        c1 = min(c0 + chunk, n_steps)
        width = c1 - c0
        for i, g in enumerate(gens):
            u[i, :width] = g.random(width)
        for j in range(width):
            n = c0 + j
            n1 = int(labels.sum())
            n0 = n_traj - n1
            counts[n, 0] = n0
            counts[n, 1] = n1
            row = prf[n]
            if n1 > 0 and n0 > 0 and row.any():
                scaled = (n0 / n1) * row
                finite = np.isfinite(scaled)
                if finite.any():
                    worst = max(worst, float(scaled[finite].max()))
                cum_rev, ptot_rev = forward_partition(scaled[None])
                cum_rev, p_rev = cum_rev[0], float(ptot_rev[0])
            else:
                cum_rev, p_rev = None, 0.0
            un = u[:, j]
            at0 = labels == 0
            p = np.where(at0, ptot_fwd[n], p_rev)
            hit = un < p
            if hit.any():
                idx = np.nonzero(hit)[0]
                src = labels[idx].copy()
                fwd = src == 0
                ch = np.empty(idx.size, dtype=np.int64)
                if fwd.any():
                    ch[fwd] = np.searchsorted(cum_fwd[n], un[idx[fwd]], side="right")
                if (~fwd).any():
                    ch[~fwd] = np.searchsorted(cum_rev, un[idx[~fwd]], side="right")
                dst = 1 - src
                labels[idx] = dst
                ev_traj.append(idx)
                ev_step.append(np.full(idx.size, n, dtype=np.int64))
                ev_src.append(src)
                ev_dst.append(dst)
                ev_ch.append(ch)
    counts[n_steps, 1] = int(labels.sum())
    counts[n_steps, 0] = n_traj - counts[n_steps, 1]

    events = EventLog.from_lists(ev_traj, ev_step, ev_src, ev_dst, ev_ch)
    return JumpEnsemble(engine="nmqj", label_names=("0", "1"),
                        channel_names=tuple(channel_names), dt=float(dt),
                        n_traj=int(n_traj), counts=counts,
                        events=events.sorted_by_trajectory(),
                        max_step_prob=worst)


def reduced_density(ens: JumpEnsemble, traj, steps=None) -> np.ndarray:
    """Ensemble-averaged system density; identical construction to the
    property-state engine since label 1 collapses onto the ground level."""
    sel = slice(None) if steps is None else steps
    w0 = ens.weights[sel, 0]
    return mixed_density(w0, traj.csys[sel], traj.system.ground)
