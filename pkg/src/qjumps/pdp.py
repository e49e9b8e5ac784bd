"""Shared machinery for the piecewise-deterministic jump processes.

Both engines evolve only discrete labels per trajectory (the deterministic
part is a single shared solve), sample jumps to first order in dt, and log
every transition. Randomness comes from one spawned stream per trajectory,
so trajectory i sees the same numbers no matter how many trajectories run
beside it or how the work is split across processes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# first-order jump sampling is only trusted up to this per-step probability
MAX_STEP_PROB = 0.1

_INT_SENTINEL = np.iinfo(np.int64).max


def trajectory_generators(seed: int, n_traj: int, lo: int = 0, hi: int | None = None):
    """One independent PCG64 stream per trajectory id.

    The stream for id i depends only on (seed, i), never on n_traj or on
    which block of trajectories it runs in.
    """
    children = np.random.SeedSequence(seed).spawn(n_traj)
    hi = n_traj if hi is None else hi
    return [np.random.Generator(np.random.PCG64(children[i])) for i in range(lo, hi)]


@dataclass
class EventLog:
    """Flat record of jumps: trajectory id, step index, labels and channel."""

    trajectory: np.ndarray
    step: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    channel: np.ndarray

    @property
    def n_events(self) -> int:
        return int(self.trajectory.size)

    @staticmethod
    def empty() -> "EventLog":
        z = np.zeros(0, dtype=np.int64)
        return EventLog(z, z.copy(), z.copy(), z.copy(), z.copy())

    @staticmethod
    def from_lists(traj, step, src, dst, channel) -> "EventLog":
        if not traj:
            return EventLog.empty()
        cat = lambda parts: np.concatenate([np.asarray(p, dtype=np.int64) for p in parts])
        return EventLog(cat(traj), cat(step), cat(src), cat(dst), cat(channel))

    @staticmethod
    def concat(logs) -> "EventLog":
        logs = list(logs)
        if not logs:
            return EventLog.empty()
        cat = lambda field: np.concatenate([getattr(l, field) for l in logs])
        return EventLog(cat("trajectory"), cat("step"), cat("src"),
                        cat("dst"), cat("channel"))

    def sorted_by_trajectory(self) -> "EventLog":
        # (trajectory, step) is a total order: at most one jump per step
        order = np.lexsort((self.step, self.trajectory))
        return EventLog(self.trajectory[order], self.step[order], self.src[order],
                        self.dst[order], self.channel[order])


@dataclass
class JumpEnsemble:
    """Outcome of one stochastic engine run.

    counts[n, l] is the number of trajectories carrying label l at step n,
    sampled before any jumps of step n fire. Label 0 is always the
    vacuum-conditioned (or evolving) state.
    """

    engine: str
    label_names: tuple
    channel_names: tuple
    dt: float
    n_traj: int
    counts: np.ndarray
    events: EventLog
    max_step_prob: float

    @property
    def t(self) -> np.ndarray:
        return self.dt * np.arange(self.counts.shape[0])

    @property
    def weights(self) -> np.ndarray:
        return self.counts / float(self.n_traj)


def enforce_step_bound(dt: float, rates: np.ndarray, what: str) -> float:
    """First-order sampling precondition: dt * rate <= MAX_STEP_PROB for
    every finite rate. Returns the maximum finite step probability."""
    finite = np.isfinite(rates)
    worst = float(dt * rates[finite].max()) if np.any(finite) else 0.0
    if worst > MAX_STEP_PROB:
        raise ValueError(
            f"dt * max {what} rate = {worst:.3g} exceeds {MAX_STEP_PROB}; "
            "reduce dt or the rates")
    return worst


def forward_partition(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative channel partition and total probability per step.

    p holds first-order probabilities dt * rate, shape (S, n_ch), possibly
    infinite. A row with an infinite entry forces a jump (total 1) split
    evenly over its infinite channels. Rows are scaled so a uniform draw
    u < ptot selects channels by searchsorted(cum, u, side="right").
    """
    p = np.array(p, dtype=float)
    inf = np.isinf(p)
    row_inf = inf.any(axis=1)
    if row_inf.any():
        p[row_inf] = inf[row_inf].astype(float)
    cum = np.cumsum(p, axis=1)
    tot = cum[:, -1]
    ptot = np.minimum(tot, 1.0)
    ptot = np.where(row_inf, 1.0, ptot)
    scale = np.ones_like(tot)
    np.divide(ptot, tot, out=scale, where=tot > 0)
    cum *= scale[:, None]
    return cum, ptot


def first_forward_times(ens: JumpEnsemble) -> np.ndarray:
    """Time of each trajectory's first jump out of label 0; NaN if it never
    jumped."""
    ev = ens.events
    fwd = ev.src == 0
    steps = np.full(ens.n_traj, _INT_SENTINEL, dtype=np.int64)
    np.minimum.at(steps, ev.trajectory[fwd], ev.step[fwd])
    out = steps.astype(float) * ens.dt
    out[steps == _INT_SENTINEL] = np.nan
    return out
