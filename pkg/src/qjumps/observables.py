"""Quantities derived from a total-system trajectory.

Probability currents between the vacuum- and one-photon-conditioned parts of
the state, the time-local decay and shift rates of each channel, jump rates
for both stochastic engines, and reduced density matrices.

Sign conventions: the combined current J(t) is the flow out of the vacuum
sector, J = -2 Re[cdot_i conj(c_i)] = d P(1)/dt, so J > 0 while the system
decays and J < 0 during memory-driven revivals. The time-local rates are
Delta = -2 Re[cdot_i / c_i] and S = -2 Im[cdot_i / c_i]; the identity
J_i = Delta_i |c_i|^2 ties the two pictures together.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# |c_i| below this leaves Delta and S undefined (masked, NaN)
MASK_FLOOR = 1e-10
# numerators/denominators below this count as zero in jump-rate ratios
RATE_EPS = 1e-12


@dataclass
class CurrentSeries:
    """Currents and projection probabilities on the dense time grid.

    channels lists the register names: ("e",) for the two-level system,
    ("ab",) for the shared-register V, ("a", "b") for the split-register V.
    Per-mode currents live on the coarser snapshot grid.
    """

    channels: tuple
    t: np.ndarray           # (S+1,)
    combined: np.ndarray    # (S+1, n_reg)
    p0: np.ndarray          # (S+1,)
    p1: np.ndarray          # (S+1, n_reg)
    mode_times: np.ndarray  # (n_snap,)
    per_mode: np.ndarray    # (n_snap, n_reg, N)


@dataclass
class RateSeries:
    """Time-local decay rate Delta and shift rate S per channel.

    defined is False where |c_i| < MASK_FLOOR; Delta and S hold NaN there.
    """

    channels: tuple
    t: np.ndarray        # (S+1,)
    delta: np.ndarray    # (S+1, n_ch)
    shift: np.ndarray    # (S+1, n_ch)
    defined: np.ndarray  # (S+1, n_ch) bool


def projection_probabilities(system, y) -> tuple[float, np.ndarray]:
    """(P(0), per-register P(1)) for a single total state."""
    d = system.dim_sys
    p0 = float(np.vdot(y[:d], y[:d]).real)
    return p0, system.register_probs(y)


def per_mode_current(system, t: float, y, k: int) -> np.ndarray:
    """Current into mode k at time t, one value per register."""
    n = system.grid.n_modes
    if not 0 <= k < n:
        raise IndexError(f"mode index {k} out of range for {n} modes")
    return system.per_mode_point(t, y)[:, k]


def current_series(traj) -> CurrentSeries:
    sysm = traj.system
    combined = sysm.combined_series(traj.csys, traj.csys_dot)
    p0 = traj.p0()
    snaps = traj.snap_steps
    per_mode = sysm.per_mode_series(traj.t[snaps], traj.csys[snaps], traj.mode_snaps)
    return CurrentSeries(channels=tuple(sysm.registers), t=traj.t,
                         combined=combined, p0=p0, p1=traj.p1.copy(),
                         mode_times=traj.t[snaps], per_mode=per_mode)


def rate_series(traj) -> RateSeries:
    sysm = traj.system
    c = traj.csys[:, list(sysm.excited)]
    cdot = traj.csys_dot[:, list(sysm.excited)]
    defined = np.abs(c) >= MASK_FLOOR
    ratio = np.full(c.shape, np.nan + 0j)
    np.divide(cdot, c, out=ratio, where=defined)
    return RateSeries(channels=tuple(sysm.channels), t=traj.t,
                      delta=-2.0 * ratio.real, shift=-2.0 * ratio.imag,
                      defined=defined)


def _guarded_ratio(num, den):
    """num/den with jump-rate conventions.

    Both below RATE_EPS: 0. Denominator below RATE_EPS with a real
    numerator: inf (the engines turn that into a forced jump).
    """
    num = np.asarray(num, dtype=float)
    den = np.broadcast_to(np.asarray(den, dtype=float), num.shape)
    out = np.zeros_like(num)
    ok = den >= RATE_EPS
    np.divide(num, den, out=out, where=ok)
    out[~ok & (num >= RATE_EPS)] = np.inf
    return out


def gaw_rates(cs: CurrentSeries) -> tuple[np.ndarray, np.ndarray]:
    """Property-state transition rates from the combined currents.

    Forward (vacuum -> one photon, register r): max(J_r, 0) / P(0).
    Reverse (one photon -> vacuum): max(-J_r, 0) / P_r(1), with the
    register's own one-photon weight in the denominator.
    """
    j = cs.combined
    t10 = _guarded_ratio(np.where(j > 0.0, j, 0.0), cs.p0[:, None])
    t01 = _guarded_ratio(np.where(j < 0.0, -j, 0.0), cs.p1)
    return t10, t01


def nmqj_rate_factors(cs: CurrentSeries) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel jump factors for the reduced-space unraveling.

    forward[n, i]   : rate for a member of the evolving state to jump down
                      channel i, Delta_i^+ <psi|C_i^dag C_i|psi> = J_i^+ / P(0)
    rev_factor[n, i]: |Delta_i^-| <psi|C_i^dag C_i|psi> = J_i^- / P(0);
                      the engine multiplies by the population ratio N0/N1.

    Shared-register systems have no per-channel one-photon sector, so this
    unraveling is undefined there.
    """
    if cs.channels == ("ab",):
        raise ValueError("reduced-space jumps undefined for a shared register: "
                         "no per-channel one-photon projectors exist")
    j = cs.combined
    forward = _guarded_ratio(np.where(j > 0.0, j, 0.0), cs.p0[:, None])
    rev_factor = _guarded_ratio(np.where(j < 0.0, -j, 0.0), cs.p0[:, None])
    return forward, rev_factor


def gaw_mode_rates(traj) -> tuple[np.ndarray, np.ndarray]:
    """Mode-resolved transition rates, one channel per (register, mode) pair.

    Diagnostic flavor of gaw_rates; needs mode amplitudes at every step,
    so the trajectory must have been integrated with stride = 1.
    """
    if traj.snap_steps.size != traj.t.size:
        raise ValueError("mode-resolved rates need stride = 1 snapshots")
    sysm = traj.system
    j = sysm.per_mode_series(traj.t, traj.csys, traj.mode_snaps)
    n = j.shape[0]
    j = j.reshape(n, -1)
    p1k = np.abs(traj.mode_snaps.reshape(n, -1)) ** 2
    p0 = traj.p0()
    t10 = _guarded_ratio(np.where(j > 0.0, j, 0.0), p0[:, None])
    t01 = _guarded_ratio(np.where(j < 0.0, -j, 0.0), p1k)
    return t10, t01


def mixed_density(w0, csys, ground: int) -> np.ndarray:
    """Ensemble density w0 |phi0><phi0| + (1 - w0) |ground><ground|.

    phi0 is the normalized vacuum-conditioned system state csys / sqrt(P0).
    Rows where P0 vanished but w0 > 0 would need a state that no longer
    exists; that is a bookkeeping violation, not a numerical edge.
    """
    w0 = np.asarray(w0, dtype=float)
    csys = np.asarray(csys)
    p0 = np.einsum("ni,ni->n", csys, np.conj(csys)).real
    dead = p0 < RATE_EPS
    if np.any(dead & (w0 > 0)):
        raise RuntimeError("vacuum-conditioned weight positive where P(0) ~ 0")
    denom = np.sqrt(np.where(dead, 1.0, p0))
    phi0 = csys / denom[:, None]
    rho = w0[:, None, None] * np.einsum("ni,nj->nij", phi0, np.conj(phi0))
    rho[:, ground, ground] += 1.0 - w0
    return rho


def total_density(traj, steps=None) -> np.ndarray:
    """Reduced density of the exact solve: pure system block plus the
    one-photon weight collapsed onto the shared ground level."""
    sel = slice(None) if steps is None else steps
    csys = traj.csys[sel]
    extra = traj.p1[sel].sum(axis=1)
    rho = np.einsum("ni,nj->nij", csys, np.conj(csys))
    rho[:, traj.system.ground, traj.system.ground] += extra
    return rho


def trace_distance(rho_a, rho_b) -> np.ndarray:
    """Batched trace distance 0.5 * ||rho_a - rho_b||_1 for Hermitian inputs."""
    diff = np.asarray(rho_a) - np.asarray(rho_b)
    single = diff.ndim == 2
    if single:
        diff = diff[None]
    td = 0.5 * np.abs(np.linalg.eigvalsh(diff)).sum(axis=-1)
    return td[0] if single else td
