"""Exact total-system dynamics in the one-excitation sector.

State vectors hold interaction-picture amplitudes: a small block of system
amplitudes followed by one or two registers of mode amplitudes. The bath
enters through explicit phases exp(+-i Omega_k t) with
Omega_k = (nu_k - omega_c) - delta, so the equations are linear with
time-dependent coefficients and the total norm is conserved.

Layouts:
  tla          [c_g, c_e | c_k x N]           one channel, one register
  v_nonsecular [c_c, c_a, c_b | c_k x N]      two channels share one register
  v_secular    [c_c, c_a, c_b | a_k x N | b_k x N]  independent registers
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bath import ModeGrid

# hard abort on norm drift; the per-run budget is far tighter (1e-8 * lam * t)
NORM_ABORT = 1e-6


class TwoLevelAtom:
    """Single decay channel e -> g."""

    name = "tla"
    dim_sys = 2
    ground = 0
    channels = ("e",)
    excited = (1,)
    registers = ("e",)

    def __init__(self, grid: ModeGrid, detunings):
        (delta,) = detunings
        self.grid = grid
        self.detunings = (float(delta),)
        self._om = grid.offsets - delta
        self._g = grid.couplings

    @property
    def dim_total(self) -> int:
        return 2 + self.grid.n_modes

    def initial_state(self) -> np.ndarray:
        y = np.zeros(self.dim_total, dtype=complex)
        y[1] = 1.0
        return y

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        z = np.exp(1j * self._om * t)
        out = np.empty_like(y)
        out[0] = 0.0
        out[1] = -np.dot(self._g, z.conj() * y[2:])
        out[2:] = self._g * z * y[1]
        return out

    def register_probs(self, y: np.ndarray) -> np.ndarray:
        reg = y[2:]
        return np.array([np.vdot(reg, reg).real])

    def mode_block(self, y: np.ndarray) -> np.ndarray:
        return y[2:].reshape(1, -1)

    def per_mode_point(self, t: float, y: np.ndarray) -> np.ndarray:
        z = np.exp(1j * self._om * t)
        j = 2.0 * (self._g * z * y[1] * np.conj(y[2:])).real
        return j.reshape(1, -1)

    def per_mode_series(self, t, csys, modes) -> np.ndarray:
        # flux into each mode, 2 Re[g_k e^{i Om t} c_e conj(c_k)]
        z = np.exp(1j * np.outer(t, self._om))
        j = 2.0 * (self._g * z * csys[:, 1, None] * np.conj(modes[:, 0, :])).real
        return j[:, None, :]

    def combined_series(self, csys, csys_dot) -> np.ndarray:
        j = -2.0 * (csys_dot[:, 1] * np.conj(csys[:, 1])).real
        return j[:, None]


class VNonSecular:
    """Two upper levels a, b decaying to c through one shared register.

    Only the combined one-photon projector exists here: a photon in mode k
    does not identify which channel emitted it.
    """

    name = "v_nonsecular"
    dim_sys = 3
    ground = 0
    channels = ("a", "b")
    excited = (1, 2)
    registers = ("ab",)

    def __init__(self, grid: ModeGrid, detunings):
        da, db = detunings
        self.grid = grid
        self.detunings = (float(da), float(db))
        self._om_a = grid.offsets - da
        self._om_b = grid.offsets - db
        self._g = grid.couplings

    @property
    def dim_total(self) -> int:
        return 3 + self.grid.n_modes

    def initial_state(self) -> np.ndarray:
        y = np.zeros(self.dim_total, dtype=complex)
        y[1] = 1.0 / np.sqrt(2.0)
        y[2] = 1.0 / np.sqrt(2.0)
        return y

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        za = np.exp(1j * self._om_a * t)
        zb = np.exp(1j * self._om_b * t)
        out = np.empty_like(y)
        out[0] = 0.0
        out[1] = -np.dot(self._g, za.conj() * y[3:])
        out[2] = -np.dot(self._g, zb.conj() * y[3:])
        out[3:] = self._g * (za * y[1] + zb * y[2])
        return out

    def register_probs(self, y: np.ndarray) -> np.ndarray:
        reg = y[3:]
        return np.array([np.vdot(reg, reg).real])

    def mode_block(self, y: np.ndarray) -> np.ndarray:
        return y[3:].reshape(1, -1)

    def per_mode_point(self, t: float, y: np.ndarray) -> np.ndarray:
        za = np.exp(1j * self._om_a * t)
        zb = np.exp(1j * self._om_b * t)
        src = za * y[1] + zb * y[2]
        j = 2.0 * (self._g * src * np.conj(y[3:])).real
        return j.reshape(1, -1)

    def per_mode_series(self, t, csys, modes) -> np.ndarray:
        za = np.exp(1j * np.outer(t, self._om_a))
        zb = np.exp(1j * np.outer(t, self._om_b))
        src = za * csys[:, 1, None] + zb * csys[:, 2, None]
        j = 2.0 * (self._g * src * np.conj(modes[:, 0, :])).real
        return j[:, None, :]

    def combined_series(self, csys, csys_dot) -> np.ndarray:
        j = -2.0 * (csys_dot[:, 1] * np.conj(csys[:, 1])
                    + csys_dot[:, 2] * np.conj(csys[:, 2])).real
        return j[:, None]


class VSecular:
    """Two upper levels a, b decaying to c through independent registers.

    Each channel owns its own copy of the bath, so per-channel one-photon
    projectors (and per-channel currents) are well defined.
    """

    name = "v_secular"
    dim_sys = 3
    ground = 0
    channels = ("a", "b")
    excited = (1, 2)
    registers = ("a", "b")

    def __init__(self, grid: ModeGrid, detunings):
        da, db = detunings
        self.grid = grid
        self.detunings = (float(da), float(db))
        self._om_a = grid.offsets - da
        self._om_b = grid.offsets - db
        self._g = grid.couplings

    @property
    def dim_total(self) -> int:
        return 3 + 2 * self.grid.n_modes

    def initial_state(self) -> np.ndarray:
        y = np.zeros(self.dim_total, dtype=complex)
        y[1] = 1.0 / np.sqrt(2.0)
        y[2] = 1.0 / np.sqrt(2.0)
        return y

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        n = self.grid.n_modes
        za = np.exp(1j * self._om_a * t)
        zb = np.exp(1j * self._om_b * t)
        out = np.empty_like(y)
        out[0] = 0.0
        out[1] = -np.dot(self._g, za.conj() * y[3:3 + n])
        out[2] = -np.dot(self._g, zb.conj() * y[3 + n:])
        out[3:3 + n] = self._g * za * y[1]
        out[3 + n:] = self._g * zb * y[2]
        return out

    def register_probs(self, y: np.ndarray) -> np.ndarray:
        n = self.grid.n_modes
        ra = y[3:3 + n]
        rb = y[3 + n:]
        return np.array([np.vdot(ra, ra).real, np.vdot(rb, rb).real])

    def mode_block(self, y: np.ndarray) -> np.ndarray:
        n = self.grid.n_modes
        return y[3:].reshape(2, n)

    def per_mode_point(self, t: float, y: np.ndarray) -> np.ndarray:
        n = self.grid.n_modes
        za = np.exp(1j * self._om_a * t)
        zb = np.exp(1j * self._om_b * t)
        ja = 2.0 * (self._g * za * y[1] * np.conj(y[3:3 + n])).real
        jb = 2.0 * (self._g * zb * y[2] * np.conj(y[3 + n:])).real
        return np.stack([ja, jb])

    def per_mode_series(self, t, csys, modes) -> np.ndarray:
        za = np.exp(1j * np.outer(t, self._om_a))
        zb = np.exp(1j * np.outer(t, self._om_b))
        ja = 2.0 * (self._g * za * csys[:, 1, None] * np.conj(modes[:, 0, :])).real
        jb = 2.0 * (self._g * zb * csys[:, 2, None] * np.conj(modes[:, 1, :])).real
        return np.stack([ja, jb], axis=1)

    def combined_series(self, csys, csys_dot) -> np.ndarray:
        ja = -2.0 * (csys_dot[:, 1] * np.conj(csys[:, 1])).real
        jb = -2.0 * (csys_dot[:, 2] * np.conj(csys[:, 2])).real
        return np.stack([ja, jb], axis=1)


_SYSTEMS = {
    "tla": (TwoLevelAtom, 1),
    "v_nonsecular": (VNonSecular, 2),
    "v_secular": (VSecular, 2),
}


def make_system(name: str, grid: ModeGrid, detunings):
    try:
        cls, want = _SYSTEMS[name]
    except KeyError:
        raise ValueError(f"unknown system {name!r}; expected one of {sorted(_SYSTEMS)}")
    if len(detunings) != want:
        raise ValueError(f"system {name!r} needs {want} detuning(s), got {len(detunings)}")
    return cls(grid, detunings)


@dataclass
class Trajectory:
    """Dense record of one deterministic total-system solve.

    System amplitudes, their derivatives, register populations and the norm
    are kept at every step; mode amplitudes are snapshotted every `stride`
    steps (final step always included).
    """

    system: object
    dt: float
    t: np.ndarray              # (S+1,)
    csys: np.ndarray           # (S+1, dim_sys)
    csys_dot: np.ndarray       # (S+1, dim_sys)
    p1: np.ndarray             # (S+1, n_registers)
    norm: np.ndarray           # (S+1,)
    snap_steps: np.ndarray     # indices into t
    mode_snaps: np.ndarray     # (n_snap, n_registers, N)

    @property
    def n_steps(self) -> int:
        return self.t.size - 1

    @property
    def snap_times(self) -> np.ndarray:
        return self.t[self.snap_steps]

    def p0(self) -> np.ndarray:
        return np.einsum("ni,ni->n", self.csys, np.conj(self.csys)).real

    def drift(self) -> np.ndarray:
        return np.abs(self.norm - 1.0)


def integrate(system, t_max: float, dt: float = 1e-3, stride: int = 10,
              initial=None) -> Trajectory:
    """Fixed-step RK4 solve of i d|psi>/dt = H_I(t) |psi|.

    Phases are evaluated fresh at every stage, nothing is cached across
    steps. Aborts if the norm drifts by more than NORM_ABORT.
    """
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    if dt <= 0:
        raise ValueError("dt must be positive")
    if stride < 1:
        raise ValueError("stride must be at least 1")
    n_steps = int(round(t_max / dt))
    if n_steps < 1:
        raise ValueError("t_max shorter than one step")

    y = system.initial_state() if initial is None else np.asarray(initial, dtype=complex).copy()
    if y.shape != (system.dim_total,):
        raise ValueError(f"initial state must have shape ({system.dim_total},)")
    nrm = float(np.sqrt(np.vdot(y, y).real))
    if abs(nrm - 1.0) > 1e-8:
        raise ValueError(f"initial state not normalized: |psi| = {nrm}")

    n_reg = len(system.registers)
    d = system.dim_sys
    t = dt * np.arange(n_steps + 1)
    csys = np.empty((n_steps + 1, d), dtype=complex)
    csys_dot = np.empty((n_steps + 1, d), dtype=complex)
    p1 = np.empty((n_steps + 1, n_reg))
    norm = np.empty(n_steps + 1)

    snap_steps = np.arange(0, n_steps + 1, stride)
    if snap_steps[-1] != n_steps:
        snap_steps = np.append(snap_steps, n_steps)
    snap_lookup = {int(s): i for i, s in enumerate(snap_steps)}
    mode_snaps = np.empty((snap_steps.size, n_reg, system.grid.n_modes), dtype=complex)

    half = 0.5 * dt
    for n in range(n_steps + 1):
        tn = t[n]
        k1 = system.rhs(tn, y)
        csys[n] = y[:d]
        csys_dot[n] = k1[:d]
        p1[n] = system.register_probs(y)
        norm[n] = np.sqrt(np.vdot(y, y).real)
        if abs(norm[n] - 1.0) > NORM_ABORT:
            raise RuntimeError(
                f"norm drift {abs(norm[n] - 1.0):.3e} at t = {tn:.6g} exceeds "
                f"{NORM_ABORT}; reduce dt")
        i = snap_lookup.get(n)
        if i is not None:
            mode_snaps[i] = system.mode_block(y)
        if n == n_steps:
            break
        k2 = system.rhs(tn + half, y + half * k1)
        k3 = system.rhs(tn + half, y + half * k2)
        k4 = system.rhs(tn + dt, y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    return Trajectory(system=system, dt=dt, t=t, csys=csys, csys_dot=csys_dot,
                      p1=p1, norm=norm, snap_steps=snap_steps, mode_snaps=mode_snaps)
