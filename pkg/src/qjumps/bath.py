"""Lorentzian bath discretized into a uniform comb of modes.

Frequencies are stored as offsets from the spectral peak omega_c, and all
rates are quoted in units of the half-width lam (lam = 1 makes time
dimensionless). Couplings follow g_k = sqrt(dnu * rho(nu_k)) so that the
discrete sum over modes approximates the continuum coupling density.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# window half-width defaults to this many half-widths around the peak
DEFAULT_WINDOW_FACTOR = 20.0


@dataclass(frozen=True)
class BathSpec:
    """Bath parameters plus the detuning of each system transition.

    gamma0    : Markovian decay scale of the Lorentzian (0 allowed: uncoupled)
    detunings : offset of each decay channel's transition frequency from the
                spectral peak, delta_i = omega_i - omega_c; one entry for a
                two-level system, two for a V configuration
    lam       : Lorentzian half-width, sets the bath memory time 1/lam
    n_modes   : number of modes in the comb
    window    : half-width of the sampled interval around the peak;
                None means DEFAULT_WINDOW_FACTOR * lam
    """

    gamma0: float
    detunings: tuple[float, ...] = (0.0,)
    lam: float = 1.0
    n_modes: int = 180
    window: float | None = None

    def __post_init__(self):
        if self.gamma0 < 0:
            raise ValueError("gamma0 must be nonnegative")
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.n_modes < 1:
            raise ValueError("n_modes must be at least 1")
        if len(self.detunings) == 0:
            raise ValueError("need at least one detuning")
        if self.window is not None and self.window <= 0:
            raise ValueError("window must be positive")
        object.__setattr__(self, "detunings", tuple(float(d) for d in self.detunings))

    @property
    def window_halfwidth(self) -> float:
        if self.window is None:
            return DEFAULT_WINDOW_FACTOR * self.lam
        return float(self.window)


@dataclass(frozen=True)
class ModeGrid:
    """Uniform frequency comb. offsets are nu_k - omega_c, ascending."""

    offsets: np.ndarray
    couplings: np.ndarray
    spacing: float

    @property
    def n_modes(self) -> int:
        return int(self.offsets.size)


def spectral_density(spec: BathSpec, offsets) -> np.ndarray:
    """Lorentzian coupling density rho(nu) at nu - omega_c = offsets."""
    offsets = np.asarray(offsets, dtype=float)
    return spec.gamma0 * spec.lam**2 / (2.0 * np.pi * (offsets**2 + spec.lam**2))


def build_grid(spec: BathSpec) -> ModeGrid:
    """Discretize the bath: n_modes equally spaced modes on [-W, W].

    Endpoints included. A single mode sits at the spectral peak and carries
    the whole window weight through dnu = 2W.
    """
    w = spec.window_halfwidth
    if spec.n_modes == 1:
        spacing = 2.0 * w
        offsets = np.zeros(1)
    else:
        spacing = 2.0 * w / (spec.n_modes - 1)
        offsets = np.linspace(-w, w, spec.n_modes)
    couplings = np.sqrt(spacing * spectral_density(spec, offsets))
    return ModeGrid(offsets=offsets, couplings=couplings, spacing=spacing)


def recurrence_time(grid: ModeGrid) -> float:
    """Revival time 2*pi/dnu of the comb; runs must stay well below it."""
    return 2.0 * np.pi / grid.spacing
