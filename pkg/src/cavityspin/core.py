"""Units, system parameters, time grids, and drive protocols.

Everything downstream works in nanoseconds and angular frequency
(rad/ns). Laboratory frequencies quoted in MHz or GHz are converted on
the way in and never stored. All dynamical quantities live in the frame
rotating at the drive frequency omega_p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

# Default time step (ns). Small enough to resolve the fastest Rabi
# dynamics the RWA bound on Omega allows.
DEFAULT_DT = 0.05


def mhz_to_angular(f_mhz: float) -> float:
    """Angular frequency (rad/ns) for a laboratory frequency in MHz."""
    return TWO_PI * f_mhz * 1e-3


def ghz_to_angular(f_ghz: float) -> float:
    """Angular frequency (rad/ns) for a laboratory frequency in GHz."""
    return TWO_PI * f_ghz


def angular_to_mhz(omega: float) -> float:
    """Inverse of :func:`mhz_to_angular`."""
    return omega / TWO_PI * 1e3


@dataclass(frozen=True)
class SystemParams:
    """Cavity, ensemble and drive-frame frequencies plus loss rates.

    omega_c : cavity resonance (rad/ns)
    omega_s : center of the spin distribution (rad/ns)
    omega_p : drive (rotating-frame) frequency (rad/ns)
    kappa   : cavity amplitude decay rate (rad/ns)
    gamma   : single-spin amplitude decay rate (rad/ns), usually 0
    Omega   : collective coupling (rad/ns); the polariton splitting
              at resonance is 2*Omega
    """

    omega_c: float
    omega_s: float
    omega_p: float
    kappa: float
    gamma: float = 0.0
    Omega: float = 0.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")
        if self.Omega < 0:
            raise ValueError(f"Omega must be non-negative, got {self.Omega}")
        # Rotating-wave sanity: the model drops counter-rotating terms,
        # which is only defensible for couplings tiny against the carrier.
        if not self.Omega < self.omega_c / 50.0:
            raise ValueError(
                "Omega = %g rad/ns violates the weak-coupling bound "
                "omega_c/50 = %g" % (self.Omega, self.omega_c / 50.0)
            )

    @property
    def omega_bar(self) -> complex:
        """Complex cavity detuning omega_c - omega_p - i*kappa."""
        return self.omega_c - self.omega_p - 1j * self.kappa

    @property
    def is_resonant(self) -> bool:
        """True when drive, cavity and ensemble center all coincide."""
        scale = max(abs(self.omega_c), 1.0)
        return (
            abs(self.omega_p - self.omega_c) <= 1e-12 * scale
            and abs(self.omega_s - self.omega_c) <= 1e-12 * scale
        )


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid with n_steps samples starting at t_start."""

    t_start: float
    dt: float
    n_steps: int

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.n_steps < 2:
            raise ValueError(f"need at least 2 samples, got {self.n_steps}")

    @property
    def t_end(self) -> float:
        return self.t_start + (self.n_steps - 1) * self.dt

    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_steps)


@dataclass(frozen=True)
class DriveProtocol:
    """Piecewise-constant complex drive amplitude.

    ``segments`` is an ordered tuple of (duration, eta) pairs; the drive
    is zero after the last segment ends (and before t = 0). An empty
    protocol means free evolution.
    """

    segments: tuple[tuple[float, complex], ...]

    def __post_init__(self):
        segs = tuple((float(d), complex(e)) for d, e in self.segments)
        for d, _ in segs:
            if not d > 0:
                raise ValueError(f"segment durations must be positive, got {d}")
        object.__setattr__(self, "segments", segs)

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    @property
    def total_duration(self) -> float:
        return sum(d for d, _ in self.segments)

    def boundaries(self) -> np.ndarray:
        """Cumulative segment edges [0, T_1, T_2, ...]."""
        return np.concatenate(([0.0], np.cumsum([d for d, _ in self.segments])))

    def amplitudes(self) -> np.ndarray:
        return np.array([e for _, e in self.segments], dtype=complex)

    def eta_at(self, t):
        """Drive amplitude at time(s) t (scalar or array)."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=complex)
        if self.segments:
            edges = self.boundaries()
            idx = np.searchsorted(edges, t, side="right") - 1
            inside = (idx >= 0) & (idx < len(self.segments)) & (t < edges[-1])
            amps = self.amplitudes()
            out[inside] = amps[idx[inside]]
        return out if out.shape else complex(out)

    def pulse_energy(self) -> float:
        """Time integral of |eta|^2 over the whole protocol."""
        return float(sum(d * abs(e) ** 2 for d, e in self.segments))


def rect_pulse(eta: complex, tau_d: float) -> DriveProtocol:
    """Single rectangular pulse of amplitude eta and duration tau_d."""
    if not tau_d > 0:
        raise ValueError(f"tau_d must be positive, got {tau_d}")
    return DriveProtocol(((float(tau_d), complex(eta)),))


def phase_switched_train(eta: complex, tau: float, n_pulses: int) -> DriveProtocol:
    """Train of n_pulses contiguous pulses of length tau with the drive
    phase flipped by pi between consecutive pulses: eta, -eta, eta, ...
    """
    if n_pulses < 1:
        raise ValueError(f"n_pulses must be >= 1, got {n_pulses}")
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    eta = complex(eta)
    return DriveProtocol(
        tuple((float(tau), eta if n % 2 == 0 else -eta) for n in range(n_pulses))
    )


@dataclass
class ComplexSeries:
    """A complex-valued signal sampled on a TimeGrid."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.ndim != 1 or len(vals) != self.grid.n_steps:
            raise ValueError(
                f"series length {vals.shape} does not match grid "
                f"n_steps = {self.grid.n_steps}"
            )
        self.values = vals

    def times(self) -> np.ndarray:
        return self.grid.times()

    def abs2(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def __len__(self) -> int:
        return self.grid.n_steps
