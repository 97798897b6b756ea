"""Closed-form resonant dynamics for a Lorentzian spin ensemble.

With a Lorentzian line of half-width Delta the memory kernel is a pure
exponential and the driven cavity reduces to a damped oscillator pair:

    A'' + (Delta + kappa) A' + (Omega^2 + Delta kappa) A + eta Delta = 0

during the drive, and the same homogeneous equation after switch-off.
This module evaluates the textbook solutions for the cavity amplitude
and the collective spin during and after a rectangular pulse, locates
the post-pulse overshoot, and provides the analytic overshoot estimate
for comparison (the two disagree by a known prefactor; the numerical
locator is the ground truth).

All quantities are real at resonance; functions accept scalar or array
times and return real values.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LorentzParams:
    """Resonant Lorentzian-ensemble problem: coupling, linewidth, cavity
    loss, drive amplitude and drive duration (all rates in rad/ns)."""

    Omega: float
    Delta: float
    kappa: float
    eta: float
    tau_d: float

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if self.Delta < 0 or self.Omega < 0:
            raise ValueError("rates must be non-negative")
        if self.tau_d < 0:
            raise ValueError(f"tau_d must be non-negative, got {self.tau_d}")


def exponents(p: LorentzParams) -> tuple[complex, complex]:
    """Characteristic roots lambda_{1,2} = [-(Delta+kappa) +- sqrt((Delta-kappa)^2 - 4 Omega^2)]/2."""
    root = cmath.sqrt(complex((p.Delta - p.kappa) ** 2 - 4.0 * p.Omega**2))
    s = p.Delta + p.kappa
    return ((-s + root) / 2.0, (-s - root) / 2.0)


def rabi_frequency(p: LorentzParams) -> float:
    """Underdamped oscillation frequency Omega_R = sqrt(4 Omega^2 - (Delta-kappa)^2)."""
    disc = 4.0 * p.Omega**2 - (p.Delta - p.kappa) ** 2
    if disc <= 0:
        raise ValueError(
            "overdamped: 4 Omega^2 <= (Delta - kappa)^2; no Rabi frequency "
            f"(Omega = {p.Omega}, Delta = {p.Delta}, kappa = {p.kappa})"
        )
    return math.sqrt(disc)


def steady_values(p: LorentzParams) -> tuple[float, float]:
    """Driven steady state (A_st, J_x_st) = (-Delta eta, eta Omega / 2) / (Omega^2 + Delta kappa)."""
    denom = p.Omega**2 + p.Delta * p.kappa
    return (-p.Delta * p.eta / denom, p.eta * p.Omega / (2.0 * denom))


def _complex_rabi(p: LorentzParams) -> complex:
    # Analytic continuation of Omega_R into the overdamped regime; the
    # closed forms below stay real either way.
    return cmath.sqrt(complex(4.0 * p.Omega**2 - (p.Delta - p.kappa) ** 2))


def cavity_on(p: LorentzParams, t):
    """Cavity amplitude during the drive (t measured from switch-on).

    A(t) = -Delta eta/(Omega^2 + Delta kappa)
           + eta e^{-(Delta+kappa) t/2} / (2 Omega_R (Omega^2 + Delta kappa))
             * [2 Omega_R Delta cos(Omega_R t/2) - (Omega_R^2 - Delta^2 + kappa^2) sin(Omega_R t/2)]
    """
    t = np.asarray(t, dtype=float)
    wr = _complex_rabi(p)
    denom = p.Omega**2 + p.Delta * p.kappa
    damp = np.exp(-(p.Delta + p.kappa) * t / 2.0)
    osc = (
        2.0 * wr * p.Delta * np.cos(wr * t / 2.0)
        - (wr**2 - p.Delta**2 + p.kappa**2) * np.sin(wr * t / 2.0)
    )
    val = -p.Delta * p.eta / denom + p.eta * damp * osc / (2.0 * wr * denom)
    out = np.asarray(val).real
    return out if out.shape else float(out)


def spin_on(p: LorentzParams, t):
    """Collective spin J_x during the drive.

    J_x(t) = eta Omega/(2 (Omega^2 + Delta kappa))
             - eta Omega e^{-(Delta+kappa) t/2} / (2 Omega_R (Omega^2 + Delta kappa))
               * [(Delta + kappa) sin(Omega_R t/2) + Omega_R cos(Omega_R t/2)]
    """
    t = np.asarray(t, dtype=float)
    wr = _complex_rabi(p)
    denom = p.Omega**2 + p.Delta * p.kappa
    damp = np.exp(-(p.Delta + p.kappa) * t / 2.0)
    osc = (p.Delta + p.kappa) * np.sin(wr * t / 2.0) + wr * np.cos(wr * t / 2.0)
    val = p.eta * p.Omega / (2.0 * denom) - p.eta * p.Omega * damp * osc / (2.0 * wr * denom)
    out = np.asarray(val).real
    return out if out.shape else float(out)


def cavity_off(p: LorentzParams, t):
    """Cavity amplitude after switch-off from the steady state (t >= tau_d).

    A(t) = eta e^{-(Delta+kappa)(t-tau_d)/2} / (2 Omega_R (Omega^2 + Delta kappa))
           * [-2 Omega_R Delta cos(Omega_R (t-tau_d)/2)
              + (Omega_R^2 - Delta^2 + kappa^2) sin(Omega_R (t-tau_d)/2)]
    """
    x = np.asarray(t, dtype=float) - p.tau_d
    wr = _complex_rabi(p)
    denom = p.Omega**2 + p.Delta * p.kappa
    damp = np.exp(-(p.Delta + p.kappa) * x / 2.0)
    osc = (
        -2.0 * wr * p.Delta * np.cos(wr * x / 2.0)
        + (wr**2 - p.Delta**2 + p.kappa**2) * np.sin(wr * x / 2.0)
    )
    val = p.eta * damp * osc / (2.0 * wr * denom)
    out = np.asarray(val).real
    return out if out.shape else float(out)


def spin_off(p: LorentzParams, t):
    """Collective spin J_x after switch-off (t >= tau_d).

    J_x(t) = eta Omega e^{-(Delta+kappa)(t-tau_d)/2} / (2 Omega_R (Omega^2 + Delta kappa))
             * [(Delta + kappa) sin(Omega_R (t-tau_d)/2) + Omega_R cos(Omega_R (t-tau_d)/2)]

    (The half-argument convention matches the drive-phase solutions; with
    the full argument in the sine this would not satisfy the spin's own
    equation of motion.)
    """
    x = np.asarray(t, dtype=float) - p.tau_d
    wr = _complex_rabi(p)
    denom = p.Omega**2 + p.Delta * p.kappa
    damp = np.exp(-(p.Delta + p.kappa) * x / 2.0)
    osc = (p.Delta + p.kappa) * np.sin(wr * x / 2.0) + wr * np.cos(wr * x / 2.0)
    val = p.eta * p.Omega * damp * osc / (2.0 * wr * denom)
    out = np.asarray(val).real
    return out if out.shape else float(out)


def modal_form(p: LorentzParams, phase: str):
    """Exponential-mode representation (offset, coefficients, roots).

    Returns (const, (c1, c2), (l1, l2)) such that the signal equals
    const + c1 e^{l1 x} + c2 e^{l2 x} with x measured from the phase
    start. Phases: "cavity_on", "spin_on", "cavity_off", "spin_off".
    Useful for analytic derivatives in residual checks.
    """
    l1, l2 = exponents(p)
    a_st, j_st = steady_values(p)
    if phase in ("cavity_on", "spin_on"):
        # A(0) = 0, A'(0) = -eta
        a1 = (-p.eta + l2 * a_st) / (l1 - l2)
        a2 = -a_st - a1
        if phase == "cavity_on":
            return a_st, (a1, a2), (l1, l2)
        if p.Omega == 0:
            raise ValueError("spin modes require Omega > 0")
        return j_st, ((l1 + p.kappa) * a1 / (2 * p.Omega),
                      (l2 + p.kappa) * a2 / (2 * p.Omega)), (l1, l2)
    if phase in ("cavity_off", "spin_off"):
        # A(0) = A_st, A'(0) = +eta (the polarized ensemble pushes back).
        a1 = (p.eta - l2 * a_st) / (l1 - l2)
        a2 = a_st - a1
        if phase == "cavity_off":
            return 0.0, (a1, a2), (l1, l2)
        if p.Omega == 0:
            raise ValueError("spin modes require Omega > 0")
        return 0.0, ((l1 + p.kappa) * a1 / (2 * p.Omega),
                     (l2 + p.kappa) * a2 / (2 * p.Omega)), (l1, l2)
    raise ValueError(f"unknown phase {phase!r}")


def _golden_section_max(f, lo: float, hi: float, tol: float) -> float:
    """Argmax of f on [lo, hi] by golden-section search."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def overshoot_first_peak(p: LorentzParams) -> tuple[float, float]:
    """Numerically locate the first post-pulse maximum of A(t)^2.

    Searches one full Rabi period past switch-off by golden section
    (time tolerance 1e-6 ns) and returns (t_peak, A_peak^2).
    """
    wr = rabi_frequency(p)
    lo, hi = p.tau_d, p.tau_d + 2.0 * math.pi / wr
    f = lambda t: float(cavity_off(p, t)) ** 2
    t_peak = _golden_section_max(f, lo, hi, tol=1e-6)
    return t_peak, f(t_peak)


def overshoot_formula(p: LorentzParams) -> float:
    """Analytic first-peak estimate

        A_1^2 = A_st^2 exp(-(2(Delta+kappa)/Omega_R) arccos[-(Delta-kappa)/(2 Omega)]).

    As written this can never exceed A_st^2, while the located peak does
    for strong coupling; a coupling-dependent prefactor appears to be
    missing. Both values are reported by the tooling rather than patching
    the expression.
    """
    wr = rabi_frequency(p)
    a_st, _ = steady_values(p)
    arg = -(p.Delta - p.kappa) / (2.0 * p.Omega)
    return a_st**2 * math.exp(-(2.0 * (p.Delta + p.kappa) / wr) * math.acos(arg))


def overshoot_threshold(delta: float, kappa: float,
                        tol: float = 2.0 * math.pi * 1e-7) -> float:
    """Coupling at which the first post-pulse peak equals the steady state.

    Bisects Omega between the damping boundary |Delta-kappa|/2 (where the
    peak amplitude vanishes) and a strong-coupling upper end; requires
    Delta > kappa so switch-off dynamics actually decay faster than the
    drive phase. Tolerance is in rad/ns (default 1e-4 * 2 pi MHz).
    """
    if not delta > kappa:
        raise ValueError("threshold search assumes Delta > kappa")

    def excess(omega: float) -> float:
        p = LorentzParams(Omega=omega, Delta=delta, kappa=kappa, eta=1.0, tau_d=0.0)
        a_st, _ = steady_values(p)
        _, peak2 = overshoot_first_peak(p)
        return peak2 - a_st**2

    lo = (delta - kappa) / 2.0 * (1.0 + 1e-9)
    hi = max(4.0 * delta, 8.0 * kappa)
    while excess(hi) <= 0:
        hi *= 2.0
        if hi > 1e3 * delta:
            raise RuntimeError("no overshoot found up to 1000x Delta")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def equivalent_lorentzian(omega_r_target: float, a_st_target: float,
                          kappa: float, eta: float) -> tuple[float, float]:
    """Fit (Omega, Delta) so the Lorentzian model reproduces a target
    Rabi frequency and steady-state amplitude.

    From A_st = -eta/(Omega^2/Delta + kappa), the ratio G = Omega^2/Delta
    is fixed by the steady state; Omega_R^2 = 4 G Delta - (Delta-kappa)^2
    then gives a quadratic for Delta (small root; the large root puts the
    system overdamped).
    """
    g = eta / abs(a_st_target) - kappa
    if g <= 0:
        raise ValueError("steady-state target shallower than the bare cavity")
    b = 4.0 * g + 2.0 * kappa
    disc = b**2 - 4.0 * (omega_r_target**2 + kappa**2)
    if disc < 0:
        raise ValueError("no Lorentzian matches the requested pair")
    delta = (b - math.sqrt(disc)) / 2.0
    return math.sqrt(g * delta), delta
