"""Time-domain integration of the cavity amplitude memory equation.

The cavity amplitude obeys a Volterra equation of the second kind,

    A(t) = int_0^t K(t - tau) A(tau) dtau + F(t),

in the frame rotating at the drive frequency. The memory kernel K folds
the spin ensemble's line shape with the cavity response; F collects the
drive and any initial amplitude. Both are evaluated in closed form on
the quadrature grid, so the only discretization is the trapezoidal
product integration of the memory term.

Long runs are marched segment by segment (one segment per constant-drive
interval): each segment restarts the convolution with a short local
history, and everything older enters through a per-frequency accumulator
I_n(omega). The segmented recurrence is algebraically identical to the
full-history trapezoid rule, which `solve_direct` implements for cross
checking on short grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ComplexSeries, DriveProtocol, SystemParams, TimeGrid
from .spectral import (
    DiracDeltaDensity,
    FrequencyGrid,
    SpinDensity,
    grid_for_density,
)

# Phase recurrences multiply a unit-modulus step; recompute the exact
# exponential this often to keep accumulated rounding below ~1e-13.
_REFRESH = 512


def _mass_weights(density: SpinDensity, grid: FrequencyGrid) -> np.ndarray:
    """Quadrature mass rho(omega_i) * w_i; a Dirac line is a unit atom."""
    if isinstance(density, DiracDeltaDensity):
        return np.array([1.0])
    return density.pdf(grid.omegas) * grid.weights


class KernelCache:
    """Kernel values K(m*dt) on the lag grid, built incrementally.

    K(x) = Omega^2 * sum_i c_i (e^{-i nu_i x} - e^{-i omega_bar x}),
    c_i = m_i / (i u_i), u_i = omega_i - omega_c + i kappa,
    nu_i = omega_i - omega_p, omega_bar = omega_c - omega_p - i kappa.

    K(0) = 0 exactly (the two phase factors coincide at zero lag).
    """

    def __init__(self, params: SystemParams, density: SpinDensity,
                 grid: FrequencyGrid, dt: float):
        self.dt = dt
        self._omega2 = params.Omega**2
        self._nu = grid.omegas - params.omega_p
        u = grid.omegas - params.omega_c + 1j * params.kappa
        self._c = _mass_weights(density, grid) / (1j * u)
        self._csum = complex(self._c.sum())
        self._wb = params.omega_bar
        self._k = np.zeros(1, dtype=complex)  # K(0) = 0

    def single(self, m: int) -> complex:
        """Direct evaluation at lag index m (no recurrences)."""
        x = m * self.dt
        val = self._c @ np.exp(-1j * self._nu * x) - self._csum * np.exp(-1j * self._wb * x)
        return self._omega2 * complex(val)

    def values(self, n_lags: int) -> np.ndarray:
        """K at lags 0 .. n_lags-1, extending the cache as needed."""
        start = len(self._k)
        if n_lags > start:
            ext = np.empty(n_lags - start, dtype=complex)
            step = np.exp(-1j * self._nu * self.dt)
            e = np.exp(-1j * self._nu * (start * self.dt))
            cav = self._csum * np.exp(-1j * self._wb * self.dt * np.arange(start, n_lags))
            for i, m in enumerate(range(start, n_lags)):
                if i and i % _REFRESH == 0:
                    e = np.exp(-1j * self._nu * (m * self.dt))
                ext[i] = self._c @ e - cav[i]
                e = e * step
            self._k = np.concatenate([self._k, self._omega2 * ext])
        return self._k[:n_lags]


def kernel_K(params: SystemParams, density: SpinDensity, lag,
             grid: FrequencyGrid | None = None):
    """Memory kernel K(lag) by direct quadrature (scalar or array lag)."""
    lag_arr = np.atleast_1d(np.asarray(lag, dtype=float))
    if grid is None:
        grid = grid_for_density(density, t_max=float(lag_arr.max()) or None)
    m = _mass_weights(density, grid)
    u = grid.omegas - params.omega_c + 1j * params.kappa
    c = m / (1j * u)
    nu = grid.omegas - params.omega_p
    wb = params.omega_bar
    # Subtract the cavity phase inside the bracket so K(0) comes out as
    # an exact 0 instead of the difference of two large reductions.
    bracket = (np.exp(-1j * np.outer(lag_arr, nu))
               - np.exp(-1j * wb * lag_arr)[:, None])
    out = params.Omega**2 * (bracket @ c)
    if np.isscalar(lag) or np.asarray(lag).ndim == 0:
        return complex(out[0])
    return out


def forcing_F(params: SystemParams, protocol: DriveProtocol, t):
    """Drive forcing F(t) = -int_0^t eta(tau) e^{-i omega_bar (t-tau)} dtau.

    Piecewise-constant drives integrate in closed form segment by
    segment; no time quadrature is involved.
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros(len(t_arr), dtype=complex)
    wb = params.omega_bar
    edges = protocol.boundaries()
    for k, (_, eta) in enumerate(protocol.segments):
        a, b = edges[k], edges[k + 1]
        active = t_arr > a
        if not active.any():
            break
        ta = t_arr[active]
        upper = np.minimum(ta, b)
        out[active] += -eta * (
            np.exp(-1j * wb * (ta - upper)) - np.exp(-1j * wb * (ta - a))
        ) / (1j * wb)
    if np.isscalar(t) or np.asarray(t).ndim == 0:
        return complex(out[0])
    return out


@dataclass
class SolverMemory:
    """Cross-segment state: boundary amplitude and frequency accumulator.

    Fresh dynamics start from vacuum: A(T_1) = 0 and I_1(omega) = 0.
    """

    boundary_amplitude: complex
    accumulator: np.ndarray

    @classmethod
    def vacuum(cls, n_freq: int, a0: complex = 0.0) -> "SolverMemory":
        return cls(boundary_amplitude=complex(a0),
                   accumulator=np.zeros(n_freq, dtype=complex))


def _plan_segments(protocol: DriveProtocol, tgrid: TimeGrid) -> list[tuple[int, complex]]:
    """Split the grid's n_steps-1 intervals into constant-drive segments."""
    n_int = tgrid.n_steps - 1
    plan: list[tuple[int, complex]] = []
    used = 0
    for dur, eta in protocol.segments:
        steps = int(round(dur / tgrid.dt))
        if steps < 1 or abs(steps * tgrid.dt - dur) > 1e-9 * max(dur, 1.0):
            raise ValueError(
                f"segment duration {dur} is not a positive multiple of dt = {tgrid.dt}"
            )
        if used + steps >= n_int:
            plan.append((n_int - used, eta))
            used = n_int
            break
        plan.append((steps, eta))
        used += steps
    if used < n_int:
        plan.append((n_int - used, 0j))
    return plan


def solve(params: SystemParams, density: SpinDensity, protocol: DriveProtocol,
          tgrid: TimeGrid, a0: complex = 0.0,
          grid: FrequencyGrid | None = None) -> ComplexSeries:
    """March the memory equation with the segmented recurrence.

    The time grid must start at 0 and dt must divide every drive segment
    (the harness snaps requested durations before calling). ``a0`` is an
    optional initial cavity amplitude; the spins always start in vacuum.
    """
    if tgrid.t_start != 0.0:
        raise ValueError("solve expects a grid starting at t = 0")
    if grid is None:
        grid = grid_for_density(density, t_max=tgrid.t_end)
    plan = _plan_segments(protocol, tgrid)

    dt = tgrid.dt
    nu = grid.omegas - params.omega_p
    u = grid.omegas - params.omega_c + 1j * params.kappa
    m = _mass_weights(density, grid)
    c = m / (1j * u)
    wb = params.omega_bar
    om2 = params.Omega**2

    max_lag = max(L for L, _ in plan) + 1
    if om2 != 0.0:
        kernel = KernelCache(params, density, grid, dt)
        k_full = kernel.values(max_lag)
    else:
        k_full = np.zeros(max_lag, dtype=complex)

    n = tgrid.n_steps
    A = np.empty(n, dtype=complex)
    mem = SolverMemory.vacuum(len(nu), a0)
    A[0] = mem.boundary_amplitude

    step = np.exp(-1j * nu * dt)
    cstep = np.conj(step)
    pos = 0
    for seg_idx, (L, eta) in enumerate(plan):
        last = seg_idx == len(plan) - 1
        k = k_full
        a_b = mem.boundary_amplitude
        d = c * mem.accumulator
        have_memory = om2 != 0.0 and np.any(mem.accumulator)
        s_sum = complex(d.sum()) if have_memory else 0j

        ebar = np.exp(-1j * wb * dt * np.arange(L + 1))
        base = ebar * (a_b - om2 * s_sum) - eta * (1.0 - ebar) / (1j * wb)

        a_loc = np.empty(L + 1, dtype=complex)
        a_loc[0] = a_b
        rev = np.zeros(L + 1, dtype=complex)
        rev[L] = a_b

        e = np.ones(len(nu), dtype=complex)
        ec = np.ones(len(nu), dtype=complex)
        acc = None
        if not last:
            acc = (0.5 * dt * a_b) * np.ones(len(nu), dtype=complex)

        for j in range(1, L + 1):
            if have_memory:
                if j % _REFRESH == 0:
                    e = np.exp(-1j * nu * (j * dt))
                else:
                    e = e * step
            if acc is not None:
                if j % _REFRESH == 0:
                    ec = np.exp(1j * nu * (j * dt))
                else:
                    ec = ec * cstep
            f_j = base[j]
            if have_memory:
                f_j = f_j + om2 * (e @ d)
            if om2 != 0.0:
                s = 0.5 * k[j] * a_loc[0]
                if j > 1:
                    s += k[1:j] @ rev[L - j + 1:L]
                f_j = f_j + dt * s
            a_loc[j] = f_j
            rev[L - j] = f_j
            if acc is not None:
                w_j = dt if j < L else 0.5 * dt
                acc += (w_j * f_j) * ec

        A[pos:pos + L + 1] = a_loc
        pos += L
        if not last:
            phase_l = np.exp(-1j * nu * (L * dt))
            mem = SolverMemory(
                boundary_amplitude=complex(a_loc[L]),
                accumulator=phase_l * (mem.accumulator + acc),
            )
    return ComplexSeries(grid=tgrid, values=A)


MAX_DIRECT_STEPS = 4096


def _march_full(k: np.ndarray, forcing: np.ndarray, dt: float) -> np.ndarray:
    """Full-history trapezoidal product integration (O(n^2))."""
    n = len(forcing)
    a = np.empty(n, dtype=complex)
    a[0] = forcing[0]
    rev = np.zeros(n, dtype=complex)
    rev[n - 1] = a[0]
    for j in range(1, n):
        s = 0.5 * k[j] * a[0]
        if j > 1:
            s += k[1:j] @ rev[n - j:n - 1]
        a[j] = forcing[j] + dt * s
        rev[n - 1 - j] = a[j]
    return a


def solve_direct(params: SystemParams, density: SpinDensity,
                 protocol: DriveProtocol, tgrid: TimeGrid, a0: complex = 0.0,
                 grid: FrequencyGrid | None = None) -> ComplexSeries:
    """Reference solver keeping the entire convolution history.

    Quadratic in n_steps, so grids beyond MAX_DIRECT_STEPS samples are
    refused; use `solve` for production runs.
    """
    if tgrid.t_start != 0.0:
        raise ValueError("solve_direct expects a grid starting at t = 0")
    if tgrid.n_steps > MAX_DIRECT_STEPS:
        raise ValueError(
            f"solve_direct is capped at {MAX_DIRECT_STEPS} samples, "
            f"got {tgrid.n_steps}; use solve for long grids"
        )
    # Validates divisibility the same way solve does.
    _plan_segments(protocol, tgrid)
    if grid is None:
        grid = grid_for_density(density, t_max=tgrid.t_end)
    times = tgrid.times()
    forcing = np.asarray(forcing_F(params, protocol, times), dtype=complex)
    if a0 != 0.0:
        forcing = forcing + a0 * np.exp(-1j * params.omega_bar * times)
    kernel = KernelCache(params, density, grid, tgrid.dt)
    k = kernel.values(tgrid.n_steps)
    return ComplexSeries(grid=tgrid, values=_march_full(k, forcing, tgrid.dt))


def collective_spin(params: SystemParams, density: SpinDensity,
                    a_series: ComplexSeries,
                    grid: FrequencyGrid | None = None) -> ComplexSeries:
    """Collective spin quadratures J_x + i J_y driven by a cavity record.

    J(t) = -(Omega/2) int d omega rho(omega)
           int_0^t e^{-i (omega - omega_p)(t - tau)} A(tau) dtau,

    accumulated with one phase-recurrence accumulator per frequency node,
    so the cost is O(n_steps * n_freq) rather than quadratic in time.
    """
    if grid is None:
        grid = grid_for_density(density, t_max=a_series.grid.t_end)
    dt = a_series.grid.dt
    nu = grid.omegas - params.omega_p
    m = _mass_weights(density, grid)
    a = a_series.values
    n = len(a)
    step = np.exp(-1j * nu * dt)
    phi = np.zeros(len(nu), dtype=complex)
    out = np.empty(n, dtype=complex)
    out[0] = 0.0
    half = 0.5 * dt
    for j in range(1, n):
        phi = step * phi + half * (step * a[j - 1] + a[j])
        out[j] = m @ phi
    return ComplexSeries(grid=a_series.grid, values=-(params.Omega / 2.0) * out)


def spin_mode_amplitude(params: SystemParams, omega_k: float, g_k: float,
                        a_series: ComplexSeries) -> ComplexSeries:
    """Single spin-mode response B_k(t) = -g_k int_0^t e^{-i(omega_k - omega_p - i gamma)(t-tau)} A(tau) dtau."""
    dt = a_series.grid.dt
    a = a_series.values
    n = len(a)
    decay = np.exp((-1j * (omega_k - params.omega_p) - params.gamma) * dt)
    out = np.empty(n, dtype=complex)
    out[0] = 0.0
    phi = 0j
    half = 0.5 * dt
    for j in range(1, n):
        phi = decay * phi + half * (decay * a[j - 1] + a[j])
        out[j] = phi
    return ComplexSeries(grid=a_series.grid, values=-g_k * out)


def steady_state(params: SystemParams, density: SpinDensity,
                 eta: float | None = None,
                 grid: FrequencyGrid | None = None) -> tuple[complex, complex]:
    """Driven steady state (A_st, J_x^st + i J_y^st) at exact resonance.

    A_st = eta / (-kappa + i Omega^2 [PV + i pi rho(omega_s)]), where the
    principal-value part vanishes by symmetry, leaving the real
    -eta / (kappa + pi Omega^2 rho(omega_s)).
    """
    if not params.is_resonant:
        raise ValueError("steady_state is defined at resonance only")
    if eta is None:
        eta = params.kappa
    if params.Omega == 0.0:
        return (-eta / params.kappa, 0j)
    if isinstance(density, DiracDeltaDensity):
        raise ValueError("steady state needs a broadened density (or Omega = 0)")
    from .spectral import sokhotski_split  # local import keeps module deps one-way

    if grid is None:
        grid = grid_for_density(density)
    pv, half_residue = sokhotski_split(density, grid, density.pdf)
    denom = -params.kappa + 1j * params.Omega**2 * (pv + half_residue)
    a_st = eta / denom
    rho_s = density.pdf(density.omega_s)
    j_st = (1j * a_st * params.Omega / 2.0) * (pv + 1j * math.pi * rho_s)
    return (complex(a_st), complex(j_st))


def decay_from_steady_state(params: SystemParams, density: SpinDensity,
                            tgrid: TimeGrid, eta: float | None = None,
                            grid: FrequencyGrid | None = None) -> ComplexSeries:
    """Free decay after switching off a long resonant drive.

    Starts from the driven steady state with the ensemble polarized; the
    stored excitation re-emits through the source term

        S(t) = A_st Omega^2 [ int rho(omega) sin((omega-omega_s) t)/(omega-omega_s) d omega
                              - pi rho(omega_s) ],

    which is folded with the cavity response and the usual memory kernel.
    """
    if tgrid.t_start != 0.0:
        raise ValueError("decay grid starts at the switch-off instant t = 0")
    if not params.is_resonant:
        raise ValueError("decay_from_steady_state is defined at resonance only")
    if eta is None:
        eta = params.kappa
    a_st, _ = steady_state(params, density, eta=eta, grid=grid)
    times = tgrid.times()
    kappa = params.kappa
    if params.Omega == 0.0:
        return ComplexSeries(grid=tgrid, values=a_st * np.exp(-kappa * times))
    if grid is None:
        grid = grid_for_density(density, t_max=tgrid.t_end)

    x = grid.omegas - params.omega_s
    mass = _mass_weights(density, grid)
    rho_s = density.pdf(density.omega_s)
    n = tgrid.n_steps
    source = np.empty(n)
    # sin(x t)/x via sinc keeps the central node exact (limit t).
    block = 2048
    for i0 in range(0, n, block):
        tb = times[i0:i0 + block, None]
        source[i0:i0 + len(tb)] = (tb * np.sinc(x[None, :] * tb / math.pi)) @ mass
    source = (a_st * params.Omega**2) * (source - math.pi * rho_s)

    # Forcing: steady state relaxing at kappa plus the re-emission folded
    # with e^{-kappa (t-s)} (trapezoid recurrence, matching the marcher).
    decay_step = math.exp(-kappa * tgrid.dt)
    fold = np.empty(n, dtype=complex)
    fold[0] = 0.0
    q = 0j
    half = 0.5 * tgrid.dt
    for j in range(1, n):
        q = decay_step * q + half * (decay_step * source[j - 1] + source[j])
        fold[j] = q
    forcing = a_st * np.exp(-kappa * times) + fold

    kernel = KernelCache(params, density, grid, tgrid.dt)
    k = kernel.values(n)
    return ComplexSeries(grid=tgrid, values=_march_full(k, forcing, tgrid.dt))
