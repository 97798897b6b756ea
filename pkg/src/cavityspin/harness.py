"""Scenario runners, configuration parsing, and tabular output.

Everything the command line can do lives here as plain functions: parse a
JSON document into typed specs, run one of the named scenarios through
the time-domain solver or the resolvent machinery, and serialize the
result as a CSV table plus a JSON manifest recording every derived
constant (snapped pulse durations, fitted comparison parameters, decay
diagnostics).

Determinism contract: a given config maps to bit-identical CSV bytes
whether sweep points run serially or on a process pool. Points are
independent, assembly is ordered by sweep index, and no reduction mixes
results across workers.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import os
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np
import scipy

from . import __version__, laplace, lorentz, volterra
from .core import (
    SystemParams,
    TimeGrid,
    angular_to_mhz,
    ghz_to_angular,
    mhz_to_angular,
    phase_switched_train,
    rect_pulse,
)
from .spectral import (
    DiracDeltaDensity,
    LorentzianDensity,
    QGaussianDensity,
    SpinDensity,
    delta_from_fwhm,
)

LONG_PULSE = "long-pulse"
TRAIN_MAP = "train-map"
GAMMA_SWEEP = "gamma-sweep"
TRAIN_COMPARE = "train-compare"
MAX_SCAN = "max-scan"
LORENTZ_ANALYTIC = "lorentz-analytic"
SCENARIOS = (
    LONG_PULSE,
    TRAIN_MAP,
    GAMMA_SWEEP,
    TRAIN_COMPARE,
    MAX_SCAN,
    LORENTZ_ANALYTIC,
)

# Parameters a sweep axis may vary. Couplings and drive gaps are the two
# physical knobs the scenarios scan; probe offsets express detuned runs
# relative to the cavity so configs stay valid when the cavity moves.
SWEEPABLE = ("coupling_mhz", "probe_offset_mhz", "tau_ns")

WORKER_ENV = "CAVITYSPIN_MAX_WORKERS"

# Free-decay traces are extended until the intensity envelope has
# dropped three decades, so rate fits see real dynamic range; the cap
# keeps a non-decaying trace from growing unboundedly. Growth is x4 per
# attempt: each attempt rebuilds the spectral kernel, and quadrupling
# reaches protected (slow) decays in a handful of rebuilds while the
# final attempt still dominates total cost.
_ENVELOPE_DROP = 1e-3
_T_GROWTH = 4.0
_T_MAX_CAP = 16384.0
_SETTLED_FRACTION = 0.2


class ConfigError(ValueError):
    """Invalid or inconsistent scenario configuration."""


# ---------------------------------------------------------------------------
# configuration specs


def _reject_unknown(mapping, allowed, where):
    if not isinstance(mapping, dict):
        raise ConfigError(f"{where} must be a JSON object, got {type(mapping).__name__}")
    unknown = set(mapping) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown {where} keys: {sorted(unknown)}")


def _as_float(value, name):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    return float(value)


def _opt_float(mapping, key, where, default=None):
    value = mapping.get(key)
    if value is None:
        return default
    return _as_float(value, f"{where}.{key}")


@dataclass(frozen=True)
class SystemSpec:
    """Frequencies in laboratory units: GHz for carriers, MHz for rates.

    ``coupling_mhz`` is the collective coupling over 2*pi; manifests echo
    its double as well, because half the scan tables in circulation are
    labeled by the doubled value and the factor of two is a classic trap.
    """

    cavity_ghz: float
    kappa_mhz: float
    coupling_mhz: float
    spin_ghz: float
    probe_ghz: float
    spin_loss_mhz: float = 0.0

    @staticmethod
    def from_mapping(mapping) -> "SystemSpec":
        _reject_unknown(
            mapping,
            ("cavity_ghz", "kappa_mhz", "coupling_mhz", "spin_ghz",
             "probe_ghz", "spin_loss_mhz"),
            "system",
        )
        for key in ("cavity_ghz", "kappa_mhz", "coupling_mhz"):
            if mapping.get(key) is None:
                raise ConfigError(f"system.{key} is required")
        cavity = _as_float(mapping["cavity_ghz"], "system.cavity_ghz")
        return SystemSpec(
            cavity_ghz=cavity,
            kappa_mhz=_as_float(mapping["kappa_mhz"], "system.kappa_mhz"),
            coupling_mhz=_as_float(mapping["coupling_mhz"], "system.coupling_mhz"),
            spin_ghz=_opt_float(mapping, "spin_ghz", "system", cavity),
            probe_ghz=_opt_float(mapping, "probe_ghz", "system", cavity),
            spin_loss_mhz=_opt_float(mapping, "spin_loss_mhz", "system", 0.0),
        )

    def to_params(self) -> SystemParams:
        try:
            return SystemParams(
                omega_c=ghz_to_angular(self.cavity_ghz),
                omega_s=ghz_to_angular(self.spin_ghz),
                omega_p=ghz_to_angular(self.probe_ghz),
                kappa=mhz_to_angular(self.kappa_mhz),
                gamma=mhz_to_angular(self.spin_loss_mhz),
                Omega=mhz_to_angular(self.coupling_mhz),
            )
        except ValueError as exc:
            raise ConfigError(f"system config rejected: {exc}") from exc


@dataclass(frozen=True)
class DensitySpec:
    """Spin line shape: kind plus lab-unit width and center."""

    kind: str
    fwhm_mhz: float | None
    q: float | None
    center_ghz: float

    @staticmethod
    def from_mapping(mapping, system: SystemSpec) -> "DensitySpec":
        _reject_unknown(mapping, ("kind", "fwhm_mhz", "q", "center_ghz"), "density")
        kind = mapping.get("kind")
        if kind not in ("qgauss", "lorentz", "delta"):
            raise ConfigError(f"density.kind must be qgauss|lorentz|delta, got {kind!r}")
        fwhm = _opt_float(mapping, "fwhm_mhz", "density")
        q = _opt_float(mapping, "q", "density")
        if kind in ("qgauss", "lorentz") and fwhm is None:
            raise ConfigError(f"density.fwhm_mhz is required for kind {kind!r}")
        if kind == "qgauss" and q is None:
            raise ConfigError("density.q is required for kind 'qgauss'")
        if kind in ("lorentz", "delta"):
            q = None
        if kind == "delta":
            fwhm = None
        return DensitySpec(
            kind=kind,
            fwhm_mhz=fwhm,
            q=q,
            center_ghz=_opt_float(mapping, "center_ghz", "density", system.spin_ghz),
        )

    def build(self) -> SpinDensity:
        center = ghz_to_angular(self.center_ghz)
        try:
            if self.kind == "qgauss":
                width = delta_from_fwhm(self.q, mhz_to_angular(self.fwhm_mhz))
                return QGaussianDensity(center, self.q, width)
            if self.kind == "lorentz":
                return LorentzianDensity(center, mhz_to_angular(self.fwhm_mhz) / 2.0)
            return DiracDeltaDensity(center)
        except ValueError as exc:
            raise ConfigError(f"density config rejected: {exc}") from exc


@dataclass(frozen=True)
class DriveSpec:
    """Rectangular pulse or phase-switched train; amplitude defaults to
    the cavity loss rate when left null."""

    kind: str
    amplitude_mhz: float | None
    duration_ns: float | None
    tau_ns: float | None
    n_pulses: int | None

    @staticmethod
    def from_mapping(mapping) -> "DriveSpec":
        _reject_unknown(
            mapping,
            ("kind", "amplitude_mhz", "duration_ns", "tau_ns", "n_pulses"),
            "drive",
        )
        kind = mapping.get("kind", "rect")
        if kind not in ("rect", "train"):
            raise ConfigError(f"drive.kind must be rect|train, got {kind!r}")
        n_pulses = mapping.get("n_pulses")
        if n_pulses is not None:
            if isinstance(n_pulses, bool) or not isinstance(n_pulses, int):
                raise ConfigError(f"drive.n_pulses must be an integer, got {n_pulses!r}")
            if n_pulses < 1:
                raise ConfigError(f"drive.n_pulses must be >= 1, got {n_pulses}")
        return DriveSpec(
            kind=kind,
            amplitude_mhz=_opt_float(mapping, "amplitude_mhz", "drive"),
            duration_ns=_opt_float(mapping, "duration_ns", "drive"),
            tau_ns=_opt_float(mapping, "tau_ns", "drive"),
            n_pulses=n_pulses,
        )

    def amplitude(self, params: SystemParams) -> float:
        if self.amplitude_mhz is None:
            return params.kappa
        return mhz_to_angular(self.amplitude_mhz)


@dataclass(frozen=True)
class GridSpec:
    dt_ns: float = 0.05
    t_end_ns: float | None = None

    @staticmethod
    def from_mapping(mapping) -> "GridSpec":
        _reject_unknown(mapping, ("dt_ns", "t_end_ns"), "grid")
        dt = _opt_float(mapping, "dt_ns", "grid", 0.05)
        if dt <= 0:
            raise ConfigError(f"grid.dt_ns must be positive, got {dt}")
        t_end = _opt_float(mapping, "t_end_ns", "grid")
        if t_end is not None and t_end <= dt:
            raise ConfigError(f"grid.t_end_ns must exceed dt_ns, got {t_end}")
        return GridSpec(dt_ns=dt, t_end_ns=t_end)


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple[float, ...]

    @staticmethod
    def from_mapping(mapping) -> "SweepSpec":
        _reject_unknown(mapping, ("parameter", "values"), "sweep axis")
        parameter = mapping.get("parameter")
        if parameter not in SWEEPABLE:
            raise ConfigError(
                f"sweep parameter must be one of {SWEEPABLE}, got {parameter!r}"
            )
        values = mapping.get("values")
        if not isinstance(values, (list, tuple)) or len(values) == 0:
            raise ConfigError(f"sweep values for {parameter} must be a non-empty list")
        return SweepSpec(
            parameter=parameter,
            values=tuple(_as_float(v, f"sweep value of {parameter}") for v in values),
        )


@dataclass(frozen=True)
class CompareSpec:
    """Derived-constant knobs for the comparison columns.

    ``twin_rabi_mhz`` and ``twin_coupling_mhz`` pin the fitted Lorentzian
    used by train-compare: the fit matches that oscillation period and
    the steady-state amplitude of the configured density at the reference
    coupling. ``formula_delta_mhz`` is the half-width the gamma-sweep
    closed-form column assumes.
    """

    twin_rabi_mhz: float = 19.2
    twin_coupling_mhz: float = 8.56
    formula_delta_mhz: float = 4.4

    @staticmethod
    def from_mapping(mapping) -> "CompareSpec":
        _reject_unknown(
            mapping,
            ("twin_rabi_mhz", "twin_coupling_mhz", "formula_delta_mhz"),
            "compare",
        )
        return CompareSpec(
            twin_rabi_mhz=_opt_float(mapping, "twin_rabi_mhz", "compare", 19.2),
            twin_coupling_mhz=_opt_float(mapping, "twin_coupling_mhz", "compare", 8.56),
            formula_delta_mhz=_opt_float(mapping, "formula_delta_mhz", "compare", 4.4),
        )


@dataclass(frozen=True)
class ScenarioConfig:
    """One runnable scenario: system, line shape, drive, grid, sweep axes.

    ``from_mapping`` applies defaults eagerly, so emit -> parse -> emit is
    the identity and two configs are interchangeable iff they are equal.
    """

    scenario: str
    system: SystemSpec
    density: DensitySpec
    drive: DriveSpec
    grid: GridSpec
    sweep: tuple[SweepSpec, ...] = ()
    compare: CompareSpec = CompareSpec()
    output: str | None = None
    workers: int | None = None

    @staticmethod
    def from_mapping(mapping) -> "ScenarioConfig":
        if not isinstance(mapping, dict):
            raise ConfigError(f"config must be a JSON object, got {type(mapping).__name__}")
        _reject_unknown(
            mapping,
            ("scenario", "system", "density", "drive", "grid", "sweep",
             "compare", "output", "workers"),
            "config",
        )
        scenario = mapping.get("scenario")
        if scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}, got {scenario!r}")
        system = SystemSpec.from_mapping(mapping.get("system") or {})
        sweep_raw = mapping.get("sweep") or []
        if not isinstance(sweep_raw, (list, tuple)):
            raise ConfigError("sweep must be a list of axes")
        workers = mapping.get("workers")
        if workers is not None:
            if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
                raise ConfigError(f"workers must be a positive integer, got {workers!r}")
        output = mapping.get("output")
        if output is not None and not isinstance(output, str):
            raise ConfigError(f"output must be a path string, got {output!r}")
        config = ScenarioConfig(
            scenario=scenario,
            system=system,
            density=DensitySpec.from_mapping(mapping.get("density") or {}, system),
            drive=DriveSpec.from_mapping(mapping.get("drive") or {}),
            grid=GridSpec.from_mapping(mapping.get("grid") or {}),
            sweep=tuple(SweepSpec.from_mapping(ax) for ax in sweep_raw),
            compare=CompareSpec.from_mapping(mapping.get("compare") or {}),
            output=output,
            workers=workers,
        )
        # Constructor-validate the base point and every sweep point now,
        # so bad physics parameters fail at parse time (exit code 1)
        # rather than mid-run.
        for assignment in iter_assignments(config):
            point = apply_assignment(config, assignment)
            point.system.to_params()
            point.density.build()
        return config

    def to_mapping(self) -> dict:
        out = asdict(self)
        out["sweep"] = [asdict(ax) | {"values": list(ax.values)} for ax in self.sweep]
        return out


def config_hash(config: ScenarioConfig) -> str:
    payload = json.dumps(config.to_mapping(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


def iter_assignments(config: ScenarioConfig) -> list[tuple[tuple[str, float], ...]]:
    """Cartesian product of the sweep axes, in document order (last axis
    fastest); a sweep-free config yields one empty assignment."""
    if not config.sweep:
        return [()]
    axes = [[(ax.parameter, v) for v in ax.values] for ax in config.sweep]
    return [tuple(combo) for combo in itertools.product(*axes)]


def apply_assignment(config: ScenarioConfig,
                     assignment: tuple[tuple[str, float], ...]) -> ScenarioConfig:
    cfg = config
    for name, value in assignment:
        if name == "coupling_mhz":
            cfg = replace(cfg, system=replace(cfg.system, coupling_mhz=value))
        elif name == "probe_offset_mhz":
            probe = cfg.system.cavity_ghz + value * 1e-3
            cfg = replace(cfg, system=replace(cfg.system, probe_ghz=probe))
        elif name == "tau_ns":
            cfg = replace(cfg, drive=replace(cfg.drive, tau_ns=value))
        else:
            raise ConfigError(f"unknown sweep parameter {name!r}")
    return cfg


def snap_to_grid(duration: float, dt: float) -> float:
    """Nearest positive grid multiple of dt; the solver requires drive
    segments commensurate with the step."""
    if not duration > 0:
        raise ConfigError(f"duration must be positive, got {duration}")
    return max(1, round(duration / dt)) * dt


# ---------------------------------------------------------------------------
# result table


@dataclass(frozen=True, eq=False)
class ResultTable:
    """Rectangular all-finite numeric table with provenance metadata."""

    columns: tuple[str, ...]
    rows: np.ndarray
    provenance: dict

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim != 2:
            raise ValueError(f"rows must be 2-D, got shape {rows.shape}")
        if rows.shape[1] != len(self.columns):
            raise ValueError(
                f"{len(self.columns)} columns declared but rows have "
                f"{rows.shape[1]} fields"
            )
        if not np.all(np.isfinite(rows)):
            raise ValueError("table contains non-finite values")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "columns", tuple(self.columns))

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    def column(self, name: str) -> np.ndarray:
        try:
            return self.rows[:, self.columns.index(name)]
        except ValueError:
            raise KeyError(f"no column {name!r}; have {self.columns}") from None

    def write_csv(self, path) -> None:
        # repr() is the shortest digit string that round-trips the float,
        # which is what makes byte-level determinism checks meaningful.
        with open(path, "w", newline="\n") as fh:
            fh.write(",".join(self.columns) + "\n")
            for row in self.rows:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _versions() -> dict:
    return {
        "cavityspin": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def _finish(config, columns, blocks, derived, diagnostics) -> ResultTable:
    rows = np.vstack(blocks) if len(blocks) > 1 else np.asarray(blocks[0], dtype=float)
    provenance = {
        "config_hash": config_hash(config),
        "versions": _versions(),
        "derived": derived,
        "diagnostics": diagnostics,
    }
    return ResultTable(columns=tuple(columns), rows=rows, provenance=provenance)


def _json_default(obj):
    # Diagnostics dicts are assembled from numeric code and routinely
    # carry numpy scalars; np.float64 already subclasses float but
    # np.bool_ and the integer types do not subclass their builtins.
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def write_outputs(table: ResultTable, config: ScenarioConfig, base_path,
                  timings: dict | None = None) -> tuple[str, str]:
    """Write <base>.csv and <base>.manifest.json; returns both paths.

    ``timings`` is informational and must be ignored by any equality
    check between manifests.
    """
    base = os.fspath(base_path)
    directory = os.path.dirname(base)
    if directory:
        os.makedirs(directory, exist_ok=True)
    csv_path = base + ".csv"
    manifest_path = base + ".manifest.json"
    table.write_csv(csv_path)
    manifest = {
        "config": config.to_mapping(),
        "config_hash": table.provenance["config_hash"],
        "versions": table.provenance["versions"],
        "derived": table.provenance["derived"],
        "diagnostics": table.provenance["diagnostics"],
        "columns": list(table.columns),
        "n_rows": table.n_rows,
        "timings": timings or {},
    }
    with open(manifest_path, "w", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True,
                  default=_json_default)
        fh.write("\n")
    return csv_path, manifest_path


# ---------------------------------------------------------------------------
# point execution (one sweep point per task, ordered assembly)


def _worker_count(config: ScenarioConfig, n_tasks: int) -> int:
    limit = config.workers if config.workers is not None else (os.cpu_count() or 1)
    cap = os.environ.get(WORKER_ENV)
    if cap is not None:
        try:
            cap_value = int(cap)
        except ValueError:
            raise ConfigError(f"{WORKER_ENV} must be an integer, got {cap!r}") from None
        if cap_value < 1:
            raise ConfigError(f"{WORKER_ENV} must be >= 1, got {cap_value}")
        limit = min(limit, cap_value)
    return max(1, min(limit, n_tasks))


def _eval_point(task):
    scenario, config, assignment, extra = task
    return _POINT_RUNNERS[scenario](config, assignment, extra)


def _map_points(scenario, config, assignments, extras=None):
    if extras is None:
        extras = [{} for _ in assignments]
    tasks = [(scenario, config, a, e) for a, e in zip(assignments, extras)]
    workers = _worker_count(config, len(tasks))
    if workers <= 1:
        return [_eval_point(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_eval_point, tasks))


def _build_point(config):
    params = config.system.to_params()
    density = config.density.build()
    eta = config.drive.amplitude(params)
    return params, density, eta


def _time_grid(config, t_end) -> TimeGrid:
    dt = config.grid.dt_ns
    return TimeGrid(0.0, dt, int(round(t_end / dt)) + 1)


def _prefix_columns(assignment, n, tau_snapped=None):
    cols = []
    for name, value in assignment:
        if name == "tau_ns" and tau_snapped is not None:
            value = tau_snapped
        cols.append(np.full(n, value))
    return cols


# --- long-pulse ---


def _long_pulse_point(config, assignment, extra):
    cfg = apply_assignment(config, assignment)
    params, density, eta = _build_point(cfg)
    if cfg.drive.kind != "rect":
        raise ConfigError("long-pulse drives a single rectangular pulse")
    if cfg.drive.duration_ns is None:
        raise ConfigError("long-pulse needs drive.duration_ns")
    if cfg.grid.t_end_ns is None:
        raise ConfigError("long-pulse needs grid.t_end_ns")
    duration = snap_to_grid(cfg.drive.duration_ns, cfg.grid.dt_ns)
    tgrid = _time_grid(cfg, cfg.grid.t_end_ns)
    a = volterra.solve(params, density, rect_pulse(eta, duration), tgrid)
    j = volterra.collective_spin(params, density, a)
    rows = np.column_stack([
        *_prefix_columns(assignment, tgrid.n_steps),
        tgrid.times(),
        a.abs2(),
        j.values.real ** 2,
        j.values.imag ** 2,
    ])
    diag = {
        "assignment": dict(assignment),
        "duration_ns": {"requested": cfg.drive.duration_ns, "snapped": duration},
    }
    return rows, diag


def run_long_pulse(config: ScenarioConfig) -> ResultTable:
    """Drive with one rectangular pulse and record the cavity intensity
    and both collective-spin quadratures over the full grid (drive plus
    free-decay tail). Sweep axes prepend one column each."""
    assignments = iter_assignments(config)
    results = _map_points(LONG_PULSE, config, assignments)
    columns = [name for name, _ in assignments[0]] + ["t_ns", "abs_A2", "Jx2", "Jy2"]
    derived = _common_derived(config)
    derived["duration_ns"] = results[0][1]["duration_ns"]
    return _finish(config, columns, [r[0] for r in results], derived,
                   [r[1] for r in results])


# --- train-map ---


def _train_point(config, assignment, extra):
    cfg = apply_assignment(config, assignment)
    params, density, eta = _build_point(cfg)
    if cfg.drive.tau_ns is None or cfg.drive.n_pulses is None:
        raise ConfigError("train scenarios need drive.tau_ns and drive.n_pulses")
    dt = cfg.grid.dt_ns
    tau = snap_to_grid(cfg.drive.tau_ns, dt)
    n_pulses = cfg.drive.n_pulses
    steps_per_tau = int(round(tau / dt))
    tgrid = TimeGrid(0.0, dt, n_pulses * steps_per_tau + 1)
    protocol = phase_switched_train(eta, tau, n_pulses)
    a = volterra.solve(params, density, protocol, tgrid)
    rows = np.column_stack([
        *_prefix_columns(assignment, tgrid.n_steps, tau_snapped=tau),
        tgrid.times(),
        a.abs2(),
    ])
    diag = {
        "assignment": dict(assignment),
        "tau_ns": {"requested": cfg.drive.tau_ns, "snapped": tau},
    }
    return rows, diag


def run_pulse_train_map(config: ScenarioConfig) -> ResultTable:
    """Phase-switched pulse train for every tau on the sweep axis,
    long-format (tau, t, intensity). The tau column carries the snapped
    value; requested/snapped pairs land in the manifest."""
    if not any(ax.parameter == "tau_ns" for ax in config.sweep):
        raise ConfigError("train-map needs a tau_ns sweep axis")
    assignments = iter_assignments(config)
    results = _map_points(TRAIN_MAP, config, assignments)
    columns = [name for name, _ in assignments[0]] + ["t_ns", "abs_A2"]
    derived = _common_derived(config)
    derived["tau_pairs_ns"] = [r[1]["tau_ns"] for r in results]
    return _finish(config, columns, [r[0] for r in results], derived,
                   [r[1] for r in results])


# --- gamma-sweep ---


def _free_decay_rate(params, density, dt):
    """Timefit rate from the single-photon free decay.

    The trace is marched in the time domain (a(0) = 1, drive off); the
    stepping recurrence stays stable at every coupling, including near
    the coupling where the isolated resonances appear and the contour
    reconstruction needs a much finer cut grid than the default. The
    window starts at the weak-coupling lifetime estimate and grows until
    the intensity envelope has dropped three decades (the fit needs
    dynamic range; protected strong-coupling decay is far slower than
    the weak-coupling estimate suggests).
    """
    markov = laplace.gamma_markov(params, density).gamma
    t_max = max(5.0 / markov, 64 * dt)
    extensions = 0
    while True:
        n_steps = int(round(t_max / dt)) + 1
        tgrid = TimeGrid(0.0, dt, n_steps)
        protocol = rect_pulse(0.0, tgrid.t_end)
        series = volterra.solve(params, density, protocol, tgrid, a0=1.0)
        a2 = series.abs2()
        tail = a2[-max(1, len(a2) // 10):].max()
        floor_reached = tail <= _ENVELOPE_DROP * a2[0]
        if floor_reached or t_max >= _T_MAX_CAP:
            break
        t_max *= _T_GROWTH
        extensions += 1
    estimate = laplace.decay_rate_timefit(series)
    diag = {
        "t_max_ns": t_max,
        "extensions": extensions,
        "envelope_floor_reached": floor_reached,
        "fit_note": estimate.note,
    }
    return estimate.gamma, diag


def _gamma_point(config, assignment, extra):
    cfg = apply_assignment(config, assignment)
    params, density, _ = _build_point(cfg)
    markov = laplace.gamma_markov(params, density).gamma
    asymptotic = laplace.gamma_asymptotic(params, density).gamma
    formula_delta = mhz_to_angular(cfg.compare.formula_delta_mhz)
    # Two-branch estimators list the slow (long-time dominant) branch
    # first; the sweep column reports that one.
    lor = laplace.gamma_lorentz_formula(params.Omega, formula_delta, params.kappa)[0].gamma
    nob = laplace.gamma_no_broadening(params.Omega, params.kappa)[0].gamma
    timefit, diag = _free_decay_rate(params, density, cfg.grid.dt_ns)
    diag["assignment"] = dict(assignment)
    row = np.array([[
        cfg.system.coupling_mhz,
        angular_to_mhz(timefit),
        angular_to_mhz(markov),
        angular_to_mhz(asymptotic),
        angular_to_mhz(lor),
        angular_to_mhz(nob),
    ]])
    return row, diag


def run_gamma_sweep(config: ScenarioConfig) -> ResultTable:
    """Intensity decay rate of the single-photon free decay versus
    coupling, next to the four closed-form estimates. All rate columns
    are divided by 2*pi and reported in MHz (plot units)."""
    if len(config.sweep) != 1 or config.sweep[0].parameter != "coupling_mhz":
        raise ConfigError("gamma-sweep needs exactly one coupling_mhz sweep axis")
    assignments = iter_assignments(config)
    results = _map_points(GAMMA_SWEEP, config, assignments)
    columns = ["Omega_mhz", "Gamma_timefit_mhz", "Gamma_markov_mhz",
               "Gamma_asymptotic_mhz", "Gamma_lorentz_mhz",
               "Gamma_nobroadening_mhz"]
    derived = _common_derived(config)
    derived["formula_delta_mhz"] = config.compare.formula_delta_mhz
    derived["rate_units"] = "MHz (Gamma / 2 pi), intensity rates"
    return _finish(config, columns, [r[0] for r in results], derived,
                   [r[1] for r in results])


# --- train-compare ---


def fitted_twin(config: ScenarioConfig):
    """Lorentzian (coupling, half-width) matched to the configured density.

    The fit pins the oscillation period to compare.twin_rabi_mhz and the
    driven steady-state amplitude to the configured density's at the
    reference coupling, following the matching recipe used for the
    side-by-side comparisons.
    """
    params, density, eta = _build_point(config)
    ref = replace(params, Omega=mhz_to_angular(config.compare.twin_coupling_mhz))
    a_st, _ = volterra.steady_state(ref, density, eta=eta)
    return lorentz.equivalent_lorentzian(
        mhz_to_angular(config.compare.twin_rabi_mhz), abs(a_st), params.kappa, eta
    )


def _compare_point(config, assignment, extra):
    params, density, eta = _build_point(config)
    if extra["trace"] == "twin":
        density = LorentzianDensity(params.omega_s, extra["twin_delta"])
    dt = config.grid.dt_ns
    tau = snap_to_grid(config.drive.tau_ns, dt)
    steps_per_tau = int(round(tau / dt))
    tgrid = TimeGrid(0.0, dt, config.drive.n_pulses * steps_per_tau + 1)
    protocol = phase_switched_train(eta, tau, config.drive.n_pulses)
    a = volterra.solve(params, density, protocol, tgrid)
    rows = np.column_stack([tgrid.times(), a.abs2()])
    return rows, {"trace": extra["trace"], "tau_ns":
                  {"requested": config.drive.tau_ns, "snapped": tau}}


def run_train_compare(config: ScenarioConfig) -> ResultTable:
    """Identical pulse train through the configured density and through
    its fitted Lorentzian twin, side by side on one time column."""
    if config.sweep:
        raise ConfigError("train-compare takes no sweep axes")
    if config.drive.tau_ns is None or config.drive.n_pulses is None:
        raise ConfigError("train-compare needs drive.tau_ns and drive.n_pulses")
    if config.density.kind == "lorentz":
        raise ConfigError("train-compare compares a non-Lorentzian density "
                          "against its fitted Lorentzian twin")
    twin_omega, twin_delta = fitted_twin(config)
    extras = [{"trace": "main"}, {"trace": "twin", "twin_delta": twin_delta}]
    results = _map_points(TRAIN_COMPARE, config, [(), ()], extras)
    (main_rows, main_diag), (twin_rows, _) = results
    rows = np.column_stack([main_rows[:, 0], main_rows[:, 1], twin_rows[:, 1]])
    columns = ["t_ns", "abs_A2_main", "abs_A2_twin"]
    derived = _common_derived(config)
    derived["twin_coupling_mhz"] = angular_to_mhz(twin_omega)
    derived["twin_half_width_mhz"] = angular_to_mhz(twin_delta)
    derived["twin_reference_coupling_mhz"] = config.compare.twin_coupling_mhz
    derived["twin_rabi_mhz"] = config.compare.twin_rabi_mhz
    derived["tau_pairs_ns"] = [main_diag["tau_ns"]]
    return _finish(config, columns, [rows], derived, [r[1] for r in results])


# --- max-scan ---


def _max_scan_point(config, assignment, extra):
    cfg = apply_assignment(config, assignment)
    params, density, eta = _build_point(cfg)
    dt = cfg.grid.dt_ns
    tau = snap_to_grid(cfg.drive.tau_ns, dt)
    steps_per_tau = int(round(tau / dt))
    tgrid = TimeGrid(0.0, dt, cfg.drive.n_pulses * steps_per_tau + 1)
    protocol = phase_switched_train(eta, tau, cfg.drive.n_pulses)
    a = volterra.solve(params, density, protocol, tgrid)
    a2 = a.abs2()
    settled = a2[int(len(a2) * (1.0 - _SETTLED_FRACTION)):]
    detuning = dict(assignment).get(
        "probe_offset_mhz",
        (cfg.system.probe_ghz - cfg.system.cavity_ghz) * 1e3,
    )
    row = np.array([[math.pi / tau, detuning, settled.max()]])
    return row, {"assignment": dict(assignment),
                 "tau_ns": {"requested": cfg.drive.tau_ns, "snapped": tau}}


def run_max_amplitude_scan(config: ScenarioConfig) -> ResultTable:
    """Settled oscillation maximum of a long train over a (detuning, tau)
    product scan; the first column is pi/tau in rad/ns so the resonance
    condition reads pi/tau = half the oscillation frequency."""
    if not any(ax.parameter == "tau_ns" for ax in config.sweep):
        raise ConfigError("max-scan needs a tau_ns sweep axis")
    for ax in config.sweep:
        if ax.parameter == "coupling_mhz":
            raise ConfigError("max-scan sweeps tau_ns and probe_offset_mhz only")
    if config.drive.n_pulses is None:
        raise ConfigError("max-scan needs drive.n_pulses")
    assignments = iter_assignments(config)
    results = _map_points(MAX_SCAN, config, assignments)
    columns = ["pi_over_tau_rad_ns", "detuning_mhz", "max_abs_A2"]
    derived = _common_derived(config)
    derived["settled_fraction"] = _SETTLED_FRACTION
    derived["tau_pairs_ns"] = [r[1]["tau_ns"] for r in results]
    return _finish(config, columns, [r[0] for r in results], derived,
                   [r[1] for r in results])


# --- lorentz-analytic ---


def run_lorentz_analytic(config: ScenarioConfig) -> ResultTable:
    """Closed-form rectangular-pulse response of the Lorentzian model.

    The post-pulse branch assumes the drive phase has settled, so the
    configured duration should exceed a few multiples of
    1/(half-width + kappa).
    """
    if config.sweep:
        raise ConfigError("lorentz-analytic takes no sweep axes")
    if config.density.kind != "lorentz":
        raise ConfigError("lorentz-analytic needs density.kind == 'lorentz'")
    if config.drive.kind != "rect" or config.drive.duration_ns is None:
        raise ConfigError("lorentz-analytic needs a rect drive with duration_ns")
    if config.grid.t_end_ns is None:
        raise ConfigError("lorentz-analytic needs grid.t_end_ns")
    params, _, eta = _build_point(config)
    duration = snap_to_grid(config.drive.duration_ns, config.grid.dt_ns)
    p = lorentz.LorentzParams(
        Omega=params.Omega,
        Delta=mhz_to_angular(config.density.fwhm_mhz) / 2.0,
        kappa=params.kappa,
        eta=eta,
        tau_d=duration,
    )
    tgrid = _time_grid(config, config.grid.t_end_ns)
    t = tgrid.times()
    on = t <= duration
    a = np.where(on, lorentz.cavity_on(p, t), lorentz.cavity_off(p, t))
    jx = np.where(on, lorentz.spin_on(p, t), lorentz.spin_off(p, t))
    rows = np.column_stack([t, a**2, jx**2, np.zeros_like(t)])
    derived = _common_derived(config)
    derived["duration_ns"] = {"requested": config.drive.duration_ns,
                              "snapped": duration}
    return _finish(config, ["t_ns", "abs_A2", "Jx2", "Jy2"], [rows], derived, [])


_POINT_RUNNERS = {
    LONG_PULSE: _long_pulse_point,
    TRAIN_MAP: _train_point,
    GAMMA_SWEEP: _gamma_point,
    TRAIN_COMPARE: _compare_point,
    MAX_SCAN: _max_scan_point,
}

RUNNERS = {
    LONG_PULSE: run_long_pulse,
    TRAIN_MAP: run_pulse_train_map,
    GAMMA_SWEEP: run_gamma_sweep,
    TRAIN_COMPARE: run_train_compare,
    MAX_SCAN: run_max_amplitude_scan,
    LORENTZ_ANALYTIC: run_lorentz_analytic,
}


def run_scenario(config: ScenarioConfig) -> ResultTable:
    return RUNNERS[config.scenario](config)


def _common_derived(config: ScenarioConfig) -> dict:
    params = config.system.to_params()
    density = config.density.build()
    derived = {
        "two_omega_mhz": 2.0 * config.system.coupling_mhz,
        "eta_rad_ns": config.drive.amplitude(params),
        "dt_ns": config.grid.dt_ns,
    }
    if isinstance(density, (QGaussianDensity, LorentzianDensity)):
        derived["density_width_rad_ns"] = density.delta
        derived["density_width_mhz"] = angular_to_mhz(density.delta)
    return derived


# ---------------------------------------------------------------------------
# fast invariant suite (the CLI's validate subcommand)


def run_validation() -> list[tuple[str, bool, str]]:
    """Cheap end-to-end invariants; the whole list runs in well under a
    minute. Returns (name, passed, detail) triples."""
    from .spectral import normalize

    checks: list[tuple[str, bool, str]] = []
    omega_c = ghz_to_angular(2.6915)
    kappa = mhz_to_angular(0.8)
    params = SystemParams(omega_c=omega_c, omega_s=omega_c, omega_p=omega_c,
                          kappa=kappa, Omega=mhz_to_angular(8.56))
    density = QGaussianDensity(omega_c, 1.39,
                               delta_from_fwhm(1.39, mhz_to_angular(9.4)))

    try:
        norm = normalize(density)
        checks.append(("density normalization (quadrature + tail)", True,
                       f"norm constant {norm:.6f}"))
    except ValueError as exc:
        checks.append(("density normalization (quadrature + tail)", False, str(exc)))

    tgrid = TimeGrid(0.0, 0.1, 1001)
    protocol = rect_pulse(kappa, 60.0)
    a1 = volterra.solve(params, density, protocol, tgrid)
    a2 = volterra.solve(params, density, rect_pulse(2.0 * kappa, 60.0), tgrid)
    lin = np.max(np.abs(2.0 * a1.values - a2.values)) / np.max(np.abs(a2.values))
    checks.append(("drive linearity", lin < 1e-12, f"relative defect {lin:.2e}"))

    direct = volterra.solve_direct(params, density, protocol, tgrid)
    rec = np.max(np.abs(a1.values - direct.values)) / np.max(np.abs(direct.values))
    checks.append(("segmented recurrence vs direct quadrature",
                   rec < 1e-6, f"relative L-inf {rec:.2e}"))

    j = volterra.collective_spin(params, density, a1)
    jy = np.max(np.abs(j.values.imag)) / max(np.max(np.abs(j.values)), 1e-300)
    checks.append(("resonant spin quadrature J_y ~ 0",
                   jy < 1e-8, f"relative J_y {jy:.2e}"))

    closure = laplace.invert(params, density, TimeGrid(0.0, 0.05, 2)).values[0]
    err = abs(closure - 1.0)
    checks.append(("single-photon weight closure at t = 0",
                   err < 1e-3, f"|A(0) - 1| = {err:.2e}"))

    lp = lorentz.LorentzParams(Omega=mhz_to_angular(9.786),
                               Delta=mhz_to_angular(4.598),
                               kappa=kappa, eta=kappa, tau_d=300.0)
    ldensity = LorentzianDensity(omega_c, lp.Delta)
    lgrid = TimeGrid(0.0, 0.1, 1501)
    lnum = volterra.solve(replace(params, Omega=lp.Omega), ldensity,
                          rect_pulse(kappa, 300.0), lgrid)
    closed = lorentz.cavity_on(lp, lgrid.times())
    lerr = np.max(np.abs(lnum.values - closed)) / np.max(np.abs(closed))
    checks.append(("closed-form Lorentzian vs solver",
                   lerr < 1e-3, f"relative L-inf {lerr:.2e}"))

    return checks
