"""Parameter sweeps: config parsing, orchestration, results and manifests.

A sweep varies one laser parameter over a grid and, per point, runs the
cooling ensemble, fits the temperature relaxation per axis, measures
spatial diffusion and friction (Einstein and, optionally, drift
method), and appends one results row per (point, axis).

Sweep modes
-----------
fixed-detuning     : values are per-beam intensities I_L/I_sat; both
                     Gamma0' and Delta0' scale with I_L at fixed Delta.
fixed-light-shift  : values are pump rates Gamma0' at fixed Delta0'
                     (the detuning varies along the grid).
fixed-pump-rate    : values are light shifts Delta0' at fixed Gamma0'.

Outputs under the chosen directory: `results.csv` (one row per point
and axis), `points/point_NNN_series.csv` (plot-ready time series), and
`manifest.json`.  Every CSV embeds the manifest content hash, and the
manifest alone is sufficient to reproduce every result file
byte-for-byte (`replay`).
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import __version__, observables
from .dynamics import AXES, InitialDistribution, SimulationSchedule, dump_trajectories, ensemble_run
from .errors import AnalysisError, ConfigError, SimulationError, SisycoolError
from .lattice import LatticeParams
from .rir import ProbeGeometry, fit_rir, rir_spectrum
from .units import UnitSystem

SCHEMA_VERSION = 1
MODES = ("fixed-detuning", "fixed-light-shift", "fixed-pump-rate")
FRICTION_METHODS = ("none", "einstein", "drift", "both")
DUMP_FORMATS = ("none", "csv", "binary")

RESULT_COLUMNS = (
    "point", "sweep_value", "axis",
    "pump_rate_per_beam", "light_shift_per_beam", "detuning",
    "T_initial", "T_final", "T_final_err",
    "gamma_T", "gamma_T_err", "relaxation_r2", "relaxation_degenerate",
    "D_s", "D_s_err", "diffusion_r2",
    "alpha_drift", "alpha_drift_err", "alpha_einstein", "alpha_einstein_err",
    "trapped_fraction_final", "steady_p_value", "T_rir", "T_rir_err",
)
PHYSICAL_COLUMNS = ("T_final_uK", "gamma_T_kHz", "D_s_cm2_per_s", "alpha_over_m_kHz")

_DEFAULTS = {
    "seed": 0,
    "threads": 1,
    "lattice": {
        "theta_deg": 30.0,
        "gamma": 100.0,
        "detuning": None,
        "light_shift_per_beam": None,
        "pump_rate_per_beam": None,
    },
    "schedule": {
        "dt": None,
        "t_max": 250.0,
        "n_samples": 121,
        "n_traj": 5000,
        "elastic_scattering": False,
    },
    "init": {
        "temperature": 50.0,
        "position_law": "uniform-cell",
    },
    "sweep": {
        "mode": None,
        "values": None,
    },
    "friction": {
        "method": "einstein",
        "forces": None,
        "n_traj": 1000,
        "t_max": None,
        "n_samples": 41,
        "settle_fraction": 0.5,
    },
    "rir": {
        "enabled": False,
        "half_angle_deg": 12.5,
        "axis": "x",
        "delta_max": None,
        "n_deltas": 201,
    },
    "output": {
        "trajectory_dump": "none",
    },
    "units": None,
}


def _merge_defaults(user: dict, defaults: dict, path: str, diags: list) -> dict:
    out = {}
    for key, dval in defaults.items():
        kpath = f"{path}.{key}" if path else key
        if key in user:
            uval = user[key]
            if isinstance(dval, dict) and dval and not isinstance(uval, dict):
                diags.append((kpath, f"expected a mapping, got {type(uval).__name__}"))
                out[key] = dict(dval)
            elif isinstance(dval, dict) and dval:
                out[key] = _merge_defaults(uval, dval, kpath, diags)
            else:
                out[key] = uval
        else:
            out[key] = dict(dval) if isinstance(dval, dict) else dval
    for key in user:
        if key not in defaults:
            diags.append((f"{path}.{key}" if path else key, "unknown key"))
    return out


def _number(cfg, key_path, diags, *, required=False, allow_none=True,
            positive=False, negative=False, nonneg=False, integer=False):
    keys = key_path.split(".")
    node = cfg
    for k in keys[:-1]:
        node = node[k]
    val = node[keys[-1]]
    if val is None:
        if required:
            diags.append((key_path, "required value is missing"))
        return None
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        diags.append((key_path, f"expected a number, got {val!r}"))
        return None
    val = float(val)
    if not np.isfinite(val):
        diags.append((key_path, f"must be finite, got {val!r}"))
        return None
    if positive and not val > 0:
        diags.append((key_path, f"must be > 0, got {val!r}"))
        return None
    if negative and not val < 0:
        diags.append((key_path, f"must be < 0, got {val!r}"))
        return None
    if nonneg and val < 0:
        diags.append((key_path, f"must be >= 0, got {val!r}"))
        return None
    if integer:
        if val != int(val):
            diags.append((key_path, f"expected an integer, got {val!r}"))
            return None
        return int(val)
    return val


@dataclass(frozen=True)
class SweepSpec:
    """Fully resolved sweep configuration (all defaults filled)."""

    resolved: dict

    @property
    def mode(self) -> str:
        return self.resolved["sweep"]["mode"]

    @property
    def values(self) -> tuple:
        return tuple(self.resolved["sweep"]["values"])

    @property
    def seed(self) -> int:
        return self.resolved["seed"]

    @property
    def threads(self) -> int:
        return self.resolved["threads"]

    @property
    def theta(self) -> float:
        return float(np.deg2rad(self.resolved["lattice"]["theta_deg"]))

    def params_for(self, value: float) -> LatticeParams:
        lat = self.resolved["lattice"]
        if self.mode == "fixed-detuning":
            return LatticeParams.from_intensity(
                theta=self.theta, gamma=lat["gamma"], detuning=lat["detuning"],
                intensity=value)
        if self.mode == "fixed-light-shift":
            return LatticeParams.create(
                theta=self.theta, gamma=lat["gamma"],
                light_shift_per_beam=lat["light_shift_per_beam"],
                pump_rate_per_beam=value)
        return LatticeParams.create(
            theta=self.theta, gamma=lat["gamma"],
            light_shift_per_beam=value,
            pump_rate_per_beam=lat["pump_rate_per_beam"])

    def unit_system(self) -> UnitSystem | None:
        blk = self.resolved.get("units")
        if not blk:
            return None
        return UnitSystem.from_config(blk["wavelength_nm"], blk["mass_amu"])

    def hash_core(self) -> dict:
        """The reproducible core: resolved config minus execution details."""
        core = json.loads(json.dumps(self.resolved))
        core.pop("threads", None)
        return {
            "schema_version": SCHEMA_VERSION,
            "package_version": __version__,
            "config": core,
        }

    def content_hash(self) -> str:
        blob = json.dumps(self.hash_core(), sort_keys=True, separators=(",", ":"))
        return "sha256:" + hashlib.sha256(blob.encode()).hexdigest()


def validate_config(source, *, seed=None, threads=None) -> SweepSpec:
    """Parse and validate a YAML config, filling every default.

    `source` is YAML text, a path, or an already-parsed mapping.
    Raises ConfigError carrying (key path, message) diagnostics for
    every problem found; otherwise returns the resolved SweepSpec.
    `seed` and `threads` override the config values (CLI flags).
    """
    if isinstance(source, dict):
        raw = source
    else:
        text = source
        p = Path(str(source))
        if "\n" not in str(source) and p.exists():
            text = p.read_text()
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            loc = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
            raise ConfigError([("", f"YAML syntax error{loc}: {getattr(exc, 'problem', exc)}")])
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError([("", f"top level must be a mapping, got {type(raw).__name__}")])

    diags: list = []
    cfg = _merge_defaults(raw, _DEFAULTS, "", diags)
    if seed is not None:
        cfg["seed"] = seed
    if threads is not None:
        cfg["threads"] = threads

    cfg["seed"] = _number(cfg, "seed", diags, required=True, nonneg=True, integer=True)
    cfg["threads"] = _number(cfg, "threads", diags, required=True, positive=True, integer=True)

    theta_deg = _number(cfg, "lattice.theta_deg", diags, required=True)
    if theta_deg is not None and not (0.0 < theta_deg < 90.0):
        diags.append(("lattice.theta_deg", f"must lie strictly between 0 and 90 degrees, got {theta_deg}"))
    _number(cfg, "lattice.gamma", diags, required=True, positive=True)
    detuning = _number(cfg, "lattice.detuning", diags)
    if detuning is not None and detuning >= 0:
        diags.append(("lattice.detuning", f"red-detuning convention requires detuning < 0, got {detuning}"))
    light_shift = _number(cfg, "lattice.light_shift_per_beam", diags)
    if light_shift is not None and light_shift >= 0:
        diags.append(("lattice.light_shift_per_beam", f"must be < 0 for a red-detuned lattice, got {light_shift}"))
    _number(cfg, "lattice.pump_rate_per_beam", diags)

    dt = _number(cfg, "schedule.dt", diags, positive=True)
    _number(cfg, "schedule.t_max", diags, required=True, positive=True)
    n_samples = _number(cfg, "schedule.n_samples", diags, required=True, integer=True)
    if n_samples is not None and n_samples < 2:
        diags.append(("schedule.n_samples", f"must be >= 2, got {n_samples}"))
    else:
        cfg["schedule"]["n_samples"] = n_samples
    cfg["schedule"]["n_traj"] = _number(cfg, "schedule.n_traj", diags, required=True, positive=True, integer=True)
    if not isinstance(cfg["schedule"]["elastic_scattering"], bool):
        diags.append(("schedule.elastic_scattering", "must be true or false"))

    _number(cfg, "init.temperature", diags, required=True, nonneg=True)
    if cfg["init"]["position_law"] not in ("uniform-cell", "well-bottom"):
        diags.append(("init.position_law", f"must be 'uniform-cell' or 'well-bottom', got {cfg['init']['position_law']!r}"))

    mode = cfg["sweep"]["mode"]
    if mode not in MODES:
        diags.append(("sweep.mode", f"must be one of {MODES}, got {mode!r}"))
    values = cfg["sweep"]["values"]
    if not isinstance(values, (list, tuple)) or len(values) == 0:
        diags.append(("sweep.values", "must be a non-empty list of numbers"))
        values = []
    else:
        vals = []
        for i, v in enumerate(values):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
                diags.append((f"sweep.values[{i}]", f"expected a finite number, got {v!r}"))
            else:
                vals.append(float(v))
        if len(set(vals)) != len(vals):
            diags.append(("sweep.values", "grid values must be distinct"))
        values = vals
        cfg["sweep"]["values"] = values

    if cfg["friction"]["method"] not in FRICTION_METHODS:
        diags.append(("friction.method", f"must be one of {FRICTION_METHODS}, got {cfg['friction']['method']!r}"))
    forces = cfg["friction"]["forces"]
    if forces is not None:
        if not isinstance(forces, (list, tuple)) or len(forces) < 3:
            diags.append(("friction.forces", "must be a list of at least 3 probe forces"))
        elif any((isinstance(f, bool) or not isinstance(f, (int, float)) or f == 0) for f in forces):
            diags.append(("friction.forces", "probe forces must be nonzero numbers (F = 0 is ill-posed)"))
        else:
            cfg["friction"]["forces"] = [float(f) for f in forces]
    cfg["friction"]["n_traj"] = _number(cfg, "friction.n_traj", diags, required=True, positive=True, integer=True)
    if cfg["friction"]["t_max"] is None:
        cfg["friction"]["t_max"] = 0.5 * cfg["schedule"]["t_max"] if cfg["schedule"]["t_max"] else None
    _number(cfg, "friction.t_max", diags, required=True, positive=True)
    cfg["friction"]["n_samples"] = _number(cfg, "friction.n_samples", diags, required=True, positive=True, integer=True)
    settle = _number(cfg, "friction.settle_fraction", diags, required=True, nonneg=True)
    if settle is not None and not (0.0 <= settle < 1.0):
        diags.append(("friction.settle_fraction", f"must lie in [0, 1), got {settle}"))

    if not isinstance(cfg["rir"]["enabled"], bool):
        diags.append(("rir.enabled", "must be true or false"))
    half = _number(cfg, "rir.half_angle_deg", diags, required=True, positive=True)
    if half is not None and not (0.0 < half < 90.0):
        diags.append(("rir.half_angle_deg", f"must lie strictly between 0 and 90 degrees, got {half}"))
    if cfg["rir"]["axis"] not in AXES:
        diags.append(("rir.axis", f"must be one of {AXES}, got {cfg['rir']['axis']!r}"))
    _number(cfg, "rir.delta_max", diags, positive=True)
    cfg["rir"]["n_deltas"] = _number(cfg, "rir.n_deltas", diags, required=True, positive=True, integer=True)

    if cfg["output"]["trajectory_dump"] not in DUMP_FORMATS:
        diags.append(("output.trajectory_dump", f"must be one of {DUMP_FORMATS}, got {cfg['output']['trajectory_dump']!r}"))

    units = cfg.get("units")
    if units is not None:
        if not isinstance(units, dict):
            diags.append(("units", "must be a mapping with wavelength_nm and mass_amu"))
        else:
            known = {"wavelength_nm", "mass_amu", "gamma_hz"}
            for key in units:
                if key not in known:
                    diags.append((f"units.{key}", "unknown key"))
            for key in ("wavelength_nm", "mass_amu"):
                if key not in units:
                    diags.append((f"units.{key}", "required when the units block is present"))
                elif not isinstance(units[key], (int, float)) or isinstance(units[key], bool) or not units[key] > 0:
                    diags.append((f"units.{key}", f"must be a positive number, got {units[key]!r}"))

    # per-mode requirements and per-point parameter construction
    lat = cfg["lattice"]
    if mode == "fixed-detuning" and detuning is None:
        diags.append(("lattice.detuning", "required for mode fixed-detuning"))
    if mode == "fixed-light-shift" and light_shift is None:
        diags.append(("lattice.light_shift_per_beam", "required for mode fixed-light-shift"))
    if mode == "fixed-pump-rate" and lat["pump_rate_per_beam"] is None:
        diags.append(("lattice.pump_rate_per_beam", "required for mode fixed-pump-rate"))
    if mode in MODES and values:
        for i, v in enumerate(values):
            if mode == "fixed-detuning" and v <= 0:
                diags.append((f"sweep.values[{i}]", f"intensity must be > 0, got {v}"))
            if mode == "fixed-light-shift" and v <= 0:
                diags.append((f"sweep.values[{i}]", f"pump rate must be > 0, got {v}"))
            if mode == "fixed-pump-rate" and v >= 0:
                diags.append((f"sweep.values[{i}]", f"light shift must be < 0, got {v}"))

    if diags:
        raise ConfigError(diags)

    spec = SweepSpec(resolved=cfg)
    # full per-point construction: catches remaining inconsistencies and
    # the dt * gamma_max bound at the worst-case grid point
    for i, v in enumerate(spec.values):
        try:
            params = spec.params_for(v)
            SimulationSchedule.build(
                params, t_max=cfg["schedule"]["t_max"], dt=dt,
                n_samples=cfg["schedule"]["n_samples"], n_traj=cfg["schedule"]["n_traj"],
                master_seed=cfg["seed"], elastic_scattering=cfg["schedule"]["elastic_scattering"])
        except ConfigError as exc:
            raise ConfigError([(f"sweep.values[{i}] -> {path}" if path else f"sweep.values[{i}]", msg)
                               for path, msg in exc.diagnostics])
    return spec


def _derived_seed(master_seed: int, *key) -> int:
    state = np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))
    return int(state.generate_state(1, dtype=np.uint64)[0] >> 1)


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


@dataclass
class PointOutcome:
    index: int
    value: float
    status: str  # ok | simulation-failed | analysis-failed
    errors: list
    files: dict
    rows: list


@dataclass(frozen=True)
class RunManifest:
    """Provenance record of one sweep: everything needed to reproduce it.

    `content_hash` covers the reproducible core (schema and package
    versions plus the resolved config without the threads field); the
    creation timestamp is deliberately outside the hash so replays of
    the same manifest reproduce every result file byte-for-byte.
    """

    schema_version: int
    package_version: str
    created_utc: str
    master_seed: int
    resolved_config: dict
    content_hash: str
    results_file: str
    points: list

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "package_version": self.package_version,
            "created_utc": self.created_utc,
            "master_seed": self.master_seed,
            "resolved_config": self.resolved_config,
            "content_hash": self.content_hash,
            "results_file": self.results_file,
            "points": self.points,
        }

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "RunManifest":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError([(str(path), f"cannot read manifest: {exc}")])
        missing = [k for k in ("schema_version", "package_version", "created_utc", "master_seed",
                               "resolved_config", "content_hash", "results_file", "points")
                   if k not in data]
        if missing:
            raise ConfigError([(str(path), f"manifest is missing keys: {missing}")])
        return cls(**{k: data[k] for k in (
            "schema_version", "package_version", "created_utc", "master_seed",
            "resolved_config", "content_hash", "results_file", "points")})


@dataclass
class SweepResult:
    out_dir: Path
    manifest_path: Path
    results_path: Path
    manifest: RunManifest
    points: list
    exit_code: int

    @property
    def rows(self) -> list:
        return [row for point in self.points for row in point.rows]


def _run_point(spec: SweepSpec, index: int, value: float, out_dir: Path,
               threads: int, content_hash: str) -> PointOutcome:
    cfg = spec.resolved
    outcome = PointOutcome(index=index, value=value, status="ok", errors=[], files={}, rows=[])
    points_dir = out_dir / "points"
    points_dir.mkdir(parents=True, exist_ok=True)
    tag = f"point_{index:03d}"

    params = spec.params_for(value)
    sched = SimulationSchedule.build(
        params, t_max=cfg["schedule"]["t_max"], dt=cfg["schedule"]["dt"],
        n_samples=cfg["schedule"]["n_samples"], n_traj=cfg["schedule"]["n_traj"],
        master_seed=_derived_seed(spec.seed, index, 0),
        elastic_scattering=cfg["schedule"]["elastic_scattering"])
    init = InitialDistribution(temperature=cfg["init"]["temperature"],
                               position_law=cfg["init"]["position_law"])
    try:
        series = ensemble_run(params, sched, init, n_workers=threads, keep_trajectories=True)
    except SimulationError as exc:
        outcome.status = "simulation-failed"
        outcome.errors.append(f"simulation: {exc}")
        return outcome

    series_path = points_dir / f"{tag}_series.csv"
    _write_series_csv(series_path, series, content_hash, index, value)
    outcome.files["series"] = str(series_path.relative_to(out_dir))

    dump_fmt = cfg["output"]["trajectory_dump"]
    if dump_fmt != "none":
        suffix = "csv" if dump_fmt == "csv" else "bin"
        dump_path = points_dir / f"{tag}_trajectories.{suffix}"
        dump_trajectories(series, dump_path, fmt=dump_fmt)
        outcome.files["trajectories"] = str(dump_path.relative_to(out_dir))

    method = cfg["friction"]["method"]
    relax = {}
    diffusion = {}
    transport = {}
    steady_p = np.nan
    try:
        for a, axis in enumerate(AXES):
            relax[axis] = observables.fit_relaxation(
                series.times, series.temperature[a], errs=series.temperature_err[a], axis=axis)
        # transport windows must wait for the trapped/traveling
        # composition as well as the temperatures
        t_comp = observables.composition_settled_start(series)
        t_steady = max(
            (relax[axis].steady_state_start for axis in AXES
             if np.isfinite(relax[axis].gamma)), default=np.nan)
        t_steady = max(t_steady, t_comp)
        if np.isfinite(t_steady) and t_steady < series.times[-1]:
            try:
                steady_p, _ = observables.steady_state_check(series, t_steady)
            except AnalysisError:
                steady_p = np.nan
    except (AnalysisError, ValueError) as exc:
        outcome.status = "analysis-failed"
        outcome.errors.append(f"relaxation: {exc}")
        return outcome

    for a, axis in enumerate(AXES):
        fit = relax[axis]
        d_fit = None
        alpha_e = (np.nan, np.nan)
        if method != "none" and not fit.degenerate:
            try:
                d_fit = observables.fit_diffusion(
                    series.times, series.msd[a], errs=series.msd_err[a],
                    window=(max(fit.steady_state_start, t_comp), series.times[-1]),
                    axis=axis)
                if d_fit.d_s > 0 and fit.t_final > 0:
                    alpha_e = observables.friction_einstein(
                        fit.t_final, d_fit.d_s, fit.t_final_err, d_fit.d_s_err)
            except AnalysisError as exc:
                outcome.status = "analysis-failed"
                outcome.errors.append(f"diffusion[{axis}]: {exc}")
        diffusion[axis] = d_fit
        transport[axis] = observables.TransportResult(
            axis=axis,
            d_s=d_fit.d_s if d_fit else np.nan,
            d_s_err=d_fit.d_s_err if d_fit else np.nan,
            alpha_drift=np.nan, alpha_drift_err=np.nan,
            alpha_einstein=alpha_e[0], alpha_einstein_err=alpha_e[1])

    if method in ("drift", "both"):
        fr = cfg["friction"]
        for a, axis in enumerate(AXES):
            fit = relax[axis]
            if fit.degenerate:
                continue
            forces = fr["forces"]
            if forces is None:
                alpha_ref = transport[axis].alpha_einstein
                if not np.isfinite(alpha_ref):
                    outcome.status = "analysis-failed"
                    outcome.errors.append(
                        f"drift[{axis}]: no Einstein estimate to scale probe forces; set friction.forces")
                    continue
                # keep the largest probe drift well inside the linear
                # response range (a few percent of the thermal velocity)
                target_v = 0.02 * np.sqrt(fit.t_final)
                forces = [f * alpha_ref * target_v for f in (0.5, 1.0, 1.5)]
            probe_sched = SimulationSchedule.build(
                params, t_max=fr["t_max"], dt=cfg["schedule"]["dt"],
                n_samples=fr["n_samples"], n_traj=fr["n_traj"],
                master_seed=_derived_seed(spec.seed, index, 1 + a),
                elastic_scattering=cfg["schedule"]["elastic_scattering"])
            probe_init = InitialDistribution(temperature=max(fit.t_final, 0.0),
                                             position_law=cfg["init"]["position_law"])
            try:
                drift = observables.friction_drift(
                    params, probe_sched, probe_init, axis, forces,
                    settle_fraction=fr["settle_fraction"], n_workers=threads)
                t = transport[axis]
                transport[axis] = observables.TransportResult(
                    axis=axis, d_s=t.d_s, d_s_err=t.d_s_err,
                    alpha_drift=drift.alpha, alpha_drift_err=drift.alpha_err,
                    alpha_einstein=t.alpha_einstein, alpha_einstein_err=t.alpha_einstein_err)
            except SimulationError as exc:
                outcome.status = "simulation-failed"
                outcome.errors.append(f"drift[{axis}]: {exc}")
            except AnalysisError as exc:
                outcome.status = "analysis-failed"
                outcome.errors.append(f"drift[{axis}]: {exc}")

    rir_fit = {}
    if cfg["rir"]["enabled"]:
        rcfg = cfg["rir"]
        axis = rcfg["axis"]
        a = AXES.index(axis)
        fit = relax[axis]
        t_start = fit.steady_state_start if np.isfinite(fit.gamma) else series.times[-1] / 2.0
        t_start = max(t_start, t_comp)
        sel = series.times >= min(t_start, series.times[-1])
        sample = series.momenta[sel, :, a].ravel()
        scale_T = fit.t_final if fit.t_final > 0 else np.var(sample)
        delta_max = rcfg["delta_max"]
        if delta_max is None:
            delta_max = 4.0 * 2.0 * np.sin(np.deg2rad(rcfg["half_angle_deg"])) * np.sqrt(scale_T)
        try:
            geometry = ProbeGeometry.build(np.deg2rad(rcfg["half_angle_deg"]), delta_max,
                                           rcfg["n_deltas"], axis=axis)
            spectrum = rir_spectrum(sample, geometry)
            rir_path = points_dir / f"{tag}_rir.csv"
            spectrum.to_csv(rir_path)
            outcome.files["rir"] = str(rir_path.relative_to(out_dir))
            rir_fit[axis] = fit_rir(spectrum)
        except AnalysisError as exc:
            outcome.status = "analysis-failed"
            outcome.errors.append(f"rir[{axis}]: {exc}")

    for a, axis in enumerate(AXES):
        rec = observables.result_record(
            index, value, params, axis, relax[axis], diffusion[axis], transport[axis],
            float(series.trapped_fraction[-1]), steady_p)
        rfit = rir_fit.get(axis)
        rec["T_rir"] = rfit.temperature if rfit else np.nan
        rec["T_rir_err"] = rfit.temperature_err if rfit else np.nan
        outcome.rows.append(rec)
    return outcome


def _write_series_csv(path: Path, series, content_hash: str, index: int, value: float) -> None:
    cols = ["t"]
    for axis in AXES:
        cols += [f"T_{axis}", f"T_{axis}_err", f"msd_{axis}", f"msd_{axis}_err",
                 f"vmean_{axis}", f"vmean_{axis}_err"]
    cols.append("trapped_fraction")
    lines = [f"# manifest: {content_hash}",
             f"# point: {index} sweep_value: {value!r}",
             ",".join(cols)]
    for si in range(len(series.times)):
        row = [series.times[si]]
        for a in range(2):
            row += [series.temperature[a, si], series.temperature_err[a, si],
                    series.msd[a, si], series.msd_err[a, si],
                    series.mean_velocity[a, si], series.mean_velocity_err[a, si]]
        row.append(series.trapped_fraction[si])
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _write_results_csv(path: Path, rows: list, content_hash: str,
                       units: UnitSystem | None) -> None:
    cols = list(RESULT_COLUMNS)
    if units is not None:
        cols += list(PHYSICAL_COLUMNS)
    lines = [f"# manifest: {content_hash}", f"# schema_version: {SCHEMA_VERSION}", ",".join(cols)]
    for rec in rows:
        rec = dict(rec)
        if units is not None:
            rec["T_final_uK"] = units.to_physical(rec["T_final"], "temperature") * 1e6
            rec["gamma_T_kHz"] = units.to_physical(rec["gamma_T"], "rate") / 1e3
            rec["D_s_cm2_per_s"] = units.to_physical(rec["D_s"], "diffusion") * 1e4
            rec["alpha_over_m_kHz"] = (units.to_physical(rec["alpha_einstein"], "rate") / 1e3
                                       if np.isfinite(rec["alpha_einstein"]) else np.nan)
        lines.append(",".join(_fmt(rec[c]) for c in cols))
    path.write_text("\n".join(lines) + "\n")


def run_sweep(spec: SweepSpec, out_dir, *, threads: int | None = None) -> SweepResult:
    """Execute every sweep point, writing results, series files and manifest.

    A failing point is recorded (status and error messages in the
    manifest) and the sweep continues; the exit code is 0 only if every
    point succeeded, else 2 if any simulation failed, else 3.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    threads = spec.threads if threads is None else max(1, int(threads))
    content_hash = spec.content_hash()

    points = []
    for index, value in enumerate(spec.values):
        try:
            outcome = _run_point(spec, index, value, out_dir, threads, content_hash)
        except SimulationError as exc:
            outcome = PointOutcome(index=index, value=value, status="simulation-failed",
                                   errors=[str(exc)], files={}, rows=[])
        except SisycoolError as exc:
            outcome = PointOutcome(index=index, value=value, status="analysis-failed",
                                   errors=[str(exc)], files={}, rows=[])
        points.append(outcome)

    results_path = out_dir / "results.csv"
    all_rows = [row for p in points for row in p.rows]
    _write_results_csv(results_path, all_rows, content_hash, spec.unit_system())

    manifest = RunManifest(
        schema_version=SCHEMA_VERSION,
        package_version=__version__,
        created_utc=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        master_seed=spec.seed,
        resolved_config=spec.resolved,
        content_hash=content_hash,
        results_file="results.csv",
        points=[
            {
                "index": p.index,
                "sweep_value": p.value,
                "status": p.status,
                "errors": p.errors,
                "files": p.files,
            }
            for p in points
        ],
    )
    manifest_path = out_dir / "manifest.json"
    manifest.write(manifest_path)

    statuses = [p.status for p in points]
    if any(s == "simulation-failed" for s in statuses):
        exit_code = 2
    elif any(s == "analysis-failed" for s in statuses):
        exit_code = 3
    else:
        exit_code = 0
    return SweepResult(out_dir=out_dir, manifest_path=manifest_path,
                       results_path=results_path, manifest=manifest, points=points,
                       exit_code=exit_code)


def replay(manifest_path, out_dir, *, threads: int | None = None) -> SweepResult:
    """Re-run a sweep from its manifest alone.

    Reproduces every result file byte-for-byte (the manifest timestamp
    is the only thing that may differ).  A package-version mismatch is
    an error: bit-reproducibility is only promised for identical code.
    """
    manifest_path = Path(manifest_path)
    manifest = RunManifest.load(manifest_path)
    if manifest.package_version != __version__:
        raise ConfigError([(str(manifest_path),
                            f"manifest was produced by version {manifest.package_version}, "
                            f"this is {__version__}; byte-identical replay is not guaranteed")])
    spec = validate_config(manifest.resolved_config)
    if spec.content_hash() != manifest.content_hash:
        raise ConfigError([(str(manifest_path), "content hash mismatch: manifest was edited")])
    return run_sweep(spec, out_dir, threads=threads)
