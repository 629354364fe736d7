"""Semiclassical trajectory integration with stochastic sublevel jumps.

Each atom is a point particle on the potential surface of its current
sublevel.  A step is one velocity-Verlet update on that surface plus the
external probe force, followed by a Bernoulli optical-pumping trial with
probability gamma_{m->-m}(r) * dt evaluated at the post-drift position.
A successful trial flips the sublevel and applies two recoil kicks: the
(x, z) projection of one of the four lattice beams (chosen uniformly)
for the absorbed photon, and the (x, z) projection of an isotropic 3D
direction for the spontaneous photon.  Every jump therefore changes the
momentum by at most 2 hbar k.

Randomness layout (the determinism contract)
--------------------------------------------
Trajectory ``i`` owns the PCG64 stream seeded by
``SeedSequence(master_seed, spawn_key=(i,))`` and consumes it in fixed
order: the initial-condition draws (two uniforms for a uniform-cell
position, then one uniform for the sublevel, then two normals for the
momentum; the position uniforms are skipped for the well-bottom law),
then exactly four uniforms per step (jump trial, beam choice, two for
the emission direction) whether or not a jump occurs, or eight when
elastic scattering is enabled.  Ensemble statistics are reduced from
per-trajectory records in trajectory order.  Outputs are therefore
bit-identical for any worker count or batching.
"""

from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import lattice
from .errors import ConfigError, IntegrationDivergedError
from .lattice import LatticeParams

AXES = ("x", "z")

POSITION_LAWS = ("uniform-cell", "well-bottom")

# uniforms consumed per step and per jump channel
_DRAWS_PUMP = 4
_DRAWS_ELASTIC = 4

_TRAJECTORY_DUMP_COLUMNS = ("trajectory", "t", "x", "z", "px", "pz", "sublevel")


@dataclass(frozen=True)
class AtomState:
    """Phase-space point of a single atom.

    sublevel is the magnetic quantum number, +0.5 or -0.5.
    """

    x: float
    z: float
    px: float
    pz: float
    sublevel: float
    t: float = 0.0

    def __post_init__(self):
        vals = (self.x, self.z, self.px, self.pz, self.sublevel, self.t)
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"AtomState fields must be finite, got {vals}")
        if self.sublevel not in (0.5, -0.5):
            raise ValueError(f"sublevel must be +-1/2, got {self.sublevel}")


@dataclass(frozen=True)
class InitialDistribution:
    """Initial ensemble: Gaussian momenta at `temperature`, equal sublevel
    weights, and positions drawn by `position_law`.

    position_law "uniform-cell" draws uniformly over one unit cell;
    "well-bottom" puts every atom at the potential minimum of its drawn
    sublevel.  temperature = 0 means all atoms start at rest.
    `position_offset` shifts every drawn position by a constant (dx, dz);
    it consumes no random draws, so offset ensembles stay stream-
    compatible with unshifted ones.
    """

    temperature: float
    position_law: str = "uniform-cell"
    position_offset: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not (np.isfinite(self.temperature) and self.temperature >= 0):
            raise ConfigError([("init.temperature", f"must be finite and >= 0, got {self.temperature}")])
        if self.position_law not in POSITION_LAWS:
            raise ConfigError([("init.position_law", f"must be one of {POSITION_LAWS}, got {self.position_law!r}")])
        off = tuple(float(v) for v in self.position_offset)
        object.__setattr__(self, "position_offset", off)
        if len(off) != 2 or not np.all(np.isfinite(off)):
            raise ConfigError([("init.position_offset", f"must be two finite components (dx, dz), got {self.position_offset!r}")])


@dataclass(frozen=True, eq=False)
class SimulationSchedule:
    """Time grid, sampling plan, ensemble size and seed for one run.

    Build with `SimulationSchedule.build(params, ...)`, which fills the
    default time step dt = min(0.01 * T_osc, 0.1 / gamma_max) and
    enforces dt * gamma_max < 0.1 (first-order jump sampling stays in
    the linear regime).  `sample_steps` are integer step indices; the
    recorded times are exactly sample_steps * dt.

    The three disable_*/freeze_* switches are diagnostics used by the
    test suite (pump forced off, flat potential, pinned atom); they are
    not part of the physical model.
    """

    dt: float
    n_steps: int
    sample_steps: np.ndarray
    n_traj: int
    master_seed: int
    external_force: tuple[float, float] = (0.0, 0.0)
    elastic_scattering: bool = False
    disable_jumps: bool = False
    disable_potential: bool = False
    freeze_motion: bool = False

    def __post_init__(self):
        problems = []
        if not (np.isfinite(self.dt) and self.dt > 0):
            problems.append(("schedule.dt", f"must be positive and finite, got {self.dt}"))
        if self.n_steps < 1:
            problems.append(("schedule.n_steps", f"must be >= 1, got {self.n_steps}"))
        steps = np.asarray(self.sample_steps, dtype=np.int64)
        object.__setattr__(self, "sample_steps", steps)
        if steps.size == 0:
            problems.append(("schedule.sample_steps", "at least one sample time is required"))
        elif np.any(np.diff(steps) <= 0) or steps[0] < 0 or steps[-1] > self.n_steps:
            problems.append(("schedule.sample_steps", "must be strictly increasing within [0, n_steps]"))
        if self.n_traj < 1:
            problems.append(("schedule.n_traj", f"must be >= 1, got {self.n_traj}"))
        if not (isinstance(self.master_seed, (int, np.integer)) and 0 <= int(self.master_seed) < 2**63):
            problems.append(("schedule.master_seed", f"must be a non-negative integer, got {self.master_seed!r}"))
        fext = tuple(float(f) for f in self.external_force)
        object.__setattr__(self, "external_force", fext)
        if len(fext) != 2 or not np.all(np.isfinite(fext)):
            problems.append(("schedule.external_force", f"must be two finite components (fx, fz), got {self.external_force!r}"))
        if problems:
            raise ConfigError(problems)

    @property
    def t_max(self) -> float:
        return self.n_steps * self.dt

    @property
    def sample_times(self) -> np.ndarray:
        return self.sample_steps * self.dt

    @property
    def draws_per_step(self) -> int:
        return _DRAWS_PUMP + (_DRAWS_ELASTIC if self.elastic_scattering else 0)

    def max_jump_rate(self, params: LatticeParams) -> float:
        """Largest per-channel jump rate over the cell for these params."""
        rate = params.max_pump_rate
        if self.elastic_scattering:
            rate = max(rate, 2.0 * params.pump_rate_per_beam)
        return rate

    def check_against(self, params: LatticeParams) -> None:
        """Enforce the jump-probability bound dt * gamma_max < 0.1."""
        prob = self.dt * self.max_jump_rate(params)
        if not self.disable_jumps and prob >= 0.1:
            raise ConfigError([(
                "schedule.dt",
                f"dt * max jump rate = {prob:.4g} violates the bound dt * gamma_max < 0.1; "
                f"reduce dt below {0.1 / self.max_jump_rate(params):.4g}",
            )])

    @classmethod
    def build(cls, params: LatticeParams, t_max: float, dt: float | None = None,
              n_samples: int | None = None, sample_times=None, n_traj: int = 5000,
              master_seed: int = 0, external_force=(0.0, 0.0), **switches) -> "SimulationSchedule":
        """Canonical constructor: default dt, snapped sampling grid, bound check."""
        if not (np.isfinite(t_max) and t_max > 0):
            raise ConfigError([("schedule.t_max", f"must be positive and finite, got {t_max}")])
        if dt is None:
            omega = max(params.well_frequencies)
            dt = min(0.01 * 2.0 * np.pi / omega, 0.1 / params.max_pump_rate)
        if not dt > 0:
            raise ConfigError([("schedule.dt", f"must be positive, got {dt}")])
        n_steps = max(1, int(np.ceil(t_max / dt - 1e-9)))
        if sample_times is not None and n_samples is not None:
            raise ConfigError([("schedule", "give either n_samples or sample_times, not both")])
        if sample_times is not None:
            req = np.asarray(sample_times, dtype=float)
            if req.size and (np.any(req < 0) or np.any(req > n_steps * dt * (1 + 1e-9))):
                raise ConfigError([("schedule.sample_times", "sample times must lie within [0, t_max]")])
            steps = np.unique(np.rint(req / dt).astype(np.int64))
        else:
            n_samples = 121 if n_samples is None else int(n_samples)
            if n_samples < 2:
                raise ConfigError([("schedule.n_samples", f"must be >= 2, got {n_samples}")])
            steps = np.unique(np.rint(np.linspace(0.0, n_steps, n_samples)).astype(np.int64))
        sched = cls(dt=float(dt), n_steps=n_steps, sample_steps=steps, n_traj=int(n_traj),
                    master_seed=int(master_seed), external_force=tuple(external_force), **switches)
        sched.check_against(params)
        return sched


@dataclass(eq=False)
class EnsembleSeries:
    """Ensemble statistics at the scheduled sample times.

    Per-axis arrays are indexed [axis, sample] with axis 0 = x, 1 = z.
    Velocities equal momenta (M = 1).  `temperature` is the population
    variance of the velocity sample (mean removed), so a single
    trajectory gives exactly zero.  With keep_trajectories=True the raw
    per-trajectory records are retained in `positions` (S, n, 2),
    `momenta` (S, n, 2) and `sublevels` (S, n).
    """

    times: np.ndarray
    mean_velocity: np.ndarray
    mean_velocity_err: np.ndarray
    temperature: np.ndarray
    temperature_err: np.ndarray
    msd: np.ndarray
    msd_err: np.ndarray
    trapped_fraction: np.ndarray
    jump_counts: np.ndarray
    n_traj: int
    params: LatticeParams
    schedule: SimulationSchedule
    init: InitialDistribution
    initial_positions: np.ndarray | None = None
    positions: np.ndarray | None = None
    momenta: np.ndarray | None = None
    sublevels: np.ndarray | None = None

    @property
    def has_trajectories(self) -> bool:
        return self.positions is not None


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """Single-trajectory record at the scheduled sample times."""

    trajectory_index: int
    times: np.ndarray
    x: np.ndarray
    z: np.ndarray
    px: np.ndarray
    pz: np.ndarray
    sublevel: np.ndarray


def _trajectory_generators(master_seed: int, indices) -> list[np.random.Generator]:
    return [
        np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=(int(i),))))
        for i in indices
    ]


def _draw_initial(params: LatticeParams, init: InitialDistribution,
                  gens: list[np.random.Generator]):
    """Initial conditions, one stream per trajectory (see module docstring)."""
    n = len(gens)
    x = np.empty(n)
    z = np.empty(n)
    px = np.empty(n)
    pz = np.empty(n)
    sign = np.empty(n, dtype=np.int8)
    scale = np.sqrt(init.temperature)
    uniform = init.position_law == "uniform-cell"
    for j, g in enumerate(gens):
        if uniform:
            u = g.random(2)
            x[j] = u[0] * params.lambda_x
            z[j] = u[1] * params.lambda_z
        sign[j] = 1 if g.random() < 0.5 else -1
        mom = g.normal(size=2)
        px[j] = scale * mom[0]
        pz[j] = scale * mom[1]
        if not uniform:
            x[j], z[j] = lattice.well_bottom(params, 0.5 * float(sign[j]))
    dx, dz = init.position_offset
    if dx or dz:
        x += dx
        z += dz
    return x, z, px, pz, sign


def _run_batch(params: LatticeParams, schedule: SimulationSchedule,
               init: InitialDistribution, indices: np.ndarray, out: dict,
               col_start: int, block_steps: int = 256) -> None:
    """Integrate one batch of trajectories, filling `out` columns from col_start."""
    gens = _trajectory_generators(schedule.master_seed, indices)
    x, z, px, pz, sign = _draw_initial(params, init, gens)
    n = len(indices)
    cols = slice(col_start, col_start + n)
    dt = schedule.dt
    fxe, fze = schedule.external_force
    move = not schedule.freeze_motion
    use_potential = not schedule.disable_potential and not schedule.freeze_motion
    use_jumps = not schedule.disable_jumps
    use_elastic = schedule.elastic_scattering and use_jumps
    draws = schedule.draws_per_step
    jump_counts = np.zeros(n, dtype=np.int64)

    # (x, z) projections of the four beam directions, rows = beam index
    st, ct = params.kx, params.kz
    beam_px = np.array([st, -st, 0.0, 0.0])
    beam_pz = np.array([ct, ct, -ct, -ct])

    sign_f = sign.astype(float)
    if use_potential:
        c, sx, s2, c2 = lattice._trig_fields(params, x, z)
        fx, fz = lattice._force_fields(params, sign_f, c, sx, s2, c2)
    else:
        fx = np.zeros(n)
        fz = np.zeros(n)

    out["x0"][cols] = x
    out["z0"][cols] = z
    sample_steps = schedule.sample_steps
    si = 0
    if sample_steps[si] == 0:
        _record(out, 0, cols, x, z, px, pz, sign)
        si += 1

    for start in range(0, schedule.n_steps, block_steps):
        m = min(block_steps, schedule.n_steps - start)
        u = np.empty((n, m, draws))
        for j, g in enumerate(gens):
            u[j] = g.random((m, draws))
        for s in range(m):
            step_no = start + s + 1
            us = u[:, s, :]
            if move:
                px += 0.5 * dt * (fx + fxe)
                pz += 0.5 * dt * (fz + fze)
                x += dt * px
                z += dt * pz
            if use_potential or use_jumps:
                c, sx, s2, c2 = lattice._trig_fields(params, x, z)
            if use_potential:
                fx, fz = lattice._force_fields(params, sign_f, c, sx, s2, c2)
            if move:
                px += 0.5 * dt * (fx + fxe)
                pz += 0.5 * dt * (fz + fze)
            if use_jumps:
                gam = lattice._pump_fields(params, sign_f, c, s2)
                jumped = us[:, 0] < gam * dt
                if jumped.any():
                    jj = np.nonzero(jumped)[0]
                    sign[jj] = -sign[jj]
                    sign_f[jj] = sign[jj]
                    jump_counts[jj] += 1
                    if move:
                        beam = np.minimum((us[jj, 1] * 4).astype(np.int64), 3)
                        cth = 2.0 * us[jj, 2] - 1.0
                        sth = np.sqrt(1.0 - cth * cth)
                        phi = 2.0 * np.pi * us[jj, 3]
                        px[jj] += beam_px[beam] + sth * np.cos(phi)
                        pz[jj] += beam_pz[beam] + cth
                    if use_potential:
                        fj, gj = lattice._force_fields(params, sign_f[jj], c[jj], sx[jj], s2[jj], c2[jj])
                        fx[jj] = fj
                        fz[jj] = gj
                if use_elastic:
                    gam_el = lattice._elastic_fields(params, sign_f, c, s2)
                    kicked = us[:, 4] < gam_el * dt
                    if kicked.any() and move:
                        kk = np.nonzero(kicked)[0]
                        beam = np.minimum((us[kk, 5] * 4).astype(np.int64), 3)
                        cth = 2.0 * us[kk, 6] - 1.0
                        sth = np.sqrt(1.0 - cth * cth)
                        phi = 2.0 * np.pi * us[kk, 7]
                        px[kk] += beam_px[beam] + sth * np.cos(phi)
                        pz[kk] += beam_pz[beam] + cth
            bad = ~np.isfinite(x + z + px + pz)
            if bad.any():
                raise IntegrationDivergedError(indices[np.argmax(bad)], step_no)
            if si < len(sample_steps) and sample_steps[si] == step_no:
                _record(out, si, cols, x, z, px, pz, sign)
                si += 1
    out["jumps"][cols] = jump_counts


def _record(out: dict, si: int, cols: slice, x, z, px, pz, sign) -> None:
    out["x"][si, cols] = x
    out["z"][si, cols] = z
    out["px"][si, cols] = px
    out["pz"][si, cols] = pz
    out["sign"][si, cols] = sign


def _reduce(params: LatticeParams, schedule: SimulationSchedule,
            init: InitialDistribution, out: dict, keep: bool) -> EnsembleSeries:
    n = schedule.n_traj
    S = len(schedule.sample_steps)
    mean_v = np.empty((2, S))
    mean_v_err = np.empty((2, S))
    temp = np.empty((2, S))
    temp_err = np.empty((2, S))
    msd = np.empty((2, S))
    msd_err = np.empty((2, S))
    if schedule.disable_potential or schedule.freeze_motion:
        u_escape = 0.0
    else:
        u_escape = lattice.escape_energy(params, 0.5)
    trapped = np.empty(S)
    for a, (pos_key, mom_key, r0_key) in enumerate((("x", "px", "x0"), ("z", "pz", "z0"))):
        p = out[mom_key]
        mean_v[a] = p.mean(axis=1)
        dev = p - mean_v[a][:, None]
        m2 = np.mean(dev**2, axis=1)
        temp[a] = m2
        if n >= 2:
            mean_v_err[a] = np.sqrt(m2 / (n - 1))
            m4 = np.mean(dev**4, axis=1)
            temp_err[a] = np.sqrt(np.maximum(m4 - m2**2, 0.0) / n)
        else:
            mean_v_err[a] = np.nan
            temp_err[a] = np.nan
        sq = (out[pos_key] - out[r0_key][None, :]) ** 2
        msd[a] = sq.mean(axis=1)
        if n >= 2:
            msd_err[a] = sq.std(axis=1, ddof=1) / np.sqrt(n)
        else:
            msd_err[a] = np.nan
    if schedule.disable_potential or schedule.freeze_motion:
        energy = 0.5 * (out["px"] ** 2 + out["pz"] ** 2)
    else:
        energy = lattice.total_energy(params, 0.5 * out["sign"].astype(float),
                                      out["x"], out["z"], out["px"], out["pz"])
    trapped[:] = np.mean(energy < u_escape, axis=1)
    keep_kw = {}
    if keep:
        keep_kw = dict(
            positions=np.stack([out["x"], out["z"]], axis=-1),
            momenta=np.stack([out["px"], out["pz"]], axis=-1),
            sublevels=0.5 * out["sign"].astype(float),
        )
    return EnsembleSeries(
        times=schedule.sample_times.copy(),
        mean_velocity=mean_v, mean_velocity_err=mean_v_err,
        temperature=temp, temperature_err=temp_err,
        msd=msd, msd_err=msd_err, trapped_fraction=trapped,
        jump_counts=out["jumps"], n_traj=n, params=params, schedule=schedule,
        init=init, initial_positions=np.stack([out["x0"], out["z0"]], axis=-1),
        **keep_kw,
    )


def ensemble_run(params: LatticeParams, schedule: SimulationSchedule,
                 init: InitialDistribution, *, n_workers: int = 1,
                 keep_trajectories: bool = False) -> EnsembleSeries:
    """Integrate the full ensemble and reduce the scheduled statistics.

    `n_workers` only controls threading of trajectory batches; every
    output array is bit-identical for any value.  A non-finite state in
    any trajectory aborts the whole run with IntegrationDivergedError.
    """
    schedule.check_against(params)
    n = schedule.n_traj
    S = len(schedule.sample_steps)
    out = {
        "x": np.empty((S, n)), "z": np.empty((S, n)),
        "px": np.empty((S, n)), "pz": np.empty((S, n)),
        "sign": np.empty((S, n), dtype=np.int8),
        "x0": np.empty(n), "z0": np.empty(n),
        "jumps": np.zeros(n, dtype=np.int64),
    }
    n_workers = max(1, int(n_workers))
    if n_workers == 1 or n < 2 * n_workers:
        _run_batch(params, schedule, init, np.arange(n), out, 0)
    else:
        bounds = np.linspace(0, n, n_workers * 2 + 1).astype(int)
        chunks = [np.arange(bounds[i], bounds[i + 1]) for i in range(len(bounds) - 1)
                  if bounds[i + 1] > bounds[i]]
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            futures = [pool.submit(_run_batch, params, schedule, init, chunk, out, int(chunk[0]))
                       for chunk in chunks]
            for fut in futures:
                fut.result()
    return _reduce(params, schedule, init, out, keep_trajectories)


def simulate_trajectory(params: LatticeParams, schedule: SimulationSchedule,
                        init: InitialDistribution, trajectory_index: int) -> TrajectoryRecord:
    """Integrate one trajectory of the ensemble identified by its index.

    Pure function of (params, schedule, init, master_seed, index): the
    record equals column `trajectory_index` of the corresponding
    ensemble_run.
    """
    if not (0 <= trajectory_index < schedule.n_traj):
        raise ValueError(f"trajectory_index must be in [0, {schedule.n_traj}), got {trajectory_index}")
    schedule.check_against(params)
    S = len(schedule.sample_steps)
    out = {
        "x": np.empty((S, 1)), "z": np.empty((S, 1)),
        "px": np.empty((S, 1)), "pz": np.empty((S, 1)),
        "sign": np.empty((S, 1), dtype=np.int8),
        "x0": np.empty(1), "z0": np.empty(1),
        "jumps": np.zeros(1, dtype=np.int64),
    }
    _run_batch(params, schedule, init, np.array([trajectory_index]), out, 0)
    return TrajectoryRecord(
        trajectory_index=trajectory_index,
        times=schedule.sample_times.copy(),
        x=out["x"][:, 0].copy(), z=out["z"][:, 0].copy(),
        px=out["px"][:, 0].copy(), pz=out["pz"][:, 0].copy(),
        sublevel=0.5 * out["sign"][:, 0].astype(float),
    )


def step(state: AtomState, params: LatticeParams, schedule: SimulationSchedule,
         rng: np.random.Generator) -> AtomState:
    """Advance a single atom by one time step of the schedule.

    Consumes schedule.draws_per_step uniforms from `rng`; deterministic
    given the generator state.  Matches one inner iteration of the
    ensemble kernel exactly (the cached force there always equals the
    force at the current position and sublevel).
    """
    x = np.array([state.x])
    z = np.array([state.z])
    px = np.array([state.px])
    pz = np.array([state.pz])
    sign = np.array([int(round(2 * state.sublevel))], dtype=np.int8)
    sign_f = sign.astype(float)
    dt = schedule.dt
    fxe, fze = schedule.external_force
    move = not schedule.freeze_motion
    use_potential = not schedule.disable_potential and not schedule.freeze_motion
    us = rng.random(schedule.draws_per_step)

    if use_potential:
        c, sx, s2, c2 = lattice._trig_fields(params, x, z)
        fx, fz = lattice._force_fields(params, sign_f, c, sx, s2, c2)
    else:
        fx = np.zeros(1)
        fz = np.zeros(1)
    if move:
        px += 0.5 * dt * (fx + fxe)
        pz += 0.5 * dt * (fz + fze)
        x += dt * px
        z += dt * pz
        c, sx, s2, c2 = lattice._trig_fields(params, x, z)
        if use_potential:
            fx, fz = lattice._force_fields(params, sign_f, c, sx, s2, c2)
        px += 0.5 * dt * (fx + fxe)
        pz += 0.5 * dt * (fz + fze)
    else:
        c, sx, s2, c2 = lattice._trig_fields(params, x, z)
    if not schedule.disable_jumps:
        gam = lattice._pump_fields(params, sign_f, c, s2)
        if us[0] < float(gam[0]) * dt:
            sign[0] = -sign[0]
            if move:
                beam = min(int(us[1] * 4), 3)
                st, ct = params.kx, params.kz
                beam_px = (st, -st, 0.0, 0.0)[beam]
                beam_pz = (ct, ct, -ct, -ct)[beam]
                cth = 2.0 * us[2] - 1.0
                px[0] += beam_px + np.sqrt(1.0 - cth * cth) * np.cos(2.0 * np.pi * us[3])
                pz[0] += beam_pz + cth
        if schedule.elastic_scattering:
            gam_el = lattice._elastic_fields(params, sign.astype(float), c, s2)
            if us[4] < float(gam_el[0]) * dt and move:
                beam = min(int(us[5] * 4), 3)
                st, ct = params.kx, params.kz
                cth = 2.0 * us[6] - 1.0
                px[0] += (st, -st, 0.0, 0.0)[beam] + np.sqrt(1.0 - cth * cth) * np.cos(2.0 * np.pi * us[7])
                pz[0] += (ct, ct, -ct, -ct)[beam] + cth
    if not np.all(np.isfinite([x[0], z[0], px[0], pz[0]])):
        raise IntegrationDivergedError(0, int(round(state.t / dt)) + 1)
    return AtomState(x=float(x[0]), z=float(z[0]), px=float(px[0]), pz=float(pz[0]),
                     sublevel=0.5 * float(sign[0]), t=state.t + dt)


def dump_trajectories(series: EnsembleSeries, path, fmt: str = "csv") -> None:
    """Write the raw per-trajectory records of a keep_trajectories run.

    One record per (sample time, trajectory), columns
    (trajectory, t, x, z, px, pz, sublevel).  fmt "csv" writes a header
    line then text rows; fmt "binary" writes the same records as packed
    little-endian float64 (7 per record, no header).  See
    docs/output_formats.md.
    """
    if not series.has_trajectories:
        raise ValueError("series was produced without keep_trajectories=True")
    if fmt not in ("csv", "binary"):
        raise ValueError(f"fmt must be 'csv' or 'binary', got {fmt!r}")
    S, n, _ = series.positions.shape
    rows = np.empty((S * n, 7))
    rows[:, 0] = np.tile(np.arange(n), S)
    rows[:, 1] = np.repeat(series.times, n)
    rows[:, 2] = series.positions[:, :, 0].reshape(-1)
    rows[:, 3] = series.positions[:, :, 1].reshape(-1)
    rows[:, 4] = series.momenta[:, :, 0].reshape(-1)
    rows[:, 5] = series.momenta[:, :, 1].reshape(-1)
    rows[:, 6] = series.sublevels.reshape(-1)
    if fmt == "binary":
        with open(path, "wb") as fh:
            fh.write(rows.astype("<f8").tobytes(order="C"))
        return
    buf = io.StringIO()
    buf.write(",".join(_TRAJECTORY_DUMP_COLUMNS) + "\n")
    for row in rows:
        # repr of the builtin float round-trips exactly and is stable
        buf.write(f"{int(row[0])}," + ",".join(repr(float(v)) for v in row[1:]) + "\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())
