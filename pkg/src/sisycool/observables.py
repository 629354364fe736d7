"""Estimators for cooling rates, transport coefficients and populations.

All estimators consume `EnsembleSeries` data (or plain arrays) and
return small result dataclasses carrying the estimate, its uncertainty,
goodness-of-fit measures, and validity flags.  Nothing here re-runs
simulations except `friction_drift`, which orchestrates the
constant-force probe runs for the drift estimator.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize, stats

from . import lattice
from .dynamics import AXES, AtomState, EnsembleSeries, InitialDistribution, SimulationSchedule, ensemble_run
from .errors import AnalysisError, DriftCalibrationError, FitFailedError, InsufficientDataError
from .lattice import LatticeParams


def kinetic_temperature(velocities) -> float:
    """Temperature of a 1D velocity sample: population variance, mean removed.

    In recoil units (M = k_B = 1) the mean kinetic energy per axis is
    exactly temperature/2.
    """
    v = np.asarray(velocities, dtype=float)
    if v.ndim != 1:
        raise ValueError("velocities must be a 1D sample")
    if v.size < 2:
        raise InsufficientDataError(f"need at least 2 velocity samples, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise ValueError("velocities must be finite")
    return float(np.var(v))


def temperature_uncertainty(velocities) -> float:
    """Asymptotic standard error of the variance estimator, sqrt((m4-m2^2)/n)."""
    v = np.asarray(velocities, dtype=float)
    if v.size < 2:
        raise InsufficientDataError(f"need at least 2 velocity samples, got {v.size}")
    dev = v - v.mean()
    m2 = np.mean(dev**2)
    m4 = np.mean(dev**4)
    return float(np.sqrt(max(m4 - m2**2, 0.0) / v.size))


@dataclass(frozen=True)
class RelaxationFit:
    """Exponential temperature-relaxation fit T(t) = T_f + (T_i - T_f) e^(-Gamma t)."""

    axis: str
    t_initial: float
    t_final: float
    gamma: float
    t_initial_err: float
    t_final_err: float
    gamma_err: float
    r_squared: float
    residual_lag1: float
    n_points: int
    span_ok: bool
    degenerate: bool

    @property
    def steady_state_start(self) -> float:
        """Earliest time treated as steady state, 5 / Gamma."""
        return 5.0 / self.gamma


def _noise_scale(y: np.ndarray) -> float:
    """High-frequency noise level from second differences (smooth trend removed)."""
    if y.size < 3:
        return 0.0
    return float(np.sqrt(np.mean(np.diff(y, 2) ** 2) / 6.0))


def _lag1_autocorr(r: np.ndarray) -> float:
    r = r - r.mean()
    denom = np.dot(r, r)
    if denom == 0.0:
        return 0.0
    return float(np.dot(r[:-1], r[1:]) / denom)


def fit_relaxation(times, temperatures, errs=None, axis: str = "") -> RelaxationFit:
    """Fit the three-parameter exponential relaxation law to a T(t) series.

    Parameters
    ----------
    times, temperatures : 1D arrays of equal length (>= 5 points).
    errs : optional 1D array of standard errors used as weights; the
        parameter covariance then uses the given errors as absolute.
    axis : label carried through to the result.

    A statistically constant series sets `degenerate` (gamma is then
    unidentifiable and reported as nan) instead of raising; an optimizer
    failure raises FitFailedError with the residual-norm trace.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(temperatures, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise ValueError("times and temperatures must be 1D arrays of equal length")
    if t.size < 5:
        raise InsufficientDataError(f"need at least 5 points for a relaxation fit, got {t.size}")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
        raise ValueError("times and temperatures must be finite")
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing")
    w = np.ones_like(y)
    have_errs = errs is not None
    if have_errs:
        e = np.asarray(errs, dtype=float)
        if e.shape != y.shape or not np.all(np.isfinite(e)) or np.any(e < 0):
            raise ValueError("errs must be finite non-negative, same shape as temperatures")
        have_errs = bool(np.all(e > 0))
        if have_errs:
            w = 1.0 / e

    noise = _noise_scale(y) if not have_errs else float(np.median(e))
    span = float(y.max() - y.min())
    if span <= 6.0 * noise:
        return RelaxationFit(axis=axis, t_initial=float(y[0]), t_final=float(np.mean(y)),
                             gamma=np.nan, t_initial_err=np.nan, t_final_err=np.nan,
                             gamma_err=np.nan, r_squared=0.0, residual_lag1=0.0,
                             n_points=t.size, span_ok=False, degenerate=True)

    n_tail = max(3, t.size // 5)
    tf0 = float(np.mean(y[-n_tail:]))
    ti0 = float(y[0])
    amp0 = ti0 - tf0
    if amp0 == 0.0:
        amp0 = span if y.argmax() < y.argmin() else -span
        ti0 = tf0 + amp0
    # log-linearized slope over the early decaying section
    rel = (y - tf0) / amp0
    early = np.nonzero(rel > 0.2)[0]
    if early.size >= 2:
        g0 = -np.polyfit(t[early], np.log(rel[early]), 1)[0]
    else:
        g0 = np.nan
    if not (np.isfinite(g0) and g0 > 0):
        g0 = 2.0 / (t[-1] - t[0])

    trace: list[float] = []

    def residuals(p):
        ti, tf, g = p
        r = w * (tf + (ti - tf) * np.exp(-g * t) - y)
        trace.append(float(np.linalg.norm(r)))
        return r

    def jacobian(p):
        ti, tf, g = p
        ex = np.exp(-g * t)
        return np.column_stack((w * ex, w * (1.0 - ex), -w * (ti - tf) * t * ex))

    res = optimize.least_squares(
        residuals, x0=np.array([ti0, tf0, g0]), jac=jacobian,
        bounds=([-np.inf, -np.inf, 1e-300], [np.inf, np.inf, np.inf]),
        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000,
    )
    if not res.success and res.status <= 0:
        raise FitFailedError(f"relaxation fit did not converge (axis {axis!r}): {res.message}", trace)

    ti, tf, g = (float(v) for v in res.x)
    model = tf + (ti - tf) * np.exp(-g * t)
    resid = y - model
    ss_res = float(np.sum((w * resid) ** 2))
    ss_tot = float(np.sum((w * (y - np.average(y, weights=w**2))) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0

    jtj = res.jac.T @ res.jac
    try:
        cov = np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        cov = np.full((3, 3), np.nan)
    if not have_errs:
        dof = max(t.size - 3, 1)
        cov = cov * ss_res / dof
    perr = np.sqrt(np.maximum(np.diag(cov), 0.0))

    span_ok = (t[-1] - t[0]) * g >= 2.0
    amp_scale = 3.0 * (float(np.median(e)) if have_errs else noise)
    degenerate = bool(abs(ti - tf) <= amp_scale) or not np.isfinite(g) or g <= 0
    return RelaxationFit(axis=axis, t_initial=ti, t_final=tf, gamma=g,
                         t_initial_err=float(perr[0]), t_final_err=float(perr[1]),
                         gamma_err=float(perr[2]), r_squared=r2,
                         residual_lag1=_lag1_autocorr(resid), n_points=t.size,
                         span_ok=bool(span_ok), degenerate=degenerate)


@dataclass(frozen=True)
class DiffusionFit:
    """Weighted linear fit MSD(t) = 2 D_s t + b over a time window."""

    axis: str
    d_s: float
    d_s_err: float
    intercept: float
    r_squared: float
    window: tuple[float, float]
    n_points: int
    not_diffusive: bool
    poor_linearity: bool

    @property
    def converged(self) -> bool:
        return not (self.not_diffusive or self.poor_linearity)


def fit_diffusion(times, msd, errs=None, window=None, axis: str = "") -> DiffusionFit:
    """Spatial diffusion coefficient from the long-time MSD slope.

    `window` restricts the fit to t in [window[0], window[1]] (the
    steady-state section); at least 10 points must remain.  A negative
    or zero slope sets `not_diffusive`; R^2 < 0.99 on the window sets
    `poor_linearity` (ballistic or trapped transport).
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(msd, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise ValueError("times and msd must be 1D arrays of equal length")
    mask = np.ones_like(t, dtype=bool)
    if window is not None:
        lo, hi = window
        mask = (t >= lo) & (t <= hi)
    t = t[mask]
    y = y[mask]
    if t.size < 10:
        raise InsufficientDataError(f"need at least 10 points in the fit window, got {t.size}")
    if errs is not None:
        e = np.asarray(errs, dtype=float)[mask]
        w = np.where(e > 0, 1.0 / np.where(e > 0, e, 1.0), 0.0)
        if not np.any(w > 0):
            w = np.ones_like(y)
    else:
        w = np.ones_like(y)

    # weighted least squares for y = a + s t
    wsum = np.sum(w**2)
    tw = np.sum(w**2 * t) / wsum
    yw = np.sum(w**2 * y) / wsum
    stt = np.sum((w * (t - tw)) ** 2)
    if stt == 0:
        raise AnalysisError("degenerate time window for diffusion fit")
    slope = float(np.sum(w**2 * (t - tw) * (y - yw)) / stt)
    intercept = float(yw - slope * tw)
    model = intercept + slope * t
    ss_res = float(np.sum((w * (y - model)) ** 2))
    ss_tot = float(np.sum((w * (y - yw)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    slope_var = 1.0 / stt
    if errs is None:
        slope_var *= ss_res / max(t.size - 2, 1)
    slope_err = float(np.sqrt(slope_var))

    return DiffusionFit(axis=axis, d_s=slope / 2.0, d_s_err=slope_err / 2.0,
                        intercept=intercept, r_squared=r2,
                        window=(float(t[0]), float(t[-1])), n_points=t.size,
                        not_diffusive=bool(slope <= 0),
                        poor_linearity=bool(r2 < 0.99))


@dataclass(frozen=True)
class DriftFit:
    """Drift-method friction: slope of <v_j> vs F_j through the origin."""

    axis: str
    alpha: float
    alpha_err: float
    forces: tuple
    responses: tuple
    response_errs: tuple
    max_rel_residual: float


def fit_drift_response(forces, responses, response_errs=None, axis: str = "",
                       linearity_tol: float = 0.10) -> DriftFit:
    """Friction coefficient from steady drift velocities under known forces.

    Fits <v> = F/alpha through the origin over >= 3 probe forces and
    validates linearity: a residual beyond `linearity_tol` of the
    response scale raises DriftCalibrationError (forces outside the
    linear-response window), as does a response indistinguishable from
    zero or a zero probe force (ill-posed).  A residual is only counted
    as nonlinearity when it also exceeds three times its own standard
    error; noise consistent with the stated uncertainties is not
    evidence of curvature.
    """
    f = np.asarray(forces, dtype=float)
    v = np.asarray(responses, dtype=float)
    if f.shape != v.shape or f.ndim != 1:
        raise ValueError("forces and responses must be 1D arrays of equal length")
    if f.size < 3:
        raise InsufficientDataError(f"need at least 3 probe forces, got {f.size}")
    if np.any(f == 0.0):
        raise DriftCalibrationError("probe force F = 0 makes the drift estimator ill-posed")
    if response_errs is not None:
        e = np.asarray(response_errs, dtype=float)
        if np.all(e > 0) and np.all(np.abs(v) < 2.0 * e):
            raise DriftCalibrationError(
                "forces too small: drift response indistinguishable from zero at 2 sigma")
        w = np.where(e > 0, 1.0 / np.where(e > 0, e, 1.0), 1.0)
    else:
        e = np.zeros_like(v)
        w = np.ones_like(v)

    denom = float(np.sum((w * f) ** 2))
    mobility = float(np.sum(w**2 * f * v) / denom)
    if mobility <= 0:
        raise DriftCalibrationError(
            f"non-positive mobility {mobility:.3g}: responses inconsistent with friction")
    resid = v - mobility * f
    scale = float(np.max(np.abs(mobility * f)))
    max_rel = float(np.max(np.abs(resid)) / scale) if scale > 0 else np.inf
    significant = np.abs(resid) > 3.0 * e if np.any(e > 0) else np.ones_like(resid, bool)
    if max_rel > linearity_tol and bool(np.any(significant & (np.abs(resid) > linearity_tol * scale))):
        raise DriftCalibrationError(
            f"response nonlinear at {max_rel:.1%} (tolerance {linearity_tol:.0%}): "
            "probe forces too large for linear response")
    mobility_err = float(np.sqrt(1.0 / denom))
    if response_errs is None:
        dof = max(f.size - 1, 1)
        mobility_err = float(np.sqrt(np.sum(resid**2) / dof / np.sum(f**2)))
    alpha = 1.0 / mobility
    return DriftFit(axis=axis, alpha=alpha, alpha_err=mobility_err / mobility**2,
                    forces=tuple(f), responses=tuple(v), response_errs=tuple(e),
                    max_rel_residual=max_rel)


def friction_drift(params: LatticeParams, schedule: SimulationSchedule,
                   init: InitialDistribution, axis: str, forces,
                   settle_fraction: float = 0.5, n_workers: int = 1) -> DriftFit:
    """Drift-method friction measurement along one axis.

    Runs one ensemble per probe force with the force applied along
    `axis` from t = 0 (start `init` near the steady state so there is
    no transient to fit), time-averages each trajectory's velocity over
    the last (1 - settle_fraction) of the run, and fits the mean drift
    against force through the origin.  Per-force master seeds are
    derived from schedule.master_seed so the probe runs are mutually
    independent and reproducible.
    """
    if axis not in AXES:
        raise ValueError(f"axis must be one of {AXES}, got {axis!r}")
    a = AXES.index(axis)
    f = np.asarray(forces, dtype=float)
    if f.size < 3:
        raise InsufficientDataError(f"need at least 3 probe forces, got {f.size}")
    if np.any(f == 0.0):
        raise DriftCalibrationError("probe force F = 0 makes the drift estimator ill-posed")
    responses = np.empty(f.size)
    response_errs = np.empty(f.size)
    for i, force in enumerate(f):
        seed = int(np.random.SeedSequence(schedule.master_seed, spawn_key=(10_000 + i,))
                   .generate_state(1, dtype=np.uint64)[0] >> 1)
        fvec = (float(force), 0.0) if a == 0 else (0.0, float(force))
        sched_f = SimulationSchedule(
            dt=schedule.dt, n_steps=schedule.n_steps, sample_steps=schedule.sample_steps,
            n_traj=schedule.n_traj, master_seed=seed, external_force=fvec,
            elastic_scattering=schedule.elastic_scattering)
        series = ensemble_run(params, sched_f, init, n_workers=n_workers,
                              keep_trajectories=True)
        t_start = settle_fraction * series.times[-1]
        sel = series.times >= t_start
        if np.count_nonzero(sel) < 2:
            raise InsufficientDataError("settle window leaves fewer than 2 sample times")
        v_traj = series.momenta[sel, :, a].mean(axis=0)
        responses[i] = v_traj.mean()
        response_errs[i] = v_traj.std(ddof=1) / np.sqrt(v_traj.size)
    return fit_drift_response(f, responses, response_errs, axis=axis)


def friction_einstein(temperature: float, d_s: float,
                      temperature_err: float = 0.0, d_s_err: float = 0.0,
                      axis: str = "") -> tuple[float, float]:
    """Einstein-relation friction alpha = k_B T / D_s with propagated error."""
    if not (np.isfinite(temperature) and temperature > 0):
        raise AnalysisError(f"temperature must be positive and finite, got {temperature}")
    if not (np.isfinite(d_s) and d_s > 0):
        raise AnalysisError(f"diffusion coefficient must be positive and finite, got {d_s}")
    alpha = temperature / d_s
    err = alpha * np.hypot(
        temperature_err / temperature if temperature_err else 0.0,
        d_s_err / d_s if d_s_err else 0.0,
    )
    return float(alpha), float(err)


@dataclass(frozen=True)
class TransportResult:
    """Transport coefficients of one axis at one parameter point."""

    axis: str
    d_s: float
    d_s_err: float
    alpha_drift: float
    alpha_drift_err: float
    alpha_einstein: float
    alpha_einstein_err: float

    @property
    def estimator_agreement(self) -> float:
        """Relative discrepancy |drift - einstein| / mean of the two."""
        if not (np.isfinite(self.alpha_drift) and np.isfinite(self.alpha_einstein)):
            return np.nan
        mean = 0.5 * (self.alpha_drift + self.alpha_einstein)
        return abs(self.alpha_drift - self.alpha_einstein) / mean if mean else np.nan


def classify_trapped(state: AtomState, params: LatticeParams) -> bool:
    """True if the atom's total energy is below the lattice escape energy.

    Strict inequality: an atom exactly at the escape saddle energy is
    traveling.  Invariant under lattice-vector translations.
    """
    e = lattice.total_energy(params, state.sublevel, state.x, state.z, state.px, state.pz)
    return bool(e < lattice.escape_energy(params, state.sublevel))


def composition_settled_start(series: EnsembleSeries, tol: float = 0.02) -> float:
    """Earliest sample time from which the trapped fraction stays settled.

    The trapped/traveling composition relaxes much more slowly than the
    kinetic temperatures, and transport estimates taken while it still
    drifts are biased (extra travelers inflate the apparent diffusion).
    Returns the time of the first sample after the last excursion of
    the trapped fraction beyond max(tol, two binomial standard errors)
    of its final value, capped so at least 40% of the record remains.
    """
    f = np.asarray(series.trapped_fraction, dtype=float)
    if f.size == 0 or not np.all(np.isfinite(f)):
        return float(series.times[0])
    fin = f[-1]
    band = max(tol, 2.0 * np.sqrt(max(fin * (1.0 - fin), 0.0) / max(series.n_traj, 1)))
    bad = np.nonzero(np.abs(f - fin) > band)[0]
    start = 0 if bad.size == 0 else int(bad[-1]) + 1
    start = min(start, int(np.ceil(0.6 * (f.size - 1))))
    return float(series.times[start])


def steady_state_check(series: EnsembleSeries, t_start: float) -> tuple[float, bool]:
    """KS stability of the velocity distribution beyond t_start.

    Compares per-axis velocity snapshots at the midpoint and the end of
    the steady window with a two-sample KS test; returns (min p-value,
    stable) with stable = p > 0.05.  Requires keep_trajectories data.
    """
    if not series.has_trajectories:
        raise ValueError("steady_state_check needs a keep_trajectories=True series")
    idx = np.nonzero(series.times >= t_start)[0]
    if idx.size < 2:
        raise InsufficientDataError("steady window contains fewer than 2 sample times")
    i_mid = idx[idx.size // 2]
    i_end = idx[-1]
    if i_mid == i_end:
        raise InsufficientDataError("steady window too short to split")
    p = min(
        stats.ks_2samp(series.momenta[i_mid, :, a], series.momenta[i_end, :, a]).pvalue
        for a in range(2)
    )
    return float(p), bool(p > 0.05)


@dataclass(frozen=True)
class PopulationSplit:
    """Trapped/traveling decomposition of an ensemble over time."""

    times: np.ndarray
    trapped_fraction: np.ndarray
    final_trapped_fraction: float
    min_traveling_count: int
    min_trapped_count: int
    traveling_relaxation: dict
    trapped_relaxation: dict
    travelers_brownian_consistent: dict
    trapped_rate_suppressed: dict
    insufficient_travelers: bool
    insufficient_trapped: bool


def subpopulation_report(series: EnsembleSeries, params: LatticeParams,
                         alpha_over_m: dict, min_count: int = 100) -> PopulationSplit:
    """Per-class cooling statistics and consistency verdicts.

    Classifies every trajectory at every sample time (trapped = total
    energy below the escape energy), tracks the trapped fraction, fits
    the per-class temperature relaxation for both classes and each
    axis, and issues two qualitative verdicts per axis given the
    ensemble friction alpha_over_m = {axis: alpha/M}:

    - travelers_brownian_consistent: (2 alpha/M) / Gamma_T(traveling)
      within [1/3, 3] (free Brownian motion predicts exactly 2).
    - trapped_rate_suppressed: the trapped-class damping rate is at
      most alpha_over_m / 5 (trapped atoms do not Sisyphus-cool), or
      the trapped-class series shows no resolvable decay at all.

    A class whose membership drops below `min_count` at any used sample
    time sets the corresponding insufficient flag and nan verdicts.
    """
    if not series.has_trajectories:
        raise ValueError("subpopulation_report needs a keep_trajectories=True series")
    u_esc = lattice.escape_energy(params, 0.5)
    energy = lattice.total_energy(
        params, series.sublevels, series.positions[:, :, 0], series.positions[:, :, 1],
        series.momenta[:, :, 0], series.momenta[:, :, 1])
    trapped = energy < u_esc
    frac = trapped.mean(axis=1)
    counts_trap = trapped.sum(axis=1)
    counts_trav = series.n_traj - counts_trap

    def class_series(mask):
        temps = np.full((2, len(series.times)), np.nan)
        for si in range(len(series.times)):
            members = mask[si]
            if members.sum() >= 2:
                for a in range(2):
                    v = series.momenta[si, members, a]
                    temps[a, si] = np.var(v)
        return temps

    t_trav = class_series(~trapped)
    t_trap = class_series(trapped)

    def fit_class(temps):
        fits = {}
        for a, name in enumerate(AXES):
            good = np.isfinite(temps[a])
            if good.sum() >= 5:
                try:
                    fits[name] = fit_relaxation(series.times[good], temps[a, good], axis=name)
                except (AnalysisError, ValueError):
                    fits[name] = None
            else:
                fits[name] = None
        return fits

    trav_fits = fit_class(t_trav)
    trap_fits = fit_class(t_trap)
    insufficient_trav = bool(np.min(counts_trav) < min_count)
    insufficient_trap = bool(np.min(counts_trap) < min_count)

    brownian = {}
    suppressed = {}
    for name in AXES:
        am = alpha_over_m.get(name, np.nan)
        tf = trav_fits[name]
        if insufficient_trav or tf is None or tf.degenerate or not np.isfinite(am):
            brownian[name] = None
        else:
            ratio = 2.0 * am / tf.gamma
            brownian[name] = bool(1.0 / 3.0 <= ratio <= 3.0)
        pf = trap_fits[name]
        if insufficient_trap or not np.isfinite(am):
            suppressed[name] = None
        elif pf is None or pf.degenerate:
            suppressed[name] = True  # no resolvable decay at all
        else:
            suppressed[name] = bool(pf.gamma <= am / 5.0)

    return PopulationSplit(
        times=series.times.copy(), trapped_fraction=frac,
        final_trapped_fraction=float(frac[-1]),
        min_traveling_count=int(np.min(counts_trav)),
        min_trapped_count=int(np.min(counts_trap)),
        traveling_relaxation=trav_fits, trapped_relaxation=trap_fits,
        travelers_brownian_consistent=brownian, trapped_rate_suppressed=suppressed,
        insufficient_travelers=insufficient_trav, insufficient_trapped=insufficient_trap,
    )


def result_record(point_index: int, sweep_value: float, params: LatticeParams,
                  axis: str, relaxation: RelaxationFit, diffusion: DiffusionFit | None,
                  transport: TransportResult | None, final_trapped_fraction: float,
                  steady_p_value: float = np.nan) -> dict:
    """Canonical per-(parameter point, axis) results mapping (one CSV row)."""
    rec = {
        "point": point_index,
        "sweep_value": sweep_value,
        "axis": axis,
        "pump_rate_per_beam": params.pump_rate_per_beam,
        "light_shift_per_beam": params.light_shift_per_beam,
        "detuning": params.detuning,
        "T_initial": relaxation.t_initial,
        "T_final": relaxation.t_final,
        "T_final_err": relaxation.t_final_err,
        "gamma_T": relaxation.gamma,
        "gamma_T_err": relaxation.gamma_err,
        "relaxation_r2": relaxation.r_squared,
        "relaxation_degenerate": int(relaxation.degenerate),
        "D_s": np.nan, "D_s_err": np.nan, "diffusion_r2": np.nan,
        "alpha_drift": np.nan, "alpha_drift_err": np.nan,
        "alpha_einstein": np.nan, "alpha_einstein_err": np.nan,
        "trapped_fraction_final": final_trapped_fraction,
        "steady_p_value": steady_p_value,
    }
    if diffusion is not None:
        rec["D_s"] = diffusion.d_s
        rec["D_s_err"] = diffusion.d_s_err
        rec["diffusion_r2"] = diffusion.r_squared
    if transport is not None:
        rec["alpha_drift"] = transport.alpha_drift
        rec["alpha_drift_err"] = transport.alpha_drift_err
        rec["alpha_einstein"] = transport.alpha_einstein
        rec["alpha_einstein_err"] = transport.alpha_einstein_err
    return rec
