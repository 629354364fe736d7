"""Bipotential geometry of the 2D lin-perp-lin optical lattice.

Four beams of equal intensity propagate in the xOy and yOz planes: two
in the xOz... more precisely, the standard 3D lin-perp-lin tetrahedron
restricted to atomic motion in the xOz plane.  Beams 1 and 2 travel at
+-theta from the z axis in the xOz plane with y polarization; beams 3
and 4 travel at +-theta from the -z axis in the yOz plane with x
polarization.  On the y = 0 plane the total field has circular
components of intensity (per-beam units)

    s_+-(x, z) = 1/2 * [1 + cos^2(kx x) -+ 2 cos(kx x) sin(2 kz z)],

with kx = k sin(theta), kz = k cos(theta).  See docs/lattice_field.md
for the derivation.

A ground-state atom (J = 1/2) moving in this field sees one of two
light-shift potentials selected by its magnetic sublevel m = +-1/2:

    U_m(r) = Delta0' * (s_m + s_{-m}/3),

where Delta0' < 0 is the per-beam light shift and the 1 : 1/3 weights
are the Clebsch-Gordan factors of the J = 1/2 -> 3/2 transition.
Optical pumping transfers m -> -m at rate (2/9) * Gamma0' * s_{-m}.

All quantities are in recoil units (hbar = M = k = 1, see units.py);
sublevels are passed as m = +-0.5 or as the sign 2m = +-1, both
accepted everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError

# Branching weight of the sublevel-changing pump path: the sigma
# absorption Clebsch-Gordan factor 1/3 times the 2/3 branching of the
# excited state into the opposite ground sublevel.
PUMP_BRANCH = 2.0 / 9.0
CG_OPPOSITE = 1.0 / 3.0


def _default(value, fallback):
    return fallback if value is None else value


@dataclass(frozen=True)
class LatticeParams:
    """Laser and lattice parameters in recoil units.

    Attributes
    ----------
    theta : float
        Half-angle of the beam tetrahedron, 0 < theta < pi/2.  The
        lattice periods are lambda_x = lambda/sin(theta) along x and
        lambda_z = lambda/(2 cos(theta)) along z.
    gamma : float
        Natural width Gamma of the excited state (bookkeeping scale for
        the detuning; the dynamics depend only on detuning/gamma).
    detuning : float
        Laser detuning Delta < 0 (red).
    light_shift_per_beam : float
        Delta0' < 0, light shift of a single beam at a pure sigma site.
    pump_rate_per_beam : float
        Gamma0' > 0, photon-scattering rate scale of a single beam.

    The ratio light_shift/pump_rate must equal detuning/gamma to 1e-12
    (both derive from the same single-beam saturation parameter).
    """

    theta: float
    gamma: float
    detuning: float
    light_shift_per_beam: float
    pump_rate_per_beam: float

    def __post_init__(self):
        problems = []
        if not (0.0 < self.theta < 0.5 * np.pi):
            problems.append(("theta", f"must satisfy 0 < theta < pi/2, got {self.theta}"))
        if not (self.gamma > 0):
            problems.append(("gamma", f"must be positive, got {self.gamma}"))
        if not (self.detuning < 0):
            problems.append(("detuning", f"red detuning required (detuning < 0), got {self.detuning}"))
        if not (self.pump_rate_per_beam > 0):
            problems.append(("pump_rate_per_beam", f"must be positive, got {self.pump_rate_per_beam}"))
        if not (self.light_shift_per_beam < 0):
            problems.append(("light_shift_per_beam", f"must be negative for a red-detuned lattice, got {self.light_shift_per_beam}"))
        if not problems:
            lhs = self.light_shift_per_beam / self.pump_rate_per_beam
            rhs = self.detuning / self.gamma
            if abs(lhs - rhs) > 1e-12 * max(abs(lhs), abs(rhs)):
                problems.append((
                    "light_shift_per_beam/pump_rate_per_beam",
                    f"must equal detuning/gamma to 1e-12; got {lhs!r} vs {rhs!r}",
                ))
        if problems:
            raise ConfigError(problems)

    @property
    def kx(self) -> float:
        """x wavenumber k sin(theta) (k = 1 internally)."""
        return float(np.sin(self.theta))

    @property
    def kz(self) -> float:
        """z wavenumber k cos(theta)."""
        return float(np.cos(self.theta))

    @property
    def lambda_x(self) -> float:
        """Lattice period along x, lambda/sin(theta)."""
        return 2.0 * np.pi / self.kx

    @property
    def lambda_z(self) -> float:
        """Lattice period along z, lambda/(2 cos(theta))."""
        return np.pi / self.kz

    @property
    def well_depth(self) -> float:
        """Full modulation depth of either sublevel potential, (3/2)|Delta0'|."""
        return 1.5 * abs(self.light_shift_per_beam)

    @property
    def well_frequencies(self) -> tuple[float, float]:
        """Harmonic frequencies (omega_x, omega_z) at a potential minimum."""
        d = abs(self.light_shift_per_beam)
        return (self.kx * np.sqrt(2.0 * d), self.kz * np.sqrt(8.0 * d / 3.0))

    @property
    def max_pump_rate(self) -> float:
        """Upper bound on the pump rate over the cell, (4/9) Gamma0'."""
        return 2.0 * PUMP_BRANCH * self.pump_rate_per_beam

    @classmethod
    def create(cls, theta: float, gamma: float, detuning: float | None = None,
               light_shift_per_beam: float | None = None,
               pump_rate_per_beam: float | None = None) -> "LatticeParams":
        """Build params from any consistent pair of (detuning, Delta0', Gamma0').

        Exactly two of the three rate arguments must be given; the third
        is derived from light_shift/pump_rate = detuning/gamma.
        """
        given = [v is not None for v in (detuning, light_shift_per_beam, pump_rate_per_beam)]
        if sum(given) < 2:
            raise ConfigError([("lattice", "need at least two of detuning, light_shift_per_beam, pump_rate_per_beam")])
        if detuning is None:
            detuning = gamma * light_shift_per_beam / pump_rate_per_beam
        elif light_shift_per_beam is None:
            light_shift_per_beam = pump_rate_per_beam * detuning / gamma
        elif pump_rate_per_beam is None:
            pump_rate_per_beam = light_shift_per_beam * gamma / detuning
        return cls(theta=theta, gamma=gamma, detuning=detuning,
                   light_shift_per_beam=light_shift_per_beam,
                   pump_rate_per_beam=pump_rate_per_beam)

    @classmethod
    def from_intensity(cls, theta: float, gamma: float, detuning: float,
                       intensity: float) -> "LatticeParams":
        """Params from per-beam intensity I_L/I_sat at fixed detuning.

        Low-saturation single-beam forms:
            Gamma0' = (Gamma/2) * s0,   Delta0' = (Delta/2) * s0,
        with s0 = (I_L/I_sat) * Gamma^2 / (Gamma^2 + 4 Delta^2).
        """
        if not intensity > 0:
            raise ConfigError([("intensity", f"must be positive, got {intensity}")])
        s0 = intensity * gamma**2 / (gamma**2 + 4.0 * detuning**2)
        return cls(theta=theta, gamma=gamma, detuning=detuning,
                   light_shift_per_beam=0.5 * detuning * s0,
                   pump_rate_per_beam=0.5 * gamma * s0)


def _sign(sublevel) -> np.ndarray:
    """Normalize a sublevel spec (+-1/2 or +-1) to the sign 2m = +-1."""
    s = np.asarray(sublevel, dtype=float)
    out = np.where(np.abs(s) == 0.5, 2.0 * s, s)
    if not np.all(np.abs(out) == 1.0):
        raise ValueError(f"sublevel must be +-1/2 (or sign +-1), got {sublevel!r}")
    return out


def polarization_intensities(params: LatticeParams, x, z):
    """Intensities (s_plus, s_minus) of the circular field components.

    Normalized to single-beam units: a pure sigma+- site has s_+- = 2,
    and s_+ + s_- = 1 + cos^2(kx x) everywhere on the y = 0 plane.
    """
    c = np.cos(params.kx * np.asarray(x, dtype=float))
    s2 = np.sin(2.0 * params.kz * np.asarray(z, dtype=float))
    common = 0.5 * (1.0 + c * c)
    cross = c * s2
    return common - cross, common + cross


def potential(params: LatticeParams, sublevel, x, z):
    """Light-shift potential U_m(x, z) of ground sublevel m.

    U_m = Delta0' * (s_m + s_{-m}/3); negative everywhere for red
    detuning, with minima of depth 2|Delta0'| at the pure sigma sites
    of the matching handedness.
    """
    sign = _sign(sublevel)
    c = np.cos(params.kx * np.asarray(x, dtype=float))
    s2 = np.sin(2.0 * params.kz * np.asarray(z, dtype=float))
    # U_m = (2/3) Delta0' (1 + c^2 - sign * c * sin(2 kz z)), sign = 2m
    return (2.0 / 3.0) * params.light_shift_per_beam * (1.0 + c * c - sign * c * s2)


def pump_rate(params: LatticeParams, sublevel, x, z):
    """Optical-pumping rate gamma_{m -> -m}(x, z) = (2/9) Gamma0' s_{-m}."""
    sign = _sign(sublevel)
    c = np.cos(params.kx * np.asarray(x, dtype=float))
    s2 = np.sin(2.0 * params.kz * np.asarray(z, dtype=float))
    return _pump_fields(params, sign, c, s2)


def elastic_rate(params: LatticeParams, sublevel, x, z):
    """Sublevel-preserving (Rayleigh) photon-scattering rate.

    Gamma0' * (s_m + s_{-m}/9): the full sigma_m channel via the
    stretched excited state plus the non-transferring 1/3 branch of the
    sigma_{-m} channel.
    """
    sign = _sign(sublevel)
    c = np.cos(params.kx * np.asarray(x, dtype=float))
    s2 = np.sin(2.0 * params.kz * np.asarray(z, dtype=float))
    return _elastic_fields(params, sign, c, s2)


def _trig_fields(params: LatticeParams, x, z):
    """Shared trig factors (cos kx x, sin kx x, sin 2kz z, cos 2kz z).

    The stepping kernel evaluates force and pump rate at the same point
    every step; computing the four transcendentals once here roughly
    halves the per-step cost.
    """
    xk = params.kx * x
    zk = 2.0 * params.kz * z
    return np.cos(xk), np.sin(xk), np.sin(zk), np.cos(zk)


def _force_fields(params: LatticeParams, sign, c, sx, s2, c2):
    pref = (2.0 / 3.0) * params.light_shift_per_beam
    fx = pref * params.kx * sx * (2.0 * c - sign * s2)
    fz = pref * 2.0 * params.kz * sign * c * c2
    return fx, fz


def _pump_fields(params: LatticeParams, sign, c, s2):
    return PUMP_BRANCH * params.pump_rate_per_beam * (0.5 * (1.0 + c * c) + sign * c * s2)


def _elastic_fields(params: LatticeParams, sign, c, s2):
    common = 0.5 * (1.0 + c * c)
    cross = c * s2
    return params.pump_rate_per_beam * ((common - sign * cross) + (common + sign * cross) / 9.0)


def force(params: LatticeParams, sublevel, x, z):
    """Dipole force (-dU_m/dx, -dU_m/dz) on sublevel m."""
    sign = _sign(sublevel)
    c, sx, s2, c2 = _trig_fields(params, np.asarray(x, dtype=float), np.asarray(z, dtype=float))
    return _force_fields(params, sign, c, sx, s2, c2)


def well_bottom(params: LatticeParams, sublevel) -> tuple[float, float]:
    """Position of a potential minimum of sublevel m inside the base cell.

    Minima sit at cos(kx x) = +-1 with sin(2 kz z) = -sign(2m) * (+-1);
    this returns the x = 0 representative.
    """
    sign = float(_sign(sublevel))
    # at x = 0 (c = +1) the minimum needs sign * sin(2 kz z) = -1
    z = -sign * np.pi / (4.0 * params.kz)
    return 0.0, float(z)


@lru_cache(maxsize=None)
def _escape_scan(params: LatticeParams, sign: float, n_grid: int) -> tuple[float, float, float]:
    """Grid-scan saddle energies of U_m over one unit cell.

    Returns (barrier_x, barrier_z, escape_energy) where barrier_j is
    the lowest pass an atom must clear to translate along axis j:
    barrier_x = min over z of max over x of U, and symmetrically.
    escape_energy is the smaller of the two, the energy above which a
    state is classified as traveling.
    """
    xs = np.linspace(0.0, params.lambda_x, n_grid, endpoint=False)
    zs = np.linspace(0.0, params.lambda_z, n_grid, endpoint=False)
    u = potential(params, 0.5 * sign, xs[:, None], zs[None, :])
    barrier_x = float(np.min(np.max(u, axis=0)))
    barrier_z = float(np.min(np.max(u, axis=1)))
    return barrier_x, barrier_z, min(barrier_x, barrier_z)


def escape_energy(params: LatticeParams, sublevel, n_grid: int = 1025) -> float:
    """Lowest saddle energy of U_m; above it the lattice is percolating.

    Computed by a grid scan (converged to ~1e-5 relative at the default
    resolution) rather than from the closed form, so it stays correct
    if the potential is edited.
    """
    sign = float(_sign(sublevel))
    return _escape_scan(params, sign, n_grid)[2]


def escape_barriers(params: LatticeParams, sublevel, n_grid: int = 1025) -> tuple[float, float]:
    """Per-axis translation barriers (barrier_x, barrier_z) of U_m."""
    sign = float(_sign(sublevel))
    bx, bz, _ = _escape_scan(params, sign, n_grid)
    return bx, bz


def total_energy(params: LatticeParams, sublevel, x, z, px, pz):
    """Kinetic plus potential energy of a point in phase space (M = 1)."""
    px = np.asarray(px, dtype=float)
    pz = np.asarray(pz, dtype=float)
    return 0.5 * (px * px + pz * pz) + potential(params, sublevel, x, z)
