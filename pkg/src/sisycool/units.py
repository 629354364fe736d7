"""Recoil-unit conventions and conversion to laboratory units.

Everything inside the package uses recoil units: hbar = M = k = k_B = 1,
where k = 2*pi/lambda is the lattice-laser wavenumber and M the atomic
mass.  In these units the recoil momentum is 1, the recoil energy is
E_r = hbar^2 k^2 / (2M) = 1/2, and the recoil angular frequency is
omega_r = E_r/hbar = 1/2.  Times are measured in M/(hbar k^2), lengths
in 1/k, velocities in hbar k / M, temperatures in hbar^2 k^2/(M k_B).

`UnitSystem` converts between these internal numbers and SI quantities
once the laser wavelength and atomic mass are known.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HBAR = 1.054571817e-34  # J s
K_B = 1.380649e-23  # J/K
ATOMIC_MASS = 1.66053906892e-27  # kg

# Internal values of the recoil scales (hbar = M = k = k_B = 1).
RECOIL_ENERGY = 0.5
RECOIL_FREQUENCY = 0.5

_KINDS = (
    "length",
    "time",
    "rate",
    "velocity",
    "momentum",
    "energy",
    "temperature",
    "diffusion",
    "force",
    "friction",
)


@dataclass(frozen=True)
class UnitSystem:
    """Conversion between internal recoil units and SI.

    Parameters
    ----------
    wavelength : float
        Lattice-laser wavelength in meters.
    mass : float
        Atomic mass in kilograms.
    """

    wavelength: float
    mass: float

    def __post_init__(self):
        if not (self.wavelength > 0 and np.isfinite(self.wavelength)):
            raise ValueError("wavelength must be positive and finite")
        if not (self.mass > 0 and np.isfinite(self.mass)):
            raise ValueError("mass must be positive and finite")

    @property
    def wavenumber(self) -> float:
        return 2.0 * np.pi / self.wavelength

    @property
    def length_unit(self) -> float:
        """Meters per internal length unit (1/k)."""
        return 1.0 / self.wavenumber

    @property
    def time_unit(self) -> float:
        """Seconds per internal time unit (M / hbar k^2)."""
        return self.mass / (HBAR * self.wavenumber**2)

    @property
    def velocity_unit(self) -> float:
        """m/s per internal velocity unit (hbar k / M), the recoil velocity."""
        return HBAR * self.wavenumber / self.mass

    @property
    def momentum_unit(self) -> float:
        """kg m/s per internal momentum unit (hbar k)."""
        return HBAR * self.wavenumber

    @property
    def energy_unit(self) -> float:
        """Joules per internal energy unit (hbar^2 k^2 / M = 2 E_r)."""
        return HBAR**2 * self.wavenumber**2 / self.mass

    @property
    def temperature_unit(self) -> float:
        """Kelvin per internal temperature unit."""
        return self.energy_unit / K_B

    @property
    def recoil_energy(self) -> float:
        """Recoil energy in Joules."""
        return RECOIL_ENERGY * self.energy_unit

    @property
    def recoil_frequency(self) -> float:
        """Recoil angular frequency omega_r in rad/s."""
        return RECOIL_FREQUENCY / self.time_unit

    def _factor(self, kind: str) -> float:
        if kind == "length":
            return self.length_unit
        if kind == "time":
            return self.time_unit
        if kind == "rate":
            return 1.0 / self.time_unit
        if kind == "velocity":
            return self.velocity_unit
        if kind == "momentum":
            return self.momentum_unit
        if kind == "energy":
            return self.energy_unit
        if kind == "temperature":
            return self.temperature_unit
        if kind == "diffusion":
            return self.length_unit**2 / self.time_unit
        if kind == "force":
            return self.energy_unit * self.wavenumber
        if kind == "friction":
            # alpha has dimension mass/time; internally quoted as alpha/M in rate units
            return self.mass / self.time_unit
        raise ValueError(f"unknown quantity kind {kind!r}; expected one of {_KINDS}")

    def to_physical(self, value, kind: str):
        """Convert an internal value to SI units of the given `kind`."""
        return np.asarray(value, dtype=float) * self._factor(kind) if np.ndim(value) else float(value) * self._factor(kind)

    def from_physical(self, value, kind: str):
        """Convert an SI value of the given `kind` to internal units."""
        return np.asarray(value, dtype=float) / self._factor(kind) if np.ndim(value) else float(value) / self._factor(kind)

    @classmethod
    def from_config(cls, wavelength_nm: float, mass_amu: float) -> "UnitSystem":
        return cls(wavelength=wavelength_nm * 1e-9, mass=mass_amu * ATOMIC_MASS)
