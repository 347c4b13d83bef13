"""Unit system and trap observables.

Everything inside the engine is carried in Hartree atomic units; conversion
to and from experimental units happens only at the I/O boundary, through the
constants pinned below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# ---------------------------------------------------------------------------
# Physical constants (single source of truth, CODATA 2018)
# ---------------------------------------------------------------------------

SPEED_OF_LIGHT = 299792458.0          # m/s (exact)
PLANCK = 6.62607015e-34               # J s (exact)
EPSILON_0 = 8.8541878128e-12          # F/m
HARTREE_JOULE = 4.35974472221e-18     # J
BOHR_METER = 5.29177210903e-11        # m
ELECTRON_MASS_KG = 9.1093837015e-31   # kg
ATOMIC_MASS_KG = 1.66053906660e-27    # kg

# Derived energy scales (derivation keeps conversion paths consistent).
HARTREE_HZ = HARTREE_JOULE / PLANCK                          # Hz per hartree
HARTREE_CM1 = HARTREE_JOULE / (PLANCK * SPEED_OF_LIGHT) / 100.0  # cm^-1 per hartree
AMU_TO_AU = ATOMIC_MASS_KG / ELECTRON_MASS_KG                # electron masses per amu

# Polarizability conversion, hard-pinned so trap depths in Hz/(W/cm^2) match
# the accepted experimental bookkeeping exactly.
ALPHA_AU_TO_HZ_PER_WCM2 = 4.6883572e-2

# Atomic unit of power, used for the "rate" kind.
POWER_AU_WATT = 2.0 * math.pi * HARTREE_JOULE ** 2 / PLANCK


class UnitError(ValueError):
    """Raised on a kind/unit mismatch or an unknown unit."""


# Each kind maps unit -> (to_canonical, from_canonical). Canonical units are
# the atomic-unit member of each kind (hartree, bohr, ...). Most conversions
# are linear; the photon-wavelength unit is reciprocal, so conversions are
# expressed as callables rather than bare factors.
_KINDS: dict[str, dict[str, tuple]] = {
    "energy": {
        "hartree": (lambda v: v, lambda v: v),
        "cm-1": (lambda v: v / HARTREE_CM1, lambda v: v * HARTREE_CM1),
        "Hz": (lambda v: v / HARTREE_HZ, lambda v: v * HARTREE_HZ),
        # photon wavelength in nm: E[cm-1] = 1e7 / lambda[nm]
        "nm": (
            lambda v: (1.0e7 / v) / HARTREE_CM1,
            lambda v: 1.0e7 / (v * HARTREE_CM1),
        ),
    },
    "length": {
        "bohr": (lambda v: v, lambda v: v),
        "nm": (lambda v: v * 1.0e-9 / BOHR_METER, lambda v: v * BOHR_METER * 1.0e9),
    },
    "frequency": {
        "Hz": (lambda v: v, lambda v: v),
        "MHz": (lambda v: v * 1.0e6, lambda v: v * 1.0e-6),
        "GHz": (lambda v: v * 1.0e9, lambda v: v * 1.0e-9),
    },
    "polarizability": {
        "au": (lambda v: v, lambda v: v),
        "Hz/(W/cm2)": (
            lambda v: v / ALPHA_AU_TO_HZ_PER_WCM2,
            lambda v: v * ALPHA_AU_TO_HZ_PER_WCM2,
        ),
    },
    "intensity": {
        "W/cm2": (lambda v: v, lambda v: v),
        "W/m2": (lambda v: v * 1.0e-4, lambda v: v * 1.0e4),
    },
    "rate": {
        "W": (lambda v: v, lambda v: v),
        "mW": (lambda v: v * 1.0e-3, lambda v: v * 1.0e3),
        "au": (lambda v: v * POWER_AU_WATT, lambda v: v / POWER_AU_WATT),
    },
}


@dataclass(frozen=True)
class Quantity:
    """A value tagged with a physical kind and a unit belonging to that kind."""

    value: float
    kind: str
    unit: str

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise UnitError(f"unknown kind {self.kind!r}")
        if self.unit not in _KINDS[self.kind]:
            raise UnitError(f"unit {self.unit!r} does not belong to kind {self.kind!r}")

    def to(self, target_unit: str) -> "Quantity":
        return convert(self, target_unit)


def convert(q: Quantity, target_unit: str) -> Quantity:
    """Convert a quantity to another unit of the same kind.

    Conversion always routes through the canonical (atomic) unit of the
    quantity's kind, which keeps composed conversions path-independent.
    Zero converts to zero for every unit pair except photon wavelength,
    where zero is unphysical.
    """
    units = _KINDS[q.kind]
    if target_unit not in units:
        raise UnitError(f"unit {target_unit!r} does not belong to kind {q.kind!r}")
    if q.unit == target_unit:
        return q
    to_canon, _ = units[q.unit]
    _, from_canon = units[target_unit]
    return Quantity(from_canon(to_canon(q.value)), q.kind, target_unit)


def energy_to_au(value: float, unit: str) -> float:
    """Shorthand: energy in any supported unit -> hartree."""
    return convert(Quantity(value, "energy", unit), "hartree").value


def au_to_cm1(value_hartree: float) -> float:
    return value_hartree * HARTREE_CM1


def cm1_to_au(value_cm1: float) -> float:
    return value_cm1 / HARTREE_CM1


# ---------------------------------------------------------------------------
# Trap observables
# ---------------------------------------------------------------------------

def trap_depth(alpha_real: float, intensity: float) -> float:
    """Light shift U_dip = -Re(alpha) I / (2 eps0 c), returned in Hz.

    Parameters
    ----------
    alpha_real : float
        Real part of the polarizability, atomic units.
    intensity : float
        Laser intensity in W/cm^2, must be >= 0.

    Returns
    -------
    float
        Level shift in Hz. Positive polarizability gives a negative
        (attractive) shift.
    """
    if intensity < 0.0:
        raise ValueError(f"intensity must be >= 0, got {intensity}")
    return -ALPHA_AU_TO_HZ_PER_WCM2 * alpha_real * intensity


def scattering_power(alpha_imag: float, omega: float, intensity: float) -> float:
    """Absorbed power P_abs = omega Im(alpha) I / (eps0 c), in watts.

    Parameters
    ----------
    alpha_imag : float
        Imaginary part of the polarizability, atomic units.
    omega : float
        Photon energy in hartree, must be > 0.
    intensity : float
        Laser intensity in W/cm^2, must be >= 0.

    Notes
    -----
    P_abs equals twice the (angular-frequency-weighted) light shift of the
    imaginary part, so it is expressed through the same pinned conversion
    constant used by :func:`trap_depth`; linear both in omega and in the
    intensity.
    """
    if omega <= 0.0:
        raise ValueError(f"omega must be > 0, got {omega}")
    if intensity < 0.0:
        raise ValueError(f"intensity must be >= 0, got {intensity}")
    # 2 * omega_rad * h * (K * Im(alpha) * I), with omega_rad = omega * E_h / hbar
    return (
        4.0 * math.pi * omega * HARTREE_JOULE
        * ALPHA_AU_TO_HZ_PER_WCM2 * alpha_imag * intensity
    )
