"""Sympathetic-cooling decay rates for lattice atoms against the Fermi sea.

The on-site band-1 -> band-0 decay rate Gamma enters the simulations as a
dimensionless parameter (units of eps_F).  This module also provides the
leading-order closed form for Gamma in laboratory units, and the spatial
envelope that correlates decay between different sites in shallow lattices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .model import LatticeSpec

# CODATA 2018
HBAR_SI = 1.054571817e-34          # J s
ATOMIC_MASS_SI = 1.66053906660e-27  # kg
ELECTRON_MASS_SI = 9.1093837015e-31  # kg
BOHR_RADIUS_SI = 5.29177210903e-11  # m
HARTREE_SI = 4.3597447222071e-18   # J

MASS_K40_AMU = 39.963998166


@dataclass(frozen=True)
class DissipationSpec:
    """Cooling-channel parameters for the combined loading scheme.

    gamma:          on-site decay rate (units of eps_F)
    offdiag_mode:   'diagonal' (default, deep lattice) or 'envelope'
                    (spatially correlated rates, exposed for study only)
    envelope_ratio: omega/omega_R used by envelope mode; taken from the
                    lattice when omitted
    """

    gamma: float
    offdiag_mode: str = "diagonal"
    envelope_ratio: float | None = None

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.offdiag_mode not in ("diagonal", "envelope"):
            raise ValueError(f"unknown offdiag_mode {self.offdiag_mode!r}")
        if self.envelope_ratio is not None and self.envelope_ratio <= 0:
            raise ValueError("envelope_ratio must be positive")


def envelope(xi: float) -> float:
    """Spatial decay-rate envelope F(xi) = 3 (2 xi cos xi + (xi^2 - 2) sin xi) / xi^3.

    F(0) = 1 (evaluated by series, the singularity is removable) and
    F(xi) -> 3 sin(xi)/xi for large xi, so widely separated sites decay
    independently.
    """
    if xi < 0:
        raise ValueError("xi must be non-negative")
    if xi < 1e-3:
        x2 = xi * xi
        return 1.0 - 0.3 * x2 + x2 * x2 / 56.0
    return 3.0 * (2.0 * xi * math.cos(xi) + (xi * xi - 2.0) * math.sin(xi)) \
        / xi**3


def gamma_matrix(spec: DissipationSpec, lattice: "LatticeSpec") -> np.ndarray:
    """Site-resolved decay-rate matrix Gamma_{alpha,beta}.

    Diagonal mode returns Gamma * I.  Envelope mode fills off-diagonals with
    Gamma * F(pi sqrt(omega/omega_R) |alpha - beta|); for deep lattices these
    vanish and the two modes coincide.
    """
    m = lattice.sites
    if spec.offdiag_mode == "diagonal":
        return spec.gamma * np.eye(m)
    ratio = spec.envelope_ratio
    if ratio is None:
        ratio = lattice.omega / lattice.recoil
    scale = math.pi * math.sqrt(ratio)
    sep = np.abs(np.subtract.outer(np.arange(m), np.arange(m)))
    out = np.empty((m, m))
    for d in range(m):
        out[sep == d] = spec.gamma * envelope(scale * d)
    return out


@dataclass(frozen=True)
class PhysicalRateInput:
    """Laboratory parameters for the on-site cooling rate.

    density_cm3:        reservoir density n_3D in cm^-3
    scattering_length:  interspecies s-wave scattering length in Bohr radii
    trap_frequency_khz: lattice oscillator frequency omega/2pi in kHz
    mass_amu:           atomic mass in atomic mass units
    """

    density_cm3: float
    scattering_length: float
    trap_frequency_khz: float
    mass_amu: float

    def __post_init__(self):
        for name in ("density_cm3", "scattering_length",
                     "trap_frequency_khz", "mass_amu"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def _gamma_from_base_units(g, n, m, a0, hbar):
    # Gamma = g^2 n m / (pi sqrt(2) a0 hbar^3) * 2/(3e), angular frequency
    return g * g * n * m / (math.pi * math.sqrt(2.0) * a0 * hbar**3) \
        * 2.0 / (3.0 * math.e)


def gamma_onsite_physical(inp: PhysicalRateInput, unit_system: str = "si") -> float:
    """On-site cooling rate Gamma/2pi in kHz from laboratory parameters.

    Uses the leading closed form in eps_F/omega with the contact coupling
    g = 4 pi hbar^2 a_s / m and oscillator length a0 = sqrt(hbar / (m omega)).
    The SI and atomic-unit evaluation paths agree to rounding, which checks
    the dimensional bookkeeping.
    """
    omega_si = 2.0 * math.pi * inp.trap_frequency_khz * 1e3
    if unit_system == "si":
        m = inp.mass_amu * ATOMIC_MASS_SI
        a_s = inp.scattering_length * BOHR_RADIUS_SI
        n = inp.density_cm3 * 1e6
        a0 = math.sqrt(HBAR_SI / (m * omega_si))
        g = 4.0 * math.pi * HBAR_SI**2 * a_s / m
        gamma = _gamma_from_base_units(g, n, m, a0, HBAR_SI)
    elif unit_system == "atomic":
        time_au = HBAR_SI / HARTREE_SI
        m = inp.mass_amu * ATOMIC_MASS_SI / ELECTRON_MASS_SI
        a_s = inp.scattering_length
        n = inp.density_cm3 * 1e6 * BOHR_RADIUS_SI**3
        omega = omega_si * time_au
        a0 = 1.0 / math.sqrt(m * omega)
        g = 4.0 * math.pi * a_s / m
        gamma = _gamma_from_base_units(g, n, m, a0, 1.0) / time_au
    else:
        raise ValueError(f"unknown unit system {unit_system!r}")
    return gamma / (2.0 * math.pi) / 1e3
