"""Physical model: reservoir, lattice, couplings, states, observables.

Code units throughout: hbar = m = 1 and the reservoir Fermi energy is the
energy unit (eps_F = 1), so the Fermi wavevector is k_F = sqrt(2) and times
are measured in 1/eps_F.  The box length then follows from the particle
number alone, L = N*pi/k_F, and all remaining lengths (lattice spacing,
oscillator length) are expressed in these units.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .cooling import DissipationSpec
from .schedule import DriveSchedule

FERMI_ENERGY = 1.0
FERMI_K = math.sqrt(2.0)

# flag a lattice that is too shallow for the two-band, no-tunneling picture
DEEP_LATTICE_MIN_RATIO = 4.0


class ShallowLatticeWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ReservoirSpec:
    """Free 1D Fermi gas acting as atom source and T=0 bath.

    particles:  number N of reservoir fermions (fills the N lowest |k| modes)
    mode_count: number K of plane-wave modes kept on the momentum grid,
                K odd and K >= N
    """

    particles: int
    mode_count: int

    def __post_init__(self):
        if self.particles < 0:
            raise ValueError("particles must be non-negative")
        if self.mode_count < 1:
            raise ValueError("mode_count must be positive")
        if self.mode_count % 2 == 0:
            raise ValueError(
                "mode_count must be odd so the momentum grid is symmetric"
            )
        if self.particles > self.mode_count:
            raise ValueError("particles cannot exceed mode_count")

    @property
    def box_length(self) -> float:
        # eps_F = 1 pins the density: k_F = pi * n_1D with n_1D = N / L
        return self.particles * math.pi / FERMI_K

    @property
    def density(self) -> float:
        return FERMI_K / math.pi

    @property
    def fermi_k(self) -> float:
        return FERMI_K

    @property
    def fermi_energy(self) -> float:
        return FERMI_ENERGY


@dataclass(frozen=True)
class LatticeSpec:
    """Deep two-band optical lattice in the harmonic-oscillator approximation.

    sites:        number of lattice sites M
    spacing:      site spacing d = lambda/2 (code units)
    omega:        oscillator level splitting (units of eps_F)
    site_offsets: per-site energy shifts added to both band diagonals;
                  a large offset detunes that site out of the Raman resonance
                  (superlattice pattern loading)
    """

    sites: int
    spacing: float
    omega: float
    site_offsets: tuple = ()
    band_count: int = 2

    def __post_init__(self):
        if self.sites < 1:
            raise ValueError("sites must be >= 1")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")
        if self.omega <= 0:
            raise ValueError("omega must be positive")
        if self.band_count != 2:
            raise ValueError("only the two lowest bands are modeled")
        if not self.site_offsets:
            object.__setattr__(self, "site_offsets", (0.0,) * self.sites)
        elif len(self.site_offsets) != self.sites:
            raise ValueError("site_offsets must have one entry per site")
        else:
            object.__setattr__(
                self, "site_offsets", tuple(float(v) for v in self.site_offsets)
            )
        if self.omega / self.recoil < DEEP_LATTICE_MIN_RATIO:
            warnings.warn(
                f"omega/omega_R = {self.omega / self.recoil:.2f} < "
                f"{DEEP_LATTICE_MIN_RATIO}: harmonic two-band approximation "
                "is unreliable this shallow",
                ShallowLatticeWarning,
                stacklevel=2,
            )

    @property
    def oscillator_length(self) -> float:
        return 1.0 / math.sqrt(self.omega)

    @property
    def wavelength(self) -> float:
        return 2.0 * self.spacing

    @property
    def recoil(self) -> float:
        return 2.0 * math.pi**2 / self.wavelength**2

    @property
    def positions(self) -> np.ndarray:
        alpha = np.arange(self.sites, dtype=float)
        return (alpha - 0.5 * (self.sites - 1)) * self.spacing

    @property
    def density_per_site(self) -> float:
        """Reservoir atoms per lattice spacing, n_1D * lambda/2."""
        return (FERMI_K / math.pi) * self.spacing

    @property
    def density_a0(self) -> float:
        """Reservoir atoms per oscillator length, n_1D * a_0."""
        return (FERMI_K / math.pi) * self.oscillator_length


def spacing_from_density_per_site(value: float) -> float:
    """Lattice spacing that realizes a requested n_1D * lambda/2."""
    if value <= 0:
        raise ValueError("density_per_site must be positive")
    return value * math.pi / FERMI_K


def omega_from_density_a0(value: float) -> float:
    """Level splitting that realizes a requested n_1D * a_0 = sqrt(2/omega)/pi."""
    if value <= 0:
        raise ValueError("density_a0 must be positive")
    return 2.0 / (math.pi * value) ** 2


def spacing_from_recoil_ratio(omega: float, ratio: float) -> float:
    """Lattice spacing with a prescribed omega/omega_R depth ratio."""
    if ratio <= 0:
        raise ValueError("omega/omega_R ratio must be positive")
    # omega_R = pi^2 / (2 d^2)
    return math.pi * math.sqrt(0.5 * ratio / omega)


def build_momentum_grid(reservoir: ReservoirSpec) -> np.ndarray:
    """Symmetric momentum grid k_j = 2*pi*j/L ordered by |k|, then +k before -k.

    The first N entries are exactly the modes the Fermi sea fills, so
    occupation bookkeeping is contiguous.
    """
    half = (reservoir.mode_count - 1) // 2
    j = np.arange(-half, half + 1)
    k = 2.0 * math.pi * j / reservoir.box_length
    order = np.lexsort((-k, np.abs(k)))
    return k[order]


def coupling_amplitude(k: float, band: int, lattice: LatticeSpec,
                       box_length: float) -> complex:
    """Raman coupling R_{k,n} of a plane wave to a 1D oscillator eigenstate.

    Ground band: R_{k,0} = L^{-1/2} (4 pi a0^2)^{1/4} exp(-k^2 a0^2 / 2),
    real and positive.  First band: R_{k,1} = sqrt(2) a0 i k R_{k,0},
    odd in k (the n=1 wavefunction is odd).
    """
    a0 = lattice.oscillator_length
    r0 = (4.0 * math.pi * a0**2) ** 0.25 * math.exp(-0.5 * (k * a0) ** 2)
    r0 /= math.sqrt(box_length)
    if band == 0:
        return complex(r0)
    if band == 1:
        return 1j * math.sqrt(2.0) * a0 * k * r0
    raise ValueError(f"unsupported band index {band}")


@dataclass(frozen=True)
class CouplingTable:
    """Precomputed R_{k,n} amplitudes and site phases e^{-i k x_alpha}.

    amplitudes[j, n] is R_{k_j, n}; phases[j, alpha] is e^{-i k_j x_alpha}.
    """

    momenta: np.ndarray
    amplitudes: np.ndarray
    phases: np.ndarray

    @property
    def mode_count(self) -> int:
        return self.momenta.size

    @property
    def sites(self) -> int:
        return self.phases.shape[1]

    def lattice_block(self) -> np.ndarray:
        """Coupling block W[(n*M + alpha), j] = R_{k_j,n} e^{-i k_j x_alpha}.

        Row ordering matches the correlation-matrix mode ordering
        (all band-0 sites, then all band-1 sites).
        """
        w0 = self.amplitudes[:, 0][:, None] * self.phases
        w1 = self.amplitudes[:, 1][:, None] * self.phases
        return np.vstack([w0.T, w1.T])


def build_coupling_table(reservoir: ReservoirSpec,
                         lattice: LatticeSpec) -> CouplingTable:
    k = build_momentum_grid(reservoir)
    a0 = lattice.oscillator_length
    r0 = (4.0 * math.pi * a0**2) ** 0.25 / math.sqrt(reservoir.box_length)
    r0 = r0 * np.exp(-0.5 * (k * a0) ** 2)
    amps = np.empty((k.size, 2), dtype=complex)
    amps[:, 0] = r0
    amps[:, 1] = 1j * math.sqrt(2.0) * a0 * k * r0
    phases = np.exp(-1j * np.outer(k, lattice.positions))
    return CouplingTable(momenta=k, amplitudes=amps, phases=phases)


def collective_mode_overlap(alpha: int, beta: int, n: int, m: int,
                            table: CouplingTable) -> complex:
    """Overlap sum_k R*_{k,n} R_{k,m} e^{i k (x_alpha - x_beta)}.

    Approaches delta_{alpha,beta} delta_{n,m} as the grid densifies; the
    residual measures how well-separated the per-site reservoir modes are.
    """
    cross = np.conj(table.amplitudes[:, n]) * table.amplitudes[:, m]
    rel = np.conj(table.phases[:, alpha]) * table.phases[:, beta]
    return complex(np.sum(cross * rel))


@dataclass
class CorrelationState:
    """Single-particle correlation matrix C_ij = <c_i^dagger c_j>.

    Mode ordering: band-0 sites (0..M-1), band-1 sites (M..2M-1), then the
    K reservoir modes in momentum-grid order.  C is Hermitian with
    eigenvalues in [0, 1]; its trace is the total particle number.
    """

    matrix: np.ndarray
    sites: int
    reservoir_modes: int

    def __post_init__(self):
        n = 2 * self.sites + self.reservoir_modes
        if self.matrix.shape != (n, n):
            raise ValueError(
                f"matrix shape {self.matrix.shape} does not match "
                f"2*{self.sites} + {self.reservoir_modes} modes"
            )

    @property
    def total_modes(self) -> int:
        return 2 * self.sites + self.reservoir_modes

    def band_slice(self, band: int) -> slice:
        if band not in (0, 1):
            raise ValueError(f"unsupported band index {band}")
        return slice(band * self.sites, (band + 1) * self.sites)

    @property
    def reservoir_slice(self) -> slice:
        return slice(2 * self.sites, self.total_modes)

    def copy(self) -> "CorrelationState":
        return CorrelationState(self.matrix.copy(), self.sites,
                                self.reservoir_modes)

    def site_occupations(self, band: int) -> np.ndarray:
        return np.real(np.diag(self.matrix)[self.band_slice(band)]).copy()

    def reservoir_occupation(self) -> float:
        return float(np.real(np.trace(self.matrix[self.reservoir_slice,
                                                  self.reservoir_slice])))

    def total_number(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def hermiticity_residual(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def occupation_eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))


def fidelity(state: CorrelationState, band: int) -> float:
    """Mean occupation of one band across all lattice sites."""
    return float(np.mean(state.site_occupations(band)))


def fermi_sea_init(reservoir: ReservoirSpec,
                   lattice: LatticeSpec) -> CorrelationState:
    """Empty lattice plus a Fermi sea filling the N lowest-|k| modes."""
    n = 2 * lattice.sites + reservoir.mode_count
    c = np.zeros((n, n), dtype=complex)
    occ = 2 * lattice.sites + np.arange(reservoir.particles)
    c[occ, occ] = 1.0
    return CorrelationState(c, lattice.sites, reservoir.mode_count)


@dataclass(frozen=True)
class IntegrationSpec:
    """Integrator selection and step control.

    method:  'rk4' (fixed-step RK4 on the correlation equations, default),
             'expm' (per-step exact exponential of the frozen generator,
             midpoint rule; for long slow sweeps), or 'split' (dissipative
             kicks around an expm core; combined runs only)
    dt_cap:  step ceiling for expm/split
    dt_scale: multiply the chosen step (halve/double for convergence checks)
    samples: minimum number of trajectory samples per run
    """

    method: str = "rk4"
    dt_cap: float = 0.25
    dt_scale: float = 1.0
    samples: int = 400

    def __post_init__(self):
        if self.method not in ("rk4", "expm", "split"):
            raise ValueError(f"unknown integration method {self.method!r}")
        if self.dt_cap <= 0 or self.dt_scale <= 0:
            raise ValueError("dt_cap and dt_scale must be positive")
        if self.samples < 2:
            raise ValueError("need at least two samples")


@dataclass(frozen=True)
class ModelSpec:
    """Complete configuration of one loading simulation."""

    reservoir: ReservoirSpec
    lattice: LatticeSpec
    drive: DriveSchedule
    dissipation: DissipationSpec | None = None
    integration: IntegrationSpec = field(default_factory=IntegrationSpec)

    def __post_init__(self):
        if self.reservoir.box_length <= self.lattice.sites * self.lattice.spacing:
            raise ValueError(
                "box length must exceed the lattice extent; increase the "
                "particle number or reduce sites/spacing"
            )

    @property
    def gamma(self) -> float:
        return self.dissipation.gamma if self.dissipation is not None else 0.0


def state_with_lattice_occupations(reservoir: ReservoirSpec,
                                   lattice: LatticeSpec,
                                   band0=None, band1=None,
                                   fill_sea: bool = False) -> CorrelationState:
    """Diagonal initial state with prescribed per-site band occupations.

    Used to seed decay and removal studies; reservoir filled only on request.
    """
    state = (fermi_sea_init(reservoir, lattice) if fill_sea else
             CorrelationState(
                 np.zeros((2 * lattice.sites + reservoir.mode_count,) * 2,
                          dtype=complex),
                 lattice.sites, reservoir.mode_count))
    for band, occ in ((0, band0), (1, band1)):
        if occ is None:
            continue
        occ = np.asarray(occ, dtype=float)
        if occ.shape != (lattice.sites,):
            raise ValueError("band occupation list must have one entry per site")
        if np.any(occ < 0) or np.any(occ > 1):
            raise ValueError("occupations must lie in [0, 1]")
        sl = state.band_slice(band)
        state.matrix[sl, sl][np.diag_indices(lattice.sites)] = occ
    return state
