"""Coherent Raman loading: generator assembly, evolution, and run drivers."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .evolution import LatticeReservoirSystem, evolve_sampled
from .model import CorrelationState, ModelSpec
from .trajectory import Trajectory

FAST_REGIME_MARGIN = 5.0   # Omega this many times above omega and eps_F
SLOW_REGIME_MARGIN = 5.0   # Omega below omega by this factor


class RegimeWarning(UserWarning):
    pass


@dataclass(frozen=True)
class GeneratorMatrix:
    """Anti-Hermitian generator M(t) of dC/dt = M^dag C + C M."""

    matrix: np.ndarray
    time: float

    def anti_hermiticity(self) -> float:
        return float(np.max(np.abs(self.matrix + self.matrix.conj().T)))


def assemble_generator(t: float, spec: ModelSpec,
                       system: LatticeReservoirSystem | None = None
                       ) -> GeneratorMatrix:
    """Generator at time t, including site offsets and the drive schedule."""
    if system is None:
        system = LatticeReservoirSystem(spec)
    spec.drive.rabi(t)  # raises outside the schedule domain
    return GeneratorMatrix(matrix=system.generator(t), time=float(t))


def evolve_coherent(state: CorrelationState, spec: ModelSpec,
                    t0: float, t1: float,
                    conjugate_generator: bool = False) -> CorrelationState:
    """Integrate the coherent correlation dynamics from t0 to t1.

    With conjugate_generator=True the Hermitian conjugate (negated) generator
    is used; running it with the time-mirrored schedule inverts a forward run,
    which is the time-reversal sanity check.
    """
    sign = -1.0 if conjugate_generator else 1.0
    traj = evolve_sampled(state, spec, t0, t1,
                          sample_times=np.array([t0, t1]),
                          dissipative=False, generator_sign=sign)
    return traj.final_state


def fast_occupation_analytic(rabi: float, t: float) -> float:
    """Frozen-reservoir lattice occupation sin^2(Omega t / 2)."""
    if rabi < 0:
        raise ValueError("Rabi amplitude must be non-negative")
    return math.sin(0.5 * rabi * t) ** 2


def _require_constant(profile, name: str) -> float:
    vals = set(profile.values)
    if len(vals) != 1:
        raise ValueError(f"{name} must be constant for this run")
    return vals.pop()


def run_fast_pulse(spec: ModelSpec) -> Trajectory:
    """Constant-drive pulse in the fast regime (on-site Rabi transfer).

    Requires constant Omega and eps; samples densely enough to resolve the
    Rabi oscillation (at least 40 points per period).
    """
    rabi = _require_constant(spec.drive.rabi, "Rabi amplitude")
    _require_constant(spec.drive.epsilon, "resonant energy")
    if rabi <= 0:
        raise ValueError("fast pulse needs a positive Rabi amplitude")
    omega = spec.lattice.omega
    if rabi < FAST_REGIME_MARGIN * max(omega, 1.0):
        warnings.warn(
            f"Omega = {rabi:g} is not well inside the fast regime "
            f"(omega = {omega:g}, eps_F = 1)", RegimeWarning, stacklevel=2)
    duration = spec.drive.duration
    if duration < math.pi / rabi:
        raise ValueError("schedule shorter than a pi-pulse")
    periods = duration * rabi / (2.0 * math.pi)
    min_samples = int(math.ceil(40.0 * periods))
    from .model import fermi_sea_init
    state = fermi_sea_init(spec.reservoir, spec.lattice)
    traj = evolve_sampled(state, spec, min_samples=min_samples,
                          dissipative=False)
    traj.metadata["regime"] = "fast"
    return traj


def run_slow_sweep(spec: ModelSpec) -> Trajectory:
    """Sweep run in the slow, band-selective regime."""
    omega = spec.lattice.omega
    max_rabi = spec.drive.max_rabi()
    if max_rabi > omega / SLOW_REGIME_MARGIN:
        warnings.warn(
            f"Omega_max = {max_rabi:g} exceeds omega/{SLOW_REGIME_MARGIN:g} "
            f"= {omega / SLOW_REGIME_MARGIN:g}: band selectivity degrades",
            RegimeWarning, stacklevel=2)
    from .model import fermi_sea_init
    state = fermi_sea_init(spec.reservoir, spec.lattice)
    traj = evolve_sampled(state, spec, dissipative=False)
    traj.metadata["regime"] = "slow"
    return traj
