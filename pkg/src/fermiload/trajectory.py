"""Time-series record of a loading run with conserved-quantity diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Trajectory:
    """Sampled observables of one evolution run.

    band0/band1 hold per-site occupations, shape (samples, sites); the
    fidelities are their site means.  Diagnostics track Hermiticity drift
    and the extreme eigenvalues of the correlation matrix (Pauli bounds).
    """

    times: np.ndarray
    band0: np.ndarray
    band1: np.ndarray
    reservoir: np.ndarray
    total: np.ndarray
    herm_residual: np.ndarray
    eig_min: np.ndarray
    eig_max: np.ndarray
    metadata: dict = field(default_factory=dict)
    final_state: object = None

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("sample times must be strictly increasing")

    @property
    def f0(self) -> np.ndarray:
        return self.band0.mean(axis=1)

    @property
    def f1(self) -> np.ndarray:
        return self.band1.mean(axis=1)

    def fidelity(self, band: int) -> np.ndarray:
        if band == 0:
            return self.f0
        if band == 1:
            return self.f1
        raise ValueError(f"unsupported band index {band}")

    @property
    def final_f0(self) -> float:
        return float(self.f0[-1])

    @property
    def final_f1(self) -> float:
        return float(self.f1[-1])

    def pauli_violation(self) -> float:
        """Largest excursion of any eigenvalue outside [0, 1]."""
        above = float(np.max(self.eig_max - 1.0))
        below = float(np.max(-self.eig_min))
        return max(above, below, 0.0)

    def trace_drift(self) -> float:
        return float(np.max(np.abs(self.total - self.total[0])))

    def trace_drift_rate(self) -> float:
        """Worst trace drift per unit time over the run."""
        dt = self.times - self.times[0]
        with np.errstate(divide="ignore", invalid="ignore"):
            rate = np.abs(self.total - self.total[0]) / np.where(dt > 0, dt, np.inf)
        return float(np.max(rate))

    def monotonicity_defect(self, band: int = 0) -> float:
        """Largest per-sample decrease of the band fidelity (0 if monotone)."""
        f = self.fidelity(band)
        return max(0.0, float(np.max(-np.diff(f))))
