"""Brute-force references: exact propagators and Fock-space Lindblad runs.

Everything here is deliberately independent of the production evolution
code: propagators come from scipy's matrix exponential, many-body runs from
dense density matrices over Jordan-Wigner operators, and the cooling terms
of the closed equations can be re-derived through a generic Wick-contraction
engine.  These routes validate the integrators and quantify the closure
error of the factorized equations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from .evolution import LatticeReservoirSystem
from .model import IntegrationSpec, LatticeSpec, ModelSpec, ReservoirSpec
from .schedule import DriveSchedule, PiecewiseLinear

MAX_FOCK_MODES = 12


@dataclass(frozen=True)
class FockConfig:
    """Ordered subset of correlation-matrix modes for exact evolution.

    mode_list entries index the CorrelationState ordering (band-0 sites,
    band-1 sites, reservoir modes); at most 12 modes keep the dense
    density matrix tractable.  Lattice sites must enter with both bands so
    the jump operators are defined.
    """

    mode_list: tuple

    def __post_init__(self):
        modes = tuple(int(m) for m in self.mode_list)
        if len(modes) != len(set(modes)):
            raise ValueError("mode_list has duplicates")
        if not 1 <= len(modes) <= MAX_FOCK_MODES:
            raise ValueError(
                f"need between 1 and {MAX_FOCK_MODES} modes, got {len(modes)}")
        object.__setattr__(self, "mode_list", modes)

    @property
    def dimension(self) -> int:
        return 2 ** len(self.mode_list)

    @classmethod
    def all_modes(cls, spec: ModelSpec) -> "FockConfig":
        n = 2 * spec.lattice.sites + spec.reservoir.mode_count
        return cls(tuple(range(n)))


@lru_cache(maxsize=8)
def jordan_wigner_annihilators(n_modes: int) -> tuple:
    """Dense annihilation operators with sign strings over the mode order."""
    lower = np.array([[0.0, 1.0], [0.0, 0.0]])
    zmat = np.array([[1.0, 0.0], [0.0, -1.0]])
    eye = np.eye(2)
    ops = []
    for j in range(n_modes):
        op = np.array([[1.0]])
        for l in range(n_modes):
            factor = zmat if l < j else (lower if l == j else eye)
            op = np.kron(op, factor)
        ops.append(op.astype(complex))
    return tuple(ops)


def propagator_oracle(generator, dt: float) -> np.ndarray:
    """U = exp(M dt) for an anti-Hermitian generator M, via scipy expm."""
    m = getattr(generator, "matrix", generator)
    m = np.asarray(m)
    scale = max(float(np.max(np.abs(m))), 1.0)
    if np.max(np.abs(m + m.conj().T)) > 1e-12 * scale:
        raise ValueError("generator is not anti-Hermitian")
    u = expm(m * dt)
    defect = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
    if defect > 1e-10:
        raise ValueError(f"propagator not unitary (defect {defect:.2e})")
    return u


@dataclass
class ExactLindbladRun:
    """Result of a dense Fock-space Lindblad integration."""

    config: FockConfig
    times: np.ndarray
    occupations: np.ndarray   # (samples, modes), ordering = config.mode_list
    trace: np.ndarray
    rho_final: np.ndarray

    def occupation(self, mode_position: int) -> np.ndarray:
        return self.occupations[:, mode_position]

    def correlation_matrix(self) -> np.ndarray:
        """Exact C_ij = <c_i† c_j> of the final state."""
        ops = jordan_wigner_annihilators(len(self.config.mode_list))
        n = len(ops)
        c = np.empty((n, n), dtype=complex)
        for i in range(n):
            for j in range(n):
                c[i, j] = np.trace(ops[i].conj().T @ ops[j] @ self.rho_final)
        return c

    def quartic_expectation(self, i: int, j: int, k: int, l: int) -> complex:
        """Exact <c_i† c_j† c_k c_l> of the final state (config positions)."""
        ops = jordan_wigner_annihilators(len(self.config.mode_list))
        op = ops[i].conj().T @ ops[j].conj().T @ ops[k] @ ops[l]
        return complex(np.trace(op @ self.rho_final))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(
            0.5 * (self.rho_final + self.rho_final.conj().T))[0])


def exact_lindblad_evolve(config: FockConfig, spec: ModelSpec,
                          t0: float, t1: float,
                          initial_occupations=None,
                          rho0: np.ndarray | None = None,
                          samples: int = 200,
                          steps_per_unit: float | None = None
                          ) -> ExactLindbladRun:
    """Dense RK4 integration of the master equation on a small mode set.

    The Hamiltonian is the model's single-particle Hamiltonian restricted to
    the configured modes; every lattice site whose two bands are both present
    contributes a jump operator a†_{site,0} a_{site,1} at rate gamma.
    Initial state: a Fock product state from `initial_occupations` (0/1 per
    configured mode), or an explicit density matrix `rho0`.
    """
    n = len(config.mode_list)
    dim = config.dimension
    ops = jordan_wigner_annihilators(n)
    number_ops = [op.conj().T @ op for op in ops]
    gamma = spec.gamma
    pos = {mode: p for p, mode in enumerate(config.mode_list)}

    jumps = []
    for alpha in range(spec.lattice.sites):
        if alpha in pos and (spec.lattice.sites + alpha) in pos:
            a_op = ops[pos[alpha]].conj().T \
                @ ops[pos[spec.lattice.sites + alpha]]
            jumps.append((a_op, a_op.conj().T @ a_op))

    if rho0 is None:
        if initial_occupations is None:
            raise ValueError("need initial_occupations or rho0")
        occ = np.asarray(initial_occupations, dtype=int)
        if occ.shape != (n,) or np.any((occ != 0) & (occ != 1)):
            raise ValueError("initial_occupations must be 0/1 per mode")
        index = int("".join(str(b) for b in occ), 2)
        rho0 = np.zeros((dim, dim), dtype=complex)
        rho0[index, index] = 1.0
    rho = np.asarray(rho0, dtype=complex).copy()
    if rho.shape != (dim, dim):
        raise ValueError(f"rho0 must be {dim} x {dim}")

    # many-body matrices: H(t) = H0 + eps(t) * N_lat + (Omega(t)/2) * W
    sys_probe = LatticeReservoirSystem(spec)
    ix = np.asarray(config.mode_list)

    def restricted(mat):
        return mat[np.ix_(ix, ix)]

    def embed(h_single):
        out = np.zeros((dim, dim), dtype=complex)
        for p in range(n):
            for q in range(n):
                if h_single[p, q] != 0.0:
                    out += h_single[p, q] * (ops[p].conj().T @ ops[q])
        return out

    eps_fun = spec.drive.epsilon
    rabi_fun = spec.drive.rabi
    h_diag_static = np.zeros((sys_probe.dim,), dtype=float)
    h_diag_static[sys_probe.lat] = sys_probe.lat_static
    h_diag_static[sys_probe.res] = sys_probe.eps_k
    h0 = embed(restricted(np.diag(h_diag_static).astype(complex)))
    n_lat = embed(restricted(np.diag(
        np.concatenate([np.ones(2 * spec.lattice.sites),
                        np.zeros(spec.reservoir.mode_count)])).astype(complex)))
    coupling = np.zeros((sys_probe.dim, sys_probe.dim), dtype=complex)
    coupling[sys_probe.lat, sys_probe.res] = sys_probe.w_block
    coupling = coupling + coupling.conj().T
    # conjugate: many-body H uses the single-particle Hamiltonian itself
    w_many = embed(restricted(coupling.conj()))

    def hamiltonian(t):
        return h0 + eps_fun(t) * n_lat + 0.5 * rabi_fun(t) * w_many

    def rhs(r, t):
        h = hamiltonian(t)
        out = -1j * (h @ r - r @ h)
        for a_op, aa in jumps:
            out += gamma * (a_op @ r @ a_op.conj().T
                            - 0.5 * (aa @ r + r @ aa))
        return out

    # conservative fixed step from the many-body spectral range
    h_norm = max(np.abs(np.linalg.eigvalsh(hamiltonian(t))).max()
                 for t in np.linspace(t0, t1, 9))
    rate = 2.0 * max(h_norm, 1e-12) + 2.0 * gamma * max(len(jumps), 1)
    if steps_per_unit is None:
        steps_per_unit = rate / 0.25
    times = np.linspace(t0, t1, samples + 1)
    occ_series = np.empty((times.size, n))
    trace = np.empty(times.size)

    def record(i):
        d = np.real(np.diag(rho))
        occ_series[i] = [float(np.real(np.trace(nop @ rho)))
                         for nop in number_ops]
        trace[i] = d.sum()

    record(0)
    for i in range(1, times.size):
        ta, tb = times[i - 1], times[i]
        steps = max(1, math.ceil((tb - ta) * steps_per_unit))
        h_step = (tb - ta) / steps
        for s in range(steps):
            t = ta + s * h_step
            k1 = rhs(rho, t)
            k2 = rhs(rho + 0.5 * h_step * k1, t + 0.5 * h_step)
            k3 = rhs(rho + 0.5 * h_step * k2, t + 0.5 * h_step)
            k4 = rhs(rho + h_step * k3, t + h_step)
            rho += (h_step / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
            rho = 0.5 * (rho + rho.conj().T)
        record(i)

    return ExactLindbladRun(config=config, times=times,
                            occupations=occ_series, trace=trace,
                            rho_final=rho)


# ---------------------------------------------------------------------------
# Generic Wick-contraction engine (reference route for the closed equations)


def wick_expectation(ops, c: np.ndarray) -> complex:
    """Gaussian-state expectation of a product of fermion operators.

    ops is a sequence of (mode, dagger) pairs in operator order; c is the
    correlation matrix <c_i† c_j>.  Sum over perfect pairings with parity
    signs, using <i† j> = C[i,j] and <i j†> = delta_ij - C[j,i].
    """
    if len(ops) % 2 == 1:
        return 0.0

    def contract(a, b):
        (i, da), (j, db) = a, b
        if da and not db:
            return c[i, j]
        if not da and db:
            return (1.0 if i == j else 0.0) - c[j, i]
        return 0.0

    def recurse(seq):
        if not seq:
            return 1.0 + 0.0j
        first, rest = seq[0], seq[1:]
        total = 0.0 + 0.0j
        for m, other in enumerate(rest):
            pair = contract(first, other)
            if pair != 0.0:
                sign = -1.0 if m % 2 == 1 else 1.0
                remaining = rest[:m] + rest[m + 1:]
                total += sign * pair * recurse(remaining)
        return total

    return complex(recurse(tuple(ops)))


def dissipator_rhs_reference(c: np.ndarray, sites: int,
                             gamma: float) -> np.ndarray:
    """Cooling terms of dC/dt from first principles, element by element.

    For every matrix element the adjoint-dissipator expectation
    Gamma/2 (2 <A† c_i† c_j A> - <c_i† c_j A† A> - <A† A c_i† c_j>) is
    Wick-contracted directly, with A = a†_{site,0} a_{site,1}.  Slow, used
    only to validate the vectorized closed form.
    """
    n = c.shape[0]
    out = np.zeros_like(c)
    for alpha in range(sites):
        d_ix, e_ix = alpha, sites + alpha
        for i in range(n):
            for j in range(n):
                sandwich = wick_expectation(
                    ((e_ix, 1), (d_ix, 0), (i, 1), (j, 0), (d_ix, 1),
                     (e_ix, 0)), c)
                right = wick_expectation(
                    ((i, 1), (j, 0), (e_ix, 1), (d_ix, 0), (d_ix, 1),
                     (e_ix, 0)), c)
                left = wick_expectation(
                    ((e_ix, 1), (d_ix, 0), (d_ix, 1), (e_ix, 0), (i, 1),
                     (j, 0)), c)
                out[i, j] += 0.5 * gamma * (2.0 * sandwich - right - left)
    return out


# ---------------------------------------------------------------------------
# Closure-error reporting


@dataclass
class ClosureReport:
    """Exact vs closed-equation occupations over a common horizon."""

    times: np.ndarray
    exact: np.ndarray      # (samples, modes)
    closed: np.ndarray     # (samples, modes)
    mode_list: tuple

    @property
    def deviations(self) -> np.ndarray:
        return np.max(np.abs(self.exact - self.closed), axis=0)

    @property
    def max_deviation(self) -> float:
        return float(np.max(self.deviations))


def single_site_spec(gamma: float, omega: float = 20.0,
                     rabi: float = 0.0, duration: float = 60.0) -> ModelSpec:
    """Minimal one-site model (one idle reservoir mode) for closure studies."""
    from .cooling import DissipationSpec
    reservoir = ReservoirSpec(particles=1, mode_count=1)
    lattice = LatticeSpec(sites=1, spacing=1.0, omega=omega)
    drive = DriveSchedule(rabi=PiecewiseLinear.constant(rabi, duration),
                          epsilon=PiecewiseLinear.constant(0.0, duration))
    return ModelSpec(reservoir=reservoir, lattice=lattice, drive=drive,
                     dissipation=DissipationSpec(gamma=gamma),
                     integration=IntegrationSpec(method="rk4"))


def closed_equation_occupations(spec: ModelSpec, initial_occupations,
                                sample_times) -> np.ndarray:
    """Per-mode diagonal of the closed (factorized) equations on a grid."""
    from .evolution import _rk4_span, step_size

    occ = np.asarray(initial_occupations, dtype=float)
    system = LatticeReservoirSystem(spec)
    c = np.diag(occ).astype(complex)
    times = np.asarray(sample_times, dtype=float)
    dt = step_size(system, times[0], times[-1])
    out = np.empty((times.size, system.dim))
    out[0] = np.real(np.diag(c))
    for i in range(1, times.size):
        c = _rk4_span(c, system, times[i - 1], times[i], dt,
                      system.combined_rhs)
        out[i] = np.real(np.diag(c))
    return out


def closure_error_report(config: FockConfig, spec: ModelSpec,
                         horizon: float, samples: int = 120,
                         initial_occupations=None) -> ClosureReport:
    """Run the exact master equation and the closed equations side by side.

    The configured modes must cover the whole miniature model so both
    descriptions evolve identical systems.
    """
    n_total = 2 * spec.lattice.sites + spec.reservoir.mode_count
    if tuple(config.mode_list) != tuple(range(n_total)):
        raise ValueError("closure comparison needs all model modes")
    if initial_occupations is None:
        initial_occupations = [0] * (2 * spec.lattice.sites) \
            + [1] * spec.reservoir.particles \
            + [0] * (spec.reservoir.mode_count - spec.reservoir.particles)
    exact_run = exact_lindblad_evolve(config, spec, 0.0, horizon,
                                      initial_occupations=initial_occupations,
                                      samples=samples)
    closed = closed_equation_occupations(spec, initial_occupations,
                                         exact_run.times)
    return ClosureReport(times=exact_run.times, exact=exact_run.occupations,
                         closed=closed, mode_list=config.mode_list)
