r"""Rényi-0, min-, max- and von Neumann entropies, conditional forms and classical smoothing.

All values are in bits. Conditional entropies take the conditioning subsystem(s)
by index into ``dims``; every other subsystem is the conditioned system A.
"""
import itertools
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import comb, gammaln, logsumexp

from src.exceptions import DimensionMismatch, PreconditionError, SolverError
from src.qmat import (
    DensityOperator,
    MatrixLike,
    Spectrum,
    as_matrix,
    eig_hermitian,
    minimal_purification,
    partial_trace,
    permute_subsystems,
    spectrum,
    support_projector,
)
from src.sdp import SdpBuilder, solve_sdp
from src.utils import get_logger

logger = get_logger(__name__)

MAX_TYPE_CLASSES = 2_000_000
MAX_IID_ATOMS = 8
MAX_IID_COPIES = 10_000


@dataclass(frozen=True)
class EntropyValue:
    bits: float
    measure: str = ''
    epsilon: float = 0.0
    metric: Optional[str] = None
    error: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.bits):
            raise PreconditionError(f"{self.measure or 'entropy'} is not finite: {self.bits}")
        object.__setattr__(self, 'bits', float(self.bits))

    def __float__(self) -> float:
        return self.bits

    @property
    def nats(self) -> float:
        return self.bits * np.log(2)

    def to_record(self) -> Dict:
        return {'measure': self.measure, 'value_bits': self.bits, 'epsilon': self.epsilon,
                'metric': self.metric}


@dataclass(frozen=True)
class SmoothingParams:
    r"""Classical trace-distance ball of radius ε; ε̄ = √(2ε) is the matching purified-distance radius."""
    epsilon: float
    metric: str = 'trace_distance'
    epsilon_bar: Optional[float] = None

    def __post_init__(self):
        if not 0 <= self.epsilon < 1:
            raise PreconditionError(f"epsilon must lie in [0, 1), got {self.epsilon}")
        if self.metric != 'trace_distance':
            raise PreconditionError(f"only classical trace-distance smoothing is supported, got {self.metric}")
        derived = float(np.sqrt(2 * self.epsilon))
        if self.epsilon_bar is None:
            object.__setattr__(self, 'epsilon_bar', derived)
        elif abs(self.epsilon_bar - derived) > 1e-12:
            raise PreconditionError(f"epsilon_bar {self.epsilon_bar} inconsistent with sqrt(2*{self.epsilon})")

    @classmethod
    def from_epsilon_bar(cls, epsilon_bar: float) -> 'SmoothingParams':
        return cls(epsilon_bar ** 2 / 2, epsilon_bar=epsilon_bar)


def _spectrum_of(rho: Union[MatrixLike, Spectrum, Sequence[float]]) -> Spectrum:
    if isinstance(rho, Spectrum):
        return rho
    arr = np.asarray(rho.matrix if isinstance(rho, DensityOperator) else rho)
    if arr.ndim == 1:
        return Spectrum(arr.real)
    return spectrum(rho)


def h_zero(rho, tol: Optional[float] = None) -> EntropyValue:
    return EntropyValue(np.log2(_spectrum_of(rho).rank(tol)), 'h0')


def h_min(rho) -> EntropyValue:
    p = _spectrum_of(rho)
    if p.max <= 0:
        raise PreconditionError("min-entropy of the zero operator")
    return EntropyValue(-np.log2(p.max), 'hmin')


def h_von_neumann(rho) -> EntropyValue:
    p = _spectrum_of(rho).values
    p = p[p > 0]
    return EntropyValue(float(-(p * np.log2(p)).sum()), 'vn')


def h_max(rho) -> EntropyValue:
    """2 log₂ tr √ρ."""
    p = _spectrum_of(rho).values
    return EntropyValue(2 * np.log2(np.sqrt(p).sum()), 'hmax')


# ------------------------------------------------------------------------------------------ #
# conditional entropies
# ------------------------------------------------------------------------------------------ #

def _split(rho_AB: MatrixLike, dims: Optional[Sequence[int]],
           cond_on: Union[int, Sequence[int]]) -> Tuple[np.ndarray, int, int]:
    r"""Reorder to (A, B) with B the conditioning subsystems; returns (matrix, d_A, d_B)."""
    if dims is None:
        if not isinstance(rho_AB, DensityOperator):
            raise DimensionMismatch("subsystem dims are required for a bare matrix")
        dims = rho_AB.dims
    dims = [int(d) for d in dims]
    cond = sorted({cond_on} if isinstance(cond_on, (int, np.integer)) else set(cond_on))
    if not cond or any(c < 0 or c >= len(dims) for c in cond):
        raise DimensionMismatch(f"bad conditioning subsystems {cond_on} for dims {dims}")
    rest = [i for i in range(len(dims)) if i not in cond]
    m = as_matrix(rho_AB)
    if m.shape[0] != int(np.prod(dims)):
        raise DimensionMismatch(f"dims {dims} do not match matrix of size {m.shape[0]}")
    d_a = int(np.prod([dims[i] for i in rest])) if rest else 1
    d_b = int(np.prod([dims[i] for i in cond]))
    return permute_subsystems(m, dims, rest + cond), d_a, d_b


def conditional_support_witness(rho_AB: MatrixLike, dims: Optional[Sequence[int]] = None,
                                cond_on: Union[int, Sequence[int]] = 1,
                                tol: Optional[float] = None) -> Tuple[float, np.ndarray]:
    r"""max_ω tr[Π_AB (I_A ⊗ ω_B)] and the maximizing ω (top eigenvector of tr_A Π_AB)."""
    m, d_a, d_b = _split(rho_AB, dims, cond_on)
    pi = support_projector(m, tol).matrix
    reduced = partial_trace(pi, [d_a, d_b], [1])
    values, vectors = eig_hermitian(reduced)
    omega = np.outer(vectors[:, 0], vectors[:, 0].conj())
    value = float(np.trace(pi @ np.kron(np.eye(d_a), omega)).real)
    return value, omega


def h_zero_cond(rho_AB: MatrixLike, dims: Optional[Sequence[int]] = None,
                cond_on: Union[int, Sequence[int]] = 1, tol: Optional[float] = None) -> EntropyValue:
    r"""H₀(A|B) = log₂ λ_max(tr_A Π_AB)."""
    m, d_a, d_b = _split(rho_AB, dims, cond_on)
    pi = support_projector(m, tol).matrix
    lam = eig_hermitian(partial_trace(pi, [d_a, d_b], [1]))[0][0]
    return EntropyValue(np.log2(lam), 'h0_cond')


def h_min_cond(rho_AB: MatrixLike, dims: Optional[Sequence[int]] = None,
               cond_on: Union[int, Sequence[int]] = 1, tol: Optional[float] = None) -> EntropyValue:
    r"""Hmin(A|B) = −log₂ min{tr σ_B : ρ_AB ⪯ I_A ⊗ σ_B}, solved as an SDP."""
    m, d_a, d_b = _split(rho_AB, dims, cond_on)
    if d_b == 1:
        return EntropyValue(h_min(m).bits, 'hmin_cond')
    eye_a = np.eye(d_a)
    problem = (SdpBuilder()
               .add_block('sigma', d_b)
               .set_objective('sigma', np.eye(d_b))
               .add_psd_inequality('dominance', {'sigma': lambda s: -np.kron(eye_a, s)}, -m)
               .build())
    solution = solve_sdp(problem, tol=tol)
    if solution.status != 'optimal':
        raise SolverError(f"conditional min-entropy SDP: {solution.status} ({solution.detail})",
                          status=solution.status, residuals={'max_residual': solution.max_residual})
    value = solution.primal_objective
    if value <= 0:
        raise SolverError(f"conditional min-entropy SDP returned trace {value}")
    error = solution.gap / (value * np.log(2))
    return EntropyValue(-np.log2(value), 'hmin_cond', error=error)


def h_max_cond(rho_AB: MatrixLike, dims: Optional[Sequence[int]] = None,
               cond_on: Union[int, Sequence[int]] = 1, tol: Optional[float] = None) -> EntropyValue:
    r"""Hmax(A|B) = −Hmin(A|C) for a purification ρ_ABC."""
    m, d_a, d_b = _split(rho_AB, dims, cond_on)
    psi = minimal_purification(DensityOperator(m, (d_a, d_b)))
    d_c = psi.dims[-1]
    rho_ac = partial_trace(np.outer(psi.amplitudes, psi.amplitudes.conj()), [d_a, d_b, d_c], [0, 2])
    value = h_min_cond(rho_ac, (d_a, d_c), cond_on=1, tol=tol)
    return EntropyValue(-value.bits, 'hmax_cond', error=value.error)


# ------------------------------------------------------------------------------------------ #
# classical smoothing
# ------------------------------------------------------------------------------------------ #

def _smoothed_count(values: np.ndarray, epsilon: float) -> int:
    """Fewest top atoms holding mass ≥ total − ε."""
    total = values.sum()
    if epsilon >= total:
        raise PreconditionError(f"epsilon {epsilon} is not below the total mass {total}")
    cumulative = np.cumsum(values)
    return int(np.searchsorted(cumulative, total - epsilon - 1e-12 * total) + 1)


def _water_level(values: np.ndarray, epsilon: float) -> float:
    """t with Σ max(p_i − t, 0) = ε."""
    total = values.sum()
    if epsilon >= total:
        raise PreconditionError(f"epsilon {epsilon} is not below the total mass {total}")
    cumulative = np.cumsum(values)
    for k in range(1, values.size + 1):
        level = (cumulative[k - 1] - epsilon) / k
        if k == values.size or level >= values[k]:
            return float(level)
    raise AssertionError('unreachable')


def h_smooth_classical(p, params: SmoothingParams, which: str = 'zero') -> EntropyValue:
    r"""Trace-distance smoothed H₀ or Hmin of a classical distribution.

    zero: log₂ of the fewest atoms carrying mass 1 − ε (removing the smallest atoms
    first is optimal by an exchange argument). min: the peak is shaved down to the
    level t where the removed mass is ε, giving −log₂ t.
    """
    values = _spectrum_of(p).values
    eps = params.epsilon
    if which == 'zero':
        if eps == 0:
            return EntropyValue(h_zero(values).bits, 'h0', 0.0, params.metric)
        bits = np.log2(_smoothed_count(values, eps))
        return EntropyValue(bits, 'h0', eps, params.metric)
    if which == 'min':
        bits = -np.log2(_water_level(values, eps))
        return EntropyValue(bits, 'hmin', eps, params.metric)
    raise PreconditionError(f"unknown smoothed measure {which!r} (expected 'zero' or 'min')")


def _compositions(n: int, m: int):
    # stars and bars
    for bars in itertools.combinations(range(n + m - 1), m - 1):
        edges = (-1,) + bars + (n + m - 1,)
        yield [edges[i + 1] - edges[i] - 1 for i in range(m)]


def _distinct_atoms(atoms: np.ndarray, rtol: float = 1e-12) -> Tuple[np.ndarray, np.ndarray]:
    r"""Distinct probabilities (descending) and how many atoms carry each."""
    atoms = np.sort(atoms)[::-1]
    if atoms.size == 0:
        return atoms, atoms
    starts = np.concatenate([[0], np.flatnonzero(atoms[:-1] - atoms[1:] > rtol * atoms[:-1]) + 1])
    multiplicity = np.diff(np.concatenate([starts, [atoms.size]])).astype(float)
    return atoms[starts], multiplicity


def h_smooth_iid_classical(p, n: int, params: SmoothingParams) -> EntropyValue:
    r"""Smoothed H₀ of p^{⊗n}, exactly, by aggregating outcome strings into type classes.

    Classes are sorted by per-string probability; whole classes are accumulated
    until the mass 1 − ε is reached, then only as many strings of the last class
    as needed. Counts are kept in log-space. Atoms of equal probability share one
    coordinate of the type, so the enumeration runs over distinct values only.
    """
    values = _spectrum_of(p).values
    atoms, multiplicity = _distinct_atoms(values[values > 0])
    m = atoms.size
    if m > MAX_IID_ATOMS:
        raise PreconditionError(f"i.i.d. smoothing supports at most {MAX_IID_ATOMS} distinct atoms, got {m}")
    if not 1 <= n <= MAX_IID_COPIES:
        raise PreconditionError(f"number of copies must lie in [1, {MAX_IID_COPIES}], got {n}")
    total = float(atoms @ multiplicity)
    if params.epsilon >= total ** n:
        raise PreconditionError(f"epsilon {params.epsilon} is not below the total mass")
    num_classes = comb(n + m - 1, m - 1, exact=True)
    if num_classes > MAX_TYPE_CLASSES:
        raise PreconditionError(f"{num_classes} type classes exceed the enumeration limit {MAX_TYPE_CLASSES}")

    log_atoms = np.log(atoms)
    counts = np.array(list(_compositions(n, m)), dtype=float).reshape(-1, m)
    log_prob = counts @ log_atoms
    log_mult = gammaln(n + 1) - gammaln(counts + 1).sum(axis=1) + counts @ np.log(multiplicity)
    order = np.argsort(-log_prob, kind='stable')
    log_prob, log_mult = log_prob[order], log_mult[order]

    target = total ** n - params.epsilon
    mass = 0.0
    kept_log_counts = []
    for lp, lm in zip(log_prob, log_mult):
        class_mass = np.exp(lm + lp)
        if mass + class_mass >= target * (1 - 1e-12):
            log_needed = np.log(max(target - mass, 0.0) + 1e-300) - lp
            if log_needed < 50 * np.log(2):
                needed = max(1.0, np.ceil(np.exp(log_needed) - 1e-9))
                log_needed = np.log(needed)
            kept_log_counts.append(min(log_needed, lm))
            break
        mass += class_mass
        kept_log_counts.append(lm)
    bits = logsumexp(kept_log_counts) / np.log(2)
    logger.debug(f"i.i.d. smoothing: {len(kept_log_counts)} of {num_classes} type classes used")
    return EntropyValue(bits, 'h0_iid', params.epsilon, params.metric)
