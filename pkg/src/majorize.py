r"""Majorization, weak submajorization and lambda-majorization of spectra.

Lambda-majorization σ ⪰_λ ρ is decided at the level of transfer matrices:
σ ⪰_λ ρ iff there is T ≥ 0 with column sums ≤ 1, row sums ≤ 2^{−λ} and T p = q.
"""
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from einops import rearrange

from src.entropy import h_min, h_zero
from src.exceptions import DimensionMismatch, PreconditionError, SolverError
from src.qmat import MatrixLike, Spectrum, spectrum
from src.sdp import LpProblem, solve_lp
from src.utils import get_logger

logger = get_logger(__name__)

__all__ = [
    'Spectrum', 'TransferMatrix', 'AncillaSplit', 'majorizes', 'weakly_submajorizes', 'hlp_matrix',
    'lambda_feasible', 'optimal_transfer', 'absorbed_randomness', 't_from_substochastic',
    'substochastic_from_t', 'check_r_bounds', 'noisy_operation_possible', 'named_closed_form',
    'uniform', 'random_spectrum',
]

ORDER_TOL = 1e-10
SUM_TOL = 1e-8
ENTRY_TOL = 1e-10
KINDS = ('doubly_stochastic', 'doubly_substochastic', 'lambda')

SpectrumLike = Union[Spectrum, Sequence[float], np.ndarray]


def as_spectrum(p: SpectrumLike) -> Spectrum:
    return p if isinstance(p, Spectrum) else Spectrum(np.asarray(p, dtype=float))


@dataclass(frozen=True)
class TransferMatrix:
    r"""d_Y × d_X nonnegative matrix mapping a spectrum of X onto one of Y."""
    entries: np.ndarray
    kind: str
    lam: Optional[float] = None

    def __post_init__(self):
        t = np.atleast_2d(np.asarray(self.entries, dtype=float))
        assert self.kind in KINDS, self.kind
        if self.kind == 'lambda' and self.lam is None:
            raise PreconditionError("lambda transfer matrix needs its lambda")
        if t.min() < -ENTRY_TOL:
            raise PreconditionError(f"negative transfer entry {t.min():.3e}")
        rows, cols = t.sum(axis=1), t.sum(axis=0)
        if self.kind == 'doubly_stochastic':
            if t.shape[0] != t.shape[1]:
                raise DimensionMismatch(f"doubly stochastic matrix must be square, got {t.shape}")
            err = max(np.abs(rows - 1).max(), np.abs(cols - 1).max())
            if err > SUM_TOL:
                raise PreconditionError(f"not doubly stochastic (sum error {err:.3e})")
        else:
            row_bound = 1.0 if self.kind == 'doubly_substochastic' else 2.0 ** (-self.lam)
            if cols.max() > 1 + SUM_TOL:
                raise PreconditionError(f"column sum {cols.max():.9f} exceeds 1")
            if rows.max() > row_bound + SUM_TOL:
                raise PreconditionError(f"row sum {rows.max():.9f} exceeds {row_bound:.9f}")
        t = np.clip(t, 0.0, None)
        t.setflags(write=False)
        object.__setattr__(self, 'entries', t)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.entries.shape

    def row_sums(self) -> np.ndarray:
        return self.entries.sum(axis=1)

    def col_sums(self) -> np.ndarray:
        return self.entries.sum(axis=0)

    def apply(self, p: SpectrumLike) -> np.ndarray:
        values = p.values if isinstance(p, Spectrum) else np.asarray(p, dtype=float)
        if values.size != self.shape[1]:
            raise DimensionMismatch(f"transfer matrix {self.shape} applied to length {values.size}")
        return self.entries @ values


@dataclass(frozen=True)
class AncillaSplit:
    r"""λ = λ1 − λ2: a pure ancilla of λ1 qubits is added, a mixed one of λ2 qubits absorbs the rest."""
    lambda1: float
    lambda2: float

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise PreconditionError(f"ancilla sizes must be nonnegative: {self.lambda1}, {self.lambda2}")

    @classmethod
    def from_lambda(cls, lam: float) -> 'AncillaSplit':
        return cls(max(lam, 0.0), max(-lam, 0.0))

    @property
    def lam(self) -> float:
        return self.lambda1 - self.lambda2

    @property
    def weights(self) -> Tuple[float, float]:
        return 2.0 ** self.lambda1, 2.0 ** self.lambda2

    def integer_dims(self, tol: float = 1e-9) -> Tuple[int, int]:
        """(2^λ1, 2^λ2) as ancilla dimensions; raises unless both are integers."""
        dims = []
        for w in self.weights:
            n = int(round(w))
            if abs(w - n) > tol * w:
                raise PreconditionError(f"ancilla weight {w} is not an integer dimension")
            dims.append(n)
        return dims[0], dims[1]


def _padded_pair(p: SpectrumLike, q: SpectrumLike) -> Tuple[np.ndarray, np.ndarray]:
    # ambient dimension max(d_X, d_Y)
    p, q = as_spectrum(p), as_spectrum(q)
    d = max(len(p), len(q))
    return p.padded(d), q.padded(d)


def weakly_submajorizes(p: SpectrumLike, q: SpectrumLike, tol: float = ORDER_TOL) -> bool:
    x, y = _padded_pair(p, q)
    return bool(np.all(np.cumsum(x) >= np.cumsum(y) - tol))


def majorizes(p: SpectrumLike, q: SpectrumLike, tol: float = ORDER_TOL) -> bool:
    x, y = _padded_pair(p, q)
    return weakly_submajorizes(x, y, tol) and abs(x.sum() - y.sum()) <= tol


def noisy_operation_possible(sigma: MatrixLike, rho: MatrixLike, tol: float = ORDER_TOL) -> bool:
    """σ → ρ by a noisy operation iff spec(σ) ≻ spec(ρ)."""
    return majorizes(spectrum(sigma), spectrum(rho), tol)


def hlp_matrix(p: SpectrumLike, q: SpectrumLike, tol: float = ORDER_TOL) -> TransferMatrix:
    r"""Doubly stochastic S with S p = q as a product of at most d−1 T-transforms.

    Each step takes the last index j with a surplus x_j > q_j, the first index k > j
    with a deficit x_k < q_k, and moves δ = min(x_j − q_j, q_k − x_k) from j to k.
    """
    if not majorizes(p, q, tol):
        raise PreconditionError("hlp_matrix needs p to majorize q")
    x, target = _padded_pair(p, q)
    d = x.size
    s = np.eye(d)
    for _ in range(d - 1):
        diff = x - target
        surplus = np.flatnonzero(diff > tol)
        if surplus.size == 0:
            break
        j = int(surplus[-1])
        deficits = np.flatnonzero(diff[j + 1:] < -tol)
        if deficits.size == 0:
            break
        k = j + 1 + int(deficits[0])
        delta = min(x[j] - target[j], target[k] - x[k])
        t = 1.0 - delta / (x[j] - x[k])
        step = np.eye(d)
        step[[j, k], [j, k]] = t
        step[[j, k], [k, j]] = 1.0 - t
        s = step @ s
        x = step @ x
    residual = np.abs(s @ _padded_pair(p, q)[0] - target).max()
    if residual > 1e-8:
        raise SolverError(f"T-transform chain missed the target by {residual:.3e}", residuals={'target': residual})
    return TransferMatrix(s, 'doubly_stochastic')


def _transfer_lp(x: np.ndarray, y: np.ndarray, alpha: Optional[float]) -> LpProblem:
    r"""Variables T[i, k] row-major (d_Y × d_X), plus α when ``alpha`` is None."""
    d_y, d_x = y.size, x.size
    n_t = d_y * d_x
    free_alpha = alpha is None
    n = n_t + int(free_alpha)

    col_rows = np.zeros((d_x, n))
    for k in range(d_x):
        col_rows[k, k:n_t:d_x] = 1.0
    row_rows = np.zeros((d_y, n))
    for i in range(d_y):
        row_rows[i, i * d_x:(i + 1) * d_x] = 1.0
    if free_alpha:
        row_rows[:, -1] = -1.0
        row_rhs = np.zeros(d_y)
    else:
        row_rhs = np.full(d_y, alpha)
    a_eq = np.zeros((d_y, n))
    for i in range(d_y):
        a_eq[i, i * d_x:(i + 1) * d_x] = x

    c = np.zeros(n)
    if free_alpha:
        c[-1] = 1.0
    return LpProblem(c=c, A_ub=np.vstack([col_rows, row_rows]),
                     b_ub=np.concatenate([np.ones(d_x), row_rhs]), A_eq=a_eq, b_eq=y)


def lambda_feasible(p: SpectrumLike, q: SpectrumLike, lam: float) -> Tuple[bool, Optional[TransferMatrix]]:
    r"""Is σ ⪰_λ ρ?  Returns a witness transfer matrix when it is."""
    x, y = as_spectrum(p).values, as_spectrum(q).values
    solution = solve_lp(_transfer_lp(x, y, 2.0 ** (-lam)))
    if solution.status == 'infeasible':
        return False, None
    if solution.status != 'optimal':
        raise SolverError(f"transfer LP ended with status {solution.status}", status=solution.status)
    t = solution.x.reshape(y.size, x.size)
    return True, TransferMatrix(t, 'lambda', lam)


def optimal_transfer(p: SpectrumLike, q: SpectrumLike) -> Tuple[float, TransferMatrix]:
    r"""λ_opt = −log₂ min α over the transfer LP, together with an optimal T."""
    p, q = as_spectrum(p), as_spectrum(q)
    if not (p.is_normalized() and q.is_normalized()):
        raise PreconditionError(f"absorbed randomness needs normalized spectra (totals {p.total}, {q.total})")
    x, y = p.values, q.values
    solution = solve_lp(_transfer_lp(x, y, None))
    if solution.status != 'optimal':
        raise SolverError(f"absorbed-randomness LP ended with status {solution.status}", status=solution.status)
    alpha = float(solution.x[-1])
    lam = -np.log2(alpha)
    t = solution.x[:-1].reshape(y.size, x.size)
    # the row-sum bound uses α itself so rounding in −log₂ cannot trip the check
    return lam, TransferMatrix(t, 'lambda', -np.log2(max(alpha, t.sum(axis=1).max())))


def absorbed_randomness(p: SpectrumLike, q: SpectrumLike) -> float:
    """R(σ→ρ) = sup{λ : σ ⪰_λ ρ} in bits."""
    return optimal_transfer(p, q)[0]


def t_from_substochastic(s: TransferMatrix, split: AncillaSplit, d_x: Optional[int] = None) -> TransferMatrix:
    r"""T_i^k = 2^{−λ1} Σ_{ab} S_{(b,i),(a,k)} for S on (B⊗Y) × (A⊗X)."""
    if s.kind == 'lambda':
        raise PreconditionError("t_from_substochastic expects a doubly (sub)stochastic matrix")
    n_a, n_b = split.integer_dims()
    rows, cols = s.shape
    if rows % n_b or cols % n_a:
        raise DimensionMismatch(f"matrix of shape {s.shape} does not split over ancillas ({n_b}, {n_a})")
    if d_x is not None and cols != n_a * d_x:
        raise DimensionMismatch(f"expected {n_a * d_x} columns, got {cols}")
    blocks = rearrange(s.entries, '(b i) (a k) -> b i a k', b=n_b, a=n_a)
    t = blocks.sum(axis=(0, 2)) / n_a
    return TransferMatrix(t, 'lambda', split.lam)


def substochastic_from_t(t: TransferMatrix, split: AncillaSplit) -> TransferMatrix:
    r"""S_{(b,i),(a,k)} = 2^{−λ2} T_i^k."""
    if t.kind != 'lambda':
        raise PreconditionError(f"expected a lambda transfer matrix, got {t.kind}")
    if abs(t.lam - split.lam) > 1e-9:
        raise PreconditionError(f"lambda mismatch: matrix has {t.lam}, split gives {split.lam}")
    n_a, n_b = split.integer_dims()
    s = np.kron(np.ones((n_b, n_a)), t.entries) / n_b
    return TransferMatrix(s, 'doubly_substochastic')


def check_r_bounds(p: SpectrumLike, q: SpectrumLike, tol: float = 1e-6) -> Tuple[float, float, float]:
    r"""(Hmin(q) − H₀(p), R(p→q), H₀(q) − H₀(p))."""
    p, q = as_spectrum(p), as_spectrum(q)
    lower = h_min(q).bits - h_zero(p).bits
    upper = h_zero(q).bits - h_zero(p).bits
    value = absorbed_randomness(p, q)
    if value < lower - tol or value > upper + tol:
        raise SolverError(f"absorbed randomness {value:.9f} outside [{lower:.9f}, {upper:.9f}]",
                          residuals={'below_lower': max(0.0, lower - value), 'above_upper': max(0.0, value - upper)})
    return lower, value, upper


def _is_uniform(p: Spectrum, tol: float) -> bool:
    return bool(np.abs(p.values - p.values[0]).max() <= tol and p.values[-1] > tol)


def named_closed_form(p: SpectrumLike, q: SpectrumLike, tol: float = 1e-9) -> Optional[float]:
    r"""R(p→q) when one side is pure or uniform, else None.

    R(|0⟩→ρ) = Hmin(ρ), R(σ→|0⟩) = −H₀(σ), R(u_n→ρ) = Hmin(ρ) − log n, R(σ→u_n) = log n − H₀(σ).
    """
    p, q = as_spectrum(p), as_spectrum(q)
    if p.rank() == 1:
        return h_min(q).bits
    if q.rank() == 1:
        return -h_zero(p).bits
    if _is_uniform(p, tol):
        return h_min(q).bits - np.log2(len(p))
    if _is_uniform(q, tol):
        return np.log2(len(q)) - h_zero(p).bits
    return None


def uniform(n: int) -> Spectrum:
    return Spectrum(np.full(n, 1.0 / n))


def random_spectrum(d: int, rng: np.random.Generator, rank: Optional[int] = None) -> Spectrum:
    k = d if rank is None else rank
    weights = rng.dirichlet(np.ones(k))
    return Spectrum(np.concatenate([weights, np.zeros(d - k)]))
