from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from einops import rearrange
from scipy.stats import unitary_group

from src.exceptions import (
    BasisMismatch,
    DimensionMismatch,
    NotHermitianError,
    NotNormalizedError,
    PreconditionError,
)
from src.utils import support_tol

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
SPECTRUM_CLAMP = 1e-12
ABS_FLOOR = 1e-15


def _dims_tuple(dims, total: int) -> Tuple[int, ...]:
    dims = (total,) if dims is None else tuple(int(d) for d in dims)
    if any(d < 1 for d in dims) or int(np.prod(dims)) != total:
        raise DimensionMismatch(f"dims {dims} do not multiply to {total}")
    return dims


def _check_square(m: np.ndarray, what: str = 'matrix') -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"{what} must be square, got shape {m.shape}")


@dataclass(frozen=True)
class Spectrum:
    r"""Descending, nonnegative eigenvalue vector.

    Entries in [-1e-12, 0) are clamped to zero; anything more negative is rejected.
    """
    values: np.ndarray

    def __post_init__(self):
        values = np.atleast_1d(np.asarray(self.values, dtype=float)).ravel()
        if values.size == 0:
            raise DimensionMismatch("empty spectrum")
        if not np.all(np.isfinite(values)):
            raise PreconditionError("spectrum has non-finite entries")
        if values.min() < -SPECTRUM_CLAMP:
            raise PreconditionError(f"negative spectrum entry {values.min():.3e}")
        values = np.clip(values, 0.0, None)
        values = values[np.argsort(-values, kind='stable')]
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    def __len__(self) -> int:
        return self.values.size

    def __iter__(self):
        return iter(self.values)

    @property
    def total(self) -> float:
        return float(self.values.sum())

    @property
    def max(self) -> float:
        return float(self.values[0])

    def rank(self, tol: Optional[float] = None) -> int:
        tol = support_tol() if tol is None else tol
        threshold = max(tol * self.values[0], ABS_FLOOR)
        return int(np.count_nonzero(self.values > threshold))

    def is_normalized(self, tol: float = 1e-9) -> bool:
        return abs(self.total - 1.0) <= tol

    def padded(self, length: int) -> np.ndarray:
        assert length >= len(self), (length, len(self))
        return np.concatenate([self.values, np.zeros(length - len(self))])

    def tensor(self, other: 'Spectrum') -> 'Spectrum':
        return Spectrum(np.kron(self.values, other.values))

    def direct_sum(self, other: 'Spectrum') -> 'Spectrum':
        return Spectrum(np.concatenate([self.values, other.values]))

    def scaled(self, factor: float) -> 'Spectrum':
        return Spectrum(self.values * factor)

    def as_density(self) -> 'DensityOperator':
        return DensityOperator(np.diag(self.values).astype(complex), (len(self),),
                               subnormalized=self.total < 1 - 1e-9)


@dataclass(frozen=True)
class DensityOperator:
    matrix: np.ndarray
    dims: Optional[Tuple[int, ...]] = None
    trace_tol: float = 1e-9
    subnormalized: bool = False

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        _check_square(m, 'density operator')
        if not np.all(np.isfinite(m)):
            raise PreconditionError("density operator has non-finite entries")
        dims = _dims_tuple(self.dims, m.shape[0])
        scale = max(1.0, float(np.abs(m).max()))
        if np.abs(m - m.conj().T).max() > HERMITIAN_TOL * scale:
            raise NotHermitianError(f"density operator not Hermitian: {np.abs(m - m.conj().T).max():.3e}")
        m = (m + m.conj().T) / 2
        lam_min = np.linalg.eigvalsh(m)[0]
        if lam_min < -PSD_TOL:
            raise PreconditionError(f"density operator not PSD: min eigenvalue {lam_min:.3e}")
        tr = float(np.trace(m).real)
        if self.subnormalized:
            if tr > 1 + self.trace_tol:
                raise NotNormalizedError(f"subnormalized state has trace {tr}")
        elif abs(tr - 1) > self.trace_tol:
            raise NotNormalizedError(f"trace {tr} is not 1 (use subnormalized=True for trace < 1)")
        m.setflags(write=False)
        object.__setattr__(self, 'matrix', m)
        object.__setattr__(self, 'dims', dims)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def ptrace(self, keep: Sequence[int]) -> 'DensityOperator':
        keep = sorted(keep)
        reduced = partial_trace(self.matrix, self.dims, keep)
        return DensityOperator(reduced, tuple(self.dims[k] for k in keep),
                               trace_tol=self.trace_tol, subnormalized=self.subnormalized)

    def is_pure(self, tol: float = 1e-8) -> bool:
        return abs(np.trace(self.matrix @ self.matrix).real - self.trace ** 2) <= tol

    def spectrum(self) -> Spectrum:
        return spectrum(self)


@dataclass(frozen=True)
class PureStateVector:
    amplitudes: np.ndarray
    dims: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        amp = np.array(self.amplitudes, dtype=complex).ravel()
        dims = _dims_tuple(self.dims, amp.size)
        norm2 = float(np.vdot(amp, amp).real)
        if abs(norm2 - 1) > 1e-10:
            raise NotNormalizedError(f"pure state has squared norm {norm2}")
        amp.setflags(write=False)
        object.__setattr__(self, 'amplitudes', amp)
        object.__setattr__(self, 'dims', dims)

    def density(self) -> DensityOperator:
        return DensityOperator(np.outer(self.amplitudes, self.amplitudes.conj()), self.dims)

    def as_matrix(self, cut: int) -> np.ndarray:
        r = int(np.prod(self.dims[cut:]))
        return rearrange(self.amplitudes, '(l r) -> l r', r=r)


@dataclass(frozen=True)
class ProjectorOp:
    matrix: np.ndarray
    rank: int

    def __post_init__(self):
        p = np.array(self.matrix, dtype=complex)
        _check_square(p, 'projector')
        if np.abs(p - p.conj().T).max() > 1e-9:
            raise NotHermitianError("projector not Hermitian")
        if np.linalg.norm(p @ p - p) > 1e-9:
            raise PreconditionError(f"not idempotent: {np.linalg.norm(p @ p - p):.3e}")
        rank = int(round(np.trace(p).real))
        if rank != int(self.rank):
            raise PreconditionError(f"declared rank {self.rank} but trace is {rank}")
        p.setflags(write=False)
        object.__setattr__(self, 'matrix', p)
        object.__setattr__(self, 'rank', rank)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def full(cls, d: int) -> 'ProjectorOp':
        return cls(np.eye(d, dtype=complex), d)


@dataclass(frozen=True)
class PartialIsometryOp:
    r"""V with V†V = source_support and VV† = target_support.

    ``target_dims`` records the tensor structure of the target space (e.g. [d_X', d_E]).
    """
    matrix: np.ndarray
    source_support: ProjectorOp
    target_support: ProjectorOp
    target_dims: Optional[Tuple[int, ...]] = None
    tol: float = 1e-9

    def __post_init__(self):
        v = np.array(self.matrix, dtype=complex)
        assert v.ndim == 2, v.shape
        if v.shape != (self.target_support.dim, self.source_support.dim):
            raise DimensionMismatch(f"isometry shape {v.shape} vs supports "
                                    f"({self.target_support.dim}, {self.source_support.dim})")
        err_src = np.abs(v.conj().T @ v - self.source_support.matrix).max()
        err_tgt = np.abs(v @ v.conj().T - self.target_support.matrix).max()
        if max(err_src, err_tgt) > self.tol:
            raise PreconditionError(f"partial isometry identities violated: "
                                    f"V†V err {err_src:.3e}, VV† err {err_tgt:.3e}")
        v.setflags(write=False)
        object.__setattr__(self, 'matrix', v)
        object.__setattr__(self, 'target_dims', _dims_tuple(self.target_dims, v.shape[0]))


class SchmidtDecomposition(NamedTuple):
    coefficients: np.ndarray   # √p_i, descending order of the supplied basis
    left_vectors: np.ndarray   # columns |x_i⟩
    indices: np.ndarray        # positions in r_basis that were kept


MatrixLike = Union[np.ndarray, DensityOperator, ProjectorOp, PureStateVector, Sequence]


def as_matrix(x: MatrixLike) -> np.ndarray:
    if isinstance(x, (DensityOperator, ProjectorOp, PartialIsometryOp)):
        return x.matrix
    if isinstance(x, PureStateVector):
        return np.outer(x.amplitudes, x.amplitudes.conj())
    return np.asarray(x, dtype=complex)


def tensor(a: MatrixLike, b: MatrixLike) -> np.ndarray:
    return np.kron(as_matrix(a), as_matrix(b))


def direct_sum(a: MatrixLike, b: MatrixLike) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    _check_square(a)
    _check_square(b)
    return scipy.linalg.block_diag(a, b)


def partial_trace(m: MatrixLike, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    r"""Trace out every subsystem not listed in ``keep``.

    Args:
        m: square matrix on the tensor product of ``dims``
        dims: subsystem dimensions, first factor most significant
        keep: subsystems to retain, returned in ascending order
    """
    m = as_matrix(m)
    _check_square(m)
    dims = list(_dims_tuple(dims, m.shape[0]))
    n = len(dims)
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= n for k in keep):
        raise DimensionMismatch(f"subsystem index out of range: {keep} for {n} subsystems")
    t = m.reshape(dims + dims)
    rows = list(range(n))
    cols = [n + i if i in keep else i for i in range(n)]
    out = [rows[k] for k in keep] + [cols[k] for k in keep]
    reduced = np.einsum(t, rows + cols, out)
    dk = int(np.prod([dims[k] for k in keep])) if keep else 1
    return reduced.reshape(dk, dk)


def permute_subsystems(m: MatrixLike, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    m = as_matrix(m)
    dims = list(_dims_tuple(dims, m.shape[0]))
    n = len(dims)
    assert sorted(perm) == list(range(n)), perm
    t = m.reshape(dims + dims).transpose(list(perm) + [n + p for p in perm])
    return t.reshape(m.shape)


def permute_pure(psi: PureStateVector, perm: Sequence[int]) -> PureStateVector:
    dims = list(psi.dims)
    assert sorted(perm) == list(range(len(dims))), perm
    t = psi.amplitudes.reshape(dims).transpose(list(perm))
    return PureStateVector(t.reshape(-1), tuple(dims[p] for p in perm))


def partial_transpose(m: MatrixLike, dims: Sequence[int], sys: int) -> np.ndarray:
    # computational basis of subsystem `sys`
    m = as_matrix(m)
    dims = list(_dims_tuple(dims, m.shape[0]))
    n = len(dims)
    if not 0 <= sys < n:
        raise DimensionMismatch(f"subsystem index {sys} out of range")
    t = m.reshape(dims + dims).swapaxes(sys, n + sys)
    return t.reshape(m.shape)


def eig_hermitian(h: MatrixLike, tol: float = 1e-10) -> Tuple[np.ndarray, np.ndarray]:
    r"""Eigen-decomposition of a Hermitian matrix.

    Returns:
        values (np.ndarray): real, descending; ties keep ascending original index
        vectors (np.ndarray): orthonormal eigenvectors as columns
    """
    h = as_matrix(h)
    _check_square(h)
    scale = max(1.0, float(np.abs(h).max()))
    if np.abs(h - h.conj().T).max() > tol * scale:
        raise NotHermitianError(f"matrix not Hermitian: {np.abs(h - h.conj().T).max():.3e}")
    w, v = np.linalg.eigh((h + h.conj().T) / 2)
    order = np.argsort(-w, kind='stable')
    return w[order], v[:, order]


def spectrum(rho: MatrixLike) -> Spectrum:
    if isinstance(rho, Spectrum):
        return rho
    w, _ = eig_hermitian(rho)
    return Spectrum(np.where(np.abs(w) <= PSD_TOL * max(1.0, abs(w[0])), 0.0, w))


def lambda_max(h: MatrixLike) -> float:
    return float(eig_hermitian(h)[0][0])


def support_projector(h: MatrixLike, tol: Optional[float] = None) -> ProjectorOp:
    r"""Projector onto eigenvectors with eigenvalue above ``tol`` times the largest eigenvalue."""
    tol = support_tol() if tol is None else tol
    w, v = eig_hermitian(h, tol=max(tol, 1e-10))
    threshold = max(tol * max(w[0], 0.0), ABS_FLOOR)
    kept = v[:, w > threshold]
    return ProjectorOp(kept @ kept.conj().T, kept.shape[1])


def rank(h: MatrixLike, tol: Optional[float] = None) -> int:
    return support_projector(h, tol).rank


def psd_sqrt(h: MatrixLike) -> np.ndarray:
    w, v = eig_hermitian(h, tol=1e-8)
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def pinv_psd(h: MatrixLike, tol: Optional[float] = None) -> np.ndarray:
    r"""Inverse on the support, zero on the kernel (support tolerance as in support_projector)."""
    tol = support_tol() if tol is None else tol
    w, v = eig_hermitian(h, tol=1e-8)
    threshold = max(tol * max(w[0], 0.0), ABS_FLOOR)
    inv = np.where(w > threshold, 1.0 / np.where(w > threshold, w, 1.0), 0.0)
    return (v * inv) @ v.conj().T


def _normalized_state(rho: Union[DensityOperator, np.ndarray]) -> DensityOperator:
    if not isinstance(rho, DensityOperator):
        rho = DensityOperator(rho)
    if rho.subnormalized and abs(rho.trace - 1) > rho.trace_tol:
        raise NotNormalizedError(f"purification needs a normalized state, trace is {rho.trace}")
    return rho


def canonical_purification(rho: Union[DensityOperator, np.ndarray]) -> PureStateVector:
    r"""|ψ⟩ = Σ_i √p_i |v_i⟩_X |i⟩_R with R of the same dimension as X.

    The reference basis is computational, so σ_R = diag(p) in descending order.
    """
    rho = _normalized_state(rho)
    w, v = eig_hermitian(rho.matrix)
    amp = v * np.sqrt(np.clip(w, 0, None))  # [x, i]
    amp = amp / np.linalg.norm(amp)
    return PureStateVector(amp.reshape(-1), tuple(rho.dims) + (rho.dim,))


def minimal_purification(rho: Union[DensityOperator, np.ndarray],
                         tol: Optional[float] = None) -> PureStateVector:
    """Purification whose reference dimension equals rank(ρ)."""
    rho = _normalized_state(rho)
    tol = support_tol() if tol is None else tol
    w, v = eig_hermitian(rho.matrix)
    kept = w > max(tol * w[0], ABS_FLOOR)
    amp = v[:, kept] * np.sqrt(w[kept])
    amp = amp / np.linalg.norm(amp)
    return PureStateVector(amp.reshape(-1), tuple(rho.dims) + (int(kept.sum()),))


def schmidt_relative(psi: PureStateVector, cut: int, r_basis: np.ndarray,
                     tol: Optional[float] = None, basis_tol: float = 1e-9) -> SchmidtDecomposition:
    r"""Schmidt decomposition of ``psi`` against a fixed orthonormal basis of the right factor.

    Args:
        psi: pure state; subsystems ``[:cut]`` form the left part, ``[cut:]`` the right
        r_basis: columns |r_i⟩, must diagonalize the right marginal
    Returns:
        coefficients √p_i and left vectors |x_i⟩ = (I ⊗ ⟨r_i|)|ψ⟩ / √p_i for p_i above tolerance
    """
    tol = support_tol() if tol is None else tol
    m = psi.as_matrix(cut)  # [l, r]
    r_basis = np.asarray(r_basis, dtype=complex)
    if r_basis.shape != (m.shape[1], m.shape[1]):
        raise DimensionMismatch(f"r_basis shape {r_basis.shape} vs right dimension {m.shape[1]}")
    if np.abs(r_basis.conj().T @ r_basis - np.eye(m.shape[1])).max() > 1e-9:
        raise BasisMismatch("r_basis is not orthonormal")
    rho_r = m.T @ m.conj()
    rotated = r_basis.conj().T @ rho_r @ r_basis
    off_diag = np.abs(rotated - np.diag(np.diag(rotated))).max()
    if off_diag > basis_tol:
        raise BasisMismatch(f"r_basis does not diagonalize the marginal (off-diagonal {off_diag:.3e})")
    cols = m @ r_basis.conj()  # column i = (I ⊗ ⟨r_i|)|ψ⟩
    p = np.einsum('li,li->i', cols.conj(), cols).real
    kept = np.flatnonzero(p > max(tol * p.max(), ABS_FLOOR))
    coefficients = np.sqrt(p[kept])
    return SchmidtDecomposition(coefficients, cols[:, kept] / coefficients, kept)


def fidelity(rho: MatrixLike, sigma: MatrixLike) -> float:
    r"""F(ρ,σ) = ‖√ρ √σ‖₁."""
    a, b = as_matrix(rho), as_matrix(sigma)
    if a.shape != b.shape:
        raise DimensionMismatch(f"fidelity of shapes {a.shape} and {b.shape}")
    return float(np.linalg.svd(psd_sqrt(a) @ psd_sqrt(b), compute_uv=False).sum())


def trace_distance(rho: MatrixLike, sigma: MatrixLike) -> float:
    a, b = as_matrix(rho), as_matrix(sigma)
    if a.shape != b.shape:
        raise DimensionMismatch(f"trace distance of shapes {a.shape} and {b.shape}")
    return float(0.5 * np.abs(np.linalg.eigvalsh((a - b + (a - b).conj().T) / 2)).sum())


def hermitian_basis(n: int) -> np.ndarray:
    r"""Orthonormal basis of n×n Hermitian matrices under Re tr(AB).

    Order: diagonal units, then for each k<l the symmetric (E_kl+E_lk)/√2 and
    antisymmetric i(E_kl−E_lk)/√2 elements. Shape (n², n, n).
    """
    basis = np.zeros((n * n, n, n), dtype=complex)
    for k in range(n):
        basis[k, k, k] = 1.0
    idx = n
    for k in range(n):
        for l in range(k + 1, n):
            basis[idx, k, l] = basis[idx, l, k] = 1 / np.sqrt(2)
            basis[idx + 1, k, l] = 1j / np.sqrt(2)
            basis[idx + 1, l, k] = -1j / np.sqrt(2)
            idx += 2
    return basis


def hvec(h: MatrixLike) -> np.ndarray:
    h = as_matrix(h)
    return np.einsum('kij,ji->k', hermitian_basis(h.shape[0]), h).real


def hmat(v: np.ndarray) -> np.ndarray:
    n = int(round(np.sqrt(len(v))))
    assert n * n == len(v), len(v)
    return np.einsum('k,kij->ij', np.asarray(v, dtype=float), hermitian_basis(n))


def ket(index: int, d: int) -> np.ndarray:
    v = np.zeros(d, dtype=complex)
    v[index] = 1.0
    return v


def projector_onto(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec, dtype=complex)
    return np.outer(vec, vec.conj()) / np.vdot(vec, vec).real


def maximally_entangled(d: int) -> PureStateVector:
    return PureStateVector(np.eye(d, dtype=complex).reshape(-1) / np.sqrt(d), (d, d))


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    if d == 1:
        return np.exp(2j * np.pi * rng.random()) * np.ones((1, 1))
    return unitary_group.rvs(d, random_state=rng)


def random_density(d: int, rng: np.random.Generator, rank: Optional[int] = None,
                   dims: Optional[Sequence[int]] = None) -> DensityOperator:
    k = d if rank is None else rank
    g = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    rho = g @ g.conj().T
    return DensityOperator(rho / np.trace(rho).real, dims)


def random_pure(dims: Sequence[int], rng: np.random.Generator) -> PureStateVector:
    d = int(np.prod(dims))
    amp = rng.normal(size=d) + 1j * rng.normal(size=d)
    return PureStateVector(amp / np.linalg.norm(amp), tuple(dims))
