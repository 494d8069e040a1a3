r"""Completely positive maps in Choi form.

Index convention (input-major): choi = Σ_ij |i⟩⟨j| ⊗ E(|i⟩⟨j|), so with the 4-index
view J[i, a, j, b] = E(|i⟩⟨j|)_{ab} we have E(ρ)_{ab} = Σ_ij ρ_ij J[i, a, j, b].
"""
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np
from einops import rearrange

from src.exceptions import DimensionMismatch, NotHermitianError, PreconditionError
from src.majorize import AncillaSplit, TransferMatrix
from src.qmat import (
    PSD_TOL,
    DensityOperator,
    MatrixLike,
    ProjectorOp,
    as_matrix,
    eig_hermitian,
    partial_trace,
    random_unitary,
)
from src.utils import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class ChoiMap:
    choi: np.ndarray
    dim_in: int
    dim_out: int

    def __post_init__(self):
        j = np.array(self.choi, dtype=complex)
        n = int(self.dim_in) * int(self.dim_out)
        if j.shape != (n, n):
            raise DimensionMismatch(f"Choi matrix of shape {j.shape} for a {self.dim_in}->{self.dim_out} map")
        if not np.all(np.isfinite(j)):
            raise PreconditionError("Choi matrix has non-finite entries")
        scale = max(1.0, float(np.abs(j).max()))
        if np.abs(j - j.conj().T).max() > 1e-9 * scale:
            raise NotHermitianError("Choi matrix not Hermitian (map is not Hermitian-preserving)")
        j = (j + j.conj().T) / 2
        lam_min = np.linalg.eigvalsh(j)[0]
        if lam_min < -PSD_TOL * scale:
            raise PreconditionError(f"map is not completely positive: Choi eigenvalue {lam_min:.3e}")
        j.setflags(write=False)
        object.__setattr__(self, 'choi', j)
        object.__setattr__(self, 'dim_in', int(self.dim_in))
        object.__setattr__(self, 'dim_out', int(self.dim_out))

    @property
    def choi4(self) -> np.ndarray:
        return rearrange(self.choi, '(i a) (j b) -> i a j b', i=self.dim_in, j=self.dim_in)


@dataclass(frozen=True)
class ChannelFlags:
    trace_nonincreasing: bool
    subunital_alpha: float
    unital: bool
    trace_preserving: bool

    @property
    def subunital(self) -> bool:
        return self.subunital_alpha <= 1 + 1e-9


# ------------------------------------------------------------------------------------------ #
# representations
# ------------------------------------------------------------------------------------------ #

def choi_from_function(f: Callable[[np.ndarray], np.ndarray], dim_in: int, dim_out: int) -> ChoiMap:
    j4 = np.zeros((dim_in, dim_out, dim_in, dim_out), dtype=complex)
    for i in range(dim_in):
        for k in range(dim_in):
            unit = np.zeros((dim_in, dim_in), dtype=complex)
            unit[i, k] = 1.0
            j4[i, :, k, :] = f(unit)
    return ChoiMap(rearrange(j4, 'i a j b -> (i a) (j b)'), dim_in, dim_out)


def choi_from_kraus(kraus: Sequence[np.ndarray]) -> ChoiMap:
    ks = np.stack([np.atleast_2d(np.asarray(k, dtype=complex)) for k in kraus])
    _, dim_out, dim_in = ks.shape
    j4 = np.einsum('kai,kbj->iajb', ks, ks.conj())
    return ChoiMap(rearrange(j4, 'i a j b -> (i a) (j b)'), dim_in, dim_out)


def kraus_from_choi(chan: ChoiMap, tol: float = 1e-12) -> List[np.ndarray]:
    r"""K = √μ · reshape(v, (d_in, d_out))ᵀ for each Choi eigenpair (μ, v) with μ > tol·μ_max."""
    values, vectors = eig_hermitian(chan.choi, tol=1e-8)
    if values[0] <= 0:
        return [np.zeros((chan.dim_out, chan.dim_in), dtype=complex)]
    kept = values > tol * values[0]
    return [np.sqrt(mu) * v.reshape(chan.dim_in, chan.dim_out).T
            for mu, v in zip(values[kept], vectors[:, kept].T)]


# ------------------------------------------------------------------------------------------ #
# application
# ------------------------------------------------------------------------------------------ #

def apply_matrix(chan: ChoiMap, m: MatrixLike) -> np.ndarray:
    """Linear action on any d_in × d_in matrix."""
    m = as_matrix(m)
    if m.shape != (chan.dim_in, chan.dim_in):
        raise DimensionMismatch(f"map expects {chan.dim_in}x{chan.dim_in} input, got {m.shape}")
    return np.einsum('ij,iajb->ab', m, chan.choi4)


def _as_state(m: np.ndarray, dims: Sequence[int]) -> DensityOperator:
    tr = float(np.trace(m).real)
    return DensityOperator(m, tuple(dims), subnormalized=tr < 1 - 1e-9)


def apply(chan: ChoiMap, rho: MatrixLike) -> DensityOperator:
    """E(ρ) as a (possibly subnormalized) state."""
    return _as_state(apply_matrix(chan, rho), (chan.dim_out,))


def apply_on_subsystem_matrix(chan: ChoiMap, m: MatrixLike, dims: Sequence[int], acting: int) -> np.ndarray:
    m = as_matrix(m)
    dims = [int(d) for d in dims]
    n = len(dims)
    if not 0 <= acting < n:
        raise DimensionMismatch(f"subsystem {acting} out of range for dims {dims}")
    if dims[acting] != chan.dim_in:
        raise DimensionMismatch(f"subsystem {acting} has dimension {dims[acting]}, map expects {chan.dim_in}")
    if m.shape[0] != int(np.prod(dims)):
        raise DimensionMismatch(f"dims {dims} do not match matrix of size {m.shape[0]}")
    rows, cols = list(range(n)), list(range(n, 2 * n))
    new_row, new_col = 2 * n, 2 * n + 1
    out_rows = [new_row if k == acting else k for k in rows]
    out_cols = [new_col if k == acting else n + k for k in range(n)]
    t = m.reshape(dims + dims)
    out = np.einsum(t, rows + cols, chan.choi4, [acting, new_row, n + acting, new_col], out_rows + out_cols)
    d_out = int(np.prod(dims)) // dims[acting] * chan.dim_out
    return out.reshape(d_out, d_out)


def apply_on_subsystem(chan: ChoiMap, rho: MatrixLike, acting: int,
                       dims: Optional[Sequence[int]] = None) -> DensityOperator:
    """(E ⊗ id)(ρ) with E acting on subsystem ``acting``."""
    if dims is None:
        if not isinstance(rho, DensityOperator):
            raise DimensionMismatch("subsystem dims are required for a bare matrix")
        dims = rho.dims
    out = apply_on_subsystem_matrix(chan, rho, dims, acting)
    new_dims = [chan.dim_out if k == acting else d for k, d in enumerate(dims)]
    return _as_state(out, new_dims)


def adjoint(chan: ChoiMap) -> ChoiMap:
    r"""Hilbert–Schmidt adjoint: J†[a, i, b, j] = J[j, b, i, a]."""
    adj4 = np.transpose(chan.choi4, (3, 2, 1, 0))
    return ChoiMap(rearrange(adj4, 'a i b j -> (a i) (b j)'), chan.dim_out, chan.dim_in)


def verify_flags(chan: ChoiMap, tol: float = 1e-9) -> ChannelFlags:
    image = apply_matrix(chan, np.eye(chan.dim_in))
    pulled = apply_matrix(adjoint(chan), np.eye(chan.dim_out))
    alpha = float(eig_hermitian(image, tol=1e-8)[0][0])
    tni = float(eig_hermitian(pulled, tol=1e-8)[0][0]) <= 1 + tol
    unital = chan.dim_in == chan.dim_out and np.abs(image - np.eye(chan.dim_out)).max() <= tol
    trace_preserving = np.abs(pulled - np.eye(chan.dim_in)).max() <= tol
    return ChannelFlags(bool(tni), alpha, bool(unital), bool(trace_preserving))


def compose(second: ChoiMap, first: ChoiMap) -> ChoiMap:
    """second ∘ first."""
    if first.dim_out != second.dim_in:
        raise DimensionMismatch(f"cannot compose {first.dim_in}->{first.dim_out} with "
                                f"{second.dim_in}->{second.dim_out}")
    j4 = np.einsum('iajb,acbd->icjd', first.choi4, second.choi4)
    return ChoiMap(rearrange(j4, 'i c j d -> (i c) (j d)'), first.dim_in, second.dim_out)


def tensor_channel(first: ChoiMap, second: ChoiMap) -> ChoiMap:
    """first ⊗ second acting on the tensor product of their inputs."""
    kraus = [np.kron(a, b) for a in kraus_from_choi(first) for b in kraus_from_choi(second)]
    return choi_from_kraus(kraus)


# ------------------------------------------------------------------------------------------ #
# subunital calculus
# ------------------------------------------------------------------------------------------ #

def _psd_root(h: np.ndarray, what: str, tol: float) -> np.ndarray:
    w, v = eig_hermitian(h, tol=1e-8)
    if w[-1] < -tol:
        raise PreconditionError(f"{what} is not positive semidefinite (min eigenvalue {w[-1]:.3e})")
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def dilate_to_unital(chan: ChoiMap, tol: float = 1e-9) -> ChoiMap:
    r"""Unital, trace-preserving, self-adjoint map on X⊕Y with chan as its X→Y corner.

        F(M) = [E†(M_YY) + √H M_XX √H] ⊕ [E(M_XX) + √G M_YY √G]

    with G = I_Y − E(I_X) and H = I_X − E†(I_Y); off-diagonal blocks are discarded.
    """
    d_x, d_y = chan.dim_in, chan.dim_out
    adj = adjoint(chan)
    root_g = _psd_root(np.eye(d_y) - apply_matrix(chan, np.eye(d_x)), 'I - E(I) (map not subunital)', tol)
    root_h = _psd_root(np.eye(d_x) - apply_matrix(adj, np.eye(d_y)), 'I - E^dag(I) (map not trace-nonincreasing)', tol)

    def dilated(m):
        m_xx, m_yy = m[:d_x, :d_x], m[d_x:, d_x:]
        out = np.zeros_like(m)
        out[:d_x, :d_x] = apply_matrix(adj, m_yy) + root_h @ m_xx @ root_h
        out[d_x:, d_x:] = apply_matrix(chan, m_xx) + root_g @ m_yy @ root_g
        return out

    return choi_from_function(dilated, d_x + d_y, d_x + d_y)


def corner(chan: ChoiMap, dim_x: int, dim_y: int) -> ChoiMap:
    r"""The X→Y block Π_Y F(Π_X · Π_X) Π_Y of a map F on X⊕Y."""
    if chan.dim_in != dim_x + dim_y or chan.dim_out != dim_x + dim_y:
        raise DimensionMismatch(f"map {chan.dim_in}->{chan.dim_out} is not on a {dim_x}+{dim_y} direct sum")

    def block(m):
        full = np.zeros((dim_x + dim_y, dim_x + dim_y), dtype=complex)
        full[:dim_x, :dim_x] = m
        return apply_matrix(chan, full)[dim_x:, dim_x:]

    return choi_from_function(block, dim_x, dim_y)


def restrict(chan: ChoiMap, pi_in: ProjectorOp, pi_out: ProjectorOp) -> ChoiMap:
    r"""Π_out E(Π_in · Π_in) Π_out."""
    p_in, p_out = as_matrix(pi_in), as_matrix(pi_out)
    if p_in.shape[0] != chan.dim_in or p_out.shape[0] != chan.dim_out:
        raise DimensionMismatch("projector dimensions do not match the map")
    return choi_from_function(lambda m: p_out @ apply_matrix(chan, p_in @ m @ p_in) @ p_out,
                              chan.dim_in, chan.dim_out)


def embed_tmap(t: ChoiMap, split: AncillaSplit, tol: float = 1e-9) -> ChoiMap:
    r"""E_{AX→BY}(M) = 2^{−λ2} I_B ⊗ T(tr_A M) with |A| = 2^{λ1}, |B| = 2^{λ2}."""
    n_a, n_b = split.integer_dims()
    flags = verify_flags(t, tol)
    if flags.subunital_alpha > 2.0 ** (-split.lam) + tol:
        raise PreconditionError(f"map is {flags.subunital_alpha:.9f}-subunital, "
                                f"needs at most 2^-lambda = {2.0 ** (-split.lam):.9f}")
    if not flags.trace_nonincreasing:
        raise PreconditionError("map is not trace-nonincreasing")
    d_x, d_y = t.dim_in, t.dim_out

    def embedded(m):
        reduced = partial_trace(m, [n_a, d_x], [1])
        return np.kron(np.eye(n_b), apply_matrix(t, reduced)) / n_b

    return choi_from_function(embedded, n_a * d_x, n_b * d_y)


def extract_tmap(e: ChoiMap, split: AncillaSplit) -> ChoiMap:
    r"""T(σ) = tr_B E(2^{−λ1} I_A ⊗ σ)."""
    n_a, n_b = split.integer_dims()
    if e.dim_in % n_a or e.dim_out % n_b:
        raise DimensionMismatch(f"map {e.dim_in}->{e.dim_out} does not factor over ancillas ({n_a}, {n_b})")
    d_x, d_y = e.dim_in // n_a, e.dim_out // n_b

    def extracted(sigma):
        out = apply_matrix(e, np.kron(np.eye(n_a) / n_a, sigma))
        return partial_trace(out, [n_b, d_y], [1])

    return choi_from_function(extracted, d_x, d_y)


def lambda_channel(t: TransferMatrix, in_basis: Optional[np.ndarray] = None,
                   out_basis: Optional[np.ndarray] = None) -> ChoiMap:
    r"""T(·) = Σ_ik T_i^k |y_i⟩⟨x_k| · |x_k⟩⟨y_i|, the channel acting as ``t`` on eigenbases."""
    d_y, d_x = t.shape
    x = np.eye(d_x, dtype=complex) if in_basis is None else np.asarray(in_basis, dtype=complex)
    y = np.eye(d_y, dtype=complex) if out_basis is None else np.asarray(out_basis, dtype=complex)
    if x.shape != (d_x, d_x) or y.shape != (d_y, d_y):
        raise DimensionMismatch(f"bases {x.shape}, {y.shape} for a transfer matrix of shape {t.shape}")
    kraus = [np.sqrt(t.entries[i, k]) * np.outer(y[:, i], x[:, k].conj())
             for i in range(d_y) for k in range(d_x) if t.entries[i, k] > 0]
    if not kraus:
        return ChoiMap(np.zeros((d_x * d_y, d_x * d_y)), d_x, d_y)
    return choi_from_kraus(kraus)


# ------------------------------------------------------------------------------------------ #
# standard maps
# ------------------------------------------------------------------------------------------ #

def identity_channel(d: int) -> ChoiMap:
    return choi_from_kraus([np.eye(d)])


def unitary_channel(u: np.ndarray) -> ChoiMap:
    return choi_from_kraus([np.asarray(u, dtype=complex)])


def erasure_channel(d: int) -> ChoiMap:
    """Reset to |0⟩, Kraus operators |0⟩⟨i|."""
    kraus = []
    for i in range(d):
        k = np.zeros((d, d), dtype=complex)
        k[0, i] = 1.0
        kraus.append(k)
    return choi_from_kraus(kraus)


def replacement_channel(state: MatrixLike, dim_in: int) -> ChoiMap:
    """M ↦ tr(M) · state."""
    target = as_matrix(state)
    return choi_from_function(lambda m: np.trace(m) * target, dim_in, target.shape[0])


def reset_subsystem_channel(dims: Sequence[int], reset: int) -> ChoiMap:
    """Erasure of one tensor factor, identity on the others."""
    chan = None
    for k, d in enumerate(dims):
        factor = erasure_channel(d) if k == reset else identity_channel(d)
        chan = factor if chan is None else tensor_channel(chan, factor)
    return chan


def random_cp_map(dim_in: int, dim_out: int, rng: np.random.Generator, n_kraus: Optional[int] = None) -> ChoiMap:
    n_kraus = dim_in * dim_out if n_kraus is None else n_kraus
    kraus = rng.normal(size=(n_kraus, dim_out, dim_in)) + 1j * rng.normal(size=(n_kraus, dim_out, dim_in))
    return choi_from_kraus(list(kraus))


def random_channel(dim_in: int, dim_out: int, rng: np.random.Generator, n_kraus: Optional[int] = None) -> ChoiMap:
    r"""Trace-preserving map from a Haar-random isometry X → X' ⊗ E."""
    n_kraus = dim_in * dim_out if n_kraus is None else n_kraus
    v = random_unitary(dim_out * n_kraus, rng)[:, :dim_in]
    return choi_from_kraus([v[k * dim_out:(k + 1) * dim_out] for k in range(n_kraus)])


def scale_to_subunital(chan: ChoiMap, factor: float = 1.0) -> ChoiMap:
    """Rescale so the map is subunital and trace-nonincreasing, then by ``factor`` ≤ 1."""
    flags = verify_flags(chan)
    tni = float(eig_hermitian(apply_matrix(adjoint(chan), np.eye(chan.dim_out)), tol=1e-8)[0][0])
    norm = max(flags.subunital_alpha, tni)
    return ChoiMap(chan.choi * (factor / norm), chan.dim_in, chan.dim_out)
