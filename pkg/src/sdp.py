r"""Small dense LP / SDP solvers and the work-cost program.

LP: tableau simplex with Bland's rule. Artificial variables are priced with a
symbolic big-M, i.e. reduced costs are compared lexicographically as
(M-part, cost-part), which is the M → ∞ limit of the big-M method and needs no
numerical choice of M.

SDP: standard form over complex Hermitian blocks

    min  Σ_b Re tr(C_b X_b)   s.t.  Σ_b Re tr(A_ib X_b) = b_i,   X_b ⪰ 0
    max  bᵀy                  s.t.  C_b − Σ_i y_i A_ib = S_b ⪰ 0

solved by an infeasible primal-dual path-following method with Nesterov–Todd
scaling and a Mehrotra-type centring choice, on the real symmetric embedding
X ↦ [[Re X, −Im X], [Im X, Re X]] of every block of dimension > 1.
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from src.exceptions import DimensionMismatch, MarginalMismatch, PreconditionError
from src.qmat import (DensityOperator, as_matrix, hermitian_basis, partial_trace, pinv_psd, rank,
                      support_projector)
from src.utils import get_logger, load_config, support_tol

logger = get_logger(__name__)

LP_STATUSES = ('optimal', 'infeasible', 'unbounded', 'numerical_failure')
SDP_STATUSES = ('optimal', 'infeasible', 'numerical_failure')
SCHUR_SHIFTS = (1e-14, 1e-12, 1e-10, 1e-8)
WEAK_DUALITY_TOL = 1e-7


# ------------------------------------------------------------------------------------------ #
# Linear programming
# ------------------------------------------------------------------------------------------ #

@dataclass
class LpProblem:
    r"""min (or max) cᵀx  s.t.  A_ub x ≤ b_ub,  A_eq x = b_eq,  lower ≤ x ≤ upper.

    ``bounds`` defaults to (0, None) for every variable; lower bounds must be finite.
    """
    c: np.ndarray
    A_ub: Optional[np.ndarray] = None
    b_ub: Optional[np.ndarray] = None
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    bounds: Optional[Sequence[Tuple[float, Optional[float]]]] = None
    sense: str = 'min'

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.A_ub, self.b_ub = self._pair(self.A_ub, self.b_ub, n, 'inequality')
        self.A_eq, self.b_eq = self._pair(self.A_eq, self.b_eq, n, 'equality')
        if self.bounds is None:
            self.bounds = [(0.0, None)] * n
        if len(self.bounds) != n:
            raise DimensionMismatch(f"{len(self.bounds)} bounds for {n} variables")
        if any(lo is None or not np.isfinite(lo) for lo, _ in self.bounds):
            raise DimensionMismatch("lower bounds must be finite")
        assert self.sense in ('min', 'max'), self.sense

    @staticmethod
    def _pair(a, b, n, what):
        if a is None:
            return np.zeros((0, n)), np.zeros(0)
        a = np.atleast_2d(np.asarray(a, dtype=float))
        b = np.asarray(b, dtype=float).ravel()
        if a.shape[1] != n or a.shape[0] != b.size:
            raise DimensionMismatch(f"{what} block has shape {a.shape} with {b.size} targets for {n} variables")
        return a, b


@dataclass
class LpSolution:
    x: Optional[np.ndarray]
    objective: Optional[float]
    status: str
    iterations: int


class SimplexTableau:
    """Dense tableau simplex; one instance per solve."""

    def __init__(self, problem: LpProblem, tol: float, max_iter: int):
        self.problem = problem
        self.tol = tol
        self.max_iter = max_iter

        n = problem.c.size
        lower = np.array([lo for lo, _ in problem.bounds], dtype=float)
        rows_ub = [problem.A_ub]
        rhs_ub = [problem.b_ub - problem.A_ub @ lower]
        for j, (lo, hi) in enumerate(problem.bounds):
            if hi is not None:
                row = np.zeros((1, n))
                row[0, j] = 1.0
                rows_ub.append(row)
                rhs_ub.append(np.array([hi - lo]))
        a_ub = np.vstack(rows_ub)
        b_ub = np.concatenate(rhs_ub)
        a_eq = problem.A_eq
        b_eq = problem.b_eq - problem.A_eq @ lower

        m_ub, m_eq = a_ub.shape[0], a_eq.shape[0]
        m = m_ub + m_eq
        flip_ub = b_ub < 0
        flip_eq = b_eq < 0
        n_art = int(flip_ub.sum()) + m_eq
        width = n + m_ub + n_art

        table = np.zeros((m, width))
        rhs = np.zeros(m)
        basis = np.zeros(m, dtype=int)
        art = n + m_ub
        for i in range(m_ub):
            sign = -1.0 if flip_ub[i] else 1.0
            table[i, :n] = sign * a_ub[i]
            table[i, n + i] = sign
            rhs[i] = sign * b_ub[i]
            if flip_ub[i]:
                table[i, art] = 1.0
                basis[i] = art
                art += 1
            else:
                basis[i] = n + i
        for k in range(m_eq):
            i = m_ub + k
            sign = -1.0 if flip_eq[k] else 1.0
            table[i, :n] = sign * a_eq[k]
            rhs[i] = sign * b_eq[k]
            table[i, art] = 1.0
            basis[i] = art
            art += 1
        assert art == width, (art, width)

        cost = np.zeros(width)
        cost[:n] = problem.c if problem.sense == 'min' else -problem.c
        big_m = np.zeros(width)
        big_m[n + m_ub:] = 1.0

        self.n, self.lower = n, lower
        self.table, self.rhs, self.basis = table, rhs, basis
        self.is_artificial = big_m > 0
        # reduced costs for the (M, cost) pair, canonical w.r.t. the starting basis
        self.z_m = big_m - big_m[basis] @ table
        self.z_c = cost - cost[basis] @ table
        self.cost = cost

    def _entering(self) -> Optional[int]:
        # Bland: smallest index with lexicographically negative reduced cost
        tol = self.tol
        candidates = (self.z_m < -tol) | ((np.abs(self.z_m) <= tol) & (self.z_c < -tol))
        idx = np.flatnonzero(candidates)
        return int(idx[0]) if idx.size else None

    def _leaving(self, col: int) -> Optional[int]:
        column = self.table[:, col]
        rows = np.flatnonzero(column > self.tol)
        if rows.size == 0:
            return None
        ratios = self.rhs[rows] / column[rows]
        best = ratios.min()
        tied = rows[ratios <= best + self.tol * max(1.0, abs(best))]
        return int(tied[np.argmin(self.basis[tied])])

    def _pivot(self, row: int, col: int) -> None:
        pivot = self.table[row, col]
        self.table[row] /= pivot
        self.rhs[row] /= pivot
        factors = self.table[:, col].copy()
        factors[row] = 0.0
        self.table -= np.outer(factors, self.table[row])
        self.rhs -= factors * self.rhs[row]
        self.rhs[np.abs(self.rhs) < self.tol * 1e-3] = 0.0
        self.z_m -= self.z_m[col] * self.table[row]
        self.z_c -= self.z_c[col] * self.table[row]
        self.basis[row] = col

    def run(self) -> LpSolution:
        for it in range(self.max_iter):
            col = self._entering()
            if col is None:
                return self._finish(it)
            row = self._leaving(col)
            if row is None:
                if self._artificial_mass() > self.tol and self.z_m[col] < -self.tol:
                    return LpSolution(None, None, 'infeasible', it)
                return LpSolution(None, None, 'unbounded', it)
            self._pivot(row, col)
        logger.warning(f"simplex hit the iteration limit ({self.max_iter})")
        return LpSolution(None, None, 'numerical_failure', self.max_iter)

    def _artificial_mass(self) -> float:
        in_basis = self.is_artificial[self.basis]
        return float(self.rhs[in_basis].sum())

    def _finish(self, iterations: int) -> LpSolution:
        scale = max(1.0, float(np.abs(self.problem.b_eq).max(initial=0.0)),
                    float(np.abs(self.problem.b_ub).max(initial=0.0)))
        if self._artificial_mass() > self.tol * scale:
            return LpSolution(None, None, 'infeasible', iterations)
        values = np.zeros(self.table.shape[1])
        values[self.basis] = self.rhs
        x = self.lower + values[:self.n]
        return LpSolution(x, float(self.problem.c @ x), 'optimal', iterations)


def solve_lp(problem: LpProblem, tol: Optional[float] = None,
             max_iter: Optional[int] = None) -> LpSolution:
    r"""Solve a dense LP.

    Returns a solution whose ``status`` is one of optimal / infeasible / unbounded /
    numerical_failure; ``x`` and ``objective`` are None unless optimal.
    """
    cfg = load_config()['lp']
    tableau = SimplexTableau(problem, tol=cfg['tol'] if tol is None else tol,
                             max_iter=cfg['max_iter'] if max_iter is None else max_iter)
    solution = tableau.run()
    logger.debug(f"simplex: {solution.status} after {solution.iterations} pivots")
    return solution


# ------------------------------------------------------------------------------------------ #
# Semidefinite programming: problem data
# ------------------------------------------------------------------------------------------ #

@dataclass(frozen=True)
class SdpBlock:
    name: str
    dim: int  # dim 1 is a real scalar x ≥ 0


@dataclass(frozen=True)
class ConstraintGroup:
    label: str
    start: int
    stop: int
    out_dim: int
    kind: str  # 'equality' or 'psd_inequality'


@dataclass
class SdpProblem:
    blocks: List[SdpBlock]
    objective: Dict[str, np.ndarray]
    constraints: Dict[str, np.ndarray]  # block name -> (m, n, n) Hermitian coefficient matrices
    rhs: np.ndarray
    groups: List[ConstraintGroup]
    metadata: Dict = field(default_factory=dict)

    @property
    def num_constraints(self) -> int:
        return self.rhs.size

    @property
    def inequalities(self) -> List[str]:
        return [g.label for g in self.groups if g.kind == 'psd_inequality']

    def block(self, name: str) -> SdpBlock:
        for blk in self.blocks:
            if blk.name == name:
                return blk
        raise KeyError(name)

    def group(self, label: str) -> ConstraintGroup:
        for grp in self.groups:
            if grp.label == label:
                return grp
        raise KeyError(label)


LinearMap = Callable[[np.ndarray], np.ndarray]


class SdpBuilder:
    r"""Assemble an SdpProblem from Hermitian-preserving linear maps.

    Each operator equation Σ_b Φ_b(X_b) = G is expanded against the orthonormal
    Hermitian basis {B_k} of the target space into scalar rows
    Re tr(Φ_b†(B_k) X_b) = Re tr(B_k G). PSD inequalities Σ_b Φ_b(X_b) ⪯ G get a
    slack block named after the constraint.
    """

    def __init__(self):
        self.blocks: List[SdpBlock] = []
        self.objective: Dict[str, np.ndarray] = {}
        self.rows: List[Dict[str, np.ndarray]] = []
        self.rhs: List[float] = []
        self.groups: List[ConstraintGroup] = []

    def add_block(self, name: str, dim: int) -> 'SdpBuilder':
        assert all(b.name != name for b in self.blocks), f"duplicate block {name}"
        self.blocks.append(SdpBlock(name, int(dim)))
        return self

    def _dim(self, name: str) -> int:
        for b in self.blocks:
            if b.name == name:
                return b.dim
        raise KeyError(f"unknown block {name}")

    def set_objective(self, name: str, cost) -> 'SdpBuilder':
        n = self._dim(name)
        cost = np.asarray(cost, dtype=complex)
        self.objective[name] = cost.reshape(1, 1) if cost.ndim == 0 else cost
        assert self.objective[name].shape == (n, n), (name, self.objective[name].shape)
        return self

    def add_equality(self, label: str, terms: Dict[str, LinearMap], target,
                     kind: str = 'equality') -> 'SdpBuilder':
        target = np.asarray(target, dtype=complex)
        target = target.reshape(1, 1) if target.ndim == 0 else target
        p = target.shape[0]
        out_basis = hermitian_basis(p)  # [k, p, p]
        start = len(self.rhs)
        rows = [dict() for _ in range(p * p)]
        for name, fn in terms.items():
            n = self._dim(name)
            in_basis = hermitian_basis(n)
            images = np.stack([np.asarray(fn(e), dtype=complex).reshape(p, p) for e in in_basis])
            coeff = np.einsum('kab,jba->kj', out_basis, images).real  # ⟨B_k, Φ(E_j)⟩
            block_rows = np.einsum('kj,jab->kab', coeff, in_basis)
            for k in range(p * p):
                rows[k][name] = block_rows[k]
        self.rows.extend(rows)
        self.rhs.extend(np.einsum('kab,ba->k', out_basis, target).real.tolist())
        self.groups.append(ConstraintGroup(label, start, len(self.rhs), p, kind))
        return self

    def add_psd_inequality(self, label: str, terms: Dict[str, LinearMap], bound,
                           face: Optional[np.ndarray] = None) -> 'SdpBuilder':
        r"""Σ_b Φ_b(X_b) ⪯ G with slack block ``label``.

        With an isometry ``face`` = U the slack is U S U†, S ⪰ 0, i.e. the inequality is
        tight off range(U); an empty face makes it an equality.
        """
        bound = np.asarray(bound, dtype=complex)
        bound = bound.reshape(1, 1) if bound.ndim == 0 else bound
        terms = dict(terms)
        if face is None:
            self.add_block(label, bound.shape[0])
            terms[label] = lambda s: s
        elif face.shape[1]:
            self.add_block(label, face.shape[1])
            terms[label] = lambda s: face @ s @ face.conj().T
        return self.add_equality(label, terms, bound, kind='psd_inequality')

    def build(self, metadata: Optional[Dict] = None) -> SdpProblem:
        m = len(self.rhs)
        constraints = {}
        for blk in self.blocks:
            mats = np.zeros((m, blk.dim, blk.dim), dtype=complex)
            for i, row in enumerate(self.rows):
                if blk.name in row:
                    mats[i] = row[blk.name]
            constraints[blk.name] = mats
        return SdpProblem(list(self.blocks), dict(self.objective), constraints,
                          np.asarray(self.rhs, dtype=float), list(self.groups), metadata or {})


# ------------------------------------------------------------------------------------------ #
# Semidefinite programming: solver
# ------------------------------------------------------------------------------------------ #

def embed_hermitian(a: np.ndarray) -> np.ndarray:
    """[[Re, −Im], [Im, Re]] over the last two axes."""
    re, im = a.real, a.imag
    top = np.concatenate([re, -im], axis=-1)
    bottom = np.concatenate([im, re], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def extract_hermitian(y: np.ndarray) -> np.ndarray:
    n = y.shape[-1] // 2
    y11, y12, y21, y22 = y[:n, :n], y[:n, n:], y[n:, :n], y[n:, n:]
    return 0.5 * (y11 + y22) + 0.5j * (y21 - y12)


@dataclass
class SdpSolution:
    primal: Dict[str, np.ndarray]
    dual_slack: Dict[str, np.ndarray]
    y: np.ndarray
    primal_objective: float
    dual_objective: float
    gap: float
    residuals: np.ndarray
    dual_residual: float
    status: str
    iterations: int
    groups: List[ConstraintGroup] = field(default_factory=list)
    detail: str = ''
    history: List[Dict[str, float]] = field(default_factory=list)

    def scalar(self, name: str) -> float:
        return float(self.primal[name][0, 0].real)

    def dual_operator(self, label: str) -> np.ndarray:
        r"""Σ_k y_k B_k over the rows of one constraint group."""
        for grp in self.groups:
            if grp.label == label:
                basis = hermitian_basis(grp.out_dim)
                return np.einsum('k,kab->ab', self.y[grp.start:grp.stop], basis)
        raise KeyError(label)

    @property
    def max_residual(self) -> float:
        return float(max(self.residuals.max(initial=0.0), self.dual_residual))


def _factor(x: np.ndarray) -> Tuple[np.ndarray, bool]:
    try:
        return scipy.linalg.cholesky(x, lower=True), True
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh((x + x.T) / 2)
        return v * np.sqrt(np.clip(w, 1e-300, None)), False


def _inverse(s: np.ndarray) -> np.ndarray:
    r"""S^{-1} through a Cholesky solve; the pseudo-inverse once S has lost definiteness."""
    try:
        inv = scipy.linalg.cho_solve(scipy.linalg.cho_factor(s, lower=True), np.eye(s.shape[0]))
    except np.linalg.LinAlgError:
        inv = np.linalg.pinv((s + s.T) / 2, hermitian=True)
    return (inv + inv.T) / 2


def _max_step(x: np.ndarray, dx: np.ndarray) -> float:
    """Largest t with x + t·dx ⪰ 0."""
    factor, triangular = _factor(x)
    if triangular:
        left = scipy.linalg.solve_triangular(factor, dx, lower=True)
        scaled = scipy.linalg.solve_triangular(factor, left.T, lower=True)
    else:
        inv = np.linalg.pinv(factor)
        scaled = inv @ dx @ inv.T
    lam_min = np.linalg.eigvalsh((scaled + scaled.T) / 2)[0]
    return np.inf if lam_min >= 0 else -1.0 / lam_min


def _nt_scaling(x: np.ndarray, s: np.ndarray) -> np.ndarray:
    r"""W with W S W = X, via W = G Gᵀ, G = L_X V D^{-1/2} where L_Sᵀ L_X = U D Vᵀ."""
    lx, _ = _factor(x)
    ls, _ = _factor(s)
    _, d, vt = np.linalg.svd(ls.T @ lx)
    g = lx @ vt.T / np.sqrt(np.clip(d, 1e-300, None))
    w = g @ g.T
    return (w + w.T) / 2


class InteriorPointSolver:
    """Owns all iterate state for one solve; not reentrant."""

    def __init__(self, problem: SdpProblem, tol: Optional[float] = None,
                 max_iter: Optional[int] = None, step: Optional[float] = None,
                 infeasibility_tol: Optional[float] = None):
        cfg = load_config()['sdp']
        self.problem = problem
        self.tol = cfg['tol'] if tol is None else tol
        self.max_iter = int(cfg['max_iter'] if max_iter is None else max_iter)
        self.step = cfg['step'] if step is None else step
        self.inf_tol = cfg['infeasibility_tol'] if infeasibility_tol is None else infeasibility_tol

        m = problem.num_constraints
        self.embedded = [blk.dim > 1 for blk in problem.blocks]
        self.F_all, self.C = [], []
        for blk, emb in zip(problem.blocks, self.embedded):
            a = problem.constraints.get(blk.name, np.zeros((m, blk.dim, blk.dim), dtype=complex))
            c = problem.objective.get(blk.name, np.zeros((blk.dim, blk.dim), dtype=complex))
            if emb:
                self.F_all.append(0.5 * embed_hermitian(a))
                self.C.append(0.5 * embed_hermitian(c))
            else:
                self.F_all.append(a.real.copy())
                self.C.append(c.real.copy())
        self.b_all = problem.rhs.astype(float)
        self.keep = self._independent_rows()
        self.F = [f[self.keep] for f in self.F_all]
        self.b = self.b_all[self.keep]
        self.sizes = [c.shape[0] for c in self.C]
        self.nu = float(sum(self.sizes))

    def _independent_rows(self) -> np.ndarray:
        m = self.b_all.size
        if m == 0:
            return np.arange(0)
        flat = np.concatenate([f.reshape(m, -1) for f in self.F_all], axis=1)
        _, r, piv = scipy.linalg.qr(flat.T, mode='economic', pivoting=True)
        diag = np.abs(np.diag(r))
        if diag.size == 0 or diag[0] == 0:
            return np.arange(0)
        rank = int(np.count_nonzero(diag > 1e-10 * diag[0]))
        if rank < m:
            logger.debug(f"dropping {m - rank} linearly dependent constraint rows")
        return np.sort(piv[:rank])

    # operators on block lists
    def _op_a(self, blocks, F=None) -> np.ndarray:
        F = self.F if F is None else F
        return sum(np.einsum('iab,ab->i', f, x) for f, x in zip(F, blocks))

    def _op_at(self, y) -> List[np.ndarray]:
        return [np.einsum('i,iab->ab', y, f) for f in self.F]

    @staticmethod
    def _inner(a, b) -> float:
        return float(sum(np.vdot(x, z) for x, z in zip(a, b)))

    @staticmethod
    def _norm(blocks) -> float:
        return float(np.sqrt(sum(np.vdot(x, x) for x in blocks)))

    def _initial_point(self):
        norms = np.sqrt(sum(np.einsum('iab,iab->i', f, f) for f in self.F)) if self.b.size else np.zeros(0)
        c_norm = self._norm(self.C)
        xi = max(10.0, np.sqrt(self.nu), *(((1 + np.abs(self.b)) / (1 + norms)).tolist() or [0.0]))
        eta = max(10.0, np.sqrt(self.nu), c_norm, *(norms.tolist() or [0.0]))
        x = [xi * np.eye(n) for n in self.sizes]
        s = [eta * np.eye(n) for n in self.sizes]
        return x, np.zeros(self.b.size), s

    def _direction(self, w, schur, rp, rd, rc):
        t = [r_c - wb @ r_d @ wb for wb, r_d, r_c in zip(w, rd, rc)]
        rhs = rp - self._op_a(t)
        dy = schur(rhs)
        at = self._op_at(dy)
        ds = [r_d - a for r_d, a in zip(rd, at)]
        dx = [r_c - wb @ d @ wb for wb, d, r_c in zip(w, ds, rc)]
        dx = [(d + d.T) / 2 for d in dx]
        return dx, dy, ds

    def _schur(self, w):
        m = self.b.size
        mat = np.zeros((m, m))
        for f, wb in zip(self.F, w):
            wfw = np.matmul(np.matmul(wb, f), wb)
            mat += np.einsum('iab,jab->ij', f, wfw)
        mat = (mat + mat.T) / 2
        scale = max(float(np.trace(mat)) / max(m, 1), 1e-300)
        for shift in (0.0,) + SCHUR_SHIFTS:
            try:
                factor = scipy.linalg.cho_factor(mat + shift * scale * np.eye(m))
            except np.linalg.LinAlgError:
                continue
            if shift:
                logger.debug(f"Schur complement regularized by {shift:.0e} x mean diagonal")
            return lambda rhs: scipy.linalg.cho_solve(factor, rhs)
        raise np.linalg.LinAlgError("Schur complement not positive definite after regularization")

    def _measures(self, x, y, s):
        rp = self.b - self._op_a(x)

        aty = self._op_at(y)
        rd = [c - a - sb for c, a, sb in zip(self.C, aty, s)]
        pobj = self._inner(self.C, x)
        dobj = float(self.b @ y)
        # entrywise, so the measure does not shrink with the number of rows
        rel_p = np.abs(rp).max(initial=0.0) / (1 + np.abs(self.b).max(initial=0.0))
        rel_d = max(np.abs(r).max() for r in rd) / (1 + max(np.abs(c).max() for c in self.C))
        rel_gap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        return rp, rd, pobj, dobj, rel_p, rel_d, rel_gap

    def _converged(self, pobj, dobj, rel_p, rel_d, rel_gap, factor: float = 1.0) -> bool:
        r"""Residuals and gap within tolerance, and bᵀy no larger than ⟨C, X⟩ beyond rounding."""
        tol = factor * self.tol
        return max(rel_p, rel_d, rel_gap) <= tol and dobj - pobj <= 0.1 * tol * (1 + abs(pobj))

    def solve(self) -> SdpSolution:
        x, y, s = self._initial_point()
        history = []
        status, detail = 'numerical_failure', 'iteration limit'
        stalled = 0
        it = 0
        for it in range(self.max_iter + 1):
            rp, rd, pobj, dobj, rel_p, rel_d, rel_gap = self._measures(x, y, s)
            history.append(dict(iteration=it, primal=pobj, dual=dobj, rel_primal=rel_p,
                                rel_dual=rel_d, rel_gap=rel_gap))
            logger.debug(f"it {it:3d}  p {pobj: .9e}  d {dobj: .9e}  "
                         f"rp {rel_p:.2e}  rd {rel_d:.2e}  gap {rel_gap:.2e}")
            if self._converged(pobj, dobj, rel_p, rel_d, rel_gap):
                status, detail = 'optimal', ''
                break
            if self._dual_ray(y, s, rd):
                status, detail = 'infeasible', 'primal infeasible (dual improving ray)'
                break
            if self._primal_ray(x):
                status, detail = 'infeasible', 'dual infeasible (primal improving ray)'
                break
            if it == self.max_iter or stalled >= 3:
                detail = 'stalled' if stalled >= 3 else 'iteration limit'
                if self._converged(pobj, dobj, rel_p, rel_d, rel_gap, factor=100.0):
                    status, detail = 'optimal', f'reduced accuracy ({detail})'
                    logger.warning(f"SDP terminated with reduced accuracy: "
                                   f"rp {rel_p:.2e} rd {rel_d:.2e} gap {rel_gap:.2e}")
                break
            try:
                x, y, s, ap, ad = self._step(x, y, s, rp, rd)
            except np.linalg.LinAlgError as err:
                detail = f'linear algebra failure: {err}'
                break
            if not all(np.all(np.isfinite(b)) for b in x + s) or not np.all(np.isfinite(y)):
                detail = 'non-finite iterate'
                break
            stalled = stalled + 1 if max(ap, ad) < 1e-8 else 0
        return self._solution(x, y, s, status, detail, it, history)

    def _step(self, x, y, s, rp, rd):
        r"""One predictor-corrector step; raises LinAlgError when the Newton system breaks down."""
        w = [_nt_scaling(xb, sb) for xb, sb in zip(x, s)]
        schur = self._schur(w)
        mu = self._inner(x, s) / self.nu

        # predictor
        dx, dy, ds = self._direction(w, schur, rp, rd, [-xb for xb in x])
        ap = min(1.0, min(_max_step(xb, d) for xb, d in zip(x, dx)))
        ad = min(1.0, min(_max_step(sb, d) for sb, d in zip(s, ds)))
        mu_aff = self._inner([xb + ap * d for xb, d in zip(x, dx)],
                             [sb + ad * d for sb, d in zip(s, ds)]) / self.nu
        sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3 if mu > 0 else 0.0

        # corrector
        rc = [sigma * mu * _inverse(sb) - xb for xb, sb in zip(x, s)]
        dx, dy, ds = self._direction(w, schur, rp, rd, rc)
        ap = min(1.0, self.step * min(_max_step(xb, d) for xb, d in zip(x, dx)))
        ad = min(1.0, self.step * min(_max_step(sb, d) for sb, d in zip(s, ds)))

        new_x = [xb + ap * d for xb, d in zip(x, dx)]
        new_s = [sb + ad * d for sb, d in zip(s, ds)]
        return new_x, y + ad * dy, new_s, ap, ad

    def _dual_ray(self, y, s, rd) -> bool:
        by = float(self.b @ y)
        if by <= 0:
            return False
        ray = self._norm([c - r for c, r in zip(self.C, rd)])  # ‖A*y + S‖
        return ray <= self.inf_tol * by

    def _primal_ray(self, x) -> bool:
        cx = self._inner(self.C, x)
        if cx >= 0:
            return False
        return np.linalg.norm(self._op_a(x)) <= self.inf_tol * abs(cx)

    def _solution(self, x, y, s, status, detail, iterations, history) -> SdpSolution:
        primal, slack = {}, {}
        for blk, emb, xb, sb in zip(self.problem.blocks, self.embedded, x, s):
            primal[blk.name] = extract_hermitian(xb) if emb else xb.astype(complex)
            slack[blk.name] = extract_hermitian(sb) if emb else sb.astype(complex)
        y_full = np.zeros(self.b_all.size)
        y_full[self.keep] = y
        # residuals on every original row, including dropped dependent ones
        residuals = np.abs(self.b_all - self._op_a(x, self.F_all))
        rd = [c - a - sb for c, a, sb in zip(self.C, self._op_at(y), s)]
        dual_residual = self._norm(rd)
        pobj = self._inner(self.C, x)
        dobj = float(self.b @ y)
        if status == 'optimal' and residuals.max(initial=0.0) > 100 * self.tol * (1 + np.abs(self.b_all).max(initial=0.0)):
            status, detail = 'infeasible', 'inconsistent equality constraints'
        if status == 'optimal' and dobj - pobj > WEAK_DUALITY_TOL * (1 + abs(pobj)):
            status, detail = 'numerical_failure', f'dual objective exceeds primal by {dobj - pobj:.3e}'
        if status != 'optimal':
            logger.info(f"SDP status {status} ({detail}); max primal residual {residuals.max(initial=0.0):.3e}")
        return SdpSolution(primal, slack, y_full, pobj, dobj, abs(pobj - dobj), residuals, dual_residual,
                           status, iterations, list(self.problem.groups), detail, history)


def solve_sdp(problem: SdpProblem, tol: Optional[float] = None, max_iter: Optional[int] = None) -> SdpSolution:
    return InteriorPointSolver(problem, tol=tol, max_iter=max_iter).solve()


# ------------------------------------------------------------------------------------------ #
# The work-cost program and its certificate
# ------------------------------------------------------------------------------------------ #

@dataclass(frozen=True)
class DualCertificate:
    r"""Dual point (ω_{X'}, X_X, Z_{X'R}) of the work-cost program."""
    omega: DensityOperator
    x_block: np.ndarray
    z_block: np.ndarray

    def value(self, rho_XpR) -> float:
        """tr(Z ρ) − tr X_X."""
        rho = as_matrix(rho_XpR)
        return float(np.trace(self.z_block @ rho).real - np.trace(self.x_block).real)


@dataclass
class CertificateReport:
    residuals: Dict[str, float]
    primal_value: float
    dual_value: float
    gap: float
    tol: float

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values())

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tol and self.gap <= self.tol


def _bipartite_dims(state) -> Tuple[int, int]:
    dims = state.dims if isinstance(state, DensityOperator) else (as_matrix(state).shape[0], 1)
    if len(dims) == 1:
        return int(dims[0]), 1
    return int(dims[0]), int(np.prod(dims[1:]))


@dataclass(frozen=True)
class LandauerData:
    r"""σ_XR and ρ_X'R of one work-cost program, flattened to X ⊗ R and X' ⊗ R."""
    sigma_XR: np.ndarray
    rho_XpR: np.ndarray
    dims: Tuple[int, int, int]  # (d_X, d_X', d_R)

    @classmethod
    def from_states(cls, sigma_XR, rho_XpR, marginal_tol: float = 1e-8) -> 'LandauerData':
        r"""The first tensor factor of each state is X (resp. X'); the remaining factors form R."""
        d_x, d_r = _bipartite_dims(sigma_XR)
        d_xp, d_r2 = _bipartite_dims(rho_XpR)
        if d_r != d_r2:
            raise DimensionMismatch(f"reference dimensions differ: {d_r} vs {d_r2}")
        sigma = as_matrix(sigma_XR)
        rho = as_matrix(rho_XpR)
        sigma_r = partial_trace(sigma, [d_x, d_r], [1])
        rho_r = partial_trace(rho, [d_xp, d_r], [1])
        mismatch = np.abs(sigma_r - rho_r).max()
        if mismatch > marginal_tol:
            raise MarginalMismatch(f"sigma_R and rho_R differ by {mismatch:.3e}")
        return cls(sigma, rho, (d_x, d_xp, d_r))

    def process(self, t: np.ndarray) -> np.ndarray:
        r"""tr_X[T σ_XR^{t_X}] in the computational basis of X."""
        d_x, d_xp, d_r = self.dims
        sigma4 = self.sigma_XR.reshape(d_x, d_r, d_x, d_r)
        j4 = t.reshape(d_x, d_xp, d_x, d_xp)
        return np.einsum('xrys,xayb->arbs', sigma4, j4).reshape(d_xp * d_r, d_xp * d_r)

    @property
    def sigma_X(self) -> np.ndarray:
        d_x, _, d_r = self.dims
        return partial_trace(self.sigma_XR, [d_x, d_r], [0])

    @property
    def sigma_R(self) -> np.ndarray:
        d_x, _, d_r = self.dims
        return partial_trace(self.sigma_XR, [d_x, d_r], [1])

    def channel_face(self, tol: Optional[float] = None) -> np.ndarray:
        r"""Isometry V onto ker G, G = process†(1 − Π_ρ).

        T ⪰ 0 with process(T) = ρ has tr(G T) = 0, so every feasible T equals V Q V†.
        """
        d_x, d_xp, d_r = self.dims
        outside = np.eye(d_xp * d_r) - support_projector(self.rho_XpR, tol).matrix
        sigma4 = self.sigma_XR.reshape(d_x, d_r, d_x, d_r)
        g = np.einsum('bsar,xrys->ybxa', outside.reshape(d_xp, d_r, d_xp, d_r), sigma4)
        return _null_isometry(g.reshape(d_x * d_xp, d_x * d_xp), tol)

    def slack_face(self, tol: Optional[float] = None) -> np.ndarray:
        r"""Isometry U onto ker σ_X^T.

        ρ_R = σ_R gives tr[(1 − tr_{X'} T) σ_X^T] = 0, so the trace-nonincreasing slack
        vanishes on supp σ_X^T and lives on U.
        """
        return _null_isometry(self.sigma_X.T, tol)

    @property
    def pure_reference(self) -> bool:
        return rank(self.sigma_XR) == 1


def _null_isometry(h: np.ndarray, tol: Optional[float] = None) -> np.ndarray:
    r"""Orthonormal columns spanning the eigenvalues of the PSD ``h`` at or below tol·λ_max."""
    tol = support_tol() if tol is None else tol
    w, v = np.linalg.eigh((h + h.conj().T) / 2)
    threshold = max(tol * max(w[-1], 0.0), 1e-15)
    return v[:, w <= threshold]


def encode_landauer_primal(sigma_XR, rho_XpR, alpha: Optional[float] = None,
                           marginal_tol: float = 1e-8) -> SdpProblem:
    r"""The work-cost program over (α, T_{XX'}).

        min α  s.t.  tr_X T ⪯ α I_{X'},  tr_{X'} T ⪯ I_X,  tr_X[T σ_XR^{t_X}] = ρ_{X'R}

    With ``alpha`` given the program becomes a feasibility problem at that fixed value.

    The program is posed on its minimal face so that it has strictly feasible points: block
    'T' holds Q with T = V Q V† (V = ``metadata['channel_face']``), and the
    trace-nonincreasing slack is restricted to ker σ_X^T.
    """
    data = LandauerData.from_states(sigma_XR, rho_XpR, marginal_tol)
    d_x, d_xp, d_r = data.dims
    face = data.channel_face()
    if face.shape[1] == 0:
        raise PreconditionError("no channel can produce rho_X'R from sigma_XR")

    def lift(q):
        return face @ q @ face.conj().T

    def trace_x(q):
        return partial_trace(lift(q), [d_x, d_xp], [1])

    def trace_xp(q):
        return partial_trace(lift(q), [d_x, d_xp], [0])

    builder = SdpBuilder().add_block('T', face.shape[1])
    if alpha is None:
        builder.add_block('alpha', 1).set_objective('alpha', 1.0)
        builder.add_psd_inequality('alpha_subunital',
                                   {'T': trace_x, 'alpha': lambda a: -a[0, 0] * np.eye(d_xp)},
                                   np.zeros((d_xp, d_xp)))
    else:
        builder.add_psd_inequality('alpha_subunital', {'T': trace_x}, alpha * np.eye(d_xp))
    builder.add_psd_inequality('trace_nonincreasing', {'T': trace_xp}, np.eye(d_x), face=data.slack_face())
    builder.add_equality('process', {'T': lambda q: data.process(lift(q))}, data.rho_XpR)
    logger.debug(f"work-cost program on a face of dimension {face.shape[1]} of {d_x * d_xp}")
    return builder.build(metadata={'landauer': data, 'alpha_fixed': alpha, 'channel_face': face})


def _clip_psd(h: np.ndarray) -> np.ndarray:
    h = (h + h.conj().T) / 2
    w, v = np.linalg.eigh(h)
    return (v * np.clip(w, 0, None)) @ v.conj().T


def certificate_from_solution(problem: SdpProblem, solution: SdpSolution) -> Tuple[float, np.ndarray, DualCertificate]:
    r"""Read (α, T) and the dual point out of a solved work-cost program.

    Slack duals carry the sign flip: ω = −Y_subunital, X_X = −Y_tni, Z = Y_process. The
    solver's Z and X_X are only dual feasible on the face it worked on; for a pure σ_XR
    they are replaced by Z = ω ⊗ σ_R^+, X_X = 0, which is feasible on all of X ⊗ X'
    for any ω and has the same value at the optimum.
    """
    data = problem.metadata['landauer']
    alpha = solution.scalar('alpha') if 'alpha' in solution.primal else problem.metadata['alpha_fixed']
    face = problem.metadata.get('channel_face')
    q = solution.primal['T']
    t = q if face is None else face @ q @ face.conj().T
    omega = _clip_psd(-solution.dual_operator('alpha_subunital'))
    if np.trace(omega).real > 1:
        omega = omega / np.trace(omega).real
    d_x, d_xp, _ = data.dims
    if data.pure_reference:
        x_block = np.zeros((d_x, d_x), dtype=complex)
        z_block = np.kron(omega, pinv_psd(data.sigma_R))
    else:
        x_block = _clip_psd(-solution.dual_operator('trace_nonincreasing'))
        z_block = solution.dual_operator('process')
    cert = DualCertificate(DensityOperator(omega, (d_xp,), subnormalized=True), x_block, z_block)
    return float(alpha), t, cert


def verify_certificate(problem: Union[SdpProblem, LandauerData], primal: Tuple[float, np.ndarray],
                       dual: DualCertificate, tol: float = 1e-7) -> CertificateReport:
    r"""Check a primal/dual pair of the work-cost program with eigenvalues and traces only."""
    data = problem.metadata['landauer'] if isinstance(problem, SdpProblem) else problem
    sigma, rho = data.sigma_XR, data.rho_XpR
    d_x, d_xp, d_r = data.dims
    alpha, t = primal
    t = as_matrix(t)
    if t.shape != (d_x * d_xp, d_x * d_xp):
        raise DimensionMismatch(f"primal T of shape {t.shape} for dims {data.dims}")
    sig4 = sigma.reshape(d_x, d_r, d_x, d_r)
    j4 = t.reshape(d_x, d_xp, d_x, d_xp)

    def neg_part(h):
        return max(0.0, -float(np.linalg.eigvalsh((h + h.conj().T) / 2)[0]))

    tr_x = np.einsum('xaxb->ab', j4)
    tr_xp = np.einsum('xaya->xy', j4)
    produced = np.einsum('xrys,xayb->arbs', sig4, j4).reshape(d_xp * d_r, d_xp * d_r)

    omega = as_matrix(dual.omega)
    x_block = as_matrix(dual.x_block)
    z4 = as_matrix(dual.z_block).reshape(d_xp, d_r, d_xp, d_r)
    pulled_back = np.einsum('xrys,arbs->xayb', sig4.conj(), z4).reshape(d_x * d_xp, d_x * d_xp)
    bound = np.kron(np.eye(d_x), omega) + np.kron(x_block, np.eye(d_xp))

    residuals = {
        'primal_psd': neg_part(t),
        'primal_subunital': neg_part(alpha * np.eye(d_xp) - tr_x),
        'primal_trace_nonincreasing': neg_part(np.eye(d_x) - tr_xp),
        'primal_process': float(np.abs(produced - rho).max()),
        'dual_omega_psd': neg_part(omega),
        'dual_omega_trace': max(0.0, float(np.trace(omega).real) - 1.0),
        'dual_x_psd': neg_part(x_block),
        'dual_constraint': neg_part(bound - pulled_back),
    }
    dual_value = float(np.trace(as_matrix(dual.z_block) @ rho).real - np.trace(x_block).real)
    return CertificateReport(residuals, float(alpha), dual_value, abs(float(alpha) - dual_value), tol)
