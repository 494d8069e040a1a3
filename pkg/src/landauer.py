r"""Minimal work cost of a process, its optimal channel and the matching dual witness.

For an input σ_X purified as σ_XR and a process producing ρ_X'R, the most work
that can be extracted is λ_opt = −H₀(E|X')_ρ bits of kT ln 2, where E purifies
ρ_X'R. The optimal subunital channel and a dual certificate are built in closed
form and can be cross-checked against the interior-point solver.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from src.channel import (
    ChoiMap,
    apply_on_subsystem_matrix,
    choi_from_kraus,
    identity_channel,
    lambda_channel,
    random_channel,
    replacement_channel,
    reset_subsystem_channel,
    verify_flags,
)
from src.entropy import (
    EntropyValue,
    SmoothingParams,
    conditional_support_witness,
    h_min,
    h_smooth_classical,
    h_von_neumann,
    h_zero,
    h_zero_cond,
)
from src.exceptions import BasisMismatch, DimensionMismatch, MarginalMismatch, PreconditionError, SolverError
from src.majorize import AncillaSplit, optimal_transfer
from src.qmat import (
    DensityOperator,
    MatrixLike,
    PartialIsometryOp,
    ProjectorOp,
    PureStateVector,
    Spectrum,
    canonical_purification,
    eig_hermitian,
    minimal_purification,
    partial_trace,
    permute_pure,
    pinv_psd,
    random_pure,
    schmidt_relative,
    spectrum,
)
from src.sdp import (
    DualCertificate,
    LandauerData,
    SdpProblem,
    SdpSolution,
    certificate_from_solution,
    encode_landauer_primal,
    solve_sdp,
    verify_certificate,
)
from src.utils import get_logger, tolerance

logger = get_logger(__name__)

ENGINE_CHECK_TOL = 1e-7


@dataclass(frozen=True)
class ProcessInstance:
    r"""σ_X, the process, and the derived σ_XR, ρ_X'R and ρ_X'RE (stored in X', R, E order)."""
    sigma_X: DensityOperator
    process: Optional[ChoiMap]
    sigma_XR: DensityOperator
    sigma_psi: PureStateVector
    rho_XR: DensityOperator
    rho_XRE: PureStateVector

    @property
    def d_x(self) -> int:
        return self.sigma_XR.dims[0]

    @property
    def d_xp(self) -> int:
        return self.rho_XR.dims[0]

    @property
    def d_r(self) -> int:
        return self.sigma_XR.dims[1]

    @property
    def d_e(self) -> int:
        return self.rho_XRE.dims[2]

    @property
    def sigma_R(self) -> np.ndarray:
        return partial_trace(self.sigma_XR.matrix, self.sigma_XR.dims, [1])

    @property
    def rho_XE(self) -> DensityOperator:
        """ρ_X'E."""
        return self.rho_XRE.density().ptrace([0, 2])

    @property
    def landauer_data(self) -> LandauerData:
        return LandauerData(self.sigma_XR.matrix, self.rho_XR.matrix, (self.d_x, self.d_xp, self.d_r))


@dataclass
class WorkBoundReport:
    h_zero_cond_bits: EntropyValue
    lambda_opt: float
    work_min_kTln2: float
    optimal_channel: ChoiMap
    certificate: DualCertificate
    closed_form_alpha: float
    dual_value: float
    gap: float
    residuals: Dict[str, float] = field(default_factory=dict)
    sdp_alpha: Optional[float] = None
    sdp_status: Optional[str] = None
    sdp_problem: Optional[SdpProblem] = field(default=None, repr=False)
    sdp_solution: Optional[SdpSolution] = field(default=None, repr=False)

    def joules(self, temperature: float, boltzmann: float) -> float:
        """Work in joules at ``temperature`` kelvin, W = k T ln 2 · bits."""
        return self.work_min_kTln2 * boltzmann * temperature * np.log(2)

    def to_record(self) -> Dict:
        return {
            'lambda_opt': self.lambda_opt,
            'h_zero_cond_bits': self.h_zero_cond_bits.bits,
            'work_min_kTln2': self.work_min_kTln2,
            'closed_form_alpha': self.closed_form_alpha,
            'dual_value': self.dual_value,
            'gap': self.gap,
            'residuals': dict(self.residuals),
            'sdp_alpha': self.sdp_alpha,
            'sdp_status': self.sdp_status,
            'units': 'kT ln 2',
        }


# ------------------------------------------------------------------------------------------ #
# instances
# ------------------------------------------------------------------------------------------ #

def _pure_matrix(psi: PureStateVector) -> np.ndarray:
    return np.outer(psi.amplitudes, psi.amplitudes.conj())


def _input_purification(sigma: Union[DensityOperator, PureStateVector, np.ndarray]) -> Tuple[PureStateVector, int, int]:
    if isinstance(sigma, PureStateVector):
        if len(sigma.dims) < 2:
            raise DimensionMismatch("a purified input needs at least an X and an R factor")
        d_r = sigma.dims[-1]
        return sigma, sigma.amplitudes.size // d_r, d_r
    if not isinstance(sigma, DensityOperator):
        sigma = DensityOperator(sigma)
    psi = canonical_purification(sigma)
    return psi, sigma.dim, sigma.dim


def _assemble(psi_in: PureStateVector, d_x: int, d_r: int, rho_xr: np.ndarray, d_xp: int,
              process: Optional[ChoiMap], marginal_tol: float) -> ProcessInstance:
    sigma_xr = _pure_matrix(psi_in)
    sigma_r = partial_trace(sigma_xr, [d_x, d_r], [1])
    rho_r = partial_trace(rho_xr, [d_xp, d_r], [1])
    mismatch = float(np.abs(sigma_r - rho_r).max())
    if mismatch > marginal_tol:
        raise MarginalMismatch(f"sigma_R and rho_R differ by {mismatch:.3e}; "
                               f"the process is not trace-preserving on the support of sigma_X")
    rho_XR = DensityOperator(rho_xr, (d_xp, d_r), trace_tol=max(1e-9, marginal_tol))
    purification = minimal_purification(rho_XR)
    sigma_XR = DensityOperator(sigma_xr, (d_x, d_r))
    return ProcessInstance(sigma_XR.ptrace([0]), process, sigma_XR,
                           PureStateVector(psi_in.amplitudes, (d_x, d_r)), rho_XR, purification)


def build_instance(sigma: Union[DensityOperator, PureStateVector, np.ndarray], process: ChoiMap,
                   marginal_tol: Optional[float] = None) -> ProcessInstance:
    r"""Purify σ_X (canonically, d_R = d_X) unless a pure σ_XR is given, and apply the process on X."""
    marginal_tol = tolerance('marginal') if marginal_tol is None else marginal_tol
    psi, d_x, d_r = _input_purification(sigma)
    if process.dim_in != d_x:
        raise DimensionMismatch(f"process acts on dimension {process.dim_in}, input has {d_x}")
    rho_xr = apply_on_subsystem_matrix(process, _pure_matrix(psi), [d_x, d_r], 0)
    return _assemble(psi, d_x, d_r, rho_xr, process.dim_out, process, marginal_tol)


def build_instance_from_output(sigma_XR: PureStateVector, rho_XpR: DensityOperator,
                               marginal_tol: Optional[float] = None) -> ProcessInstance:
    r"""An instance fixed by its input purification and target ρ_X'R; the process stays implicit."""
    marginal_tol = tolerance('marginal') if marginal_tol is None else marginal_tol
    psi, d_x, d_r = _input_purification(sigma_XR)
    if len(rho_XpR.dims) < 2:
        raise DimensionMismatch("the target must carry the reference as its last factor")
    d_xp = rho_XpR.dim // d_r
    if d_xp * d_r != rho_XpR.dim or rho_XpR.dims[-1] != d_r:
        raise DimensionMismatch(f"target dims {rho_XpR.dims} do not end in the reference dimension {d_r}")
    return _assemble(psi, d_x, d_r, rho_XpR.matrix, d_xp, None, marginal_tol)


def random_instance(d_x: int, d_r: int, rng: np.random.Generator, d_xp: Optional[int] = None) -> ProcessInstance:
    """Haar-random pure σ_XR pushed through a random channel X → X'."""
    psi = random_pure((d_x, d_r), rng)
    return build_instance(psi, random_channel(d_x, d_xp or d_x, rng))


# ------------------------------------------------------------------------------------------ #
# closed-form primal and dual
# ------------------------------------------------------------------------------------------ #

def _schmidt_pair(inst: ProcessInstance, basis: np.ndarray, basis_tol: float):
    sigma_psi = inst.sigma_psi
    rho_psi = permute_pure(inst.rho_XRE, (0, 2, 1))  # (X', E, R)
    left = schmidt_relative(sigma_psi, 1, basis, basis_tol=basis_tol)
    right = schmidt_relative(rho_psi, 2, basis, basis_tol=basis_tol)
    if left.indices.size != right.indices.size or np.any(left.indices != right.indices):
        raise BasisMismatch(f"Schmidt supports differ: {left.indices.tolist()} vs {right.indices.tolist()}")
    return left, right


def optimal_isometry(inst: ProcessInstance, tol: float = 1e-8) -> PartialIsometryOp:
    r"""V_{X→X'E} = Σ_i |y_i⟩⟨x_i| with both Schmidt decompositions taken against one eigenbasis of σ_R.

    Then (V ⊗ I_R)|σ⟩_XR = |ρ⟩_X'ER, V†V = Π_X and VV† = Π̂_X'E.
    """
    sigma_r = inst.sigma_R
    basis = eig_hermitian(sigma_r)[1]
    try:
        left, right = _schmidt_pair(inst, basis, basis_tol=1e-9)
    except BasisMismatch as err:
        logger.warning(f"re-diagonalizing the reference marginal jointly ({err})")
        rho_r = partial_trace(inst.rho_XR.matrix, inst.rho_XR.dims, [1])
        basis = eig_hermitian((sigma_r + rho_r) / 2)[1]
        left, right = _schmidt_pair(inst, basis, basis_tol=max(1e-8, 10 * float(np.abs(sigma_r - rho_r).max())))
    v = right.left_vectors @ left.left_vectors.conj().T
    k = left.indices.size
    source = ProjectorOp(left.left_vectors @ left.left_vectors.conj().T, k)
    target = ProjectorOp(right.left_vectors @ right.left_vectors.conj().T, k)
    return PartialIsometryOp(v, source, target, (inst.d_xp, inst.d_e), tol=tol)


def optimal_channel(v: PartialIsometryOp) -> ChoiMap:
    r"""T(·) = tr_E[V · V†], Kraus operators K_e[x', x] = V[(x', e), x]."""
    d_xp, d_e = v.target_dims[0], int(np.prod(v.target_dims[1:]))
    v4 = v.matrix.reshape(d_xp, d_e, -1)
    return choi_from_kraus([v4[:, e, :] for e in range(d_e)])


def dual_witness(inst: ProcessInstance) -> DualCertificate:
    r"""Z_{X'R} = ω_{X'} ⊗ σ_R^{+}, X_X = 0, with ω maximizing tr[Π̂_X'E ω_X']."""
    _, omega = conditional_support_witness(inst.rho_XE, cond_on=0)
    z = np.kron(omega, pinv_psd(inst.sigma_R))
    return DualCertificate(DensityOperator(omega, (inst.d_xp,)), np.zeros((inst.d_x, inst.d_x), dtype=complex), z)


def work_bound(inst: ProcessInstance, sdp_check: bool = False, tol: Optional[float] = None) -> WorkBoundReport:
    r"""λ_opt = −H₀(E|X')_ρ with the closed-form optimum, its certificate and an optional SDP cross-check."""
    tol = tolerance('certificate') if tol is None else tol
    h = h_zero_cond(inst.rho_XE, cond_on=0)
    chan = optimal_channel(optimal_isometry(inst))
    alpha = verify_flags(chan).subunital_alpha
    cert = dual_witness(inst)
    report = verify_certificate(inst.landauer_data, (alpha, chan.choi), cert, tol=tol)
    if not report.passed:
        logger.warning(f"closed-form certificate above tolerance: gap {report.gap:.3e}, "
                       f"max residual {report.max_residual:.3e}")
    result = WorkBoundReport(h_zero_cond_bits=h, lambda_opt=0.0 - h.bits, work_min_kTln2=h.bits + 0.0,
                             optimal_channel=chan, certificate=cert, closed_form_alpha=alpha,
                             dual_value=report.dual_value, gap=report.gap, residuals=report.residuals)
    if sdp_check:
        problem = encode_landauer_primal(inst.sigma_XR, inst.rho_XR)
        solution = solve_sdp(problem)
        result.sdp_status = solution.status
        result.sdp_problem, result.sdp_solution = problem, solution
        if solution.status == 'optimal':
            result.sdp_alpha = certificate_from_solution(problem, solution)[0]
            logger.info(f"SDP alpha {result.sdp_alpha:.9f} vs closed form {alpha:.9f}")
        else:
            logger.warning(f"SDP cross-check ended with status {solution.status} ({solution.detail})")
    return result


def transition_bound(sigma_X: MatrixLike, rho_X: MatrixLike) -> float:
    r"""λ_opt of the bare transition σ_X → ρ_X (trivial reference), from the SDP."""
    sigma = sigma_X if isinstance(sigma_X, DensityOperator) else DensityOperator(sigma_X)
    rho = rho_X if isinstance(rho_X, DensityOperator) else DensityOperator(rho_X)
    problem = encode_landauer_primal(DensityOperator(sigma.matrix, (sigma.dim, 1)),
                                     DensityOperator(rho.matrix, (rho.dim, 1)))
    solution = solve_sdp(problem)
    if solution.status != 'optimal':
        raise SolverError(f"transition SDP ended with status {solution.status} ({solution.detail})",
                          status=solution.status, residuals={'max_residual': solution.max_residual})
    return float(-np.log2(solution.scalar('alpha')))


def state_transition_channel(sigma_X: MatrixLike, rho_X: MatrixLike) -> Tuple[float, ChoiMap]:
    r"""λ_opt and a 2^{−λ_opt}-subunital channel mapping σ_X to ρ_X, built between eigenbases."""
    _, v_s = eig_hermitian(sigma_X)
    _, v_r = eig_hermitian(rho_X)
    lam, t = optimal_transfer(spectrum(sigma_X), spectrum(rho_X))
    return lam, lambda_channel(t, in_basis=v_s, out_basis=v_r)


# ------------------------------------------------------------------------------------------ #
# special cases
# ------------------------------------------------------------------------------------------ #

def _check_engine(engine: float, closed_form: float, what: str) -> None:
    if abs(engine - closed_form) > ENGINE_CHECK_TOL:
        raise SolverError(f"{what}: general bound {engine:.9f} disagrees with closed form {closed_form:.9f}",
                          residuals={'engine_mismatch': abs(engine - closed_form)})


def special_erasure_with_memory(sigma_SM: DensityOperator, check: bool = True) -> EntropyValue:
    r"""Cost of resetting S while keeping the memory M: H₀(S|M)_σ."""
    if len(sigma_SM.dims) != 2:
        raise DimensionMismatch(f"expected a bipartite state on S and M, got dims {sigma_SM.dims}")
    value = h_zero_cond(sigma_SM, cond_on=1)
    if check:
        d_s, d_m = sigma_SM.dims
        flat = DensityOperator(sigma_SM.matrix, (d_s * d_m,))
        engine = work_bound(build_instance(flat, reset_subsystem_channel([d_s, d_m], 0)))
        _check_engine(engine.work_min_kTln2, value.bits, 'erasure with memory')
    return EntropyValue(value.bits, 'erasure_with_memory')


def special_decoupling(sigma_X: MatrixLike, rho_X: MatrixLike, params: Optional[SmoothingParams] = None,
                       check: bool = True) -> EntropyValue:
    r"""Cost of replacing σ_X by ρ_X while decoupling from the reference: H₀(σ) − Hmin(ρ).

    With ``params`` the classical smoothed value h₀^ε(σ) − h_min^ε(ρ) of the spectra is returned.
    """
    if params is not None and params.epsilon > 0:
        bits = (h_smooth_classical(spectrum(sigma_X), params, 'zero').bits
                - h_smooth_classical(spectrum(rho_X), params, 'min').bits)
        return EntropyValue(bits, 'decoupling', params.epsilon, params.metric)
    value = h_zero(spectrum(sigma_X)).bits - h_min(spectrum(rho_X)).bits
    if check:
        sigma = sigma_X if isinstance(sigma_X, DensityOperator) else DensityOperator(sigma_X)
        engine = work_bound(build_instance(sigma, replacement_channel(rho_X, sigma.dim)))
        _check_engine(engine.work_min_kTln2, value, 'decoupling')
    return EntropyValue(value, 'decoupling')


def iid_rate(sigma_X: MatrixLike, rho_X: MatrixLike) -> EntropyValue:
    """H(X)_σ − H(X)_ρ bits per copy."""
    return EntropyValue(h_von_neumann(spectrum(sigma_X)).bits - h_von_neumann(spectrum(rho_X)).bits, 'iid_rate')


def heralded_mixture_spectrum(n: int) -> Spectrum:
    r"""|0⟩ with probability ½, otherwise uniform over 2^n further states."""
    if n < 0:
        raise PreconditionError(f"n must be nonnegative, got {n}")
    return Spectrum(np.concatenate([[0.5], np.full(2 ** n, 2.0 ** (-(n + 1)))]))


def single_shot_gap_demo(n: int, epsilon: float = 0.05, engine_check: bool = False) -> Dict:
    r"""Identity vs. replacement of the heralded mixture: single-shot bounds against the i.i.d. rate."""
    p = heralded_mixture_spectrum(n)
    params = SmoothingParams(epsilon)
    replacement = h_zero(p).bits - h_min(p).bits
    row = {
        'n': n,
        'identity_bound': 0.0,
        'replacement_bound': replacement,
        'iid_rate': iid_rate(p.as_density().matrix, p.as_density().matrix).bits,
        'h_min_smooth': h_smooth_classical(p, params, 'min').bits,
        'h_zero_smooth': h_smooth_classical(p, params, 'zero').bits,
        'epsilon': epsilon,
    }
    row['replacement_bound_smooth'] = row['h_zero_smooth'] - row['h_min_smooth']
    if engine_check:
        if len(p) > 9:
            raise PreconditionError(f"engine check limited to n <= 3 (dimension {len(p)})")
        sigma = p.as_density()
        row['identity_bound'] = work_bound(build_instance(sigma, identity_channel(len(p)))).work_min_kTln2
        engine = work_bound(build_instance(sigma, replacement_channel(sigma, len(p)))).work_min_kTln2
        _check_engine(engine, replacement, 'replacement of the heralded mixture')
    return row


def gap_table(ns, epsilon: float = 0.05) -> pd.DataFrame:
    return pd.DataFrame([single_shot_gap_demo(n, epsilon) for n in ns]).set_index('n')


def w_state() -> PureStateVector:
    r"""(|001⟩ + |010⟩ + |100⟩)/√3 on S, M, R."""
    amp = np.zeros(8, dtype=complex)
    amp[[1, 2, 4]] = 1 / np.sqrt(3)
    return PureStateVector(amp, (2, 2, 2))


def w_state_demo() -> Dict:
    r"""Erasure of S with memory M for the W state: H₀(S|M) = log₂(3/2)."""
    sigma_sm = w_state().density().ptrace([0, 1])
    value = special_erasure_with_memory(sigma_sm)
    inst = build_instance(DensityOperator(sigma_sm.matrix, (4,)), reset_subsystem_channel([2, 2], 0))
    report = work_bound(inst)
    return {'h_zero_cond_bits': value.bits, 'alpha': report.closed_form_alpha,
            'dual_value': report.dual_value, 'gap': report.gap}


# ------------------------------------------------------------------------------------------ #
# accounting of elementary operations
# ------------------------------------------------------------------------------------------ #

STEP_COSTS = {'erase': 1.0, 'extract': -1.0, 'add_ancilla': 0.0, 'remove_ancilla': 0.0, 'noisy_operation': 0.0}


@dataclass(frozen=True)
class FrameworkStep:
    r"""One elementary operation; ``qubits`` is the number of qubits it touches.

    Erasing a qubit costs kT ln 2, turning a pure qubit into a mixed one yields kT ln 2,
    adding/removing ancillas and noisy operations are free.
    """
    kind: str
    qubits: float = 0.0
    note: str = ''

    def __post_init__(self):
        if self.kind not in STEP_COSTS:
            raise PreconditionError(f"unknown operation {self.kind!r}")
        if self.qubits < 0:
            raise PreconditionError(f"negative qubit count {self.qubits}")

    @property
    def cost(self) -> float:
        return STEP_COSTS[self.kind] * self.qubits


def protocol_from_split(split: AncillaSplit) -> List[FrameworkStep]:
    r"""Realize σ ⪰_λ ρ: mix a pure λ1-qubit ancilla A, apply the noisy operation, reset λ2 qubits of B."""
    return [
        FrameworkStep('add_ancilla', split.lambda1, 'pure ancilla A'),
        FrameworkStep('extract', split.lambda1, 'A becomes maximally mixed'),
        FrameworkStep('noisy_operation', 0.0, 'unital map on A⊗X → B⊗Y'),
        FrameworkStep('erase', split.lambda2, 'reset the mixed ancilla B'),
        FrameworkStep('remove_ancilla', split.lambda2, 'pure ancilla B'),
    ]


def net_work(steps: List[FrameworkStep]) -> float:
    """Total work cost in kT ln 2; equals −λ for a protocol built from a split."""
    return float(sum(step.cost for step in steps))
