import numpy as np
import pytest

from src.channel import apply_on_subsystem, reset_subsystem_channel, verify_flags
from src.exceptions import DimensionMismatch, MarginalMismatch
from src.landauer import dual_witness, optimal_channel, optimal_isometry, random_instance, w_state
from src.majorize import absorbed_randomness, random_spectrum
from src.qmat import DensityOperator, maximally_entangled, random_density
from src.sdp import (
    DualCertificate,
    LandauerData,
    LpProblem,
    SdpBuilder,
    _inverse,
    certificate_from_solution,
    embed_hermitian,
    encode_landauer_primal,
    extract_hermitian,
    solve_lp,
    solve_sdp,
    verify_certificate,
)


def _trivial_reference(m):
    m = np.asarray(m, dtype=complex)
    return DensityOperator(m, (m.shape[0], 1))


def test_lp_examples():
    solution = solve_lp(LpProblem(c=[1.0], A_ub=[[1.0]], b_ub=[1.0], sense='max'))
    assert solution.status == 'optimal'
    assert abs(solution.objective - 1) < 1e-9

    solution = solve_lp(LpProblem(c=[1.0, 1.0], bounds=[(0, 1), (0, 2)], sense='max'))
    assert abs(solution.objective - 3) < 1e-9


def test_lp_transportation():
    # supplies (1, 2), demands (2, 1); the cheap diagonal route cannot carry everything
    cost = np.array([[1.0, 4.0], [2.0, 1.0]])
    a_eq = np.array([
        [1, 1, 0, 0],
        [0, 0, 1, 1],
        [1, 0, 1, 0],
        [0, 1, 0, 1],
    ], dtype=float)
    solution = solve_lp(LpProblem(c=cost.ravel(), A_eq=a_eq, b_eq=[1, 2, 2, 1]))
    assert solution.status == 'optimal'
    assert abs(solution.objective - 4) < 1e-9
    assert np.abs(solution.x - [1, 0, 1, 1]).max() < 1e-9


def test_lp_statuses():
    assert solve_lp(LpProblem(c=[1.0], sense='max')).status == 'unbounded'
    assert solve_lp(LpProblem(c=[1.0], A_ub=[[1.0]], b_ub=[-1.0])).status == 'infeasible'
    assert solve_lp(LpProblem(c=[1.0, 1.0], A_eq=[[1.0, 1.0]], b_eq=[-1.0])).status == 'infeasible'


def test_lp_lower_bounds():
    solution = solve_lp(LpProblem(c=[1.0], bounds=[(2.5, None)]))
    assert abs(solution.objective - 2.5) < 1e-9


def test_lp_problem_validation():
    with pytest.raises(DimensionMismatch):
        LpProblem(c=[1.0, 1.0], A_ub=[[1.0]], b_ub=[1.0])
    with pytest.raises(DimensionMismatch):
        LpProblem(c=[1.0], bounds=[(None, 1.0)])


def test_hermitian_embedding(rng):
    g = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    h = g + g.conj().T
    emb = embed_hermitian(h)
    assert np.abs(emb - emb.T).max() < 1e-14
    assert np.abs(extract_hermitian(emb) - h).max() < 1e-14
    doubled = np.sort(np.repeat(np.linalg.eigvalsh(h), 2))
    assert np.abs(np.linalg.eigvalsh(emb) - doubled).max() < 1e-10


def test_sdp_trace_above_identity():
    problem = (SdpBuilder()
               .add_block('X', 2)
               .set_objective('X', np.eye(2))
               .add_psd_inequality('lower', {'X': lambda x: -x}, -np.eye(2))
               .build())
    solution = solve_sdp(problem)
    assert solution.status == 'optimal'
    assert abs(solution.primal_objective - 2) < 1e-6
    assert np.abs(solution.primal['X'] - np.eye(2)).max() < 1e-5
    assert solution.dual_objective <= solution.primal_objective + 1e-7


def test_sdp_largest_eigenvalue(rng):
    for _ in range(10):
        d = int(rng.integers(2, 7))
        g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        h = g @ g.conj().T
        problem = (SdpBuilder()
                   .add_block('t', 1)
                   .set_objective('t', 1.0)
                   .add_psd_inequality('bound', {'t': lambda a, d=d: -a[0, 0] * np.eye(d)}, -h)
                   .build())
        solution = solve_sdp(problem)
        assert solution.status == 'optimal'
        lam = np.linalg.eigvalsh(h)[-1]
        assert abs(solution.scalar('t') - lam) < 1e-6 * max(1.0, lam)
        assert solution.dual_objective <= solution.primal_objective + 1e-7


def test_sdp_problem_lookup():
    problem = (SdpBuilder()
               .add_block('X', 2)
               .set_objective('X', np.eye(2))
               .add_psd_inequality('lower', {'X': lambda x: -x}, -np.eye(2))
               .build())
    assert problem.block('lower').dim == 2
    assert problem.group('lower').kind == 'psd_inequality'
    assert problem.inequalities == ['lower']
    assert problem.num_constraints == 4
    with pytest.raises(KeyError):
        problem.group('missing')


def test_landauer_identity_on_bell():
    bell = maximally_entangled(2).density()
    solution = solve_sdp(encode_landauer_primal(bell, bell))
    assert solution.status == 'optimal'
    assert abs(solution.scalar('alpha') - 1) < 1e-5


def test_landauer_identity_on_pure_product():
    product = DensityOperator(np.kron(np.diag([1.0, 0.0]), np.diag([0.0, 1.0])), (2, 2))
    solution = solve_sdp(encode_landauer_primal(product, product))
    assert abs(solution.scalar('alpha') - 1) < 1e-5


def test_landauer_erasure_of_mixed_qubit():
    problem = encode_landauer_primal(_trivial_reference(np.eye(2) / 2), _trivial_reference(np.diag([1.0, 0.0])))
    solution = solve_sdp(problem)
    assert solution.status == 'optimal'
    assert abs(solution.scalar('alpha') - 2) < 1e-5


def test_landauer_w_state_erasure():
    sigma = DensityOperator(w_state().density().matrix, (4, 2))
    rho = apply_on_subsystem(reset_subsystem_channel([2, 2], 0), sigma, 0)
    solution = solve_sdp(encode_landauer_primal(sigma, rho))
    assert solution.status == 'optimal'
    assert abs(solution.scalar('alpha') - 1.5) < 1e-5


def test_landauer_matches_absorbed_randomness(rng):
    for _ in range(10):
        p, q = random_spectrum(3, rng), random_spectrum(int(rng.integers(2, 4)), rng)
        problem = encode_landauer_primal(_trivial_reference(np.diag(p.values)), _trivial_reference(np.diag(q.values)))
        solution = solve_sdp(problem)
        assert abs(solution.scalar('alpha') - 2.0 ** (-absorbed_randomness(p, q))) < 1e-6


def test_landauer_marginal_mismatch():
    bell = maximally_entangled(2).density()
    product = DensityOperator(np.kron(np.diag([1.0, 0.0]), np.diag([1.0, 0.0])), (2, 2))
    with pytest.raises(MarginalMismatch):
        encode_landauer_primal(bell, product)
    with pytest.raises(DimensionMismatch):
        encode_landauer_primal(bell, _trivial_reference(np.eye(2) / 2))


def test_landauer_fixed_alpha_below_optimum():
    problem = encode_landauer_primal(_trivial_reference(np.eye(2) / 2), _trivial_reference(np.diag([1.0, 0.0])),
                                     alpha=1.5)
    solution = solve_sdp(problem)
    assert solution.status != 'optimal' or solution.max_residual > 1e-4


def test_certificate_from_solver(rng):
    for _ in range(5):
        inst = random_instance(2, 2, rng)
        problem = encode_landauer_primal(inst.sigma_XR, inst.rho_XR)
        solution = solve_sdp(problem)
        alpha, t, cert = certificate_from_solution(problem, solution)
        report = verify_certificate(problem, (alpha, t), cert, tol=1e-5)
        assert report.passed, report.residuals


def test_closed_form_certificate(rng):
    for _ in range(20):
        d_x, d_r = (int(d) for d in rng.integers(2, 5, size=2))
        inst = random_instance(d_x, d_r, rng)
        chan = optimal_channel(optimal_isometry(inst))
        alpha = verify_flags(chan).subunital_alpha
        report = verify_certificate(inst.landauer_data, (alpha, chan.choi), dual_witness(inst), tol=1e-7)
        assert report.passed, report.residuals
        assert report.gap <= 1e-8


def test_perturbed_dual_rejected(rng):
    inst = random_instance(2, 2, rng)
    chan = optimal_channel(optimal_isometry(inst))
    alpha = verify_flags(chan).subunital_alpha
    cert = dual_witness(inst)
    shifted = DualCertificate(cert.omega, cert.x_block, cert.z_block + 0.1 * np.eye(cert.z_block.shape[0]))
    report = verify_certificate(inst.landauer_data, (alpha, chan.choi), shifted, tol=1e-7)
    assert not report.passed


def test_certificate_value(rng):
    rho = random_density(4, rng, dims=(2, 2))
    cert = DualCertificate(DensityOperator(np.eye(2) / 2), np.eye(2) * 0.1, np.eye(4))
    assert abs(cert.value(rho) - 0.8) < 1e-12


def test_landauer_data_process():
    bell = maximally_entangled(2).density()
    data = LandauerData.from_states(bell, bell)
    assert data.dims == (2, 2, 2)
    identity_choi = np.zeros((4, 4))
    identity_choi[np.ix_([0, 3], [0, 3])] = 1
    assert np.abs(data.process(identity_choi) - bell.matrix).max() < 1e-12


def test_landauer_program_on_face():
    problem = encode_landauer_primal(_trivial_reference(np.eye(2) / 2), _trivial_reference(np.diag([1.0, 0.0])))
    assert problem.metadata['channel_face'].shape == (4, 2)
    assert problem.block('T').dim == 2
    assert problem.group('trace_nonincreasing').kind == 'psd_inequality'
    assert 'trace_nonincreasing' not in [block.name for block in problem.blocks]

    sigma = DensityOperator(w_state().density().matrix, (4, 2))
    rho = apply_on_subsystem(reset_subsystem_channel([2, 2], 0), sigma, 0)
    problem = encode_landauer_primal(sigma, rho)
    assert problem.block('trace_nonincreasing').dim == 2


def test_landauer_small_random_instances():
    rng = np.random.default_rng(7)
    for _ in range(20):
        d_x, d_r = (int(d) for d in rng.integers(2, 4, size=2))
        inst = random_instance(d_x, d_r, rng)
        solution = solve_sdp(encode_landauer_primal(inst.sigma_XR, inst.rho_XR))
        assert solution.status == 'optimal', solution.detail
        assert solution.max_residual < 1e-6
        assert solution.dual_objective <= solution.primal_objective + 1e-7


def test_sdp_iteration_limit_reports_residuals(rng):
    inst = random_instance(3, 2, rng)
    solution = solve_sdp(encode_landauer_primal(inst.sigma_XR, inst.rho_XR), max_iter=2)
    assert solution.status == 'numerical_failure'
    assert solution.detail == 'iteration limit'
    assert np.all(np.isfinite(solution.residuals)) and solution.residuals.size
    assert np.isfinite(solution.dual_residual)


def test_inverse_of_singular_slack():
    assert np.abs(_inverse(np.diag([4.0, 0.0])) - np.diag([0.25, 0.0])).max() < 1e-12
    assert np.abs(_inverse(np.diag([4.0, 2.0])) - np.diag([0.25, 0.5])).max() < 1e-12
