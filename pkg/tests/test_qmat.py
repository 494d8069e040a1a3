import numpy as np
import pytest

from src.exceptions import BasisMismatch, DimensionMismatch, NotHermitianError, NotNormalizedError
from src.landauer import w_state
from src.qmat import (
    DensityOperator,
    PureStateVector,
    Spectrum,
    canonical_purification,
    direct_sum,
    eig_hermitian,
    fidelity,
    hermitian_basis,
    hmat,
    hvec,
    ket,
    maximally_entangled,
    minimal_purification,
    partial_trace,
    partial_transpose,
    permute_subsystems,
    random_density,
    random_pure,
    schmidt_relative,
    spectrum,
    support_projector,
    tensor,
    trace_distance,
)


def _random_hermitian(d, rng):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return g + g.conj().T


def test_tensor():
    assert np.abs(tensor(np.eye(2), np.eye(2)) - np.eye(4)).max() == 0
    out = tensor(np.diag([1, 0]), np.diag([0.5, 0.5]))
    assert np.abs(out - np.diag([0.5, 0.5, 0, 0])).max() == 0


def test_tensor_entries(rng):
    a, b = rng.normal(size=(2, 2)), rng.normal(size=(2, 2))
    out = tensor(a, b)
    for i in range(2):
        for j in range(2):
            for k in range(2):
                for l in range(2):
                    assert abs(out[2 * i + k, 2 * j + l] - a[i, j] * b[k, l]) < 1e-14


def test_direct_sum(rng):
    assert np.abs(direct_sum(np.diag([1.0]), np.diag([2.0, 3.0])) - np.diag([1.0, 2.0, 3.0])).max() == 0
    a, b = _random_hermitian(2, rng), _random_hermitian(3, rng)
    joint = np.sort(np.linalg.eigvalsh(direct_sum(a, b)))
    separate = np.sort(np.concatenate([np.linalg.eigvalsh(a), np.linalg.eigvalsh(b)]))
    assert np.abs(joint - separate).max() < 1e-10


def test_partial_trace():
    bell = maximally_entangled(2).density()
    assert np.abs(partial_trace(bell, [2, 2], [0]) - np.eye(2) / 2).max() < 1e-14
    a, b = np.diag([0.3, 0.7]), np.array([[0.5, 0.1], [0.1, 0.5]])
    assert np.abs(partial_trace(np.kron(a, b), [2, 2], [0]) - a).max() < 1e-14
    assert np.abs(partial_trace(np.kron(a, b), [2, 2], [1]) - b).max() < 1e-14


def test_partial_trace_preserves_trace(rng):
    rho = random_density(6, rng, dims=(2, 3))
    for keep in ([0], [1], []):
        assert abs(np.trace(partial_trace(rho, [2, 3], keep)) - 1) < 1e-12


def test_partial_trace_bad_index():
    with pytest.raises(DimensionMismatch):
        partial_trace(np.eye(4) / 4, [2, 2], [2])


def test_permute_and_transpose(rng):
    a, b = random_density(2, rng).matrix, random_density(3, rng).matrix
    swapped = permute_subsystems(np.kron(a, b), [2, 3], [1, 0])
    assert np.abs(swapped - np.kron(b, a)).max() < 1e-14
    pt = partial_transpose(np.kron(a, b), [2, 3], 1)
    assert np.abs(pt - np.kron(a, b.T)).max() < 1e-14


def test_eig_hermitian():
    values, _ = eig_hermitian(np.eye(2))
    assert np.abs(values - [1, 1]).max() < 1e-14
    values, vectors = eig_hermitian(np.diag([1 / 3, 2 / 3]))
    assert np.abs(values - [2 / 3, 1 / 3]).max() < 1e-14
    assert abs(abs(vectors[1, 0]) - 1) < 1e-14


def test_eig_hermitian_rejects_non_hermitian():
    with pytest.raises(NotHermitianError):
        eig_hermitian(np.array([[0, 1], [0, 0]]))


def test_w_state_marginal():
    sigma_sm = w_state().density().ptrace([0, 1])
    assert np.abs(spectrum(sigma_sm).values - [2 / 3, 1 / 3, 0, 0]).max() < 1e-12
    pi = support_projector(sigma_sm)
    assert pi.rank == 2
    expected = np.zeros((4, 4))
    expected[0, 0] = 1
    expected[1:3, 1:3] = 0.5
    assert np.abs(pi.matrix - expected).max() < 1e-12


def test_support_projector_rank(rng):
    psi = random_pure((3,), rng)
    pi = support_projector(psi)
    assert pi.rank == 1
    assert np.abs(pi.matrix - psi.density().matrix).max() < 1e-12
    rho = random_density(5, rng, rank=3)
    assert support_projector(rho).rank == 3


def test_spectrum_type():
    p = Spectrum([0.25, 0.5, 0.25, 0.0])
    assert np.abs(p.values - [0.5, 0.25, 0.25, 0.0]).max() == 0
    assert p.rank() == 3
    assert p.is_normalized()
    assert np.abs(p.padded(6)[-2:]).max() == 0


def test_density_operator_validation():
    with pytest.raises(NotHermitianError):
        DensityOperator(np.array([[0.5, 0.1], [0.0, 0.5]]))
    with pytest.raises(NotNormalizedError):
        DensityOperator(np.eye(2))
    assert DensityOperator(np.eye(2) / 4, subnormalized=True).trace == 0.5
    with pytest.raises(DimensionMismatch):
        DensityOperator(np.eye(4) / 4, (2, 3))


def test_canonical_purification(rng):
    psi = canonical_purification(DensityOperator(np.diag([1.0, 0.0])))
    assert abs(abs(psi.amplitudes[0]) - 1) < 1e-12

    psi = canonical_purification(DensityOperator(np.eye(2) / 2))
    assert np.abs(np.linalg.svd(psi.as_matrix(1), compute_uv=False) - 1 / np.sqrt(2)).max() < 1e-12

    rho = random_density(3, rng)
    psi = canonical_purification(rho)
    assert psi.dims == (3, 3)
    assert np.abs(psi.density().ptrace([0]).matrix - rho.matrix).max() < 1e-9


def test_minimal_purification(rng):
    rho = random_density(4, rng, rank=2)
    psi = minimal_purification(rho)
    assert psi.dims == (4, 2)
    assert np.abs(psi.density().ptrace([0]).matrix - rho.matrix).max() < 1e-9


def test_schmidt_relative(rng):
    product = PureStateVector(np.kron(ket(0, 2), ket(1, 2)), (2, 2))
    dec = schmidt_relative(product, 1, np.eye(2))
    assert np.abs(dec.coefficients - [1]).max() < 1e-12

    dec = schmidt_relative(maximally_entangled(2), 1, np.eye(2))
    assert np.abs(dec.coefficients - 1 / np.sqrt(2)).max() < 1e-12
    assert np.abs(np.abs(dec.left_vectors) - np.eye(2)).max() < 1e-12

    psi = random_pure((4, 4), rng)
    m = psi.as_matrix(1)
    _, basis = eig_hermitian(m.T @ m.conj())
    dec = schmidt_relative(psi, 1, basis)
    assert abs((dec.coefficients ** 2).sum() - 1) < 1e-10
    gram = dec.left_vectors.conj().T @ dec.left_vectors
    assert np.abs(gram - np.eye(gram.shape[0])).max() < 1e-9


def test_schmidt_relative_wrong_basis():
    psi = PureStateVector(np.array([np.sqrt(0.7), 0, 0, np.sqrt(0.3)]), (2, 2))
    hadamard = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    with pytest.raises(BasisMismatch):
        schmidt_relative(psi, 1, hadamard)


def test_fidelity_and_trace_distance(rng):
    rho = random_density(3, rng)
    zero, one = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    assert abs(fidelity(rho, rho) - 1) < 1e-7
    assert abs(fidelity(zero, one)) < 1e-12
    assert abs(fidelity(np.eye(2) / 2, zero) - 1 / np.sqrt(2)) < 1e-12

    assert abs(trace_distance(rho, rho)) < 1e-12
    assert abs(trace_distance(zero, one) - 1) < 1e-12
    p, q = np.array([0.5, 0.3, 0.2]), np.array([0.1, 0.6, 0.3])
    assert abs(trace_distance(np.diag(p), np.diag(q)) - 0.5 * np.abs(p - q).sum()) < 1e-12


def test_hermitian_basis(rng):
    basis = hermitian_basis(3)
    gram = np.einsum('aij,bji->ab', basis, basis).real
    assert np.abs(gram - np.eye(9)).max() < 1e-12
    h = _random_hermitian(3, rng)
    assert np.abs(hmat(hvec(h)) - h).max() < 1e-12
