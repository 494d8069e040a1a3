import numpy as np
import pytest

from src.channel import (
    ChoiMap,
    adjoint,
    apply,
    apply_matrix,
    apply_on_subsystem,
    choi_from_kraus,
    compose,
    corner,
    dilate_to_unital,
    embed_tmap,
    erasure_channel,
    extract_tmap,
    identity_channel,
    kraus_from_choi,
    lambda_channel,
    random_channel,
    random_cp_map,
    replacement_channel,
    reset_subsystem_channel,
    restrict,
    scale_to_subunital,
    tensor_channel,
    unitary_channel,
    verify_flags,
)
from src.exceptions import DimensionMismatch, NotHermitianError, PreconditionError
from src.majorize import AncillaSplit, TransferMatrix
from src.qmat import DensityOperator, ProjectorOp, maximally_entangled, random_density, random_unitary


def _random_matrix(d, rng):
    return rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))


def test_choi_map_validation():
    with pytest.raises(DimensionMismatch):
        ChoiMap(np.eye(4), 2, 3)
    with pytest.raises(PreconditionError):
        ChoiMap(-np.eye(4), 2, 2)
    with pytest.raises(NotHermitianError):
        ChoiMap(np.triu(np.ones((4, 4))), 2, 2)


def test_apply_examples(rng):
    rho = random_density(3, rng)
    assert np.abs(apply(identity_channel(3), rho).matrix - rho.matrix).max() < 1e-12
    out = apply(erasure_channel(2), np.eye(2) / 2)
    assert np.abs(out.matrix - np.diag([1, 0])).max() < 1e-12


def test_apply_matches_kraus(rng):
    chan = random_channel(3, 2, rng)
    rho = random_density(3, rng).matrix
    kraus = kraus_from_choi(chan)
    expected = sum(k @ rho @ k.conj().T for k in kraus)
    assert np.abs(apply_matrix(chan, rho) - expected).max() < 1e-9
    assert np.abs(choi_from_kraus(kraus).choi - chan.choi).max() < 1e-9


def test_apply_on_subsystem(rng):
    bell = maximally_entangled(2).density()
    out = apply_on_subsystem(identity_channel(2), bell, 0)
    assert np.abs(out.matrix - bell.matrix).max() < 1e-12
    out = apply_on_subsystem(erasure_channel(2), bell, 0)
    assert np.abs(out.matrix - np.kron(np.diag([1, 0]), np.eye(2) / 2)).max() < 1e-12

    chan = random_channel(2, 2, rng)
    rho = random_density(4, rng, dims=(2, 2))
    global_kraus = [np.kron(np.eye(2), k) for k in kraus_from_choi(chan)]
    expected = sum(k @ rho.matrix @ k.conj().T for k in global_kraus)
    assert np.abs(apply_on_subsystem(chan, rho, 1).matrix - expected).max() < 1e-9


def test_adjoint(rng):
    chan = identity_channel(2)
    assert np.abs(adjoint(chan).choi - chan.choi).max() < 1e-12
    u = random_unitary(3, rng)
    assert np.abs(adjoint(unitary_channel(u)).choi - unitary_channel(u.conj().T).choi).max() < 1e-10

    chan = random_cp_map(3, 2, rng)
    a, b = _random_matrix(2, rng), _random_matrix(3, rng)
    lhs = np.trace(a.conj().T @ apply_matrix(chan, b))
    rhs = np.trace(apply_matrix(adjoint(chan), a).conj().T @ b)
    assert abs(lhs - rhs) < 1e-9


def test_verify_flags():
    flags = verify_flags(identity_channel(2))
    assert flags.unital and flags.trace_preserving and abs(flags.subunital_alpha - 1) < 1e-12
    flags = verify_flags(erasure_channel(2))
    assert abs(flags.subunital_alpha - 2) < 1e-12
    assert flags.trace_preserving and not flags.unital
    flags = verify_flags(replacement_channel(np.eye(2) / 2, 2))
    assert abs(flags.subunital_alpha - 1) < 1e-12


def test_compose(rng):
    chan = random_channel(2, 3, rng)
    assert np.abs(compose(identity_channel(3), chan).choi - chan.choi).max() < 1e-12
    twice = compose(erasure_channel(2), erasure_channel(2))
    assert np.abs(twice.choi - erasure_channel(2).choi).max() < 1e-12


def test_compose_subunital_product(rng):
    for _ in range(20):
        d1, d2, d3 = (int(d) for d in rng.integers(1, 4, size=3))
        first = scale_to_subunital(random_cp_map(d1, d2, rng), rng.uniform(0.3, 1))
        second = scale_to_subunital(random_cp_map(d2, d3, rng), rng.uniform(0.3, 1))
        alpha, beta = verify_flags(first).subunital_alpha, verify_flags(second).subunital_alpha
        assert verify_flags(compose(second, first)).subunital_alpha <= alpha * beta + 1e-9


def test_tensor_channel(rng):
    a, b = random_channel(2, 2, rng), random_channel(3, 2, rng)
    rho_a, rho_b = random_density(2, rng).matrix, random_density(3, rng).matrix
    out = apply_matrix(tensor_channel(a, b), np.kron(rho_a, rho_b))
    assert np.abs(out - np.kron(apply_matrix(a, rho_a), apply_matrix(b, rho_b))).max() < 1e-9


def test_reset_subsystem_channel(rng):
    a, b = random_density(2, rng).matrix, random_density(3, rng).matrix
    out = apply_matrix(reset_subsystem_channel([2, 3], 0), np.kron(a, b))
    assert np.abs(out - np.kron(np.diag([1, 0]), b)).max() < 1e-12


def test_dilation_round_trip(rng):
    for _ in range(10):
        chan = scale_to_subunital(random_cp_map(2, 2, rng), rng.uniform(0.2, 1))
        dilated = dilate_to_unital(chan)
        flags = verify_flags(dilated, tol=1e-8)
        assert flags.unital and flags.trace_preserving
        assert np.abs(corner(dilated, 2, 2).choi - chan.choi).max() < 1e-8


def test_dilation_of_unital_channel(rng):
    u = random_unitary(2, rng)
    chan = unitary_channel(u)
    assert np.abs(corner(dilate_to_unital(chan), 2, 2).choi - chan.choi).max() < 1e-9


def test_dilation_of_zero_map(rng):
    zero = ChoiMap(np.zeros((4, 4)), 2, 2)
    dilated = dilate_to_unital(zero)
    m = _random_matrix(4, rng)
    pinched = np.zeros_like(m)
    pinched[:2, :2], pinched[2:, 2:] = m[:2, :2], m[2:, 2:]
    assert np.abs(apply_matrix(dilated, m) - pinched).max() < 1e-12
    assert verify_flags(dilated).unital


def test_dilation_requires_subunital():
    with pytest.raises(PreconditionError):
        dilate_to_unital(erasure_channel(2))


def test_restrict(rng):
    chan = random_cp_map(3, 3, rng)
    full = restrict(chan, ProjectorOp.full(3), ProjectorOp.full(3))
    assert np.abs(full.choi - chan.choi).max() < 1e-12
    empty = ProjectorOp(np.zeros((3, 3)), 0)
    assert np.abs(restrict(chan, empty, ProjectorOp.full(3)).choi).max() < 1e-12

    for _ in range(10):
        chan = random_cp_map(3, 3, rng)
        v = random_unitary(3, rng)[:, :2]
        pi = ProjectorOp(v @ v.conj().T, 2)
        restricted = restrict(chan, pi, pi)
        assert verify_flags(restricted).subunital_alpha <= verify_flags(chan).subunital_alpha + 1e-9


def test_embed_tmap_trivial_split(rng):
    t = scale_to_subunital(random_cp_map(2, 3, rng))
    e = embed_tmap(t, AncillaSplit(0, 0))
    assert np.abs(e.choi - t.choi).max() < 1e-12


def test_embed_tmap_pure_ancilla():
    half = ChoiMap(identity_channel(2).choi / 2, 2, 2)
    e = embed_tmap(half, AncillaSplit(1, 0))
    assert e.dim_in == 4 and e.dim_out == 2
    flags = verify_flags(e)
    assert flags.subunital
    m = np.arange(16, dtype=complex).reshape(4, 4)
    m = m + m.T
    expected = (m[:2, :2] + m[2:, 2:]) / 2
    assert np.abs(apply_matrix(e, m) - expected).max() < 1e-12


def test_embed_tmap_rejects_large_alpha():
    with pytest.raises(PreconditionError):
        embed_tmap(identity_channel(2), AncillaSplit(1, 0))


def test_embed_extract_round_trip(rng):
    t = scale_to_subunital(random_cp_map(2, 2, rng), 0.5)
    split = AncillaSplit(1, 0)
    e = embed_tmap(t, split)
    assert np.abs(extract_tmap(e, split).choi - t.choi).max() < 1e-9

    sigma = random_density(2, rng).matrix
    lhs = apply_matrix(e, np.kron(np.eye(2) / 2, sigma))
    assert np.abs(lhs - apply_matrix(t, sigma)).max() < 1e-9


def test_extract_tmap_examples(rng):
    split = AncillaSplit(1, 1)
    t = extract_tmap(identity_channel(4), split)
    assert np.abs(t.choi - identity_channel(2).choi).max() < 1e-12

    e = unitary_channel(random_unitary(4, rng))
    assert verify_flags(extract_tmap(e, split), tol=1e-9).trace_nonincreasing


def test_lambda_channel(rng):
    entries = np.array([[0.5, 0.2, 0.0], [0.3, 0.4, 0.9]])
    t = TransferMatrix(entries, 'lambda', -np.log2(1.6))
    chan = lambda_channel(t)
    flags = verify_flags(chan)
    assert abs(flags.subunital_alpha - entries.sum(axis=1).max()) < 1e-12
    assert flags.trace_nonincreasing

    u, w = random_unitary(3, rng), random_unitary(2, rng)
    p = np.array([0.6, 0.3, 0.1])
    sigma = u @ np.diag(p) @ u.conj().T
    out = apply_matrix(lambda_channel(t, in_basis=u, out_basis=w), sigma)
    assert np.abs(out - w @ np.diag(entries @ p) @ w.conj().T).max() < 1e-12


def test_apply_subnormalized_output():
    half = ChoiMap(identity_channel(2).choi / 2, 2, 2)
    out = apply(half, DensityOperator(np.eye(2) / 2))
    assert out.subnormalized and abs(out.trace - 0.5) < 1e-12
