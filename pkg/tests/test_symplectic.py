import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metaplectic.errors import InvalidArg, NotSymplectic
from metaplectic.symplectic import (J, BlockSymplectic, Subspace, b_pseudo_inverse, chirp_matrix,
                                    constants, dilation_matrix, from_matrix, identity, j_matrix,
                                    make_symplectic, pseudo_inverse_on_range, random_symplectic,
                                    random_symplectic_rank, range_kernel, singular_product,
                                    verify_subspace_mappings, volume_q)

seeds = st.integers(min_value=0, max_value=10_000)
dims = st.integers(min_value=1, max_value=3)


@given(dims, seeds)
@settings(max_examples=40, deadline=None)
def test_random_matrices_are_symplectic(d, seed):
    S = random_symplectic(d, 4, seed=seed)
    M = S.matrix
    assert np.max(np.abs(M @ J(d) @ M.T - J(d))) < 1e-10
    assert S.max_residual() < 1e-10


@given(st.integers(2, 3), seeds, st.data())
@settings(max_examples=30, deadline=None)
def test_forced_rank(d, seed, data):
    r = data.draw(st.integers(0, d))
    S = random_symplectic_rank(d, r, seed=seed)
    assert S.rank_A == r
    assert verify_subspace_mappings(S).ok


def test_blocks_and_inverse():
    S = random_symplectic(2, 5, seed=3)
    Si = S.inverse()
    assert np.allclose(S.matrix @ Si.matrix, np.eye(4), atol=1e-10)
    assert np.allclose((S @ Si).matrix, np.eye(4), atol=1e-10)
    assert np.allclose(S.T.matrix, S.matrix.T)


def test_not_symplectic_reports_residual():
    M = np.eye(2) + 1e-3
    with pytest.raises(NotSymplectic) as exc:
        from_matrix(M)
    assert exc.value.residual > 1e-4


def test_bad_shapes():
    with pytest.raises(InvalidArg):
        make_symplectic(np.eye(2), np.zeros((2, 3)), np.zeros((2, 2)), np.eye(2))


def test_generators():
    C = np.array([[1.0, 0.5], [0.5, -2.0]])
    assert np.allclose(chirp_matrix(C).C, 0)
    assert np.allclose(chirp_matrix(C).B, -C)
    M = np.array([[2.0, 1.0], [0.0, 1.0]])
    D = dilation_matrix(M)
    assert np.allclose(D.A, np.linalg.inv(M).T) and np.allclose(D.D, M)
    assert np.allclose(j_matrix(2).matrix, J(2))
    assert identity(3).rank_A == 3


def test_json_roundtrip():
    S = random_symplectic_rank(2, 1, seed=4)
    T = BlockSymplectic.from_dict(json.loads(S.to_json()))
    assert np.allclose(S.matrix, T.matrix)


def test_subspace_ops():
    L = Subspace.span(np.array([[1.0], [1.0]]), 2)
    assert L.dim == 1
    assert np.allclose(L.projector @ L.projector, L.projector)
    assert L.complement().dim == 1
    assert L.contains(Subspace.span(np.array([2.0, 2.0])))
    assert Subspace.from_dict(L.to_dict()).equals(L)
    R, N = range_kernel(np.diag([1.0, 0.0]))
    assert R.dim == 1 and N.dim == 1 and N.contains(Subspace.span(np.array([0.0, 1.0])))


def test_volume_full_space_is_det():
    rng = np.random.default_rng(0)
    for _ in range(20):
        M = rng.standard_normal((3, 3))
        assert abs(volume_q(Subspace.full(3), M) - abs(np.linalg.det(M))) < 1e-10 * max(1, abs(np.linalg.det(M)))


def test_volume_conventions():
    assert volume_q(Subspace.zero(2), np.eye(2)) == 1.0
    assert volume_q(Subspace.full(2), np.zeros((2, 2))) == 1.0
    assert volume_q(Subspace.full(2), np.diag([1.0, 0.0])) == 0.0
    assert singular_product(np.diag([3.0, 0.0, 2.0])) == pytest.approx(6.0)


def test_pseudo_inverse_on_range():
    A = np.array([[1.0, 2.0], [2.0, 4.0]])
    Ainv = pseudo_inverse_on_range(A)
    R, _ = range_kernel(A)
    y = R.basis[:, 0]
    assert np.allclose(A @ Ainv(y), y)


def test_b_pseudo_inverse_on_kernels():
    for seed in range(5):
        S = random_symplectic_rank(3, 1, seed=seed)
        Binv = b_pseudo_inverse(S)
        fr = S.frames
        # projected B: N(A) -> N(A^T) is inverted by B^inv
        PB = fr.U_n @ fr.U_n.T @ S.B
        for v in fr.V_n.T:
            assert np.allclose(Binv(PB @ v), v, atol=1e-9)


def test_constants_nonsingular():
    S = random_symplectic_rank(2, 2, seed=1)
    c, c1 = constants(S)
    assert c == pytest.approx(np.sqrt(abs(np.linalg.det(S.A))))
    assert c1 == pytest.approx(1 / np.sqrt(abs(np.linalg.det(S.A))))


def test_d_relation_is_diagnostic_only():
    """D need not map N(A) into N(A^T); the report flags it without failing."""
    flags = [verify_subspace_mappings(random_symplectic_rank(2, 1, seed=s)).d_maps_kernel
             for s in range(10)]
    assert not all(flags)
