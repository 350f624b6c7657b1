import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metaplectic.errors import InvalidArg, RangeEmpty, SingularBlockA
from metaplectic.grid import (GridSignal, GridSpec, fourier, hermite, inverse_fourier, norm2,
                              phase_invariant_distance as pid)
from metaplectic.ops import (ROUTES, apply, compose, factor_generators, generating_check,
                             make_plan, phase_T, rearranged_phase)
from metaplectic.symplectic import (chirp_matrix, dilation_matrix, identity, j_matrix,
                                    random_symplectic, random_symplectic_rank)
from conftest import packet


def _routes(S, f):
    out = {}
    for r in ROUTES:
        try:
            out[r] = apply(S, f, r)
        except (SingularBlockA, RangeEmpty):
            pass
    return out


def test_j_is_inverse_fourier(line):
    f = packet(line, 0.7, 0.3, 0.8)
    for r in ("generators", "direct"):
        assert pid(apply(j_matrix(1), f, r), inverse_fourier(f)) < 1e-10


def test_identity_and_generators(line):
    f = packet(line)
    assert pid(apply(identity(1), f), f) < 1e-13
    g = apply(chirp_matrix([[0.5]]), f, "generators")
    x = line.axis(0)
    assert np.max(np.abs(g.values - f.values * np.exp(-0.5j * np.pi * x ** 2))) < 1e-14
    h = apply(dilation_matrix([[2.0]]), f, "generators")
    assert norm2(h) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_fourier_square_on_hermite(line, k):
    h = hermite(k, line)
    Jm = j_matrix(1)
    g = apply(Jm, apply(Jm, h))
    # F^-2 is the parity; H_k has parity (-1)^k
    assert np.max(np.abs(g.values - (-1) ** k * h.values)) < 1e-10


def test_route_guards(plane):
    S = random_symplectic_rank(2, 1, seed=0)
    with pytest.raises(SingularBlockA):
        make_plan(S, "nonsingular")
    with pytest.raises(RangeEmpty):
        make_plan(random_symplectic_rank(2, 0, seed=0), "rearranged")
    with pytest.raises(InvalidArg):
        make_plan(S, "bogus")
    with pytest.raises(SingularBlockA):
        phase_T(S, np.zeros(2), np.zeros(2))


@pytest.mark.parametrize("rank,seed", [(0, 0), (1, 0), (1, 3), (2, 1)])
def test_routes_agree_plane(plane, rank, seed):
    f = packet(plane)
    out = _routes(random_symplectic_rank(2, rank, seed=seed), f)
    assert len(out) >= 2
    keys = sorted(out)
    for i, a in enumerate(keys):
        assert norm2(out[a]) == pytest.approx(1.0, abs=1e-3)
        for b in keys[i + 1:]:
            assert pid(out[a], out[b]) < 1e-3, (a, b)


@given(st.integers(0, 1), st.integers(0, 10 ** 6))
@settings(max_examples=15, deadline=None)
def test_routes_agree_line(rank, seed):
    spec = GridSpec(1, 128, math.sqrt(128))
    f = packet(spec)
    out = _routes(random_symplectic_rank(1, rank, seed=seed), f)
    ref = out["generators"]
    for r, g in out.items():
        assert pid(g, ref) < 1e-3, r


def test_composition_law(line):
    f = packet(line)
    S1 = random_symplectic(1, 3, seed=1)
    S2 = random_symplectic(1, 3, seed=2)
    lhs = apply(S2, apply(S1, f))
    rhs = apply(compose(S2, S1), f)
    assert pid(lhs, rhs) < 1e-6


def test_factorization_product(plane):
    for rank in (0, 1, 2):
        S = random_symplectic_rank(2, rank, seed=5)
        M = np.eye(4)
        for s in factor_generators(S):
            M = M @ s.matrix(2)
        assert np.max(np.abs(M - S.matrix)) < 1e-9


@pytest.mark.parametrize("seed", range(4))
def test_generating_function(seed):
    S = random_symplectic_rank(2, 2, seed=seed)
    assert generating_check(S, seed=seed) < 1e-6


def test_reduced_form_agrees_when_d_preserves_kernel():
    # block-diagonal case: D maps N(A) into N(A^T), so the two outer phases coincide
    c, s = 0.0, 1.0
    M = np.array([[1.0, 0, 0, 0], [0, c, 0, s], [0, 0, 1, 0], [0, -s, 0, c]])
    from metaplectic.symplectic import from_matrix
    S = from_matrix(M)
    x = np.random.default_rng(0).standard_normal((10, 2))
    assert np.allclose(rearranged_phase(S, x, "reduced"), rearranged_phase(S, x, "general"))


def test_unitarity_line(line):
    f = packet(line, -0.4, 0.1, 1.3)
    for seed in range(3):
        g = apply(random_symplectic(1, 4, seed=seed), f)
        assert isinstance(g, GridSignal)
        assert norm2(g) == pytest.approx(norm2(f), abs=1e-3)
