import numpy as np
import pytest

from metaplectic.errors import InvalidArg, NonZeroA, RangeEmpty, SingularB, SpecMismatch
from metaplectic.fio import (FioOperator, chain_data, compose_right_symbol, fio_compose, fio_khee,
                             fio_type1, gabor_class_check, symbol_chain)
from metaplectic.grid import phase_invariant_distance as pid
from metaplectic.ops import apply
from metaplectic.quantize import PhaseSymbol, weyl_apply
from metaplectic.symplectic import from_matrix, j_matrix, random_symplectic_rank
from metaplectic.tf import concentration, gabor_matrix, gaussian_window
from conftest import bump_symbol, packet


@pytest.mark.parametrize("rank,seed", [(0, 0), (0, 1), (1, 0), (1, 1), (1, 2)])
def test_khee_matches_composition_line(line, rank, seed):
    S = random_symplectic_rank(1, rank, seed=seed)
    sig = bump_symbol(line)
    f = packet(line)
    ref = fio_compose(sig, S).apply(f)
    assert pid(fio_khee(sig, S).apply(f), ref) < 3e-3


def test_type1_branch_line(line):
    S = random_symplectic_rank(1, 1, seed=4)
    sig = bump_symbol(line)
    f = packet(line, -0.3, 0.1, 1.2)
    T = fio_type1(sig, S)
    assert T.form == "type1"
    assert pid(T.apply(f), fio_khee(sig, S).apply(f)) < 1e-3


def test_zero_block_branch_line(line):
    S = random_symplectic_rank(1, 0, seed=3)
    sig = bump_symbol(line)
    T = fio_khee(sig, S)
    assert T.form == "zero_block"
    f = packet(line)
    assert pid(T.apply(f), fio_compose(sig, S).apply(f)) < 1e-3


def test_constant_symbol_reduces_to_mu(line):
    one = PhaseSymbol.const(line)
    f = packet(line)
    for rank in (0, 1):
        S = random_symplectic_rank(1, rank, seed=7)
        assert pid(fio_khee(one, S).apply(f), apply(S, f)) < 1e-6


def test_right_symbol_identity(line):
    sig = bump_symbol(line)
    S = random_symplectic_rank(1, 1, seed=2)
    right, _ = compose_right_symbol(sig, S)
    f = packet(line)
    assert pid(apply(S, weyl_apply(right, f)), fio_compose(sig, S).apply(f)) < 1e-3


def test_chain_data_guards(line):
    with pytest.raises(RangeEmpty):
        chain_data(random_symplectic_rank(1, 0, seed=0))
    with pytest.raises(InvalidArg):
        fio_type1(bump_symbol(line), random_symplectic_rank(1, 0, seed=0))
    with pytest.raises(InvalidArg):
        FioOperator(j_matrix(1), bump_symbol(line), "nope")
    with pytest.raises(SpecMismatch):
        FioOperator(j_matrix(2), bump_symbol(line))


def test_zero_block_needs_zero_a(line):
    S = random_symplectic_rank(1, 1, seed=0)
    with pytest.raises(NonZeroA):
        FioOperator(S, bump_symbol(line), "zero_block").apply(packet(line))


def test_symbol_chain_stages(line):
    sig = bump_symbol(line)
    ch = symbol_chain(sig, random_symplectic_rank(1, 1, seed=1))
    assert set(ch.stages) == {"sigma2", "sigma3", "chain"}
    ch0 = symbol_chain(sig, random_symplectic_rank(1, 0, seed=1))
    assert set(ch0.stages) == {"sigma4", "sigma5"}
    assert ch0.form == "zero_block"


def test_singular_b_detected(line):
    # A = 0 forces B invertible for a true symplectic; build the degenerate one unchecked
    S = from_matrix(np.zeros((2, 2)), check=False)
    with pytest.raises(SingularB):
        symbol_chain(bump_symbol(line), S)
    with pytest.raises(SingularB):
        FioOperator(S, bump_symbol(line), "zero_block").apply(packet(line))


@pytest.mark.parametrize("rank", [0, 1])
def test_gabor_concentration(line, rank):
    S = random_symplectic_rank(1, rank, seed=0)
    T = fio_khee(bump_symbol(line), S)
    fit = gabor_class_check(T)
    assert fit.s_hat >= 4
    G = gabor_matrix(T.apply, gaussian_window(line), 1.0, 4.0)
    assert concentration(G, S.matrix.T) >= 0.95


def test_gabor_rough_symbol_decays_slowly(line):
    rng = np.random.default_rng(0)
    rough = PhaseSymbol(line, values=np.exp(2j * np.pi * rng.random(line.shape * 2)))
    fit = gabor_class_check(fio_compose(rough, random_symplectic_rank(1, 1, seed=0)))
    assert fit.s_hat < 4


@pytest.mark.slow
def test_khee_plane(plane):
    S = random_symplectic_rank(2, 1, seed=0)
    sig = bump_symbol(plane)
    f = packet(plane)
    assert pid(fio_khee(sig, S).apply(f), fio_compose(sig, S).apply(f)) < 3e-3
