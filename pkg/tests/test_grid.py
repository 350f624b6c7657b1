import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metaplectic.errors import InvalidArg, NonAxisAligned, SpecMismatch, ZeroSignal
from metaplectic.grid import (GridSignal, GridSpec, evaluate, evaluate_linear, fourier, gaussian,
                              hermite, inner, inverse_fourier, load_signal, norm2, partial_fourier,
                              phase_invariant_distance, rotate_frame, save_signal, upsample2, zeros)
from metaplectic.symplectic import Subspace


def test_spec_validation():
    with pytest.raises(InvalidArg):
        GridSpec(1, 7, 4.0)
    with pytest.raises(InvalidArg):
        GridSpec(2, 16, (4.0,))
    s = GridSpec(2, 16, 4.0)
    assert s.extent == (4.0, 4.0)
    assert s.dual().dual() == s
    assert s.points().shape == (256, 2)


def test_signal_validation(line):
    with pytest.raises(SpecMismatch):
        GridSignal(line, np.zeros(5))
    with pytest.raises(InvalidArg):
        GridSignal(line, np.full(line.shape, np.nan))


def test_gaussian_is_fourier_fixed(line):
    g = gaussian(line)
    assert norm2(g) == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(fourier(g).values - g.values)) < 1e-12


@pytest.mark.parametrize("k", [0, 1, 2, 5])
def test_hermite_eigenfunctions(line, k):
    h = hermite(k, line)
    assert np.max(np.abs(fourier(h).values - (-1j) ** k * h.values)) < 1e-10


def test_fourier_roundtrip_and_plancherel(plane):
    f = gaussian(plane, center=[0.5, -0.2], width=0.8, freq=[0.3, 0.1])
    F = fourier(f)
    assert norm2(F) == pytest.approx(norm2(f), rel=1e-12)
    back = inverse_fourier(F)
    assert np.max(np.abs(back.values - f.values)) < 1e-12


def test_partial_fourier_axis_aligned(plane):
    f = gaussian(plane, center=[0.3, 0.0])
    g = partial_fourier(f, Subspace.span(np.array([0.0, 1.0])))
    # the transform along x2 of a centred Gaussian leaves it unchanged
    assert np.max(np.abs(g.values - f.values)) < 1e-12
    with pytest.raises(NonAxisAligned):
        partial_fourier(f, Subspace.span(np.array([1.0, 1.0])))


@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
@settings(max_examples=25, deadline=None)
def test_evaluate_matches_closed_form(a, b):
    spec = GridSpec(1, 64, 8.0)
    f = gaussian(spec, width=1.2, freq=[0.4])
    pts = np.array([[a], [b]])
    exact = gaussian(spec, width=1.2, freq=[0.4])
    # closed form of the same packet
    w = (2 / 1.2 ** 2) ** 0.25 * np.exp(-np.pi * pts[:, 0] ** 2 / 1.2 ** 2 + 2j * np.pi * 0.4 * pts[:, 0])
    assert np.max(np.abs(evaluate(f, pts) - w)) < 1e-9
    assert exact.spec == spec


def test_evaluate_outside_box_is_zero(line):
    f = gaussian(line)
    assert evaluate(f, np.array([[line.extent[0]]]))[0] == 0


def test_evaluate_linear_dilation(line):
    f = gaussian(line, width=1.0)
    g = evaluate_linear(f, np.array([[0.5]]))
    target = gaussian(line, width=2.0).values * (2 / 1.0 ** 2) ** 0.25 / (2 / 2.0 ** 2) ** 0.25
    assert np.max(np.abs(g.values - target)) < 1e-9


def test_rotate_frame_permutation_exact(plane):
    f = gaussian(plane, center=[0.5, -1.0])
    P = np.array([[0.0, 1.0], [1.0, 0.0]])
    g = rotate_frame(f, P)
    assert np.array_equal(g.values, f.values.T)
    with pytest.raises(InvalidArg):
        rotate_frame(f, np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_rotate_frame_generic(plane):
    th = 0.3
    Q = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    f = gaussian(plane, center=[0.5, -0.4], width=1.2)
    g = rotate_frame(f, Q)
    c = Q.T @ np.array([0.5, -0.4])
    assert np.max(np.abs(g.values - gaussian(plane, center=c, width=1.2).values)) < 1e-9


def test_upsample_keeps_samples(plane):
    f = gaussian(plane, center=[0.2, 0.1])
    u = upsample2(f.values, plane, [0, 1])
    assert u.shape == (128, 128)
    assert np.max(np.abs(u[::2, ::2] - f.values)) < 1e-14


def test_phase_invariant_distance(line):
    f = gaussian(line, center=[0.4])
    assert phase_invariant_distance(f, f * np.exp(0.7j)) < 1e-14
    assert phase_invariant_distance(f, 3 * f) < 1e-14
    g = gaussian(line, center=[-2.0])
    assert phase_invariant_distance(f, g) > 0.5
    with pytest.raises(ZeroSignal):
        phase_invariant_distance(f, zeros(line))


def test_inner_is_conjugate_linear_in_second(line):
    f = gaussian(line, center=[0.3])
    g = gaussian(line, center=[-0.3], freq=[0.2])
    assert inner(f, 2j * g) == pytest.approx(-2j * inner(f, g))


@pytest.mark.parametrize("enc", ["csv", "bin"])
def test_signal_roundtrip(tmp_path, plane, enc):
    f = gaussian(plane, center=[0.5, 0.25], freq=[0.1, -0.3])
    path = tmp_path / f"f.{enc}"
    save_signal(path, f, enc)
    g, header = load_signal(path)
    assert header["encoding"] == enc
    assert g.spec == f.spec
    assert np.array_equal(g.values, f.values)
