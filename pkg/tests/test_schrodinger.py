import math

import numpy as np
import pytest

from metaplectic.errors import InvalidArg, SpecMismatch, StepTooLarge
from metaplectic.grid import GridSignal, GridSpec, fourier_axes, gaussian, norm2
from metaplectic.grid import phase_invariant_distance as pid
from metaplectic.quantize import PhaseSymbol
from metaplectic.schrodinger import (PropagatorConfig, a_t_matrix, caustic_apply, det_a_t,
                                     hermite_evolve, is_caustic, potential_class_check,
                                     split_step_evolve, unperturbed_evolve)


@pytest.fixture(scope="module")
def small():
    return GridSpec(2, 64, 8.0)


def _u0(spec):
    return gaussian(spec, center=[0.5, 0.7], width=1.2, freq=[0.3, -0.4])


def test_flow_matrix():
    for t in (0.0, 0.4, math.pi / 2, 2.0):
        S = a_t_matrix(t)
        assert S.max_residual() < 1e-12
        assert det_a_t(t) == pytest.approx(math.cos(t), abs=1e-12)
    assert is_caustic(math.pi / 2) and is_caustic(3 * math.pi / 2)
    assert not is_caustic(1.0)


@pytest.mark.parametrize("t", [0.3, math.pi / 2, 2.5, math.pi])
def test_unperturbed_matches_hermite(small, t):
    u0 = _u0(small)
    assert pid(unperturbed_evolve(u0, t), hermite_evolve(u0, t)) < 1e-6


def test_caustic_closed_form(plane128):
    u0 = _u0(plane128)
    F2 = GridSignal(plane128, fourier_axes(u0.values, plane128, [1]))
    assert pid(caustic_apply(u0), F2) < 1e-10
    assert pid(unperturbed_evolve(u0, math.pi / 2), F2) < 1e-10
    assert pid(caustic_apply(u0, k=1), unperturbed_evolve(u0, 3 * math.pi / 2)) < 1e-10


def test_caustic_symbol_guard(small, plane128):
    with pytest.raises(SpecMismatch):
        caustic_apply(_u0(small), PhaseSymbol.const(plane128))
    with pytest.raises(SpecMismatch):
        unperturbed_evolve(gaussian(GridSpec(1, 64, 8.0)), 1.0)


def test_config_validation(small):
    with pytest.raises(InvalidArg):
        PropagatorConfig(1.0, steps=0)
    with pytest.raises(InvalidArg):
        PropagatorConfig(1.0, weight_s=4.0)
    with pytest.raises(SpecMismatch):
        PropagatorConfig(1.0, potential=gaussian(GridSpec(1, 64, 8.0)))
    assert PropagatorConfig(1.0, steps=4).dt == 0.25


def test_step_guards(small):
    u0 = _u0(small)
    with pytest.raises(StepTooLarge):
        split_step_evolve(u0, PropagatorConfig(math.pi / 2, steps=1))
    V = GridSignal(small, np.full(small.shape, 100.0))
    with pytest.raises(StepTooLarge):
        split_step_evolve(u0, PropagatorConfig(1.0, steps=8, potential=V))


def test_split_step_free_matches_flow(small):
    u0 = _u0(small)
    ev = split_step_evolve(u0, PropagatorConfig(1.2, steps=16), trace_every=4)
    assert pid(ev.u, hermite_evolve(u0, 1.2)) < 1e-6
    assert [r.step for r in ev.trace] == [0, 4, 8, 12, 16]
    assert all(abs(r.norm - 1) < 1e-6 for r in ev.trace)


def test_constant_potential_is_global_phase(small):
    u0 = _u0(small)
    V = GridSignal(small, np.full(small.shape, 0.8))
    a = split_step_evolve(u0, PropagatorConfig(1.0, steps=32, potential=V)).u
    b = split_step_evolve(u0, PropagatorConfig(1.0, steps=32)).u
    assert np.max(np.abs(np.abs(a.values) - np.abs(b.values))) < 1e-6
    ratio = a.values[np.abs(b.values) > 1e-3] / b.values[np.abs(b.values) > 1e-3]
    assert np.max(np.abs(ratio - np.exp(-0.8j))) < 1e-6


def test_bounded_potential_norm(small):
    u0 = _u0(small)
    x1, x2 = small.mesh()
    V = GridSignal(small, np.exp(-np.pi * (x1 ** 2 + x2 ** 2) / 4))
    ev = split_step_evolve(u0, PropagatorConfig(math.pi / 2, steps=64, potential=V))
    assert norm2(ev.u) == pytest.approx(1.0, abs=1e-6)
    # a weak smooth potential stays close to the free flow
    assert pid(ev.u, unperturbed_evolve(u0, math.pi / 2)) < 0.5


def test_potential_class_check(small):
    x1, x2 = small.mesh()
    V = GridSignal(small, np.exp(-np.pi * (x1 ** 2 + x2 ** 2)))
    a0 = potential_class_check(V, 0.0)
    a5 = potential_class_check(V, 5.0)
    assert np.isfinite(a5) and a5 >= a0
    rng = np.random.default_rng(0)
    rough = GridSignal(small, rng.standard_normal(small.shape))
    assert potential_class_check(rough, 5.0) > 10 * a5
    assert potential_class_check(GridSignal(small, np.zeros(small.shape)), 5.0) == 0.0
    with pytest.raises(InvalidArg):
        potential_class_check(V, -1.0)
