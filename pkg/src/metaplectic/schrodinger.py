"""Anisotropic harmonic oscillator in two variables with a bounded perturbation.

``H = -(1/4 pi) d^2/dx2^2 + pi x2^2 + V(x1, x2)``.  Without ``V`` the
propagator is metaplectic with the rotation family ``a_t_matrix``; the block
``A_t = diag(1, cos t)`` is singular at the caustics ``t = pi/2 + k pi``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArg, SpecMismatch, StepTooLarge
from .grid import GridSignal, fourier_axes, hermite_1d, norm2
from .ops import apply as mu_apply
from .ops import apply_nonsingular
from .quantize import PhaseSymbol, kn_sum
from .symplectic import BlockSymplectic, from_matrix
from .tf import gaussian_window, lattice, modulation_norm_estimate, stft

MAX_PHASE_STEP = 0.1


def a_t_matrix(t: float) -> BlockSymplectic:
    """Flow of ``H0`` on phase space ``(x1, x2, xi1, xi2)``; ``det A_t = cos t``."""
    c, s = math.cos(t), math.sin(t)
    M = np.array([[1.0, 0, 0, 0], [0, c, 0, s], [0, 0, 1, 0], [0, -s, 0, c]])
    return from_matrix(M)


def det_a_t(t: float) -> float:
    return float(np.linalg.det(a_t_matrix(t).A))


def propagator_matrix(t: float) -> BlockSymplectic:
    """Matrix handed to :func:`metaplectic.ops.apply` for ``exp(-itH0)``.

    Operators here move packets by ``S^T``, so the propagator is attached to
    ``A_t^T``.
    """
    return a_t_matrix(t).T


def is_caustic(t: float, tol: float = 1e-12) -> bool:
    return abs(math.cos(t)) < tol


def unperturbed_evolve(u0: GridSignal, t: float, route: str = "auto") -> GridSignal:
    """``exp(-i t H0) u0`` through a metaplectic route (rearranged at caustics)."""
    _check_2d(u0)
    return mu_apply(propagator_matrix(t), u0, route)


def hermite_evolve(u0: GridSignal, t: float, kmax: int = 40) -> GridSignal:
    """Oracle: expand ``u0`` in Hermite functions of ``x2`` and rotate each by ``exp(-it(k + 1/2))``."""
    _check_2d(u0)
    x2 = u0.spec.axis(1)
    dx = u0.spec.dx[1]
    H = np.stack([hermite_1d(k, x2) for k in range(kmax)])  # (K, n)
    coef = u0.values @ H.T * dx  # (n1, K)
    ph = np.exp(-1j * t * (np.arange(kmax) + 0.5))
    return GridSignal(u0.spec, (coef * ph) @ H)


def _check_2d(u: GridSignal):
    if u.spec.dim != 2:
        raise SpecMismatch("the oscillator lives in two variables")


def caustic_apply(u0: GridSignal, b: PhaseSymbol | None = None, k: int = 0) -> GridSignal:
    """``sum exp(2 pi i (x1 y + x2 xi2)) b(x, (y, xi2)) (F1 u0)(y, -xi2)`` at ``t = pi/2 + k pi``.

    ``(y, xi2)`` runs over the dual grid.  With ``b = 1`` this is the Fourier
    transform of ``u0`` in ``x2``.  Odd ``k`` adds the parity ``x2 -> -x2``
    (the half-period flow), up to a constant phase.
    """
    _check_2d(u0)
    spec = u0.spec
    if b is None:
        b = PhaseSymbol.const(spec, 1.0)
    if b.spec_x != spec:
        raise SpecMismatch("symbol and signal on different grids")
    vals = u0.values
    if k % 2:
        vals = _reflect_x2(u0).values
    dual = spec.dual()
    G = fourier_axes(vals, spec, [0, 1])  # (y, eta2)
    # band-limited evaluation in x2 at s = -xi2
    s = -dual.axis(1)
    E = np.exp(2j * np.pi * np.outer(s, dual.axis(1))) * dual.dx[1]
    G = G @ E.T
    G[:, np.abs(s) > spec.extent[1] / 2 * (1 + 1e-12)] = 0.0
    return GridSignal(spec, kn_sum(b, G))


def _reflect_x2(u: GridSignal) -> GridSignal:
    v = np.zeros_like(u.values)
    # centered grid: index j <-> j - n/2, so -x maps j -> n - j (j >= 1)
    v[:, 1:] = u.values[:, :0:-1]
    return GridSignal(u.spec, v)


# ---------------------------------------------------------------------------
# perturbed evolution


@dataclass
class PropagatorConfig:
    t: float
    steps: int = 256
    potential: GridSignal | None = None
    weight_s: float = 5.0

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 1:
            raise InvalidArg("steps must be a positive integer")
        if self.weight_s <= 4:
            raise InvalidArg("weight_s must exceed 2d = 4")
        if self.potential is not None and self.potential.spec.dim != 2:
            raise SpecMismatch("potential must live on a 2-d grid")

    @property
    def dt(self) -> float:
        return self.t / self.steps


@dataclass
class TraceRow:
    step: int
    time: float
    norm: float
    stft_sup: float


@dataclass
class Evolution:
    u: GridSignal
    trace: list[TraceRow] = field(default_factory=list)


def stft_sup(u: GridSignal, radius: float = 3.0, alpha: float = 1.0) -> float:
    """``max |V_g u|`` over a lattice in phase space (Gaussian window)."""
    pts = lattice(u.spec.dim, alpha, radius)
    return float(np.max(np.abs(stft(u, gaussian_window(u.spec), pts))))


def split_step_evolve(u0: GridSignal, cfg: PropagatorConfig, trace_every: int = 0) -> Evolution:
    """Strang splitting: ``exp(-i dt V/2) mu(A_dt) exp(-i dt V/2)`` per step.

    The metaplectic step uses the type-I route; ``t`` must stay away from a
    caustic of a single step, which holds for ``|dt| < pi/2``.
    """
    _check_2d(u0)
    dt = cfg.dt
    if abs(math.cos(dt)) < 1e-6:
        raise StepTooLarge("a single step reaches a caustic")
    half = None
    if cfg.potential is not None:
        if cfg.potential.spec != u0.spec:
            raise SpecMismatch("potential and signal on different grids")
        vmax = float(np.max(np.abs(cfg.potential.values)))
        if abs(dt) * vmax > MAX_PHASE_STEP:
            raise StepTooLarge(f"dt * |V|_inf = {abs(dt) * vmax:.3g} > {MAX_PHASE_STEP}")
        half = np.exp(-0.5j * dt * cfg.potential.values)
    S = propagator_matrix(dt)
    u = u0
    trace = []
    if trace_every:
        trace.append(TraceRow(0, 0.0, norm2(u), stft_sup(u)))
    for j in range(cfg.steps):
        if half is not None:
            u = GridSignal(u.spec, u.values * half)
        u = apply_nonsingular(S, u)
        if half is not None:
            u = GridSignal(u.spec, u.values * half)
        if trace_every and ((j + 1) % trace_every == 0 or j + 1 == cfg.steps):
            trace.append(TraceRow(j + 1, (j + 1) * dt, norm2(u), stft_sup(u)))
    return Evolution(u, trace)


def potential_class_check(V: GridSignal, s: float, width: float = 1.0, stride: int = 4) -> float:
    """Surrogate ``M^inf_{1 x v_s}`` norm of ``sigma(x, xi) = V(x)``.

    With a tensor window ``g1(x) g2(xi)`` the STFT splits into ``V_g1 V`` times
    ``V_g2 1``; the weight splits as ``<(zeta1, zeta2)> <= <zeta1><zeta2>``.
    """
    if s < 0:
        raise InvalidArg("s must be non-negative")
    a = modulation_norm_estimate(V.values, V.spec, s, width, stride)
    if a == 0.0:
        return 0.0
    # |V_g2 1 (z, zeta)| = |g2^(zeta)| = (2/w^2)^(d/4) w^d exp(-pi w^2 |zeta|^2)
    d = V.spec.dim
    r = np.linspace(0.0, 20.0, 20001)
    g = (2.0 / width ** 2) ** (d / 4) * width ** d * np.exp(-np.pi * (width * r) ** 2)
    b = float(np.max(np.sqrt(1 + r * r) ** s * g))
    return a * b
