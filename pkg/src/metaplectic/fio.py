"""Generalized metaplectic operators ``sigma^w mu(S)`` and their integral forms.

A ``FioOperator`` stores a symplectic matrix, a sampled symbol and the form in
which the symbol is meant to be read:

* ``composition``: ``sigma`` is the Weyl symbol and the operator is
  ``sigma^w mu(S)``;
* ``khee``: ``sigma`` is the amplitude of the integral over ``R(A) x N(A^T)``
  produced by ``symbol_chain``;
* ``type1``: amplitude of the type-I integral with phase ``Phi_T`` (``A``
  invertible);
* ``zero_block``: amplitude of the ``A = 0`` integral against ``f(t)``.

All forms of the same ``(sigma1, S)`` pair compute the same operator.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (InvalidArg, NonZeroA, RangeEmpty, ResolutionViolation, SingularB,
                     SpecMismatch)
from .grid import GridSignal, GridSpec, evaluate, fourier, fourier_axes, nudft, rotate_frame
from .ops import apply as mu_apply
from .ops import phase_T
from .quantize import PhaseSymbol, kn_sum, resample_xi, symbol_compose_linear, weyl_apply, weyl_to_kn
from .symplectic import BlockSymplectic, constants
from .tf import DecayFit, decay_fit, gabor_matrix, gaussian_window

FORMS = ("composition", "khee", "type1", "zero_block")


def _sym(M: np.ndarray) -> np.ndarray:
    return (M + M.T) / 2


@dataclass(frozen=True, eq=False)
class FioOperator:
    matrix: BlockSymplectic
    symbol: PhaseSymbol
    form: str = "composition"
    weight_s: float = 0.0

    def __post_init__(self):
        if self.form not in FORMS:
            raise InvalidArg(f"unknown form {self.form!r}")
        if self.symbol.dim != self.matrix.dim:
            raise SpecMismatch("symbol and matrix dimensions differ")

    def apply(self, f: GridSignal) -> GridSignal:
        if self.form == "composition":
            return weyl_apply(self.symbol, mu_apply(self.matrix, f))
        if self.form == "khee":
            return fio_khee_apply(self, f)
        if self.form == "type1":
            return fio_type1_apply(self, f)
        return fio_zero_block_apply(self, f)

    __call__ = apply


def fio_compose(sigma1: PhaseSymbol, S: BlockSymplectic, weight_s: float = 0.0) -> FioOperator:
    """``sigma1^w mu(S)``."""
    return FioOperator(S, sigma1, "composition", weight_s)


def compose_right_symbol(sigma1: PhaseSymbol, S: BlockSymplectic) -> tuple[PhaseSymbol, float]:
    """Symbol ``sigma1 o S^T`` with ``mu(S) (sigma1 o S^T)^w = sigma1^w mu(S)``."""
    return symbol_compose_linear(sigma1, S.matrix.T)


# ---------------------------------------------------------------------------
# symbol chain


@dataclass(frozen=True, eq=False)
class ChainData:
    """Frame quantities of the ``R(A)`` integral.

    ``Q`` is the outer quadratic phase matrix, ``P`` the chirp on ``R(A)``
    coordinates, ``L`` (r x d) the linear coupling, ``beta`` the block
    ``U_n^T B V_n`` and ``c1`` the normalization constant.
    """

    Q: np.ndarray
    P: np.ndarray
    L: np.ndarray
    beta: np.ndarray
    c1: float


def chain_data(S: BlockSymplectic) -> ChainData:
    fr = S.frames
    if fr.rank == 0:
        raise RangeEmpty("R(A) = {0}; use the zero-block form")
    B, C, D = S.B, S.C, S.D
    P1 = fr.V_r @ fr.V_r.T
    P2 = fr.V_n @ fr.V_n.T
    Ainv = fr.V_r @ np.diag(1 / fr.sigma) @ fr.U_r.T
    ell = np.diag(1 / fr.sigma) @ fr.V_r.T + fr.U_r.T @ D @ P2
    bet = fr.U_r.T @ B @ P2
    P = _sym(fr.U_r.T @ C @ fr.V_r @ np.diag(1 / fr.sigma))
    Q = _sym(P1 @ Ainv @ B @ P1 - P2 @ D.T @ B @ P2) - bet.T @ P @ bet + 2 * _sym(bet.T @ ell)
    beta = fr.U_n.T @ B @ fr.V_n
    _, c1 = constants(S)
    return ChainData(_sym(Q), P, ell - P @ bet, beta, c1)


@dataclass(frozen=True, eq=False)
class SymbolChain:
    """Intermediate symbols.  For ``rank A > 0``: ``sigma2`` (sheared),
    ``sigma3 = U sigma2`` and the final amplitude ``sigma``.  For ``A = 0``:
    ``sigma4``, ``sigma5 = U sigma4`` and the final amplitude ``sigma``."""

    matrix: BlockSymplectic
    stages: dict
    sigma: PhaseSymbol
    form: str


def _shear_xi(sigma: PhaseSymbol, Q: np.ndarray) -> PhaseSymbol:
    """``(x, xi) -> sigma(x, xi + Q x)``."""
    d = sigma.dim
    M = np.eye(2 * d)
    M[d:, :d] = Q
    return symbol_compose_linear(sigma, M)[0]


def symbol_chain(sigma1: PhaseSymbol, S: BlockSymplectic) -> SymbolChain:
    if sigma1.dim != S.dim:
        raise SpecMismatch("symbol and matrix dimensions differ")
    if S.frames.rank == 0:
        B = S.B
        detB = abs(np.linalg.det(B))
        if detB < 1e-12:
            raise SingularB("A = 0 but B is singular")
        s4 = _shear_xi(sigma1, -B.T @ S.D)
        s5 = weyl_to_kn(s4)
        out = _kn_warped(s4, s5, B.T) * np.sqrt(detB)
        return SymbolChain(S, {"sigma4": s4, "sigma5": s5}, out, "zero_block")
    cd = chain_data(S)
    s2 = _shear_xi(sigma1, cd.Q) * cd.c1
    s3 = weyl_to_kn(s2)
    q = abs(np.linalg.det(cd.beta)) if cd.beta.size else 1.0
    return SymbolChain(S, {"sigma2": s2, "sigma3": s3, "chain": cd}, s3 * (1 / q), "khee")


def fio_khee(sigma1: PhaseSymbol, S: BlockSymplectic, weight_s: float = 0.0) -> FioOperator:
    ch = symbol_chain(sigma1, S)
    return FioOperator(S, ch.sigma, ch.form, weight_s)


def fio_type1(sigma1: PhaseSymbol, S: BlockSymplectic, weight_s: float = 0.0) -> FioOperator:
    """Type-I amplitude ``sigma(x, A^-1 xi)`` from the chain symbol (``A`` invertible)."""
    if S.frames.rank < S.dim:
        raise InvalidArg("type-I form needs an invertible A block")
    ch = symbol_chain(sigma1, S)
    warped = _kn_warped(ch.stages["sigma2"], ch.stages["sigma3"], np.linalg.inv(S.A))
    return FioOperator(S, warped, "type1", weight_s)


def _kn_warped(weyl: PhaseSymbol, kn: PhaseSymbol, M: np.ndarray) -> PhaseSymbol:
    """``(U weyl)(x, M xi)``; exact through ``U_{M^-T}`` when ``weyl`` is analytic,
    otherwise by resampling ``kn``."""
    if weyl.fn is not None:
        return weyl_to_kn(resample_xi(weyl, M), K=np.linalg.inv(M).T)
    return resample_xi(kn, M)


# ---------------------------------------------------------------------------
# integral forms


def _range_transform(f: GridSignal, U_r: np.ndarray, U_n: np.ndarray,
                     a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``int_{R(A)} exp(-2 pi i y.(U_r a)) f(y + U_n b) dy`` at rows of ``(a, b)``; zero
    outside the sampled box."""
    spec = f.spec
    d = spec.dim
    r = U_r.shape[1]
    Qm = np.hstack([U_r, U_n])
    g = rotate_frame(f, Qm)
    rest = tuple(range(r, d))
    G = fourier_axes(g.values, spec, rest, -1) if rest else g.values
    dual = spec.dual()
    axes = [spec.axis(i) for i in range(r)] + [dual.axis(i) for i in range(r, d)]
    weight = float(np.prod(spec.dx[:r])) * float(np.prod(dual.dx[r:]))
    pts = np.hstack([a, -b])
    vals = nudft(G, axes, pts, -1, weight)
    half_f = np.asarray(dual.extent[:r]) / 2
    half_x = np.asarray(spec.extent[r:]) / 2
    out = np.any(np.abs(a) > half_f * (1 + 1e-12), axis=1)
    if d > r:
        out |= np.any(np.abs(b) > half_x * (1 + 1e-12), axis=1)
    vals[out] = 0.0
    return vals


def fio_khee_apply(T: FioOperator, f: GridSignal) -> GridSignal:
    """``Tf(x) = exp(i pi Q x.x) sum_eta exp(2 pi i x.eta) sigma(x, eta) Phi(eta) deta``.

    ``eta = L^T v + V_n e`` parametrizes ``(y, xi2) = (U_r v, V_n e)``;
    ``Phi`` carries the chirp in ``v`` and the partial transform of ``f``
    over ``R(A)`` evaluated at ``(U_r v, U_n beta^-T e)``.
    """
    S = T.matrix
    if T.symbol.spec_x != f.spec:
        raise SpecMismatch("symbol and signal on different grids")
    fr = S.frames
    cd = chain_data(S)
    spec = f.spec
    eta = spec.dual().points()
    M = np.hstack([cd.L.T, fr.V_n])
    coef = np.linalg.solve(M, eta.T).T
    v, e = coef[:, :fr.rank], coef[:, fr.rank:]
    b = np.linalg.solve(cd.beta.T, e.T).T if e.shape[1] else e
    F = _range_transform(f, fr.U_r, fr.U_n, v, b)
    _chirp_guard(cd.P, v, fr, F, spec)
    phi = F * np.exp(-1j * np.pi * np.einsum("ki,ij,kj->k", v, cd.P, v)) / abs(np.linalg.det(M))
    x = spec.points()
    out = kn_sum(T.symbol, phi).ravel() * np.exp(1j * np.pi * np.einsum("ki,ij,kj->k", x, cd.Q, x))
    return GridSignal(spec, out.reshape(spec.shape))


def _chirp_guard(P, v, fr, F, spec: GridSpec):
    """The chirp in ``v`` must oscillate slower than the ``eta`` grid resolves."""
    live = np.abs(F) > 1e-13 * max(np.max(np.abs(F)), 1e-300)
    if not np.any(live) or not np.any(P):
        return
    # d/deta of -(1/2) v.Pv with v = Sigma V_r^T eta
    grad = (v[live] @ P) @ (np.diag(fr.sigma) @ fr.V_r.T)
    need = float(np.max(np.abs(grad)))
    have = min(spec.extent) / 2
    if need > have:
        raise ResolutionViolation(f"chirp frequency {need:.3g} exceeds grid half-extent {have:.3g}")


def fio_type1_apply(T: FioOperator, f: GridSignal) -> GridSignal:
    """``Tf(x) = sum_xi exp(2 pi i Phi_T(x, xi)) sigma(x, xi) fhat(xi) dxi``."""
    S = T.matrix
    if T.symbol.spec_x != f.spec:
        raise SpecMismatch("symbol and signal on different grids")
    spec = f.spec
    fh = fourier(f).values.ravel()
    x = spec.points()
    xi = spec.dual().points()
    sig = T.symbol.dense().reshape(x.shape[0], -1)
    Ai = np.linalg.inv(S.A)
    px = phase_T(S, x, np.zeros_like(x))
    fh = fh * np.exp(2j * np.pi * phase_T(S, np.zeros_like(xi), xi))
    out = np.empty(x.shape[0], dtype=complex)
    step = max(1, 2_000_000 // xi.shape[0])
    for s0 in range(0, x.shape[0], step):
        sl = slice(s0, s0 + step)
        E = np.exp(2j * np.pi * (px[sl, None] + x[sl] @ Ai @ xi.T))
        out[sl] = (E * sig[sl]) @ fh
    # the xi-sum is periodic in A^-T x; outside one period it is aliasing
    y = x @ Ai
    out[np.any(np.abs(y) > np.asarray(spec.extent) / 2 * (1 + 1e-12), axis=1)] = 0.0
    return GridSignal(spec, (out * spec.dual().cell).reshape(spec.shape))


def fio_zero_block_apply(T: FioOperator, f: GridSignal) -> GridSignal:
    """``Tf(x) = exp(-pi i B^T D x.x) sum_t exp(2 pi i Bx.t) sigma(x, t) f(t) dt``.

    The symbol's second variable ``t`` lives on the dual grid; ``f`` is
    interpolated there unless the grid is self-dual.
    """
    S = T.matrix
    if np.max(np.abs(S.A)) > 1e-12:
        raise NonZeroA("zero-block form needs A = 0")
    if abs(np.linalg.det(S.B)) < 1e-12:
        raise SingularB("B is singular")
    spec = f.spec
    dual = spec.dual()
    t = dual.points()
    ft = f.values.ravel() if dual == spec else evaluate(f, t)
    x = spec.points()
    Bx = x @ S.B.T
    sig = T.symbol.dense().reshape(x.shape[0], -1)
    out = np.empty(x.shape[0], dtype=complex)
    step = max(1, 2_000_000 // t.shape[0])
    for s0 in range(0, x.shape[0], step):
        sl = slice(s0, s0 + step)
        out[sl] = (np.exp(2j * np.pi * Bx[sl] @ t.T) * sig[sl]) @ ft
    out *= dual.cell * np.exp(-1j * np.pi * np.einsum("ki,ij,kj->k", x, S.B.T @ S.D, x))
    # the t-sum is periodic in Bx; outside one period it is aliasing
    out[np.any(np.abs(Bx) > np.asarray(spec.dual().extent) / 2 * (1 + 1e-12), axis=1)] = 0.0
    return GridSignal(spec, out.reshape(spec.shape))


# ---------------------------------------------------------------------------
# Gabor decay


def gabor_class_check(T: FioOperator, alpha: float = 1.0, radius: float = 4.0,
                      matrix: np.ndarray | None = None) -> DecayFit:
    """Fit ``|<T pi(z) g, pi(w) g>| ~ C <w - S^T z>^-s`` with a Gaussian window.

    ``matrix`` overrides ``S^T`` (e.g. a deliberately wrong one as a control).
    """
    g = gaussian_window(T.symbol.spec_x)
    G = gabor_matrix(T.apply, g, alpha, radius)
    M = T.matrix.matrix.T if matrix is None else np.asarray(matrix, dtype=float)
    return decay_fit(G, M)
