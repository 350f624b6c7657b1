"""Applying metaplectic operators to grid signals.

Four routes compute the same operator (up to a unimodular constant):

* ``generators``: a factorization into dilations, chirps and inverse Fourier
  transforms, applied step by step;
* ``direct``: the integral over ``R(A^T)`` of chirp-modulated samples of the
  Fourier transform (``r = rank A > 0``), or the chirped, warped inverse
  Fourier transform when ``A = 0``;
* ``nonsingular``: the type-I representation with phase ``Phi_T``;
* ``rearranged``: the integral over ``R(A)`` after splitting
  ``x = x1 + x2`` in ``R(A^T) + N(A)``.

Convention: the operator attached to ``S`` moves a wave packet at ``z`` to
``S^T z``; composing is ``mu(S2) mu(S1) = mu(S1 S2)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (FactorizationFailure, InvalidArg, QuadratureOverflow, RangeEmpty,
                     SingularBlockA)
from .grid import (GridSignal, GridSpec, evaluate, evaluate_linear, fourier, nudft,
                   rotate_frame, separable_eval)
from .symplectic import (BlockSymplectic, J, chirp_matrix, constants, dilation_matrix,
                         from_matrix, singular_product)

ROUTES = ("generators", "direct", "nonsingular", "rearranged")
# largest (output points) x (quadrature nodes) product a quadrature may use
QUAD_BUDGET = 2e9
_NEGLIGIBLE = 1e-13


# ---------------------------------------------------------------------------
# generators


@dataclass(frozen=True, eq=False)
class GeneratorStep:
    kind: str  # "dilation" | "chirp" | "inverse_fourier"
    param: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "dilation":
            M = np.atleast_2d(np.asarray(self.param, dtype=float))
            if abs(np.linalg.det(M)) < 1e-12:
                raise InvalidArg("dilation matrix must be nonsingular")
            object.__setattr__(self, "param", M)
        elif self.kind == "chirp":
            C = np.atleast_2d(np.asarray(self.param, dtype=float))
            if np.max(np.abs(C - C.T), initial=0) > 1e-12:
                raise InvalidArg("chirp matrix must be symmetric")
            object.__setattr__(self, "param", (C + C.T) / 2)
        elif self.kind != "inverse_fourier":
            raise InvalidArg(f"unknown generator {self.kind!r}")

    def matrix(self, d: int) -> np.ndarray:
        if self.kind == "dilation":
            return dilation_matrix(self.param).matrix
        if self.kind == "chirp":
            return chirp_matrix(self.param).matrix
        return J(d)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.param is not None:
            out["param"] = self.param.tolist()
        return out


def _nonsingular_steps(A, B, C) -> list[GeneratorStep]:
    Ai = np.linalg.inv(A)
    CAi, AiB = C @ Ai, Ai @ B
    steps = [GeneratorStep("inverse_fourier"), GeneratorStep("chirp", (CAi + CAi.T) / 2),
             GeneratorStep("inverse_fourier"), GeneratorStep("dilation", -Ai.T),
             GeneratorStep("chirp", -(AiB + AiB.T) / 2)]
    return _prune(steps, len(A))


def _prune(steps: list[GeneratorStep], d: int) -> list[GeneratorStep]:
    out = []
    for s in steps:
        if s.kind == "chirp" and np.max(np.abs(s.param)) < 1e-15:
            continue
        if s.kind == "dilation" and np.array_equal(s.param, np.eye(len(s.param))):
            continue
        out.append(s)
    # F^-1 F^-1 is the parity dilation
    merged: list[GeneratorStep] = []
    for s in out:
        if merged and s.kind == merged[-1].kind == "inverse_fourier":
            merged[-1] = GeneratorStep("dilation", -np.eye(d))
            continue
        merged.append(s)
    return merged


def _product(steps: list[GeneratorStep], d: int) -> np.ndarray:
    M = np.eye(2 * d)
    for s in steps:
        M = M @ s.matrix(d)
    return M


def factor_generators(S: BlockSymplectic, seed: int = 0) -> list[GeneratorStep]:
    """Factor ``S = G1 G2 ... Gk`` into generator matrices (apply G1 first)."""
    d = S.dim
    A, B, C, D = S.A, S.B, S.C, S.D
    I = np.eye(d)
    Z = np.zeros((d, d))
    if np.allclose(S.matrix, J(d), atol=1e-12, rtol=0):
        steps = [GeneratorStep("inverse_fourier")]
    elif np.allclose(B, Z, atol=1e-14) and np.allclose(C, Z, atol=1e-14):
        steps = [GeneratorStep("dilation", D)]
    elif np.allclose(A, I, atol=1e-14) and np.allclose(C, Z, atol=1e-14):
        steps = [GeneratorStep("chirp", -(B + B.T) / 2)]
    elif abs(np.linalg.det(A)) > 1e-10 * max(1.0, np.linalg.norm(A) ** d):
        steps = _nonsingular_steps(A, B, C)
    else:
        steps = _singular_steps(S, seed)
    err = np.max(np.abs(_product(steps, d) - S.matrix))
    if err > 1e-9 * max(1.0, np.max(np.abs(S.matrix))):
        raise FactorizationFailure(f"generator product misses S by {err:.2e}")
    return steps


def _singular_steps(S: BlockSymplectic, seed: int) -> list[GeneratorStep]:
    # S = Ch(P) S' with S' = (I P; 0 I) S, whose upper-left block A + P C is invertible
    d = S.dim
    A, B, C, D = S.A, S.B, S.C, S.D
    rng = np.random.default_rng(seed)
    candidates = [t * np.eye(d) for t in (1.0, -1.0, 0.5, 2.0)]
    for _ in range(20):
        X = rng.standard_normal((d, d))
        candidates.append((X + X.T) / 2)
    best = None
    for P in candidates:
        A2 = A + P @ C
        s = np.linalg.svd(A2, compute_uv=False)
        cond = s[0] / s[-1] if s[-1] > 0 else np.inf
        if best is None or cond < best[0]:
            best = (cond, P)
        if cond < 10:
            break
    cond, P = best
    if not np.isfinite(cond) or cond > 1e8:
        raise FactorizationFailure("no chirp makes the upper-left block invertible")
    A2, B2 = A + P @ C, B + P @ D
    return [GeneratorStep("chirp", P)] + _nonsingular_steps(A2, B2, C)


def apply_step(step: GeneratorStep, f: GridSignal) -> GridSignal:
    if step.kind == "inverse_fourier":
        return fourier(f, +1)
    if step.kind == "chirp":
        pts = f.spec.points()
        q = np.einsum("ki,ij,kj->k", pts, step.param, pts).reshape(f.spec.shape)
        return GridSignal(f.spec, f.values * np.exp(-1j * np.pi * q))
    M = step.param
    g = evaluate_linear(f, M)
    return GridSignal(f.spec, g.values * np.sqrt(abs(np.linalg.det(M))))


def apply_generators(steps: list[GeneratorStep], f: GridSignal,
                     out_spec: GridSpec | None = None) -> GridSignal:
    out_spec = f.spec if out_spec is None else out_spec
    g = f
    for s in steps:
        g = apply_step(s, g)
    if g.spec != out_spec:
        g = GridSignal(out_spec, evaluate(g, out_spec.points()).reshape(out_spec.shape))
    return g


# ---------------------------------------------------------------------------
# plans


@dataclass(frozen=True, eq=False)
class MetaplecticPlan:
    matrix: BlockSymplectic
    route: str
    steps: list[GeneratorStep] = field(default_factory=list)
    form: str = "general"

    def __post_init__(self):
        if self.route not in ROUTES:
            raise InvalidArg(f"unknown route {self.route!r}")

    @property
    def rank(self) -> int:
        return self.matrix.rank_A

    def apply(self, f: GridSignal) -> GridSignal:
        S = self.matrix
        if self.route == "generators":
            return apply_generators(self.steps, f)
        if self.route == "direct":
            return apply_direct(S, f)
        if self.route == "nonsingular":
            return apply_nonsingular(S, f)
        return apply_rearranged(S, f, form=self.form)

    def to_dict(self) -> dict:
        return {"matrix": self.matrix.to_dict(), "route": self.route, "form": self.form,
                "steps": [s.to_dict() for s in self.steps]}


def make_plan(S: BlockSymplectic, route: str = "auto", form: str = "general") -> MetaplecticPlan:
    if route == "auto":
        route = "nonsingular" if S.rank_A == S.dim else "rearranged" if S.rank_A else "direct"
    if route == "nonsingular" and S.rank_A < S.dim:
        raise SingularBlockA("the nonsingular route needs det A != 0")
    if route == "rearranged" and S.rank_A == 0:
        raise RangeEmpty("R(A) = {0}; use the direct route")
    steps = factor_generators(S) if route == "generators" else []
    return MetaplecticPlan(S, route, steps, form)


def apply(S: BlockSymplectic, f: GridSignal, route: str = "auto") -> GridSignal:
    return make_plan(S, route).apply(f)


# ---------------------------------------------------------------------------
# quadrature over a subspace of frequency space


def _support(values: np.ndarray, tol: float = _NEGLIGIBLE) -> np.ndarray:
    a = np.abs(values)
    m = a.max()
    return a > tol * m if m > 0 else np.zeros(a.shape, bool)


def _node_axis(lo: float, hi: float, h: float) -> np.ndarray:
    """Uniform nodes with spacing <= h covering [lo, hi]."""
    n = int(np.ceil((hi - lo) / h)) + 1
    return lo + (np.arange(n) * (hi - lo) / max(n - 1, 1) if n > 1 else np.zeros(1))


def _frame_quadrature(f: GridSignal, U_r: np.ndarray, U_n: np.ndarray, P: np.ndarray,
                      lin: np.ndarray, shift: np.ndarray, budget: float = QUAD_BUDGET
                      ) -> np.ndarray:
    """``I(x) = int_{R^r} exp(-pi i v.Pv + 2 pi i v.lin(x)) fhat(U_r v + U_n shift(x)) dv``.

    ``lin`` is ``(npts, r)``, ``shift`` is ``(npts, d - r)``. The node spacing obeys
    ``h * F <= 1/4`` for the chirp frequency ``F = |P v + lin(x)|`` and keeps the
    total bandwidth (chirp plus spatial extent of f) below half the sampling rate.
    """
    spec = f.spec
    d, r = spec.dim, U_r.shape[1]
    fr = rotate_frame(f, np.hstack([U_r, U_n]))  # fr(s) = f(Q s), so F fr(w) = fhat(Q w)
    frh = fourier(fr)
    mask = _support(frh.values)
    if not mask.any():
        return np.zeros(lin.shape[0], dtype=complex)
    wmesh = frh.spec.mesh()
    smesh = spec.mesh()
    smask = _support(fr.values)
    lo = np.array([wmesh[k][mask].min() - 2 * frh.spec.dx[k] for k in range(r)])
    hi = np.array([wmesh[k][mask].max() + 2 * frh.spec.dx[k] for k in range(r)])
    vmax = np.maximum(np.abs(lo), np.abs(hi))
    nodes = []
    for k in range(r):
        F = np.abs(P[k]) @ vmax + np.max(np.abs(lin[:, k]))
        R = np.max(np.abs(smesh[k][smask]))
        hk = min(1.0 / max(4 * F, 1e-300), 1.0 / (2 * (F + R)))
        nodes.append(_node_axis(lo[k], hi[k], hk))
    n_nodes = int(np.prod([len(v) for v in nodes]))
    if n_nodes * lin.shape[0] > budget:
        raise QuadratureOverflow(f"quadrature needs {n_nodes} nodes x {lin.shape[0]} points")
    dv = float(np.prod([v[1] - v[0] if len(v) > 1 else 1.0 for v in nodes]))
    # H[j..., s_rest...]: transform fr over the first r axes onto the nodes
    axes = spec.axes()
    Hs = separable_eval(fr.values, axes[:r], nodes, -1, float(np.prod(spec.dx[:r])))
    vm = np.meshgrid(*nodes, indexing="ij")
    vpts = np.stack([m.ravel() for m in vm], axis=1)  # (nv, r)
    chirp = np.exp(-1j * np.pi * np.einsum("ji,ik,jk->j", vpts, P, vpts))
    if r == d:
        h_vals = Hs.reshape(vm[0].shape) * chirp.reshape(vm[0].shape)
        return nudft(h_vals, nodes, lin, +1, dv)
    nv = vpts.shape[0]
    Hflat = Hs.reshape(nv, -1)  # (nv, n^(d-r))
    rest = np.stack([m.ravel() for m in np.meshgrid(*axes[r:], indexing="ij")], axis=1)
    cell_rest = float(np.prod(spec.dx[r:]))
    out = np.empty(lin.shape[0], dtype=complex)
    step = max(1, int(4e7 // max(nv, rest.shape[0])))
    for s0 in range(0, lin.shape[0], step):
        sl = slice(s0, s0 + step)
        E = np.exp(-2j * np.pi * shift[sl] @ rest.T)  # (m, n^(d-r))
        G = (E @ Hflat.T) * cell_rest  # (m, nv)
        ph = np.exp(2j * np.pi * lin[sl] @ vpts.T)
        out[sl] = np.sum(G * ph * chirp[None, :], axis=1) * dv
    # the sum over the rest axes is periodic in shift; beyond the dual box it aliases
    half = np.array(spec.dual().extent[r:]) / 2
    out[np.any(np.abs(shift) > half * (1 + 1e-12), axis=1)] = 0.0
    return out


# ---------------------------------------------------------------------------
# direct route


def apply_direct(S: BlockSymplectic, f: GridSignal, budget: float = QUAD_BUDGET) -> GridSignal:
    if S.dim != f.spec.dim:
        raise InvalidArg("dimension mismatch")
    if S.rank_A == 0:
        return _apply_range0(S, f)
    fr = S.frames
    A, B, C, D = S.A, S.B, S.C, S.D
    x = f.spec.points()
    K = fr.V_r / fr.sigma  # t = K (v + U_r^T B x)
    P = K.T @ A.T @ C @ K
    P = (P + P.T) / 2
    b = x @ (fr.U_r.T @ B).T  # (npts, r)
    Dx_r = x @ (fr.U_r.T @ D).T
    lin = Dx_r - b @ P.T
    shift = -x @ (fr.U_n.T @ B).T
    psi0 = (-np.pi * np.einsum("ki,ij,kj->k", b, P, b) + 2 * np.pi * np.sum(Dx_r * b, axis=1)
            - np.pi * np.einsum("ki,ij,kj->k", x, B.T @ D, x))
    c, _ = constants(S)
    I = _frame_quadrature(f, fr.U_r, fr.U_n, P, lin, shift, budget)
    vals = c / singular_product(A) * np.exp(1j * psi0) * I
    return GridSignal(f.spec, vals.reshape(f.spec.shape))


def _apply_range0(S: BlockSymplectic, f: GridSignal) -> GridSignal:
    B, D = S.B, S.D
    spec = f.spec
    x = spec.points()
    Bx = x @ B.T
    if np.allclose(B, np.diag(np.diag(B)), atol=0, rtol=0):
        coords = [B[i, i] * spec.axis(i) for i in range(spec.dim)]
        vals = separable_eval(f.values, spec.axes(), coords, +1, spec.cell).ravel()
    else:
        vals = nudft(f.values, spec.axes(), Bx, +1, spec.cell)
    half = np.array(spec.dual().extent) / 2
    vals[np.any(np.abs(Bx) > half * (1 + 1e-12), axis=1)] = 0.0
    chirp = np.exp(-1j * np.pi * np.einsum("ki,ij,kj->k", x, B.T @ D, x))
    vals = np.sqrt(abs(np.linalg.det(B))) * chirp * vals
    return GridSignal(spec, vals.reshape(spec.shape))


# ---------------------------------------------------------------------------
# nonsingular route


def phase_T(S: BlockSymplectic, x, xi) -> np.ndarray:
    """``Phi_T(x, xi) = 1/2 A^-1 B x.x + A^-T x.xi - 1/2 C A^-1 xi.xi`` (row-wise)."""
    A = S.A
    if abs(np.linalg.det(A)) <= 1e-10:
        raise SingularBlockA("Phi_T needs det A != 0")
    Ai = np.linalg.inv(A)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    AiB, CAi = Ai @ S.B, S.C @ Ai
    return (0.5 * np.einsum("ki,ij,kj->k", x, AiB, x) + np.einsum("ki,ij,kj->k", x, Ai, xi)
            - 0.5 * np.einsum("ki,ij,kj->k", xi, CAi, xi))


def generating_check(S: BlockSymplectic, n_samples: int = 20, seed: int = 0,
                     step: float = 1e-5, scale: float = 2.0) -> float:
    """Max residual of ``(x, grad_x Phi_T) = S^T (grad_xi Phi_T, xi)`` by central differences."""
    d = S.dim
    rng = np.random.default_rng(seed)
    worst = 0.0
    E = np.eye(d) * step
    for _ in range(n_samples):
        x, xi = rng.uniform(-scale, scale, (2, d))
        gx = np.array([(phase_T(S, x + e, xi) - phase_T(S, x - e, xi))[0] / (2 * step) for e in E])
        gxi = np.array([(phase_T(S, x, xi + e) - phase_T(S, x, xi - e))[0] / (2 * step) for e in E])
        lhs = np.concatenate([x, gx])
        rhs = S.matrix.T @ np.concatenate([gxi, xi])
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def apply_nonsingular(S: BlockSymplectic, f: GridSignal) -> GridSignal:
    A = S.A
    detA = np.linalg.det(A)
    if abs(detA) <= 1e-10:
        raise SingularBlockA(f"|det A| = {abs(detA):.2e}")
    Ai = np.linalg.inv(A)
    CAi = S.C @ Ai
    CAi = (CAi + CAi.T) / 2
    AiB = Ai @ S.B
    AiB = (AiB + AiB.T) / 2
    spec = f.spec
    fh = fourier(f)
    xi = fh.spec.points()
    h = fh.values.ravel() * np.exp(-1j * np.pi * np.einsum("ki,ij,kj->k", xi, CAi, xi))
    h = h.reshape(fh.spec.shape)
    x = spec.points()
    y = x @ Ai  # rows are A^-T x
    if np.allclose(Ai, np.diag(np.diag(Ai)), atol=0, rtol=0):
        coords = [Ai[i, i] * spec.axis(i) for i in range(spec.dim)]
        inner = separable_eval(h, fh.spec.axes(), coords, +1, fh.spec.cell).ravel()
    else:
        inner = nudft(h, fh.spec.axes(), y, +1, fh.spec.cell)
    half = np.array(spec.extent) / 2
    inner[np.any(np.abs(y) > half * (1 + 1e-12), axis=1)] = 0.0
    outer = np.exp(1j * np.pi * np.einsum("ki,ij,kj->k", x, AiB, x))
    vals = abs(detA) ** -0.5 * outer * inner
    return GridSignal(spec, vals.reshape(spec.shape))


# ---------------------------------------------------------------------------
# rearranged route


def rearranged_phase(S: BlockSymplectic, x: np.ndarray, form: str = "general") -> np.ndarray:
    """Outer phase (radians) multiplying the ``R(A)`` integral."""
    fr = S.frames
    B, C, D = S.B, S.C, S.D
    Ainv = fr.V_r @ np.diag(1 / fr.sigma) @ fr.U_r.T
    x1 = x @ (fr.V_r @ fr.V_r.T)
    x2 = x - x1
    if form == "reduced":
        return np.pi * (np.einsum("ki,ij,kj->k", x1, Ainv @ B, x1)
                        - np.einsum("ki,ij,kj->k", x2, D.T @ B, x2))
    b = x1 @ B.T
    CAi = C @ Ainv
    return (-np.pi * np.einsum("ki,ij,kj->k", b, CAi, b) + 2 * np.pi * np.sum((x @ D.T) * b, axis=1)
            - np.pi * np.einsum("ki,ij,kj->k", x, B.T @ D, x))


def apply_rearranged(S: BlockSymplectic, f: GridSignal, form: str = "general",
                     budget: float = QUAD_BUDGET) -> GridSignal:
    """Integral over ``y`` in ``R(A)`` with ``x = x1 + x2`` split along ``R(A^T) + N(A)``.

    ``form="reduced"`` drops the ``P_R(A) D x2 . y`` coupling; it coincides with
    the general form whenever ``D`` maps ``N(A)`` into ``N(A^T)``.
    """
    if form not in ("general", "reduced"):
        raise InvalidArg(f"unknown form {form!r}")
    fr = S.frames
    if fr.rank == 0:
        raise RangeEmpty("R(A) = {0}; use the direct route")
    B, C, D = S.B, S.C, S.D
    x = f.spec.points()
    x1 = x @ (fr.V_r @ fr.V_r.T)
    x2 = x - x1
    # y = U_r (v + beta) with beta = U_r^T B x2, so y - B x2 = U_r v - U_n U_n^T B x2
    P = fr.U_r.T @ C @ fr.V_r / fr.sigma
    P = (P + P.T) / 2
    ell = x1 @ fr.V_r / fr.sigma  # U_r^T (A^inv)^T x1
    if form == "general":
        ell = ell + x2 @ (fr.U_r.T @ D).T
    beta = x2 @ (fr.U_r.T @ B).T
    lin = ell - beta @ P.T
    extra = -np.pi * np.einsum("ki,ij,kj->k", beta, P, beta) + 2 * np.pi * np.sum(beta * ell, axis=1)
    shift = -x2 @ (fr.U_n.T @ B).T
    _, c1 = constants(S)
    I = _frame_quadrature(f, fr.U_r, fr.U_n, P, lin, shift, budget)
    vals = c1 * np.exp(1j * (rearranged_phase(S, x, form) + extra)) * I
    return GridSignal(f.spec, vals.reshape(f.spec.shape))


def compose(S2: BlockSymplectic, S1: BlockSymplectic) -> BlockSymplectic:
    """Matrix of ``mu(S2) mu(S1)`` under the convention of this module."""
    return from_matrix(S1.matrix @ S2.matrix, check=False)
