"""Linear algebra of 2d x 2d symplectic matrices in d x d block form.

Blocks follow the layout ``[[A, B], [C, D]]``. Ranges and kernels are
computed from singular-value factorizations with a relative rank threshold.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import subspace_angles

from .errors import DegenerateVolume, InvalidArg, IsomorphismFailure, NotSymplectic

TOL_SYMPL = 1e-10


def J(d: int) -> np.ndarray:
    """The standard symplectic form ``[[0, I], [-I, 0]]``."""
    z, i = np.zeros((d, d)), np.eye(d)
    return np.block([[z, i], [-i, z]])


def default_rank_tol(M: np.ndarray) -> float:
    s = np.linalg.svd(np.atleast_2d(M), compute_uv=False)
    smax = s[0] if s.size else 0.0
    return M.shape[0] * smax * 1e-14


# ---------------------------------------------------------------------------
# subspaces


@dataclass(frozen=True, eq=False)
class Subspace:
    """Linear subspace of R^d stored through an orthonormal basis (d x r)."""

    ambient_dim: int
    basis: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float).reshape(self.ambient_dim, -1)
        object.__setattr__(self, "basis", b)
        if b.shape[1] and np.max(np.abs(b.T @ b - np.eye(b.shape[1]))) > 1e-12:
            raise InvalidArg("subspace basis is not orthonormal")

    @classmethod
    def span(cls, vectors, d: int | None = None, rank_tol: float | None = None) -> "Subspace":
        V = np.asarray(vectors, dtype=float)
        if V.ndim == 1:
            V = V[:, None]
        d = V.shape[0] if d is None else d
        if V.size == 0:
            return cls.zero(d)
        U, s, _ = np.linalg.svd(V, full_matrices=False)
        tol = default_rank_tol(V) if rank_tol is None else rank_tol
        tol = max(tol, 1e-300)
        return cls(d, U[:, s > tol])

    @classmethod
    def zero(cls, d: int) -> "Subspace":
        return cls(d, np.zeros((d, 0)))

    @classmethod
    def full(cls, d: int) -> "Subspace":
        return cls(d, np.eye(d))

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T

    def complement(self) -> "Subspace":
        if self.dim == 0:
            return Subspace.full(self.ambient_dim)
        U, _, _ = np.linalg.svd(self.basis, full_matrices=True)
        return Subspace(self.ambient_dim, U[:, self.dim:])

    def is_axis_aligned(self, tol: float = 1e-12) -> bool:
        P = self.projector
        return np.allclose(P, np.diag(np.round(np.diag(P))), atol=tol)

    def axes(self) -> list[int]:
        return [i for i in range(self.ambient_dim) if self.projector[i, i] > 0.5]

    def distance(self, other: "Subspace") -> float:
        """Largest principal angle in radians (pi/2 if dimensions differ)."""
        if self.dim != other.dim:
            return np.pi / 2
        if self.dim == 0:
            return 0.0
        return float(np.max(subspace_angles(self.basis, other.basis)))

    def equals(self, other: "Subspace", tol: float = 1e-9) -> bool:
        return self.distance(other) <= tol

    def contains(self, other: "Subspace", tol: float = 1e-9) -> bool:
        if other.dim == 0:
            return True
        resid = other.basis - self.projector @ other.basis
        return float(np.max(np.linalg.norm(resid, axis=0))) <= tol

    def to_dict(self) -> dict:
        return {"ambient": self.ambient_dim, "basis": self.basis.tolist()}

    @classmethod
    def from_dict(cls, obj: dict) -> "Subspace":
        d = int(obj["ambient"])
        return cls(d, np.asarray(obj["basis"], dtype=float).reshape(d, -1))


def image(M: np.ndarray, L: Subspace, rank_tol: float | None = None) -> Subspace:
    return Subspace.span(M @ L.basis, L.ambient_dim, rank_tol)


def preimage(M: np.ndarray, L: Subspace, rank_tol: float | None = None) -> Subspace:
    """``{x : M x in L}``."""
    Q = L.complement().projector
    return range_kernel(Q @ M, rank_tol)[1]


def range_kernel(M, rank_tol: float | None = None) -> tuple[Subspace, Subspace]:
    """Return ``(R(M), N(M))`` from the SVD of ``M``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    d = M.shape[0]
    U, s, Vt = np.linalg.svd(M)
    tol = default_rank_tol(M) if rank_tol is None else rank_tol
    r = int(np.sum(s > tol)) if s.size and s[0] > 0 else 0
    return Subspace(d, U[:, :r]), Subspace(d, Vt[r:].T)


@dataclass(frozen=True, eq=False)
class SubspaceMap:
    """Linear isomorphism ``source -> target`` stored as a d x d matrix."""

    source: Subspace
    target: Subspace
    matrix: np.ndarray

    def __call__(self, v):
        return self.matrix @ np.asarray(v, dtype=float)

    @property
    def is_empty(self) -> bool:
        return self.source.dim == 0


def pseudo_inverse_on_range(M, rank_tol: float | None = None) -> SubspaceMap:
    """Inverse of ``M : R(M^T) -> R(M)``, i.e. a map ``R(M) -> R(M^T)``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    d = M.shape[0]
    U, s, Vt = np.linalg.svd(M)
    tol = default_rank_tol(M) if rank_tol is None else rank_tol
    r = int(np.sum(s > tol)) if s.size and s[0] > 0 else 0
    inv = Vt[:r].T @ np.diag(1.0 / s[:r]) @ U[:, :r].T if r else np.zeros((d, d))
    return SubspaceMap(Subspace(d, U[:, :r]), Subspace(d, Vt[:r].T), inv)


def volume_q(L: Subspace, M) -> float:
    """r-dimensional volume of the image of a unit cube of ``L`` under ``M``.

    Conventions: 1 when ``L = {0}`` (for any ``M``), and 1 when ``M = 0`` and
    ``dim L > 0``; 0 when ``M`` collapses ``L``.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if L.dim == 0:
        return 1.0
    if not np.any(M):
        return 1.0
    s = np.linalg.svd(M @ L.basis, compute_uv=False)
    if s.size < L.dim or s[-1] <= L.ambient_dim * s[0] * 1e-14:
        return 0.0
    return float(np.prod(s))


def singular_product(M, rank_tol: float | None = None) -> float:
    """Product of the nonzero singular values (1 for the zero matrix)."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    s = np.linalg.svd(M, compute_uv=False)
    tol = default_rank_tol(M) if rank_tol is None else rank_tol
    return float(np.prod(s[s > tol])) if s.size and s[0] > 0 else 1.0


# ---------------------------------------------------------------------------
# block symplectic matrices


@dataclass(frozen=True)
class AFrames:
    """Orthonormal frames adapted to the block ``A = U diag(sigma) V^T``.

    ``U_r, U_n`` span R(A), N(A^T); ``V_r, V_n`` span R(A^T), N(A).
    """

    rank: int
    sigma: np.ndarray
    U_r: np.ndarray
    U_n: np.ndarray
    V_r: np.ndarray
    V_n: np.ndarray

    @property
    def U(self) -> np.ndarray:
        return np.hstack([self.U_r, self.U_n])

    @property
    def V(self) -> np.ndarray:
        return np.hstack([self.V_r, self.V_n])


@dataclass(frozen=True, eq=False)
class BlockSymplectic:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    tol: float = field(default=TOL_SYMPL, repr=False)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @cached_property
    def matrix(self) -> np.ndarray:
        return np.block([[self.A, self.B], [self.C, self.D]])

    @property
    def T(self) -> "BlockSymplectic":
        return BlockSymplectic(self.A.T, self.C.T, self.B.T, self.D.T, self.tol)

    def inverse(self) -> "BlockSymplectic":
        return BlockSymplectic(self.D.T, -self.B.T, -self.C.T, self.A.T, self.tol)

    def __matmul__(self, other: "BlockSymplectic") -> "BlockSymplectic":
        return from_matrix(self.matrix @ other.matrix, tol=max(self.tol, other.tol), check=False)

    def residuals(self) -> dict[str, float]:
        A, B, C, D = self.A, self.B, self.C, self.D
        I = np.eye(self.dim)
        M = self.matrix
        mx = lambda X: float(np.max(np.abs(X)))  # noqa: E731
        return {
            "sympM": mx(M @ J(self.dim) @ M.T - J(self.dim)),
            "e1": mx(D.T @ A - B.T @ C - I),
            "e2": mx(A.T @ C - C.T @ A),
            "e3": mx(D.T @ B - B.T @ D),
            # CA^{-1} symmetric, in the inverse-free form (e2 applied to the inverse)
            "e4": mx(C @ D.T - D @ C.T),
            "e5": mx(B @ A.T - A @ B.T),
        }

    def max_residual(self) -> float:
        return max(self.residuals().values())

    def allclose(self, other: "BlockSymplectic", atol: float = 1e-9) -> bool:
        return bool(np.allclose(self.matrix, other.matrix, atol=atol, rtol=0))

    @cached_property
    def frames(self) -> AFrames:
        d = self.dim
        U, s, Vt = np.linalg.svd(self.A)
        tol = default_rank_tol(self.A)
        r = int(np.sum(s > tol)) if s[0] > 0 else 0
        return AFrames(r, s[:r], U[:, :r], U[:, r:], Vt[:r].T, Vt[r:].T)

    @property
    def rank_A(self) -> int:
        return self.frames.rank

    def to_dict(self) -> dict:
        return {"dim": self.dim, "A": self.A.tolist(), "B": self.B.tolist(),
                "C": self.C.tolist(), "D": self.D.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict, tol: float = TOL_SYMPL) -> "BlockSymplectic":
        d = int(obj["dim"])
        blocks = [np.asarray(obj[k], dtype=float).reshape(d, d) for k in "ABCD"]
        return make_symplectic(*blocks, tol=tol)


def make_symplectic(A, B, C, D, tol: float = TOL_SYMPL) -> BlockSymplectic:
    blocks = [np.atleast_2d(np.asarray(X, dtype=float)) for X in (A, B, C, D)]
    d = blocks[0].shape[0]
    if any(X.shape != (d, d) for X in blocks):
        raise InvalidArg("blocks must be square with a common size")
    S = BlockSymplectic(*blocks, tol=tol)
    res = S.max_residual()
    if res > tol:
        raise NotSymplectic(res, tol)
    return S


def from_matrix(M, tol: float = TOL_SYMPL, check: bool = True) -> BlockSymplectic:
    M = np.asarray(M, dtype=float)
    d = M.shape[0] // 2
    blocks = (M[:d, :d], M[:d, d:], M[d:, :d], M[d:, d:])
    if check:
        return make_symplectic(*blocks, tol=tol)
    return BlockSymplectic(*[b.copy() for b in blocks], tol=tol)


def identity(d: int) -> BlockSymplectic:
    return from_matrix(np.eye(2 * d))


def j_matrix(d: int) -> BlockSymplectic:
    return from_matrix(J(d))


# Generator matrices. The operators realised by the integral formulas send
# the time-frequency shift pi(z)g to a packet concentrated at S^T z, so the
# three elementary operators correspond to the following block matrices.

def dilation_matrix(M) -> BlockSymplectic:
    """Matrix of ``f -> sqrt|det M| f(M x)``: ``diag(M^{-T}, M)``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    d = M.shape[0]
    z = np.zeros((d, d))
    return from_matrix(np.block([[np.linalg.inv(M).T, z], [z, M]]))


def chirp_matrix(C) -> BlockSymplectic:
    """Matrix of ``f -> exp(-pi i C x.x) f``: ``[[I, -C], [0, I]]``."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    d = C.shape[0]
    return from_matrix(np.block([[np.eye(d), -C], [np.zeros((d, d)), np.eye(d)]]))


def lower_shear_matrix(C) -> BlockSymplectic:
    C = np.atleast_2d(np.asarray(C, dtype=float))
    d = C.shape[0]
    return from_matrix(np.block([[np.eye(d), np.zeros((d, d))], [C, np.eye(d)]]))


def _random_sym(rng, d, scale):
    X = rng.normal(scale=scale, size=(d, d))
    return (X + X.T) / 2


def _random_dil(rng, d, scale):
    # orthogonal times mild diagonal stretch, keeps conditioning bounded
    Q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    return Q @ np.diag(np.exp(rng.uniform(-scale, scale, size=d)))


def random_symplectic(d: int, n_factors: int, seed: int = 0, scale: float = 0.4,
                      kinds: tuple[str, ...] = ("dilation", "chirp", "J")) -> BlockSymplectic:
    """Product of ``n_factors`` random generator matrices, reproducible per seed.

    ``scale`` bounds the chirp strengths and the log-stretch of dilations so
    that outputs stay resolvable on moderate grids.
    """
    if d < 1 or n_factors < 1:
        raise InvalidArg("need d >= 1 and n_factors >= 1")
    rng = np.random.default_rng(seed)
    M = np.eye(2 * d)
    for _ in range(n_factors):
        kind = kinds[rng.integers(len(kinds))]
        if kind == "J":
            G = J(d)
        elif kind == "dilation":
            G = dilation_matrix(_random_dil(rng, d, scale)).matrix
        elif kind == "chirp":
            G = chirp_matrix(_random_sym(rng, d, scale)).matrix
        else:
            raise InvalidArg(f"unknown generator kind {kind!r}")
        M = M @ G
    return from_matrix(M)


def random_symplectic_rank(d: int, rank: int, seed: int = 0, scale: float = 0.4) -> BlockSymplectic:
    """Random symplectic whose block A has exactly the given rank.

    Built as ``P @ S0 @ Q`` where ``S0`` acts as the identity on the first
    ``rank`` coordinates and as J on the rest; ``P`` and ``Q`` are products of
    factors that preserve the rank of the A block.
    """
    if not 0 <= rank <= d:
        raise InvalidArg("rank must lie in [0, d]")
    rng = np.random.default_rng(seed)
    a = np.diag([1.0] * rank + [0.0] * (d - rank))
    b = np.eye(d) - a
    S0 = np.block([[a, b], [-b, a]])
    z, I = np.zeros((d, d)), np.eye(d)
    P = np.block([[I, z], [_random_sym(rng, d, scale), I]]) @ dilation_matrix(_random_dil(rng, d, scale)).matrix
    Q = dilation_matrix(_random_dil(rng, d, scale)).matrix @ np.block([[I, _random_sym(rng, d, scale)], [z, I]])
    return from_matrix(P @ S0 @ Q)


# ---------------------------------------------------------------------------
# structural quantities


def b_pseudo_inverse(S: BlockSymplectic) -> SubspaceMap:
    """Inverse of ``B : N(A) -> N(A^T)`` as a map ``N(A^T) -> N(A)``."""
    fr = S.frames
    d = S.dim
    src, tgt = Subspace(d, fr.U_n), Subspace(d, fr.V_n)
    if fr.U_n.shape[1] == 0:
        return SubspaceMap(src, tgt, np.zeros((d, d)))
    beta = fr.U_n.T @ S.B @ fr.V_n
    s = np.linalg.svd(beta, compute_uv=False)
    if s[-1] <= 1e-10:
        raise IsomorphismFailure(f"B restricted to N(A) is singular (sigma_min={s[-1]:.2e})")
    return SubspaceMap(src, tgt, fr.V_n @ np.linalg.inv(beta) @ fr.U_n.T)


def constants(S: BlockSymplectic) -> tuple[float, float]:
    """``(c, c1)`` with ``c = sqrt(s(A)/q_N(A)(C))`` and ``c1 = c / s(A)``."""
    sA = singular_product(S.A)
    NA = Subspace(S.dim, S.frames.V_n)
    q = volume_q(NA, S.C)
    if q <= 1e-12:
        raise DegenerateVolume(f"q_N(A)(C) = {q:.3e}")
    c = np.sqrt(sA / q)
    return float(c), float(1.0 / np.sqrt(sA * q))


@dataclass
class MappingReport:
    """Subspace relations between the blocks.

    ``checks`` holds the four range/kernel identities plus the equality
    ``dim N(A) = dim N(A^T)``. ``d_maps_kernel`` records whether D sends N(A)
    into N(A^T); this holds only for special matrices and is not part of ``ok``.
    """

    checks: dict[str, bool]
    residuals: dict[str, float]
    d_maps_kernel: bool = True
    d_residual: float = 0.0

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def verify_subspace_mappings(S: BlockSymplectic, tol: float = 1e-9) -> MappingReport:
    """Check the range/kernel relations between the blocks of ``S``."""
    d = S.dim
    R_A, N_A = range_kernel(S.A)
    R_At, N_At = range_kernel(S.A.T)
    res, ok = {}, {}

    pre = preimage(S.C.T, R_At)
    res["M1_preimage_CT"] = pre.distance(R_A)
    CN = image(S.C, N_A)
    res["M2_dim_C_NA"] = float(abs(CN.dim - N_A.dim))
    pre = preimage(S.B, R_A)
    res["M4_preimage_B"] = pre.distance(R_At)
    img = image(S.B.T, N_At)
    res["M6_BT_NAt"] = img.distance(N_A)
    res["dim_NA_eq_NAt"] = float(abs(N_A.dim - N_At.dim))
    for k, v in res.items():
        ok[k] = v <= tol
    d_res = float(np.max(np.abs(R_A.basis.T @ S.D @ N_A.basis))) if N_A.dim and R_A.dim else 0.0
    return MappingReport(ok, res, d_res <= tol, d_res)
