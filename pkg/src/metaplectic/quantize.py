"""Weyl and Kohn-Nirenberg quantization of sampled phase-space symbols."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import fft as sfft
from scipy import ndimage

from .errors import InvalidArg, SingularMatrix, SpecMismatch
from .grid import GridSignal, GridSpec, fourier, load_signal, save_signal, upsample2

_ROW_CHUNK = 2_000_000


@dataclass(frozen=True, eq=False)
class PhaseSymbol:
    """Symbol ``sigma(x, xi)`` sampled on ``spec_x`` times its dual grid.

    ``constant`` short-circuits symbols that do not depend on ``(x, xi)``;
    ``fn`` (optional) is an analytic form used for exact linear changes of
    variables.
    """

    spec_x: GridSpec
    values: np.ndarray | None = None
    constant: complex | None = None
    fn: Callable | None = None

    def __post_init__(self):
        if (self.values is None) == (self.constant is None):
            raise InvalidArg("give exactly one of values / constant")
        if self.values is not None:
            v = np.asarray(self.values, dtype=complex)
            if v.size != self.spec_x.n ** (2 * self.spec_x.dim):
                raise SpecMismatch("symbol size does not match the phase grid")
            v = v.reshape(self.spec_x.shape + self.spec_x.shape)
            if not np.all(np.isfinite(v)):
                raise InvalidArg("symbol has non-finite entries")
            object.__setattr__(self, "values", v)

    @classmethod
    def const(cls, spec_x: GridSpec, c: complex = 1.0) -> "PhaseSymbol":
        return cls(spec_x, constant=complex(c))

    @classmethod
    def from_function(cls, spec_x: GridSpec, fn) -> "PhaseSymbol":
        """``fn(x, xi)`` with ``x``, ``xi`` lists of meshgrids over the phase grid."""
        d = spec_x.dim
        m = np.meshgrid(*(spec_x.axes() + spec_x.dual().axes()), indexing="ij")
        vals = np.broadcast_to(fn(m[:d], m[d:]), m[0].shape)
        return cls(spec_x, values=np.array(vals, dtype=complex), fn=fn)

    @classmethod
    def potential(cls, V: GridSignal) -> "PhaseSymbol":
        d = V.spec.dim
        vals = np.broadcast_to(V.values.reshape(V.spec.shape + (1,) * d), V.spec.shape * 2)
        return cls(V.spec, values=np.array(vals))

    @property
    def dim(self) -> int:
        return self.spec_x.dim

    @property
    def phase_spec(self) -> GridSpec:
        ext = self.spec_x.extent + self.spec_x.dual().extent
        return GridSpec(2 * self.dim, self.spec_x.n, ext)

    def dense(self) -> np.ndarray:
        if self.values is not None:
            return self.values
        return np.full(self.spec_x.shape * 2, self.constant, dtype=complex)

    def points(self) -> np.ndarray:
        return self.phase_spec.points()

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Cubic-spline evaluation at phase points, clamped at the boundary."""
        points = np.atleast_2d(points)
        if self.constant is not None:
            return np.full(points.shape[0], self.constant, dtype=complex)
        axes = self.spec_x.axes() + self.spec_x.dual().axes()
        idx = np.stack([(points[:, i] - a[0]) / (a[1] - a[0]) for i, a in enumerate(axes)])
        re = ndimage.map_coordinates(self.values.real, idx, order=3, mode="nearest")
        im = ndimage.map_coordinates(self.values.imag, idx, order=3, mode="nearest")
        return re + 1j * im

    def __mul__(self, c) -> "PhaseSymbol":
        if self.constant is not None:
            return PhaseSymbol.const(self.spec_x, self.constant * c)
        fn = None if self.fn is None else (lambda x, xi, f0=self.fn: f0(x, xi) * c)
        return PhaseSymbol(self.spec_x, values=self.values * c, fn=fn)

    __rmul__ = __mul__

    def save(self, path, encoding: str = "bin"):
        save_signal(path, GridSignal(self.phase_spec, self.dense()), encoding, phase_space=True)

    @classmethod
    def load(cls, path) -> "PhaseSymbol":
        sig, header = load_signal(path)
        if not header.get("phase_space"):
            raise InvalidArg("file is not a phase-space symbol")
        d = sig.spec.dim // 2
        spec_x = GridSpec(d, sig.spec.n, sig.spec.extent[:d])
        return cls(spec_x, values=sig.values)


def _check(sigma: PhaseSymbol, f: GridSignal):
    if sigma.spec_x != f.spec:
        raise SpecMismatch("symbol and signal on different grids")


def weyl_apply(sigma: PhaseSymbol, f: GridSignal) -> GridSignal:
    """``sigma^w f(x) = sum_y K((x + y)/2, x - y) f(y) dx`` with ``K`` the inverse
    transform of ``sigma`` in ``xi``; midpoints come from the doubled grid."""
    _check(sigma, f)
    if sigma.constant is not None:
        return GridSignal(f.spec, f.values * sigma.constant)
    spec = f.spec
    d, n = spec.dim, spec.n
    xi_axes = tuple(range(d, 2 * d))
    # K(p, m): lag y = m dx, m in [-n/2, n/2); midpoints p on the doubled x grid
    K = sfft.fftshift(sfft.ifftn(sfft.ifftshift(sigma.values, axes=xi_axes), axes=xi_axes,
                                 norm="forward"), axes=xi_axes) * spec.dual().cell
    K = upsample2(K, spec, range(d))
    half = n // 2
    m = np.stack(np.meshgrid(*([np.arange(-half, half)] * d), indexing="ij"), -1).reshape(-1, d)
    k = np.stack(np.meshgrid(*([np.arange(n)] * d), indexing="ij"), -1).reshape(-1, d)
    Kf = K.ravel()
    fv = f.values.ravel()
    out = np.empty(k.shape[0], dtype=complex)
    step = max(1, _ROW_CHUNK // m.shape[0])
    for s0 in range(0, k.shape[0], step):
        kk = k[s0:s0 + step, None, :]
        l = kk - m[None]  # source sample index
        ok = np.all((l >= 0) & (l < n), axis=-1)
        p = np.clip(2 * kk - m[None], 0, 2 * n - 1)  # midpoint index on the doubled grid
        kidx = np.ravel_multi_index(tuple(np.moveaxis(p, -1, 0)) + tuple(np.moveaxis(
            np.broadcast_to(m[None] + half, p.shape), -1, 0)), K.shape)
        lidx = np.ravel_multi_index(tuple(np.moveaxis(np.clip(l, 0, n - 1), -1, 0)), spec.shape)
        out[s0:s0 + step] = np.sum(np.where(ok, Kf[kidx] * fv[lidx], 0), axis=1)
    out = out.reshape(spec.shape) * spec.cell
    return GridSignal(spec, out)


def kn_apply(sigma: PhaseSymbol, f: GridSignal) -> GridSignal:
    """``sigma(x, D) f(x) = int exp(2 pi i x.xi) sigma(x, xi) fhat(xi) dxi``."""
    _check(sigma, f)
    if sigma.constant is not None:
        return GridSignal(f.spec, f.values * sigma.constant)
    fh = fourier(f)
    return GridSignal(f.spec, kn_sum(sigma, fh.values))


def kn_sum(sigma: PhaseSymbol, fhat: np.ndarray) -> np.ndarray:
    """``sum_xi exp(2 pi i x.xi) sigma(x, xi) fhat(xi) dxi`` for samples ``fhat`` on the dual grid."""
    spec = sigma.spec_x
    dual = spec.dual()
    b = np.asarray(fhat, dtype=complex).ravel()
    if sigma.constant is not None:
        return fourier(GridSignal(dual, b), +1).values * sigma.constant
    return _direct_kn(sigma.values.reshape(spec.n ** spec.dim, -1), b, spec)


def _direct_kn(S: np.ndarray, b: np.ndarray, spec: GridSpec) -> np.ndarray:
    xs = spec.points()
    xis = spec.dual().points()
    N = xs.shape[0]
    out = np.empty(N, dtype=complex)
    step = max(1, _ROW_CHUNK // xis.shape[0])
    for s0 in range(0, N, step):
        sl = slice(s0, s0 + step)
        E = np.exp(2j * np.pi * xs[sl] @ xis.T)
        out[sl] = (E * S[sl]) @ b
    return out.reshape(spec.shape) * spec.dual().cell


def _u_multiplier(sigma: PhaseSymbol, sign: int, K: np.ndarray | None = None) -> np.ndarray:
    ps = sigma.phase_spec
    d = sigma.dim
    eta = np.meshgrid(*ps.dual().axes(), indexing="ij")
    if K is None:
        q = sum(eta[i] * eta[d + i] for i in range(d))
    else:
        q = sum(K[i, j] * eta[i] * eta[d + j] for i in range(d) for j in range(d))
    return np.exp(sign * 1j * np.pi * q)


def weyl_to_kn(sigma: PhaseSymbol, inverse: bool = False, K: np.ndarray | None = None) -> PhaseSymbol:
    """``U sigma``: multiply ``sigma^`` by ``exp(pi i eta1.eta2)`` (conjugate for the inverse).

    ``K`` replaces the pairing by ``eta1.K eta2``; then
    ``U_K [sigma(x, M xi)] = (U sigma)(x, M xi)`` for ``K = M^-T``.
    """
    if sigma.constant is not None:
        return sigma
    axes = tuple(range(2 * sigma.dim))
    v = sfft.fftshift(sfft.fftn(sfft.ifftshift(sigma.values, axes=axes), axes=axes), axes=axes)
    v = v * _u_multiplier(sigma, -1 if inverse else 1, None if K is None else np.atleast_2d(K))
    v = sfft.fftshift(sfft.ifftn(sfft.ifftshift(v, axes=axes), axes=axes), axes=axes)
    return PhaseSymbol(sigma.spec_x, values=v)


def kn_to_weyl(sigma: PhaseSymbol) -> PhaseSymbol:
    return weyl_to_kn(sigma, inverse=True)


def symbol_compose_linear(sigma: PhaseSymbol, M: np.ndarray) -> tuple[PhaseSymbol, float]:
    """``(sigma o M, kappa)``: resample at ``M (x, xi)`` by clamped cubic splines.

    ``kappa = max(||M||, ||M^-1||)^(2d)`` is the reported growth factor for the
    modulation-norm surrogate (window dilation cost).
    """
    M = np.asarray(M, dtype=float)
    d = sigma.dim
    if M.shape != (2 * d, 2 * d):
        raise InvalidArg("M must be 2d x 2d")
    if abs(np.linalg.det(M)) < 1e-12:
        raise SingularMatrix("composition matrix is singular")
    kappa = max(np.linalg.norm(M, 2), np.linalg.norm(np.linalg.inv(M), 2)) ** (2 * d)
    if sigma.constant is not None:
        return sigma, float(kappa)
    if np.allclose(M, np.eye(2 * d), atol=1e-15, rtol=0):
        return sigma, 1.0
    if sigma.fn is not None:
        f0 = sigma.fn

        def fn(x, xi):
            z = list(x) + list(xi)
            w = [sum(M[i, j] * z[j] for j in range(2 * d)) for i in range(2 * d)]
            return f0(w[:d], w[d:])

        return PhaseSymbol.from_function(sigma.spec_x, fn), float(kappa)
    pts = sigma.points() @ M.T
    vals = sigma.evaluate(pts).reshape(sigma.values.shape)
    return PhaseSymbol(sigma.spec_x, values=vals), float(kappa)


def resample_xi(sigma: PhaseSymbol, M: np.ndarray) -> PhaseSymbol:
    """``(x, xi) -> sigma(x, M xi)`` by per-``x`` cubic splines in ``xi`` (clamped)."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if sigma.constant is not None:
        return sigma
    spec = sigma.spec_x
    d = spec.dim
    if sigma.fn is not None:
        f0 = sigma.fn
        return PhaseSymbol.from_function(
            spec, lambda x, xi: f0(x, [sum(M[i, j] * xi[j] for j in range(d)) for i in range(d)]))
    dual = spec.dual()
    pts = dual.points() @ M.T
    idx = np.stack([(pts[:, i] - dual.axis(i)[0]) / dual.dx[i] for i in range(d)])
    out = np.empty_like(sigma.values)
    for k in np.ndindex(*spec.shape):
        sl = sigma.values[k]
        re = ndimage.map_coordinates(sl.real, idx, order=3, mode="nearest")
        im = ndimage.map_coordinates(sl.imag, idx, order=3, mode="nearest")
        out[k] = (re + 1j * im).reshape(dual.shape)
    return PhaseSymbol(spec, values=out)
