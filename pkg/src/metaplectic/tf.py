"""Time-frequency analysis: Wigner distributions, STFT, Gabor matrices."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import fft as sfft
from scipy import ndimage

from .errors import InsufficientData, InvalidArg, SpecMismatch, ZeroWindow
from .grid import GridSignal, GridSpec, fourier_axes, gaussian, upsample2
from .symplectic import BlockSymplectic

DECAY_FLOOR = 1e-14


@dataclass(frozen=True, eq=False)
class PhaseGrid:
    """Samples on ``x``-grid x ``xi``-grid.

    For a full grid ``values`` has shape ``spec_x.shape + spec_xi.shape``.
    A plane slice (``plane = k``) holds ``(x_k, xi_k)`` with every other
    coordinate at 0 and has shape ``(n, n)``.
    """

    spec_x: GridSpec
    spec_xi: GridSpec
    values: np.ndarray
    plane: int | None = None

    def axes(self) -> list[np.ndarray]:
        if self.plane is not None:
            return [self.spec_x.axis(self.plane), self.spec_xi.axis(self.plane)]
        return self.spec_x.axes() + self.spec_xi.axes()

    def points(self) -> np.ndarray:
        m = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([a.ravel() for a in m], axis=1)

    def cell(self) -> float:
        if self.plane is not None:
            return float(self.spec_x.dx[self.plane] * self.spec_xi.dx[self.plane])
        return self.spec_x.cell * self.spec_xi.cell

    def sample(self, points: np.ndarray, order: int = 3) -> np.ndarray:
        """Cubic-spline resampling at phase-space points (zero outside the box)."""
        axes = self.axes()
        points = np.atleast_2d(points)
        idx = np.stack([(points[:, i] - a[0]) / (a[1] - a[0]) for i, a in enumerate(axes)])
        re = ndimage.map_coordinates(self.values.real, idx, order=order, mode="constant", cval=0.0)
        im = ndimage.map_coordinates(self.values.imag, idx, order=order, mode="constant", cval=0.0)
        return re + 1j * im

    def save(self, path, meta: dict | None = None):
        """CSV rows ``x...,xi...,re,im`` plus a JSON sidecar with grid metadata."""
        path = Path(path)
        pts = self.points()
        v = self.values.ravel()
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            nd = pts.shape[1] // 2
            w.writerow([f"x{i}" for i in range(nd)] + [f"xi{i}" for i in range(nd)] + ["re", "im"])
            for p, z in zip(pts, v):
                w.writerow([repr(float(c)) for c in p] + [repr(float(z.real)), repr(float(z.imag))])
        info = {"spec_x": self.spec_x.to_dict(), "spec_xi": self.spec_xi.to_dict(),
                "plane": self.plane}
        if meta:
            info.update(meta)
        path.with_suffix(".json").write_text(json.dumps(info, indent=2, sort_keys=True))


# ---------------------------------------------------------------------------
# Wigner


def cross_wigner(f: GridSignal, g: GridSignal, plane: int | None = None) -> PhaseGrid:
    """``W(f,g)(x, xi) = int f(x + y/2) conj g(x - y/2) exp(-2 pi i y.xi) dy``.

    Half samples come from trigonometric interpolation onto the doubled grid;
    the ``y`` transform has length ``2n`` and is decimated onto the dual grid.
    """
    if f.spec != g.spec:
        raise SpecMismatch("signals live on different grids")
    spec = f.spec
    d, n = spec.dim, spec.n
    axes = list(range(d))
    f2 = upsample2(f.values, spec, axes)
    g2 = np.conj(upsample2(g.values, spec, axes))
    if plane is None:
        if d == 1:
            return PhaseGrid(spec, spec.dual(), _wigner_1d(f2, g2, n, spec.dx[0]))
        return PhaseGrid(spec, spec.dual(), _wigner_nd(f2, g2, spec))
    if d != 2 or plane not in (0, 1):
        raise InvalidArg("plane slices are available for d = 2 only")
    return PhaseGrid(spec, spec.dual(), _wigner_plane(f2, g2, spec, plane), plane=plane)


def wigner(f: GridSignal, plane: int | None = None) -> PhaseGrid:
    W = cross_wigner(f, f, plane)
    return PhaseGrid(W.spec_x, W.spec_xi, W.values.real.astype(complex), W.plane)


def _lag_indices(n: int):
    # lags y = m dx, m in [-n, n); fft order wants m = 0 first
    m = sfft.ifftshift(np.arange(-n, n))
    return m


def _decimate(spec_line: np.ndarray, n: int) -> np.ndarray:
    # spectrum of length 2n in fft order -> centered even bins -> n values
    c = sfft.fftshift(spec_line, axes=-1)
    return c[..., ::2]


def _wigner_1d(f2, g2, n, dx):
    m = _lag_indices(n)
    k = np.arange(n)[:, None]
    ip, im = 2 * k + m, 2 * k - m
    ok_p = (ip >= 0) & (ip < 2 * n)
    ok_m = (im >= 0) & (im < 2 * n)
    prod = np.where(ok_p & ok_m, f2[np.clip(ip, 0, 2 * n - 1)] * g2[np.clip(im, 0, 2 * n - 1)], 0)
    return _decimate(sfft.fft(prod, axis=1), n) * dx


def _wigner_nd(f2, g2, spec):
    d, n = spec.dim, spec.n
    if n ** d * (2 * n) ** d > 5e7:
        raise InvalidArg("full Wigner grid too large; use a plane slice")
    m = _lag_indices(n)
    out = np.empty((n,) * d + (n,) * d, dtype=complex)
    lag = np.meshgrid(*([m] * d), indexing="ij")
    for k in np.ndindex(*(n,) * d):
        ip = [2 * k[i] + lag[i] for i in range(d)]
        im = [2 * k[i] - lag[i] for i in range(d)]
        ok = np.ones(lag[0].shape, bool)
        for a, b in zip(ip, im):
            ok &= (a >= 0) & (a < 2 * n) & (b >= 0) & (b < 2 * n)
        cp = tuple(np.clip(a, 0, 2 * n - 1) for a in ip)
        cm = tuple(np.clip(b, 0, 2 * n - 1) for b in im)
        prod = np.where(ok, f2[cp] * g2[cm], 0)
        S = sfft.fftn(prod)
        for ax in range(d):
            S = np.moveaxis(_decimate(np.moveaxis(S, ax, -1), n), -1, ax)
        out[k] = S * spec.cell
    return out


def _wigner_plane(f2, g2, spec, k):
    # coordinates other than k fixed at x = 0 (doubled index n), xi = 0 (plain sum over lag)
    n = spec.n
    j = 1 - k
    m = _lag_indices(n)
    kk = np.arange(n)[:, None]
    ip, im = 2 * kk + m, 2 * kk - m
    ok = (ip >= 0) & (ip < 2 * n) & (im >= 0) & (im < 2 * n)
    ipc, imc = np.clip(ip, 0, 2 * n - 1), np.clip(im, 0, 2 * n - 1)
    mj = np.arange(-n, n)
    jp, jm = n + mj, n - mj
    okj = (jp >= 0) & (jp < 2 * n) & (jm >= 0) & (jm < 2 * n)
    jp, jm = jp[okj], jm[okj]
    F = np.moveaxis(f2, k, 0)  # (2n along k, 2n along j)
    G = np.moveaxis(g2, k, 0)
    # prod[kk, m] = sum_mj F[ip, n+mj] G[im, n-mj]
    Fj, Gj = F[:, jp], G[:, jm]
    prod = np.einsum("abj,abj->ab", Fj[ipc], Gj[imc]) * spec.dx[j]
    prod = np.where(ok, prod, 0)
    return _decimate(sfft.fft(prod, axis=1), n) * spec.dx[k]


def intertwining_error(f: GridSignal, g: GridSignal, S: BlockSymplectic,
                       plane: int | None = None) -> float:
    """Relative l2 error between ``W_g`` and ``W_f o S^{-T}`` on the phase grid.

    ``g`` should be ``mu(S) f``; packets move from ``z`` to ``S^T z``.
    """
    Wf, Wg = wigner(f, plane), wigner(g, plane)
    pts = Wg.points()
    Minv_T = np.linalg.inv(S.matrix).T
    if plane is not None:
        d = S.dim
        idx = [plane, d + plane]
        full = np.zeros((pts.shape[0], 2 * d))
        full[:, idx] = pts
        src = full @ Minv_T.T
        other = [i for i in range(2 * d) if i not in idx]
        if np.max(np.abs(src[:, other])) > 1e-9 * max(1.0, np.max(np.abs(src))):
            raise InvalidArg("S does not preserve the requested phase-space plane")
        src = src[:, idx]
    else:
        src = pts @ Minv_T.T
    ref = Wf.sample(src).real
    got = Wg.values.real.ravel()
    return float(np.linalg.norm(got - ref) / np.linalg.norm(ref))


# ---------------------------------------------------------------------------
# STFT and Gabor matrices


def gaussian_window(spec: GridSpec) -> GridSignal:
    return gaussian(spec)


def tf_shift(g: GridSignal, z) -> GridSignal:
    """``pi(z) g (t) = exp(2 pi i xi.t) g(t - x)`` with band-limited shifting."""
    from .grid import evaluate_linear

    spec = g.spec
    d = spec.dim
    z = np.asarray(z, dtype=float)
    x, xi = z[:d], z[d:]
    shifted = evaluate_linear(g, np.eye(d), -x) if np.any(x) else g
    phase = np.exp(2j * np.pi * sum(m * w for m, w in zip(spec.mesh(), xi)))
    return GridSignal(spec, shifted.values * phase)


def stft(f: GridSignal, g: GridSignal, points: np.ndarray | None = None) -> PhaseGrid | np.ndarray:
    """``V_g f(x, xi) = int f(t) conj g(t - x) exp(-2 pi i t.xi) dt``.

    Without ``points`` the full grid (all ``x`` samples times the dual grid) is
    returned; otherwise the values at the given ``(x, xi)`` rows.
    """
    if f.spec != g.spec:
        raise SpecMismatch("signal and window on different grids")
    if not np.any(g.values):
        raise ZeroWindow("window is zero")
    spec = f.spec
    d = spec.dim
    if points is not None:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.empty(points.shape[0], dtype=complex)
        xs, inv = np.unique(points[:, :d], axis=0, return_inverse=True)
        inv = np.asarray(inv).ravel()
        t = spec.points()
        for i, x in enumerate(xs):
            gx = tf_shift(g, np.concatenate([x, np.zeros(d)]))
            h = f.values.ravel() * np.conj(gx.values.ravel())
            sel = np.nonzero(inv == i)[0]
            E = np.exp(-2j * np.pi * points[sel, d:] @ t.T)
            out[sel] = E @ h * spec.cell
        return out
    if spec.n ** (2 * d) > 2e7:
        raise InvalidArg("full STFT grid too large; pass lattice points")
    out = np.empty(spec.shape + spec.shape, dtype=complex)
    for k in np.ndindex(*spec.shape):
        x = np.array([spec.axis(i)[k[i]] for i in range(d)])
        gx = tf_shift(g, np.concatenate([x, np.zeros(d)]))
        out[k] = fourier_axes(f.values * np.conj(gx.values), spec, range(d))
    return PhaseGrid(spec, spec.dual(), out)


def lattice(d: int, alpha: float = 1.0, radius: float = 6.0) -> np.ndarray:
    """Points of ``alpha Z^(2d)`` with Euclidean norm at most ``radius``."""
    k = int(np.floor(radius / alpha))
    ax = np.arange(-k, k + 1) * alpha
    m = np.meshgrid(*([ax] * (2 * d)), indexing="ij")
    pts = np.stack([a.ravel() for a in m], axis=1)
    return pts[np.linalg.norm(pts, axis=1) <= radius + 1e-12]


@dataclass(frozen=True, eq=False)
class GaborTable:
    w: np.ndarray  # (nw, 2d) row lattice points
    z: np.ndarray  # (nz, 2d) column lattice points
    values: np.ndarray  # (nw, nz)

    def save(self, path, meta: dict | None = None):
        path = Path(path)
        with path.open("w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["w_index", "z_index", "re", "im"])
            for i in range(self.values.shape[0]):
                for j in range(self.values.shape[1]):
                    v = self.values[i, j]
                    wr.writerow([i, j, repr(float(v.real)), repr(float(v.imag))])
        info = {"w": self.w.tolist(), "z": self.z.tolist()}
        if meta:
            info.update(meta)
        path.with_suffix(".json").write_text(json.dumps(info, sort_keys=True))


def gabor_matrix(T: Callable[[GridSignal], GridSignal], g: GridSignal, alpha: float = 1.0,
                 radius: float = 6.0, columns: np.ndarray | None = None) -> GaborTable:
    """``G[w, z] = <T pi(z) g, pi(w) g>`` for lattice points ``w``, ``z``."""
    pts = lattice(g.spec.dim, alpha, radius)
    cols = pts if columns is None else np.atleast_2d(columns)
    vals = np.empty((pts.shape[0], cols.shape[0]), dtype=complex)
    for j, z in enumerate(cols):
        vals[:, j] = stft(T(tf_shift(g, z)), g, pts)
    return GaborTable(pts, cols, vals)


def _bracket(u: np.ndarray) -> np.ndarray:
    return np.sqrt(1.0 + np.sum(u * u, axis=-1))


@dataclass(frozen=True)
class DecayFit:
    C: float
    s_hat: float
    residual: float
    n_entries: int

    def to_dict(self) -> dict:
        return {"C": self.C, "s_hat": self.s_hat, "residual": self.residual,
                "n_entries": self.n_entries}


def decay_fit(G: GaborTable, S: BlockSymplectic | np.ndarray) -> DecayFit:
    """Least-squares fit of ``log|G| = log C - s log<w - S z>`` on entries above the floor.

    Pass ``S.matrix.T`` (or ``S.T``) to test membership in the class of ``S^T``.
    """
    M = S.matrix if isinstance(S, BlockSymplectic) else np.asarray(S, dtype=float)
    a = np.abs(G.values)
    mask = a > DECAY_FLOOR
    if G.values.size == 0 or mask.sum() < 3:
        raise InsufficientData("too few entries above the floor")
    Az = G.z @ M.T
    dist = _bracket(G.w[:, None, :] - Az[None, :, :])
    X = np.log(dist[mask])
    y = np.log(a[mask])
    Amat = np.stack([np.ones_like(X), -X], axis=1)
    coef, *_ = np.linalg.lstsq(Amat, y, rcond=None)
    res = float(np.sqrt(np.mean((Amat @ coef - y) ** 2)))
    return DecayFit(float(np.exp(coef[0])), float(coef[1]), res, int(mask.sum()))


def concentration(G: GaborTable, S: BlockSymplectic | np.ndarray, tol_steps: float = 1.0,
                  alpha: float = 1.0) -> float:
    """Fraction of columns whose argmax row lies within ``tol_steps`` of ``S z``.

    Only columns whose target ``S z`` lies inside the row lattice are counted.
    """
    M = S.matrix if isinstance(S, BlockSymplectic) else np.asarray(S, dtype=float)
    radius = np.max(np.linalg.norm(G.w, axis=1))
    hits, total = 0, 0
    for j, z in enumerate(G.z):
        target = M @ z
        if np.linalg.norm(target) > radius - alpha:
            continue
        total += 1
        best = G.w[np.argmax(np.abs(G.values[:, j]))]
        hits += np.linalg.norm(best - target) <= tol_steps * alpha + 1e-9
    if total == 0:
        raise InsufficientData("no column maps inside the lattice")
    return hits / total


def weight_ratio_check(S: BlockSymplectic, s: float, pts: np.ndarray) -> tuple[float, float, float]:
    """``(min, max)`` of ``v_s(S z) / v_s(z)`` over ``pts`` and ``kappa = ||S||^s``."""
    ratio = (_bracket(pts @ S.matrix.T) / _bracket(pts)) ** s
    kappa = np.linalg.norm(S.matrix, 2) ** s
    return float(ratio.min()), float(ratio.max()), float(kappa)


# ---------------------------------------------------------------------------
# modulation-norm surrogate


def modulation_norm_estimate(values: np.ndarray, spec: GridSpec, s: float, width: float = 1.0,
                             stride: int = 4) -> float:
    """``max |V_phi F(z, zeta)| <zeta>^s`` over ``z`` on a strided grid, ``zeta`` on the dual grid.

    ``values`` is sampled on ``spec`` (any dimension); ``phi`` is a normalised
    Gaussian of the given width. A diagnostic, not a certified norm.
    """
    if s < 0:
        raise InvalidArg("s must be non-negative")
    values = np.asarray(values, dtype=complex).reshape(spec.shape)
    if not np.any(values):
        return 0.0
    dual = spec.dual()
    zeta = np.meshgrid(*dual.axes(), indexing="ij")
    weight = np.sqrt(1.0 + sum(a * a for a in zeta)) ** s
    best = 0.0
    axes = spec.axes()
    idx_axes = [np.arange(0, spec.n, stride) for _ in range(spec.dim)]
    for k in np.ndindex(*[len(a) for a in idx_axes]):
        z = np.array([axes[i][idx_axes[i][k[i]]] for i in range(spec.dim)])
        win = gaussian(spec, center=z, width=width).values
        V = fourier_axes(values * np.conj(win), spec, range(spec.dim))
        best = max(best, float(np.max(np.abs(V) * weight)))
    return best
