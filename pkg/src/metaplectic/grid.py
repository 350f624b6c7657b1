"""Sampled functions on centered uniform grids and their Fourier transforms.

The continuous transform uses the 2*pi-in-the-exponent convention
``F f(xi) = int f(x) exp(-2 pi i x.xi) dx``. A grid with ``n`` samples per
axis and extent ``X`` has samples at ``x_k = (k - n/2) X/n``; its frequency
grid has spacing ``1/X`` and extent ``n/X``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import fft as sfft

from .errors import InvalidArg, NonAxisAligned, SpecMismatch, ZeroSignal
from .symplectic import Subspace

# bound on intermediate (points x samples) blocks in the non-uniform sums
_CHUNK_ELEMS = 4_000_000


@dataclass(frozen=True)
class GridSpec:
    dim: int
    n: int
    extent: tuple[float, ...]

    def __post_init__(self):
        ext = self.extent
        if np.isscalar(ext):
            ext = (float(ext),) * self.dim
        ext = tuple(float(e) for e in ext)
        object.__setattr__(self, "extent", ext)
        if len(ext) != self.dim:
            raise InvalidArg("extent must have one entry per axis")
        if self.n < 8 or self.n % 2:
            raise InvalidArg("n must be even and at least 8")

    @classmethod
    def cube(cls, dim: int, n: int, extent: float) -> "GridSpec":
        return cls(dim, n, (float(extent),) * dim)

    @property
    def dx(self) -> np.ndarray:
        return np.array(self.extent) / self.n

    @property
    def cell(self) -> float:
        return float(np.prod(self.dx))

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    def axis(self, i: int) -> np.ndarray:
        return (np.arange(self.n) - self.n // 2) * self.dx[i]

    def axes(self) -> list[np.ndarray]:
        return [self.axis(i) for i in range(self.dim)]

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*self.axes(), indexing="ij")

    def points(self) -> np.ndarray:
        """All grid points as an ``(n**d, d)`` array in row-major order."""
        return np.stack([m.ravel() for m in self.mesh()], axis=1)

    def dual(self) -> "GridSpec":
        """Frequency grid: spacing ``1/X``, extent ``n/X``."""
        # snap self-dual axes so that X = sqrt(n) round-trips to an equal spec
        ext = tuple(e if math.isclose(self.n / e, e, rel_tol=1e-13) else self.n / e
                    for e in self.extent)
        return GridSpec(self.dim, self.n, ext)

    def refined(self, factor: int) -> "GridSpec":
        """Same spacing, ``factor`` times the extent (zero padding in space)."""
        return GridSpec(self.dim, self.n * factor, tuple(e * factor for e in self.extent))

    def doubled(self) -> "GridSpec":
        """Same extent, half the spacing."""
        return GridSpec(self.dim, 2 * self.n, self.extent)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "n": self.n, "extent": list(self.extent)}


@dataclass(frozen=True, eq=False)
class GridSignal:
    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.size != self.spec.n ** self.spec.dim:
            raise SpecMismatch(f"expected {self.spec.n ** self.spec.dim} values, got {v.size}")
        v = v.reshape(self.spec.shape)
        if not np.all(np.isfinite(v)):
            raise InvalidArg("signal has non-finite entries")
        object.__setattr__(self, "values", v)

    def __add__(self, other: "GridSignal") -> "GridSignal":
        _check_same(self, other)
        return GridSignal(self.spec, self.values + other.values)

    def __sub__(self, other: "GridSignal") -> "GridSignal":
        _check_same(self, other)
        return GridSignal(self.spec, self.values - other.values)

    def __mul__(self, c) -> "GridSignal":
        if isinstance(c, GridSignal):
            _check_same(self, c)
            return GridSignal(self.spec, self.values * c.values)
        return GridSignal(self.spec, self.values * c)

    __rmul__ = __mul__

    def map(self, fn) -> "GridSignal":
        return GridSignal(self.spec, fn(self.values))


def _check_same(f: GridSignal, g: GridSignal):
    if f.spec != g.spec:
        raise SpecMismatch("signals live on different grids")


def zeros(spec: GridSpec) -> GridSignal:
    return GridSignal(spec, np.zeros(spec.shape, dtype=complex))


def from_function(spec: GridSpec, fn) -> GridSignal:
    """Sample ``fn(*coords)`` on the grid (coords are ij-meshgrids)."""
    return GridSignal(spec, np.broadcast_to(fn(*spec.mesh()), spec.shape).astype(complex))


# ---------------------------------------------------------------------------
# Fourier transforms


def _centered_fft(values: np.ndarray, axes, sign: int) -> np.ndarray:
    axes = tuple(axes)
    if not axes:
        return values.copy()
    v = sfft.ifftshift(values, axes=axes)
    v = sfft.fftn(v, axes=axes) if sign < 0 else sfft.ifftn(v, axes=axes, norm="forward")
    return sfft.fftshift(v, axes=axes)


def fourier(f: GridSignal, sign: int = -1) -> GridSignal:
    """Discrete approximation of the continuous Fourier transform.

    ``sign=-1`` is the forward transform ``exp(-2 pi i x.xi)``; ``sign=+1`` the
    inverse. The result lives on ``f.spec.dual()``.
    """
    out = _centered_fft(f.values, range(f.spec.dim), sign) * f.spec.cell
    return GridSignal(f.spec.dual(), out)


def inverse_fourier(f: GridSignal) -> GridSignal:
    return fourier(f, +1)


def fourier_axes(values: np.ndarray, spec: GridSpec, axes, sign: int = -1) -> np.ndarray:
    """Transform along selected axes only; the others are left untouched."""
    axes = list(axes)
    scale = float(np.prod([spec.dx[a] for a in axes])) if axes else 1.0
    return _centered_fft(values, axes, sign) * scale


def partial_fourier(f: GridSignal, L: Subspace, frame: np.ndarray | None = None) -> GridSignal:
    """Fourier transform over the subspace ``L``, identity on its complement.

    For axis-aligned ``L`` the output is indexed by the frequency variable on
    the axes of ``L`` and the untouched spatial variable elsewhere. If ``L`` is
    not axis aligned an orthogonal ``frame`` whose first ``dim L`` columns span
    ``L`` must be supplied; the output is then expressed in frame coordinates.
    """
    if L.dim == 0:
        return GridSignal(f.spec, f.values.copy())
    if L.is_axis_aligned():
        axes = L.axes()
        return GridSignal(f.spec, fourier_axes(f.values, f.spec, axes))
    if frame is None:
        raise NonAxisAligned("subspace is not axis aligned; supply a frame")
    frame = np.asarray(frame, dtype=float)
    if not Subspace(L.ambient_dim, frame[:, : L.dim]).equals(L):
        raise InvalidArg("frame does not start with a basis of L")
    g = rotate_frame(f, frame)
    return GridSignal(f.spec, fourier_axes(g.values, f.spec, range(L.dim)))


# ---------------------------------------------------------------------------
# non-uniform sums


def nudft(values: np.ndarray, axes: list[np.ndarray], points: np.ndarray, sign: int,
          weight: float = 1.0) -> np.ndarray:
    """``sum_k values[k] exp(sign 2 pi i p.t_k) * weight`` at arbitrary points.

    ``values`` has the tensor sample axes first (one per entry of ``axes``,
    holding the sample coordinates ``t``) and optional trailing batch axes.
    Returns an array of shape ``(len(points), *batch)``.
    """
    r = len(axes)
    points = np.asarray(points, dtype=float).reshape(-1, r)
    values = np.asarray(values)
    tshape = values.shape[:r]
    batch = values.shape[r:]
    M = points.shape[0]
    out = np.empty((M,) + batch, dtype=complex)
    if r == 0:
        out[...] = values * weight
        return out
    per_point = int(np.prod(tshape)) * max(1, int(np.prod(batch)))
    step = max(1, _CHUNK_ELEMS // max(1, per_point // tshape[0]))
    flat = values.reshape(tshape[0], -1)
    tw = 2j * np.pi * sign
    for s in range(0, M, step):
        p = points[s:s + step]
        E = np.exp(tw * np.outer(p[:, 0], axes[0]))
        T = E @ flat  # (m, rest)
        T = T.reshape((p.shape[0],) + tshape[1:] + batch)
        for ax in range(1, r):
            E = np.exp(tw * np.outer(p[:, ax], axes[ax]))
            T = np.einsum("mk,mk...->m...", E, T)
        out[s:s + step] = T * weight
    return out


def separable_eval(values: np.ndarray, axes: list[np.ndarray], coords: list[np.ndarray],
                   sign: int, weight: float = 1.0) -> np.ndarray:
    """Same sum as :func:`nudft` for a tensor product of evaluation points."""
    out = np.asarray(values, dtype=complex)
    for ax, (t, p) in enumerate(zip(axes, coords)):
        E = np.exp(2j * np.pi * sign * np.outer(p, t))
        out = np.moveaxis(np.tensordot(E, out, axes=([1], [ax])), 0, ax)
    return out * weight


def upsample2(values: np.ndarray, spec: GridSpec, axes) -> np.ndarray:
    """Trigonometric interpolation onto ``spec.doubled()`` along the given axes.

    The doubled axis has samples ``(p - n) dx/2``, so even ``p`` reproduce the
    original samples.
    """
    axes = list(axes)
    fh = fourier_axes(np.asarray(values, dtype=complex), spec, axes)
    shape = list(fh.shape)
    sl = [slice(None)] * fh.ndim
    for ax in axes:
        n = shape[ax]
        shape[ax] = 2 * n
        sl[ax] = slice(n // 2, n // 2 + n)
    pad = np.zeros(shape, dtype=complex)
    pad[tuple(sl)] = fh
    dual = spec.dual()
    return _centered_fft(pad, axes, +1) * float(np.prod([dual.dx[a] for a in axes]))


def _inside(spec: GridSpec, points: np.ndarray) -> np.ndarray:
    half = np.array(spec.extent) / 2
    return np.all(np.abs(points) <= half * (1 + 1e-12), axis=1)


def evaluate(f: GridSignal, points: np.ndarray) -> np.ndarray:
    """Band-limited (trigonometric) interpolation of ``f`` at arbitrary points.

    Points outside the grid box evaluate to zero.
    """
    spec = f.spec
    points = np.asarray(points, dtype=float).reshape(-1, spec.dim)
    fh = fourier(f)
    out = nudft(fh.values, fh.spec.axes(), points, +1, fh.spec.cell)
    out[~_inside(spec, points)] = 0.0
    return out


def evaluate_fourier(f: GridSignal, freqs: np.ndarray) -> np.ndarray:
    """``F f`` at arbitrary frequencies by direct summation over the samples."""
    spec = f.spec
    freqs = np.asarray(freqs, dtype=float).reshape(-1, spec.dim)
    out = nudft(f.values, spec.axes(), freqs, -1, spec.cell)
    out[~_inside(spec.dual(), freqs)] = 0.0
    return out


def evaluate_linear(f: GridSignal, M: np.ndarray, shift=None) -> GridSignal:
    """``g(x) = f(M x + shift)`` on the same grid, exact for band-limited f.

    Diagonal ``M`` uses per-axis transforms (cost ``n^(d+1)``).
    """
    spec = f.spec
    M = np.atleast_2d(np.asarray(M, dtype=float))
    shift = np.zeros(spec.dim) if shift is None else np.asarray(shift, dtype=float)
    if np.allclose(M, np.diag(np.diag(M)), atol=0, rtol=0):
        fh = fourier(f)
        coords = [np.diag(M)[i] * spec.axis(i) + shift[i] for i in range(spec.dim)]
        v = separable_eval(fh.values, fh.spec.axes(), coords, +1, fh.spec.cell)
        half = np.array(spec.extent) / 2
        for i, c in enumerate(coords):
            mask = np.abs(c) > half[i] * (1 + 1e-12)
            if mask.any():
                idx = [slice(None)] * spec.dim
                idx[i] = mask
                v[tuple(idx)] = 0.0
        return GridSignal(spec, v)
    pts = spec.points() @ M.T + shift
    return GridSignal(spec, evaluate(f, pts).reshape(spec.shape))


def rotate_frame(f: GridSignal, Q: np.ndarray) -> GridSignal:
    """Resample ``x -> f(Q x)`` for orthogonal ``Q``."""
    Q = np.asarray(Q, dtype=float)
    if np.max(np.abs(Q.T @ Q - np.eye(Q.shape[0]))) > 1e-10:
        raise InvalidArg("Q is not orthogonal")
    if np.allclose(Q, np.eye(Q.shape[0]), atol=1e-15, rtol=0):
        return GridSignal(f.spec, f.values.copy())
    # signed permutations map grid points onto grid points
    P = np.round(Q)
    if np.allclose(Q, P, atol=1e-14):
        return _permute(f, P)
    return evaluate_linear(f, Q)


def _permute(f: GridSignal, P: np.ndarray) -> GridSignal:
    spec = f.spec
    n = spec.n
    # g[i] = f(P x_i); x_k = (k - n/2) dx, reflection k -> n - k keeps index 0 (x=-X/2) fixed
    idx = np.indices(spec.shape).reshape(spec.dim, -1) - n // 2
    src = P @ idx
    ok = np.all(src >= -(n // 2), axis=0) & np.all(src < n // 2, axis=0)
    out = np.zeros(idx.shape[1], dtype=complex)
    s = src[:, ok].astype(int) + n // 2
    out[ok] = f.values[tuple(s)]
    return GridSignal(spec, out.reshape(spec.shape))


# ---------------------------------------------------------------------------
# test signals and inner products


def hermite_1d(k: int, x: np.ndarray) -> np.ndarray:
    """L2-normalised Hermite function for the ``exp(-2 pi i x.xi)`` convention.

    ``h_k`` is an eigenfunction of the Fourier transform with eigenvalue ``(-i)^k``.
    """
    x = np.asarray(x, dtype=float)
    u = np.sqrt(2 * np.pi) * x
    h_prev = np.zeros_like(u)
    h = 2 ** 0.25 * np.exp(-np.pi * x ** 2)
    for j in range(k):
        h_prev, h = h, np.sqrt(2.0 / (j + 1)) * u * h - np.sqrt(j / (j + 1)) * h_prev
    return h


def hermite(k, spec: GridSpec) -> GridSignal:
    ks = (k,) if np.isscalar(k) else tuple(k)
    if len(ks) == 1 and spec.dim > 1:
        ks = ks + (0,) * (spec.dim - 1)
    if len(ks) != spec.dim:
        raise InvalidArg("need one Hermite index per axis")
    vals = np.ones(spec.shape)
    for kk, m in zip(ks, spec.mesh()):
        vals = vals * hermite_1d(kk, m)
    return GridSignal(spec, vals.astype(complex))


def gaussian(spec: GridSpec, center=None, width: float = 1.0, freq=None) -> GridSignal:
    """L2-normalised ``exp(-pi |x - c|^2 / w^2) exp(2 pi i freq.x)``."""
    c = np.zeros(spec.dim) if center is None else np.asarray(center, dtype=float)
    w0 = np.zeros(spec.dim) if freq is None else np.asarray(freq, dtype=float)
    mesh = spec.mesh()
    r2 = sum((m - ci) ** 2 for m, ci in zip(mesh, c))
    phase = sum(m * wi for m, wi in zip(mesh, w0))
    norm = (2.0 / width ** 2) ** (spec.dim / 4)
    return GridSignal(spec, norm * np.exp(-np.pi * r2 / width ** 2 + 2j * np.pi * phase))


def inner(f: GridSignal, g: GridSignal) -> complex:
    _check_same(f, g)
    return complex(np.vdot(g.values, f.values) * f.spec.cell)


def norm2(f: GridSignal) -> float:
    return float(np.sqrt(np.sum(np.abs(f.values) ** 2) * f.spec.cell))


def phase_invariant_distance(f: GridSignal, g: GridSignal) -> float:
    """``min_{|c|=1} || f/|f| - c g/|g| ||`` (in ``[0, sqrt 2]``)."""
    nf, ng = norm2(f), norm2(g)
    if nf == 0 or ng == 0:
        raise ZeroSignal("distance undefined for a zero signal")
    ip = inner(f, g)
    c = ip / abs(ip) if ip != 0 else 1.0
    # direct difference keeps precision when the signals nearly coincide
    diff = f.values / nf - c * g.values / ng
    return float(min(np.sqrt(np.sum(np.abs(diff) ** 2) * f.spec.cell), math.sqrt(2.0)))


def relative_error(f: GridSignal, g: GridSignal) -> float:
    return norm2(f - g) / norm2(g)


# ---------------------------------------------------------------------------
# file format


def save_signal(path, f: GridSignal, encoding: str = "csv", phase_space: bool = False):
    """Write a JSON header line followed by CSV rows or interleaved float64 data."""
    path = Path(path)
    header = {"dim": f.spec.dim, "n": f.spec.n, "extent": list(f.spec.extent),
              "encoding": encoding}
    if phase_space:
        header["phase_space"] = True
    if encoding == "csv":
        idx = np.indices(f.spec.shape).reshape(f.spec.dim, -1).T
        v = f.values.ravel()
        lines = [json.dumps(header)]
        for k, re, im in zip(idx.tolist(), v.real.tolist(), v.imag.tolist()):
            lines.append(",".join(map(str, k)) + f",{re!r},{im!r}")
        path.write_text("\n".join(lines) + "\n")
    elif encoding == "bin":
        data = np.empty(2 * f.values.size, dtype="<f8")
        data[0::2] = f.values.ravel().real
        data[1::2] = f.values.ravel().imag
        hb = (json.dumps(header) + "\n").encode()
        path.write_bytes(hb + data.tobytes())
    else:
        raise InvalidArg(f"unknown encoding {encoding!r}")


def load_signal(path) -> tuple[GridSignal, dict]:
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    header = json.loads(raw[:nl].decode())
    spec = GridSpec(int(header["dim"]), int(header["n"]), tuple(header["extent"]))
    if header.get("encoding", "csv") == "csv":
        vals = np.zeros(spec.shape, dtype=complex)
        for line in raw[nl + 1:].decode().splitlines():
            if not line.strip():
                continue
            parts = line.split(",")
            k = tuple(int(p) for p in parts[: spec.dim])
            vals[k] = float(parts[spec.dim]) + 1j * float(parts[spec.dim + 1])
    else:
        data = np.frombuffer(raw[nl + 1:], dtype="<f8")
        vals = (data[0::2] + 1j * data[1::2]).reshape(spec.shape)
    return GridSignal(spec, vals), header

