"""Discrete periodic Fourier fields.

A field on the torus ``[0, L)^n`` sampled at ``N`` points per axis is stored by
its full complex Fourier coefficient array in FFT index order (axis index ``i``
holds the integer wavenumber ``m = i`` for ``i < N/2`` and ``m = i - N``
otherwise).  Coefficients are normalized so that the forward transform divides
by ``N**n``; a pure mode ``cos(k.x)`` therefore has coefficient 1/2 at ``+k``
and ``-k``.

The zero mode is always 0, which is the discrete stand-in for working with
distributions modulo constants.  Fields flagged ``is_real`` are Hermitian and
go through real FFTs when brought to physical space.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .errors import (
    BadMagic,
    GridMismatch,
    InvalidDimension,
    NonPowerOfTwo,
    PreconditionError,
    ShapeMismatch,
    ShortRead,
    SnapshotError,
    VersionMismatch,
)

SOLENOIDAL_TOL = 1e-10


@dataclass(frozen=True)
class Grid:
    """Periodic grid with ``N`` points per axis on a box of side ``L``."""

    n: int
    N: int
    L: float

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.n

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(-self.n, 0))

    @property
    def k0(self) -> float:
        """Lowest nonzero wavenumber ``2 pi / L``."""
        return 2.0 * np.pi / self.L

    @property
    def cell_volume(self) -> float:
        return (self.L / self.N) ** self.n

    @property
    def volume(self) -> float:
        return self.L**self.n

    @cached_property
    def m_1d(self) -> np.ndarray:
        return np.fft.fftfreq(self.N, d=1.0 / self.N)

    @cached_property
    def k_axes(self) -> tuple[np.ndarray, ...]:
        """Wavenumber components, each broadcastable against ``shape``."""
        out = []
        for i in range(self.n):
            shp = [1] * self.n
            shp[i] = self.N
            out.append((self.k0 * self.m_1d).reshape(shp))
        return tuple(out)

    @cached_property
    def kmag2(self) -> np.ndarray:
        k2 = np.zeros(self.shape)
        for k in self.k_axes:
            k2 = k2 + k**2
        return k2

    @cached_property
    def kmag(self) -> np.ndarray:
        return np.sqrt(self.kmag2)

    @cached_property
    def nonzero(self) -> np.ndarray:
        mask = np.ones(self.shape, dtype=bool)
        mask[(0,) * self.n] = False
        return mask

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """True where every ``|m_i| <= N/3`` (2/3 rule)."""
        keep = np.abs(self.m_1d) <= self.N / 3.0
        mask = np.ones(self.shape, dtype=bool)
        for i in range(self.n):
            shp = [1] * self.n
            shp[i] = self.N
            mask = mask & keep.reshape(shp)
        return mask

    @property
    def k_max(self) -> float:
        return float(self.kmag.max())

    def coordinates(self) -> tuple[np.ndarray, ...]:
        x = np.arange(self.N) * (self.L / self.N)
        return tuple(np.meshgrid(*([x] * self.n), indexing="ij"))


def _is_power_of_two(N: int) -> bool:
    return N > 0 and (N & (N - 1)) == 0


@lru_cache(maxsize=None)
def _cached_grid(n: int, N: int, L: float) -> Grid:
    return Grid(n, N, L)


def make_grid(n: int, N: int, L: float = 2.0 * np.pi) -> Grid:
    """Build a validated grid.

    ``n = 2`` is accepted for cheap smoke tests only; the analysis this
    package reproduces needs ``n >= 3``.
    """
    if n not in (2, 3):
        raise InvalidDimension(f"dimension must be 2 or 3, got {n}")
    if int(N) != N or not _is_power_of_two(int(N)) or N < 8:
        raise NonPowerOfTwo(f"N must be a power of two >= 8, got {N}")
    if not L > 0:
        raise PreconditionError(f"box length must be positive, got {L}")
    return _cached_grid(int(n), int(N), float(L))


# ---------------------------------------------------------------------------
# Hermitian bookkeeping


def _negate_index(a: np.ndarray, axes) -> np.ndarray:
    """Map index ``i`` to ``(-i) mod N`` along each of ``axes``."""
    for ax in axes:
        a = np.roll(np.flip(a, axis=ax), 1, axis=ax)
    return a


def hermitian_partner(coeffs: np.ndarray, n: int) -> np.ndarray:
    """Return ``conj(c(-k))`` arranged at index ``k``."""
    return np.conj(_negate_index(coeffs, range(-n, 0)))


def hermitian_defect(coeffs: np.ndarray, n: int) -> float:
    """Relative deviation from ``c(-k) = conj(c(k))``."""
    scale = np.max(np.abs(coeffs))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(coeffs - hermitian_partner(coeffs, n))) / scale)


def _full_from_half(half: np.ndarray, N: int, n: int) -> np.ndarray:
    full = np.empty(half.shape[:-1] + (N,), dtype=complex)
    full[..., : N // 2 + 1] = half
    tail = half[..., N // 2 - 1 : 0 : -1]
    full[..., N // 2 + 1 :] = np.conj(_negate_index(tail, range(-n, -1)))
    return full


def to_physical(coeffs: np.ndarray, grid: Grid, real: bool) -> np.ndarray:
    """Samples from coefficients; leading axes are batch axes."""
    scale = grid.N**grid.n
    if real:
        half = coeffs[..., : grid.N // 2 + 1]
        return sfft.irfftn(half, s=grid.shape, axes=grid.axes) * scale
    return sfft.ifftn(coeffs, axes=grid.axes) * scale


def to_spectral(samples: np.ndarray, grid: Grid) -> np.ndarray:
    """Coefficients from samples (forward DFT divided by ``N**n``)."""
    scale = 1.0 / grid.N**grid.n
    if np.isrealobj(samples):
        half = sfft.rfftn(samples, axes=grid.axes) * scale
        return _full_from_half(half, grid.N, grid.n)
    return sfft.fftn(samples, axes=grid.axes) * scale


# ---------------------------------------------------------------------------
# field containers


class _Field:
    grid: Grid
    coeffs: np.ndarray
    is_real: bool

    _batch_dims = 0

    def _finish_init(self, coeffs) -> None:
        c = np.array(coeffs, dtype=complex, copy=True)
        expect = self._expected_shape()
        if c.shape != expect:
            raise ShapeMismatch(f"coefficient shape {c.shape} != {expect}")
        c[(Ellipsis,) + (0,) * self.grid.n] = 0.0
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    def _expected_shape(self) -> tuple[int, ...]:
        raise NotImplementedError

    def with_coeffs(self, coeffs, is_real: bool | None = None):
        return type(self)(self.grid, coeffs, self.is_real if is_real is None else is_real)

    def _check(self, other) -> None:
        if self.grid != other.grid:
            raise GridMismatch(f"{self.grid} vs {other.grid}")
        if self.coeffs.shape != other.coeffs.shape:
            raise ShapeMismatch("field ranks differ")

    def __add__(self, other):
        self._check(other)
        return self.with_coeffs(self.coeffs + other.coeffs, self.is_real and other.is_real)

    def __sub__(self, other):
        self._check(other)
        return self.with_coeffs(self.coeffs - other.coeffs, self.is_real and other.is_real)

    def __neg__(self):
        return self.with_coeffs(-self.coeffs)

    def __mul__(self, scalar):
        if np.iscomplexobj(scalar) and np.imag(scalar) != 0:
            return self.with_coeffs(self.coeffs * scalar, False)
        return self.with_coeffs(self.coeffs * float(np.real(scalar)))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / scalar)

    def physical(self) -> np.ndarray:
        return inverse_transform(self)

    def coeff_norm(self) -> float:
        """Euclidean norm of the coefficient array."""
        return float(np.linalg.norm(self.coeffs))

    def hermitian_defect(self) -> float:
        return hermitian_defect(self.coeffs, self.grid.n)

    def real_part(self):
        """Hermitian part: coefficients of ``Re f`` in physical space."""
        c = 0.5 * (self.coeffs + hermitian_partner(self.coeffs, self.grid.n))
        return self.with_coeffs(c, True)

    def dealiased(self):
        return self.with_coeffs(self.coeffs * self.grid.dealias_mask)


@dataclass(frozen=True, eq=False)
class SpectralField(_Field):
    """Scalar field given by its Fourier coefficients."""

    grid: Grid
    coeffs: np.ndarray
    is_real: bool = True

    def __post_init__(self):
        self._finish_init(self.coeffs)

    def _expected_shape(self):
        return self.grid.shape

    @classmethod
    def zeros(cls, grid: Grid) -> "SpectralField":
        return cls(grid, np.zeros(grid.shape, dtype=complex))


@dataclass(frozen=True, eq=False)
class VectorField(_Field):
    """``n``-component field on a shared grid; ``coeffs[i]`` is component ``i``."""

    grid: Grid
    coeffs: np.ndarray
    is_real: bool = True

    def __post_init__(self):
        self._finish_init(self.coeffs)

    def _expected_shape(self):
        return (self.grid.n,) + self.grid.shape

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(grid, np.zeros((grid.n,) + grid.shape, dtype=complex))

    @classmethod
    def from_components(cls, comps) -> "VectorField":
        comps = list(comps)
        grid = comps[0].grid
        for c in comps:
            if c.grid != grid:
                raise GridMismatch("components live on different grids")
        if len(comps) != grid.n:
            raise ShapeMismatch(f"need {grid.n} components, got {len(comps)}")
        return cls(grid, np.stack([c.coeffs for c in comps]), all(c.is_real for c in comps))

    @property
    def components(self) -> tuple[SpectralField, ...]:
        return tuple(SpectralField(self.grid, c, self.is_real) for c in self.coeffs)

    def divergence(self) -> SpectralField:
        d = sum(1j * k * c for k, c in zip(self.grid.k_axes, self.coeffs))
        return SpectralField(self.grid, d, self.is_real)

    def divergence_defect(self) -> float:
        """``max |k . u(k)| / max |u(k)|``."""
        scale = np.max(np.abs(self.coeffs))
        if scale == 0:
            return 0.0
        kd = sum(k * c for k, c in zip(self.grid.k_axes, self.coeffs))
        return float(np.max(np.abs(kd)) / scale)

    def is_solenoidal(self, tol: float = SOLENOIDAL_TOL) -> bool:
        return self.divergence_defect() <= tol


Field = SpectralField | VectorField


def field_like(grid: Grid, coeffs: np.ndarray, is_real: bool) -> Field:
    if coeffs.ndim == grid.n:
        return SpectralField(grid, coeffs, is_real)
    return VectorField(grid, coeffs, is_real)


# ---------------------------------------------------------------------------
# transforms


def transform(samples: np.ndarray, grid: Grid) -> Field:
    """Forward transform of physical samples.

    Accepts shape ``grid.shape`` (scalar) or ``(n,) + grid.shape`` (vector).
    The sample mean is discarded.
    """
    samples = np.asarray(samples)
    if samples.shape == grid.shape:
        cls = SpectralField
    elif samples.shape == (grid.n,) + grid.shape:
        cls = VectorField
    else:
        raise ShapeMismatch(f"samples of shape {samples.shape} do not match {grid}")
    real = np.isrealobj(samples)
    return cls(grid, to_spectral(samples, grid), real)


def inverse_transform(f: Field) -> np.ndarray:
    """Physical samples (real array when ``f.is_real``)."""
    return to_physical(f.coeffs, f.grid, f.is_real)


def resample(f: Field, grid: Grid) -> Field:
    """Spectral interpolation of ``f`` onto ``grid`` (same ``n`` and ``L``).

    Modes representable on both grids are copied, the Nyquist planes are
    dropped, everything else is zero.
    """
    if grid.n != f.grid.n or grid.L != f.grid.L:
        raise GridMismatch(f"cannot resample {f.grid} onto {grid}")
    if grid == f.grid:
        return f
    M = min(grid.N, f.grid.N) // 2 - 1
    m = np.arange(-M, M + 1)
    src = np.ix_(*([m % f.grid.N] * grid.n))
    dst = np.ix_(*([m % grid.N] * grid.n))
    lead = f.coeffs.shape[: f.coeffs.ndim - grid.n]
    out = np.zeros(lead + grid.shape, dtype=complex)
    out[(Ellipsis,) + dst] = f.coeffs[(Ellipsis,) + src]
    return field_like(grid, out, f.is_real)


# ---------------------------------------------------------------------------
# random fields


@dataclass(frozen=True)
class SpectrumProfile:
    """Amplitude law ``|u(k)| = |k|**alpha`` for ``0 < |k| <= k_cut``, random phases."""

    alpha: float
    k_cut: float
    seed: int = 0


def _canonical_box(grid: Grid, k_cut: float) -> int:
    M = int(np.floor(k_cut / grid.k0 + 1e-9))
    return min(M, grid.N // 2 - 1)


def random_coefficients(grid: Grid, profile: SpectrumProfile, ncomp: int | None) -> np.ndarray:
    """Hermitian random coefficients, independent of ``N``.

    Phases are drawn on the integer box ``|m_i| <= M`` with ``M`` set by the
    cutoff, so the same seed and profile give the same continuous function on
    every grid large enough to hold the box.
    """
    n = grid.n
    if not profile.alpha > -n / 2:
        raise PreconditionError(f"profile exponent must exceed -n/2, got {profile.alpha}")
    if not 0 < profile.k_cut <= np.pi * grid.N / grid.L + 1e-12:
        raise PreconditionError(f"k_cut must lie in (0, pi N / L], got {profile.k_cut}")
    M = _canonical_box(grid, profile.k_cut)
    side = 2 * M + 1
    lead = () if ncomp is None else (ncomp,)
    rng = np.random.default_rng(profile.seed)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=lead + (side,) * n)
    # box index b <-> m = b - M, so flipping an axis negates m
    theta = theta - np.flip(theta, axis=tuple(range(-n, 0)))
    m = np.arange(-M, M + 1)
    kk = np.zeros((side,) * n)
    for i in range(n):
        shp = [1] * n
        shp[i] = side
        kk = kk + (grid.k0 * m.reshape(shp)) ** 2
    kmag = np.sqrt(kk)
    amp = np.zeros_like(kmag)
    inside = (kmag > 0) & (kmag <= profile.k_cut * (1 + 1e-12))
    amp[inside] = kmag[inside] ** profile.alpha
    box = amp * np.exp(1j * theta)
    out = np.zeros(lead + grid.shape, dtype=complex)
    idx = np.ix_(*([m % grid.N] * n))
    out[(Ellipsis,) + idx] = box
    return out


def random_scalar_field(grid: Grid, profile: SpectrumProfile) -> SpectralField:
    return SpectralField(grid, random_coefficients(grid, profile, None), True)


def random_field(grid: Grid, profile: SpectrumProfile, solenoidal: bool = True) -> VectorField:
    """Real random vector field following ``profile``; Leray-projected if ``solenoidal``."""
    v = VectorField(grid, random_coefficients(grid, profile, grid.n), True)
    if solenoidal:
        from .multipliers import leray_project

        v = leray_project(v)
    return v


# ---------------------------------------------------------------------------
# products


def pointwise_product(f: SpectralField, g: SpectralField) -> SpectralField:
    """Dealiased product ``f g`` (2/3 rule before and after, zero mode dropped)."""
    if f.grid != g.grid:
        raise GridMismatch(f"{f.grid} vs {g.grid}")
    grid = f.grid
    mask = grid.dealias_mask
    real = f.is_real and g.is_real
    a = to_physical(f.coeffs * mask, grid, real)
    b = to_physical(g.coeffs * mask, grid, real)
    c = to_spectral(a * b, grid) * mask
    return SpectralField(grid, c, real)


def div_tensor(u: VectorField, v: VectorField | None = None) -> VectorField:
    """Dealiased ``div(u (x) u)`` or, with ``v``, ``div(u (x) v + v (x) u)``.

    Component ``i`` is ``sum_j d_j T_{ji}``; both tensors are symmetric so only
    the upper triangle is transformed.
    """
    grid = u.grid
    n = grid.n
    mask = grid.dealias_mask
    if v is not None and v.grid != grid:
        raise GridMismatch(f"{u.grid} vs {v.grid}")
    real = u.is_real and (v is None or v.is_real)
    up = to_physical(u.coeffs * mask, grid, real)
    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    if v is None:
        prods = np.stack([up[i] * up[j] for i, j in pairs])
    else:
        vp = to_physical(v.coeffs * mask, grid, real)
        prods = np.stack([up[i] * vp[j] + vp[i] * up[j] for i, j in pairs])
    T = to_spectral(prods, grid) * mask
    entry = {}
    for idx, (i, j) in enumerate(pairs):
        entry[(i, j)] = entry[(j, i)] = T[idx]
    k = grid.k_axes
    out = np.stack([sum(1j * k[j] * entry[(j, i)] for j in range(n)) for i in range(n)])
    return VectorField(grid, out, real)


# ---------------------------------------------------------------------------
# snapshots
#
# Layout (little endian): b"NSBF", u32 version, u8 ndim, u8 ncomponents,
# u64 N, f64 L, then ncomponents * N**ndim complex coefficients stored as
# interleaved f64 (re, im).  Coefficients are the full spectrum in FFT index
# order, row major, components outermost.

MAGIC = b"NSBF"
VERSION = 1
_HEADER = struct.Struct("<4sIBBQd")


def save_snapshot(f: Field, path) -> None:
    grid = f.grid
    ncomp = 1 if isinstance(f, SpectralField) else grid.n
    header = _HEADER.pack(MAGIC, VERSION, grid.n, ncomp, grid.N, grid.L)
    data = np.ascontiguousarray(f.coeffs, dtype="<c16").tobytes()
    try:
        Path(path).write_bytes(header + data)
    except OSError as exc:
        raise SnapshotError(f"cannot write {path}: {exc}") from exc


def load_snapshot(path) -> Field:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise SnapshotError(f"cannot read {path}: {exc}") from exc
    if len(raw) < 4 or raw[:4] != MAGIC:
        raise BadMagic(f"{path} is not a snapshot file")
    if len(raw) < _HEADER.size:
        raise ShortRead(f"{path}: truncated header")
    _, version, ndim, ncomp, N, L = _HEADER.unpack_from(raw)
    if version != VERSION:
        raise VersionMismatch(f"{path}: version {version}, expected {VERSION}")
    grid = make_grid(ndim, N, L)
    count = ncomp * N**ndim
    body = raw[_HEADER.size :]
    if len(body) != 16 * count:
        raise ShortRead(f"{path}: expected {16 * count} data bytes, found {len(body)}")
    coeffs = np.frombuffer(body, dtype="<c16").astype(complex)
    real = hermitian_defect(coeffs.reshape((ncomp,) + grid.shape), ndim) <= 1e-12
    if ncomp == 1:
        return SpectralField(grid, coeffs.reshape(grid.shape), real)
    if ncomp != ndim:
        raise SnapshotError(f"{path}: {ncomp} components on a {ndim}-d grid")
    return VectorField(grid, coeffs.reshape((ncomp,) + grid.shape), real)
