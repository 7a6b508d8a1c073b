"""Littlewood-Paley blocks, homogeneous Besov norms and Lorentz quasinorms.

The dyadic partition uses ``phi(xi) = chi(|xi|) - chi(2|xi|)`` with the smooth
step ``chi = 1`` on ``[0, 1]``, ``0`` on ``[2, inf)`` and
``g(2 - r) / (g(2 - r) + g(r - 1))``, ``g(x) = exp(-1/x)``, in between.  The
blocks ``phi(k / 2**j)`` telescope to one at every nonzero wavenumber.

Lebesgue norms are grid quadratures of ``|f|**p`` with cell volume
``(L/N)**n``; vector fields use the pointwise Euclidean modulus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ExponentOutOfRange, PreconditionError
from .spectral import (
    Field,
    Grid,
    SpectralField,
    SpectrumProfile,
    VectorField,
    field_like,
    pointwise_product,
    random_coefficients,
    to_physical,
)


def smooth_step(r) -> np.ndarray:
    """C-infinity cutoff: 1 for ``r <= 1``, 0 for ``r >= 2``, monotone between."""
    r = np.asarray(r, dtype=float)
    out = np.where(r <= 1.0, 1.0, 0.0)
    mid = (r > 1.0) & (r < 2.0)
    if np.any(mid):
        a = np.exp(-1.0 / (2.0 - r[mid]))
        b = np.exp(-1.0 / (r[mid] - 1.0))
        out[mid] = a / (a + b)
    return out


def phi(xi_abs) -> np.ndarray:
    """Annular bump supported in ``1/2 <= |xi| <= 2``."""
    xi_abs = np.asarray(xi_abs, dtype=float)
    return smooth_step(xi_abs) - smooth_step(2.0 * xi_abs)


@dataclass(frozen=True, eq=False)
class DyadicPartition:
    """Weights ``phi(k / 2**j)`` on a grid for every annulus meeting its wavenumbers."""

    grid: Grid
    js: tuple[int, ...]
    weights: tuple[np.ndarray, ...]

    def weight(self, j: int) -> np.ndarray:
        return self.weights[self.js.index(j)]

    @property
    def j_min(self) -> int:
        return self.js[0]

    @property
    def j_max(self) -> int:
        return self.js[-1]


@lru_cache(maxsize=16)
def make_dyadic_partition(grid: Grid) -> DyadicPartition:
    kvals = np.unique(grid.kmag[grid.nonzero])
    kmin, kmax = kvals[0], kvals[-1]
    js = []
    for j in range(math.floor(math.log2(kmin)) - 2, math.ceil(math.log2(kmax)) + 3):
        lo, hi = 2.0 ** (j - 1), 2.0 ** (j + 1)
        i = np.searchsorted(kvals, lo)
        if i < len(kvals) and kvals[i] <= hi:
            js.append(j)
    weights = []
    for j in js:
        w = phi(grid.kmag / 2.0**j)
        w[(0,) * grid.n] = 0.0
        w.flags.writeable = False
        weights.append(w)
    return DyadicPartition(grid, tuple(js), tuple(weights))


@dataclass(frozen=True, eq=False)
class DyadicDecomposition:
    j_min: int
    j_max: int
    blocks: list

    def reconstruct(self) -> Field:
        out = self.blocks[0]
        for b in self.blocks[1:]:
            out = out + b
        return out


def dyadic_decompose(f: Field) -> DyadicDecomposition:
    """Split ``f`` into its Littlewood-Paley blocks ``phi_j(D) f``."""
    part = make_dyadic_partition(f.grid)
    blocks = [f.with_coeffs(f.coeffs * w) for w in part.weights]
    return DyadicDecomposition(part.j_min, part.j_max, blocks)


# ---------------------------------------------------------------------------
# Lebesgue and Lorentz


def modulus(f: Field) -> np.ndarray:
    """Pointwise modulus on the grid (Euclidean for vector fields)."""
    x = to_physical(f.coeffs, f.grid, f.is_real)
    if isinstance(f, VectorField):
        return np.sqrt(np.sum(np.abs(x) ** 2, axis=0))
    return np.abs(x)


def _lp_of_modulus(a: np.ndarray, p: float, cell: float) -> float:
    if math.isinf(p):
        return float(a.max())
    return float((np.sum(a**p) * cell) ** (1.0 / p))


def lp_norm(f: Field, p: float) -> float:
    """``(sum_x |f(x)|**p (L/N)**n)**(1/p)``; the grid maximum for ``p = inf``."""
    if not p >= 1:
        raise ExponentOutOfRange(f"p must lie in [1, inf], got {p}")
    return _lp_of_modulus(modulus(f), p, f.grid.cell_volume)


def weak_lp_of_samples(a: np.ndarray, p: float, cell: float) -> float:
    v = np.sort(np.ravel(a))[::-1]
    k = np.arange(1, v.size + 1, dtype=float)
    cand = v * (k * cell) ** (1.0 / p)
    # re-evaluate the near-maximal candidates in scalar arithmetic so the
    # result does not depend on the vectorized pow rounding
    top = np.flatnonzero(cand >= cand.max() * (1 - 1e-12))
    return max(float(v[i]) * (float(i + 1) * cell) ** (1.0 / p) for i in top)


def weak_lp_norm(f: Field, p: float) -> float:
    """Weak-``L^p`` quasinorm of the discrete measure with cells ``(L/N)**n``.

    With samples sorted as ``|f|_(1) >= |f|_(2) >= ...`` the supremum of
    ``lam * |{|f| > lam}|**(1/p)`` is ``max_k |f|_(k) (k (L/N)**n)**(1/p)``.
    """
    if not (1 <= p < math.inf):
        raise ExponentOutOfRange(f"p must lie in [1, inf), got {p}")
    return weak_lp_of_samples(modulus(f), p, f.grid.cell_volume)


# ---------------------------------------------------------------------------
# Besov


def critical_s(n: int, p: float) -> float:
    """Scaling-critical smoothness ``-1 + n/p``."""
    return -1.0 + n / p


@dataclass(frozen=True)
class BesovIndex:
    s: float
    p: float
    q: float

    def __post_init__(self):
        if not self.p >= 1 or not self.q >= 1:
            raise ExponentOutOfRange(f"p and q must be >= 1, got p={self.p}, q={self.q}")

    def banach(self, n: int) -> bool:
        limit = n / self.p
        return self.s < limit or (self.q == 1 and self.s <= limit)

    @classmethod
    def critical(cls, n: int, p: float, q: float = math.inf) -> "BesovIndex":
        return cls(critical_s(n, p), p, q)


@dataclass
class NormReport:
    value: float
    per_block: list[tuple[int, float]]
    block_lp: list[float]
    warnings: list[str] = field(default_factory=list)


def _lq(values: np.ndarray, q: float) -> float:
    if values.size == 0:
        return 0.0
    if math.isinf(q):
        return float(values.max())
    return float(np.sum(values**q) ** (1.0 / q))


def block_lp_norms(f: Field, p: float) -> tuple[tuple[int, ...], np.ndarray]:
    """``||phi_j(D) f||_{L^p}`` for every block of the grid partition.

    For ``p = 2`` the grid quadrature equals ``L**n sum |c|**2`` exactly
    (discrete Parseval), which avoids one FFT per block.
    """
    part = make_dyadic_partition(f.grid)
    grid = f.grid
    if p == 2:
        energy = np.abs(f.coeffs) ** 2
        if energy.ndim > grid.n:
            energy = energy.sum(axis=0)
        vals = np.array([math.sqrt(grid.volume * float(np.sum(w * w * energy))) for w in part.weights])
        return part.js, vals
    vals = []
    for w in part.weights:
        blk = field_like(grid, f.coeffs * w, f.is_real)
        vals.append(_lp_of_modulus(modulus(blk), p, grid.cell_volume))
    return part.js, np.array(vals)


def besov_norm(f: Field, idx: BesovIndex) -> NormReport:
    """Homogeneous Besov norm ``|| {2**(j s) ||phi_j(D) f||_p}_j ||_{l^q}``."""
    js, lp = block_lp_norms(f, idx.p)
    weighted = np.array([2.0 ** (j * idx.s) for j in js]) * lp
    warnings = []
    if not idx.banach(f.grid.n):
        warnings.append(f"{idx} lies outside the Banach range for n={f.grid.n}")
    return NormReport(
        value=_lq(weighted, idx.q),
        per_block=[(j, float(w)) for j, w in zip(js, weighted)],
        block_lp=[float(v) for v in lp],
        warnings=warnings,
    )


def besov(f: Field, s: float, p: float = 2.0, q: float = math.inf) -> float:
    """Shorthand for ``besov_norm(f, BesovIndex(s, p, q)).value``."""
    return besov_norm(f, BesovIndex(s, p, q)).value


# ---------------------------------------------------------------------------
# K-functional


def k_functional(f: Field, lam, p0: float, p1: float, thresholds=None):
    """Frequency-threshold upper bound for ``K(lam, f; L^p0, L^p1)``.

    Minimizes ``||sum_{j >= t} phi_j f||_p0 + lam ||sum_{j < t} phi_j f||_p1``
    over thresholds ``t``; by default every ``t`` from ``j_min`` to
    ``j_max + 1`` (the two ends are the trivial splits).  ``lam`` may be an
    array, in which case an array is returned.
    """
    if not (1 < p0 < p1 <= math.inf):
        raise ExponentOutOfRange(f"need 1 < p0 < p1 <= inf, got {p0}, {p1}")
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
    if np.any(lam_arr <= 0):
        raise PreconditionError("lambda must be positive")
    part = make_dyadic_partition(f.grid)
    ts = list(part.js) + [part.j_max + 1] if thresholds is None else sorted(thresholds)
    cell = f.grid.cell_volume
    high_norm, low_norm = [], []
    for t in ts:
        low_w = sum((w for j, w in zip(part.js, part.weights) if j < t), np.zeros(f.grid.shape))
        low = field_like(f.grid, f.coeffs * low_w, f.is_real)
        high = f - low
        high_norm.append(_lp_of_modulus(modulus(high), p0, cell))
        low_norm.append(_lp_of_modulus(modulus(low), p1, cell))
    high_norm = np.array(high_norm)
    low_norm = np.array(low_norm)
    K = np.min(high_norm[None, :] + lam_arr[:, None] * low_norm[None, :], axis=1)
    return float(K[0]) if np.ndim(lam) == 0 else K


# ---------------------------------------------------------------------------
# ensemble verifiers


@dataclass
class ConstantStats:
    """Summary of an ensemble of empirical ratios."""

    ratios: np.ndarray
    max: float
    median: float
    min: float
    skipped: int = 0

    @classmethod
    def from_ratios(cls, ratios, skipped: int = 0) -> "ConstantStats":
        r = np.asarray(ratios, dtype=float)
        if r.size == 0:
            return cls(r, math.nan, math.nan, math.nan, skipped)
        return cls(r, float(r.max()), float(np.median(r)), float(r.min()), skipped)


DEFAULT_ENSEMBLE_ALPHA = 0.0
DEFAULT_ENSEMBLE_MODES = 5


def ensemble_seeds(seed: int, count: int) -> list[int]:
    return [int(x) for x in np.random.SeedSequence(seed).generate_state(count)]


def _ensemble_profile(grid: Grid, seed: int, alpha, k_cut) -> SpectrumProfile:
    if k_cut is None:
        k_cut = DEFAULT_ENSEMBLE_MODES * grid.k0
    return SpectrumProfile(DEFAULT_ENSEMBLE_ALPHA if alpha is None else alpha, k_cut, seed)


def embedding_exponent(n: int, p: float, s: float) -> float:
    return n * p / (n - s * p)


def verify_embedding(
    ensemble_size: int,
    idx: BesovIndex,
    seed: int,
    grid: Grid,
    alpha: float | None = None,
    k_cut: float | None = None,
) -> ConstantStats:
    """Ratios ``||f||_{L^{l,inf}} / ||f||_{B^s_{p,inf}}`` with ``l = np/(n - s p)``.

    For ``s < 0`` the reverse embedding is exercised and the ratio is inverted.
    """
    n, p, s = grid.n, idx.p, idx.s
    if not (1 < p < math.inf):
        raise ExponentOutOfRange(f"need 1 < p < inf, got {p}")
    if not (-n * (1 - 1 / p) <= s < n / p) or s == 0:
        raise ExponentOutOfRange(f"need -n/p' <= s < n/p and s != 0, got s={s}")
    ell = embedding_exponent(n, p, s)
    bidx = BesovIndex(s, p, math.inf)
    ratios, skipped = [], 0
    for sd in ensemble_seeds(seed, ensemble_size):
        f = SpectralField(grid, random_coefficients(grid, _ensemble_profile(grid, sd, alpha, k_cut), None), True)
        b = besov_norm(f, bidx).value
        w = weak_lp_norm(f, ell)
        if b == 0 or w == 0:
            skipped += 1
            continue
        ratios.append(w / b if s > 0 else b / w)
    return ConstantStats.from_ratios(ratios, skipped)


def product_ratio(g: SpectralField, h: SpectralField, p: float, s: float) -> float:
    """``||g h||_{B^{s-1}_{p,inf}} / (||g||_{L^{n,inf}} ||h||_{B^s_{p,inf}})``; nan if undefined."""
    n = g.grid.n
    den = weak_lp_norm(g, n) * besov(h, s, p)
    if den == 0:
        return math.nan
    return besov(pointwise_product(g, h), s - 1, p) / den


def verify_product(
    ensemble_size: int,
    p: float,
    s: float,
    seed: int,
    grid: Grid,
    alpha: float | None = None,
    k_cut: float | None = None,
) -> ConstantStats:
    """Ensemble of product-estimate ratios over random scalar pairs."""
    n = grid.n
    if n < 3 or not (n / 2 < p < n) or not (0 < s < 1):
        raise ExponentOutOfRange(f"need n >= 3, n/2 < p < n, 0 < s < 1 (n={n}, p={p}, s={s})")
    seeds = ensemble_seeds(seed, 2 * ensemble_size)
    ratios, skipped = [], 0
    for i in range(ensemble_size):
        g = SpectralField(grid, random_coefficients(grid, _ensemble_profile(grid, seeds[2 * i], alpha, k_cut), None))
        h = SpectralField(grid, random_coefficients(grid, _ensemble_profile(grid, seeds[2 * i + 1], alpha, k_cut), None))
        r = product_ratio(g, h, p, s)
        if math.isnan(r):
            skipped += 1
        else:
            ratios.append(r)
    return ConstantStats.from_ratios(ratios, skipped)
