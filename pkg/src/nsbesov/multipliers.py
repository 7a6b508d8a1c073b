"""Fourier multipliers on mean-zero periodic fields.

On the grid the dyadic definition ``m(D) f = sum_j F^-1[m phi(./2**j) f^]``
telescopes to plain multiplication ``f^(k) -> m(k) f^(k)`` because the blocks
sum to one at every nonzero wavenumber.  Both evaluation paths are available
(``path="pointwise"`` is the default, ``path="dyadic"`` sums block by block)
so they can be cross-checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConditionBViolation, NegativeTime, PreconditionError, SectorViolation, SymbolSingular
from .norms import BesovIndex, besov_norm, make_dyadic_partition
from .spectral import Field, Grid, VectorField

DEFAULT_OMEGA = math.pi / 6


@dataclass(frozen=True)
class MultiplierSymbol:
    """Scalar symbol ``xi -> m(xi)``.

    ``evaluator`` receives the tuple of wavenumber components (arrays that
    broadcast to the grid shape) and returns the symbol values.  It is only
    used at nonzero wavenumbers.
    """

    evaluator: Callable[[tuple[np.ndarray, ...]], np.ndarray]
    degree: float | None = None
    name: str = "m"
    real: bool = False


def symbol_values(sym: MultiplierSymbol, grid: Grid) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        vals = np.broadcast_to(np.asarray(sym.evaluator(grid.k_axes)), grid.shape).astype(complex)
    vals = np.array(vals)
    vals[(0,) * grid.n] = 0.0
    if not np.all(np.isfinite(vals[grid.nonzero])):
        raise SymbolSingular(f"symbol {sym.name} is not finite at some nonzero wavenumber")
    return vals


def _kmag(xi) -> np.ndarray:
    return np.sqrt(sum(x * x for x in xi))


def power_symbol(a: float) -> MultiplierSymbol:
    """``|xi|**a``."""
    return MultiplierSymbol(lambda xi: _kmag(xi) ** a, degree=a, name=f"|xi|^{a}", real=True)


def _apply_values(vals: np.ndarray, f: Field, real_symbol: bool, path: str) -> Field:
    if path == "pointwise":
        out = f.coeffs * vals
    elif path == "dyadic":
        part = make_dyadic_partition(f.grid)
        out = np.zeros_like(f.coeffs)
        for w in part.weights:
            out = out + vals * w * f.coeffs
    else:
        raise PreconditionError(f"unknown evaluation path {path!r}")
    return f.with_coeffs(out, f.is_real and real_symbol)


def _real_symbol(vals: np.ndarray, grid: Grid) -> bool:
    from .spectral import hermitian_partner

    # a symbol keeps real fields real when m(-k) = conj(m(k)); the Nyquist
    # planes are their own mirror image and are left out of the check
    inner = np.abs(grid.m_1d) < grid.N // 2
    sel = np.ix_(*([inner] * grid.n))
    diff = (vals - hermitian_partner(vals, grid.n))[sel]
    return bool(np.max(np.abs(diff)) <= 1e-14 * (np.abs(vals).max() + 1))


def apply_multiplier(sym: MultiplierSymbol, f: Field, path: str = "pointwise") -> Field:
    """Apply ``m(D)`` to a scalar or (componentwise) vector field."""
    vals = symbol_values(sym, f.grid)
    real = sym.real or _real_symbol(vals, f.grid)
    return _apply_values(vals, f, real, path)


def leray_project(v: VectorField) -> VectorField:
    """Projection onto divergence-free fields, symbol ``delta_ij - xi_i xi_j / |xi|**2``."""
    grid = v.grid
    k = grid.k_axes
    k2 = np.where(grid.nonzero, grid.kmag2, 1.0)
    kdotv = sum(ki * ci for ki, ci in zip(k, v.coeffs)) / k2
    out = np.stack([v.coeffs[i] - k[i] * kdotv for i in range(grid.n)])
    return VectorField(grid, out, v.is_real)


def frac_laplacian(f: Field, a: float) -> Field:
    """``(-Delta)**(a/2)``: multiply by ``|k|**a`` (zero mode stays 0)."""
    grid = f.grid
    kk = np.where(grid.nonzero, grid.kmag, 1.0)
    return f.with_coeffs(f.coeffs * kk**a)


def laplacian(f: Field) -> Field:
    """``Delta f``."""
    return f.with_coeffs(-f.coeffs * f.grid.kmag2)


@dataclass(frozen=True)
class SectorPoint:
    """``lam`` in ``S_omega = {z != 0 : |arg z| >= omega}``."""

    lam: complex
    omega: float = DEFAULT_OMEGA

    def __post_init__(self):
        lam = complex(self.lam)
        object.__setattr__(self, "lam", lam)
        if not 0 < self.omega < math.pi / 2:
            raise SectorViolation(f"sector angle must lie in (0, pi/2), got {self.omega}")
        if lam == 0 or abs(np.angle(lam)) < self.omega - 1e-12:
            raise SectorViolation(f"lambda={lam} is outside S_omega (omega={self.omega})")

    @classmethod
    def polar(cls, r: float, angle: float, omega: float = DEFAULT_OMEGA) -> "SectorPoint":
        return cls(r * complex(math.cos(angle), math.sin(angle)), omega)


def resolvent_values(grid: Grid, lam: complex, b: float = 2.0) -> np.ndarray:
    """``(lam - |k|**2)**(-b/2)`` with the principal branch; 0 at ``k = 0``."""
    base = complex(lam) - grid.kmag2
    if b == 2.0:
        vals = 1.0 / base
    else:
        vals = np.power(base.astype(complex), -b / 2.0)
    vals = np.array(vals, dtype=complex)
    vals[(0,) * grid.n] = 0.0
    return vals


def _as_point(pt) -> SectorPoint:
    return pt if isinstance(pt, SectorPoint) else SectorPoint(pt)


def resolvent_laplacian(f: Field, pt: SectorPoint, b: float = 2.0) -> Field:
    """``(lam + Delta)**(-b/2) f``; for ``b = 2`` this is ``R(lam) = (lam + Delta)**-1``."""
    pt = _as_point(pt)
    if b < 0:
        raise PreconditionError(f"b must be nonnegative, got {b}")
    vals = resolvent_values(f.grid, pt.lam, b)
    return f.with_coeffs(f.coeffs * vals, f.is_real and pt.lam.imag == 0 and (b == 2.0 or pt.lam.real > 0))


@dataclass
class GainReport:
    ratio: float
    lhs: float
    rhs: float
    exponent: float


def resolvent_lp_gain(
    f: Field, pt: SectorPoint, b: float, p: float, p0: float, s: float = 0.0, q: float = math.inf
) -> tuple[Field, GainReport]:
    """Resolvent power together with its ``B^s_{p,q} -> B^s_{p0,q}`` ratio.

    The ratio compares ``||(lam + Delta)**(-b/2) f||_{B^s_{p0,q}}`` with
    ``|lam|**(-(b - n (1/p - 1/p0))/2) ||f||_{B^s_{p,q}}``.
    """
    pt = _as_point(pt)
    n = f.grid.n
    if not p0 > p:
        raise PreconditionError(f"need p0 > p, got p={p}, p0={p0}")
    if b < n / p:
        raise ConditionBViolation(f"need b >= n/p = {n / p}, got b={b}")
    out = resolvent_laplacian(f, pt, b)
    exponent = -(b - n * (1.0 / p - 1.0 / p0)) / 2.0
    lhs = besov_norm(out, BesovIndex(s, p0, q)).value
    rhs = abs(pt.lam) ** exponent * besov_norm(f, BesovIndex(s, p, q)).value
    return out, GainReport(lhs / rhs if rhs else math.nan, lhs, rhs, exponent)


def composition(f: Field, pt: SectorPoint, a: float, b: float, order: str = "symbol") -> Field:
    """``|xi|**a (lam - |xi|**2)**(-b/2)`` applied to ``f``.

    ``order`` selects the symbol product (``"symbol"``) or one of the two
    operator compositions (``"power_first"``, ``"resolvent_first"``).
    """
    pt = _as_point(pt)
    if not 0 <= a <= b:
        raise PreconditionError(f"need 0 <= a <= b, got a={a}, b={b}")
    if order == "symbol":
        kk = np.where(f.grid.nonzero, f.grid.kmag, 1.0)
        vals = kk**a * resolvent_values(f.grid, pt.lam, b)
        return f.with_coeffs(f.coeffs * vals, f.is_real and pt.lam.imag == 0)
    if order == "power_first":
        return resolvent_laplacian(frac_laplacian(f, a), pt, b)
    if order == "resolvent_first":
        return frac_laplacian(resolvent_laplacian(f, pt, b), a)
    raise PreconditionError(f"unknown order {order!r}")


def heat_values(grid: Grid, t: float) -> np.ndarray:
    return np.exp(-t * grid.kmag2)


def heat_semigroup(f: Field, t: float) -> Field:
    """``e^{t Delta} f``."""
    if t < 0:
        raise NegativeTime(f"t must be nonnegative, got {t}")
    return f.with_coeffs(f.coeffs * heat_values(f.grid, t))
