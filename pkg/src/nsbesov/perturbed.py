"""The linearized operator ``A = -Delta + B`` around a stationary flow ``U``.

``B[w] = P div(U (x) w + w (x) U)``.  The resolvent is summed as a Neumann
series in ``R(lam) B`` with ``R(lam) = (lam + Delta)**-1``, the semigroup
``e^{-tA}`` is available both as a Dunford contour integral and through an
exponential time-differencing stepper, and the Duhamel integral is computed
with graded Gauss-Legendre panels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .errors import (
    ExponentOutOfRange,
    GridMismatch,
    ImaginaryResidue,
    NegativeTime,
    NeumannDivergence,
    PreconditionError,
    QuadratureNotConverged,
    TailBoundViolation,
    ThetaOutOfRange,
    UnstableStep,
)
from .multipliers import DEFAULT_OMEGA, SectorPoint, frac_laplacian, heat_semigroup, leray_project, resolvent_values
from .norms import ConstantStats, besov, critical_s, weak_lp_norm
from .spectral import Grid, VectorField, div_tensor, hermitian_partner

DEFAULT_NEUMANN_TOL = 1e-10
DEFAULT_MAX_TERMS = 200


# ---------------------------------------------------------------------------
# background and the operators B, A, C_theta


@dataclass(frozen=True, eq=False)
class Background:
    """Stationary background flow ``U`` with its cached ``L^{n,inf}`` norm."""

    U: VectorField
    check_solenoidal: bool = True

    def __post_init__(self):
        if self.check_solenoidal and not self.U.is_solenoidal():
            raise PreconditionError("background U must be divergence free")

    @classmethod
    def zero(cls, grid: Grid) -> "Background":
        return cls(VectorField.zeros(grid))

    @property
    def grid(self) -> Grid:
        return self.U.grid

    @cached_property
    def is_zero(self) -> bool:
        return not np.any(self.U.coeffs)

    @cached_property
    def weak_ln_norm(self) -> float:
        return weak_lp_norm(self.U, self.U.grid.n)

    def scaled(self, c: float) -> "Background":
        return Background(self.U * c, self.check_solenoidal)


def _same_grid(w: VectorField, bg: Background) -> None:
    if w.grid != bg.grid:
        raise GridMismatch(f"{w.grid} vs background {bg.grid}")


def apply_B(w: VectorField, bg: Background) -> VectorField:
    """``P div(U (x) w + w (x) U)``."""
    _same_grid(w, bg)
    if bg.is_zero:
        return w.with_coeffs(np.zeros_like(w.coeffs))
    return leray_project(div_tensor(bg.U, w))


def apply_A(w: VectorField, bg: Background) -> VectorField:
    """``-Delta w + B[w]``."""
    lap = w.with_coeffs(w.coeffs * w.grid.kmag2)
    return lap + apply_B(w, bg)


def apply_C_theta(w: VectorField, bg: Background, theta: float) -> VectorField:
    """``(-Delta)**(-(2 - theta)/2) B (-Delta)**(-theta/2)``."""
    if not 0 <= theta <= 2:
        raise ThetaOutOfRange(f"theta must lie in [0, 2], got {theta}")
    return frac_laplacian(apply_B(frac_laplacian(w, -theta), bg), -(2 - theta))


def crit_norm(f, p: float = 2.0, shift: float = 0.0) -> float:
    """``||f||`` in ``B^{s(p) + shift}_{p,inf}``."""
    return besov(f, critical_s(f.grid.n, p) + shift, p)


# ---------------------------------------------------------------------------
# resolvent


@dataclass
class NeumannReport:
    terms_used: int
    last_term_norm: float
    converged: bool
    term_norms: list[float] = field(default_factory=list)

    @property
    def contraction_estimate(self) -> float:
        """Geometric mean ratio of the last few term norms."""
        t = [x for x in self.term_norms if x > 0]
        if len(t) < 2:
            return 0.0
        k = min(4, len(t) - 1)
        return (t[-1] / t[-1 - k]) ** (1.0 / k)


def _as_point(pt) -> SectorPoint:
    return pt if isinstance(pt, SectorPoint) else SectorPoint(pt)


def resolvent_A(
    f: VectorField,
    pt,
    bg: Background,
    tol: float = DEFAULT_NEUMANN_TOL,
    max_terms: int = DEFAULT_MAX_TERMS,
    p: float = 2.0,
) -> tuple[VectorField, NeumannReport]:
    """``R_A(lam) f = sum_l [R(lam) B]**l R(lam) f``.

    Terms are summed until one falls below ``tol`` relative to the first,
    measured in ``B^{s(p)}_{p,inf}``.  Three consecutive growing terms raise
    ``NeumannDivergence``.
    """
    pt = _as_point(pt)
    _same_grid(f, bg)
    rvals = resolvent_values(f.grid, pt.lam, 2.0)
    term = f.with_coeffs(f.coeffs * rvals, False)
    total = term.coeffs.copy()
    if bg.is_zero or not np.any(f.coeffs):
        return term, NeumannReport(1, 0.0, True, [crit_norm(term, p)])
    first = crit_norm(term, p)
    norms = [first]
    growing = 0
    for ell in range(1, max_terms):
        term = term.with_coeffs(apply_B(term, bg).coeffs * rvals, False)
        total += term.coeffs
        nrm = crit_norm(term, p)
        norms.append(nrm)
        growing = growing + 1 if nrm > norms[-2] else 0
        if growing >= 3:
            raise NeumannDivergence(f"Neumann terms grew 3 times in a row at lam={pt.lam} (|U| too large)")
        if nrm <= tol * first:
            return f.with_coeffs(total, False), NeumannReport(ell + 1, nrm / first, True, norms)
    raise NeumannDivergence(f"Neumann series not converged after {max_terms} terms at lam={pt.lam}")


def resolvent_residual(f: VectorField, g: VectorField, pt, bg: Background, p: float = 2.0) -> float:
    """Relative residual ``||(lam - A) g - f|| / ||f||`` in ``B^{s(p)-2}_{p,inf}``."""
    lam = _as_point(pt).lam
    r = g * lam - apply_A(g, bg) - f
    return crit_norm(r, p, -2.0) / crit_norm(f, p, -2.0)


# ---------------------------------------------------------------------------
# contour semigroup


@dataclass(frozen=True)
class ContourSpec:
    """Discretization of ``Gamma``: rays ``r e^{+-i theta}``, ``r >= r0``, joined by the arc ``r0 e^{i psi}``, ``|psi| >= theta``.

    ``r_max=None`` picks ``max(50, 40/t)`` at evaluation time.  The arc
    radius ``r0`` defaults to ``min(1, 1/t)``: any radius gives the same
    integral, and shrinking it for large ``t`` keeps ``|e^{-t lam}|`` on the
    arc below ``e`` so the sum does not lose digits to cancellation.
    """

    theta: float = math.pi / 3
    nodes_arc: int = 64
    nodes_ray: int = 96
    r_max: float | None = None
    omega: float = DEFAULT_OMEGA
    arc_radius: float | None = None

    def __post_init__(self):
        if self.arc_radius is not None and not 0 < self.arc_radius <= 1:
            raise PreconditionError(f"arc radius must lie in (0, 1], got {self.arc_radius}")
        if not self.omega < self.theta < math.pi / 2:
            raise ThetaOutOfRange(f"contour angle must lie in (omega, pi/2) = ({self.omega}, pi/2), got {self.theta}")
        if self.nodes_arc < 8 or self.nodes_ray < 8 or self.nodes_arc % 2:
            raise PreconditionError("need at least 8 nodes per piece and an even arc count")
        if self.r_max is not None and self.r_max < 10:
            raise PreconditionError(f"r_max must be >= 10, got {self.r_max}")

    def radius(self, t: float) -> float:
        return self.r_max if self.r_max is not None else max(50.0, 40.0 / t)

    def arc(self, t: float) -> float:
        return self.arc_radius if self.arc_radius is not None else min(1.0, 1.0 / t)

    def refined(self) -> "ContourSpec":
        return ContourSpec(self.theta, 2 * self.nodes_arc, 2 * self.nodes_ray, self.r_max, self.omega, self.arc_radius)

    def upper_nodes(self, t: float) -> tuple[np.ndarray, np.ndarray, int]:
        """Nodes ``lam`` and weights ``w`` (``dlam`` included) on the upper half of ``Gamma``.

        Orientation is counterclockwise around the spectrum: the upper ray is
        walked inward, then the arc from ``theta`` to ``pi``.  Returns the
        nodes, weights and the number of ray nodes (which come first).
        """
        x, wx = np.polynomial.legendre.leggauss(self.nodes_ray)
        r0 = self.arc(t)
        umin, umax = math.log(r0), math.log(self.radius(t))
        u = umin + 0.5 * (umax - umin) * (x + 1)
        lam_ray = np.exp(u) * np.exp(1j * self.theta)
        w_ray = -0.5 * (umax - umin) * wx * lam_ray
        y, wy = np.polynomial.legendre.leggauss(self.nodes_arc // 2)
        half = 0.5 * (math.pi - self.theta)
        psi = self.theta + half * (y + 1)
        lam_arc = r0 * np.exp(1j * psi)
        w_arc = half * wy * 1j * lam_arc
        return np.concatenate([lam_ray, lam_arc]), np.concatenate([w_ray, w_arc]), self.nodes_ray

    def full_nodes(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        lam_u, w_u, _ = self.upper_nodes(t)
        # lower half is the mirror image walked the other way
        return np.concatenate([lam_u, np.conj(lam_u)]), np.concatenate([w_u, -np.conj(w_u)])


@dataclass
class ContourReport:
    tail_bound: float
    nodes: int
    max_neumann_terms: int
    imaginary_residue: float


def semigroup_contour(
    f: VectorField,
    t: float,
    bg: Background,
    spec: ContourSpec | None = None,
    tol: float = 1e-8,
    neumann_tol: float = DEFAULT_NEUMANN_TOL,
    use_symmetry: bool = True,
    return_report: bool = False,
):
    """``e^{-tA} f = (2 pi i)**-1 int_Gamma e^{-t lam} R_A(lam) f dlam`` by Gauss-Legendre quadrature.

    For real ``f`` and ``U`` the lower half of the contour is the mirror
    image of the upper half, so only the upper half is evaluated.  Otherwise
    the whole contour is used and, for real data, the imaginary part of the
    result must be below ``1e-9`` relative before it is dropped.
    """
    if t <= 0:
        raise NegativeTime(f"contour representation needs t > 0, got {t}")
    spec = spec or ContourSpec()
    _same_grid(f, bg)
    real = f.is_real and bg.U.is_real
    if real and use_symmetry:
        lam, w, nray = spec.upper_nodes(t)
    else:
        lam, w = spec.full_nodes(t)
        nray = spec.nodes_ray
    ray_idx = set(range(nray)) | (set(range(len(lam) // 2, len(lam) // 2 + nray)) if len(lam) > nray + spec.nodes_arc // 2 else set())
    acc = np.zeros_like(f.coeffs, dtype=complex)
    fnorm = f.coeff_norm() or 1.0
    ray_max = 0.0
    max_terms = 0
    for i, (lm, wt) in enumerate(zip(lam, w)):
        g, rep = resolvent_A(f, SectorPoint(lm, spec.omega), bg, tol=neumann_tol)
        max_terms = max(max_terms, rep.terms_used)
        if i in ray_idx:
            ray_max = max(ray_max, g.coeff_norm() / fnorm)
        acc += (wt * np.exp(-t * lm) / (2j * math.pi)) * g.coeffs
    R = spec.radius(t)
    tail = math.exp(-t * R * math.cos(spec.theta)) * ray_max
    if tail > tol:
        raise TailBoundViolation(f"tail bound {tail:.2e} exceeds {tol:.2e}; increase r_max (t={t}, r_max={R})")
    residue = 0.0
    if real and use_symmetry:
        acc = acc + hermitian_partner(acc, f.grid.n)
    elif real:
        sym = 0.5 * (acc + hermitian_partner(acc, f.grid.n))
        residue = float(np.linalg.norm(acc - sym) / (np.linalg.norm(acc) or 1.0))
        if residue > 1e-9:
            raise ImaginaryResidue(f"imaginary residue {residue:.2e} exceeds 1e-9")
        acc = sym
    out = f.with_coeffs(acc, real)
    if return_report:
        return out, ContourReport(tail, len(lam), max_terms, residue)
    return out


# ---------------------------------------------------------------------------
# exponential time differencing


def _phi12(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``phi1 = (e^z - 1)/z`` and ``phi2 = (e^z - 1 - z)/z**2`` for real ``z <= 0``."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 0.1
    zs = np.where(small, 1.0, z)
    em1 = np.expm1(zs)
    p1 = np.where(small, 0.0, em1 / zs)
    p2 = np.where(small, 0.0, (em1 - zs) / zs**2)
    zz = np.where(small, z, 0.0)
    s1 = np.zeros_like(zz)
    s2 = np.zeros_like(zz)
    fact = 1.0
    for m in range(9):
        fact *= m + 1  # (m+1)!
        s1 += zz**m / fact
        s2 += zz**m / (fact * (m + 2))
    return np.where(small, s1, p1), np.where(small, s2, p2)


class ETD2:
    """Second-order exponential time differencing (Cox-Matthews) for ``u' = Delta u + N(u)``.

    The Laplacian is integrated exactly; with ``N = 0`` a step is the exact
    heat multiplier.
    """

    def __init__(self, grid: Grid, h: float):
        z = -h * grid.kmag2
        self.h = h
        self.E = np.exp(z)
        p1, p2 = _phi12(z)
        self.hp1 = h * p1
        self.hp2 = h * p2

    def step(self, u: VectorField, nonlinear: Callable[[VectorField], VectorField] | None) -> VectorField:
        if nonlinear is None:
            return u.with_coeffs(u.coeffs * self.E)
        nu = nonlinear(u).coeffs
        a = u.with_coeffs(self.E * u.coeffs + self.hp1 * nu)
        na = nonlinear(a).coeffs
        return a.with_coeffs(a.coeffs + self.hp2 * (na - nu))


def _steps(span: float, dt: float) -> tuple[int, float]:
    m = max(1, math.ceil(span / dt - 1e-9))
    return m, span / m


def linear_rhs(bg: Background) -> Callable[[VectorField], VectorField] | None:
    """``N(w) = -B[w]``, or ``None`` when ``U = 0``."""
    if bg.is_zero:
        return None
    return lambda w: -apply_B(w, bg)


def semigroup_timestep(f: VectorField, t: float, bg: Background, dt: float = 1e-2) -> VectorField:
    """``e^{-tA} f`` by exponential time differencing with step at most ``dt``."""
    if t < 0:
        raise NegativeTime(f"t must be nonnegative, got {t}")
    if dt <= 0:
        raise PreconditionError(f"dt must be positive, got {dt}")
    _same_grid(f, bg)
    if t == 0:
        return f
    rhs = linear_rhs(bg)
    if rhs is None:
        return heat_semigroup(f, t)
    m, h = _steps(t, dt)
    stepper = ETD2(f.grid, h)
    ref = f.coeff_norm()
    u = f
    for _ in range(m):
        u = stepper.step(u, rhs)
        nrm = u.coeff_norm()
        if not math.isfinite(nrm) or nrm > 10 * ref:
            raise UnstableStep(f"norm grew from {ref:.3e} to {nrm:.3e}; reduce dt")
    return u


def make_propagator(bg: Background, method: str = "timestep", dt: float = 1e-2, spec: ContourSpec | None = None):
    """``(f, tau) -> e^{-tau A} f`` using the requested realization."""
    if bg.is_zero:
        return lambda g, tau: heat_semigroup(g, tau)
    if method == "timestep":
        return lambda g, tau: semigroup_timestep(g, tau, bg, dt)
    if method == "contour":
        return lambda g, tau: g if tau == 0 else semigroup_contour(g, tau, bg, spec)
    raise PreconditionError(f"unknown propagator {method!r}")


# ---------------------------------------------------------------------------
# Duhamel integral


def graded_panels(t0: float, t: float, levels: int) -> list[tuple[float, float]]:
    """Panels on ``[t0, t]`` halving in length toward ``t``."""
    span = t - t0
    edges = [t0] + [t - span * 2.0 ** (-i) for i in range(1, levels)] + [t]
    return list(zip(edges[:-1], edges[1:]))


def _auto_levels(grid: Grid, span: float) -> int:
    # resolve the boundary layer of width 1/k_max**2 next to sigma = t
    return max(2, math.ceil(math.log2(max(span * grid.kmag2.max(), 1.0))) + 2)


def _duhamel_once(source, t0, t, propagator, nodes, levels, grid):
    x, wx = np.polynomial.legendre.leggauss(nodes)
    acc = None
    for a, b in graded_panels(t0, t, levels):
        half = 0.5 * (b - a)
        for xi, wi in zip(x, wx):
            sig = a + half * (xi + 1)
            g = propagator(leray_project(source(sig)), t - sig)
            acc = g.coeffs * (half * wi) if acc is None else acc + g.coeffs * (half * wi)
    return acc


@dataclass
class DuhamelReport:
    nodes: int
    levels: int
    change: float


def duhamel(
    source: Callable[[float], VectorField],
    t0: float,
    t: float,
    bg: Background,
    nodes: int = 8,
    propagator=None,
    tol: float = 1e-5,
    levels: int | None = None,
    max_refinements: int = 4,
    return_report: bool = False,
):
    """``int_{t0}^t e^{-(t - sigma) A} P F(sigma) dsigma`` for a source ``F``.

    Composite Gauss-Legendre on panels graded toward ``sigma = t``.  The rule
    is refined (nodes doubled, one more level) until successive results differ
    by less than ``tol`` relative.
    """
    if not t > t0 >= 0:
        raise PreconditionError(f"need t > t0 >= 0, got t0={t0}, t={t}")
    propagator = propagator or make_propagator(bg)
    probe = source(t)
    grid = probe.grid
    real = probe.is_real
    lev = levels or _auto_levels(grid, t - t0)
    prev = _duhamel_once(source, t0, t, propagator, nodes, lev, grid)
    change = math.inf
    for _ in range(max_refinements):
        nodes, lev = 2 * nodes, lev + 1
        cur = _duhamel_once(source, t0, t, propagator, nodes, lev, grid)
        scale = np.linalg.norm(cur)
        change = float(np.linalg.norm(cur - prev) / scale) if scale else 0.0
        prev = cur
        if change < tol:
            out = VectorField(grid, cur, real)
            return (out, DuhamelReport(nodes, lev, change)) if return_report else out
    raise QuadratureNotConverged(f"Duhamel quadrature change {change:.2e} after refinement exceeds {tol:.2e}")


def constant_source(g: VectorField) -> Callable[[float], VectorField]:
    return lambda sigma: g


# ---------------------------------------------------------------------------
# verifiers


@dataclass
class SmoothingReport:
    """Per-time ratios for the three smoothing estimates and the ``(ii)`` slope."""

    t: np.ndarray
    bounded: np.ndarray
    smoothing: np.ndarray
    continuity: np.ndarray
    smoothing_lhs: np.ndarray
    slope: float

    def stats(self) -> dict[str, ConstantStats]:
        return {
            "bounded": ConstantStats.from_ratios(self.bounded),
            "smoothing": ConstantStats.from_ratios(self.smoothing),
            "continuity": ConstantStats.from_ratios(self.continuity[np.isfinite(self.continuity)]),
        }


def loglog_slope(t, y) -> float:
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(np.polyfit(np.log(t), np.log(y), 1)[0])


def verify_smoothing(
    bg: Background,
    f: VectorField,
    s: float,
    tau: float,
    t_grid: Sequence[float],
    p: float = 2.0,
    propagator=None,
) -> SmoothingReport:
    """Ratios for ``e^{-tA}`` on ``B^s_{p,inf}`` data over ``t_grid``.

    * bounded: ``||e^{-tA} f||_{B^s_{p,inf}} / ||f||``
    * smoothing: ``t**(tau/2) ||e^{-tA} f||_{B^{s+tau}_{p,1}} / ||f||``
    * continuity: ``||e^{-tA} f - f||_{B^{s-tau}_{p,inf}} / (t**(tau/2) ||f||)``
    """
    if not -2 < s < 1:
        raise ExponentOutOfRange(f"need -2 < s < 1, got {s}")
    if not 0 < tau < 1 - s:
        raise ExponentOutOfRange(f"need 0 < tau < 1 - s, got tau={tau}")
    propagator = propagator or make_propagator(bg)
    base = besov(f, s, p)
    ts = np.asarray(sorted(t_grid), dtype=float)
    b, sm, ct, lhs = [], [], [], []
    for t in ts:
        g = propagator(f, float(t))
        b.append(besov(g, s, p) / base)
        hi = besov(g, s + tau, p, 1.0)
        lhs.append(hi)
        sm.append(t ** (tau / 2) * hi / base)
        ct.append(besov(g - f, s - tau, p) / (t ** (tau / 2) * base))
    return SmoothingReport(ts, np.array(b), np.array(sm), np.array(ct), np.array(lhs), loglog_slope(ts, lhs))


@dataclass
class RateFit:
    t: np.ndarray
    values: np.ndarray
    slope: float
    predicted: float


def verify_generator(
    bg: Background,
    f: VectorField,
    t_grid: Sequence[float],
    s: float,
    tau: float,
    p: float = 2.0,
    propagator=None,
) -> RateFit:
    """Residual ``||(e^{-tA} f - f)/t + A f||_{B^{s-2-tau}_{p,inf}}`` over ``t_grid`` and its slope."""
    if not (0 < s < 1 and 0 <= tau <= 2 and tau < s):
        raise ExponentOutOfRange(f"need 0 < s < 1 and 0 <= tau < s, got s={s}, tau={tau}")
    propagator = propagator or make_propagator(bg)
    Af = apply_A(f, bg)
    ts = np.asarray(sorted(t_grid), dtype=float)
    vals = np.array([besov((propagator(f, float(t)) - f) / float(t) + Af, s - 2 - tau, p) for t in ts])
    return RateFit(ts, vals, loglog_slope(ts, vals), tau / 2)


def critical_ratios(
    bg: Background,
    g: VectorField,
    s: float,
    t_values: Sequence[float],
    p: float = 2.0,
    propagator=None,
    tol: float = 1e-5,
) -> np.ndarray:
    """``||int_0^t e^{-(t-sigma)A} P g dsigma||_{B^s_{p,inf}} / ||g||_{B^{s-2}_{p,inf}}`` for constant ``g``."""
    propagator = propagator or make_propagator(bg)
    den = besov(g, s - 2, p)
    src = constant_source(g)
    return np.array([besov(duhamel(src, 0.0, float(t), bg, propagator=propagator, tol=tol), s, p) / den for t in t_values])


def maximal_regularity_ratios(
    bg: Background, g: VectorField, s: float, t_values: Sequence[float], p: float = 2.0, propagator=None
) -> np.ndarray:
    """``||A int_0^t e^{-(t-sigma)A} P g||_{B^{s-2}_{p,inf}} / ||g||_{B^{s-2}_{p,inf}}`` for constant ``g``."""
    propagator = propagator or make_propagator(bg)
    den = besov(g, s - 2, p)
    src = constant_source(g)
    return np.array(
        [besov(apply_A(duhamel(src, 0.0, float(t), bg, propagator=propagator), bg), s - 2, p) / den for t in t_values]
    )


def ab_ratio(w: VectorField, bg: Background, s: float, p: float = 2.0) -> float:
    """``||B[w]||_{B^{s-2}_{p,inf}} / (||U||_{L^{n,inf}} ||w||_{B^s_{p,inf}})``."""
    den = bg.weak_ln_norm * besov(w, s, p)
    if den == 0:
        return math.nan
    return besov(apply_B(w, bg), s - 2, p) / den


def c_theta_ratio(w: VectorField, bg: Background, theta: float, s: float, p: float = 2.0) -> float:
    """``||C_theta w||_{B^s_{p,inf}} / (||U||_{L^{n,inf}} ||w||_{B^s_{p,inf}})``."""
    den = bg.weak_ln_norm * besov(w, s, p)
    if den == 0:
        return math.nan
    return besov(apply_C_theta(w, bg, theta), s, p) / den


def neumann_partial(f: VectorField, pt, bg: Background, terms: int) -> VectorField:
    """``sum_{l < terms} [R(lam) B]**l f`` (no trailing resolvent)."""
    rvals = resolvent_values(f.grid, _as_point(pt).lam, 2.0)
    term = f
    total = f.coeffs.astype(complex)
    for _ in range(terms - 1):
        term = term.with_coeffs(apply_B(term, bg).coeffs * rvals, False)
        total = total + term.coeffs
    return f.with_coeffs(total, False)


def conjugated_neumann_partial(f: VectorField, pt, bg: Background, theta: float, terms: int) -> VectorField:
    """``(-Delta)**(-theta/2) sum_{l < terms} [R(lam) (-Delta) C_theta]**l (-Delta)**(theta/2) f``."""
    rvals = resolvent_values(f.grid, _as_point(pt).lam, 2.0)
    g = frac_laplacian(f, theta)
    term = g
    total = g.coeffs.astype(complex)
    for _ in range(terms - 1):
        c = apply_C_theta(term, bg, theta)
        term = term.with_coeffs(c.coeffs * f.grid.kmag2 * rvals, False)
        total = total + term.coeffs
    return frac_laplacian(f.with_coeffs(total, False), -theta)
