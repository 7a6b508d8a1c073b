"""Constructive solvers: stationary Picard iteration, Picard iteration for the
perturbation equation, direct time stepping of the forced Navier-Stokes
equations, and residual checks on computed paths.

Equations (pressure removed by the Leray projection ``P``)::

    stationary     -Delta U + P div(U (x) U) = P f
    perturbation   w' + A w + P div(w (x) w) = 0,     w(0) = b
    full           u' - Delta u + P div(u (x) u) = P f,   u(0) = a
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    ExponentOutOfRange,
    InsufficientSamples,
    NonContraction,
    PicardDivergence,
    PreconditionError,
    TOutOfRange,
    UnstableStep,
)
from .multipliers import frac_laplacian, leray_project
from .norms import besov, critical_s, lp_norm
from .perturbed import ETD2, Background, RateFit, _steps, apply_A, crit_norm, duhamel, loglog_slope, make_propagator
from .spectral import VectorField, div_tensor


def inverse_stokes(f: VectorField) -> VectorField:
    """``(-Delta)**-1 P f``."""
    return frac_laplacian(leray_project(f), -2.0)


def _check_p(n: int, p: float) -> None:
    if not n / 2 < p < n:
        raise ExponentOutOfRange(f"need n/2 < p < n, got p={p} for n={n}")


# ---------------------------------------------------------------------------
# stationary problem


@dataclass
class StationaryResult:
    U: VectorField
    iterations: int
    contraction_factors: list[float]
    norm_crit: float
    residual: float
    increments: list[float] = field(default_factory=list)
    iterate_norms: list[float] = field(default_factory=list)
    norm_extra: float | None = None
    extra_ratio: float | None = None
    first_correction: VectorField | None = None


def stationary_residual(U: VectorField, f: VectorField, p: float = 2.0) -> float:
    """``||U + (-Delta)^-1 P div(U (x) U) - (-Delta)^-1 P f|| / ||(-Delta)^-1 P f||`` in ``B^{s(p)}_{p,inf}``."""
    U0 = inverse_stokes(f)
    scale = crit_norm(U0, p)
    if scale == 0:
        return crit_norm(U, p)
    return crit_norm(U + inverse_stokes(div_tensor(U)) - U0, p) / scale


def solve_stationary(
    f: VectorField,
    p: float = 2.0,
    s_extra: float | None = None,
    tol: float = 1e-12,
    max_iter: int = 100,
    patience: int = 5,
) -> StationaryResult:
    """Fixed point of ``U = U_0 - (-Delta)^-1 P div(U (x) U)`` with ``U_0 = (-Delta)^-1 P f``.

    Iterates until the increment in ``B^{s(p)}_{p,inf}`` falls below ``tol``
    relative to the current iterate.  ``NonContraction`` is raised after
    ``patience`` consecutive increment ratios ``>= 1``, on blow-up, or when
    ``max_iter`` is exhausted.
    """
    n = f.grid.n
    _check_p(n, p)
    if s_extra is not None and not 0 < s_extra < 1:
        raise ExponentOutOfRange(f"s_extra must lie in (0, 1), got {s_extra}")
    U0 = inverse_stokes(f)
    base = crit_norm(U0, p)

    def finish(U, iterations, factors, incs, norms, corr):
        res = StationaryResult(U, iterations, factors, crit_norm(U, p), stationary_residual(U, f, p), incs, norms)
        res.first_correction = corr
        if s_extra is not None:
            res.norm_extra = besov(U, s_extra, p)
            den = besov(f, s_extra - 2, p)
            res.extra_ratio = res.norm_extra / den if den else math.nan
        return res

    if base == 0:
        return finish(U0, 1, [], [0.0], [0.0], U0)
    U = U0
    incs: list[float] = []
    factors: list[float] = []
    norms = [base]
    corr = None
    bad = 0
    for m in range(1, max_iter + 1):
        nxt = U0 - inverse_stokes(div_tensor(U))
        if corr is None:
            corr = nxt - U0
        inc = crit_norm(nxt - U, p)
        nrm = crit_norm(nxt, p)
        incs.append(inc)
        norms.append(nrm)
        if len(incs) > 1:
            factors.append(inc / incs[-2] if incs[-2] else 0.0)
            bad = bad + 1 if factors[-1] >= 1 else 0
        U = nxt
        if not math.isfinite(nrm) or nrm > 1e6 * base:
            raise NonContraction(f"iterates blew up at step {m} (|U_m| = {nrm:.3e})")
        if bad >= patience:
            raise NonContraction(f"increments failed to contract {patience} times in a row (forcing too large)")
        if inc <= tol * nrm:
            return finish(U, m, factors, incs, norms, corr)
    raise NonContraction(f"no convergence within {max_iter} iterations")


def contraction_threshold(
    f: VectorField, p: float = 2.0, rel_tol: float = 1e-2, max_iter: int = 200, start: float = 1.0
) -> float:
    """Largest amplitude ``c`` (to ``rel_tol``) for which ``solve_stationary(c f)`` converges.

    The bracket is found by doubling/halving from ``start`` and refined by
    geometric bisection.
    """

    def ok(c: float) -> bool:
        try:
            solve_stationary(f * c, p, tol=1e-10, max_iter=max_iter)
            return True
        except NonContraction:
            return False

    lo = hi = start
    if ok(start):
        while ok(hi * 2):
            hi *= 2
            if hi > 1e12:
                raise PreconditionError("no contraction threshold found (forcing shape may be an exact solution)")
        lo, hi = hi, hi * 2
    else:
        while not ok(lo / 2):
            lo /= 2
            if lo < 1e-12:
                raise PreconditionError("iteration does not converge for any tested amplitude")
        lo, hi = lo / 2, lo
    while hi / lo > 1 + rel_tol:
        mid = math.sqrt(lo * hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# evolution paths


@dataclass
class EvolutionPath:
    """States sampled at strictly increasing ``times``.

    ``kind`` is ``"u"`` for solutions of the full equations and ``"w"`` for
    perturbations around a background.
    """

    times: np.ndarray
    states: list[VectorField]
    norm_traces: dict[str, np.ndarray] = field(default_factory=dict)
    kind: str = "u"
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) != len(self.states):
            raise PreconditionError("times and states differ in length")
        if np.any(np.diff(self.times) <= 0):
            raise PreconditionError("sample times must be strictly increasing")

    def index(self, t: float) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-12 * max(1.0, abs(t)):
            raise TOutOfRange(f"t={t} is not a sample time")
        return i

    def state(self, t: float) -> VectorField:
        return self.states[self.index(t)]


def default_monitors(p: float = 2.0) -> dict[str, Callable[[VectorField], float]]:
    return {"besov_crit": lambda u: crit_norm(u, p), "l2": lambda u: lp_norm(u, 2)}


def _traces(states, monitors) -> dict[str, np.ndarray]:
    return {name: np.array([fn(u) for u in states]) for name, fn in monitors.items()}


def _sample_grid(T: float, sample_times) -> np.ndarray:
    ts = np.asarray(sorted(set(float(t) for t in sample_times)), dtype=float)
    if ts.size == 0 or ts[0] < 0 or ts[-1] > T * (1 + 1e-12):
        raise PreconditionError("sample times must lie in [0, T]")
    if ts[0] > 0:
        ts = np.concatenate([[0.0], ts])
    return ts


def solve_ns_direct(
    a: VectorField,
    f: VectorField | None,
    T: float,
    dt: float,
    sample_times: Sequence[float],
    nonlinear: bool = True,
    monitors: Mapping[str, Callable] | None = None,
    p: float = 2.0,
) -> EvolutionPath:
    """``u' = Delta u - P div(u (x) u) + P f`` by second-order exponential time differencing.

    Steps between consecutive sample times are uniform and at most ``dt``.
    With ``f = 0`` the ``L^2`` norm is checked after each step and growth
    beyond ``1e-10`` relative is counted in ``diagnostics["energy_violations"]``.
    """
    if dt <= 0 or T <= 0:
        raise PreconditionError("T and dt must be positive")
    if not a.is_solenoidal():
        raise PreconditionError("initial data must be divergence free")
    grid = a.grid
    Pf = leray_project(f) if f is not None else None
    unforced = Pf is None or not np.any(Pf.coeffs)

    def rhs(u: VectorField) -> VectorField:
        out = -leray_project(div_tensor(u)) if nonlinear else u.with_coeffs(np.zeros_like(u.coeffs))
        return out if unforced else out + Pf

    ts = _sample_grid(T, sample_times)
    ref = max(a.coeff_norm(), 0.0 if unforced else inverse_stokes(Pf).coeff_norm(), 1e-300)
    states = [a]
    u = a
    energy = lp_norm(a, 2)
    violations = 0
    steps = 0
    cache: dict[float, ETD2] = {}
    for t0, t1 in zip(ts[:-1], ts[1:]):
        m, h = _steps(t1 - t0, dt)
        stepper = cache.setdefault(round(h, 15), ETD2(grid, h))
        for _ in range(m):
            u = stepper.step(u, rhs)
            steps += 1
            nrm = u.coeff_norm()
            if not math.isfinite(nrm) or nrm > 10 * ref:
                raise UnstableStep(f"norm reached {nrm:.3e} (reference {ref:.3e}) at t~{t0}; reduce dt")
            if unforced:
                e = lp_norm(u, 2)
                if e > energy * (1 + 1e-10):
                    violations += 1
                energy = e
        states.append(u)
    diag = {"steps": steps, "energy_violations": violations if unforced else None, "dt": dt}
    return EvolutionPath(ts, states, _traces(states, monitors or default_monitors(p)), "u", diag)


class _StateSpline:
    """Cubic spline through sampled coefficient arrays."""

    def __init__(self, times: np.ndarray, states: list[VectorField]):
        self.proto = states[0]
        data = np.stack([s.coeffs for s in states])
        self.spline = CubicSpline(times, data, axis=0)

    def __call__(self, t: float) -> VectorField:
        return self.proto.with_coeffs(self.spline(t))


def solve_perturbation_picard(
    b: VectorField,
    bg: Background,
    T: float,
    sample_times: Sequence[float],
    picard_iters: int = 30,
    tol: float = 1e-9,
    dt: float = 1e-2,
    nodes: int = 8,
    quad_tol: float = 1e-7,
    monitors: Mapping[str, Callable] | None = None,
    p: float = 2.0,
) -> EvolutionPath:
    """Successive approximation ``w_{m+1}(t) = e^{-tA} b - int_0^t e^{-(t-s)A} P div(w_m (x) w_m)(s) ds``.

    Iterates live on the sample grid (``t = 0`` is added if missing) and are
    interpolated in time by cubic splines inside the Duhamel quadrature,
    which is accumulated interval by interval.  Stops once the largest
    increment over the samples, in ``B^{s(p)}_{p,inf}``, is below ``tol``
    relative to the largest ``||w_0||``.
    """
    if not b.is_solenoidal():
        raise PreconditionError("perturbation must be divergence free")
    ts = _sample_grid(T, sample_times)
    prop = make_propagator(bg, "timestep", dt)
    w0 = [b]
    for t0, t1 in zip(ts[:-1], ts[1:]):
        w0.append(prop(w0[-1], t1 - t0))
    scale = max(crit_norm(w, p) for w in w0)
    if scale == 0:
        return EvolutionPath(ts, w0, _traces(w0, monitors or default_monitors(p)), "w", {"iterations": 0, "increments": []})
    w = w0
    incs: list[float] = []
    growing = 0
    for m in range(1, picard_iters + 1):
        spline = _StateSpline(ts, w)

        def source(sig, spline=spline):
            return div_tensor(spline(sig))

        D = [VectorField.zeros(b.grid)]
        for t0, t1 in zip(ts[:-1], ts[1:]):
            local = duhamel(source, t0, t1, bg, nodes=nodes, propagator=prop, tol=quad_tol)
            D.append(prop(D[-1], t1 - t0) + local)
        nxt = [a - d for a, d in zip(w0, D)]
        inc = max(crit_norm(x - y, p) for x, y in zip(nxt, w)) / scale
        incs.append(inc)
        w = nxt
        if len(incs) > 1:
            growing = growing + 1 if incs[-1] > incs[-2] else 0
        if growing >= 3 or not math.isfinite(inc):
            raise PicardDivergence(f"Picard increments grew 3 times in a row (last {inc:.3e})")
        if inc < tol:
            break
    else:
        raise PicardDivergence(f"Picard iteration not converged after {picard_iters} iterations (last {incs[-1]:.3e})")
    diag = {"iterations": len(incs), "increments": incs}
    return EvolutionPath(ts, w, _traces(w, monitors or default_monitors(p)), "w", diag)


# ---------------------------------------------------------------------------
# checks on paths


def _derivative(path: EvolutionPath, i: int) -> VectorField:
    t = path.times
    s = path.states
    if 2 <= i <= len(t) - 3 and np.allclose(np.diff(t[i - 2 : i + 3]), t[i + 1] - t[i], rtol=1e-9, atol=0):
        h = t[i + 1] - t[i]
        c = (s[i - 2].coeffs - 8 * s[i - 1].coeffs + 8 * s[i + 1].coeffs - s[i + 2].coeffs) / (12 * h)
        return s[i].with_coeffs(c)
    h1, h2 = t[i] - t[i - 1], t[i + 1] - t[i]
    c = (
        -h2 / (h1 * (h1 + h2)) * s[i - 1].coeffs
        + (h2 - h1) / (h1 * h2) * s[i].coeffs
        + h1 / (h2 * (h1 + h2)) * s[i + 1].coeffs
    )
    return s[i].with_coeffs(c)


def residual_differential(
    path: EvolutionPath,
    t: float,
    bg: Background | None = None,
    f: VectorField | None = None,
    nonlinear: bool = True,
    p: float = 2.0,
) -> float:
    """``||w'(t) + A w(t) + P div(w (x) w)(t) - P f||`` in ``B^{s(p)-2}_{p,inf}``.

    ``w'`` is a finite difference over the neighbouring samples (five point
    stencil on uniform spacing when available, three point otherwise).  For
    ``kind == "u"`` paths leave ``bg`` unset so that ``A = -Delta``.
    """
    i = path.index(t)
    if i == 0 or i == len(path.times) - 1:
        raise TOutOfRange(f"t={t} needs samples on both sides")
    w = path.states[i]
    bg = bg or Background.zero(w.grid)
    r = _derivative(path, i) + apply_A(w, bg)
    if nonlinear:
        r = r + leray_project(div_tensor(w))
    if f is not None:
        r = r - leray_project(f)
    return crit_norm(r, p, -2.0)


def check_initial_continuity(path: EvolutionPath, a: VectorField, alpha: float, p: float = 2.0) -> RateFit:
    """Slope of ``||u(t) - a||_{B^{s(p)-alpha}_{p,inf}}`` against ``t`` over the first sampled decade."""
    if not 0 <= alpha <= 2:
        raise ExponentOutOfRange(f"alpha must lie in [0, 2], got {alpha}")
    ts = path.times
    pos = ts[ts > 0]
    if pos.size == 0:
        raise InsufficientSamples("no positive sample times")
    sel = [i for i, t in enumerate(ts) if pos[0] <= t <= 10 * pos[0] * (1 + 1e-12)]
    if len(sel) < 3:
        raise InsufficientSamples(f"need at least 3 samples in the first decade, found {len(sel)}")
    s = critical_s(a.grid.n, p) - alpha
    vals = np.array([besov(path.states[i] - a, s, p) for i in sel])
    tt = ts[sel]
    if np.any(vals <= 0):
        raise InsufficientSamples("difference vanishes at some sample; slope undefined")
    return RateFit(tt, vals, loglog_slope(tt, vals), alpha / 2)
