"""Experiment orchestration: configuration, stability runs, decay fits,
verification suites and report files."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import (
    ConfigError,
    ExponentOutOfRange,
    InsufficientSamples,
    NonpositiveNorm,
    PreconditionError,
    SnapshotError,
    WindowViolation,
)
from .multipliers import SectorPoint, frac_laplacian, heat_semigroup, leray_project, resolvent_laplacian, resolvent_lp_gain
from .norms import (
    BesovIndex,
    ConstantStats,
    besov,
    besov_norm,
    critical_s,
    ensemble_seeds,
    lp_norm,
    verify_embedding,
    verify_product,
    weak_lp_norm,
)
from .perturbed import (
    Background,
    ab_ratio,
    critical_ratios,
    make_propagator,
    resolvent_A,
    verify_generator,
    verify_smoothing,
)
from .solvers import solve_ns_direct, solve_perturbation_picard, solve_stationary
from .spectral import Grid, SpectrumProfile, VectorField, make_grid, random_field, resample, transform

FIT_TOLERANCE = 0.15


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    """All experiment parameters.  Field names are the accepted JSON keys."""

    n: int = 3
    N: int = 32
    L: float = 2 * math.pi
    p: float = 2.0
    s: float = 0.25
    tau_H: float = 0.25
    tau_L: float = 0.25
    forcing_amplitude: float = 0.0
    forcing_kind: str = "taylor_green"
    forcing_modes: float = 2.0
    forcing_alpha: float = 0.0
    epsilon: float = 1e-2
    perturbation_alpha: float | None = None
    perturbation_modes: float | None = None
    t_min: float | None = None
    t_max: float | None = None
    fit_window: list[float] | None = None
    samples_per_octave: int = 2
    method: str = "direct"
    dt: float = 0.05
    picard_iters: int = 30
    stationary_tol: float = 1e-12
    ensemble_size: int = 20
    seeds: dict[str, int] = field(default_factory=lambda: {"forcing": 0, "perturbation": 1, "ensemble": 2})
    output_dir: str = "results"

    def __post_init__(self):
        self.validate()

    # derived quantities -----------------------------------------------------

    @property
    def s_crit(self) -> float:
        return critical_s(self.n, self.p)

    @property
    def gamma(self) -> float:
        return self.s_crit - self.tau_L - self.s

    @property
    def box_time(self) -> float:
        """Upper end of the box-validity window, ``0.1 (L / 2 pi)**2``."""
        return 0.1 * (self.L / (2 * math.pi)) ** 2

    @property
    def window(self) -> tuple[float, float]:
        t_max = self.t_max if self.t_max is not None else self.box_time
        t_min = self.t_min if self.t_min is not None else t_max / 100
        return t_min, t_max

    @property
    def fit(self) -> tuple[float, float]:
        t_min, t_max = self.window
        if self.fit_window is None:
            return t_max / 10, t_max
        return float(self.fit_window[0]), float(self.fit_window[1])

    def grid(self) -> Grid:
        return make_grid(self.n, self.N, self.L)

    # validation -------------------------------------------------------------

    def validate(self) -> None:
        n, p = self.n, self.p
        if n not in (2, 3):
            raise ConfigError(f"n must be 2 or 3, got {n}")
        if not n / 2 < p < n:
            raise ExponentOutOfRange(f"need n/2 < p < n, got p={p}")
        sp = critical_s(n, p)
        if not 0 < self.tau_H < 2 - n / p:
            raise ExponentOutOfRange(f"tau_H must lie in (0, 2 - n/p) = (0, {2 - n / p}), got {self.tau_H}")
        if not 0 < self.s < sp:
            raise ExponentOutOfRange(f"s must lie in (0, s(p)) = (0, {sp}), got {self.s}")
        if not 0 < self.tau_L <= sp - self.s + 1e-12:
            raise ExponentOutOfRange(f"tau_L must lie in (0, s(p) - s] = (0, {sp - self.s}], got {self.tau_L}")
        if self.method not in ("direct", "picard"):
            raise ConfigError(f"method must be 'direct' or 'picard', got {self.method!r}")
        if self.forcing_kind not in ("taylor_green", "random"):
            raise ConfigError(f"forcing_kind must be 'taylor_green' or 'random', got {self.forcing_kind!r}")
        if self.epsilon < 0 or self.forcing_amplitude < 0:
            raise ConfigError("epsilon and forcing_amplitude must be nonnegative")
        if self.dt <= 0 or self.samples_per_octave < 1 or self.ensemble_size < 1:
            raise ConfigError("dt, samples_per_octave and ensemble_size must be positive")
        missing = {"forcing", "perturbation", "ensemble"} - set(self.seeds)
        if missing or set(self.seeds) - {"forcing", "perturbation", "ensemble"}:
            raise ConfigError("seeds must have exactly the keys forcing, perturbation, ensemble")
        t_min, t_max = self.window
        if not 0 < t_min < t_max:
            raise WindowViolation(f"need 0 < t_min < t_max, got [{t_min}, {t_max}]")
        if t_max > self.box_time * (1 + 1e-12):
            raise WindowViolation(f"t_max={t_max} exceeds the box-validity limit {self.box_time:.6g}")
        lo, hi = self.fit
        if not t_min <= lo < hi <= t_max * (1 + 1e-12):
            raise WindowViolation(f"fit window [{lo}, {hi}] is not inside [{t_min}, {t_max}]")

    # (de)serialization ------------------------------------------------------

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        unknown = sorted(set(data) - set(cls.keys()))
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise SnapshotError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(data)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "ExperimentConfig":
        return self.from_dict({**self.to_dict(), **changes})


# ---------------------------------------------------------------------------
# fixtures


def taylor_green_forcing(grid: Grid, modes: float = 1.0) -> VectorField:
    """Solenoidal Taylor-Green field at wavenumber ``modes * k0`` per axis."""
    k = max(1, int(round(modes))) * grid.k0
    x = grid.coordinates()
    arr = np.zeros((grid.n,) + grid.shape)
    if grid.n == 3:
        arr[0] = np.sin(k * x[0]) * np.cos(k * x[1]) * np.cos(k * x[2])
        arr[1] = -np.cos(k * x[0]) * np.sin(k * x[1]) * np.cos(k * x[2])
    else:
        arr[0] = np.sin(k * x[0]) * np.cos(k * x[1])
        arr[1] = -np.cos(k * x[0]) * np.sin(k * x[1])
    return leray_project(transform(arr, grid))


def build_forcing(cfg: ExperimentConfig, grid: Grid) -> VectorField | None:
    """Forcing normalized so that ``||f||_{B^{s(p)-2}_{p,inf}} = forcing_amplitude``."""
    if cfg.forcing_amplitude == 0:
        return None
    if cfg.forcing_kind == "taylor_green":
        f = taylor_green_forcing(grid, cfg.forcing_modes)
    else:
        prof = SpectrumProfile(cfg.forcing_alpha, cfg.forcing_modes * grid.k0, cfg.seeds["forcing"])
        f = random_field(grid, prof)
    return f * (cfg.forcing_amplitude / besov(f, cfg.s_crit - 2, cfg.p))


def default_perturbation_alpha(cfg: ExperimentConfig) -> float:
    """Amplitude exponent making ``b`` flat across blocks in ``B^s_{p,inf}``."""
    return -cfg.s - cfg.n / 2


def profile_field(grid: Grid, alpha: float, k_cut: float, seed: int) -> VectorField:
    """Solenoidal random field with ``|b(k)| ~ |k|**alpha`` (any real ``alpha``)."""
    v = random_field(grid, SpectrumProfile(0.0, k_cut, seed))
    return frac_laplacian(v, alpha)


def build_perturbation(cfg: ExperimentConfig, grid: Grid) -> VectorField:
    """Perturbation ``b`` with ``||b||_{B^{s(p)}_{p,inf}} = epsilon``."""
    alpha = cfg.perturbation_alpha if cfg.perturbation_alpha is not None else default_perturbation_alpha(cfg)
    modes = cfg.perturbation_modes if cfg.perturbation_modes is not None else math.floor(cfg.N / 3)
    b = profile_field(grid, alpha, modes * grid.k0, cfg.seeds["perturbation"])
    if cfg.epsilon == 0:
        return b * 0.0
    return b * (cfg.epsilon / besov(b, cfg.s_crit, cfg.p))


def geometric_times(t_min: float, t_max: float, per_octave: int = 2) -> np.ndarray:
    """``t_min 2**(i/per_octave)`` up to ``t_max`` (which is always included)."""
    count = int(math.floor(per_octave * math.log2(t_max / t_min) + 1e-9))
    ts = t_min * 2.0 ** (np.arange(count + 1) / per_octave)
    if ts[-1] < t_max * (1 - 1e-12):
        ts = np.append(ts, t_max)
    return ts


# ---------------------------------------------------------------------------
# decay fits


@dataclass
class DecayFit:
    window: tuple[float, float]
    samples: list[tuple[float, float]]
    slope: float
    r2: float
    predicted: float
    intercept: float = 0.0

    @property
    def passes(self) -> bool:
        """Slope within ``FIT_TOLERANCE`` of the prediction."""
        return abs(self.slope - self.predicted) <= FIT_TOLERANCE

    @property
    def decays_as_predicted(self) -> bool:
        """One-sided check: decay at least as fast as predicted, up to ``FIT_TOLERANCE``."""
        return self.slope <= self.predicted + FIT_TOLERANCE


def fit_decay(samples: Sequence[tuple[float, float]], window: tuple[float, float], predicted: float) -> DecayFit:
    """Least squares fit of ``log norm`` against ``log t`` over ``window``."""
    lo, hi = window
    sel = [(float(t), float(v)) for t, v in samples if lo * (1 - 1e-12) <= t <= hi * (1 + 1e-12)]
    if len(sel) < 6:
        raise InsufficientSamples(f"need at least 6 samples in [{lo}, {hi}], found {len(sel)}")
    t = np.array([a for a, _ in sel])
    v = np.array([b for _, b in sel])
    if np.any(v <= 0):
        raise NonpositiveNorm("decay fit needs strictly positive norms")
    x, y = np.log(t), np.log(v)
    slope, intercept = np.polyfit(x, y, 1)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    r2 = 1.0 if ss_tot <= 1e-300 else max(0.0, 1.0 - ss_res / ss_tot)
    return DecayFit((lo, hi), sel, float(slope), min(r2, 1.0), predicted, float(intercept))


# ---------------------------------------------------------------------------
# stability experiment

STABILITY_COLUMNS = ["t", "besov_high", "besov_base", "besov_low", "weak_lp_high", "weak_lp_low"]
SUMMARY_KEYS = [
    "slope_high",
    "slope_low",
    "predicted_high",
    "predicted_low",
    "pass_high",
    "pass_low",
    "gamma",
    "tau_H",
    "tau_L",
    "s",
    "p",
    "n",
    "N",
    "L",
    "seeds",
]


@dataclass
class StabilityReport:
    config: ExperimentConfig
    times: np.ndarray
    traces: dict[str, np.ndarray]
    fits: dict[str, DecayFit | None]
    summary: dict[str, Any]
    flags: list[str] = field(default_factory=list)
    background_norm: float = 0.0
    sup_base: float = 0.0

    def rows(self) -> list[list[float]]:
        return [[float(t)] + [float(self.traces[c][i]) for c in STABILITY_COLUMNS[1:]] for i, t in enumerate(self.times)]


def trace_norms(d: VectorField, cfg: ExperimentConfig) -> dict[str, float]:
    """The five monitored norms of ``u(t) - U``."""
    sp, p, n = cfg.s_crit, cfg.p, cfg.n
    return {
        "besov_high": besov(d, sp + cfg.tau_H, p, 1.0),
        "besov_base": besov(d, sp, p),
        "besov_low": besov(d, sp - cfg.tau_L, p),
        "weak_lp_high": lp_norm(d, n / (1 - cfg.tau_H)),
        "weak_lp_low": weak_lp_norm(d, n / (1 + cfg.tau_L)),
    }


def run_stability_experiment(cfg: ExperimentConfig) -> StabilityReport:
    """Stationary solve, perturbation, evolution, norm traces and decay fits."""
    cfg.validate()
    grid = cfg.grid()
    f = build_forcing(cfg, grid)
    if f is None:
        U = VectorField.zeros(grid)
    else:
        U = solve_stationary(f, cfg.p, tol=cfg.stationary_tol).U
    b = build_perturbation(cfg, grid)
    t_min, t_max = cfg.window
    ts = geometric_times(t_min, t_max, cfg.samples_per_octave)
    if cfg.method == "direct":
        path = solve_ns_direct(U + b, f, t_max, cfg.dt, ts, monitors={})
        diffs = [u - U for u in path.states]
    else:
        path = solve_perturbation_picard(b, Background(U), t_max, ts, cfg.picard_iters, dt=cfg.dt, monitors={})
        diffs = path.states
    keep = [i for i, t in enumerate(path.times) if t > 0]
    times = path.times[keep]
    per_t = [trace_norms(diffs[i], cfg) for i in keep]
    traces = {c: np.array([row[c] for row in per_t]) for c in STABILITY_COLUMNS[1:]}
    flags: list[str] = []
    fits: dict[str, DecayFit | None] = {"high": None, "low": None}
    pred_high, pred_low = -cfg.tau_H / 2, -cfg.gamma / 2
    u_scale = besov(U, cfg.s_crit, cfg.p)
    if cfg.epsilon == 0:
        flags.append("stationary fixture")
    else:
        window = cfg.fit
        fits["high"] = fit_decay(list(zip(times, traces["besov_high"])), window, pred_high)
        fits["low"] = fit_decay(list(zip(times, traces["besov_low"])), window, pred_low)
    summary = {
        "slope_high": fits["high"].slope if fits["high"] else None,
        "slope_low": fits["low"].slope if fits["low"] else None,
        "predicted_high": pred_high,
        "predicted_low": pred_low,
        "pass_high": fits["high"].decays_as_predicted if fits["high"] else None,
        "pass_low": fits["low"].decays_as_predicted if fits["low"] else None,
        "gamma": cfg.s_crit - cfg.tau_L - cfg.s,
        "tau_H": cfg.tau_H,
        "tau_L": cfg.tau_L,
        "s": cfg.s,
        "p": cfg.p,
        "n": cfg.n,
        "N": cfg.N,
        "L": cfg.L,
        "seeds": dict(sorted(cfg.seeds.items())),
    }
    sup_base = max(float(traces["besov_base"].max()), besov(diffs[0], cfg.s_crit, cfg.p))
    return StabilityReport(cfg, times, traces, fits, summary, flags, u_scale, sup_base)


# ---------------------------------------------------------------------------
# verification suites

CONSTANT_COLUMNS = ["suite", "params", "ratio_max", "ratio_median", "resolution"]
SWEEP_COLUMNS = ["t", "lhs_norm", "rhs_scale", "ratio"]
SUITES = ("ab", "critical", "embedding", "generator", "multipliers", "product", "resolvent", "semigroup")
STABILITY_DRIFT = 0.25


@dataclass
class SuiteResult:
    name: str
    columns: list[str]
    rows: list[list[Any]]
    summary: dict[str, Any] = field(default_factory=dict)


def _params(**kw) -> str:
    return ";".join(f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}" for k, v in kw.items())


def _drift(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def _verdict(max_by_n: dict[int, float]) -> dict[str, Any]:
    vals = list(max_by_n.values())
    finite = all(math.isfinite(v) for v in vals)
    drift = _drift(vals[0], vals[-1]) if len(vals) > 1 else 0.0
    return {
        "max_by_resolution": {str(k): v for k, v in max_by_n.items()},
        "drift": drift,
        "finite": finite,
        "stable": finite and drift < STABILITY_DRIFT,
    }


def _resolutions(cfg: ExperimentConfig) -> list[int]:
    return [cfg.N, 2 * cfg.N]


@dataclass
class SuiteOptions:
    """Optional overrides for the sweep suites.

    ``U`` replaces the configured background (it is resampled to each
    resolution); ``s`` and ``tau`` replace the per-suite default exponents.
    """

    U: VectorField | None = None
    s: float | None = None
    tau: float | None = None

    def pick(self, s_default: float, tau_default: float) -> tuple[float, float]:
        return (self.s if self.s is not None else s_default, self.tau if self.tau is not None else tau_default)


def _background(cfg: ExperimentConfig, grid: Grid, opts: SuiteOptions | None = None) -> Background:
    if opts is not None and opts.U is not None:
        return Background(resample(opts.U, grid))
    f = build_forcing(cfg, grid)
    if f is None:
        return Background.zero(grid)
    return Background(solve_stationary(f, cfg.p, tol=cfg.stationary_tol).U)


def _ensemble_rows(name, params, stats_by_n) -> tuple[list[list[Any]], dict[str, Any]]:
    rows = [[name, params, st.max, st.median, N] for N, st in stats_by_n.items()]
    return rows, _verdict({N: st.max for N, st in stats_by_n.items()})


def suite_embedding(cfg: ExperimentConfig, opts: SuiteOptions) -> SuiteResult:
    idx = BesovIndex(0.5, cfg.p, math.inf)
    stats = {N: verify_embedding(cfg.ensemble_size, idx, cfg.seeds["ensemble"], make_grid(cfg.n, N, cfg.L)) for N in _resolutions(cfg)}
    rows, summ = _ensemble_rows("embedding", _params(n=cfg.n, p=cfg.p, s=0.5), stats)
    return SuiteResult("embedding", CONSTANT_COLUMNS, rows, summ)


def suite_product(cfg: ExperimentConfig, opts: SuiteOptions) -> SuiteResult:
    stats = {N: verify_product(cfg.ensemble_size, cfg.p, 0.5, cfg.seeds["ensemble"], make_grid(cfg.n, N, cfg.L)) for N in _resolutions(cfg)}
    rows, summ = _ensemble_rows("product", _params(n=cfg.n, p=cfg.p, s=0.5), stats)
    return SuiteResult("product", CONSTANT_COLUMNS, rows, summ)


def verify_ab(ensemble_size: int, grid: Grid, s: float, seed: int, p: float = 2.0, modes: float = 5.0) -> ConstantStats:
    """Ensemble of ``||B[w]||_{B^{s-2}} / (||U||_{L^{n,inf}} ||w||_{B^s})`` over random pairs ``(U, w)``."""
    seeds = ensemble_seeds(seed, 2 * ensemble_size)
    ratios = []
    for i in range(ensemble_size):
        U = random_field(grid, SpectrumProfile(0.0, modes * grid.k0, seeds[2 * i]))
        w = random_field(grid, SpectrumProfile(0.0, modes * grid.k0, seeds[2 * i + 1]))
        r = ab_ratio(w, Background(U), s, p)
        if math.isfinite(r):
            ratios.append(r)
    return ConstantStats.from_ratios(ratios, ensemble_size - len(ratios))


def suite_ab(cfg: ExperimentConfig, opts: SuiteOptions) -> SuiteResult:
    s = cfg.s_crit
    stats = {N: verify_ab(cfg.ensemble_size, make_grid(cfg.n, N, cfg.L), s, cfg.seeds["ensemble"], cfg.p) for N in _resolutions(cfg)}
    rows, summ = _ensemble_rows("ab", _params(n=cfg.n, p=cfg.p, s=s), stats)
    return SuiteResult("ab", CONSTANT_COLUMNS, rows, summ)


def suite_multipliers(cfg: ExperimentConfig, opts: SuiteOptions) -> SuiteResult:
    """Frac-Laplacian block ratios, resolvent bounds and the resolvent gain slope."""
    p, s = cfg.p, cfg.s
    rows: list[list[Any]] = []
    maxima: dict[str, dict[int, float]] = {}
    seeds = ensemble_seeds(cfg.seeds["ensemble"], cfg.ensemble_size)
    for N in _resolutions(cfg):
        grid = make_grid(cfg.n, N, cfg.L)
        fields = [random_field(grid, SpectrumProfile(0.0, 5 * grid.k0, sd)) for sd in seeds]
        tests = {}
        for a in (-1.0, 0.5, 2.0):
            ratios = []
            for f in fields:
                lhs = besov_norm(frac_laplacian(f, a), BesovIndex(s - a, p, math.inf)).per_block
                rhs = besov_norm(f, BesovIndex(s, p, math.inf)).per_block
                ratios.extend(l / r for (_, l), (_, r) in zip(lhs, rhs) if r > 0)
            tests[_params(op="frac_laplacian", a=a, s=s, p=p)] = ConstantStats.from_ratios(ratios)
        for theta in (2 * math.pi / 3, math.pi):
            ratios = []
            for r in (1.0, 10.0, 100.0):
                pt = SectorPoint.polar(r, theta)
                for f in fields:
                    ratios.append(besov(resolvent_laplacian(f, pt), s, p) * r / besov(f, s, p))
            tests[_params(op="resolvent", arg=theta, s=s, p=p)] = ConstantStats.from_ratios(ratios)
        ratios = []
        for f in fields:
            for r in (10.0, 100.0, 1000.0):
                _, rep = resolvent_lp_gain(f, SectorPoint.polar(r, 2 * math.pi / 3), b=cfg.n / 1.5, p=1.5, p0=2.0, s=s)
                ratios.append(rep.ratio)
        tests[_params(op="resolvent_gain", b=cfg.n / 1.5, p=1.5, p0=2.0, s=s)] = ConstantStats.from_ratios(ratios)
        ratios = []
        tau = min(0.5, (1 - s) / 2)
        for f in fields:
            for t in np.geomspace(cfg.box_time / 100, cfg.box_time, 5):
                ratios.append(t ** (tau / 2) * besov(heat_semigroup(f, t), s + tau, p, 1.0) / besov(f, s, p))
        tests[_params(op="heat_smoothing", tau=tau, s=s, p=p)] = ConstantStats.from_ratios(ratios)
        for key, st in tests.items():
            rows.append(["multipliers", key, st.max, st.median, N])
            maxima.setdefault(key, {})[N] = st.max
    summary = {key: _verdict(m) for key, m in sorted(maxima.items())}
    return SuiteResult("multipliers", CONSTANT_COLUMNS, rows, summary)


def _sweep_suite(name, cfg, compute) -> SuiteResult:
    """Run ``compute(grid) -> (xs, lhs, rhs)`` at two resolutions; rows are the base resolution."""
    rows = []
    maxima = {}
    for N in _resolutions(cfg):
        xs, lhs, rhs = compute(make_grid(cfg.n, N, cfg.L))
        ratio = np.asarray(lhs) / np.asarray(rhs)
        maxima[N] = float(np.max(ratio))
        if N == cfg.N:
            rows = [[float(x), float(l), float(r), float(q)] for x, l, r, q in zip(xs, lhs, rhs, ratio)]
    cols = list(SWEEP_COLUMNS)
    if name == "resolvent":
        cols[0] = "lam_abs"
    return SuiteResult(name, cols, rows, _verdict(maxima))


def _suite_field(cfg: ExperimentConfig, grid: Grid, alpha: float) -> VectorField:
    return profile_field(grid, alpha, math.floor(cfg.N / 3) * grid.k0, cfg.seeds["ensemble"])


def suite_semigroup(cfg: ExperimentConfig, opts: SuiteOptions) -> SuiteResult:
    s, tau = opts.pick(0.0, 0.5)

    def compute(grid):
        bg = _background(cfg, grid, opts)
        f = _suite_field(cfg, grid, -s - cfg.n / 2)
        t_min, t_max = cfg.window
        ts = np.geomspace(t_max / 10, t_max, 6)
        rep = verify_smoothing(bg, f, s, tau, ts, cfg.p, make_propagator(bg, dt=cfg.dt / 10))
        return ts, rep.smoothing_lhs, ts ** (-tau / 2) * besov(f, s, cfg.p)

    return _sweep_suite("semigroup", cfg, compute)


def suite_resolvent(cfg: ExperimentConfig, opts: SuiteOptions) -> SuiteResult:
    s, tau = opts.pick(-0.5, 0.5)

    def compute(grid):
        bg = _background(cfg, grid, opts)
        f = _suite_field(cfg, grid, -s - cfg.n / 2)
        rs = np.geomspace(1.0, 100.0, 5)
        lhs = [besov(resolvent_A(f, SectorPoint.polar(r, 2 * math.pi / 3), bg)[0], s + tau, cfg.p) for r in rs]
        return rs, lhs, rs ** (-(2 - tau) / 2) * besov(f, s, cfg.p)

    return _sweep_suite("resolvent", cfg, compute)


def suite_critical(cfg: ExperimentConfig, opts: SuiteOptions) -> SuiteResult:
    s, _ = opts.pick(cfg.s_crit, 0.0)

    def compute(grid):
        bg = _background(cfg, grid, opts)
        g = _suite_field(cfg, grid, 2 - s - cfg.n / 2)
        ts = np.geomspace(*cfg.window, 5)
        ratios = critical_ratios(bg, g, s, ts, cfg.p, make_propagator(bg, dt=cfg.dt / 10))
        den = besov(g, s - 2, cfg.p)
        return ts, ratios * den, np.full(len(ts), den)

    return _sweep_suite("critical", cfg, compute)


def suite_generator(cfg: ExperimentConfig, opts: SuiteOptions) -> SuiteResult:
    s, tau = opts.pick(0.5, 0.25)

    def compute(grid):
        bg = _background(cfg, grid, opts)
        f = _suite_field(cfg, grid, -s - cfg.n / 2)
        t_min, t_max = cfg.window
        ts = np.geomspace(t_min, max(t_min * 10, t_max / 10), 5)
        fit = verify_generator(bg, f, ts, s, tau, cfg.p, make_propagator(bg, dt=cfg.dt / 100))
        return ts, fit.values, ts ** (tau / 2) * besov(f, s, cfg.p)

    return _sweep_suite("generator", cfg, compute)


_SUITE_FUNCS = {
    "ab": suite_ab,
    "critical": suite_critical,
    "embedding": suite_embedding,
    "generator": suite_generator,
    "multipliers": suite_multipliers,
    "product": suite_product,
    "resolvent": suite_resolvent,
    "semigroup": suite_semigroup,
}


def run_verification_suites(
    selection: Sequence[str], cfg: ExperimentConfig, opts: SuiteOptions | None = None
) -> list[SuiteResult]:
    """Run the selected suites (``"all"`` expands to every suite), ordered by name."""
    sel = set(selection)
    if not sel:
        raise PreconditionError("suite selection is empty")
    if "all" in sel:
        sel = set(SUITES)
    unknown = sel - set(SUITES)
    if unknown:
        raise ConfigError(f"unknown suites: {', '.join(sorted(unknown))}")
    opts = opts or SuiteOptions()
    return [_SUITE_FUNCS[name](cfg, opts) for name in sorted(sel)]


# ---------------------------------------------------------------------------
# report files


def _fmt(v: Any) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _csv_text(columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def render_report(results, fmt: str) -> str:
    """Text of a report.

    ``StabilityReport``: ``csv`` gives the trace table, ``json`` the summary.
    ``SuiteResult``: ``csv`` gives its rows, ``json`` its summary.  A list of
    suite results renders as a JSON summary keyed by suite name.
    """
    if fmt not in ("csv", "json"):
        raise PreconditionError(f"unknown report format {fmt!r}")
    if isinstance(results, StabilityReport):
        if fmt == "csv":
            return _csv_text(STABILITY_COLUMNS, results.rows())
        return json.dumps(_jsonable(results.summary), indent=2, sort_keys=False) + "\n"
    if isinstance(results, SuiteResult):
        if fmt == "csv":
            return _csv_text(results.columns, results.rows)
        return json.dumps(_jsonable(results.summary), indent=2, sort_keys=True) + "\n"
    results = list(results)
    if fmt == "csv":
        if not results:
            return _csv_text(CONSTANT_COLUMNS, [])
        raise PreconditionError("write one CSV per suite")
    return json.dumps(_jsonable({r.name: r.summary for r in results}), indent=2, sort_keys=True) + "\n"


def emit_report(results, fmt: str, path) -> Path:
    """Write ``render_report(results, fmt)`` to ``path``."""
    text = render_report(results, fmt)
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise SnapshotError(f"cannot write {path}: {exc}") from exc
    return path
