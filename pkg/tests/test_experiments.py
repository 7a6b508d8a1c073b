import json
import math

import numpy as np
import pytest

from nsbesov import BesovIndex, besov, besov_norm
from nsbesov.errors import ConfigError, ExponentOutOfRange, InsufficientSamples, NonpositiveNorm, PreconditionError, WindowViolation
from nsbesov.experiments import (
    CONSTANT_COLUMNS,
    STABILITY_COLUMNS,
    SUMMARY_KEYS,
    ExperimentConfig,
    SuiteOptions,
    SuiteResult,
    build_forcing,
    build_perturbation,
    emit_report,
    fit_decay,
    geometric_times,
    render_report,
    run_stability_experiment,
    run_verification_suites,
    taylor_green_forcing,
)


class TestConfig:
    def test_defaults_are_valid(self):
        cfg = ExperimentConfig()
        assert cfg.s_crit == pytest.approx(0.5)
        assert cfg.gamma == pytest.approx(0.0)
        assert cfg.window == pytest.approx((0.001, 0.1))
        assert cfg.fit == pytest.approx((0.01, 0.1))

    def test_box_scales_with_length(self):
        cfg = ExperimentConfig(L=16 * math.pi)
        assert cfg.box_time == pytest.approx(6.4)

    def test_json_round_trip(self, tmp_path):
        cfg = ExperimentConfig(N=16, epsilon=0.02, seeds={"forcing": 5, "perturbation": 6, "ensemble": 7})
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg.to_dict()))
        assert ExperimentConfig.from_json(path) == cfg

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="bogus"):
            ExperimentConfig.from_dict({"bogus": 1})

    def test_bad_json(self, tmp_path):
        (tmp_path / "x.json").write_text("{")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_json(tmp_path / "x.json")

    @pytest.mark.parametrize(
        "changes,err",
        [
            ({"p": 3.0}, ExponentOutOfRange),
            ({"tau_H": 0.6}, ExponentOutOfRange),
            ({"s": 0.5}, ExponentOutOfRange),
            ({"tau_L": 0.3}, ExponentOutOfRange),
            ({"t_max": 1.0}, WindowViolation),
            ({"t_min": 0.2, "t_max": 0.1}, WindowViolation),
            ({"fit_window": [0.0001, 0.05]}, WindowViolation),
            ({"method": "rk4"}, ConfigError),
            ({"seeds": {"forcing": 1}}, ConfigError),
        ],
    )
    def test_validation(self, changes, err):
        with pytest.raises(err):
            ExperimentConfig().replace(**changes)


class TestFixtures:
    def test_taylor_green_is_solenoidal(self, grid16):
        f = taylor_green_forcing(grid16, 2)
        assert f.divergence_defect() < 1e-13
        assert np.abs(f.physical()).max() == pytest.approx(1.0, rel=1e-2)

    def test_forcing_normalization(self):
        cfg = ExperimentConfig(N=16, forcing_amplitude=3.0)
        f = build_forcing(cfg, cfg.grid())
        assert besov(f, cfg.s_crit - 2) == pytest.approx(3.0)
        assert build_forcing(cfg.replace(forcing_amplitude=0.0), cfg.grid()) is None
        r = build_forcing(cfg.replace(forcing_kind="random"), cfg.grid())
        assert besov(r, cfg.s_crit - 2) == pytest.approx(3.0)

    def test_perturbation_normalization(self):
        cfg = ExperimentConfig(N=16, epsilon=0.01)
        b = build_perturbation(cfg, cfg.grid())
        assert besov(b, cfg.s_crit) == pytest.approx(0.01)
        assert b.divergence_defect() < 1e-12

    def test_perturbation_is_flat_in_base_space(self):
        cfg = ExperimentConfig(N=32)
        b = build_perturbation(cfg, cfg.grid())
        blocks = [w for _, w in besov_norm(b, BesovIndex(cfg.s, 2, math.inf)).per_block]
        inner = blocks[2:-2]
        assert max(inner) / min(inner) < 1.5

    def test_geometric_times(self):
        ts = geometric_times(0.01, 0.1, 2)
        assert ts[0] == 0.01 and ts[-1] == 0.1
        np.testing.assert_allclose(ts[1] / ts[0], math.sqrt(2))


class TestDecayFit:
    def test_exact_power_law(self):
        t = np.geomspace(0.1, 1, 8)
        fit = fit_decay(list(zip(t, 2 * t**-0.125)), (0.1, 1), -0.125)
        assert fit.slope == pytest.approx(-0.125)
        assert fit.r2 == pytest.approx(1.0)
        assert fit.passes and fit.decays_as_predicted

    def test_one_sided_check(self):
        t = np.geomspace(0.1, 1, 8)
        fit = fit_decay(list(zip(t, t**-0.5)), (0.1, 1), -0.125)
        assert fit.decays_as_predicted and not fit.passes

    def test_too_few_samples(self):
        t = np.geomspace(0.1, 1, 8)
        with pytest.raises(InsufficientSamples):
            fit_decay(list(zip(t, t)), (0.5, 1), -0.1)

    def test_nonpositive(self):
        t = np.geomspace(0.1, 1, 8)
        with pytest.raises(NonpositiveNorm):
            fit_decay(list(zip(t, 0 * t)), (0.1, 1), -0.1)


class TestStability:
    def test_small_run(self):
        cfg = ExperimentConfig(N=16, forcing_amplitude=2.0, epsilon=1e-3, dt=0.01)
        rep = run_stability_experiment(cfg)
        assert list(rep.summary) == SUMMARY_KEYS
        assert len(rep.rows()[0]) == len(STABILITY_COLUMNS)
        assert rep.sup_base == pytest.approx(1e-3, rel=0.5)
        assert rep.fits["high"].slope < 0
        csv = render_report(rep, "csv")
        assert csv.splitlines()[0] == ",".join(STABILITY_COLUMNS)

    def test_unperturbed_fixture(self):
        cfg = ExperimentConfig(N=16, forcing_amplitude=2.0, epsilon=0.0, dt=0.01)
        rep = run_stability_experiment(cfg)
        assert "stationary fixture" in rep.flags
        assert rep.sup_base < 1e-10


class TestSuites:
    def test_selection(self):
        with pytest.raises(ConfigError):
            run_verification_suites(["nope"], ExperimentConfig())
        with pytest.raises(PreconditionError):
            run_verification_suites([], ExperimentConfig())

    def test_ensemble_suites(self):
        cfg = ExperimentConfig(N=16, ensemble_size=4)
        res = run_verification_suites(["embedding", "product", "ab"], cfg)
        assert [r.name for r in res] == ["ab", "embedding", "product"]
        for r in res:
            assert r.columns == CONSTANT_COLUMNS
            assert r.summary["finite"]
            assert set(r.summary["max_by_resolution"]) == {"16", "32"}

    def test_sweep_suite_with_background_override(self, small_background_field):
        cfg = ExperimentConfig(N=16, t_max=0.05)
        opts = SuiteOptions(U=small_background_field, s=0.0, tau=0.5)
        (res,) = run_verification_suites(["resolvent"], cfg, opts)
        assert res.columns[0] == "lam_abs"
        assert res.summary["stable"]

    def test_report_files(self, tmp_path):
        r = SuiteResult("demo", ["a", "b"], [[1, 0.5]], {"x": np.float64(1.0), "bad": math.nan})
        emit_report(r, "csv", tmp_path / "demo.csv")
        emit_report([r], "json", tmp_path / "summary.json")
        assert (tmp_path / "demo.csv").read_text() == "a,b\n1,0.5\n"
        assert json.loads((tmp_path / "summary.json").read_text()) == {"demo": {"x": 1.0, "bad": None}}
        with pytest.raises(PreconditionError):
            render_report(r, "xml")

    def test_empty_result_set_gives_header_only_csv(self, tmp_path):
        path = emit_report([], "csv", tmp_path / "empty.csv")
        assert path.read_text() == ",".join(CONSTANT_COLUMNS) + "\n"

    def test_reemit_is_byte_identical(self, tmp_path):
        cfg = ExperimentConfig(N=16, ensemble_size=4)
        first = run_verification_suites(["embedding"], cfg)[0]
        second = run_verification_suites(["embedding"], cfg)[0]
        a = emit_report(first, "csv", tmp_path / "a.csv").read_bytes()
        b = emit_report(second, "csv", tmp_path / "b.csv").read_bytes()
        assert a == b
        assert emit_report(first, "csv", tmp_path / "a.csv").read_bytes() == a
