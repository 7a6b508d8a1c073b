import json

import numpy as np
import pytest

from nsbesov import SpectrumProfile, load_snapshot, make_grid, random_field, save_snapshot
from nsbesov.cli import main
from nsbesov.experiments import taylor_green_forcing


@pytest.fixture
def snapshots(tmp_path):
    g = make_grid(3, 8)
    a = random_field(g, SpectrumProfile(0.0, 2.0, 1)) * 0.05
    f = taylor_green_forcing(g, 1)
    save_snapshot(a, tmp_path / "a.nsbf")
    save_snapshot(f, tmp_path / "f.nsbf")
    return tmp_path


def test_norms_json(snapshots, capsys):
    assert main(["norms", "--input", str(snapshots / "a.nsbf"), "--s", "0.5", "--weak-lp", "3"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["value"] > 0 and out["weak_lp"]["p"] == 3.0 and out["q"] is None


def test_norms_csv(snapshots):
    dest = snapshots / "n.csv"
    assert main(["norms", "--input", str(snapshots / "a.nsbf"), "--report", "csv", "--q", "2", "--out", str(dest)]) == 0
    lines = dest.read_text().splitlines()
    assert lines[0] == "j,block_lp,weighted" and lines[-1].startswith("total")


def test_stationary(snapshots, capsys):
    rc = main(["stationary", "--force", str(snapshots / "f.nsbf"), "--out", str(snapshots / "U.nsbf"), "--s", "0.5"])
    assert rc == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["residual"] < 1e-10
    assert load_snapshot(snapshots / "U.nsbf").grid.N == 8


def test_evolve(snapshots):
    prefix = snapshots / "run" / "e"
    rc = main(["evolve", "--initial", str(snapshots / "a.nsbf"), "--T", "0.1", "--samples", "3", "--out-prefix", str(prefix)])
    assert rc == 0
    text = (snapshots / "run" / "e_norms.csv").read_text().splitlines()
    assert text[0] == "t,besov_crit,l2" and len(text) == 5
    assert (snapshots / "run" / "e_0003.nsbf").exists()


def test_verify_writes_reports(tmp_path, capsys):
    out = tmp_path / "v"
    rc = main(["verify", "--suite", "embedding", "--N", "16", "--set", "ensemble_size=3", "--out", str(out)])
    assert rc == 0
    assert (out / "embedding.csv").read_text().startswith("suite,params,ratio_max,ratio_median,resolution")
    assert "embedding" in json.loads((out / "summary.json").read_text())


def test_stability(tmp_path):
    out = tmp_path / "s"
    rc = main(["stability", "--N", "8", "--dt", "0.01", "--epsilon", "0.001", "--set", "forcing_amplitude=1.0", "--out", str(out)])
    assert rc == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["N"] == 8 and "slope_high" in summary


@pytest.mark.parametrize(
    "argv,code",
    [
        (["stability", "--p", "3.5"], 2),
        (["verify", "--suite", "embedding", "--set", "nonsense=1"], 2),
        (["norms", "--input", "/nonexistent/file.nsbf"], 4),
    ],
)
def test_exit_codes(argv, code, capsys):
    assert main(argv) == code
    assert "nsbesov:" in capsys.readouterr().err


def test_numerical_failure_exit_code(tmp_path, capsys):
    g = make_grid(3, 8)
    save_snapshot(taylor_green_forcing(g, 1) * 1e5, tmp_path / "big.nsbf")
    assert main(["stationary", "--force", str(tmp_path / "big.nsbf")]) == 3
