import math

import numpy as np
import pytest

from smumle.cli import main
from smumle.io import read_dataset, read_mixing, read_summary, write_dataset, write_mixing
from smumle.smu import MixingMeasure


@pytest.fixture
def example(tmp_path):
    path = tmp_path / "ex.csv"
    write_dataset(path, [(1.0, 3.0), (3.0, 2.0)])
    return path


def test_simulate_is_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--dim", "2", "--n", "100", "--seed", "7", "--out", str(a)]) == 0
    assert main(["simulate", "--dim", "2", "--n", "100", "--seed", "7", "--out", str(b)]) == 0
    assert (a / "data.csv").read_bytes() == (b / "data.csv").read_bytes()
    x = read_dataset(a / "data.csv")
    assert x.shape == (100, 2)
    meta = read_summary(a / "data.meta")
    assert meta["seed"] == "7" and meta["truth"] == "exp-product d=2"


def test_simulate_discrete_truth(tmp_path):
    truth = tmp_path / "truth.csv"
    write_mixing(truth, MixingMeasure.point_mass((2.0, 2.0)))
    out = tmp_path / "s"
    assert main(["simulate", "--truth", f"file:{truth}", "--n", "50", "--seed", "1", "--out", str(out)]) == 0
    x = read_dataset(out / "data.csv")
    assert np.all((x > 0) & (x <= 2.0))


def test_simulate_rejects_bad_truth(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("w,y1\n-1,2\n")
    assert main(["simulate", "--truth", f"file:{bad}", "--n", "5", "--out", str(tmp_path)]) == 2
    assert "negative weight" in capsys.readouterr().err


def test_fit_example_and_certify_round_trip(tmp_path, example, capsys):
    out = tmp_path / "fit"
    assert main(["fit", str(example), "--out", str(out)]) == 0
    summary = read_summary(out / "summary.txt")
    assert float(summary["loglik"]) == pytest.approx(-math.log(72), abs=1e-12)
    assert summary["certified"] == "true"
    fitted = np.loadtxt(out / "fitted.csv", delimiter=",", skiprows=1)[:, -1]
    assert fitted == pytest.approx([1 / 6, 1 / 12], abs=1e-12)
    capsys.readouterr()
    assert main(["certify", str(example), str(out / "mixing.csv")]) == 0
    assert "result: pass" in capsys.readouterr().out


def test_fit_one_dimensional_reports_oracle(tmp_path):
    data = tmp_path / "d1.csv"
    write_dataset(data, np.random.default_rng(0).exponential(size=(40, 1)))
    assert main(["fit", str(data), "--out", str(tmp_path / "f")]) == 0
    assert read_summary(tmp_path / "f" / "summary.txt")["oracle-agree"] == "true"


def test_fit_uncertified_exits_nonzero_but_writes(tmp_path):
    data = tmp_path / "d.csv"
    write_dataset(data, np.random.default_rng(1).exponential(size=(30, 2)))
    out = tmp_path / "f"
    assert main(["fit", str(data), "--max-iter", "1", "--tol", "1e-14", "--policy", "grow", "--out", str(out)]) == 1
    assert read_mixing(out / "mixing.csv").dim == 2


def test_certify_failures(tmp_path, example, capsys):
    unif = tmp_path / "unif.csv"
    write_mixing(unif, MixingMeasure([(1, 2), (1, 3), (3, 2), (3, 3)], np.ones(4)))
    assert main(["certify", str(example), str(unif)]) == 1
    far = tmp_path / "far.csv"
    write_mixing(far, MixingMeasure.point_mass((1.0, 1.0)))
    assert main(["certify", str(example), str(far)]) == 1
    assert "zero at 2 data point(s)" in capsys.readouterr().out


def test_eval_and_dist(tmp_path, example, capsys):
    mix = tmp_path / "m.csv"
    write_mixing(mix, MixingMeasure.point_mass((2.0,)))
    other = tmp_path / "o.csv"
    write_mixing(other, MixingMeasure.point_mass((1.0,)))
    probes = tmp_path / "p.csv"
    write_dataset(probes, [(0.5,), (3.0,)])
    assert main(["eval", str(mix), "--probes", str(probes)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "x1,density,cdf"
    assert out[1] == "0.5,0.5,0.25"
    assert main(["dist", str(mix), str(other)]) == 0
    report = dict(line.split(": ") for line in capsys.readouterr().out.splitlines())
    assert float(report["l1"]) == pytest.approx(1.0)
    assert main(["dist", str(mix), "--truth", "exp", "--probes", str(probes)]) == 0
    report = dict(line.split(": ") for line in capsys.readouterr().out.splitlines())
    assert float(report["hellinger"]) ** 2 == pytest.approx(1 - math.sqrt(0.5) * 2 * (1 - math.exp(-1)))


def test_minimax_report(tmp_path, capsys):
    assert main(["minimax", "--dim", "1", "--out", str(tmp_path)]) == 0
    report = read_summary(tmp_path / "minimax.txt")
    assert report["mml1_pass"] == "true"
    assert report["mml2_verdict"] == "derived"
    assert float(report["mml2_printed_constant"]) == pytest.approx(8 / 3)
    assert report["membership_accepted"] == "true"


def test_minimax_sign_violation(capsys):
    assert main(["minimax", "--dim", "2", "--b", "-1"]) == 2
    assert "assumption" in capsys.readouterr().err


def test_minimax_theta_ratio(capsys):
    values = []
    for theta in ("0.999", "0.5"):
        main(["minimax", "--dim", "1", "--theta", theta, "--limit-from", "8", "--limit-to", "10"])
        report = dict(line.split(": ", 1) for line in capsys.readouterr().out.splitlines())
        values.append(float(report["lower_bound_constant_theta"]))
    assert values[0] / values[1] == pytest.approx((0.999 / 0.5) ** (1 / 3), rel=1e-12)


def test_sweep_writes_sorted_rows(tmp_path):
    out = tmp_path / "sw"
    assert main(["sweep", "--dim", "1", "--n", "20,40", "--reps", "2", "--seed", "3", "--out", str(out)]) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0] == "n,rep,hellinger,l1,ptwise_err,iters,cert_gap,certified,wall_ms"
    keys = [tuple(map(int, r.split(",")[:2])) for r in lines[1:]]
    assert keys == [(20, 0), (20, 1), (40, 0), (40, 1)]
    assert "slope" in read_summary(out / "summary.txt")
