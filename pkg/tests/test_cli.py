"""End-to-end tests of the command line, driven in process through main().

One subprocess test checks the installed console script; everything else
calls main(argv) directly so coverage and tracebacks stay usable.
"""

import math
import shutil
import subprocess

import numpy as np
import pytest

from rankreg import LogisticLink, QuadratureSpec, ScoreDifferenceLaw, estimate_c1, estimate_pe
from rankreg.cli import main, read_truth_csv


def _generate(tmp_path, *, d=2, n=10, m=5, pe=0.0, lam=1.0, seed=0, prefix="out"):
    out = tmp_path / prefix
    rc = main(
        [
            "generate",
            "--d", str(d),
            "--n", str(n),
            "--m", str(m),
            "--lambda-min", str(lam),
            "--pe", str(pe),
            "--seed", str(seed),
            "--out-prefix", str(out),
        ]
    )
    assert rc == 0
    return out


def _data_lines(path):
    return path.read_bytes().decode().splitlines()[1:]


# --- generate --------------------------------------------------------------

def test_generate_writes_the_three_files_with_the_right_shapes(tmp_path):
    out = _generate(tmp_path, d=2, n=10, m=5)
    assert len(_data_lines(out.with_suffix(".samples.csv"))) == 20  # 2n rows
    assert len(_data_lines(out.with_suffix(".comparisons.csv"))) == 5
    assert len(_data_lines(out.with_suffix(".truth.csv"))) == 1


def test_generate_is_reproducible_byte_for_byte(tmp_path):
    a = _generate(tmp_path, pe=0.3, seed=11, prefix="a")
    b = _generate(tmp_path, pe=0.3, seed=11, prefix="b")
    for suffix in (".samples.csv", ".comparisons.csv", ".truth.csv"):
        assert a.with_suffix(suffix).read_bytes() == b.with_suffix(suffix).read_bytes()


def test_generate_truth_records_the_link_calibration(tmp_path):
    noiseless = read_truth_csv(_generate(tmp_path, prefix="a").with_suffix(".truth.csv"))
    assert noiseless.alpha is None and noiseless.c1 is None
    noisy = read_truth_csv(_generate(tmp_path, pe=0.2, prefix="b").with_suffix(".truth.csv"))
    assert noisy.alpha > 0 and noisy.c1 > 0


# --- estimate --------------------------------------------------------------

def test_estimate_prints_weights_and_metrics(tmp_path, capsys):
    out = _generate(tmp_path, d=2, n=200, m=1000, pe=0.2, seed=3)
    rc = main(
        [
            "estimate",
            "--samples", str(out.with_suffix(".samples.csv")),
            "--comparisons", str(out.with_suffix(".comparisons.csv")),
            "--truth", str(out.with_suffix(".truth.csv")),
            "--out", str(tmp_path / "bh.csv"),
        ]
    )
    captured = capsys.readouterr()
    assert rc == 0
    lines = captured.out.splitlines()
    assert lines[0].startswith("beta_hat=") and len(lines[0].split("=")[1].split(",")) == 2
    assert lines[1].startswith("norm_error=") and float(lines[1].split("=")[1]) >= 0
    assert lines[2].startswith("angle=") and 0 <= float(lines[2].split("=")[1]) <= math.pi
    assert (tmp_path / "bh.csv").read_bytes().startswith(b"n,m,beta_hat_1,beta_hat_2\n200,1000,")


def test_estimate_noiseless_truth_has_no_norm_error_line(tmp_path, capsys):
    out = _generate(tmp_path, d=2, n=50, m=100, pe=0.0)
    rc = main(
        [
            "estimate",
            "--samples", str(out.with_suffix(".samples.csv")),
            "--comparisons", str(out.with_suffix(".comparisons.csv")),
            "--truth", str(out.with_suffix(".truth.csv")),
            "--out", str(tmp_path / "bh.csv"),
        ]
    )
    lines = capsys.readouterr().out.splitlines()
    assert rc == 0
    assert [line.split("=")[0] for line in lines] == ["beta_hat", "angle"]


def test_estimate_flips_with_the_labels(tmp_path, capsys):
    out = _generate(tmp_path, d=3, n=40, m=200, pe=0.1, seed=5)
    args = [
        "estimate",
        "--samples", str(out.with_suffix(".samples.csv")),
        "--comparisons", str(out.with_suffix(".comparisons.csv")),
        "--out", str(tmp_path / "bh.csv"),
    ]
    assert main(args) == 0
    forward = [float(v) for v in capsys.readouterr().out.split("=")[1].split(",")]

    lines = out.with_suffix(".comparisons.csv").read_text().splitlines()
    flipped = [lines[0]]
    for line in lines[1:]:
        i, j, y = line.split(",")
        flipped.append(f"{i},{j},{-int(y)}")
    negated = tmp_path / "negated.csv"
    negated.write_text("\n".join(flipped) + "\n")

    assert main(args[:4] + [str(negated)] + args[5:]) == 0
    backward = [float(v) for v in capsys.readouterr().out.split("=")[1].split(",")]
    assert backward == [-v for v in forward]  # exact, not approximate


def test_estimate_rejects_malformed_comparisons(tmp_path, capsys):
    out = _generate(tmp_path, d=2, n=10, m=5)
    bad = tmp_path / "bad.csv"
    bad.write_text("i,j,y\n1,2,7\n")
    rc = main(
        [
            "estimate",
            "--samples", str(out.with_suffix(".samples.csv")),
            "--comparisons", str(bad),
            "--out", str(tmp_path / "bh.csv"),
        ]
    )
    err = capsys.readouterr().err
    assert rc == 1
    assert err.startswith("error:") and ":2:" in err


def test_estimate_needs_enough_covariance_rows(tmp_path, capsys):
    out = _generate(tmp_path, d=3, n=5, m=4)  # generation is fine, estimation is not
    rc = main(
        [
            "estimate",
            "--samples", str(out.with_suffix(".samples.csv")),
            "--comparisons", str(out.with_suffix(".comparisons.csv")),
            "--out", str(tmp_path / "bh.csv"),
        ]
    )
    assert rc == 1
    assert capsys.readouterr().err.startswith("error:")


def test_estimate_missing_file(tmp_path, capsys):
    rc = main(
        [
            "estimate",
            "--samples", str(tmp_path / "nope.csv"),
            "--comparisons", str(tmp_path / "nope2.csv"),
        ]
    )
    assert rc == 1
    assert capsys.readouterr().err.startswith("error:")


def test_estimate_recovers_direction_at_scale(tmp_path, capsys):
    n = 30_000
    out = _generate(
        tmp_path, d=10, n=n, m=math.ceil(n * math.log(n)), pe=0.2, lam=0.005, seed=4242, prefix="big"
    )
    rc = main(
        [
            "estimate",
            "--samples", str(out.with_suffix(".samples.csv")),
            "--comparisons", str(out.with_suffix(".comparisons.csv")),
            "--truth", str(out.with_suffix(".truth.csv")),
            "--out", str(tmp_path / "bh.csv"),
        ]
    )
    assert rc == 0
    angle_line = capsys.readouterr().out.splitlines()[-1]
    assert float(angle_line.split("=")[1]) <= 0.3


# --- calibrate -------------------------------------------------------------

QUAD = QuadratureSpec()


def _parse_calibrate(stdout):
    fields = dict(part.split("=") for part in stdout.split())
    return {k: float(v) for k, v in fields.items()}


def test_calibrate_forward(capsys):
    assert main(["calibrate", "--alpha", "1", "--sigma-s", "1"]) == 0
    got = _parse_calibrate(capsys.readouterr().out)
    law = ScoreDifferenceLaw(1.0)
    assert got["alpha"] == 1.0
    assert got["c1"] == estimate_c1(LogisticLink(1.0), law, QUAD)
    assert got["pe"] == estimate_pe(LogisticLink(1.0), law, QUAD)


def test_calibrate_solves_and_round_trips(capsys):
    assert main(["calibrate", "--pe", "0.2", "--sigma-s", "2"]) == 0
    got = _parse_calibrate(capsys.readouterr().out)
    assert abs(got["pe"] - 0.2) <= 1e-6
    law = ScoreDifferenceLaw(2.0)
    assert abs(estimate_pe(LogisticLink(got["alpha"]), law, QUAD) - 0.2) <= 1e-6


def test_calibrate_from_parameter_files(tmp_path, capsys):
    beta = tmp_path / "beta.csv"
    beta.write_text("beta_1,beta_2\n1.0,0.0\n")
    sigma = tmp_path / "sigma.csv"
    sigma.write_text("sigma_1_1,sigma_1_2,sigma_2_1,sigma_2_2\n1.0,0.0,0.0,1.0\n")
    rc = main(["calibrate", "--alpha", "1", "--beta-file", str(beta), "--sigma-file", str(sigma)])
    assert rc == 0
    got = _parse_calibrate(capsys.readouterr().out)
    # identity covariance and a unit direction put sigma_s at sqrt(2)
    assert got["c1"] == estimate_c1(LogisticLink(1.0), ScoreDifferenceLaw(math.sqrt(2)), QUAD)


@pytest.mark.parametrize(
    "argv",
    [
        ["calibrate", "--alpha", "1", "--pe", "0.2", "--sigma-s", "1"],
        ["calibrate", "--sigma-s", "1"],
        ["calibrate", "--alpha", "1"],
        ["calibrate", "--alpha", "1", "--sigma-s", "1", "--beta-file", "x.csv"],
        ["calibrate", "--alpha", "1", "--beta-file", "x.csv"],
    ],
)
def test_calibrate_usage_errors(argv, capsys):
    assert main(argv) == 2
    capsys.readouterr()


def test_calibrate_unreachable_target(capsys):
    assert main(["calibrate", "--pe", "0.49999", "--sigma-s", "1"]) == 1
    assert "not reachable" in capsys.readouterr().err


# --- sweep and min-n -------------------------------------------------------

def test_sweep_command_writes_both_files(tmp_path, capsys):
    cfg = tmp_path / "sweep.cfg"
    cfg.write_text("d = 2\nswept_parameter = n\ngrid = 30, 60\nrepetitions = 2\n")
    rc = main(["sweep", "--config", str(cfg), "--out-prefix", str(tmp_path / "sw")])
    assert rc == 0
    assert capsys.readouterr().err == ""
    assert len(_data_lines(tmp_path / "sw.trials.csv")) == 4
    assert len(_data_lines(tmp_path / "sw.agg.csv")) == 2


def test_sweep_command_warns_about_failed_trials(tmp_path, capsys):
    cfg = tmp_path / "sweep.cfg"
    cfg.write_text(
        "d = 2\nswept_parameter = n\ngrid = 30, 60\nrepetitions = 2\ntarget_pe = 0.49999\n"
    )
    rc = main(["sweep", "--config", str(cfg), "--out-prefix", str(tmp_path / "sw")])
    assert rc == 0
    assert "warning: 4 of 4 trials failed" in capsys.readouterr().err


def test_sweep_command_rejects_bad_config(tmp_path, capsys):
    cfg = tmp_path / "sweep.cfg"
    cfg.write_text("d = 2\nswept_parameter = n\n")
    assert main(["sweep", "--config", str(cfg), "--out-prefix", str(tmp_path / "sw")]) == 1
    assert "missing required key 'grid'" in capsys.readouterr().err


def test_min_n_command_finds_and_reports(tmp_path, capsys):
    cfg = tmp_path / "minn.cfg"
    cfg.write_text("d = 2\nn_grid = 30, 60\nangle_threshold = 3.1\nrepetitions = 2\n")
    rc = main(["min-n", "--config", str(cfg), "--out-prefix", str(tmp_path / "mn")])
    assert rc == 0
    assert capsys.readouterr().out.strip() == "30"
    assert (tmp_path / "mn.trials.csv").exists() and (tmp_path / "mn.agg.csv").exists()


def test_min_n_command_reports_not_found(tmp_path, capsys):
    cfg = tmp_path / "minn.cfg"
    cfg.write_text("d = 2\nn_grid = 30, 60\nangle_threshold = 1e-9\nrepetitions = 2\n")
    rc = main(["min-n", "--config", str(cfg), "--out-prefix", str(tmp_path / "mn")])
    assert rc == 0
    assert capsys.readouterr().out.strip() == "not-found"


# --- usage -----------------------------------------------------------------

@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["generate", "--wat"], ["generate"]])
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    capsys.readouterr()


def test_console_script_is_installed():
    exe = shutil.which("rankreg")
    assert exe is not None
    proc = subprocess.run(
        [exe, "calibrate", "--alpha", "1", "--sigma-s", "1"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert proc.stdout.startswith("c1=")
