import argparse

import pandas as pd
import pytest

from selseg import segment_cli
from selseg.core.image_io import load_image, save_markers, save_pgm
from selseg.core.report import read_report
from selseg.core.synthetic import disk, mask_markers


@pytest.fixture
def inputs(tmp_path):
    image, truth = disk(64)
    image_path = save_pgm(tmp_path / "disk.pgm", image)
    markers_path = save_markers(tmp_path / "markers.txt", mask_markers(truth))
    return tmp_path, ["--image", str(image_path), "--markers", str(markers_path),
                      "--coarsest", "32"]


def _run(tmp_path, args):
    return segment_cli.main(["--log", str(tmp_path / "selseg.log")] + args)


def test_segment_command(inputs, capsys):
    tmp_path, common = inputs
    out = tmp_path / "out"
    code = _run(tmp_path, ["segment"] + common + ["--output-dir", str(out), "--max-cycles", "2",
                                                  "--save-phi", str(tmp_path / "phi.npy")])
    assert code == 0
    for name in ("mask.pgm", "overlay.pgm", "report.txt"):
        assert (out / name).exists()
    assert (tmp_path / "phi.npy").exists()
    assert load_image(out / "mask.pgm").shape == (64, 64)
    report = read_report(out / "report.txt")
    assert 1 <= report["cycles"] <= 2
    assert report["mu_max"] is None
    assert "cycles in" in capsys.readouterr().out
    assert (tmp_path / "selseg.log").exists()


def test_usage_errors_exit_with_two(inputs):
    tmp_path, common = inputs
    assert _run(tmp_path, ["segment", "--no-such-flag"]) == 2
    assert _run(tmp_path, ["segment"] + common + ["--model", "snake"]) == 2
    assert _run(tmp_path, ["segment"] + common + ["--mu", "-1"]) == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("1 1\n2 2\n99 3\n")
    args = ["segment"] + common
    args[args.index("--markers") + 1] = str(bad)
    assert _run(tmp_path, args) == 2


def test_missing_image_is_a_runtime_error(inputs):
    tmp_path, common = inputs
    args = ["segment"] + common
    args[args.index("--image") + 1] = str(tmp_path / "missing.pgm")
    assert _run(tmp_path, args) == 1


def test_unreadable_inputs_exit_without_traceback(inputs):
    tmp_path, common = inputs
    garbage = tmp_path / "phi.npy"
    garbage.write_bytes(b"not an array")
    assert _run(tmp_path, ["lfa"] + common + ["--samples", "32", "--phi", str(garbage)]) == 1
    binary = tmp_path / "binary.txt"
    binary.write_bytes(b"\xff\xfe1 2\n")
    args = ["segment"] + common
    args[args.index("--markers") + 1] = str(binary)
    assert _run(tmp_path, args) == 2
    assert "not UTF-8" in (tmp_path / "selseg.log").read_text()


def test_lfa_command(inputs, capsys):
    tmp_path, common = inputs
    out = tmp_path / "lfa"
    code = _run(tmp_path, ["lfa"] + common + ["--samples", "32", "--threshold", "0.6",
                                              "--output-dir", str(out),
                                              "--worst-csv", str(tmp_path / "worst.csv")])
    assert code == 0
    assert (out / "rates_gsline1.pgm").exists()
    report = read_report(out / "lfa.txt")
    assert report["cycles"] is None
    assert 0 < report["mu_max"] <= 1
    worst = pd.read_csv(tmp_path / "worst.csv")
    assert list(worst.columns) == ["i", "j", "mu", "A", "B", "C", "D"]
    assert "gsline1: mu_max" in capsys.readouterr().out


def test_bench_command(inputs):
    tmp_path, common = inputs
    common[common.index("--coarsest") + 1] = "16"
    csv = tmp_path / "bench.csv"
    code = _run(tmp_path, ["bench"] + common + ["--sizes", "32,64", "--max-cycles", "1",
                                                "--csv", str(csv)])
    assert code == 0
    table = pd.read_csv(csv)
    assert list(table["size"]) == [32, 64]


def test_tune_command(inputs, capsys):
    tmp_path, common = inputs
    csv = tmp_path / "tune.csv"
    code = _run(tmp_path, ["tune"] + common + ["--nus", "1-2", "--max-cycles", "1",
                                               "--csv", str(csv)])
    assert code == 0
    assert list(pd.read_csv(csv)["nu"]) == [1, 2]
    assert "recommended nu:" in capsys.readouterr().out


def test_int_list():
    assert segment_cli._int_list("128,256") == [128, 256]
    assert segment_cli._int_list("1-3") == [1, 2, 3]
    with pytest.raises(argparse.ArgumentTypeError):
        segment_cli._int_list("a,b")
