import csv
import json

import numpy as np
import pytest
from click.testing import CliRunner

from hsiselect import datasets as ds
from hsiselect.cli import cell_name, main
from hsiselect.cube import GroundTruth, HyperCube


def run(*args, env=None):
    return CliRunner().invoke(main, [str(a) for a in args], env=env, catch_exceptions=False)


@pytest.fixture
def synergy(tmp_path):
    cube, gt = ds.synergy_benchmark()
    return ds.save_envi(cube, tmp_path / "xor"), ds.save_labels(gt, tmp_path / "xor_gt")


@pytest.fixture
def separable(tmp_path):
    """Three classes, each band a clean step function of the class."""
    rng = np.random.default_rng(0)
    labels = rng.permutation(np.arange(48) % 3 + 1).reshape(6, 8)
    vals = np.stack([labels * 10.0 + b for b in range(4)], axis=-1)
    cube = ds.save_envi(HyperCube(vals), tmp_path / "sep")
    gt = ds.save_labels(GroundTruth(labels), tmp_path / "sep_gt")
    return cube, gt


def test_select_writes_traces(synergy, tmp_path):
    cube, gt = synergy
    out = tmp_path / "out"
    res = run("select", "--cube", cube, "--labels", gt, "--method", "mrms", "--k", 5,
              "--levels", 2, "--out", out)
    assert res.exit_code == 0, res.output
    lines = (out / "xor_mrms_k5.trace.txt").read_text().splitlines()
    assert len(lines) == 5 and lines[:2] == ["3", "4"]
    doc = json.loads((out / "xor_mrms_k5.trace.json").read_text())
    assert doc["levels"] == 2 and len(doc["steps"]) == 5


def test_select_mim_first_line_is_planted_band(tmp_path):
    spec = ds.SynthSpec(10, 10, [ds.Noise(), ds.Noise(), ds.Informative()], noise_bands=3,
                        noise_level=0.0, n_classes=3, seed=5)
    c, g = ds.synth_cube(spec)
    cube, gt = ds.save_envi(c, tmp_path / "inf"), ds.save_labels(g, tmp_path / "inf_gt")
    res = run("select", "--cube", cube, "--labels", gt, "--method", "mim", "--k", 3,
              "--out", tmp_path)
    assert res.exit_code == 0, res.output
    assert (tmp_path / "inf_mim_k3.trace.txt").read_text().splitlines()[0] == "2"


def test_unknown_method_is_usage_error(synergy):
    cube, gt = synergy
    res = run("select", "--cube", cube, "--labels", gt, "--method", "nope", "--k", 2)
    assert res.exit_code == 2 and "--method" in res.output


def test_missing_labels_names_flag(synergy):
    cube, _ = synergy
    res = run("classify", "--cube", cube, "--k", 2)
    assert res.exit_code != 0 and "--labels" in res.output


def test_module_error_is_reported(synergy, tmp_path):
    cube, gt = synergy
    res = run("select", "--cube", cube, "--labels", gt, "--k", 99, "--out", tmp_path)
    assert res.exit_code == 1 and "exceeds" in res.output
    bad = tmp_path / "bad.csv"
    bad.write_text("0,0,1\n")
    res = run("select", "--cube", cube, "--labels", bad, "--k", 1, "--out", tmp_path)
    assert res.exit_code == 1 and "2 labeled classes" in res.output


def test_classify_separable_is_perfect(separable, tmp_path):
    cube, gt = separable
    args = ["classify", "--cube", cube, "--labels", gt, "--method", "mim", "--k", 4,
            "--train-frac", 0.5, "--seed", 3, "--out", tmp_path]
    res = run(*args)
    assert res.exit_code == 0, res.output
    base = tmp_path / cell_name("sep", "mim", 4, 0.5, 3)
    first = base.with_name(base.name + ".json").read_text()
    report = json.loads(first)
    assert report["metrics"]["oa"] == 1.0 and report["k"] == 4
    ppm = base.with_name(base.name + ".ppm").read_bytes()
    assert ppm.startswith(b"P6\n8 6\n255\n") and len(ppm) == len(b"P6\n8 6\n255\n") + 8 * 6 * 3
    run(*args)
    second = base.with_name(base.name + ".json").read_text()
    drop = lambda t: [ln for ln in t.splitlines() if "timing_ms" not in ln]  # noqa: E731
    assert drop(first) == drop(second)


def test_classify_from_trace(synergy, tmp_path):
    cube, gt = synergy
    trace = tmp_path / "t.txt"
    trace.write_text("3\n4\n")
    res = run("classify", "--cube", cube, "--labels", gt, "--k", 2, "--trace", trace,
              "--out", tmp_path)
    assert res.exit_code == 0, res.output
    res = run("classify", "--cube", cube, "--labels", gt, "--k", 3, "--trace", trace,
              "--out", tmp_path)
    assert res.exit_code == 1 and "need 3" in res.output


def test_sweep_matches_classify(synergy, tmp_path):
    cube, gt = synergy
    sweep_dir, single_dir = tmp_path / "sweep", tmp_path / "single"
    res = run("sweep", "--cube", cube, "--labels", gt, "--method", "mim,mrms", "--k-list", "2,1",
              "--levels", 2, "--out", sweep_dir)
    assert res.exit_code == 0, res.output
    with open(sweep_dir / "xor_sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["method", "k", "fraction", "seed", "oa", "aa", "kappa",
                             "specificity"]
    assert [(r["method"], r["k"]) for r in rows] == [("mim", "1"), ("mim", "2"),
                                                      ("mrms", "1"), ("mrms", "2")]
    for r in rows:
        name = cell_name("xor", r["method"], int(r["k"]), 0.5, 0) + ".json"
        rep = json.loads((sweep_dir / name).read_text())
        for key in ("oa", "aa", "kappa", "specificity"):
            assert f"{rep['metrics'][key]:.6f}" == r[key]
    res = run("classify", "--cube", cube, "--labels", gt, "--method", "mrms", "--k", 2,
              "--levels", 2, "--out", single_dir)
    assert res.exit_code == 0
    name = cell_name("xor", "mrms", 2, 0.5, 0) + ".json"
    a = json.loads((sweep_dir / name).read_text())
    b = json.loads((single_dir / name).read_text())
    a.pop("timing_ms"), b.pop("timing_ms")
    assert a == b


def test_sweep_single_method_two_rows(synergy, tmp_path):
    cube, gt = synergy
    res = run("sweep", "--cube", cube, "--labels", gt, "--method", "mim", "--k-list", "1,2",
              "--levels", 2, "--out", tmp_path)
    assert res.exit_code == 0
    assert len((tmp_path / "xor_sweep.csv").read_text().splitlines()) == 3


@pytest.mark.parametrize("flag, value", [("--k-list", "1,x"), ("--k-list", "0"),
                                         ("--method", "mim,bogus")])
def test_sweep_bad_lists(synergy, flag, value):
    cube, gt = synergy
    args = {"--method": "mim", "--k-list": "1"}
    args[flag] = value
    res = run("sweep", "--cube", cube, "--labels", gt, *sum(args.items(), ()))
    assert res.exit_code == 2 and flag in res.output


def test_env_overrides(synergy, tmp_path):
    cube, gt = synergy
    env = {"HSISELECT_CUBE": str(cube), "HSISELECT_LABELS": str(gt),
           "HSISELECT_METHOD": "mim", "HSISELECT_LEVELS": "2", "HSISELECT_OUT": str(tmp_path)}
    res = run("select", "--k", 3, env=env)
    assert res.exit_code == 0, res.output
    assert (tmp_path / "xor_mim_k3.trace.txt").exists()


def test_synth_command(tmp_path):
    res = run("synth", "--kind", "informative", "--rows", 4, "--cols", 5, "--out", tmp_path)
    assert res.exit_code == 0
    cube = ds.load_envi(tmp_path / "informative_cube.hdr")
    assert (cube.rows, cube.cols, cube.bands) == (4, 5, 10)
