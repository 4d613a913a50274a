import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from conftest import two_mode_mixture
from ou_diffuse.cli import main
from ou_diffuse.data import SampleMatrix, load_csv, write_csv

NS = "{http://www.w3.org/2000/svg}"
SMALL = ["--steps", "20", "--beta-min", "0.01", "--beta-max", "0.6"]


def cli(tmp_path, command, *argv):
    if command == "replay":
        return main([command, *argv])
    return main([command, "--quiet", "--output-dir", str(tmp_path), *argv])


@pytest.fixture
def mixture_csv(tmp_path):
    pts, lab = two_mode_mixture(200, seed=0)
    path = tmp_path / "mix.csv"
    write_csv(SampleMatrix(pts, ["a", "b"], lab, "mode"), path)
    return path


@pytest.fixture
def trained(tmp_path, mixture_csv):
    code = cli(tmp_path, "train", "--input", str(mixture_csv), "--label-column", "mode",
               "--epochs", "3", "--batch", "64", "--width", "16", "--depth", "2", *SMALL,
               "--output", "m.json")
    assert code == 0
    return tmp_path / "m.json"


def test_simulate_writes_csv_svg_and_manifest(tmp_path):
    code = cli(tmp_path, "simulate", "--x0", "3", "--trajectories", "10", "--seed", "7",
               "--svg", "f.svg", *SMALL)
    assert code == 0
    rows = (tmp_path / "trajectories.csv").read_text().splitlines()
    assert rows[0] == "trajectory_id,n,t,x_1" and len(rows) == 1 + 10 * 21
    starts = [r for r in rows[1:] if r.split(",")[1] == "0"]
    assert len(starts) == 10 and all(float(r.split(",")[3]) == 3.0 for r in starts)
    root = ET.parse(tmp_path / "f.svg").getroot()
    assert len(root.findall(f".//{NS}polyline")) >= 10
    man = json.loads((tmp_path / "trajectories.csv.manifest.json").read_text())
    assert man["subcommand"] == "simulate" and man["seed"] == 7
    assert man["config"]["trajectories"] == 10 and "tool_version" in man and "wall_time_s" in man


def test_simulate_kde_terminal_density_near_normal(tmp_path):
    # 500 paths from x0 = 3 on the default grid; the terminal sample is close to N(0, 1)
    assert cli(tmp_path, "simulate", "--x0", "3", "--trajectories", "500", "--svg", "k.svg") == 0
    data = np.loadtxt(tmp_path / "trajectories.csv", delimiter=",", skiprows=1)
    last = data[data[:, 1] == data[:, 1].max(), 3]
    assert abs(last.mean()) < 4 / np.sqrt(500) and abs(last.var() - 1) < 0.2
    ET.parse(tmp_path / "k.svg")


@pytest.mark.parametrize("argv", [
    ["simulate", "--x0", "3", "--trajectories", "0"],
    ["simulate", "--x0", "abc", "--trajectories", "3"],
    ["simulate", "--trajectories", "3"],
    ["train"],
    ["frobnicate"],
])
def test_usage_errors_exit_2(tmp_path, capsys, argv):
    assert cli(tmp_path, *argv) == 2
    assert "usage" in capsys.readouterr().err


def test_runtime_errors_exit_1(tmp_path, capsys):
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n3,x\n")
    assert cli(tmp_path, "train", "--input", str(tmp_path / "bad.csv")) == 1
    err = capsys.readouterr().err
    assert "line 3" in err and len(err.strip().splitlines()) == 1
    assert cli(tmp_path, "generate", "--model", str(tmp_path / "missing.json"), "--count", "3") == 1


def test_train_generate_and_model_flag(tmp_path, trained):
    doc = json.loads(trained.read_text())
    assert doc["train_config"]["eps_skip"] is True
    assert cli(tmp_path, "generate", "--model", str(trained), "--count", "50", "--seed", "3") == 0
    out = load_csv(tmp_path / "generated.csv")
    assert out.features.shape == (50, 2) and out.columns == ["a", "b"]
    assert (tmp_path / "m.loss.csv").read_text().count("\n") == 4


def test_replay_is_byte_identical(tmp_path, mixture_csv, trained):
    runs = [
        ("trajectories.csv", ["simulate", "--x0", "1,-1", "--trajectories", "5", *SMALL]),
        ("generated.csv", ["generate", "--model", str(trained), "--count", "40", "--seed", "9"]),
        ("train.csv", ["split", "--input", str(mixture_csv), "--label-column", "mode", "--seed", "4"]),
        ("t.svg", ["timeline", "--data", str(mixture_csv), "--label-column", "mode",
                   "--model", str(trained), "--count", "30", "--output", "t.svg"]),
    ]
    for name, argv in runs:
        assert cli(tmp_path, *argv) == 0
        first = (tmp_path / name).read_bytes()
        csv_side = (tmp_path / name).with_suffix(".csv").read_bytes()
        (tmp_path / name).unlink()
        assert cli(tmp_path, "replay", str(tmp_path / (name + ".manifest.json"))) == 0
        assert (tmp_path / name).read_bytes() == first
        assert (tmp_path / name).with_suffix(".csv").read_bytes() == csv_side
    # training is reproducible too: the model file and loss curve match byte for byte
    model_bytes, loss_bytes = trained.read_bytes(), (tmp_path / "m.loss.csv").read_bytes()
    assert cli(tmp_path, "replay", str(tmp_path / "m.json.manifest.json")) == 0
    assert trained.read_bytes() == model_bytes and (tmp_path / "m.loss.csv").read_bytes() == loss_bytes


def test_replay_bad_manifest(tmp_path):
    (tmp_path / "x.json").write_text("{}")
    assert cli(tmp_path, "replay", str(tmp_path / "x.json")) == 1


def test_timeline_panels_and_dimension_check(tmp_path, mixture_csv, trained):
    assert cli(tmp_path, "timeline", "--data", str(mixture_csv), "--label-column", "mode",
               "--model", str(trained), "--snapshots", "0,5,10,20", "--count", "25") == 0
    root = ET.parse(tmp_path / "timeline.svg").getroot()
    assert len(root.findall(f".//{NS}clipPath")) == 8
    (tmp_path / "three.csv").write_text("a,b,c\n1,2,3\n4,5,7\n")
    assert cli(tmp_path, "timeline", "--data", str(tmp_path / "three.csv"), "--model", str(trained)) == 2
    assert cli(tmp_path, "timeline", "--data", str(mixture_csv), "--label-column", "mode",
               "--model", str(trained), "--snapshots", "99") == 2


def test_split_and_augment(tmp_path, mixture_csv):
    assert cli(tmp_path, "split", "--input", str(mixture_csv), "--label-column", "mode") == 0
    tr = load_csv(tmp_path / "train.csv", "mode")
    te = load_csv(tmp_path / "test.csv", "mode")
    assert tr.n_rows + te.n_rows == 200 and te.n_rows == 40
    write_csv(SampleMatrix(np.zeros((7, 2)), ["a", "b"]), tmp_path / "syn.csv")
    assert cli(tmp_path, "augment", "--train", str(tmp_path / "train.csv"),
               "--synthetic", str(tmp_path / "syn.csv"), "--label", "1") == 0
    out = load_csv(tmp_path / "augmented.csv", "mode")
    assert out.n_rows == tr.n_rows + 7 and out.provenance.sum() == 7
    assert int(out.labels.sum()) == int(tr.labels.sum()) + 7


def test_evaluate_reproduces_table_counts(tmp_path, capsys):
    # 98 frauds in the test part; the classifier flags 95 rows of which 83 are frauds
    actual = np.zeros(2000, dtype=int)
    actual[:98] = 1
    pred = np.zeros_like(actual)
    pred[:83] = 1
    pred[500:512] = 1
    for name, v in (("pred.csv", pred), ("act.csv", actual)):
        (tmp_path / name).write_text("Class\n" + "\n".join(map(str, v)) + "\n")
    assert cli(tmp_path, "evaluate", "--predictions", str(tmp_path / "pred.csv"),
               "--actual", str(tmp_path / "act.csv")) == 0
    line = capsys.readouterr().out
    assert "tp=83 fp=12 fn=15" in line
    assert "precision=0.8737" in line and "recall=0.8469" in line and "f1=0.8601" in line
    table = dict(r.split(",") for r in (tmp_path / "evaluation.csv").read_text().splitlines()[1:])
    assert round(float(table["f1"]), 4) == 0.8601


def test_distance_with_threshold(tmp_path, capsys):
    r = np.random.default_rng(0)
    for name, shift in (("a.csv", 0.0), ("b.csv", 0.0), ("c.csv", 3.0), ("pool.csv", 0.0)):
        write_csv(SampleMatrix(shift + r.standard_normal((150 if name != "pool.csv" else 400, 2)),
                               ["a", "b"]), tmp_path / name)
    pool = ["--pool", str(tmp_path / "pool.csv"), "--null-splits", "50"]
    assert cli(tmp_path, "distance", str(tmp_path / "a.csv"), str(tmp_path / "c.csv"), *pool) == 0
    assert "(above)" in capsys.readouterr().out
    assert cli(tmp_path, "distance", str(tmp_path / "a.csv"), str(tmp_path / "b.csv")) == 0
    assert "energy_distance=" in capsys.readouterr().out
