import json
import subprocess
import sys

import numpy as np
import pytest

from squeak import Dataset, KernelSpec, init_full, serialize
from squeak.cli import main


@pytest.fixture
def csv10(tmp_path):
    rng = np.random.default_rng(0)
    path = tmp_path / "ten.csv"
    np.savetxt(path, rng.normal(size=(10, 2)), delimiter=",")
    return path


@pytest.fixture
def labelled(tmp_path):
    rng = np.random.default_rng(1)
    X = rng.uniform(-3, 3, size=(50, 1))
    y = np.sin(X[:, 0]) + 0.1 * rng.normal(size=50)
    path = tmp_path / "lab.csv"
    np.savetxt(path, np.column_stack([X, y]), delimiter=",", header="x,y", comments="")
    return path


def build(args):
    return main(["build", "--gamma", "1", "--eps", "0.5", *map(str, args)])


def test_missing_input_is_usage_error(tmp_path, capsys):
    assert main(["build", "--gamma", "1", "--eps", "0.5", "--qbar", "5", "--out", str(tmp_path / "d.json")]) == 2
    assert "usage" in capsys.readouterr().err


def test_qbar_flags_are_exclusive(csv10, tmp_path):
    assert build(["--input", csv10, "--qbar", "5", "--qbar-auto", "--out", tmp_path / "d.json"]) == 2
    assert build(["--input", csv10, "--out", tmp_path / "d.json"]) == 2


def test_build_sequential_smoke(csv10, tmp_path):
    out = tmp_path / "dict.json"
    assert build(["--input", csv10, "--qbar", "5", "--seed", "3", "--out", out]) == 0
    d = json.loads(out.read_text())
    assert d["n_processed"] == 10 and d["seed"] == 3 and d["q_bar"] == 5
    report = json.loads((tmp_path / "dict.report.json").read_text())
    assert report["algorithm"] == "squeak" and report["seed"] == 3
    assert report["kernel_evals"] <= report["eval_budget"]


def test_build_is_reproducible(csv10, tmp_path):
    outs = []
    for name in ("a.json", "b.json"):
        assert build(["--input", csv10, "--qbar-auto", "--out", tmp_path / name]) == 0
        outs.append((tmp_path / name).read_bytes())
    assert outs[0] == outs[1]
    assert json.loads(outs[0])["seed"] == 0


def test_build_tree_workers_byte_identical(csv10, tmp_path):
    outs = []
    for w in (1, 4):
        out = tmp_path / f"w{w}.json"
        assert build(["--input", csv10, "--qbar", "6", "--tree", "balanced", "--leaves", "4", "--workers", w, "--out", out]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    report = json.loads((tmp_path / "w1.report.json").read_text())
    assert report["work"]["merges"] == 3


def test_build_tree_file(csv10, tmp_path):
    tree = tmp_path / "tree.json"
    tree.write_text(json.dumps({"shape": "custom", "k": 3, "parents": [4, 3, 3, 4, None]}))
    assert build(["--input", csv10, "--qbar", "6", "--tree", tree, "--out", tmp_path / "d.json"]) == 0


@pytest.mark.parametrize(
    "extra",
    [
        ["--tree", "balanced"],
        ["--leaves", "3"],
        ["--tree", "spiral", "--leaves", "2"],
        ["--workers", "0"],
        ["--qbar", "0"],
        ["--bandwidth", "-1"],
    ],
)
def test_build_config_errors(csv10, tmp_path, extra):
    args = ["--input", csv10, "--out", tmp_path / "d.json", *extra]
    if "--qbar" not in extra:
        args += ["--qbar", "5"]
    assert build(args) == 2


def test_build_data_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\nx,3\n")
    assert build(["--input", bad, "--qbar", "5", "--out", tmp_path / "d.json"]) == 3
    assert build(["--input", tmp_path / "none.csv", "--qbar", "5", "--out", tmp_path / "d.json"]) == 3


def test_build_too_many_leaves(csv10, tmp_path):
    assert build(["--input", csv10, "--qbar", "5", "--tree", "balanced", "--leaves", "11", "--out", tmp_path / "d.json"]) == 3


def write_full(path, data_path, gamma=1.0, labels=False, header=False):
    from squeak import load

    data = load(data_path, labels=labels, header=header)
    path.write_bytes(serialize(init_full(data, KernelSpec.gaussian(1.0), gamma, 0.5, 10, seed=2)))
    return path


def test_validate_full_dictionary(csv10, tmp_path, capsys):
    d = write_full(tmp_path / "full.json", csv10)
    assert main(["validate", "--dict", str(d), "--input", str(csv10)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["pass"] is True and report["error"] == pytest.approx(0.0, abs=1e-12)
    assert report["seed"] == 2


def test_validate_corrupted_dictionary(csv10, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"version": 1, "gamma": "x"}')
    assert main(["validate", "--dict", str(bad), "--input", str(csv10)]) == 2
    assert main(["validate", "--dict", str(tmp_path / "missing.json"), "--input", str(csv10)]) == 2


def test_validate_reports_failure(tmp_path, capsys):
    data = tmp_path / "eye.csv"
    np.savetxt(data, np.eye(4), delimiter=",")
    from squeak import Dictionary

    d = Dictionary(np.arange(2), np.ones(2), np.full(2, 10), 1.0, 0.2, 10, KernelSpec.linear())
    path = tmp_path / "half.json"
    path.write_bytes(serialize(d))
    assert main(["validate", "--dict", str(path), "--input", str(data)]) == 1
    assert json.loads(capsys.readouterr().out)["error"] == pytest.approx(0.5)


def test_validate_squeak_output(csv10, tmp_path, capsys):
    out = tmp_path / "s.json"
    assert build(["--input", csv10, "--qbar-auto", "--out", out]) == 0
    code = main(["validate", "--dict", str(out), "--input", str(csv10), "--suite", "--suite-instances", "2"])
    report = json.loads(capsys.readouterr().out)
    assert code in (0, 1)
    for key in ("error", "epsilon", "pass", "d_eff", "dict_size", "mass", "size_bound"):
        assert key in report
    assert len(report["suite"]["blocks"]) == 5


def test_validate_dictionary_from_other_data(csv10, tmp_path):
    d = write_full(tmp_path / "full.json", csv10)
    small = tmp_path / "small.csv"
    np.savetxt(small, np.zeros((3, 2)), delimiter=",")
    assert main(["validate", "--dict", str(d), "--input", str(small)]) == 3


def test_krr_smoke_and_round_trip(labelled, tmp_path, capsys):
    out = tmp_path / "d.json"
    common = ["--input", str(labelled), "--header", "--labels"]
    assert main(["build", *common, "--gamma", "1", "--eps", "0.5", "--qbar", "20", "--out", str(out)]) == 0
    model_path = tmp_path / "model.json"
    assert main(["krr", "--dict", str(out), *common, "--mu", "0.5", "--out", str(model_path)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["n"] == 50 and summary["train_mse"] < 0.5
    from squeak.nystrom import NystromModel

    text = model_path.read_text()
    model = NystromModel.from_json(json.loads(text))
    assert model.dumps() == text and model.n == 50


def test_krr_missing_mu(labelled, tmp_path):
    assert main(["krr", "--dict", "x.json", "--input", str(labelled), "--out", str(tmp_path / "m.json")]) == 2


def test_krr_without_labels(csv10, tmp_path):
    d = write_full(tmp_path / "full.json", csv10)
    assert main(["krr", "--dict", str(d), "--input", str(csv10), "--mu", "1", "--out", str(tmp_path / "m.json")]) == 3


def test_libsvm_input(tmp_path):
    path = tmp_path / "d.svm"
    path.write_text("".join(f"{i % 2} 1:{i / 10} 2:{(i * 7 % 5) / 5}\n" for i in range(12)))
    out = tmp_path / "d.json"
    assert main(["build", "--input", str(path), "--format", "libsvm", "--gamma", "1", "--eps", "0.5",
                 "--qbar", "5", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["n_processed"] == 12


def test_module_entry_point(csv10, tmp_path):
    out = tmp_path / "d.json"
    proc = subprocess.run(
        [sys.executable, "-m", "squeak", "build", "--input", str(csv10), "--gamma", "1", "--eps", "0.5",
         "--qbar", "4", "--out", str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert out.exists()
