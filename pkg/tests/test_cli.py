import csv
import json

import pytest

from syndcorr.cli import main
from syndcorr.io import read_dataset, write_dataset
from syndcorr.noise_sim import SyndromeDataset


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["simulate", "--cycles", "3", "--shots", "4000", "--seed", "2", "--out", str(root / "sim")]) == 0
    data = str(root / "sim" / "dataset.qsyn")
    assert main(["infer", "--data", data, "--boot", "5", "--out", str(root / "inf")]) == 0
    return root, data


def manifest(path):
    return json.loads((path / "manifest.json").read_text())


def test_simulate_and_infer_outputs(pipeline):
    root, data = pipeline
    m = manifest(root / "sim")
    assert m["seed"] == 2 and m["command"] == "simulate"
    assert [o["path"] for o in m["outputs"]] == ["dataset.qsyn"]
    assert read_dataset(data).n_shots == 4000
    mi = manifest(root / "inf")
    assert mi["inputs"][0]["sha256"] == m["outputs"][0]["sha256"]
    assert {o["path"] for o in mi["outputs"]} == {"model.json", "model_absolute.json"}
    assert "timestamp" not in json.dumps(mi)


def test_reruns_are_identical(pipeline, tmp_path):
    root, data = pipeline
    assert main(["simulate", "--cycles", "3", "--shots", "4000", "--seed", "2", "--out", str(tmp_path / "s")]) == 0
    assert manifest(tmp_path / "s")["outputs"] == manifest(root / "sim")["outputs"]
    assert main(["infer", "--data", data, "--boot", "5", "--out", str(tmp_path / "i")]) == 0
    assert manifest(tmp_path / "i")["outputs"] == manifest(root / "inf")["outputs"]


def test_graph_decode_diagnose(pipeline, tmp_path, capsys):
    root, data = pipeline
    model = str(root / "inf" / "model.json")
    assert main(["graph", "--model", model, "--cycles", "3", "--out", str(tmp_path / "g")]) == 0
    assert (tmp_path / "g" / "graph_Z.dot").exists()
    assert main(["decode", "--data", data, "--model", model, "--gamma", "0.2", "--out", str(tmp_path / "d")]) == 0
    rows = list(csv.DictReader(open(tmp_path / "d" / "summary.csv")))
    assert len(rows) == 1 and 0.5 < float(rows[0]["F"]) <= 1.0 and rows[0]["cycles"] == "3"
    assert main(["diagnose", "--data", data, "--model", model, "--out", str(tmp_path / "x")]) == 0
    for name in ("fig3a_cov.csv", "fig3b_classes.csv", "fig4a.csv", "fig4b.csv", "fig5a.csv", "appB.csv"):
        assert (tmp_path / "x" / name).exists()
    capsys.readouterr()


def test_demos(tmp_path, capsys):
    assert main(["demo-bias", "--out", str(tmp_path / "b")]) == 0
    out = capsys.readouterr().out
    assert "p12=0.034500" in out and "p2=-0.010204" in out
    assert main(["demo-drift", "--p", "0.05", "--shots", "0", "--out", str(tmp_path / "h")]) == 0
    assert "p12=0.003058" in capsys.readouterr().out
    assert (tmp_path / "h" / "appH.csv").exists()


def test_validate_small(tmp_path, capsys):
    assert main(["validate", "--channels", "10", "--shots", "20000", "--boot", "20", "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "validation.csv")))
    assert len(rows) == 10 and set(rows[0]) == {"weight", "true_p", "inferred_p", "stderr", "z"}
    capsys.readouterr()


def test_malformed_input_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.qsyn"
    bad.write_bytes(b"QECSYN 1\ndetectors 1\ndet Z1 2\nshots 1\n2\n")
    assert main(["infer", "--data", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert f"{bad}:5:1:" in capsys.readouterr().err


def test_nonpositive_moment_exits_2(pipeline, tmp_path, capsys):
    _, data = pipeline
    ds = read_dataset(data)
    bits = ds.shots.copy()
    bits[:, 0] = 1
    p = tmp_path / "stuck.qsyn"
    write_dataset(p, SyndromeDataset.from_bits(ds.detector_list, bits, ds.truth))
    args = ["infer", "--data", str(p), "--cycles", "3", "--boot", "0", "--out", str(tmp_path / "o")]
    assert main(args + ["--strict"]) == 2
    assert "numerical failure" in capsys.readouterr().err
    assert main(args) == 0


def test_config_defaults_and_override(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"shots": 100, "cycles": 2, "seed": 9}))
    assert main(["simulate", "--config", str(cfg), "--shots", "200", "--out", str(tmp_path / "a")]) == 0
    m = manifest(tmp_path / "a")
    assert m["options"]["shots"] == 200 and m["options"]["cycles"] == 2 and m["seed"] == 9
    cfg.write_text('{"shots": 1,\n "nope": 2}')
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 1
    cfg.write_text('{"shots": 1,\n oops}')
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 1
    assert f"{cfg}:2:2:" in capsys.readouterr().err
