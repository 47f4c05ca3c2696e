import json
import subprocess
import sys

import pytest

from clindiag.cli import main, parse_vector
from clindiag.encoding import LabeledDataset
from clindiag.svm import load_model, save_model, train


def run(*argv):
    try:
        return main([str(a) for a in argv])
    except SystemExit as exc:
        return exc.code


@pytest.fixture
def cohort(tmp_path):
    data, schema = tmp_path / "cohort.csv", tmp_path / "schema.json"
    assert run("synth", "--out", data, "--schema", schema, "--n-per-class", 104,
               "--separation", 6, "--seed", 0) == 0
    return data, schema


def test_synth_is_byte_deterministic(tmp_path):
    for name in ("a.csv", "b.csv"):
        assert run("synth", "--out", tmp_path / name, "--n-per-class", 30, "--seed", 11) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert lines[0] == "x1,x2,x3,x4,x5,diagnosis"
    assert len(lines) == 61


def test_train_separable_cohort(tmp_path, cohort, capsys):
    data, schema = cohort
    model, ev = tmp_path / "m.json", tmp_path / "eval.json"
    assert run("train", "--data", data, "--schema", schema, "--model", model, "--out", ev) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[1].split() == ["Positive", "104", "0", "104"]
    assert out[2].split() == ["Negative", "0", "104", "104"]
    assert out[3].split() == ["Total", "104", "104", "208"]
    doc = json.loads(ev.read_text())
    assert doc["sensitivity"] == doc["specificity"] == "1.000000"
    assert doc["mode"] == "resubstitution"
    assert load_model(model).dim == 5


def test_overlap_fills_every_cell(tmp_path):
    data, schema = tmp_path / "d.csv", tmp_path / "s.json"
    run("synth", "--out", data, "--schema", schema, "--n-per-class", 104, "--overlap", 0.1)
    assert run("train", "--data", data, "--schema", schema, "--model", tmp_path / "m.json",
               "--out", tmp_path / "e.json") == 0
    m = json.loads((tmp_path / "e.json").read_text())["matrix"]
    assert all(m[k] > 0 for k in ("tp", "fp", "fn", "tn"))


def test_single_class_csv(tmp_path, capsys):
    data = tmp_path / "d.csv"
    data.write_text("x1,diagnosis\n1.0,patient\n2.0,patient\n")
    schema = tmp_path / "s.json"
    schema.write_text(json.dumps({"features": [{"name": "x1", "kind": "Numeric"}],
                                  "label_rule": {"label_column": "diagnosis",
                                                 "positive_value": "patient",
                                                 "negative_value": "normal"}}))
    code = run("train", "--data", data, "--schema", schema, "--model", tmp_path / "m.json")
    assert code == 2
    assert "'normal'" in capsys.readouterr().err
    assert not (tmp_path / "m.json").exists()


@pytest.mark.parametrize("c", ["0", "-1", "abc"])
def test_bad_C_is_usage_error(tmp_path, c, capsys):
    code = run("train", "--data", tmp_path / "missing.csv", "--schema", tmp_path / "missing.json",
               "--model", tmp_path / "m.json", "--C", c)
    assert code == 1
    assert "--C" in capsys.readouterr().err


def test_bad_holdout_is_usage_error(tmp_path):
    assert run("evaluate", "--data", "x", "--schema", "y", "--model", "z", "--holdout", "0.95") == 1


def test_missing_data_file_is_data_error(tmp_path):
    assert run("train", "--data", tmp_path / "nope.csv", "--schema", tmp_path / "nope.json",
               "--model", tmp_path / "m.json") == 2


def test_predict_vector(tmp_path, capsys):
    path = tmp_path / "toy.json"
    save_model(train(LabeledDataset([[0, 2], [0, -2]], [1, -1]), C=10), path)
    assert run("predict", "--model", path, "(0,3)") == 0
    assert capsys.readouterr().out == "+1\n"
    assert run("predict", "--model", path, "(0,-3)") == 0
    assert capsys.readouterr().out == "-1\n"
    assert run("predict", "--model", path, "(1,2,3)") == 2


def test_parse_vector():
    assert parse_vector("(0, 3)").tolist() == [0.0, 3.0]
    assert parse_vector("[1;2 3]").tolist() == [1.0, 2.0, 3.0]


def test_predict_records_json(tmp_path, cohort):
    data, schema = cohort
    model = tmp_path / "m.json"
    run("train", "--data", data, "--schema", schema, "--model", model)
    out = tmp_path / "pred.json"
    assert run("predict", "--model", model, "--data", data, "--schema", schema, "--out", out) == 0
    preds = json.loads(out.read_text())["predictions"]
    assert len(preds) == 208
    labels = [line.rsplit(",", 1)[1] for line in data.read_text().splitlines()[1:]]
    assert all((p["label"] > 0) == (lab == "patient") for p, lab in zip(preds, labels))


def test_evaluate_holdout_deterministic(tmp_path, cohort):
    data, schema = cohort
    model = tmp_path / "m.json"
    run("train", "--data", data, "--schema", schema, "--model", model,
        "--holdout", 0.3, "--seed", 4)
    for name in ("e1.json", "e2.json"):
        assert run("evaluate", "--data", data, "--schema", schema, "--model", model,
                   "--holdout", 0.3, "--seed", 4, "--out", tmp_path / name) == 0
    a = (tmp_path / "e1.json").read_bytes()
    assert a == (tmp_path / "e2.json").read_bytes()
    doc = json.loads(a)
    assert sum(doc["matrix"].values()) == round(0.3 * 208)
    assert doc["mode"].startswith("holdout")


def test_tree_and_standardize_flags(tmp_path, cohort):
    data, schema = cohort
    model = tmp_path / "t.json"
    assert run("train", "--data", data, "--schema", schema, "--model", model,
               "--tree", "--max-depth", 2, "--standardize") == 0
    assert json.loads(model.read_text())["kind"] == "tree"


def test_non_convergence_exit_code(tmp_path, capsys):
    data, schema = tmp_path / "d.csv", tmp_path / "s.json"
    run("synth", "--out", data, "--schema", schema, "--n-per-class", 100, "--overlap", 0.3)
    code = run("train", "--data", data, "--schema", schema, "--model", tmp_path / "m.json",
               "--tol", 1e-12, "--max-passes", 1, "--C", 100)
    assert code == 3
    assert "NonConvergence" in capsys.readouterr().err
    assert load_model(tmp_path / "m.json").converged is False


def test_encode_outputs(tmp_path, cohort):
    data, schema = cohort
    assert run("encode", "--data", data, "--schema", schema, "--out", tmp_path / "e.csv") == 0
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0].endswith(",label") and len(lines) == 209
    assert run("encode", "--data", data, "--schema", schema, "--standardize",
               "--out", tmp_path / "e.json") == 0
    doc = json.loads((tmp_path / "e.json").read_text())
    assert len(doc["vectors"]) == 208 and doc["scaling"] is not None


def test_report_three_diseases(tmp_path, capsys):
    entries = []
    for i, name in enumerate(["liver", "breast", "gastritis"]):
        data, schema = tmp_path / f"{name}.csv", tmp_path / f"{name}.schema.json"
        run("synth", "--out", data, "--schema", schema, "--n-per-class", 20, "--dims", 3,
            "--seed", i, "--overlap", 0.1 * i)
        run("train", "--data", data, "--schema", schema, "--model", tmp_path / f"{name}.model.json",
            "--out", tmp_path / f"{name}.eval.json")
        entries.append({"disease": name, "model": f"{name}.model.json",
                        "schema": f"{name}.schema.json", "evaluation": f"{name}.eval.json"})
    (tmp_path / "registry.json").write_text(json.dumps({"entries": entries}))
    rec = tmp_path / "patient.csv"
    rec.write_text("x1,x2,x3\n0.5,-1.0,2.0\n")
    capsys.readouterr()
    assert run("report", "--registry", tmp_path / "registry.json", "--data", rec,
               "--out", tmp_path / "r.json") == 0
    lines = capsys.readouterr().out.splitlines()
    assert [ln.split()[0] for ln in lines[2:5]] == ["breast", "gastritis", "liver"]
    doc = json.loads((tmp_path / "r.json").read_text())
    assert [r["disease"] for r in doc["records"][0]["rows"]] == ["breast", "gastritis", "liver"]


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "clindiag", "--help"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("synth", "encode", "train", "evaluate", "predict", "report"):
        assert cmd in res.stdout
