import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from dlroc import cli
from dlroc.classifier import load_model
from dlroc.data import load_csv


def run(argv):
    out = io.StringIO()
    code = cli.main(argv, out)
    return code, out.getvalue()


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    data = d / "data.csv"
    code, _ = run(["gen", "--m", "12", "--labels", "3", "--atoms-per-label", "3", "--sparsity", "2",
                   "--samples-per-label", "40", "--seed", "3", "--out", str(data)])
    assert code == 0
    model = d / "model.bin"
    code, text = run(["train", str(data), "--tmax", "2", "--lk", "4", "--out", str(model)])
    assert code == 0
    return d, data, model, text


def test_gen_writes_a_dataset(workdir):
    _, data, _, _ = workdir
    ds = load_csv(data)
    assert ds.m == 12 and ds.n_samples == 120 and ds.label_names == ("1", "2", "3")


def test_gen_to_stdout():
    code, text = run(["gen", "--m", "2", "--labels", "1", "--atoms-per-label", "1", "--sparsity", "1",
                      "--samples-per-label", "3"])
    assert code == 0
    assert text.splitlines()[0] == "group,label,c1,c2"
    assert len(text.splitlines()) == 4


def test_train_writes_model_and_trace(workdir):
    _, _, model, text = workdir
    m = load_model(model)
    assert m.dictionary.sizes == (4, 4, 4)
    lines = text.splitlines()
    assert len(lines) == 2
    assert [len(line.split()) for line in lines] == [3, 3]


def test_classify_schema(workdir):
    d, data, model, _ = workdir
    out = d / "labels.csv"
    assert run(["classify", str(model), str(data), "--out", str(out)])[0] == 0
    rows = list(csv.reader(open(out)))
    assert rows[0] == ["index", "label", "ratio_1", "ratio_2", "ratio_3", "residual"]
    assert len(rows) == 121
    for row in rows[1:]:
        ratios = [float(v) for v in row[2:5]]
        assert sum(ratios) == pytest.approx(1.0, abs=1e-12)
        assert row[1] == str(int(np.argmax(ratios)) + 1)
    truth = load_csv(data).label_names
    acc = np.mean([row[1] == truth[lab] for row, lab in zip(rows[1:], load_csv(data).labels)])
    # two learning iterations on outlier-corrupted data; chance is 1/3
    assert acc > 0.6


def test_eval_and_cv_emit_records(workdir):
    d, data, _, _ = workdir
    code, text = run(["eval", str(data), "--replicates", "2", "--per-label-train", "10",
                      "--per-label-test", "5", "--tmax", "2", "--lk", "4"])
    assert code == 0
    records = [json.loads(line) for line in text.splitlines() if line.startswith("{")]
    assert {r["method"] for r in records} == {"DL-ROC", "SRC(OMP)"}
    code, text = run(["cv", str(data), "--gammas", "0.3,1e6", "--folds", "2", "--tmax", "1", "--lk", "4"])
    assert code == 0
    records = [json.loads(line) for line in text.splitlines() if line.startswith("{")]
    assert [r["best"] for r in records] == [True, False]


def test_bench(workdir):
    _, data, model, _ = workdir
    code, text = run(["bench", str(model), str(data), "--warmup", "100"])
    assert code == 0
    assert json.loads(text.splitlines()[-1])["n"] == 20


def test_config_file_and_override(workdir, tmp_path):
    _, data, _, _ = workdir
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# learning settings\ntmax = 1\nlk = 3\n")
    model = tmp_path / "m.bin"
    code, text = run(["train", str(data), "--config", str(cfg), "--out", str(model)])
    assert code == 0 and len(text.splitlines()) == 1
    assert load_model(model).dictionary.sizes == (3, 3, 3)
    code, _ = run(["train", str(data), "--config", str(cfg), "--lk", "2", "--out", str(model)])
    assert code == 0 and load_model(model).dictionary.sizes == (2, 2, 2)


def test_exit_codes(workdir, tmp_path):
    _, data, model, _ = workdir
    bad_cfg = tmp_path / "bad.cfg"
    bad_cfg.write_text("learning_rate = 3\n")
    assert run(["train", str(data), "--config", str(bad_cfg), "--out", str(tmp_path / "x")])[0] == 3
    assert run(["train", str(data), "--alpha", "2", "--out", str(tmp_path / "x")])[0] == 3
    assert run(["frobnicate"])[0] == 3
    assert run(["gen", "--sparsity", "99", "--out", str(tmp_path / "g.csv")])[0] == 3
    assert run(["train", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "x")])[0] == 2
    broken = tmp_path / "broken.csv"
    broken.write_text("group,c1\n1,2\n")
    assert run(["train", str(broken), "--out", str(tmp_path / "x")])[0] == 2
    assert run(["classify", str(data), str(data)])[0] == 2
    assert run(["train", str(data), "--lk", "1000", "--out", str(tmp_path / "x")])[0] == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "dlroc", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "dlroc" in proc.stdout
