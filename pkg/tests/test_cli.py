import csv
import io

import numpy as np
import pytest

from ecgfusion import nn
from ecgfusion.cli import main
from ecgfusion.data import Dataset, EcgRecord, read_dataset, write_dataset

from helpers import constant_model


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def table(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture
def toy(tmp_path, capsys):
    path = tmp_path / "toy.ecgd"
    assert run(capsys, "gen", "--classes", "N,ST", "--per-class", 2, "--duration", 2, "--out", path)[0] == 0
    return path


def test_gen_defaults(tmp_path, capsys):
    code, out, _ = run(capsys, "--out-dir", tmp_path, "gen")
    assert code == 0
    ds = read_dataset(tmp_path / "dataset.ecgd")
    assert len(ds) == 2400 and {len(r) for r in ds.records} == {16_384}
    rows = table(out)
    assert len(rows) == 20 and all(r["count"] == "120" for r in rows)


def test_gen_subset_and_determinism(tmp_path, capsys):
    a, b = tmp_path / "a.ecgd", tmp_path / "b.ecgd"
    for p in (a, b):
        code, out, _ = run(capsys, "--seed", 7, "gen", "--classes", "N,ST", "--per-class", 2, "--out", p)
        assert code == 0
    assert len(read_dataset(a)) == 4
    assert a.read_bytes() == b.read_bytes()
    assert [r["class"] for r in table(out)] == ["N", "ST"]


def test_gen_bad_class(tmp_path, capsys):
    code, _, err = run(capsys, "gen", "--classes", "XYZ", "--out", tmp_path / "x.ecgd")
    assert code != 0 and "XYZ" in err


def test_train_level1_param_count(toy, tmp_path, capsys):
    code, out, _ = run(capsys, "--threads", 1, "train", "--data", toy, "--level", 1, "--iters", 5,
                       "--batch-size", 8, "--out", tmp_path / "bank")
    assert code == 0
    files = sorted(p.name for p in (tmp_path / "bank").glob("*.ecgm"))
    assert files == ["h1.ecgm"]
    assert nn.count_params(nn.load_model(tmp_path / "bank" / "h1.ecgm").spec) == 18_976
    assert table(out)[0]["level"] == "1"
    hist = (tmp_path / "bank" / "h1_history.csv").read_text().splitlines()
    assert hist[0] == "iter,loss,lr,eval_acc" and len(hist) == 6


def test_train_all_levels(tmp_path, capsys):
    data = tmp_path / "long.ecgd"
    run(capsys, "gen", "--classes", "N,VTa", "--per-class", 1, "--duration", 32, "--out", data)
    code, _, _ = run(capsys, "train", "--data", data, "--all-levels", "--iters", 1, "--batch-size", 2,
                     "--out", tmp_path / "bank")
    assert code == 0
    assert sorted(p.name for p in (tmp_path / "bank").glob("*.ecgm")) == [f"h{s}.ecgm" for s in range(1, 7)]


def test_train_usage_errors(toy, capsys):
    assert run(capsys, "train", "--level", 1)[0] == 2
    assert run(capsys, "train", "--data", toy)[0] == 2
    assert run(capsys, "train", "--data", toy, "--level", 7)[0] == 2
    assert run(capsys, "train", "--data", toy, "--level", 1, "--all-levels")[0] == 2
    assert run(capsys)[0] == 2


def write_stub_bank(path, levels, probs):
    path.mkdir()
    for s in range(1, levels + 1):
        nn.save_model(constant_model(s, probs), path / f"h{s}.ecgm")


def imbalanced(path, length=2048):
    r = np.random.default_rng(0)
    recs = [EcgRecord(r.standard_normal(length), label=lab) for lab in (0, 0, 0, 1)]
    write_dataset(path, Dataset(recs, 512, 2))


def test_fuse_stub_majority(tmp_path, capsys):
    write_stub_bank(tmp_path / "bank", 3, [0.8, 0.2])
    imbalanced(tmp_path / "d.ecgd")
    code, out, _ = run(capsys, "--out-dir", tmp_path, "fuse", "--data", tmp_path / "d.ecgd",
                       "--bank-dir", tmp_path / "bank", "--folds", 1)
    assert code == 0
    rows = [r for r in table(out) if r["fold"] == "mean"]
    assert [r["level"] for r in rows] == ["1", "2", "3"]
    assert all(float(r["accuracy"]) == 0.75 for r in rows)
    assert (tmp_path / "fuse_uniform.csv").exists()


def test_fuse_weights_printed(tmp_path, capsys):
    write_stub_bank(tmp_path / "bank", 3, [0.8, 0.2])
    imbalanced(tmp_path / "d.ecgd")
    args = ("--out-dir", tmp_path, "fuse", "--data", tmp_path / "d.ecgd", "--bank-dir", tmp_path / "bank")
    _, geo, _ = run(capsys, *args, "--scheme", "geometric")
    _, uni, _ = run(capsys, *args, "--scheme", "uniform")
    assert {r["weights"] for r in table(geo) if r["level"] == "3"} == {"1/7,2/7,4/7"}
    assert {r["weights"] for r in table(uni) if r["level"] == "3"} == {"1/3,1/3,1/3"}


def test_fuse_level1_equals_eval(tmp_path, capsys):
    bank = tmp_path / "bank"
    bank.mkdir()
    nn.save_model(nn.init_model(nn.h_level(1, 2), seed=4), bank / "h1.ecgm")
    nn.save_model(nn.init_model(nn.h_level(2, 2), seed=5), bank / "h2.ecgm")
    imbalanced(tmp_path / "d.ecgd")
    _, fused, _ = run(capsys, "--out-dir", tmp_path, "fuse", "--data", tmp_path / "d.ecgd", "--bank-dir", bank,
                      "--max-level", 1, "--folds", 2)
    _, single, _ = run(capsys, "--out-dir", tmp_path, "eval", "--data", tmp_path / "d.ecgd",
                       "--model", bank / "h1.ecgm", "--folds", 2)
    keys = ["fold", "accuracy", "mean_f1", "specificity_paper", "n"]
    assert [[r[k] for k in keys] for r in table(fused)] == [[r[k] for k in keys] for r in table(single)]
    assert (tmp_path / "eval_report.csv").read_text().startswith("class,support")


def test_eval_class_mismatch(toy, tmp_path, capsys):
    nn.save_model(nn.init_model(nn.h_level(1, 3)), tmp_path / "m.ecgm")
    code, _, err = run(capsys, "eval", "--data", toy, "--model", tmp_path / "m.ecgm")
    assert code == 1 and "classes" in err


def test_bench(tmp_path, capsys):
    write_stub_bank(tmp_path / "bank", 6, [0.5, 0.5])
    nn.save_model(nn.init_model(nn.h_level(1)), tmp_path / "h1.ecgm")
    code, out, _ = run(capsys, "bench", "--model", tmp_path / "h1.ecgm", "--repeats", 2)
    assert code == 0 and table(out)[0]["flops"] == "341248"
    assert run(capsys, "bench", "--model", tmp_path / "h1.ecgm", "--repeats", 0)[0] == 2
    code, out, _ = run(capsys, "bench", "--bank-dir", tmp_path / "bank", "--repeats", 5, "--batch", 16)
    rows = table(out)
    assert [r["level"] for r in rows] == [str(s) for s in range(1, 7)]
    assert float(rows[5]["mean_ms"]) >= float(rows[0]["mean_ms"])


def test_inspect_model(tmp_path, capsys):
    nn.save_model(nn.init_model(nn.h_level(1)), tmp_path / "h1.ecgm")
    code, out, err = run(capsys, "inspect", "--model", tmp_path / "h1.ecgm")
    assert code == 0 and "18976" in err and "341248" in err
    shapes = [r["output_shape"] for r in table(out)]
    assert shapes == ["1x32x4", "32x32x4", "32x8x4", "32x8x4", "32x8x4", "32x2x2", "32x2x2", "64", "20"]


def test_inspect_data(toy, capsys):
    code, out, err = run(capsys, "inspect", "--data", toy)
    assert code == 0 and [r["count"] for r in table(out)] == ["2", "2"] and "1024" in err


def test_inspect_corrupt(tmp_path, capsys):
    bad = tmp_path / "bad.ecgm"
    bad.write_bytes(b"junkjunkjunk")
    code, out, err = run(capsys, "inspect", "--model", bad)
    assert code == 1 and "BadMagic" in err and out == ""
    code, _, err = run(capsys, "inspect", "--data", bad)
    assert code == 1 and "BadMagic" in err


def test_export_grid(tmp_path, capsys):
    r = np.random.default_rng(0)
    write_dataset(tmp_path / "one.ecgd", Dataset([EcgRecord(r.standard_normal(512), label=0)]))
    code, _, _ = run(capsys, "export", "--record", tmp_path / "one.ecgd", "--out", tmp_path / "s.csv")
    assert code == 0
    rows = list(csv.reader(open(tmp_path / "s.csv")))
    assert rows[0] == ["freq_hz", "t0", "t1", "t2", "t3"]
    assert len(rows) == 33 and all(len(row) == 5 for row in rows)
    assert run(capsys, "export", "--record", tmp_path / "one.ecgd", "--index", 3)[0] == 1
