import csv

import numpy as np
import pytest

from cfwgan.cli import main
from cfwgan.config import load_config
from cfwgan.experiment import evaluate_checkpoint, read_final


@pytest.fixture
def ratings(tmp_path):
    rng = np.random.default_rng(0)
    lines = []
    for u in range(1, 41):
        for i in rng.choice(np.arange(1, 31), int(rng.integers(4, 12)), replace=False):
            lines.append(f"{u}\t{i}\t{rng.integers(1, 6)}\t{880000000 + len(lines)}")
    path = tmp_path / "u.data"
    path.write_text("\n".join(lines) + "\n")
    return path


def small_config(tmp_path, ratings, model="CFWGAN_GP", **extra):
    body = {
        "model": model,
        "dataset": str(ratings),
        "seed": 1,
    }
    if model in ("CFWGAN_GP", "CFGAN_VANILLA"):
        body.update(g_hidden=8, d_hidden=8, batch_size=8, d_iter=2, lr=1e-3, max_epochs=6, eval_every=2, patience=2)
    elif model == "MLC":
        body.update(hidden=8, batch_size=8, lr=1e-3, max_epochs=6, eval_every=2, patience=2)
    body.update(extra)
    path = tmp_path / f"{model}.cfg"
    path.write_text("".join(f"{k} = {v}\n" for k, v in body.items()))
    return path


def read_rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


@pytest.mark.parametrize("model", ["CFWGAN_GP", "CFGAN_VANILLA", "MLC", "ITEMPOP"])
def test_train_writes_artifacts(tmp_path, ratings, model):
    cfg = small_config(tmp_path, ratings, model)
    out = tmp_path / "run"
    assert main(["train", "--config", str(cfg), "--out", str(out)]) == 0
    for name in ("curve.csv", "final.csv", "comparison.csv", "protocols.csv", "config.cfg", "split_manifest.txt", "inputs.sha256", "model.ckpt"):
        assert (out / name).is_file(), name
    curve = read_rows(out / "curve.csv")
    assert list(curve[0]) == ["epoch", "split", "P5", "P20", "R5", "R20", "N5", "N20"]
    epochs = [int(r["epoch"]) for r in curve]
    assert epochs == sorted(set(epochs))
    final = read_rows(out / "final.csv")
    assert list(final[0]) == ["model", "seed", "P5", "P20", "R5", "R20", "N5", "N20"] and len(final) == 1
    assert load_config(out / "config.cfg") == load_config(cfg)


def test_same_seed_gives_identical_csvs(tmp_path, ratings):
    cfg = small_config(tmp_path, ratings)
    for name in ("a", "b"):
        assert main(["train", "--config", str(cfg), "--out", str(tmp_path / name), "--threads", "1"]) == 0
    for f in ("curve.csv", "final.csv", "split_manifest.txt", "model.ckpt"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f


def test_seed_override_changes_result(tmp_path, ratings):
    cfg = small_config(tmp_path, ratings)
    main(["train", "--config", str(cfg), "--out", str(tmp_path / "a")])
    main(["train", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "2"])
    assert "seed = 2" in (tmp_path / "b" / "config.cfg").read_text()
    assert (tmp_path / "a" / "model.ckpt").read_bytes() != (tmp_path / "b" / "model.ckpt").read_bytes()


def test_reloaded_model_reproduces_test_metrics(tmp_path, ratings):
    cfg = small_config(tmp_path, ratings)
    out = tmp_path / "run"
    main(["train", "--config", str(cfg), "--out", str(out)])
    _, _, saved = read_final(out / "final.csv")
    again = evaluate_checkpoint(load_config(cfg), out / "model.ckpt")
    for c in ("P5", "P20", "R5", "R20", "N5", "N20"):
        assert f"{getattr(again, c):.6f}" == f"{getattr(saved, c):.6f}"
    assert main(["evaluate", "--config", str(cfg), "--checkpoint", str(out / "model.ckpt"), "--out", str(tmp_path / "ev")]) == 0
    assert (tmp_path / "ev" / "final.csv").read_bytes() == (out / "final.csv").read_bytes()


def test_comparison_carries_published_rows(tmp_path, ratings):
    cfg = small_config(tmp_path, ratings, "ITEMPOP")
    main(["train", "--config", str(cfg), "--out", str(tmp_path / "run")])
    rows = {r["model"]: r for r in read_rows(tmp_path / "run" / "comparison.csv") if r["source"] == "published"}
    assert rows["CFGAN"]["N5"] == "0.480" and rows["CFGAN"]["P20"] == "0.302"
    assert rows["MLC"]["N5"] == "0.486"


def test_compare_command(tmp_path, ratings, capsys):
    cfg = small_config(tmp_path, ratings, "ITEMPOP")
    main(["train", "--config", str(cfg), "--out", str(tmp_path / "r1")])
    capsys.readouterr()
    assert main(["compare", str(tmp_path / "r1"), "--dataset", "ML1M"]) == 0
    out = capsys.readouterr().out
    assert "published,MLC,,0.472" in out and "mean,ItemPop,1" in out


def test_exit_codes(tmp_path, ratings, capsys):
    assert main(["train", "--config", str(tmp_path / "missing.cfg")]) == 1
    bad = tmp_path / "bad.cfg"
    bad.write_text(f"model = MLC\ndataset = {ratings}\nhidden = -3\n")
    assert main(["train", "--config", str(bad)]) == 1
    broken = tmp_path / "broken.data"
    broken.write_text("1\t2\n")
    cfg = small_config(tmp_path, broken, "ITEMPOP")
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 2
    cfg = small_config(tmp_path, ratings, "ITEMPOP")
    assert main(["evaluate", "--config", str(cfg), "--checkpoint", str(cfg)]) == 2
    nan = small_config(tmp_path, ratings, "MLC", lr="1e300")
    with pytest.warns(RuntimeWarning):
        assert main(["train", "--config", str(nan), "--out", str(tmp_path / "n")]) == 3
    assert "error:" in capsys.readouterr().err
