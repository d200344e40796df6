"""End-to-end runs: split, train with early stopping, retrain, test, write artifacts."""

from __future__ import annotations

import csv
import hashlib
import logging
import time
from dataclasses import dataclass
from pathlib import Path

from threadpoolctl import threadpool_limits

from .checkpoint import ModelKind, checkpoint_load, checkpoint_save
from .config import RunConfig, write_config
from .data import SplitDataset, load_split
from .errors import DataError, NumericalAbort
from .estimators import CFWGANGP, BaseRecommender, ItemPop, MLCRecommender
from .evaluation import METRIC_COLUMNS, LearningCurve, MetricsReport, evaluate_model
from .reference import COLUMNS as REFERENCE_COLUMNS
from .reference import MODEL_ROW, REFERENCE

_log = logging.getLogger(__name__)

CURVE_FILE = "curve.csv"
FINAL_FILE = "final.csv"
COMPARISON_FILE = "comparison.csv"
PROTOCOLS_FILE = "protocols.csv"
CONFIG_FILE = "config.cfg"
MANIFEST_FILE = "split_manifest.txt"
INPUTS_FILE = "inputs.sha256"
CHECKPOINT_FILE = "model.ckpt"
SELECTED_FILE = "selected.ckpt"


@dataclass
class RunResult:
    config: RunConfig
    report: MetricsReport
    holdout: MetricsReport | None
    curve: LearningCurve
    best_epoch: int
    estimator: BaseRecommender
    out_dir: Path


def make_estimator(cfg: RunConfig, n_epochs: int | None = None) -> BaseRecommender:
    if cfg.model == "ITEMPOP":
        return ItemPop()
    hp = cfg.hyperparams().as_dict()
    hp["random_state"] = hp.pop("seed")
    if cfg.model == "MLC":
        return MLCRecommender(**hp, n_epochs=n_epochs)
    return CFWGANGP(**hp, n_epochs=n_epochs)


def networks_of(est: BaseRecommender) -> list:
    if isinstance(est, CFWGANGP):
        return [est.generator_, est.discriminator_]
    if isinstance(est, MLCRecommender):
        return [est.model_]
    return [est.as_network()]


def estimator_from_checkpoint(path) -> tuple[BaseRecommender, dict]:
    kind, nets, meta = checkpoint_load(path)
    if kind is ModelKind.ITEMPOP:
        return ItemPop.from_network(nets[0]), meta
    if kind is ModelKind.MLC:
        est = MLCRecommender()
        est.model_ = nets[0]
    else:
        est = CFWGANGP(loss="WGAN_GP" if kind is ModelKind.CFWGAN_GP else "VANILLA_GAN")
        est.generator_, est.discriminator_ = nets
    est.n_items_ = nets[0].spec.n_in
    return est, meta


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def code_digest() -> str:
    """SHA-256 over the package sources and presets, so run directories record the code that made them."""
    root = Path(__file__).resolve().parent
    h = hashlib.sha256()
    for path in sorted(list(root.glob("*.py")) + list(root.glob("presets/*.cfg"))):
        h.update(path.relative_to(root).as_posix().encode())
        h.update(path.read_bytes())
    return h.hexdigest()


def read_inputs(out_dir) -> dict[str, str]:
    """The digests recorded in a run directory, keyed by what they cover."""
    path = Path(out_dir) / INPUTS_FILE
    if not path.is_file():
        return {}
    return {name: digest for digest, name in (line.split() for line in path.read_text().splitlines() if line)}


def _fit(est: BaseRecommender, split: SplitDataset, full: bool) -> BaseRecommender:
    if full:
        return est.fit(split.train_full().to_csr())
    return est.fit(split.train.to_csr(), split.valid.to_csr())


def run_experiment(cfg: RunConfig, out_dir, threads: int = 1, split: SplitDataset | None = None) -> RunResult:
    """Train per ``cfg`` and write config echo, split manifest, curves, metrics and checkpoint.

    Errors from lower layers are re-raised with the run id (model, seed, output directory) prepended.
    """
    try:
        return _run(cfg, Path(out_dir), threads, split)
    except (DataError, NumericalAbort, OSError) as exc:
        exc.args = (f"[run {cfg.model}/seed{cfg.seed} -> {out_dir}] {exc}",)
        raise


def _run(cfg: RunConfig, out: Path, threads: int, split: SplitDataset | None) -> RunResult:
    out.mkdir(parents=True, exist_ok=True)
    start = time.time()
    with threadpool_limits(limits=threads):
        if split is None:
            split = load_split(cfg.dataset, cfg.format, cfg.split_seed, cfg.test_ratio, cfg.valid_ratio)
        write_config(cfg, out / CONFIG_FILE)
        manifest_digest = split.write_manifest(out / MANIFEST_FILE)
        (out / INPUTS_FILE).write_text(
            f"{file_digest(cfg.dataset)}  dataset\n{manifest_digest}  split\n"
            f"{cfg.digest()}  config\n{code_digest()}  code\n",
            encoding="ascii",
        )

        # model selection on the validation interactions
        selected = _fit(make_estimator(cfg), split, full=False)
        if isinstance(selected, ItemPop):
            curve = LearningCurve()
            curve.add(0, "valid", evaluate_model(selected._scores, split, "valid"))
            best_epoch = 0
        else:
            curve = selected.curve_
            best_epoch = selected.best_epoch_
        holdout = evaluate_model(selected._scores, split, "test")

        if cfg.retrain:
            final = _fit(make_estimator(cfg, n_epochs=best_epoch or None), split, full=True)
        else:
            final = selected
        report = evaluate_model(final._scores, split, "test")

    meta = {
        "model": cfg.model,
        "seed": cfg.seed,
        "epoch": best_epoch,
        "config_digest": cfg.digest(),
        "split_digest": manifest_digest,
    }
    checkpoint_save(out / CHECKPOINT_FILE, ModelKind[cfg.model], networks_of(final), meta)
    # the validation-selected model behind the train-only protocol row
    checkpoint_save(out / SELECTED_FILE, ModelKind[cfg.model], networks_of(selected), meta)
    emit_reports(curve, report, cfg, out)
    write_protocols(out / PROTOCOLS_FILE, best_epoch, report if cfg.retrain else None, holdout)
    _log.info("%s seed %d: test N@20 %.4f P@5 %.4f (%.0fs)", cfg.model, cfg.seed, report.N20, report.P5, time.time() - start)
    return RunResult(cfg, report, holdout, curve, best_epoch, final, out)


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def write_curve(curve: LearningCurve, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(("epoch", "split") + METRIC_COLUMNS)
        for epoch, tag, rep in curve.rows:
            w.writerow([epoch, tag] + [_fmt(v) for v in rep.row().values()])


def write_final(report: MetricsReport, model: str, seed: int, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(("model", "seed") + METRIC_COLUMNS)
        w.writerow([model, seed] + [_fmt(v) for v in report.row().values()])


def write_protocols(path, epochs: int, retrained: MetricsReport | None, holdout: MetricsReport) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(("protocol", "epochs") + METRIC_COLUMNS)
        if retrained is not None:
            w.writerow(["retrain_train_valid", epochs] + [_fmt(v) for v in retrained.row().values()])
        w.writerow(["train_only_selected", epochs] + [_fmt(v) for v in holdout.row().values()])


def write_comparison(report: MetricsReport, cfg: RunConfig, path) -> None:
    rows = REFERENCE.get(cfg.format, {})
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(("source", "model") + REFERENCE_COLUMNS)
        for name, values in rows.items():
            w.writerow(["published", name] + [f"{values[c]:.3f}" for c in REFERENCE_COLUMNS])
        ours = report.row()
        w.writerow([f"this_run_seed{cfg.seed}", MODEL_ROW[cfg.model]] + [_fmt(ours[c]) for c in REFERENCE_COLUMNS])


def emit_reports(curve: LearningCurve, report: MetricsReport, cfg: RunConfig, out_dir) -> None:
    """Write curve.csv, final.csv and comparison.csv into ``out_dir``."""
    if not len(curve):
        raise ValueError("empty learning curve")
    out = Path(out_dir)
    write_curve(curve, out / CURVE_FILE)
    write_final(report, cfg.model, cfg.seed, out / FINAL_FILE)
    write_comparison(report, cfg, out / COMPARISON_FILE)


def read_final(path) -> tuple[str, int, MetricsReport]:
    with open(path, newline="") as f:
        row = next(csv.DictReader(f))
    return row["model"], int(row["seed"]), MetricsReport(**{c: float(row[c]) for c in METRIC_COLUMNS})


def evaluate_checkpoint(cfg: RunConfig, path, threads: int = 1) -> MetricsReport:
    """Test metrics of a saved model on the split described by ``cfg``."""
    est, _ = estimator_from_checkpoint(path)
    with threadpool_limits(limits=threads):
        split = load_split(cfg.dataset, cfg.format, cfg.split_seed, cfg.test_ratio, cfg.valid_ratio)
        return evaluate_model(est._scores, split, "test")
