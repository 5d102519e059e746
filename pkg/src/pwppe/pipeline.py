"""File-backed pipeline stages shared by the CLI subcommands."""

from __future__ import annotations

import csv
import logging
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import dataset as ds_mod
from . import fileio
from .config import ExperimentConfig
from .errors import ConfigError, ShapeError
from .estimator import pwppe_solve
from .nn import TrainConfig, load_weights, save_weights, train
from .phase import make_ground_truth, pwls_solve
from .report import compare, emit, generalization_sweep
from .synth import synthesize

log = logging.getLogger(__name__)


def _mkdir(path):
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise fileio.FilesystemError(str(exc)) from exc
    return path


def synth(cfg, out_dir):
    stack = synthesize(cfg.scene, cfg.synth_kind, cfg.synth_seed)
    fileio.save_stack(stack, out_dir, kind=cfg.synth_kind)
    log.info("synthesized %s stack (seed %d) -> %s", cfg.synth_kind, cfg.synth_seed, out_dir)
    return stack


def truth(stack_dir, out_path):
    stack = fileio.load_stack(stack_dir)
    labels, fit = make_ground_truth(stack, return_fit=True)
    fileio.save_phase(out_path, labels)
    log.info("plane fit a=%.6g b=%.6g c=%.6g rms=%.4g", fit.a, fit.b, fit.c, fit.rms_residual)
    return labels, fit


def build(stack_dir, truth_path, mode, fraction, seed, out_dir, train_ratio=0.5, write_test=True):
    stack = fileio.load_stack(stack_dir)
    labels = fileio.load_phase(truth_path)
    train_ds, test_ds = ds_mod.build(stack, labels, mode, fraction, seed, train_ratio)
    out = _mkdir(out_dir)
    ds_mod.save_dataset(train_ds, out / "train.ds")
    if write_test:
        ds_mod.save_dataset(test_ds, out / "test.ds")
    holdout = test_ds.pixel_mask(stack.shape)
    fileio.write_pgm(out / "holdout.mask.pgm", np.where(holdout, 255, 0), maxval=255)
    log.info("dataset: %d train / %d test samples (mode %s, seed %d)",
             len(train_ds), len(test_ds), mode, seed)
    return train_ds, test_ds


def write_loss_csv(path, history):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "mse"])
        for k, value in enumerate(history, 1):
            writer.writerow([k, f"{value:.9g}"])


def train_stage(dataset_path, cfg, out_dir, figures=True):
    data = ds_mod.load_dataset(dataset_path)
    result = train(data, cfg)
    out = _mkdir(out_dir)
    save_weights(result.network, out / "weights.pwnn")
    write_loss_csv(out / "loss.csv", result.loss_history)
    fileio.write_meta(out / "train.meta", {
        "seed": cfg.seed, "iterations_run": result.epochs, "final_mse": f"{result.final_mse:.9g}",
        "converged": int(result.converged), "optimizer": cfg.optimizer,
        "learning_rate": cfg.learning_rate, "batch_size": cfg.batch_size,
        "target_mse": cfg.target_mse, "samples": len(data), "mode": data.mode,
    })
    if figures:
        from .figures import loss_curve

        loss_curve(result.loss_history, out / "loss.png", cfg.target_mse)
    log.info("trained %d iterations, final mse %.4g", result.epochs, result.final_mse)
    return result


def solve(stack_dir, weights_path, out_dir, method="pwppe", selftest_threshold=None):
    stack = fileio.load_stack(stack_dir)
    out = _mkdir(out_dir)
    if method == "pwls":
        phase = pwls_solve(stack)
        fileio.save_phase(out / "phase.pmap", phase)
        return phase, None
    if weights_path is None:
        raise ConfigError("--weights is required for --method pwppe")
    net = load_weights(weights_path)
    phase, selftest = pwppe_solve(stack, net, selftest_threshold)
    fileio.save_phase(out / "phase.pmap", phase)
    fileio.save_selftest(out / "selftest.pmap", selftest)
    return phase, selftest


def evaluate(stack_dir, truth_path, weights_path, out_dir, holdout_path=None, row=None,
             bands=(0.01, 0.05, 0.1, 0.12), variations=None, eval_seed=101, figures=True):
    stack = fileio.load_stack(stack_dir)
    labels = fileio.load_phase(truth_path)
    net = load_weights(weights_path)
    mask = None
    if holdout_path is not None:
        mask = fileio.read_pgm(holdout_path)[0] > 0
        if mask.shape != stack.shape:
            raise ShapeError("holdout mask does not match the stack")
    ls, pp = compare(stack, labels, net, row=row, eval_mask=mask, bands=bands)
    results = [("trained", ls, pp)]
    if variations:
        if stack.scene is None:
            raise ShapeError("generalization sweep needs the stack's scene description")
        kind = stack.meta.get("kind", "binary")
        results += generalization_sweep(stack.scene, variations, net, seed=eval_seed, kind=kind,
                                        row=row, bands=bands, include_base=False)
    emit(results, out_dir, figures=figures)
    return results


def repro(cfg: ExperimentConfig, out_dir, figures=True):
    """synth -> truth -> build -> train -> eval, each stage through files."""
    out = _mkdir(out_dir)
    with open(out / "experiment.cfg", "w") as fh:
        fh.write(cfg.dumps())
    synth(cfg, out / "stack")
    truth(out / "stack", out / "truth.pmap")
    build(out / "stack", out / "truth.pmap", cfg.dataset_mode, cfg.sample_fraction,
          cfg.dataset_seed, out / "dataset", cfg.train_ratio)
    train_stage(out / "dataset" / "train.ds", cfg.train, out / "model", figures=figures)
    return evaluate(out / "stack", out / "truth.pmap", out / "model" / "weights.pwnn",
                    out / "report", holdout_path=out / "dataset" / "holdout.mask.pgm",
                    row=cfg.eval_row, bands=cfg.eval_bands, variations=cfg.variations,
                    eval_seed=cfg.eval_seed, figures=figures)
