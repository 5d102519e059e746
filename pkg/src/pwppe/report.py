"""PWLS vs PWPPE comparison: error metrics, row profiles, spectra, tables."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ShapeError
from .estimator import DEFAULT_BANDS, pwppe_solve, self_test_histogram
from .fileio import FilesystemError, mask_path, save_phase, write_error_map
from .phase import TWO_PI, PhaseMap, fit_plane, make_ground_truth, pwls_solve, unwrap_rows, wrap
from .synth import synthesize

HARMONIC_ORDER = 6


def phase_error(estimate, truth):
    """Wrapped difference estimate - truth, masked where either is invalid."""
    if estimate.shape != truth.shape:
        raise ShapeError(f"estimate {estimate.shape} and truth {truth.shape} differ in shape")
    mask = estimate.mask & truth.mask
    values = np.where(mask, wrap(estimate.values - truth.values), 0.0)
    return PhaseMap(values, "wrapped", mask)


def spectral_peak(profile, cycles_per_pixel, order=HARMONIC_ORDER, valid=None):
    """Amplitude at ``order`` times the fringe frequency over the median of
    the DC-excluded amplitude spectrum of a mean-removed profile."""
    profile = np.asarray(profile, dtype=float)
    if valid is not None:
        profile = np.where(valid, profile, np.nan)
    good = np.isfinite(profile)
    if good.sum() < 4:
        return float("nan")
    centered = np.where(good, profile - np.nanmean(profile), 0.0)
    amp = np.abs(np.fft.rfft(centered))
    k = int(round(order * cycles_per_pixel * profile.size))
    if not 0 < k < amp.size:
        return float("nan")
    floor = np.median(amp[1:])
    return float(amp[k] / floor) if floor > 0 else float("inf")


def fringe_frequency(truth):
    """Carrier frequency along x (cycles/pixel) from the truth map's plane."""
    if truth.kind == "wrapped":
        fit = fit_plane(unwrap_rows(truth))
    else:
        fit = fit_plane(truth)
    return abs(fit.a) / TWO_PI


@dataclass
class EvalReport:
    """Metrics of one method on one scene.

    ``error`` holds the wrapped error restricted to the evaluated pixels;
    ``full_error`` keeps every valid pixel and backs the row profiles.
    """

    method: str
    mse: float
    rms: float
    max_abs: float
    n_pixels: int
    error: PhaseMap
    full_error: PhaseMap
    row: int
    spectrum_peak_at_6f: float
    selftest_bands: dict = field(default_factory=dict)
    selftest: object = None

    @property
    def row_profile(self):
        err = self.full_error
        return np.where(err.mask[self.row], err.values[self.row], np.nan)

    @property
    def row_profiles(self):
        return np.where(self.full_error.mask, self.full_error.values, np.nan)


def evaluate(method, estimate, truth, row=None, eval_mask=None, frequency=None):
    full = phase_error(estimate, truth)
    err = full
    if eval_mask is not None:
        err = PhaseMap(np.where(eval_mask, full.values, 0.0), "wrapped", full.mask & eval_mask)
    values = err.values[err.mask]
    if values.size == 0:
        raise ShapeError("no valid pixels to evaluate")
    mse = float(np.mean(values**2))
    row = truth.height // 2 if row is None else int(row)
    if not 0 <= row < truth.height:
        raise ShapeError(f"row {row} outside image of height {truth.height}")
    if frequency is None:
        frequency = fringe_frequency(truth)
    peak = spectral_peak(full.values[row], frequency, valid=full.mask[row])
    return EvalReport(method, mse, float(np.sqrt(mse)), float(np.max(np.abs(values))),
                      int(values.size), err, full, row, peak)


def compare(stack, truth, net, row=None, eval_mask=None, bands=DEFAULT_BANDS):
    """Evaluate PWLS and PWPPE against ``truth``; returns ``(pwls, pwppe)``.

    ``eval_mask`` restricts every metric (and the self-test table) to a pixel
    subset, e.g. the held-out pixels of a training scene.
    """
    if truth.shape != stack.shape:
        raise ShapeError(f"truth {truth.shape} does not match stack {stack.shape}")
    freq = fringe_frequency(truth)
    ls = evaluate("PWLS", pwls_solve(stack), truth, row, eval_mask, freq)
    estimate, selftest = pwppe_solve(stack, net)
    pp = evaluate("PWPPE", estimate, truth, row, eval_mask, freq)
    props = self_test_histogram(selftest, bands, mask=eval_mask)
    pp.selftest_bands = dict(zip(map(float, bands), props))
    pp.selftest = selftest
    return ls, pp


def generalization_sweep(base, variations, net, seed=101, kind="binary", row=None,
                         bands=DEFAULT_BANDS, include_base=True):
    """Evaluate both methods on scene variations without retraining.

    ``variations`` maps a name to a dict of :class:`SceneSpec` field changes.
    Each scene's truth is built by plane fitting, as for the trained scene.
    All scenes share the noise seed, so an empty delta reproduces the base.
    Returns a list of ``(name, pwls_report, pwppe_report)``.
    """
    scenes = {"trained": base} if include_base else {}
    scenes.update({name: replace(base, **delta) for name, delta in variations.items()})
    rows = []
    for name, scene in scenes.items():
        stack = synthesize(scene, kind, seed)
        truth = make_ground_truth(stack)
        ls, pp = compare(stack, truth, net, row=row, bands=bands)
        rows.append((name, ls, pp))
    return rows


def _g(value):
    return f"{value:.9g}"


def table1_rows(results):
    header = ["scene", "method", "mse", "rms", "max_abs", "spectrum_peak_6f", "n_pixels"]
    body = []
    for name, ls, pp in results:
        for rep in (ls, pp):
            body.append([name, rep.method, _g(rep.mse), _g(rep.rms), _g(rep.max_abs),
                         _g(rep.spectrum_peak_at_6f), str(rep.n_pixels)])
    return header, body


def _write_csv(path, header, body):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(body)


def emit(results, out_dir, figures=True):
    """Write the report set for ``results`` (list of ``(scene, pwls, pwppe)``).

    The first entry is treated as the trained scene: its row profile, error
    maps and self-test table are written alongside ``table1.csv``.
    Returns the list of written paths.
    """
    if isinstance(results, tuple) and len(results) == 2:
        results = [("trained", *results)]
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = []
        header, body = table1_rows(results)
        _write_csv(out / "table1.csv", header, body)
        written.append(out / "table1.csv")

        _, ls, pp = results[0]
        bands = sorted(pp.selftest_bands.items(), reverse=True)
        _write_csv(out / "table2.csv", ["band", "proportion"],
                   [[_g(b), _g(p)] for b, p in bands])
        written.append(out / "table2.csv")

        width = ls.error.width
        prof_ls, prof_pp = ls.row_profile, pp.row_profile
        _write_csv(out / "row_profile.csv", ["column", "pwls_error", "pwppe_error"],
                   [[str(x), _g(prof_ls[x]), _g(prof_pp[x])] for x in range(width)])
        written.append(out / "row_profile.csv")

        for rep in (ls, pp):
            name = out / f"error_map_{rep.method.lower()}.pgm"
            write_error_map(name, rep.error.values, rep.error.mask)
            # lossless copy of the same map; the PGM is for viewing
            exact = name.with_suffix(".pmap")
            save_phase(exact, rep.error)
            written += [name, name.with_suffix(".scale"), exact, mask_path(exact)]

        if figures:
            from . import figures as figs

            written += figs.render_report(results, out)
    except OSError as exc:
        if isinstance(exc, FilesystemError):
            raise
        raise FilesystemError(str(exc)) from exc
    return written
