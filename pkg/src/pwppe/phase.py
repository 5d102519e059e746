"""Classical phase computation: PWLS solver, row unwrapping, plane fitting.

The ground-truth labelling chain for a planar calibration target is
``pwls_solve -> unwrap_rows -> fit_plane -> rewrap`` (see
:func:`make_ground_truth`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateFitError, ShapeError, UnsupportedConfigurationError

TWO_PI = 2.0 * np.pi

#: below this, both quadrature sums are numerical noise and carry no phase
MODULATION_EPS = 1e-6

KINDS = ("wrapped", "unwrapped")


def wrap(values):
    """Wrap radians into [-pi, pi); +pi maps to -pi."""
    arr = np.asarray(values, dtype=float)
    out = np.mod(arr + np.pi, TWO_PI) - np.pi
    # np.mod can round up to exactly 2*pi for tiny negative arguments
    out = np.where(out >= np.pi, out - TWO_PI, out)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass
class PhaseMap:
    """Per-pixel phase in radians with a validity mask."""

    values: np.ndarray
    kind: str = "wrapped"
    mask: np.ndarray = None
    analytic: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ShapeError(f"phase map must be 2-D, got shape {self.values.shape}")
        if self.mask is None:
            self.mask = np.isfinite(self.values)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != self.values.shape:
            raise ShapeError(
                f"mask shape {self.mask.shape} does not match values {self.values.shape}"
            )
        if self.kind not in KINDS:
            raise ValueError(f"unknown phase map kind {self.kind!r}")

    @property
    def shape(self):
        return self.values.shape

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]


@dataclass
class PlaneFit:
    a: float
    b: float
    c: float
    rms_residual: float = 0.0

    def evaluate(self, height, width):
        yy, xx = np.mgrid[0:height, 0:width]
        return self.a * xx + self.b * yy + self.c


def shift_angles(n_steps):
    """theta_i = 2*pi*i/N for i = 1..N."""
    return TWO_PI * np.arange(1, n_steps + 1) / n_steps


def pwls(intensities, axis=0):
    """Point-wise least-squares phase of samples stacked along ``axis``.

    Returns ``(phase, valid)``; ``phase`` is wrapped to [-pi, pi) and
    ``valid`` is False where neither quadrature sum exceeds
    :data:`MODULATION_EPS`.
    """
    data = np.moveaxis(np.asarray(intensities, dtype=float), axis, -1)
    n = data.shape[-1]
    if n < 4:
        raise UnsupportedConfigurationError(
            f"PWLS needs at least 4 phase steps to decouple the unknowns, got {n}"
        )
    theta = shift_angles(n)
    s = data @ np.sin(theta)
    c = data @ np.cos(theta)
    phase = wrap(-np.arctan2(s, c))
    valid = (np.abs(s) >= MODULATION_EPS) | (np.abs(c) >= MODULATION_EPS)
    return phase, valid


def pwls_solve(stack):
    """PWLS over a :class:`~pwppe.synth.FringeStack`."""
    phase, valid = pwls(stack.images, axis=0)
    phase = np.where(valid, phase, 0.0)
    return PhaseMap(phase, "wrapped", valid)


def _itoh(seq):
    return np.unwrap(seq, discont=np.pi)


def unwrap_rows(pmap):
    """Row-wise Itoh unwrapping followed by cross-row 2*pi alignment.

    Each row is unwrapped independently along x. Rows are then shifted by
    multiples of 2*pi so that their values at a shared reference column
    (the first column valid in the most rows) form a continuous profile
    down the image.
    """
    if pmap.kind != "wrapped":
        raise ValueError("unwrap_rows expects a wrapped phase map")
    values = pmap.values.copy()
    mask = pmap.mask.copy()
    height, width = values.shape
    for r in range(height):
        cols = np.flatnonzero(mask[r])
        if cols.size < 2:
            mask[r] = False
            continue
        values[r, cols] = _itoh(values[r, cols])

    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size > 1:
        counts = mask[rows].sum(axis=0)
        ref = int(np.flatnonzero(counts == counts.max())[0])
        ref_vals = np.empty(rows.size)
        for k, r in enumerate(rows):
            if mask[r, ref]:
                ref_vals[k] = values[r, ref]
            else:
                # nearest valid column, extrapolated with the local slope
                cols = np.flatnonzero(mask[r])
                j = int(np.argmin(np.abs(cols - ref)))
                lo, hi = max(j - 1, 0), min(j + 1, cols.size - 1)
                slope = (values[r, cols[hi]] - values[r, cols[lo]]) / max(cols[hi] - cols[lo], 1)
                ref_vals[k] = values[r, cols[j]] + slope * (ref - cols[j])
        target = _itoh(wrap(ref_vals))
        # keep the first row's own offset as the common reference
        target += ref_vals[0] - target[0]
        offsets = TWO_PI * np.round((target - ref_vals) / TWO_PI)
        values[rows] += offsets[:, None]
    values[~mask] = 0.0
    return PhaseMap(values, "unwrapped", mask)


def fit_plane(pmap):
    """Unweighted least-squares plane a*x + b*y + c over valid pixels."""
    if pmap.kind != "unwrapped":
        raise ValueError("fit_plane expects an unwrapped phase map")
    yy, xx = np.nonzero(pmap.mask)
    if xx.size < 3:
        raise DegenerateFitError(f"plane fit needs >= 3 valid pixels, got {xx.size}")
    design = np.column_stack([xx, yy, np.ones(xx.size)]).astype(float)
    z = pmap.values[yy, xx]
    coef, _, rank, _ = np.linalg.lstsq(design, z, rcond=None)
    if rank < 3:
        raise DegenerateFitError("valid pixels are collinear; plane is undetermined")
    resid = z - design @ coef
    rms = float(np.sqrt(np.mean(resid**2)))
    return PlaneFit(float(coef[0]), float(coef[1]), float(coef[2]), rms)


def rewrap(pmap):
    values = np.where(pmap.mask, wrap(pmap.values), 0.0)
    return PhaseMap(values, "wrapped", pmap.mask.copy())


def make_ground_truth(stack, return_fit=False):
    """Plane-fitted wrapped phase of a stack imaging a planar target.

    Harmonic ripple in the raw PWLS phase is periodic and zero-mean, so the
    fitted plane strips it; the rewrapped plane is used as training labels.
    """
    raw = pwls_solve(stack)
    fit = fit_plane(unwrap_rows(raw))
    plane = fit.evaluate(*raw.shape)
    truth = rewrap(PhaseMap(plane, "unwrapped", np.ones(raw.shape, dtype=bool)))
    truth.mask = raw.mask.copy()
    truth.values = np.where(truth.mask, truth.values, 0.0)
    if return_fit:
        return truth, fit
    return truth
