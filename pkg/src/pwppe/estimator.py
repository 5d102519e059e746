"""Pixel-wise phase estimation with a trained network, plus the self-test."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import normalize, rotate_to_max_many, undo_rotation
from .errors import EmptyInputError, ShapeError
from .nn import forward
from .phase import PhaseMap, pwls, wrap

DEFAULT_BANDS = (0.01, 0.05, 0.1, 0.12)


@dataclass
class SelfTestMap:
    """sqrt(O_s**2 + O_c**2) per pixel; ideally 1."""

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.values.shape != self.mask.shape:
            raise ShapeError("self-test values and mask differ in shape")


def network_phase(net, vectors):
    """Decode phase and self-test value for normalized (M, N) vectors."""
    n = vectors.shape[-1]
    if net.input_mode == "accelerated":
        vectors, lead, _ = rotate_to_max_many(vectors)
    out = forward(net, vectors)
    phase = np.arctan2(out[:, 0], out[:, 1])
    if net.input_mode == "accelerated":
        phase = undo_rotation(phase, lead, n)
    return wrap(phase), np.hypot(out[:, 0], out[:, 1])


def pwppe_solve(stack, net, selftest_threshold=None, chunk=1 << 17):
    """Run the network on every pixel of ``stack``.

    Pixels without modulation are masked. With ``selftest_threshold`` set,
    pixels whose self-test value deviates from 1 by more than the threshold
    are masked as well; by default the self-test is diagnostic only.
    """
    if net.n_inputs != stack.n_steps:
        raise ShapeError(
            f"network expects {net.n_inputs} phase steps, stack has {stack.n_steps}"
        )
    height, width = stack.shape
    raw = np.moveaxis(stack.images, 0, -1).reshape(-1, stack.n_steps)
    _, has_mod = pwls(raw, axis=-1)
    valid = has_mod & (raw.max(axis=1) > raw.min(axis=1))
    phase = np.zeros(raw.shape[0])
    norm = np.zeros(raw.shape[0])
    idx = np.flatnonzero(valid)
    for k in range(0, idx.size, chunk):
        part = idx[k : k + chunk]
        phase[part], norm[part] = network_phase(net, normalize(raw[part]))
    mask = valid.reshape(height, width)
    selftest = SelfTestMap(norm.reshape(height, width), mask.copy())
    if selftest_threshold is not None:
        mask = mask & (np.abs(selftest.values - 1.0) <= selftest_threshold)
    return PhaseMap(phase.reshape(height, width), "wrapped", mask), selftest


def self_test_histogram(selftest, bands=DEFAULT_BANDS, mask=None):
    """Fraction of valid pixels with |value - 1| <= t for each band t."""
    bands = [float(b) for b in bands]
    if any(b <= 0 for b in bands) or any(b2 <= b1 for b1, b2 in zip(bands, bands[1:])):
        raise ShapeError(f"bands must be positive and ascending, got {bands}")
    valid = selftest.mask if mask is None else (selftest.mask & mask)
    values = selftest.values[valid]
    if values.size == 0:
        raise EmptyInputError("self-test map has no valid pixels")
    dev = np.abs(values - 1.0)
    # bands are inclusive; the slack keeps e.g. 1.1 inside the 0.1 band
    return [float(np.mean(dev <= b + 1e-12)) for b in bands]
