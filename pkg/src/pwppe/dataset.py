"""Per-pixel training data: normalization, augmentation, target encoding.

Samples are stored column-wise in numpy arrays rather than as one object per
pixel; :class:`PixelSample` is available for single-record access.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import EmptyDatasetError, FormatError, ShapeError, ZeroModulationError
from .phase import TWO_PI, pwls, wrap

MODES = ("plain", "augmented", "accelerated")

DATASET_MAGIC = "PWDS"
DATASET_VERSION = 1


def normalize(d):
    """Map each N-vector onto [-1, 1] with both endpoints attained.

    Works on a single vector or on an (M, N) array of vectors.
    """
    d = np.asarray(d, dtype=float)
    hi = d.max(axis=-1, keepdims=True)
    lo = d.min(axis=-1, keepdims=True)
    span = hi - lo
    if np.any(span <= 0):
        raise ZeroModulationError("cannot normalize a vector with max == min")
    # (d-lo) - (hi-d) hits the endpoints exactly, unlike 2d - hi - lo
    return ((d - lo) - (hi - d)) / span


def modulated(d):
    """Boolean mask of vectors with max > min (normalizable)."""
    d = np.asarray(d, dtype=float)
    return d.max(axis=-1) > d.min(axis=-1)


def _rotation_index(n):
    # row i holds the source index for each output slot: d'[j] = d[(j + i) % n]
    i = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    return (j + i) % n


def _reversal_index(n):
    # d'[j] = d[(i - j - 2) % n]; chosen so PWLS(d') == -(phi + i*2pi/N)
    i = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    return (i - j - 2) % n


def augment_many(vectors, phases):
    """All 2N rotation/reversal variants of M vectors.

    Returns ``(inputs, labels, aug_id)`` with shapes (M, 2N, N), (M, 2N) and
    (2N,). Variant ``i < N`` is the cyclic rotation by ``i`` labelled
    ``wrap(phi + i*2pi/N)``; variant ``N + i`` is the reversed sequence
    labelled ``wrap(2*pi - (phi + i*2pi/N))``.
    """
    vectors = np.asarray(vectors, dtype=float)
    phases = np.asarray(phases, dtype=float)
    n = vectors.shape[-1]
    index = np.concatenate([_rotation_index(n), _reversal_index(n)])
    inputs = vectors[..., index]
    steps = TWO_PI * np.arange(n) / n
    shifted = phases[..., None] + steps
    labels = wrap(np.concatenate([shifted, TWO_PI - shifted], axis=-1))
    return inputs, labels, np.arange(2 * n)


def augment(d, truth_phase):
    """Expand one normalized vector to its 2N rotation/reversal variants."""
    inputs, labels, _ = augment_many(np.asarray(d)[None], np.asarray([truth_phase]))
    return [(v, float(p)) for v, p in zip(inputs[0], labels[0])]


def rotate_to_max_many(vectors, phases=None):
    """Cyclically rotate each vector so its maximum leads.

    Returns ``(rotated, lead, labels)``; ``lead`` is the source index of the
    leading element (lowest index on ties). Labels are the phase referenced
    to the leading sample, ``wrap(phi + (lead + 1)*2pi/N)``, which for clean
    sinusoids lies within [-pi/N, pi/N].
    """
    vectors = np.asarray(vectors, dtype=float)
    n = vectors.shape[-1]
    lead = np.argmax(vectors, axis=-1)
    index = (lead[..., None] + np.arange(n)) % n
    rotated = np.take_along_axis(vectors, index, axis=-1)
    labels = None
    if phases is not None:
        labels = wrap(np.asarray(phases) + TWO_PI * (lead + 1) / n)
    return rotated, lead, labels


def rotate_to_max(d, truth_phase):
    rotated, _, labels = rotate_to_max_many(np.asarray(d)[None], np.asarray([truth_phase]))
    return rotated[0], float(labels[0])


def undo_rotation(phase, lead, n):
    """Inverse of the label compensation applied by :func:`rotate_to_max_many`."""
    return wrap(np.asarray(phase) - TWO_PI * (np.asarray(lead) + 1) / n)


def encode_target(phase):
    phase = np.asarray(phase, dtype=float)
    return np.sin(phase), np.cos(phase)


@dataclass
class PixelSample:
    input: np.ndarray
    target_sin: float
    target_cos: float
    origin: tuple


@dataclass
class Dataset:
    """Immutable-by-convention sample table.

    ``inputs`` is (M, N); ``targets`` is (M, 2) holding (sin, cos);
    ``origin`` is (M, 3) integer (x, y, augmentation id).
    """

    inputs: np.ndarray
    targets: np.ndarray
    origin: np.ndarray
    n_steps: int
    mode: str = "plain"
    seed: int = 0

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=float)
        self.targets = np.asarray(self.targets, dtype=float)
        self.origin = np.asarray(self.origin, dtype=np.int64)
        if self.mode not in MODES:
            raise ShapeError(f"unknown dataset mode {self.mode!r}")
        m = self.inputs.shape[0]
        if self.inputs.shape != (m, self.n_steps):
            raise ShapeError(f"inputs must be (M, {self.n_steps}), got {self.inputs.shape}")
        if self.targets.shape != (m, 2) or self.origin.shape != (m, 3):
            raise ShapeError("targets/origin rows do not match inputs")

    def __len__(self):
        return self.inputs.shape[0]

    def __getitem__(self, k):
        return PixelSample(
            self.inputs[k], float(self.targets[k, 0]), float(self.targets[k, 1]),
            tuple(int(v) for v in self.origin[k]),
        )

    def subset(self, index):
        return Dataset(self.inputs[index], self.targets[index], self.origin[index],
                       self.n_steps, self.mode, self.seed)

    def pixels(self):
        """Set of (x, y) pixel origins."""
        return set(map(tuple, self.origin[:, :2].tolist()))

    def pixel_mask(self, shape):
        mask = np.zeros(shape, dtype=bool)
        mask[self.origin[:, 1], self.origin[:, 0]] = True
        return mask


def _apply_mode(vectors, phases, xs, ys, mode):
    n = vectors.shape[1]
    if mode == "plain":
        aug = np.zeros(len(phases), dtype=np.int64)
        return vectors, phases, xs, ys, aug
    if mode == "augmented":
        inputs, labels, ids = augment_many(vectors, phases)
        m = len(phases)
        return (inputs.reshape(-1, n), labels.reshape(-1),
                np.repeat(xs, 2 * n), np.repeat(ys, 2 * n), np.tile(ids, m))
    if mode == "accelerated":
        rotated, lead, labels = rotate_to_max_many(vectors, phases)
        return rotated, labels, xs, ys, lead.astype(np.int64)
    raise ShapeError(f"unknown dataset mode {mode!r} (plain | augmented | accelerated)")


def _make(vectors, phases, xs, ys, mode, seed, n):
    inputs, labels, xo, yo, aug = _apply_mode(vectors, phases, xs, ys, mode)
    s, c = encode_target(labels)
    return Dataset(inputs, np.column_stack([s, c]), np.column_stack([xo, yo, aug]), n, mode, seed)


def build(stack, truth, mode="augmented", sample_fraction=1.0, seed=0, train_ratio=0.5):
    """Split the valid pixels of ``stack`` into disjoint train/test datasets.

    Pixels are shuffled with ``seed`` and split by ``train_ratio``; all
    augmentation variants of a pixel stay on the same side. The training
    pool is then subsampled to ``sample_fraction`` of its samples.
    """
    if truth.kind != "wrapped":
        raise ShapeError("labels must come from a wrapped phase map")
    if truth.shape != stack.shape:
        raise ShapeError(f"truth shape {truth.shape} does not match stack {stack.shape}")
    if not 0.0 < sample_fraction <= 1.0:
        raise ShapeError(f"sample_fraction must be in (0, 1], got {sample_fraction}")
    n = stack.n_steps
    raw = np.moveaxis(stack.images, 0, -1)
    _, has_mod = pwls(raw, axis=-1)
    valid = truth.mask & has_mod & modulated(raw)
    ys, xs = np.nonzero(valid)
    if xs.size == 0:
        raise EmptyDatasetError("no valid pixels to build a dataset from")
    rng = np.random.default_rng(seed)
    order = rng.permutation(xs.size)
    xs, ys = xs[order], ys[order]
    n_train = int(round(train_ratio * xs.size))
    vectors = normalize(raw[ys, xs])
    phases = truth.values[ys, xs]

    train = _make(vectors[:n_train], phases[:n_train], xs[:n_train], ys[:n_train], mode, seed, n)
    test = _make(vectors[n_train:], phases[n_train:], xs[n_train:], ys[n_train:], mode, seed, n)
    if len(train) == 0:
        raise EmptyDatasetError("training split is empty")
    keep = int(round(sample_fraction * len(train)))
    pick = rng.permutation(len(train))[: max(keep, 1)]
    return train.subset(pick), test


def save_dataset(ds, path):
    header = (
        f"{DATASET_MAGIC} {DATASET_VERSION}\n"
        f"n_steps={ds.n_steps}\nmode={ds.mode}\ncount={len(ds)}\nseed={ds.seed}\n"
        "end_header\n"
    )
    records = np.column_stack([ds.inputs, ds.targets, ds.origin.astype(float)])
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(records.astype("<f8").tobytes())


def load_dataset(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    end = blob.find(b"end_header\n")
    if not blob.startswith(DATASET_MAGIC.encode()) or end < 0:
        raise FormatError(f"{path}: not a dataset file", 0)
    lines = blob[:end].decode("ascii").splitlines()
    version = int(lines[0].split()[1])
    if version != DATASET_VERSION:
        raise FormatError(f"{path}: unsupported dataset version {version}")
    meta = dict(line.split("=", 1) for line in lines[1:] if "=" in line)
    n, count = int(meta["n_steps"]), int(meta["count"])
    offset = end + len(b"end_header\n")
    width = n + 5
    body = blob[offset:]
    if len(body) != count * width * 8:
        raise FormatError(f"{path}: expected {count} records of {width} floats", offset)
    rec = np.frombuffer(body, dtype="<f8").reshape(count, width)
    return Dataset(rec[:, :n].copy(), rec[:, n : n + 2].copy(), rec[:, n + 2 :].astype(np.int64),
                   n, meta["mode"], int(meta["seed"]))


def to_csv(ds, path=None):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"d{i + 1}" for i in range(ds.n_steps)] + ["sin", "cos", "x", "y", "aug"])
    for row_in, row_t, row_o in zip(ds.inputs, ds.targets, ds.origin):
        writer.writerow([f"{v:.9g}" for v in row_in] + [f"{v:.9g}" for v in row_t]
                        + [str(int(v)) for v in row_o])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
