"""On-disk formats: PGM images, stack directories, PMAP phase maps."""

from __future__ import annotations

import os
import re
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError, PWPPEError, ShapeError
from .phase import PhaseMap

PMAP_MAGIC = b"PMAP"
PMAP_HEADER = struct.Struct("<4sQQI")  # magic, width, height, kind: 24 bytes
PMAP_KINDS = {"wrapped": 0, "unwrapped": 1, "selftest": 2}

_PGM_HEADER = re.compile(rb"^P5\s+(?:#.*\s+)*(\d+)\s+(?:#.*\s+)*(\d+)\s+(?:#.*\s+)*(\d+)\s")


class FilesystemError(PWPPEError, OSError):
    exit_code = 5


def _io_guard(func):
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (FileNotFoundError, PermissionError, IsADirectoryError, NotADirectoryError) as exc:
            raise FilesystemError(str(exc)) from exc

    wrapper.__name__ = func.__name__
    wrapper.__doc__ = func.__doc__
    return wrapper


@_io_guard
def write_pgm(path, image, maxval=65535):
    """Write integer gray values as binary PGM (16-bit samples are big-endian)."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError("PGM holds a single 2-D image")
    if np.any(image < 0) or np.any(image > maxval):
        raise ValueError(f"gray values outside [0, {maxval}]")
    dtype = ">u2" if maxval > 255 else "u1"
    height, width = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n{maxval}\n".encode("ascii"))
        fh.write(np.ascontiguousarray(image, dtype=dtype).tobytes())


@_io_guard
def read_pgm(path):
    """Return ``(image, maxval)`` from a binary PGM."""
    with open(path, "rb") as fh:
        blob = fh.read()
    match = _PGM_HEADER.match(blob)
    if not match:
        raise FormatError(f"{path}: not a binary PGM", 0)
    width, height, maxval = (int(g) for g in match.groups())
    dtype = ">u2" if maxval > 255 else "u1"
    count = width * height
    need = count * np.dtype(dtype).itemsize
    if len(blob) - match.end() < need:
        raise FormatError(f"{path}: pixel data truncated", len(blob))
    image = np.frombuffer(blob, dtype=dtype, count=count, offset=match.end())
    return image.reshape(height, width).astype(np.int64), maxval


def write_intensity_pgm(path, values):
    write_pgm(path, np.round(np.clip(values, 0.0, 1.0) * 65535).astype(np.int64))


def read_intensity_pgm(path):
    image, maxval = read_pgm(path)
    return image / float(maxval)


# -- stack directories ---------------------------------------------------------

def _fmt(value):
    if isinstance(value, (tuple, list, np.ndarray)):
        if len(value) and isinstance(value[0], (tuple, list)):
            return ",".join(":".join(_fmt(v) for v in item) for item in value)
        return ",".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_meta(path, items):
    with open(path, "w") as fh:
        for key, value in items.items():
            fh.write(f"{key}={_fmt(value)}\n")


@_io_guard
def read_meta(path):
    meta = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise FormatError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            meta[key.strip()] = value.strip()
    return meta


@_io_guard
def save_stack(stack, directory, kind=None):
    from dataclasses import asdict

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, image in enumerate(stack.images, 1):
        write_intensity_pgm(directory / f"step_{i:02d}.pgm", image)
    meta = {"n_steps": stack.n_steps, "shifts": list(map(float, stack.shifts))}
    if stack.scene is not None:
        meta["period"] = float(stack.scene.period)
        for key, value in asdict(stack.scene).items():
            meta[f"scene.{key}"] = value
    if kind is not None:
        meta["kind"] = kind
    meta["seed"] = stack.seed if stack.seed is not None else "none"
    write_meta(directory / "stack.meta", meta)


@_io_guard
def load_stack(directory):
    from .config import scene_from_items
    from .synth import FringeStack

    directory = Path(directory)
    meta = read_meta(directory / "stack.meta")
    try:
        n = int(meta["n_steps"])
        shifts = np.array([float(v) for v in meta["shifts"].split(",")])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{directory / 'stack.meta'}: bad or missing n_steps/shifts ({exc})") from exc
    frames = [read_intensity_pgm(directory / f"step_{i:02d}.pgm") for i in range(1, n + 1)]
    if len({f.shape for f in frames}) != 1:
        raise ShapeError(f"{directory}: step images differ in size")
    images = np.stack(frames)
    scene_items = {k[6:]: v for k, v in meta.items() if k.startswith("scene.")}
    scene = scene_from_items(scene_items) if scene_items else None
    seed = None if meta.get("seed", "none") == "none" else int(meta["seed"])
    return FringeStack(images, shifts, scene, seed, meta)


# -- PMAP ----------------------------------------------------------------------

def mask_path(path):
    path = Path(path)
    return path.with_name(path.stem + ".mask.pgm")


@_io_guard
def save_phasemap(path, values, mask, kind):
    values = np.asarray(values, dtype=float)
    height, width = values.shape
    with open(path, "wb") as fh:
        fh.write(PMAP_HEADER.pack(PMAP_MAGIC, width, height, PMAP_KINDS[kind]))
        fh.write(values.astype("<f8").tobytes())
    write_pgm(mask_path(path), np.where(mask, 255, 0), maxval=255)


@_io_guard
def load_phasemap_raw(path):
    """Return ``(values, mask, kind)``."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < PMAP_HEADER.size:
        raise FormatError(f"{path}: truncated PMAP header", len(blob))
    magic, width, height, flag = PMAP_HEADER.unpack_from(blob)
    if magic != PMAP_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}", 0)
    kinds = {v: k for k, v in PMAP_KINDS.items()}
    if flag not in kinds:
        raise FormatError(f"{path}: unknown kind flag {flag}", 20)
    need = PMAP_HEADER.size + 8 * width * height
    if len(blob) != need:
        raise FormatError(f"{path}: expected {need} bytes, found {len(blob)}", min(len(blob), need))
    values = np.frombuffer(blob, dtype="<f8", offset=PMAP_HEADER.size).reshape(height, width).copy()
    mpath = mask_path(path)
    if os.path.exists(mpath):
        mask = read_pgm(mpath)[0] > 0
    else:
        mask = np.ones(values.shape, dtype=bool)
    return values, mask, kinds[flag]


def save_phase(path, pmap):
    save_phasemap(path, pmap.values, pmap.mask, pmap.kind)


def load_phase(path):
    values, mask, kind = load_phasemap_raw(path)
    if kind == "selftest":
        raise FormatError(f"{path}: holds a self-test map, not a phase map")
    return PhaseMap(values, kind, mask)


def save_selftest(path, selftest):
    save_phasemap(path, selftest.values, selftest.mask, "selftest")


def load_selftest(path):
    from .estimator import SelfTestMap

    values, mask, kind = load_phasemap_raw(path)
    if kind != "selftest":
        raise FormatError(f"{path}: holds a {kind} phase map, not a self-test map")
    return SelfTestMap(values, mask)


def write_error_map(path, errors, mask):
    """Linearly map errors to 16-bit gray; writes ``<stem>.scale`` alongside."""
    path = Path(path)
    valid = errors[mask]
    lo = float(valid.min()) if valid.size else 0.0
    hi = float(valid.max()) if valid.size else 0.0
    span = hi - lo if hi > lo else 1.0
    gray = np.where(mask, np.round((errors - lo) / span * 65535), 0).astype(np.int64)
    write_pgm(path, np.clip(gray, 0, 65535))
    with open(path.with_suffix(".scale"), "w") as fh:
        fh.write(f"min={lo!r}\nmax={hi!r}\nunits=rad\n")
    return lo, hi
