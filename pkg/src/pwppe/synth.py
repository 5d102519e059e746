"""Synthetic phase-shifted fringe stacks over a tilted calibration plane."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import ConfigError
from .phase import TWO_PI, PhaseMap, shift_angles, wrap

#: fine-grid samples per camera pixel used when blurring binary patterns
SUPERSAMPLE = 8


@dataclass(frozen=True)
class SceneSpec:
    """Synthetic scene description.

    ``phase_plane`` holds (a, b, c) of the unwrapped phase a*x + b*y + c
    with x the column and y the row index. When left as ``None`` it becomes
    ``(2*pi/period, 0, 0)``.
    """

    width: int = 512
    height: int = 512
    period: float = 32.0
    n_steps: int = 6
    phase_plane: tuple = None
    defocus_sigma: tuple = (0.5, 4.0)
    noise_sigma: float = 0.0
    background: float = 0.5
    modulation: float = 0.4
    harmonics: tuple = ()
    seam_gap: float = 0.0
    projector_pitch: float = 8.0

    def __post_init__(self):
        if self.phase_plane is None:
            object.__setattr__(self, "phase_plane", (TWO_PI / self.period, 0.0, 0.0))
        object.__setattr__(self, "phase_plane", tuple(float(v) for v in self.phase_plane))
        object.__setattr__(self, "defocus_sigma", tuple(float(v) for v in self.defocus_sigma))
        object.__setattr__(
            self, "harmonics", tuple((int(k), float(e)) for k, e in self.harmonics)
        )

    def validate(self):
        if self.width < 1 or self.height < 1:
            raise ConfigError(f"image size must be positive, got {self.width}x{self.height}")
        if self.n_steps < 4:
            raise ConfigError(f"n_steps must be >= 4, got {self.n_steps}")
        if not self.period > 4:
            raise ConfigError(f"period must exceed 4 pixels, got {self.period}")
        a, b = self.background, self.modulation
        if a - b < -1e-12:
            raise ConfigError(f"need A-B >= 0 so intensities stay non-negative, got A={a}, B={b}")
        if a + b > 1.0 + 1e-12:
            raise ConfigError(f"need A+B <= 1 so intensities fit [0, 1], got A={a}, B={b}")
        if b < 0:
            raise ConfigError(f"modulation must be non-negative, got {b}")
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be non-negative, got {self.noise_sigma}")
        if len(self.phase_plane) != 3:
            raise ConfigError("phase_plane needs three coefficients (a, b, c)")
        if len(self.defocus_sigma) != 2:
            raise ConfigError("defocus_sigma needs (left, right)")
        if self.seam_gap < 0 or self.projector_pitch <= 0:
            raise ConfigError("seam_gap must be >= 0 and projector_pitch > 0")
        for k, _ in self.harmonics:
            if k < 2:
                raise ConfigError(f"harmonic order must be >= 2, got {k}")
        return self

    @property
    def fringe_frequency(self):
        """Carrier frequency along x in cycles per pixel."""
        return abs(self.phase_plane[0]) / TWO_PI

    def sigma_per_column(self):
        left, right = self.defocus_sigma
        if self.width == 1:
            return np.array([left])
        return np.linspace(left, right, self.width)

    def unwrapped_phase(self, x=None, y=None):
        a, b, c = self.phase_plane
        if x is None:
            y, x = np.mgrid[0 : self.height, 0 : self.width]
        return a * x + b * y + c

    def with_changes(self, **changes):
        return replace(self, **changes)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


@dataclass
class FringeStack:
    """N phase-shifted intensity images, shape (N, height, width)."""

    images: np.ndarray
    shifts: np.ndarray = None
    scene: SceneSpec = None
    seed: int = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=float)
        if self.images.ndim != 3:
            raise ConfigError(f"stack must be (N, H, W), got {self.images.shape}")
        n = self.images.shape[0]
        if self.shifts is None:
            self.shifts = shift_angles(n)
        self.shifts = np.asarray(self.shifts, dtype=float)
        if self.shifts.shape != (n,):
            raise ConfigError(f"expected {n} shifts, got {self.shifts.shape}")
        if not np.allclose(np.diff(self.shifts), TWO_PI / n, atol=1e-9):
            raise ConfigError("shifts must be strictly increasing with spacing 2*pi/N")

    @property
    def n_steps(self):
        return self.images.shape[0]

    @property
    def shape(self):
        return self.images.shape[1:]

    def scaled(self, scale, offset=0.0):
        return FringeStack(self.images * scale + offset, self.shifts, self.scene, self.seed, dict(self.meta))


def _finish(clean, scene, seed):
    if scene.noise_sigma > 0:
        rng = np.random.default_rng(seed)
        clean = clean + rng.normal(0.0, scene.noise_sigma, size=clean.shape)
    return np.clip(clean, 0.0, 1.0)


def synth_sinusoidal(scene, seed=0):
    """Ideal sinusoid plus optional harmonics, noise, then clamp to [0, 1]."""
    scene.validate()
    a_bg, b_mod = scene.background, scene.modulation
    phi = scene.unwrapped_phase()
    theta = shift_angles(scene.n_steps)
    arg = phi[None] + theta[:, None, None]
    images = a_bg + b_mod * np.cos(arg)
    for k, amp in scene.harmonics:
        images = images + b_mod * amp * np.cos(k * arg)
    images = _finish(images, scene, seed)
    return FringeStack(images, theta, scene, seed)


def _blur_weights(sigmas, radius):
    """Normalized Gaussian taps on the fine grid, shape (2*radius+1, width)."""
    taps = np.arange(-radius, radius + 1) / SUPERSAMPLE
    w = np.exp(-0.5 * (taps[:, None] / sigmas[None, :]) ** 2)
    return w / w.sum(axis=0, keepdims=True)


def _high_fraction(u, width):
    """Share of [u - width/2, u + width/2] where cos >= 0 (box-filtered square wave).

    Point sampling would snap each edge to the fine grid, which leaves a
    phase-step-dependent error of a few mrad even under heavy blur.
    """
    if width == 0:
        return (np.cos(u) >= 0).astype(float)

    def integral(v):
        v = v + np.pi / 2
        turns = np.floor(v / TWO_PI)
        return np.pi * turns + np.minimum(v - TWO_PI * turns, np.pi)

    return (integral(u + width / 2) - integral(u - width / 2)) / width


def synth_binary_defocused(scene, seed=0):
    """50% duty-cycle binary fringes blurred by a column-varying Gaussian.

    The pattern is evaluated on a grid ``SUPERSAMPLE`` times finer than the
    camera pixels and blurred along x only, each output column using its own
    sigma (linear from ``defocus_sigma[0]`` on the left to ``[1]`` on the
    right). Optional dark seams of width ``seam_gap`` sit at projector pixel
    boundaries every ``projector_pitch`` camera pixels.
    """
    scene.validate()
    sigmas = scene.sigma_per_column()
    if np.any(sigmas <= 0):
        raise ConfigError(f"defocus sigma must be > 0 everywhere, got {scene.defocus_sigma}")
    a, b, c = scene.phase_plane
    radius = int(math.ceil(4.0 * sigmas.max() * SUPERSAMPLE))
    n_fine = scene.width * SUPERSAMPLE + 2 * radius
    xf = (np.arange(n_fine) - radius) / SUPERSAMPLE
    yy = np.arange(scene.height)
    phi = a * xf[None, :] + (b * yy + c)[:, None]
    weights = _blur_weights(sigmas, radius)
    theta = shift_angles(scene.n_steps)
    high = scene.background + scene.modulation
    low = scene.background - scene.modulation

    if scene.seam_gap > 0:
        seam = np.mod(xf, scene.projector_pitch) < scene.seam_gap
    else:
        seam = None

    images = np.empty((scene.n_steps, scene.height, scene.width))
    span = scene.width * SUPERSAMPLE
    for i, th in enumerate(theta):
        fine = low + (high - low) * _high_fraction(phi + th, a / SUPERSAMPLE)
        if seam is not None:
            fine[:, seam] = low
        acc = np.zeros((scene.height, scene.width))
        for t in range(2 * radius + 1):
            acc += weights[t] * fine[:, t : t + span : SUPERSAMPLE]
        images[i] = acc
    images = _finish(images, scene, seed)
    return FringeStack(images, theta, scene, seed)


def synthesize(scene, kind="binary", seed=0):
    if kind == "binary":
        return synth_binary_defocused(scene, seed)
    if kind == "sinusoidal":
        return synth_sinusoidal(scene, seed)
    raise ConfigError(f"unknown synthesis kind {kind!r} (binary | sinusoidal)")


def ground_truth_phase(scene):
    """Analytic wrapped phase of the scene plane; ``values`` are wrapped."""
    scene.validate()
    plane = scene.unwrapped_phase()
    out = PhaseMap(wrap(plane), "wrapped", np.ones(plane.shape, dtype=bool), analytic=True)
    out.unwrapped = plane
    return out


def quantize(stack, bits=8):
    """Round intensities to ``bits``-bit levels (divide-by-(2**bits - 1) model)."""
    levels = float(2**bits - 1)
    q = np.round(stack.images * levels) / levels
    return FringeStack(q, stack.shifts, stack.scene, stack.seed, dict(stack.meta))
