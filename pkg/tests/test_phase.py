import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pwppe.errors import DegenerateFitError, UnsupportedConfigurationError
from pwppe.phase import (PhaseMap, fit_plane, make_ground_truth, pwls, pwls_solve, rewrap,
                         shift_angles, unwrap_rows, wrap)
from pwppe.synth import FringeStack, SceneSpec, ground_truth_phase, synth_binary_defocused, synth_sinusoidal


def samples(phi, n=6, a=0.5, b=0.4):
    return a + b * np.cos(phi + shift_angles(n))


def test_wrap_convention():
    assert wrap(3 * np.pi) == -np.pi
    assert wrap(np.pi) == -np.pi
    assert wrap(0.0) == 0.0
    assert wrap(-np.pi - 0.1) == pytest.approx(np.pi - 0.1, abs=1e-15)
    assert wrap(-1e-300) < np.pi


def test_pwls_examples():
    phase, valid = pwls(samples(0.0), axis=0)
    assert abs(phase) <= 1e-12 and valid
    phase, _ = pwls(samples(np.pi / 3), axis=0)
    assert phase == pytest.approx(np.pi / 3, abs=1e-12)
    _, valid = pwls(np.full(6, 0.4), axis=0)
    assert not valid


def test_pwls_needs_four_steps():
    with pytest.raises(UnsupportedConfigurationError):
        pwls_solve(FringeStack(np.ones((3, 2, 2))))


@settings(max_examples=60, deadline=None)
@given(phi=st.floats(-np.pi, np.pi - 1e-9), scale=st.floats(0.01, 100.0),
       offset=st.floats(-10, 10), n=st.integers(4, 12))
def test_pwls_affine_invariance(phi, scale, offset, n):
    base, _ = pwls(samples(phi, n), axis=0)
    moved, _ = pwls(scale * samples(phi, n) + offset, axis=0)
    assert abs(wrap(moved - base)) <= 1e-12 * max(1.0, abs(offset) / scale)


@settings(max_examples=60, deadline=None)
@given(vec=st.lists(st.floats(0, 1), min_size=6, max_size=6).filter(lambda v: max(v) - min(v) > 1e-3))
def test_pwls_matches_brute_force_least_squares(vec):
    vec = np.array(vec)
    t = shift_angles(6)
    design = np.column_stack([np.ones(6), np.cos(t), -np.sin(t)])
    (_, bc, bs), *_ = np.linalg.lstsq(design, vec, rcond=None)
    got, valid = pwls(vec, axis=0)
    if valid:
        assert abs(wrap(got - np.arctan2(bs, bc))) <= 1e-9


def ramp_map(width=64, height=4, slope=2 * np.pi / 32, offset=0.0):
    x = np.arange(width)[None, :].repeat(height, 0)
    return PhaseMap(wrap(slope * x + offset), "wrapped")


def test_unwrap_ramp():
    out = unwrap_rows(ramp_map())
    x = np.arange(64)
    assert out.kind == "unwrapped"
    assert np.abs(out.values - 2 * np.pi / 32 * x).max() <= 1e-9


def test_unwrap_constant_unchanged():
    pm = PhaseMap(np.full((5, 9), 1.25), "wrapped")
    assert np.array_equal(unwrap_rows(pm).values, pm.values)


def test_unwrap_removes_single_discontinuity():
    row = np.where(np.arange(64) < 32, 2.5, 2.5 - 2 * np.pi) + 0.01 * np.arange(64)
    out = unwrap_rows(PhaseMap(wrap(row)[None], "wrapped"))
    assert np.abs(np.diff(out.values[0])).max() < np.pi


def test_unwrap_masks_sparse_rows():
    pm = ramp_map(height=3)
    pm.mask[1] = False
    pm.mask[1, 5] = True
    out = unwrap_rows(pm)
    assert not out.mask[1].any() and out.mask[0].all()


def test_unwrap_aligns_rows_of_tilted_plane():
    yy, xx = np.mgrid[0:40, 0:64]
    plane = 0.2 * xx + 0.3 * yy + 0.7
    out = unwrap_rows(PhaseMap(wrap(plane), "wrapped"))
    fit = fit_plane(out)
    assert fit.a == pytest.approx(0.2, abs=1e-9) and fit.b == pytest.approx(0.3, abs=1e-9)
    assert fit.rms_residual <= 1e-9


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_rewrap_of_unwrap_reproduces_map(seed):
    r = np.random.default_rng(seed)
    values = wrap(r.uniform(-4, 4, size=(6, 17)))
    mask = r.random((6, 17)) > 0.2
    pm = PhaseMap(np.where(mask, values, 0.0), "wrapped", mask)
    back = rewrap(unwrap_rows(pm))
    valid = back.mask
    assert np.abs(wrap(back.values[valid] - pm.values[valid])).max() <= 1e-9


def test_fit_exact_plane():
    yy, xx = np.mgrid[0:30, 0:50]
    fit = fit_plane(PhaseMap(0.2 * xx - 0.1 * yy + 1.0, "unwrapped"))
    assert (fit.a, fit.b, fit.c) == pytest.approx((0.2, -0.1, 1.0), abs=1e-10)
    assert fit.rms_residual <= 1e-10


def test_fit_plane_with_ripple():
    yy, xx = np.mgrid[0:64, 0:256]
    # 16 periods, even about the image centre so it is orthogonal to the plane terms
    ripple = 0.05 * np.cos(2 * np.pi * (xx - 127.5) / 16)
    fit = fit_plane(PhaseMap(0.2 * xx - 0.1 * yy + 1.0 + ripple, "unwrapped"))
    assert (fit.a, fit.b, fit.c) == pytest.approx((0.2, -0.1, 1.0), abs=1e-3)
    # x and y separate on a full grid, so a 1-D line fit of one row is an oracle
    slope, intercept = np.polyfit(xx[0], 0.2 * xx[0] + 1.0 + ripple[0], 1)
    assert fit.a == pytest.approx(slope, abs=1e-9)
    assert fit.b == pytest.approx(-0.1, abs=1e-9)
    assert fit.c == pytest.approx(intercept, abs=1e-9)
    assert fit.rms_residual == pytest.approx(0.05 / np.sqrt(2), rel=0.1)


def test_fit_all_masked_is_degenerate():
    pm = PhaseMap(np.zeros((4, 4)), "unwrapped", np.zeros((4, 4), bool))
    with pytest.raises(DegenerateFitError):
        fit_plane(pm)


def test_fit_collinear_is_degenerate():
    mask = np.zeros((5, 5), bool)
    mask[2] = True
    with pytest.raises(DegenerateFitError):
        fit_plane(PhaseMap(np.zeros((5, 5)), "unwrapped", mask))


def test_rewrap_examples():
    pm = rewrap(PhaseMap(np.array([[3 * np.pi, 0.0, -np.pi - 0.1]]), "unwrapped"))
    assert pm.kind == "wrapped"
    assert pm.values[0, 0] == -np.pi and pm.values[0, 1] == 0.0
    assert pm.values[0, 2] == pytest.approx(np.pi - 0.1, abs=1e-15)


def test_ground_truth_of_ideal_plane():
    scene = SceneSpec(width=128, height=40, period=32, phase_plane=(2 * np.pi / 32, 0.01, 0.4))
    labels = make_ground_truth(synth_sinusoidal(scene))
    analytic = ground_truth_phase(scene)
    assert np.abs(wrap(labels.values - analytic.values)).max() <= 1e-9


def _six_f_energy(values, width, period):
    rows = values - values.mean(axis=1, keepdims=True)
    spec = np.abs(np.fft.rfft(rows, axis=1)) ** 2
    return spec[:, int(round(6 * width / period))].mean()


def test_ground_truth_strips_harmonic_ripple():
    scene = SceneSpec(width=256, height=32, period=32, defocus_sigma=(0.8, 0.8),
                      phase_plane=(2 * np.pi / 32, 0.0, 0.2))
    stack = synth_binary_defocused(scene)
    analytic = ground_truth_phase(scene).values
    raw_err = wrap(pwls_solve(stack).values - analytic)
    label_err = wrap(make_ground_truth(stack).values - analytic)
    raw = _six_f_energy(raw_err, scene.width, scene.period)
    labels = _six_f_energy(label_err, scene.width, scene.period)
    assert raw > 1e-3
    assert labels <= 0.01 * raw


def test_ground_truth_without_modulation_fails():
    scene = SceneSpec(width=32, height=8, period=16, modulation=0.0)
    with pytest.raises(DegenerateFitError):
        make_ground_truth(synth_sinusoidal(scene))
