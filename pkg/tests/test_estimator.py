import numpy as np
import pytest

from pwppe.dataset import build
from pwppe.errors import EmptyInputError, ShapeError
from pwppe.estimator import SelfTestMap, network_phase, pwppe_solve, self_test_histogram
from pwppe.nn import Network, TrainConfig, train
from pwppe.phase import make_ground_truth, wrap
from pwppe.synth import FringeStack, SceneSpec, ground_truth_phase, synth_sinusoidal


def rms_vs_truth(estimate, scene):
    err = wrap(estimate.values - ground_truth_phase(scene).values)[estimate.mask]
    return float(np.sqrt(np.mean(err**2)))


def test_clean_net_on_clean_stack(clean_net, clean_scene):
    estimate, selftest = pwppe_solve(synth_sinusoidal(clean_scene), clean_net.network)
    assert estimate.mask.all()
    assert rms_vs_truth(estimate, clean_scene) < 0.01
    assert np.abs(selftest.values - 1).max() < 0.05


def test_unmodulated_pixel_is_masked(clean_net, clean_scene):
    stack = synth_sinusoidal(clean_scene)
    images = stack.images.copy()
    images[:, 3, 7] = 0.5
    estimate, selftest = pwppe_solve(FringeStack(images, stack.shifts), clean_net.network)
    assert not estimate.mask[3, 7] and not selftest.mask[3, 7]
    assert estimate.mask.sum() == estimate.mask.size - 1


def test_step_count_mismatch(clean_net):
    with pytest.raises(ShapeError):
        pwppe_solve(FringeStack(np.random.default_rng(0).random((4, 8, 8))), clean_net.network)


def test_affine_rescale_invariance(clean_net, clean_scene):
    stack = synth_sinusoidal(clean_scene.with_changes(noise_sigma=0.01), seed=3)
    base, _ = pwppe_solve(stack, clean_net.network)
    moved, _ = pwppe_solve(FringeStack(2.5 * stack.images + 7.0, stack.shifts), clean_net.network)
    assert np.abs(wrap(moved.values - base.values)).max() <= 1e-12


def test_selftest_threshold_masks_outliers(clean_net, clean_scene):
    stack = synth_sinusoidal(clean_scene.with_changes(noise_sigma=0.05), seed=1)
    plain, selftest = pwppe_solve(stack, clean_net.network)
    strict, _ = pwppe_solve(stack, clean_net.network, selftest_threshold=0.01)
    expected = plain.mask & (np.abs(selftest.values - 1) <= 0.01)
    assert np.array_equal(strict.mask, expected)
    assert strict.mask.sum() < plain.mask.sum()


def test_decoded_phase_ignores_output_scale():
    phi = np.linspace(-3, 3, 50)
    for k in (0.3, 1.0, 4.0):
        assert np.allclose(np.arctan2(k * np.sin(phi), k * np.cos(phi)), phi, atol=1e-15)


def test_histogram_examples():
    ones = SelfTestMap(np.ones((4, 4)), np.ones((4, 4), bool))
    assert self_test_histogram(ones) == [1.0, 1.0, 1.0, 1.0]
    values = np.linspace(0.9, 1.1, 100_001).reshape(1, -1)
    uniform = SelfTestMap(values, np.ones(values.shape, bool))
    props = self_test_histogram(uniform, bands=(0.05, 0.1))
    assert props[1] == 1.0
    assert props[0] == pytest.approx(0.5, abs=1e-4)


def test_histogram_is_monotone(rng):
    values = 1 + rng.normal(0, 0.05, (30, 30))
    props = self_test_histogram(SelfTestMap(values, np.ones(values.shape, bool)))
    assert all(b >= a for a, b in zip(props, props[1:]))


def test_histogram_errors():
    st = SelfTestMap(np.ones((2, 2)), np.zeros((2, 2), bool))
    with pytest.raises(EmptyInputError):
        self_test_histogram(st)
    with pytest.raises(ShapeError):
        self_test_histogram(SelfTestMap(np.ones((2, 2)), np.ones((2, 2), bool)), bands=(0.1, 0.05))


def test_accelerated_mode_undoes_rotation(clean_scene):
    stack = synth_sinusoidal(clean_scene)
    train_ds, _ = build(stack, make_ground_truth(stack), "accelerated", 1.0, seed=0)
    net = train(train_ds, TrainConfig(iterations=2000, seed=0, target_mse=1e-4)).network
    assert net.input_mode == "accelerated"
    estimate, _ = pwppe_solve(stack, net)
    assert rms_vs_truth(estimate, clean_scene) < 0.02


def test_network_phase_wraps():
    net = Network((6, 2), input_mode="augmented")
    net.biases[0][...] = [0.0, -0.5]  # tanh(-0.5) < 0 with sin 0: phase pi, wrapped to -pi
    phase, norm = network_phase(net, np.zeros((3, 6)))
    assert np.all(phase == -np.pi)
    assert np.allclose(norm, np.tanh(0.5))
