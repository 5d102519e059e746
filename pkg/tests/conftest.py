import numpy as np
import pytest

from pwppe.dataset import build
from pwppe.nn import TrainConfig, train
from pwppe.phase import make_ground_truth
from pwppe.synth import SceneSpec, synth_sinusoidal

ACCEPTANCE_LINES = []


def record(criterion, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def clean_scene():
    return SceneSpec(width=96, height=48, period=32.0, n_steps=6,
                     phase_plane=(2 * np.pi / 32, 0.01, 0.3), noise_sigma=0.0)


@pytest.fixture(scope="session")
def clean_net(clean_scene):
    """Network trained on an ideal, noise-free sinusoid scene."""
    stack = synth_sinusoidal(clean_scene)
    truth = make_ground_truth(stack)
    train_ds, _ = build(stack, truth, "augmented", 0.5, seed=3)
    result = train(train_ds, TrainConfig(iterations=3000, seed=3, target_mse=2e-5))
    return result
