"""Point-wise posterior phase estimation for fringe projection profilometry.

A small feed-forward network maps the normalized gray values of one pixel
across N phase-shifted fringe images to (sin, cos) of its phase, trained on
a planar target whose labels come from a plane fit of the classical
point-wise least-squares (PWLS) phase.
"""

from .dataset import Dataset, augment, build, encode_target, normalize, rotate_to_max
from .estimator import SelfTestMap, pwppe_solve, self_test_histogram
from .nn import Network, TrainConfig, activation, backward, forward, load_weights, save_weights, train
from .phase import (PhaseMap, PlaneFit, fit_plane, make_ground_truth, pwls_solve, rewrap,
                    unwrap_rows, wrap)
from .report import EvalReport, compare, emit, generalization_sweep, phase_error
from .synth import FringeStack, SceneSpec, ground_truth_phase, synth_binary_defocused, synth_sinusoidal

__version__ = "0.1.0"
