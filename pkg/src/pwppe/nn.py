"""Feed-forward network N -> 12 -> 12 -> 12 -> 2 with tanh-form activation.

Backpropagation is written out by hand. All parameters live in one flat
vector; per-layer weights and biases are views into it, which keeps the
optimizer step to a handful of vector operations.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (ConfigError, EmptyDatasetError, FormatError, IncompatibleVersionError, ShapeError,
                     TrainingDivergedError)

log = logging.getLogger(__name__)

HIDDEN = (12, 12, 12)

WEIGHTS_MAGIC = b"PWNN"
WEIGHTS_VERSION = 1
INPUT_MODES = ("plain", "augmented", "accelerated")


def activation(x):
    """F(x) = 2 / (1 + exp(-2x)) - 1.

    This is tanh; ``np.tanh`` evaluates it without overflow for large |x|.
    """
    return np.tanh(x)


def activation_grad_from_output(fx):
    return 1.0 - fx * fx


class Network:
    """Fully connected tanh network.

    ``weights[l]`` has shape (fan_in, fan_out) and ``biases[l]`` shape
    (fan_out,). ``input_mode`` records how the training inputs were
    arranged so inference can repeat the same transform.
    """

    def __init__(self, layer_dims, params=None, input_mode="augmented"):
        self.layer_dims = tuple(int(d) for d in layer_dims)
        if len(self.layer_dims) < 2 or min(self.layer_dims) < 1:
            raise ShapeError(f"bad layer dims {self.layer_dims}")
        if input_mode not in INPUT_MODES:
            raise ConfigError(f"unknown input mode {input_mode!r}")
        self.input_mode = input_mode
        size = sum(i * o + o for i, o in zip(self.layer_dims[:-1], self.layer_dims[1:]))
        if params is None:
            params = np.zeros(size)
        params = np.asarray(params, dtype=float)
        if params.shape != (size,):
            raise ShapeError(f"expected {size} parameters, got {params.shape}")
        self.params = params.copy()
        self.weights, self.biases = self._views(self.params)

    def _views(self, flat):
        weights, biases, k = [], [], 0
        for fan_in, fan_out in zip(self.layer_dims[:-1], self.layer_dims[1:]):
            weights.append(flat[k : k + fan_in * fan_out].reshape(fan_in, fan_out))
            k += fan_in * fan_out
            biases.append(flat[k : k + fan_out])
            k += fan_out
        return weights, biases

    @classmethod
    def create(cls, n_inputs, seed=0, hidden=HIDDEN, n_outputs=2, input_mode="augmented"):
        """Glorot-uniform weights, zero biases."""
        net = cls((n_inputs, *hidden, n_outputs), input_mode=input_mode)
        rng = np.random.default_rng(seed)
        for w in net.weights:
            limit = np.sqrt(6.0 / (w.shape[0] + w.shape[1]))
            w[...] = rng.uniform(-limit, limit, size=w.shape)
        return net

    @property
    def n_inputs(self):
        return self.layer_dims[0]

    @property
    def n_params(self):
        return self.params.size

    def copy(self):
        return Network(self.layer_dims, self.params, self.input_mode)

    def check(self):
        for (w, b), (fan_in, fan_out) in zip(zip(self.weights, self.biases),
                                             zip(self.layer_dims[:-1], self.layer_dims[1:])):
            assert w.shape == (fan_in, fan_out) and b.shape == (fan_out,)
        if not np.all(np.isfinite(self.params)):
            raise TrainingDivergedError(-1, float("nan"))


def _activations(net, x):
    acts = [x]
    for w, b in zip(net.weights, net.biases):
        acts.append(np.tanh(acts[-1] @ w + b))
    return acts


def _as_batch(net, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None]
    if x.ndim != 2 or x.shape[1] != net.n_inputs:
        raise ShapeError(f"network expects {net.n_inputs} inputs, got shape {x.shape}")
    return x, single


def forward(net, x):
    """Outputs (O_s, O_c) for one vector or an (M, N) batch."""
    x, single = _as_batch(net, x)
    out = _activations(net, x)[-1]
    return out[0] if single else out


def _backprop(net, acts, target, grad):
    """Write gradients of mean_batch(0.5*sum((O - t)**2)) into ``grad``."""
    gw, gb = net._views(grad)
    m = acts[0].shape[0]
    out = acts[-1]
    delta = (out - target) * (1.0 - out * out) / m
    for layer in range(len(net.weights) - 1, -1, -1):
        a_prev = acts[layer]
        np.matmul(a_prev.T, delta, out=gw[layer])
        gb[layer][...] = delta.sum(axis=0)
        if layer:
            delta = (delta @ net.weights[layer].T) * (1.0 - a_prev * a_prev)
    return grad


def backward(net, x, target):
    """Exact gradients of 0.5*[(O_s - t_s)**2 + (O_c - t_c)**2].

    For a batch the loss is averaged over samples. Returns a list of
    ``(dW, db)`` pairs, one per layer.
    """
    x, _ = _as_batch(net, x)
    target = np.asarray(target, dtype=float).reshape(x.shape[0], -1)
    grad = np.zeros_like(net.params)
    _backprop(net, _activations(net, x), target, grad)
    gw, gb = net._views(grad)
    return list(zip(gw, gb))


def loss(net, x, target):
    """0.5 * summed squared output error, averaged over the batch."""
    x, _ = _as_batch(net, x)
    target = np.asarray(target, dtype=float).reshape(x.shape[0], -1)
    diff = forward(net, x) - target
    return 0.5 * float(np.mean(np.sum(diff * diff, axis=1)))


def mse(net, x, target, chunk=65536):
    """Mean squared error over all samples and both outputs."""
    x = np.asarray(x, dtype=float)
    total = 0.0
    for k in range(0, x.shape[0], chunk):
        diff = forward(net, x[k : k + chunk]) - target[k : k + chunk]
        total += float(np.sum(diff * diff))
    return total / target.size


@dataclass
class TrainConfig:
    iterations: int = 10000
    learning_rate: float = 1e-3
    batch_size: int = 256
    seed: int = 0
    optimizer: str = "adam"
    target_mse: float = 5e-4
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def validate(self):
        if self.iterations <= 0:
            raise ConfigError(f"iterations must be > 0, got {self.iterations}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size <= 0:
            raise ConfigError(f"batch_size must be > 0, got {self.batch_size}")
        if self.optimizer not in ("sgd", "momentum", "adam"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r} (sgd | momentum | adam)")
        return self


@dataclass
class TrainResult:
    network: Network
    loss_history: list = field(default_factory=list)
    final_mse: float = float("nan")
    epochs: int = 0
    converged: bool = False


def train(data, cfg, net=None):
    """Mini-batch training; one iteration is one full pass over ``data``.

    Stops after ``cfg.iterations`` passes or as soon as the mean MSE of a
    pass drops to ``cfg.target_mse``. The per-pass mean MSE is accumulated
    from the batches as they are visited (before each update).
    """
    cfg.validate()
    if len(data) == 0:
        raise EmptyDatasetError("cannot train on an empty dataset")
    if net is None:
        net = Network.create(data.n_steps, seed=cfg.seed, input_mode=data.mode)
    elif net.n_inputs != data.n_steps:
        raise ShapeError(f"network takes {net.n_inputs} inputs, dataset has {data.n_steps}")
    x_all, t_all = data.inputs, data.targets
    m = x_all.shape[0]
    rng = np.random.default_rng(cfg.seed)
    grad = np.zeros_like(net.params)
    state1 = np.zeros_like(net.params)
    state2 = np.zeros_like(net.params)
    b1, b2 = cfg.beta1, cfg.beta2
    step = 0
    history = []
    converged = False
    for epoch in range(1, cfg.iterations + 1):
        order = rng.permutation(m)
        sq_sum = 0.0
        for start in range(0, m, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            acts = _activations(net, x_all[idx])
            target = t_all[idx]
            diff = acts[-1] - target
            sq_sum += float(np.vdot(diff, diff))
            _backprop(net, acts, target, grad)
            # mse over K outputs = (2/K) * loss
            grad *= 2.0 / target.shape[1]
            step += 1
            if cfg.optimizer == "adam":
                state1 *= b1
                state1 += (1.0 - b1) * grad
                state2 *= b2
                state2 += (1.0 - b2) * grad * grad
                lr_t = cfg.learning_rate * np.sqrt(1.0 - b2**step) / (1.0 - b1**step)
                net.params -= lr_t * state1 / (np.sqrt(state2) + cfg.eps)
            elif cfg.optimizer == "momentum":
                state1 *= cfg.momentum
                state1 -= cfg.learning_rate * grad
                net.params += state1
            else:
                net.params -= cfg.learning_rate * grad
        epoch_mse = sq_sum / t_all.size
        if not np.isfinite(epoch_mse) or not np.all(np.isfinite(net.params)):
            raise TrainingDivergedError(epoch, epoch_mse)
        history.append(epoch_mse)
        if epoch % 1000 == 0:
            log.info("epoch %d mse %.3e", epoch, epoch_mse)
        if epoch_mse <= cfg.target_mse:
            converged = True
            break
    final = mse(net, x_all, t_all)
    return TrainResult(net, history, final, len(history), converged)


def save_weights(net, path):
    """Header: magic, version, input mode, layer count, dims; then float64 LE
    weights (row-major, fan_in x fan_out) and biases per layer."""
    dims = net.layer_dims
    header = struct.pack("<4sIII", WEIGHTS_MAGIC, WEIGHTS_VERSION,
                         INPUT_MODES.index(net.input_mode), len(dims))
    header += struct.pack(f"<{len(dims)}I", *dims)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(net.params.astype("<f8").tobytes())


def load_weights(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16:
        raise FormatError(f"{path}: truncated header", len(blob))
    magic, version, mode, n_dims = struct.unpack_from("<4sIII", blob, 0)
    if magic != WEIGHTS_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}", 0)
    if version != WEIGHTS_VERSION:
        raise IncompatibleVersionError(
            f"{path}: weight file version {version}, this build reads {WEIGHTS_VERSION}", 4
        )
    if mode >= len(INPUT_MODES):
        raise FormatError(f"{path}: unknown input mode {mode}", 8)
    offset = 16
    if len(blob) < offset + 4 * n_dims:
        raise FormatError(f"{path}: truncated layer table", len(blob))
    dims = struct.unpack_from(f"<{n_dims}I", blob, offset)
    offset += 4 * n_dims
    size = sum(i * o + o for i, o in zip(dims[:-1], dims[1:]))
    if len(blob) != offset + 8 * size:
        raise FormatError(
            f"{path}: expected {size} parameters, file holds {(len(blob) - offset) / 8:g}",
            len(blob) if len(blob) < offset + 8 * size else offset + 8 * size,
        )
    params = np.frombuffer(blob, dtype="<f8", count=size, offset=offset)
    return Network(dims, params, INPUT_MODES[mode])
