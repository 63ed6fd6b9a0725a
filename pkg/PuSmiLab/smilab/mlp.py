"""
Feed-forward network with hand-written gradients.

Hidden layers are linear -> batch norm (optional) -> ReLU; the output layer
is linear unless MlpSpec.activate_output is set. Weights are stored
as (fan_in, fan_out) matrices so a batch flows as rows: z = h @ W + b.
"""
import copy
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import PreconditionError, ShapeError, StaleCacheError

logger = logging.getLogger(__name__)

BN_MOMENTUM = 0.9
BN_EPS = 1e-5


@dataclass(frozen=True)
class MlpSpec:
    layer_sizes: tuple
    batchnorm: object = True
    activate_output: bool = False

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or min(sizes) < 1:
            raise PreconditionError(f"need at least two layer sizes, all >= 1, got {sizes}")
        object.__setattr__(self, 'layer_sizes', sizes)
        activated = len(sizes) - 2 + (1 if self.activate_output else 0)
        if isinstance(self.batchnorm, bool):
            flags = (self.batchnorm,) * activated
        else:
            flags = tuple(bool(flag) for flag in self.batchnorm)
            if len(flags) != activated:
                raise PreconditionError(f"batchnorm needs {activated} flags, got {len(flags)}")
        object.__setattr__(self, 'batchnorm', flags)

    @property
    def n_layers(self):
        return len(self.layer_sizes) - 1

    @property
    def input_size(self):
        return self.layer_sizes[0]

    @property
    def output_size(self):
        return self.layer_sizes[-1]

    def activated(self, index):
        return index < self.n_layers - 1 or self.activate_output

    def normalized(self, index):
        return self.activated(index) and self.batchnorm[index]

    @property
    def uses_batchnorm(self):
        return any(self.batchnorm)

    def to_dict(self):
        return {
            'layer_sizes': list(self.layer_sizes),
            'batchnorm': list(self.batchnorm),
            'activate_output': self.activate_output,
        }

    @classmethod
    def from_dict(cls, payload):
        return cls(tuple(payload['layer_sizes']), tuple(payload['batchnorm']), payload['activate_output'])


@dataclass(frozen=True)
class SgdConfig:
    learning_rate: float = 0.001
    weight_decay: float = 0.0005
    grad_noise_std: float = 0.01
    batch_size: int = 64
    seed: object = None

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise PreconditionError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.weight_decay < 0 or self.grad_noise_std < 0:
            raise PreconditionError("weight_decay and grad_noise_std must be >= 0")
        if self.batch_size < 2:
            raise PreconditionError(f"batch_size must be at least 2, got {self.batch_size}")

    def to_dict(self):
        return {
            'learning_rate': self.learning_rate,
            'weight_decay': self.weight_decay,
            'grad_noise_std': self.grad_noise_std,
            'batch_size': self.batch_size,
        }


@dataclass
class DenseLayer:
    weight: np.ndarray
    bias: np.ndarray


@dataclass
class BatchNorm:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = BN_MOMENTUM
    eps: float = BN_EPS


@dataclass
class NormGrad:
    gamma: np.ndarray
    beta: np.ndarray


@dataclass
class MlpParams:
    layers: list
    norms: list
    version: int = 0

    def copy(self):
        return copy.deepcopy(self)

    def to_dict(self):
        return {
            'layers': [{'weight': l.weight.tolist(), 'bias': l.bias.tolist()} for l in self.layers],
            'norms': [
                None if n is None else {
                    'gamma': n.gamma.tolist(),
                    'beta': n.beta.tolist(),
                    'running_mean': n.running_mean.tolist(),
                    'running_var': n.running_var.tolist(),
                    'momentum': n.momentum,
                    'eps': n.eps,
                }
                for n in self.norms
            ],
        }

    @classmethod
    def from_dict(cls, payload):
        layers = [
            DenseLayer(np.asarray(l['weight'], dtype=float), np.asarray(l['bias'], dtype=float))
            for l in payload['layers']
        ]
        norms = [
            None if n is None else BatchNorm(
                np.asarray(n['gamma'], dtype=float),
                np.asarray(n['beta'], dtype=float),
                np.asarray(n['running_mean'], dtype=float),
                np.asarray(n['running_var'], dtype=float),
                n.get('momentum', BN_MOMENTUM),
                n.get('eps', BN_EPS),
            )
            for n in payload['norms']
        ]
        return cls(layers, norms)


@dataclass
class Gradients:
    layers: list
    norms: list


@dataclass
class _LayerRecord:
    inputs: np.ndarray
    xhat: np.ndarray = None
    inv_std: np.ndarray = None
    mask: np.ndarray = None


@dataclass
class ForwardCache:
    mode: str
    version: int
    owner: int
    records: list = field(default_factory=list)


def init_params(spec, seed=None):
    """Glorot-uniform weights, zero biases, identity batch norm."""
    rng = np.random.default_rng(seed)
    layers = []
    norms = []
    for index, (fan_in, fan_out) in enumerate(zip(spec.layer_sizes[:-1], spec.layer_sizes[1:])):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        layers.append(DenseLayer(rng.uniform(-limit, limit, (fan_in, fan_out)), np.zeros(fan_out)))
        if spec.normalized(index):
            norms.append(BatchNorm(np.ones(fan_out), np.zeros(fan_out), np.zeros(fan_out), np.ones(fan_out)))
        else:
            norms.append(None)
    logger.debug("initialized network %s", spec.layer_sizes)
    return MlpParams(layers, norms)


def forward(params, spec, batch, mode='train'):
    """
    Run the network on a batch of rows.

    Train mode normalizes with batch statistics and updates the running
    statistics in place; eval mode uses the running statistics and is a
    per-row function.
    """
    if mode not in ('train', 'eval'):
        raise PreconditionError(f"mode must be 'train' or 'eval', got {mode!r}")
    h = np.asarray(batch, dtype=float)
    if h.ndim != 2 or h.shape[1] != spec.input_size:
        raise ShapeError(f"batch shape {h.shape} does not match input size {spec.input_size}")
    training = mode == 'train'
    if training and spec.uses_batchnorm and h.shape[0] < 2:
        raise PreconditionError("batch norm in train mode needs at least 2 rows")

    records = []
    for index, layer in enumerate(params.layers):
        record = _LayerRecord(inputs=h)
        z = h @ layer.weight + layer.bias
        if spec.activated(index):
            norm = params.norms[index]
            if norm is not None:
                if training:
                    n = z.shape[0]
                    mean = z.mean(axis=0)
                    var = z.var(axis=0)
                    norm.running_mean[...] = norm.momentum * norm.running_mean + (1 - norm.momentum) * mean
                    norm.running_var[...] = (
                        norm.momentum * norm.running_var + (1 - norm.momentum) * var * n / (n - 1)
                    )
                else:
                    mean = norm.running_mean
                    var = norm.running_var
                record.inv_std = 1.0 / np.sqrt(var + norm.eps)
                record.xhat = (z - mean) * record.inv_std
                z = norm.gamma * record.xhat + norm.beta
            record.mask = z > 0
            z = z * record.mask
        records.append(record)
        h = z
    return h, ForwardCache(mode, params.version, id(params), records)


def backward(params, cache, output_grad):
    """Exact gradients of a train-mode forward; returns (Gradients, input gradient)."""
    if cache.mode != 'train':
        raise StaleCacheError("backward needs a cache from a train-mode forward")
    if cache.owner != id(params) or cache.version != params.version:
        raise StaleCacheError("cache was produced by a different parameter set")
    g = np.asarray(output_grad, dtype=float)
    expected = (cache.records[0].inputs.shape[0], params.layers[-1].weight.shape[1])
    if g.shape != expected:
        raise ShapeError(f"output gradient shape {g.shape}, expected {expected}")

    layer_grads = [None] * len(params.layers)
    norm_grads = [None] * len(params.layers)
    for index in reversed(range(len(params.layers))):
        record = cache.records[index]
        layer = params.layers[index]
        if record.mask is not None:
            g = g * record.mask
            norm = params.norms[index]
            if norm is not None:
                xhat = record.xhat
                norm_grads[index] = NormGrad(gamma=(g * xhat).sum(axis=0), beta=g.sum(axis=0))
                dxhat = g * norm.gamma
                n = g.shape[0]
                g = record.inv_std / n * (
                    n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0)
                )
        layer_grads[index] = DenseLayer(weight=record.inputs.T @ g, bias=g.sum(axis=0))
        g = g @ layer.weight.T
    return Gradients(layer_grads, norm_grads), g


def sgd_step(params, grads, config, step_rng=None):
    """
    p <- p - lr * (g + weight_decay * p + noise) on a copy of params.

    Batch-norm scale and shift get gradient and noise but no decay; running
    statistics are left alone.
    """
    rng = np.random.default_rng(step_rng)
    updated = params.copy()
    updated.version = params.version + 1
    lr = config.learning_rate

    def noise(shape):
        if config.grad_noise_std > 0:
            return rng.normal(0.0, config.grad_noise_std, shape)
        return 0.0

    for layer, grad in zip(updated.layers, grads.layers):
        if layer.weight.shape != grad.weight.shape or layer.bias.shape != grad.bias.shape:
            raise ShapeError("gradient shapes do not match the parameters")
        layer.weight = layer.weight - lr * (grad.weight + config.weight_decay * layer.weight + noise(layer.weight.shape))
        layer.bias = layer.bias - lr * (grad.bias + config.weight_decay * layer.bias + noise(layer.bias.shape))
    for norm, grad in zip(updated.norms, grads.norms):
        if norm is None or grad is None:
            continue
        norm.gamma = norm.gamma - lr * (grad.gamma + noise(norm.gamma.shape))
        norm.beta = norm.beta - lr * (grad.beta + noise(norm.beta.shape))
    return updated


def predict(params, spec, batch):
    return forward(params, spec, batch, mode='eval')[0]
