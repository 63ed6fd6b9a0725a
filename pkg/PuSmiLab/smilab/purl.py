"""
Representation learning from PU data.

The ratio model is split into a representation map v: R^d -> R^m and a ratio
head w: R^m -> R, trained by alternating mini-batch SGD on the PU objective
J(w o v) = 1/2 mean_U (w o v)^2 - mean_P (w o v). No class prior is needed.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateDataError, DivergenceError, PreconditionError, ShapeError
from .mlp import MlpParams, MlpSpec, SgdConfig, backward, forward, init_params, sgd_step
from .utils import spawn_seeds

logger = logging.getLogger(__name__)

DEFAULT_EPOCHS = 200
DEFAULT_PATIENCE = 20
DEFAULT_W_STEPS = 4


@dataclass(frozen=True)
class PurlConfig:
    v_spec: MlpSpec
    w_spec: MlpSpec
    sgd_w: SgdConfig = field(default_factory=SgdConfig)
    sgd_v: SgdConfig = field(default_factory=SgdConfig)
    w_steps_per_v_step: int = DEFAULT_W_STEPS
    epochs: int = DEFAULT_EPOCHS
    patience: int = DEFAULT_PATIENCE
    validation: object = None

    def __post_init__(self):
        if self.v_spec.output_size != self.w_spec.input_size:
            raise PreconditionError(
                f"v outputs {self.v_spec.output_size} features but w expects {self.w_spec.input_size}"
            )
        if self.v_spec.output_size >= self.v_spec.input_size:
            raise PreconditionError(
                f"representation size {self.v_spec.output_size} must be below input size {self.v_spec.input_size}"
            )
        if self.w_spec.output_size != 1:
            raise PreconditionError("the ratio head must have a single output")
        if self.w_steps_per_v_step < 1:
            raise PreconditionError("w_steps_per_v_step must be at least 1")
        if self.epochs < 0 or self.patience < 1:
            raise PreconditionError("epochs must be >= 0 and patience >= 1")
        if self.sgd_w.batch_size != self.sgd_v.batch_size:
            raise PreconditionError("w and v steps share one batch plan; batch sizes must match")

    @property
    def batch_size(self):
        return self.sgd_w.batch_size

    @classmethod
    def default(cls, d, hidden=(60, 20), **kwargs):
        """v = all but the last linear layer of d-h1-...-hk-1, w = the last one."""
        v_spec = MlpSpec((d,) + tuple(hidden), batchnorm=True, activate_output=True)
        w_spec = MlpSpec((hidden[-1], 1), batchnorm=False)
        return cls(v_spec, w_spec, **kwargs)

    @classmethod
    def text(cls, d, **kwargs):
        return cls.default(d, hidden=(30, 10), **kwargs)

    @classmethod
    def toy(cls, d=2, head_width=16, **kwargs):
        sgd = SgdConfig(learning_rate=0.05, weight_decay=0.0, grad_noise_std=0.0, batch_size=60)
        kwargs.setdefault('sgd_w', sgd)
        kwargs.setdefault('sgd_v', sgd)
        kwargs.setdefault('patience', DEFAULT_EPOCHS)
        v_spec = MlpSpec((d, 1), batchnorm=False)
        w_spec = MlpSpec((1, head_width, 1), batchnorm=False)
        return cls(v_spec, w_spec, **kwargs)

    def to_dict(self):
        return {
            'v_spec': self.v_spec.to_dict(),
            'w_spec': self.w_spec.to_dict(),
            'sgd_w': self.sgd_w.to_dict(),
            'sgd_v': self.sgd_v.to_dict(),
            'w_steps_per_v_step': self.w_steps_per_v_step,
            'epochs': self.epochs,
            'patience': self.patience,
            'validation': None if self.validation is None else {
                'n_p': self.validation.n_p, 'n_u': self.validation.n_u,
            },
        }


@dataclass(frozen=True)
class HistoryRow:
    iteration: int
    train_j: float
    validation_j: float = math.nan


@dataclass(frozen=True)
class PurlResult:
    v_params: MlpParams
    w_params: MlpParams
    v_spec: MlpSpec
    w_spec: MlpSpec
    history: tuple
    best_iteration: int

    def history_rows(self):
        return [(row.iteration, row.train_j, row.validation_j) for row in self.history]

    def to_dict(self):
        return {
            'v_spec': self.v_spec.to_dict(),
            'w_spec': self.w_spec.to_dict(),
            'v_params': self.v_params.to_dict(),
            'w_params': self.w_params.to_dict(),
            'best_iteration': self.best_iteration,
        }

    @classmethod
    def from_dict(cls, payload):
        return cls(
            v_params=MlpParams.from_dict(payload['v_params']),
            w_params=MlpParams.from_dict(payload['w_params']),
            v_spec=MlpSpec.from_dict(payload['v_spec']),
            w_spec=MlpSpec.from_dict(payload['w_spec']),
            history=(),
            best_iteration=payload['best_iteration'],
        )


def pu_objective(outputs, n_pos):
    """Batch J and its gradient; the first n_pos rows are positives."""
    w = outputs[:, 0]
    w_p = w[:n_pos]
    w_u = w[n_pos:]
    value = 0.5 * float(np.mean(w_u ** 2)) - float(np.mean(w_p))
    grad = np.empty_like(outputs)
    grad[:n_pos, 0] = -1.0 / w_p.shape[0]
    grad[n_pos:, 0] = w_u / w_u.shape[0]
    return value, grad


def batch_plan(n_p, n_u, batch_size):
    """(positives per batch, unlabeled per batch, batches per epoch)."""
    n_pos = math.ceil(batch_size * n_p / (n_p + n_u))
    n_pos = min(max(n_pos, 1), batch_size - 1)
    n_unl = batch_size - n_pos
    batches = min(n_p // n_pos, n_u // n_unl)
    if batches < 1:
        raise PreconditionError(
            f"a batch needs {n_pos} positives and {n_unl} unlabeled rows, data has nP={n_p}, nU={n_u}"
        )
    return n_pos, n_unl, batches


def objective(v_params, w_params, v_spec, w_spec, data):
    """Eval-mode J(w o v) on a whole PU dataset."""
    stacked = np.vstack([data.positives, data.unlabeled])
    rep = forward(v_params, v_spec, stacked, mode='eval')[0]
    out = forward(w_params, w_spec, rep, mode='eval')[0]
    return pu_objective(out, data.n_p)[0]


def result_objective(result, data):
    return objective(result.v_params, result.w_params, result.v_spec, result.w_spec, data)


def _w_update(v_params, w_params, config, batch, n_pos, rng):
    rep = forward(v_params, config.v_spec, batch, mode='train')[0]
    out, w_cache = forward(w_params, config.w_spec, rep, mode='train')
    _, grad = pu_objective(out, n_pos)
    grads, _ = backward(w_params, w_cache, grad)
    return sgd_step(w_params, grads, config.sgd_w, rng)


def _v_update(v_params, w_params, config, batch, n_pos, rng):
    rep, v_cache = forward(v_params, config.v_spec, batch, mode='train')
    out, w_cache = forward(w_params, config.w_spec, rep, mode='train')
    _, grad = pu_objective(out, n_pos)
    _, rep_grad = backward(w_params, w_cache, grad)
    grads, _ = backward(v_params, v_cache, rep_grad)
    return sgd_step(v_params, grads, config.sgd_v, rng)


def train_purl(data, config, seed=None, on_update=None):
    """
    Alternate w_steps_per_v_step w-updates with one v-update.

    The schedule runs on a global step counter, so it carries across epochs.
    J is evaluated after every epoch (iteration 0 is the initialization) and
    the parameters at the best evaluated iteration are returned.
    """
    data.require_nonempty()
    if data.dim != config.v_spec.input_size:
        raise ShapeError(f"data has {data.dim} features, v expects {config.v_spec.input_size}")
    n_pos, n_unl, n_batches = batch_plan(data.n_p, data.n_u, config.batch_size)
    init_v, init_w, batch_rng, noise_w, noise_v = (
        np.random.default_rng(child) for child in spawn_seeds(seed, 5)
    )
    v_params = init_params(config.v_spec, init_v)
    w_params = init_params(config.w_spec, init_w)

    def evaluate(iteration):
        train_j = objective(v_params, w_params, config.v_spec, config.w_spec, data)
        if not math.isfinite(train_j):
            last = history[-1].train_j if history else math.nan
            raise DivergenceError(
                f"train objective became {train_j} at iteration {iteration} (last finite value {last})"
            )
        validation_j = math.nan
        if config.validation is not None:
            validation_j = objective(v_params, w_params, config.v_spec, config.w_spec, config.validation)
        return HistoryRow(iteration, train_j, validation_j)

    history = []
    history.append(evaluate(0))
    best = (_score(history[0]), 0, v_params.copy(), w_params.copy())
    stale = 0
    step = 0
    cycle = config.w_steps_per_v_step + 1
    for epoch in range(1, config.epochs + 1):
        p_order = batch_rng.permutation(data.n_p)
        u_order = batch_rng.permutation(data.n_u)
        for j in range(n_batches):
            batch = np.vstack([
                data.positives[p_order[j * n_pos:(j + 1) * n_pos]],
                data.unlabeled[u_order[j * n_unl:(j + 1) * n_unl]],
            ])
            if step % cycle < config.w_steps_per_v_step:
                w_params = _w_update(v_params, w_params, config, batch, n_pos, noise_w)
                kind = 'w'
            else:
                v_params = _v_update(v_params, w_params, config, batch, n_pos, noise_v)
                kind = 'v'
            step += 1
            if on_update is not None:
                on_update(kind)
        row = evaluate(epoch)
        history.append(row)
        logger.debug("epoch %d train J %.6g validation J %.6g", epoch, row.train_j, row.validation_j)
        if _score(row) < best[0]:
            best = (_score(row), epoch, v_params.copy(), w_params.copy())
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                logger.info("early stop at epoch %d, best epoch %d", epoch, best[1])
                break

    _, best_iteration, best_v, best_w = best
    return PurlResult(best_v, best_w, config.v_spec, config.w_spec, tuple(history), best_iteration)


def _score(row):
    return row.train_j if math.isnan(row.validation_j) else row.validation_j


def transform(result, points):
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != result.v_spec.input_size:
        raise ShapeError(f"points have shape {points.shape}, v expects {result.v_spec.input_size} features")
    return forward(result.v_params, result.v_spec, points, mode='eval')[0]


def linear_direction(result):
    """Unit weight vector of a single-layer, single-output v."""
    if result.v_spec.n_layers != 1 or result.v_spec.output_size != 1:
        raise PreconditionError("linear_direction needs v to be one linear layer with one output")
    weight = result.v_params.layers[0].weight[:, 0]
    norm = float(np.linalg.norm(weight))
    if norm == 0.0:
        raise DegenerateDataError("v has zero weights; its direction is undefined")
    return weight / norm


def pca_project(points, k, seed=0, max_iter=1000, tol=1e-10):
    """
    Top-k principal directions by power iteration with deflation.

    Returns (components (k x d), projected (n x k)). Each direction is
    re-orthogonalized against the earlier ones and signed so that its
    largest-magnitude entry is positive.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[0] < 2:
        raise PreconditionError("PCA needs at least two rows")
    d = points.shape[1]
    if not 1 <= k <= d:
        raise PreconditionError(f"k must be in [1, {d}], got {k}")
    centered = points - points.mean(axis=0)
    cov = centered.T @ centered / (points.shape[0] - 1)
    if np.trace(cov) <= 0.0:
        raise DegenerateDataError("points have zero variance")
    rng = np.random.default_rng(seed)
    remaining = cov.copy()
    components = []
    for _ in range(k):
        x = rng.standard_normal(d)
        x = _orthogonalize(x, components)
        x /= np.linalg.norm(x)
        for _ in range(max_iter):
            y = _orthogonalize(remaining @ x, components)
            y_norm = float(np.linalg.norm(y))
            if y_norm == 0.0:
                break
            y /= y_norm
            done = np.linalg.norm(y - x) < tol or np.linalg.norm(y + x) < tol
            x = y
            if done:
                break
        x = x * np.sign(x[np.argmax(np.abs(x))])
        eigenvalue = float(x @ cov @ x)
        remaining = remaining - eigenvalue * np.outer(x, x)
        components.append(x)
    components = np.array(components)
    return components, centered @ components.T


def _orthogonalize(x, basis):
    for b in basis:
        x = x - (x @ b) * b
    return x
