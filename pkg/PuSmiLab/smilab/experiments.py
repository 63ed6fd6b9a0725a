"""
Experiment drivers behind the sweep and toy commands.

Each driver is a pure function of its arguments and seed; trials fan out over
threads through utils.parallel_map and come back in trial order.
"""
import logging
from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset, PuDataset, make_pu, sample_gaussian_pu
from .exceptions import PreconditionError
from .pnsmi import estimate_smi_pn, true_smi_quadrature
from .purl import linear_direction, pca_project, train_purl, transform
from .pusmi import EstimatorConfig, estimate_smi
from .utils import mean_stderr, parallel_map, spawn_seeds

logger = logging.getLogger(__name__)

SWEEP_HEADER = ('n', 'mse_mean', 'mse_stderr')
PROJECTION_HEADER = ('label', 'purl', 'pca')


class GaussianSource:
    """PU draws from a Gaussian spec; truth by quadrature."""

    def __init__(self, spec):
        self.spec = spec

    @property
    def prior(self):
        return self.spec.prior

    def draw(self, n_p, n_u, seed):
        return sample_gaussian_pu(self.spec, n_p, n_u, seed)

    def truth(self):
        return true_smi_quadrature(self.spec)

    def describe(self):
        return {'generator': self.spec.to_dict()}


class LabeledSource:
    """
    PU draws from a labeled file; truth from the supervised estimator.

    The file is split once into a draw pool and a held-out oracle pool. The
    oracle pool is thinned so its class balance matches theta_P, since SMI
    depends on the class prior.
    """

    def __init__(self, data, prior, oracle_fraction=0.5, config=None, seed=0):
        if not 0.0 < oracle_fraction < 1.0:
            raise PreconditionError(f"oracle_fraction must be in (0, 1), got {oracle_fraction}")
        self.prior = prior
        self.config = config or EstimatorConfig()
        rng = np.random.default_rng(seed)
        order = rng.permutation(data.n)
        cut = int(round(data.n * oracle_fraction))
        self.oracle = _rebalance(
            LabeledDataset(data.features[order[:cut]], data.labels[order[:cut]]), prior, rng,
        )
        self.pool = LabeledDataset(data.features[order[cut:]], data.labels[order[cut:]])

    def draw(self, n_p, n_u, seed):
        return make_pu(self.pool, n_p, n_u, self.prior, seed)

    def truth(self):
        return estimate_smi_pn(self.oracle, self.config)[0]

    def describe(self):
        return {'pool_size': self.pool.n, 'oracle_size': self.oracle.n}


def _rebalance(data, prior, rng):
    n_pos, n_neg = data.class_counts
    keep_pos = min(n_pos, int(np.floor(n_neg * prior.theta_p / prior.theta_n)))
    keep_neg = min(n_neg, int(np.floor(n_pos * prior.theta_n / prior.theta_p)))
    if keep_pos < 1 or keep_neg < 1:
        raise PreconditionError("held-out pool cannot be balanced to the requested prior")
    pos = rng.permutation(np.flatnonzero(data.labels == 1))[:keep_pos]
    neg = rng.permutation(np.flatnonzero(data.labels == -1))[:keep_neg]
    rows = np.sort(np.concatenate([pos, neg]))
    return LabeledDataset(data.features[rows], data.labels[rows])


@dataclass(frozen=True)
class SweepRow:
    n: int
    mse_mean: float
    mse_stderr: float

    def to_row(self):
        return (self.n, self.mse_mean, self.mse_stderr)


def fig1_sweep(source, axis, grid, fixed, trials=50, config=None, seed=0, threads=1):
    """
    Squared error of the PU-SMI estimate against source.truth().

    axis='n_p' varies the positive count with nU=fixed; axis='n_u' the reverse.
    Returns (truth, rows sorted by n).
    """
    if axis not in ('n_p', 'n_u'):
        raise PreconditionError(f"axis must be 'n_p' or 'n_u', got {axis!r}")
    grid = sorted(set(int(n) for n in grid))
    if not grid:
        raise PreconditionError("sweep grid is empty")
    config = config or EstimatorConfig()
    truth = source.truth()
    logger.info("sweep over %s, true SMI %.6g", axis, truth)
    rows = []
    for n, point_seed in zip(grid, spawn_seeds(seed, len(grid))):
        n_p, n_u = (n, fixed) if axis == 'n_p' else (fixed, n)

        def trial(trial_seed, n_p=n_p, n_u=n_u):
            data_seed, fit_seed = trial_seed.spawn(2)
            data = source.draw(n_p, n_u, data_seed)
            estimate = estimate_smi(data, source.prior, config.with_seed(fit_seed))[0]
            return (estimate.value - truth) ** 2

        errors = parallel_map(trial, point_seed.spawn(trials), threads)
        rows.append(SweepRow(n, *mean_stderr(errors)))
        logger.debug("n=%d mse %.6g", n, rows[-1].mse_mean)
    return truth, rows


def loglog_slope(rows):
    """Least-squares slope of log(mse_mean) against log(n)."""
    n = np.array([row.n for row in rows], dtype=float)
    mse = np.array([row.mse_mean for row in rows], dtype=float)
    if n.size < 2 or (mse <= 0).any():
        raise PreconditionError("slope needs at least two rows with positive mse")
    return float(np.polyfit(np.log(n), np.log(mse), 1)[0])


@dataclass(frozen=True)
class ToyReport:
    purl_direction: np.ndarray
    pca_direction: np.ndarray
    purl_cosine: float
    pca_cosine: float
    smi_purl: float
    smi_pca: float
    projections: tuple
    history: tuple

    def to_dict(self):
        return {
            'purl_direction': self.purl_direction.tolist(),
            'pca_direction': self.pca_direction.tolist(),
            'cosines': {'purl_e1': self.purl_cosine, 'pca_e2': self.pca_cosine},
            'smi_purl': self.smi_purl,
            'smi_pca': self.smi_pca,
        }


def purl_toy(spec, n_p, n_u, n_eval, purl_config, estimator=None, seed=0):
    """
    Linear PURL against PCA-1D on a 2-D Gaussian spec.

    Reports both unit directions, their |cos| with e1 (PURL) and e2 (PCA), the
    PU-SMI estimate in each 1-D representation and a projected labeled sample.
    """
    if spec.dim != 2:
        raise PreconditionError(f"the toy comparison needs a 2-D spec, got d={spec.dim}")
    estimator = estimator or EstimatorConfig()
    data_seed, train_seed, eval_seed, fit_seed = spawn_seeds(seed, 4)
    data = sample_gaussian_pu(spec, n_p, n_u, data_seed)
    result = train_purl(data, purl_config, train_seed)
    direction = linear_direction(result)

    stacked = np.vstack([data.positives, data.unlabeled])
    components, _ = pca_project(stacked, 1)
    center = stacked.mean(axis=0)
    pca_direction = components[0]

    def pca_1d(points):
        return (points - center) @ pca_direction[:, None]

    smi_purl = estimate_smi(
        PuDataset(transform(result, data.positives), transform(result, data.unlabeled)),
        spec.prior, estimator.with_seed(fit_seed),
    )[0].value
    smi_pca = estimate_smi(
        PuDataset(pca_1d(data.positives), pca_1d(data.unlabeled)),
        spec.prior, estimator.with_seed(fit_seed),
    )[0].value

    evaluation = spec.sample_labeled(n_eval, eval_seed)
    purl_coord = transform(result, evaluation.features)[:, 0]
    pca_coord = pca_1d(evaluation.features)[:, 0]
    projections = tuple(zip(evaluation.labels.tolist(), purl_coord.tolist(), pca_coord.tolist()))
    return ToyReport(
        purl_direction=direction,
        pca_direction=pca_direction,
        purl_cosine=float(abs(direction[0])),
        pca_cosine=float(abs(pca_direction[1])),
        smi_purl=smi_purl,
        smi_pca=smi_pca,
        projections=projections,
        history=tuple(result.history_rows()),
    )
