"""
Independence test for PU data.

The test statistic is the PU-SMI estimate. Its null distribution comes from
pseudo-PU sets built in one of two ways:

pooled   each round pools positives and unlabeled rows and splits them at
         random into samples of the original sizes nP and nU. This is the
         default.
relabel  each round labels the unlabeled rows with Bernoulli(theta_P) coins
         and treats the rows that drew +1 as positives, with all unlabeled
         rows kept as the unlabeled sample.

Under independence the pooled split is exchangeable with the observed one.
The pooled test draws its centers from the pooled rows and picks bandwidth
and regularization on a reference split of them, so the observed statistic
and every round are the same function of a split and the p-values hold
their level. Relabeled sets have about theta_P * nU pseudo-positives drawn
from inside U, so their statistics spread less than the observed one and the
relabel test rejects more often than its level.
"""
import itertools
import logging
from dataclasses import dataclass

import numpy as np

from .basis import GaussianBasis, select_centers
from .data import ClassPrior, PuDataset
from .exceptions import DegenerateDataError, PreconditionError
from .pusmi import (
    EstimatorConfig,
    RidgeSolver,
    SmiEstimate,
    cross_validate,
    estimate_smi,
    pu_moments,
    quadratic_objective,
    resolve_sigma_grid,
)
from .utils import parallel_map, spawn_seeds

logger = logging.getLogger(__name__)

DEFAULT_PERMUTATIONS = 1000
MIN_PERMUTATIONS = 19
MAX_REDRAWS = 10
DEFAULT_LEVEL = 0.05
SCHEMES = ('pooled', 'relabel')


@dataclass(frozen=True)
class PermTestResult:
    observed: float
    permuted: tuple
    p_value: float
    b_count: int
    prior_used: ClassPrior

    def rejects(self, level=DEFAULT_LEVEL):
        return self.p_value <= level

    def to_dict(self):
        return {
            'observed': self.observed,
            'permuted': list(self.permuted),
            'p_value': self.p_value,
            'b_count': self.b_count,
            'theta_p': self.prior_used.theta_p,
        }


@dataclass(frozen=True)
class Type2Row:
    n_p: int
    n_u: int
    level: float
    trials: int
    type2_freq: float

    @property
    def rejection_freq(self):
        return 1.0 - self.type2_freq

    def to_row(self):
        return (self.n_p, self.n_u, self.level, self.trials, self.type2_freq)


TYPE2_HEADER = ('n_p', 'n_u', 'level', 'trials', 'type2_freq')


def permutation_p_value(observed, permuted):
    """(1 + #{permuted >= observed}) / (B + 1)."""
    permuted = np.asarray(permuted, dtype=float)
    return (1.0 + np.count_nonzero(permuted >= observed)) / (permuted.size + 1.0)


class FrozenStatistic:
    """
    PU-SMI of pseudo-PU sets built on one unlabeled sample with fixed (sigma, lambda).

    H^U depends only on the unlabeled rows, so it is factorized once and each
    round only forms the pseudo-positive mean and solves.
    """

    def __init__(self, unlabeled, basis, lam, prior):
        self.phi_u = basis(unlabeled)
        self.gram = self.phi_u.T @ self.phi_u / self.phi_u.shape[0]
        self.solver = RidgeSolver(self.gram, lam)
        self.prior = prior

    def __call__(self, mask):
        mean_p = self.phi_u[mask].mean(axis=0)
        beta = self.solver.solve(mean_p)
        j_value = quadratic_objective(beta, self.gram, mean_p)
        return SmiEstimate.from_objective(j_value, self.prior).value


class PooledStatistic:
    """
    PU-SMI of an nP/nU split of the pooled rows with fixed (sigma, lambda).

    The pooled rows are evaluated on the basis once; a round picks its rows
    by index. The observed split is the identity order.
    """

    def __init__(self, pooled, n_p, basis, lam, prior):
        self.phi = basis(pooled)
        self.n_p = n_p
        self.lam = lam
        self.prior = prior

    def __call__(self, order):
        gram, mean_p = pu_moments(self.phi[order[:self.n_p]], self.phi[order[self.n_p:]])
        beta = RidgeSolver(gram, self.lam).solve(mean_p)
        j_value = quadratic_objective(beta, gram, mean_p)
        return SmiEstimate.from_objective(j_value, self.prior).value


def pooled_hyperparameters(pooled, n_p, config, seed=None):
    """
    Basis and lambda for the pooled test, chosen without the observed split.

    Centers and the median bandwidth come from the pooled rows; the grid is
    cross-validated on one random nP/nU split of them.
    Returns (GaussianBasis, lambda, FitReport).
    """
    rng = np.random.default_rng(seed)
    centers = select_centers(pooled, config.b_max, rng)
    sigma_grid = resolve_sigma_grid(config, pooled, rng)
    order = rng.permutation(pooled.shape[0])
    reference = PuDataset(pooled[order[:n_p]], pooled[order[n_p:]])
    report = cross_validate(
        reference, sigma_grid, config.lambda_grid, folds=config.folds, seed=rng, centers=centers,
    )
    return GaussianBasis(centers, report.chosen_sigma), report.chosen_lambda, report


def draw_pseudo_labels(rng, n_u, theta_p):
    """Boolean mask of pseudo-positives; redrawn while it comes out empty."""
    for attempt in range(MAX_REDRAWS + 1):
        mask = rng.random(n_u) < theta_p
        if mask.any():
            return mask
        logger.warning("permutation round drew no pseudo-positives (attempt %d), redrawing", attempt + 1)
    raise DegenerateDataError(
        f"no pseudo-positives after {MAX_REDRAWS} redraws with nU={n_u}, theta_P={theta_p}"
    )


def _pseudo_sets(data, theta_p, scheme):
    """Callable rng -> pseudo-PU dataset for the given scheme."""
    unlabeled = data.unlabeled
    if scheme == 'relabel':
        def draw(rng):
            mask = draw_pseudo_labels(rng, data.n_u, theta_p)
            return PuDataset(unlabeled[mask], unlabeled)
    else:
        pooled = np.vstack([data.positives, unlabeled])

        def draw(rng):
            order = rng.permutation(pooled.shape[0])
            return PuDataset(pooled[order[:data.n_p]], pooled[order[data.n_p:]])
    return draw


def permutation_test(data, prior, b_count=DEFAULT_PERMUTATIONS, config=None, seed=0,
                     recv_per_round=False, threads=1, scheme='pooled'):
    """
    Observed PU-SMI against b_count pseudo-PU rounds.

    The pooled scheme fixes its basis and lambda from the pooled rows (see
    pooled_hyperparameters) and scores the observed split and every round
    with them. The relabel scheme reuses the bandwidth and regularization
    cross-validated on the observed data. recv_per_round reruns the full
    estimator on the observed data and on every round instead.
    """
    if b_count < MIN_PERMUTATIONS:
        raise PreconditionError(f"b_count must be at least {MIN_PERMUTATIONS}, got {b_count}")
    if scheme not in SCHEMES:
        raise PreconditionError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    data.require_nonempty()
    config = config or EstimatorConfig()
    observed_seed, *round_seeds = spawn_seeds(seed, b_count + 1)

    if recv_per_round:
        observed = estimate_smi(data, prior, config.with_seed(observed_seed))[0].value
        draw = _pseudo_sets(data, prior.theta_p, scheme)

        def run_round(round_seed):
            rng = np.random.default_rng(round_seed)
            return estimate_smi(draw(rng), prior, config.with_seed(rng))[0].value
    elif scheme == 'relabel':
        estimate, model, report = estimate_smi(data, prior, config.with_seed(observed_seed))
        observed = estimate.value
        statistic = FrozenStatistic(data.unlabeled, model.basis, report.chosen_lambda, prior)

        def run_round(round_seed):
            rng = np.random.default_rng(round_seed)
            return statistic(draw_pseudo_labels(rng, data.n_u, prior.theta_p))
    else:
        pooled = np.vstack([data.positives, data.unlabeled])
        basis, lam, report = pooled_hyperparameters(pooled, data.n_p, config, observed_seed)
        statistic = PooledStatistic(pooled, data.n_p, basis, lam, prior)
        observed = statistic(np.arange(pooled.shape[0]))

        def run_round(round_seed):
            return statistic(np.random.default_rng(round_seed).permutation(pooled.shape[0]))

    permuted = tuple(float(v) for v in parallel_map(run_round, round_seeds, threads))
    p_value = permutation_p_value(observed, permuted)
    logger.debug("observed %.6g, p-value %.4g over %d %s rounds", observed, p_value, b_count, scheme)
    return PermTestResult(float(observed), permuted, p_value, b_count, prior)


def type2_experiment(generator, prior, n_p_grid, n_u_grid, level=DEFAULT_LEVEL, trials=50,
                     b_count=DEFAULT_PERMUTATIONS, config=None, seed=0, recv_per_round=False,
                     threads=1, scheme='pooled'):
    """
    Type-II error frequency over the grid nP x nU.

    generator(n_p, n_u, seed) returns a PuDataset. Trials at one grid point run
    on the thread pool; each gets its own data and test seeds.
    """
    n_p_grid = list(n_p_grid)
    n_u_grid = list(n_u_grid)
    if not n_p_grid or not n_u_grid:
        raise PreconditionError("n_p and n_u grids must be non-empty")
    if not 0.0 < level <= 1.0:
        raise PreconditionError(f"level must be in (0, 1], got {level}")
    if trials < 1:
        raise PreconditionError(f"trials must be at least 1, got {trials}")

    points = list(itertools.product(n_p_grid, n_u_grid))
    rows = []
    for (n_p, n_u), point_seed in zip(points, spawn_seeds(seed, len(points))):

        def run_trial(trial_seed, n_p=n_p, n_u=n_u):
            data_seed, test_seed = trial_seed.spawn(2)
            data = generator(n_p, n_u, data_seed)
            result = permutation_test(
                data, prior, b_count, config, seed=test_seed, recv_per_round=recv_per_round,
                scheme=scheme,
            )
            return result.p_value

        p_values = np.asarray(parallel_map(run_trial, point_seed.spawn(trials), threads))
        row = Type2Row(n_p, n_u, level, trials, float(np.mean(p_values > level)))
        logger.info("nP=%d nU=%d type-II frequency %.3f", n_p, n_u, row.type2_freq)
        rows.append(row)
    return rows
