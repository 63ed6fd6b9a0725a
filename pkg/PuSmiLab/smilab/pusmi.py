"""
PU-SMI estimation with a Gaussian linear-in-parameter ratio model.

The ratio model w(x) = beta^T phi(x) approximates p(x|y=+1)/p(x). It is fit
by minimizing the empirical objective

    J(w) = 1/(2 nU) sum_k w(x_k^U)^2 - 1/nP sum_i w(x_i^P)

plus a ridge penalty, which has the closed form beta = (H^U + lambda I)^-1 h^P.
The class prior only rescales the final estimate; nothing before
SmiEstimate.from_objective depends on it.
"""
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from sklearn.model_selection import KFold

from .basis import DEFAULT_B_MAX, GaussianBasis, bandwidth_grid, median_bandwidth, select_centers
from .data import ClassPrior
from .exceptions import IllConditionedError, PreconditionError, ShapeError

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA_GRID = (1e-3, 1e-2, 1e-1, 1.0)
DEFAULT_FOLDS = 5
NORM_CAP = 1e6
RESIDUAL_TOL = 1e-8
JITTER_SCALE = 1e-12


class RidgeSolver:
    """
    Cholesky solver for (H + lambda I) beta = h with H symmetric PSD.

    A failed factorization is retried once with jitter 1e-12 * trace(H) / b.
    Solutions with a norm above NORM_CAP or a relative residual above
    RESIDUAL_TOL are rejected as ill-conditioned.
    """

    def __init__(self, gram, lam):
        gram = np.asarray(gram, dtype=float)
        if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
            raise ShapeError(f"gram matrix must be square, got shape {gram.shape}")
        if not lam >= 0:
            raise PreconditionError(f"lambda must be non-negative, got {lam}")
        size = gram.shape[0]
        self.lam = float(lam)
        self.system = gram + self.lam * np.eye(size)
        self.jitter = 0.0
        try:
            self._factor = cho_factor(self.system, lower=True)
        except LinAlgError:
            self.jitter = JITTER_SCALE * float(np.trace(gram)) / size
            if not self.jitter > 0:
                raise IllConditionedError(
                    "system is singular and has zero trace; use lambda > 0"
                ) from None
            logger.warning("cholesky failed at lambda=%g, retrying with jitter %.3g", lam, self.jitter)
            try:
                self._factor = cho_factor(self.system + self.jitter * np.eye(size), lower=True)
            except LinAlgError:
                raise IllConditionedError(
                    f"system is singular at lambda={lam} even with jitter; use lambda > 0"
                ) from None

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        beta = cho_solve(self._factor, rhs)
        if not np.all(np.isfinite(beta)):
            raise IllConditionedError(f"non-finite solution at lambda={self.lam}; use lambda > 0")
        norm = float(np.linalg.norm(beta))
        if norm > NORM_CAP:
            raise IllConditionedError(
                f"solution norm {norm:.3g} exceeds cap {NORM_CAP:.0g} at lambda={self.lam}; "
                "use a larger lambda"
            )
        residual = float(np.linalg.norm(self.system @ beta - rhs))
        scale = max(float(np.linalg.norm(rhs)), np.finfo(float).tiny)
        if residual > RESIDUAL_TOL * scale:
            raise IllConditionedError(
                f"relative residual {residual / scale:.3g} at lambda={self.lam}; use lambda > 0"
            )
        return beta


def pu_moments(phi_p, phi_u):
    """H^U = Phi_U^T Phi_U / nU and h^P = mean of Phi_P rows."""
    gram = phi_u.T @ phi_u / phi_u.shape[0]
    mean_p = phi_p.mean(axis=0)
    return gram, mean_p


def quadratic_objective(beta, gram, mean_p):
    """1/2 beta^T H beta - beta^T h; equals J(w) on the data H and h came from."""
    return 0.5 * float(beta @ gram @ beta) - float(beta @ mean_p)


def ridge_objective(beta, gram, mean_p, lam):
    return quadratic_objective(beta, gram, mean_p) + 0.5 * lam * float(beta @ beta)


@dataclass(frozen=True)
class RatioModel:
    basis: GaussianBasis
    beta: np.ndarray

    def __post_init__(self):
        beta = np.array(self.beta, dtype=float).reshape(-1)
        if beta.shape[0] != self.basis.size:
            raise ShapeError(f"beta has {beta.shape[0]} entries for {self.basis.size} basis functions")
        if not np.all(np.isfinite(beta)):
            raise PreconditionError("beta must be finite")
        beta.setflags(write=False)
        object.__setattr__(self, 'beta', beta)

    def predict(self, points):
        return self.basis(points) @ self.beta

    __call__ = predict

    def to_dict(self):
        return {
            'sigma': self.basis.bandwidth,
            'centers': self.basis.centers.tolist(),
            'beta': self.beta.tolist(),
        }

    @classmethod
    def from_dict(cls, payload):
        return cls(GaussianBasis.from_dict(payload), np.asarray(payload['beta'], dtype=float))


@dataclass(frozen=True)
class CvRow:
    sigma: float
    lambda_: float
    score: float

    def to_dict(self):
        return {'sigma': self.sigma, 'lambda': self.lambda_, 'score': self.score}


@dataclass(frozen=True)
class FitReport:
    chosen_sigma: float
    chosen_lambda: float
    cv_table: tuple = field(default_factory=tuple)
    final_objective: float = math.nan

    def to_dict(self):
        return {
            'chosen_sigma': self.chosen_sigma,
            'chosen_lambda': self.chosen_lambda,
            'cv_table': [row.to_dict() for row in self.cv_table],
            'final_objective': self.final_objective,
        }


@dataclass(frozen=True)
class SmiEstimate:
    value: float
    raw_negative_flag: bool
    prior: ClassPrior
    j_hat: float

    @classmethod
    def from_objective(cls, j_value, prior):
        value = prior.ratio * (-j_value - 0.5)
        return cls(value=value, raw_negative_flag=value < 0, prior=prior, j_hat=j_value)

    def to_dict(self):
        return {
            'value': self.value,
            'raw_negative_flag': self.raw_negative_flag,
            'theta_p': self.prior.theta_p,
            'prior_ratio': self.prior.ratio,
            'j_hat': self.j_hat,
        }


@dataclass(frozen=True)
class EstimatorConfig:
    """Cross-validation settings; sigma_grid=None uses the median heuristic grid."""

    sigma_grid: tuple = None
    lambda_grid: tuple = DEFAULT_LAMBDA_GRID
    folds: int = DEFAULT_FOLDS
    b_max: int = DEFAULT_B_MAX
    seed: object = 0

    def __post_init__(self):
        if self.sigma_grid is not None:
            object.__setattr__(self, 'sigma_grid', tuple(float(s) for s in self.sigma_grid))
        object.__setattr__(self, 'lambda_grid', tuple(float(l) for l in self.lambda_grid))

    def with_seed(self, seed):
        return replace(self, seed=seed)

    def to_dict(self):
        return {
            'sigma_grid': None if self.sigma_grid is None else list(self.sigma_grid),
            'lambda_grid': list(self.lambda_grid),
            'folds': self.folds,
            'b_max': self.b_max,
        }


def j_hat(model, data):
    data.require_nonempty()
    if data.dim != model.basis.dim:
        raise ShapeError(f"data dimension {data.dim} does not match model dimension {model.basis.dim}")
    w_u = model.predict(data.unlabeled)
    w_p = model.predict(data.positives)
    return 0.5 * float(np.mean(w_u ** 2)) - float(np.mean(w_p))


def fit_analytic(data, basis, lam):
    data.require_nonempty()
    gram, mean_p = pu_moments(basis(data.positives), basis(data.unlabeled))
    beta = RidgeSolver(gram, lam).solve(mean_p)
    return RatioModel(basis, beta)


def fold_assignment(n, folds, rng):
    """Fold index per row from a shuffled KFold seeded off rng."""
    splitter = KFold(n_splits=folds, shuffle=True, random_state=int(rng.integers(2 ** 31 - 1)))
    assignment = np.empty(n, dtype=int)
    for k, (_, held_out) in enumerate(splitter.split(np.empty((n, 1)))):
        assignment[held_out] = k
    return assignment


def check_cv_inputs(sigma_grid, lambda_grid, folds, sizes):
    if not sigma_grid or not lambda_grid:
        raise PreconditionError("sigma and lambda grids must be non-empty")
    if folds < 2:
        raise PreconditionError(f"need at least 2 folds, got {folds}")
    if min(sizes) < folds:
        raise PreconditionError(f"every sample needs at least {folds} rows, got sizes {sizes}")


def grid_table(sigma_grid, lambda_grid, cell_score):
    """Score every (sigma, lambda) cell; cells that fail to solve score +inf."""
    table = []
    for sigma in sigma_grid:
        for lam in lambda_grid:
            try:
                score = float(cell_score(float(sigma), float(lam)))
            except IllConditionedError as exc:
                logger.warning("cv cell sigma=%g lambda=%g failed: %s", sigma, lam, exc)
                score = math.inf
            table.append(CvRow(float(sigma), float(lam), score))
    return tuple(table)


def choose_cell(table):
    """Minimum mean held-out score; ties go to the smallest lambda, then sigma."""
    finite = [row for row in table if math.isfinite(row.score)]
    if not finite:
        raise IllConditionedError("every cross-validation cell failed to solve")
    return min(finite, key=lambda row: (row.score, row.lambda_, row.sigma))


def cross_validate(data, sigma_grid, lambda_grid, folds=DEFAULT_FOLDS, seed=None,
                   b_max=DEFAULT_B_MAX, centers=None):
    """
    K-fold selection of (sigma, lambda) by mean held-out J.

    Positives and unlabeled rows are split into folds independently. Centers
    are shared by every fold and cell; they are drawn from all unlabeled rows
    when not supplied.
    """
    data.require_nonempty()
    check_cv_inputs(sigma_grid, lambda_grid, folds, (data.n_p, data.n_u))
    rng = np.random.default_rng(seed)
    if centers is None:
        centers = select_centers(data.unlabeled, b_max, rng)
    p_folds = fold_assignment(data.n_p, folds, rng)
    u_folds = fold_assignment(data.n_u, folds, rng)

    moments = {}

    def fold_moments(sigma):
        if sigma not in moments:
            basis = GaussianBasis(centers, sigma)
            phi_p = basis(data.positives)
            phi_u = basis(data.unlabeled)
            moments[sigma] = [
                (
                    pu_moments(phi_p[p_folds != k], phi_u[u_folds != k]),
                    pu_moments(phi_p[p_folds == k], phi_u[u_folds == k]),
                )
                for k in range(folds)
            ]
        return moments[sigma]

    def cell_score(sigma, lam):
        scores = []
        for (train_gram, train_mean), (test_gram, test_mean) in fold_moments(sigma):
            beta = RidgeSolver(train_gram, lam).solve(train_mean)
            scores.append(quadratic_objective(beta, test_gram, test_mean))
        return np.mean(scores)

    table = grid_table(sigma_grid, lambda_grid, cell_score)
    best = choose_cell(table)
    logger.debug("cv chose sigma=%g lambda=%g (score %.6g)", best.sigma, best.lambda_, best.score)
    return FitReport(chosen_sigma=best.sigma, chosen_lambda=best.lambda_, cv_table=table)


def resolve_sigma_grid(config, unlabeled, rng):
    if config.sigma_grid is not None:
        return list(config.sigma_grid)
    return bandwidth_grid(median_bandwidth(unlabeled, rng))


def estimate_smi(data, prior, config=None):
    """Cross-validate, refit on all data and return (SmiEstimate, RatioModel, FitReport)."""
    config = config or EstimatorConfig()
    data.require_nonempty()
    rng = np.random.default_rng(config.seed)
    centers = select_centers(data.unlabeled, config.b_max, rng)
    sigma_grid = resolve_sigma_grid(config, data.unlabeled, rng)
    report = cross_validate(
        data, sigma_grid, config.lambda_grid, folds=config.folds, seed=rng, centers=centers,
    )
    model = fit_analytic(data, GaussianBasis(centers, report.chosen_sigma), report.chosen_lambda)
    objective = j_hat(model, data)
    report = replace(report, final_objective=objective)
    estimate = SmiEstimate.from_objective(objective, prior)
    if estimate.raw_negative_flag:
        logger.debug("negative PU-SMI estimate %.6g reported unclamped", estimate.value)
    return estimate, model, report


def estimate_fixed(data, prior, basis, lam):
    """Closed-form fit with frozen hyperparameters; returns (SmiEstimate, RatioModel)."""
    model = fit_analytic(data, basis, lam)
    return SmiEstimate.from_objective(j_hat(model, data), prior), model


def posterior(model, prior, x):
    """Plug-in p(y=+1|x) = theta_P * max(w(x), 0)."""
    x = np.asarray(x, dtype=float)
    values = prior.theta_p * np.maximum(model.predict(x), 0.0)
    if x.ndim == 1:
        return float(values[0])
    return values


def classify(model, prior, points):
    """+1 where the posterior exceeds 1/2; a tie is negative."""
    return np.where(np.atleast_1d(posterior(model, prior, points)) > 0.5, 1, -1)
