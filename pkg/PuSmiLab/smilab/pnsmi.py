"""
Supervised SMI from fully labeled data, and exact SMI for Gaussian specs.

The supervised estimator models r(x, y) = p(x, y) / (p(x) p(y)) with class
sliced copies of the Gaussian basis, psi(x, +1) = [phi(x), 0] and
psi(x, -1) = [0, phi(x)], so the 2b-parameter ridge system splits into two
b x b solves. It serves as the reference value for experiments on labeled
files; Gaussian specs get their reference from quadrature instead.
"""
import itertools
import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.integrate import quad

from .basis import GaussianBasis, select_centers
from .exceptions import PreconditionError, QuadratureError, ShapeError
from .pusmi import (
    DEFAULT_FOLDS,
    EstimatorConfig,
    FitReport,
    RidgeSolver,
    check_cv_inputs,
    choose_cell,
    fold_assignment,
    grid_table,
    resolve_sigma_grid,
)

logger = logging.getLogger(__name__)

QUAD_EPSREL = 1e-11
AGREEMENT_RTOL = 1e-6
TAIL_WIDTH = 14.0


@dataclass(frozen=True)
class JointRatioModel:
    basis: GaussianBasis
    alpha_pos: np.ndarray
    alpha_neg: np.ndarray

    def __post_init__(self):
        for name in ('alpha_pos', 'alpha_neg'):
            alpha = np.array(getattr(self, name), dtype=float).reshape(-1)
            if alpha.shape[0] != self.basis.size:
                raise ShapeError(f"{name} has {alpha.shape[0]} entries for {self.basis.size} basis functions")
            alpha.setflags(write=False)
            object.__setattr__(self, name, alpha)

    def predict(self, points, labels):
        phi = self.basis(points)
        return np.where(np.asarray(labels) == 1, phi @ self.alpha_pos, phi @ self.alpha_neg)

    def to_dict(self):
        return {
            'sigma': self.basis.bandwidth,
            'centers': self.basis.centers.tolist(),
            'alpha_pos': self.alpha_pos.tolist(),
            'alpha_neg': self.alpha_neg.tolist(),
        }

    @classmethod
    def from_dict(cls, payload):
        return cls(GaussianBasis.from_dict(payload), payload['alpha_pos'], payload['alpha_neg'])


def pn_moments(phi, labels):
    """
    Per-slice blocks of H and h.

    H_y = (n_y / n^2) sum_i phi(x_i) phi(x_i)^T over all rows, and
    h_y = (1 / n) sum over rows labeled y of phi(x_i).
    """
    n = phi.shape[0]
    labels = np.asarray(labels)
    second = phi.T @ phi / n
    blocks = {}
    for y in (1, -1):
        mask = labels == y
        share = np.count_nonzero(mask) / n
        blocks[y] = (share * second, phi[mask].sum(axis=0) / n)
    return blocks


def _require_both_classes(data):
    n_pos, n_neg = data.class_counts
    if n_pos == 0 or n_neg == 0:
        raise PreconditionError(
            f"supervised SMI needs both classes, got {n_pos} positives and {n_neg} negatives"
        )


def _solve_blocks(blocks, lam):
    return {y: RidgeSolver(gram, lam).solve(mean) for y, (gram, mean) in blocks.items()}


def _smi_from_blocks(alphas, blocks):
    value = -0.5
    for y, (gram, mean) in blocks.items():
        alpha = alphas[y]
        value += float(alpha @ mean) - 0.5 * float(alpha @ gram @ alpha)
    return value


def fit_pn(data, basis, lam):
    _require_both_classes(data)
    blocks = pn_moments(basis(data.features), data.labels)
    alphas = _solve_blocks(blocks, lam)
    return JointRatioModel(basis, alphas[1], alphas[-1])


def smi_hat_pn(model, data):
    """alpha^T h - 1/2 alpha^T H alpha - 1/2 with H and h taken from data."""
    if data.dim != model.basis.dim:
        raise ShapeError(f"data dimension {data.dim} does not match model dimension {model.basis.dim}")
    blocks = pn_moments(model.basis(data.features), data.labels)
    return _smi_from_blocks({1: model.alpha_pos, -1: model.alpha_neg}, blocks)


def cross_validate_pn(data, sigma_grid, lambda_grid, folds=DEFAULT_FOLDS, seed=None, centers=None,
                      b_max=None):
    """Same grid machinery as the PU estimator, scored by held-out PN squared error."""
    _require_both_classes(data)
    check_cv_inputs(sigma_grid, lambda_grid, folds, data.class_counts)
    rng = np.random.default_rng(seed)
    if centers is None:
        centers = select_centers(data.features, b_max or data.n, rng)
    assignment = np.empty(data.n, dtype=int)
    for y in (1, -1):
        rows = np.flatnonzero(data.labels == y)
        assignment[rows] = fold_assignment(rows.shape[0], folds, rng)

    moments = {}

    def fold_blocks(sigma):
        if sigma not in moments:
            phi = GaussianBasis(centers, sigma)(data.features)
            moments[sigma] = [
                (
                    pn_moments(phi[assignment != k], data.labels[assignment != k]),
                    pn_moments(phi[assignment == k], data.labels[assignment == k]),
                )
                for k in range(folds)
            ]
        return moments[sigma]

    def cell_score(sigma, lam):
        scores = []
        for train, test in fold_blocks(sigma):
            alphas = _solve_blocks(train, lam)
            # held-out J(g) is -(SMI + 1/2) evaluated on the test blocks
            scores.append(-_smi_from_blocks(alphas, test) - 0.5)
        return np.mean(scores)

    table = grid_table(sigma_grid, lambda_grid, cell_score)
    best = choose_cell(table)
    return FitReport(chosen_sigma=best.sigma, chosen_lambda=best.lambda_, cv_table=table)


def estimate_smi_pn(data, config=None):
    """Returns (SMI value, JointRatioModel, FitReport) with CV as in estimate_smi."""
    config = config or EstimatorConfig()
    _require_both_classes(data)
    rng = np.random.default_rng(config.seed)
    centers = select_centers(data.features, config.b_max, rng)
    sigma_grid = resolve_sigma_grid(config, data.features, rng)
    report = cross_validate_pn(
        data, sigma_grid, config.lambda_grid, folds=config.folds, seed=rng, centers=centers,
    )
    model = fit_pn(data, GaussianBasis(centers, report.chosen_sigma), report.chosen_lambda)
    value = smi_hat_pn(model, data)
    logger.debug("PN-SMI %.6g at sigma=%g lambda=%g", value, report.chosen_sigma, report.chosen_lambda)
    return value, model, replace(report, final_objective=-value - 0.5)


def _projected_densities(spec):
    """
    Densities of the whitened coordinate t = u^T Sigma^{-1/2} (x - mu_neg).

    For a shared diagonal covariance p(x|+1)/p(x) depends on x only through t,
    and t is N(distance, 1) under the positive class and N(0, 1) otherwise.
    """
    delta = (spec.mean_pos - spec.mean_neg) / np.sqrt(spec.cov_diag)
    distance = float(np.linalg.norm(delta))
    theta_p = spec.prior.theta_p

    def normal(t, mean):
        return math.exp(-0.5 * (t - mean) ** 2) / math.sqrt(2.0 * math.pi)

    def p_pos(t):
        return normal(t, distance)

    def p_neg(t):
        return normal(t, 0.0)

    def p_marginal(t):
        return theta_p * p_pos(t) + (1.0 - theta_p) * p_neg(t)

    return distance, p_pos, p_neg, p_marginal


def _integrate(integrand, lower, upper, points):
    value, error = quad(integrand, lower, upper, points=points, epsabs=0.0, epsrel=QUAD_EPSREL, limit=400)
    if not math.isfinite(value) or error > max(1e-8 * abs(value), 1e-13):
        raise QuadratureError(f"quadrature did not converge (value {value}, error estimate {error})")
    return value


def smi_integrals(spec):
    """(definition integral, PU rewriting integral) for a Gaussian spec."""
    distance, p_pos, p_neg, p_marginal = _projected_densities(spec)
    if distance == 0.0:
        return 0.0, 0.0
    theta_p = spec.prior.theta_p
    theta_n = spec.prior.theta_n
    lower, upper = -TAIL_WIDTH, distance + TAIL_WIDTH

    def definition(t):
        p = p_marginal(t)
        if p == 0.0:
            return 0.0
        return 0.5 * (
            theta_p * (p_pos(t) / p - 1.0) ** 2 * p
            + theta_n * (p_neg(t) / p - 1.0) ** 2 * p
        )

    def pu_rewriting(t):
        p = p_marginal(t)
        if p == 0.0:
            return 0.0
        return theta_p / (2.0 * theta_n) * (p_pos(t) / p - 1.0) ** 2 * p

    breaks = (0.0, distance)
    return (
        _integrate(definition, lower, upper, breaks),
        _integrate(pu_rewriting, lower, upper, breaks),
    )


def true_smi_quadrature(spec):
    """SMI of a Gaussian spec by quadrature, cross-checked against the PU rewriting."""
    definition, pu_rewriting = smi_integrals(spec)
    gap = abs(definition - pu_rewriting)
    if gap > AGREEMENT_RTOL * max(abs(definition), abs(pu_rewriting)) + 1e-14:
        raise QuadratureError(
            f"SMI integrals disagree: definition {definition!r}, PU rewriting {pu_rewriting!r}"
        )
    return definition


def gaussian_expectation(func, mean, cov_diag, order=64):
    """E[func(X)] for X ~ N(mean, diag(cov_diag)) by tensor Gauss-Hermite rules."""
    mean = np.asarray(mean, dtype=float)
    dim = mean.shape[0]
    if dim > 3:
        raise PreconditionError(f"tensor quadrature is limited to d <= 3, got d={dim}")
    nodes, weights = hermegauss(order)
    weights = weights / math.sqrt(2.0 * math.pi)
    grid = np.array(list(itertools.product(nodes, repeat=dim)))
    grid_weights = np.prod(np.array(list(itertools.product(weights, repeat=dim))), axis=1)
    points = mean + grid * np.sqrt(np.asarray(cov_diag, dtype=float))
    return float(grid_weights @ np.asarray(func(points), dtype=float))


def population_objective(spec, w, order=64):
    """J(w) = 1/2 E_p[w^2] - E_{p(x|y=+1)}[w] for a callable w on (n, d) arrays."""
    theta_p = spec.prior.theta_p
    second_pos = gaussian_expectation(lambda x: w(x) ** 2, spec.mean_pos, spec.cov_diag, order)
    second_neg = gaussian_expectation(lambda x: w(x) ** 2, spec.mean_neg, spec.cov_diag, order)
    first_pos = gaussian_expectation(w, spec.mean_pos, spec.cov_diag, order)
    return 0.5 * (theta_p * second_pos + (1.0 - theta_p) * second_neg) - first_pos


def true_ratio(spec):
    """The optimal w(x) = p(x|y=+1) / p(x) of a Gaussian spec."""
    theta_p = spec.prior.theta_p

    def ratio(points):
        points = np.asarray(points, dtype=float)
        log_pos = -0.5 * np.sum((points - spec.mean_pos) ** 2 / spec.cov_diag, axis=1)
        log_neg = -0.5 * np.sum((points - spec.mean_neg) ** 2 / spec.cov_diag, axis=1)
        return 1.0 / (theta_p + (1.0 - theta_p) * np.exp(log_neg - log_pos))

    return ratio
