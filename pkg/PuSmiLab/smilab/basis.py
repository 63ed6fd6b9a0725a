"""Gaussian basis functions for the linear-in-parameter ratio model."""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .exceptions import DegenerateDataError, PreconditionError, ShapeError

logger = logging.getLogger(__name__)

DEFAULT_B_MAX = 200
MEDIAN_SUBSAMPLE = 500
BANDWIDTH_FACTORS = (0.5, 1.0, 2.0)
TINY = np.finfo(float).tiny


@dataclass(frozen=True)
class GaussianBasis:
    centers: np.ndarray
    bandwidth: float

    def __post_init__(self):
        centers = np.array(self.centers, dtype=float)
        if centers.ndim != 2 or centers.shape[0] < 1 or centers.shape[1] < 1:
            raise ShapeError(f"centers must be a non-empty (b, m) matrix, got shape {centers.shape}")
        bandwidth = float(self.bandwidth)
        if not np.isfinite(bandwidth) or bandwidth <= 0:
            raise PreconditionError(f"bandwidth must be positive, got {self.bandwidth}")
        centers.setflags(write=False)
        object.__setattr__(self, 'centers', centers)
        object.__setattr__(self, 'bandwidth', bandwidth)

    @property
    def size(self):
        return self.centers.shape[0]

    @property
    def dim(self):
        return self.centers.shape[1]

    def __call__(self, points):
        return eval_basis(self, points)

    def to_dict(self):
        return {'sigma': self.bandwidth, 'centers': self.centers.tolist()}

    @classmethod
    def from_dict(cls, payload):
        return cls(np.asarray(payload['centers'], dtype=float), payload['sigma'])


def select_centers(unlabeled, b_max=DEFAULT_B_MAX, seed=None):
    """min(b_max, nU) unlabeled rows drawn uniformly without replacement."""
    unlabeled = np.asarray(unlabeled, dtype=float)
    if b_max < 1:
        raise PreconditionError(f"b_max must be at least 1, got {b_max}")
    if unlabeled.ndim != 2 or unlabeled.shape[0] < 1:
        raise PreconditionError("need at least one unlabeled row to select centers")
    rng = np.random.default_rng(seed)
    b = min(int(b_max), unlabeled.shape[0])
    index = rng.choice(unlabeled.shape[0], size=b, replace=False)
    return unlabeled[index]


def eval_basis(basis, points):
    """
    Design matrix with entries exp(-||x_k - c_l||^2 / (2 sigma^2)).

    Entries are floored at the smallest normal float so far points stay in (0, 1].
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[None, :]
    if points.ndim != 2 or points.shape[1] != basis.dim:
        raise ShapeError(
            f"points have shape {points.shape}, basis centers have dimension {basis.dim}"
        )
    sq_dist = cdist(points, basis.centers, 'sqeuclidean')
    return np.maximum(np.exp(-sq_dist / (2.0 * basis.bandwidth ** 2)), TINY)


def median_bandwidth(unlabeled, seed=None, max_rows=MEDIAN_SUBSAMPLE):
    """
    Median heuristic over at most max_rows sampled rows.

    Coincident pairs are left out of the median so duplicated rows do not pull
    it toward zero.
    """
    unlabeled = np.asarray(unlabeled, dtype=float)
    if unlabeled.ndim != 2 or unlabeled.shape[0] < 2:
        raise PreconditionError("median heuristic needs at least two unlabeled rows")
    if unlabeled.shape[0] > max_rows:
        rng = np.random.default_rng(seed)
        unlabeled = unlabeled[rng.choice(unlabeled.shape[0], size=max_rows, replace=False)]
    distances = pdist(unlabeled)
    distances = distances[distances > 0]
    if distances.size == 0:
        raise DegenerateDataError("all sampled rows coincide; bandwidth is undefined")
    sigma = float(np.median(distances))
    logger.debug("median bandwidth %.6g from %d rows", sigma, unlabeled.shape[0])
    return sigma


def bandwidth_grid(sigma):
    return [factor * sigma for factor in BANDWIDTH_FACTORS]
