"""
Dataset value types, file ingestion and PU sampling.

Every sampler is a pure function of its inputs and seed. Arrays held by the
dataclasses below are made read-only on construction.
"""
import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import CapacityError, LibsvmParseError, PreconditionError, ShapeError

logger = logging.getLogger(__name__)


def _frozen_matrix(values, name):
    array = np.array(values, dtype=float)
    if array.ndim != 2:
        raise ShapeError(f"{name} must be a 2-dimensional matrix, got ndim={array.ndim}")
    array.setflags(write=False)
    return array


def _frozen_vector(values, name):
    array = np.array(values, dtype=float).reshape(-1)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class ClassPrior:
    theta_p: float

    def __post_init__(self):
        theta = float(self.theta_p)
        if not math.isfinite(theta) or not 0.0 < theta < 1.0:
            raise PreconditionError(f"class prior must lie in (0, 1), got {self.theta_p}")
        object.__setattr__(self, 'theta_p', theta)

    @property
    def theta_n(self):
        return 1.0 - self.theta_p

    @property
    def ratio(self):
        """theta_P / theta_N, the only place the prior enters an estimate."""
        return self.theta_p / self.theta_n


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        features = _frozen_matrix(self.features, 'features')
        labels = np.array(self.labels, dtype=int).reshape(-1)
        if labels.shape[0] != features.shape[0]:
            raise ShapeError(
                f"{labels.shape[0]} labels for {features.shape[0]} feature rows"
            )
        if features.shape[0] > 0 and features.shape[1] < 1:
            raise ShapeError("feature dimension must be at least 1")
        if not np.isin(labels, (-1, 1)).all():
            raise PreconditionError("labels must be +1 or -1")
        labels.setflags(write=False)
        object.__setattr__(self, 'features', features)
        object.__setattr__(self, 'labels', labels)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]

    @property
    def positives(self):
        return self.features[self.labels == 1]

    @property
    def negatives(self):
        return self.features[self.labels == -1]

    @property
    def class_counts(self):
        n_pos = int(np.count_nonzero(self.labels == 1))
        return n_pos, self.n - n_pos


@dataclass(frozen=True)
class PuDataset:
    positives: np.ndarray
    unlabeled: np.ndarray

    def __post_init__(self):
        positives = _frozen_matrix(self.positives, 'positives')
        unlabeled = _frozen_matrix(self.unlabeled, 'unlabeled')
        if positives.shape[1] != unlabeled.shape[1]:
            raise ShapeError(
                f"positives have {positives.shape[1]} columns, "
                f"unlabeled have {unlabeled.shape[1]}"
            )
        object.__setattr__(self, 'positives', positives)
        object.__setattr__(self, 'unlabeled', unlabeled)

    @property
    def dim(self):
        return self.positives.shape[1]

    @property
    def n_p(self):
        return self.positives.shape[0]

    @property
    def n_u(self):
        return self.unlabeled.shape[0]

    def require_nonempty(self):
        if self.n_p < 1 or self.n_u < 1:
            raise PreconditionError(
                f"estimation needs nP >= 1 and nU >= 1, got nP={self.n_p}, nU={self.n_u}"
            )
        return self


@dataclass(frozen=True)
class GaussianMixtureSpec:
    mean_pos: np.ndarray
    mean_neg: np.ndarray
    cov_diag: np.ndarray
    prior: ClassPrior

    def __post_init__(self):
        mean_pos = _frozen_vector(self.mean_pos, 'mean_pos')
        mean_neg = _frozen_vector(self.mean_neg, 'mean_neg')
        cov_diag = _frozen_vector(self.cov_diag, 'cov_diag')
        if not (mean_pos.shape == mean_neg.shape == cov_diag.shape) or mean_pos.size < 1:
            raise ShapeError("mean_pos, mean_neg and cov_diag must share one length d >= 1")
        if not (cov_diag > 0).all():
            raise PreconditionError("cov_diag entries must be positive")
        prior = self.prior if isinstance(self.prior, ClassPrior) else ClassPrior(self.prior)
        object.__setattr__(self, 'mean_pos', mean_pos)
        object.__setattr__(self, 'mean_neg', mean_neg)
        object.__setattr__(self, 'cov_diag', cov_diag)
        object.__setattr__(self, 'prior', prior)

    @classmethod
    def toy(cls, theta_p=0.5):
        """Two vertically elongated Gaussians separated along the horizontal axis."""
        return cls(
            mean_pos=(-1.0, 0.0),
            mean_neg=(1.0, 0.0),
            cov_diag=(0.5, 3.5),
            prior=ClassPrior(theta_p),
        )

    @classmethod
    def null(cls, theta_p=0.5, mean=(0.0, 0.0), cov_diag=(0.5, 3.5)):
        return cls(mean_pos=mean, mean_neg=mean, cov_diag=cov_diag, prior=ClassPrior(theta_p))

    @property
    def dim(self):
        return self.mean_pos.shape[0]

    def scaled(self, factor):
        return GaussianMixtureSpec(
            mean_pos=self.mean_pos * factor,
            mean_neg=self.mean_neg * factor,
            cov_diag=self.cov_diag,
            prior=self.prior,
        )

    def to_dict(self):
        return {
            'mean_pos': self.mean_pos.tolist(),
            'mean_neg': self.mean_neg.tolist(),
            'cov_diag': self.cov_diag.tolist(),
            'theta_p': self.prior.theta_p,
        }

    @classmethod
    def from_dict(cls, payload, theta_p=None):
        theta = payload.get('theta_p', 0.5) if theta_p is None else theta_p
        return cls(
            mean_pos=payload['mean_pos'],
            mean_neg=payload['mean_neg'],
            cov_diag=payload['cov_diag'],
            prior=ClassPrior(theta),
        )

    def _draw(self, rng, coins):
        std = np.sqrt(self.cov_diag)
        noise = rng.standard_normal((coins.shape[0], self.dim))
        means = np.where(coins[:, None], self.mean_pos, self.mean_neg)
        return means + noise * std

    def sample_labeled(self, n, seed=None):
        """i.i.d. pairs from the joint density, labels drawn Bernoulli(theta_P)."""
        rng = np.random.default_rng(seed)
        coins = rng.random(int(n)) < self.prior.theta_p
        return LabeledDataset(self._draw(rng, coins), np.where(coins, 1, -1))


def sample_gaussian_pu(spec, n_p, n_u, seed=None):
    if n_p < 1 or n_u < 1:
        raise PreconditionError(f"need n_p >= 1 and n_u >= 1, got n_p={n_p}, n_u={n_u}")
    rng = np.random.default_rng(seed)
    positives = spec._draw(rng, np.ones(int(n_p), dtype=bool))
    coins = rng.random(int(n_u)) < spec.prior.theta_p
    unlabeled = spec._draw(rng, coins)
    return PuDataset(positives, unlabeled)


def make_pu(data, n_p, n_u, prior, seed=None):
    """
    Subsample a PU dataset from a labeled corpus.

    Positives come from the positive class without replacement. Each unlabeled
    draw flips a Bernoulli(theta_P) coin and takes an unused row of the chosen
    class, so the two samples never share a row.
    """
    if n_p < 1 or n_u < 1:
        raise PreconditionError(f"need n_p >= 1 and n_u >= 1, got n_p={n_p}, n_u={n_u}")
    rng = np.random.default_rng(seed)
    pos_idx = rng.permutation(np.flatnonzero(data.labels == 1))
    neg_idx = rng.permutation(np.flatnonzero(data.labels == -1))
    if pos_idx.shape[0] < n_p:
        raise CapacityError('positive', pos_idx.shape[0], n_p)

    coins = rng.random(int(n_u)) < prior.theta_p
    k_pos = int(coins.sum())
    k_neg = int(n_u) - k_pos
    spare_pos = pos_idx[n_p:]
    if spare_pos.shape[0] < k_pos:
        raise CapacityError('positive', spare_pos.shape[0], k_pos)
    if neg_idx.shape[0] < k_neg:
        raise CapacityError('negative', neg_idx.shape[0], k_neg)

    unlabeled_idx = np.empty(int(n_u), dtype=int)
    unlabeled_idx[coins] = spare_pos[:k_pos]
    unlabeled_idx[~coins] = neg_idx[:k_neg]
    logger.debug("make_pu: %d positives, %d unlabeled (%d positive)", n_p, n_u, k_pos)
    return PuDataset(data.features[pos_idx[:n_p]], data.features[unlabeled_idx])


def split_validation(data, n_p, n_u, seed=None):
    """Hold out n_p positives and n_u unlabeled rows; returns (train, validation)."""
    if n_p >= data.n_p or n_u >= data.n_u:
        raise PreconditionError(
            f"validation sizes ({n_p}, {n_u}) must leave training rows "
            f"out of ({data.n_p}, {data.n_u})"
        )
    rng = np.random.default_rng(seed)
    p_perm = rng.permutation(data.n_p)
    u_perm = rng.permutation(data.n_u)
    train = PuDataset(data.positives[p_perm[n_p:]], data.unlabeled[u_perm[n_u:]])
    validation = PuDataset(data.positives[p_perm[:n_p]], data.unlabeled[u_perm[:n_u]])
    return train, validation


def _label_sign(raw):
    return 1 if raw > 0 else -1


def load_libsvm(path):
    """
    Read a LIBSVM text file into a dense LabeledDataset.

    The dimension is the largest feature index in the file; missing entries
    are zero. Trailing '#' comments are ignored.
    """
    rows = []
    labels = []
    max_index = 0
    with open(path, encoding='utf-8') as handle:
        for line_number, line in enumerate(handle, start=1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            try:
                label = float(tokens[0])
            except ValueError:
                raise LibsvmParseError(line_number, f"bad label {tokens[0]!r}") from None
            entries = {}
            previous = 0
            for token in tokens[1:]:
                index_text, sep, value_text = token.partition(':')
                if not sep:
                    raise LibsvmParseError(line_number, f"expected idx:val, got {token!r}")
                try:
                    index = int(index_text)
                    value = float(value_text)
                except ValueError:
                    raise LibsvmParseError(line_number, f"bad entry {token!r}") from None
                if index < 1:
                    raise LibsvmParseError(line_number, f"indices are 1-based, got {index}")
                if index <= previous:
                    raise LibsvmParseError(line_number, f"index {index} after {previous} is not ascending")
                entries[index] = value
                previous = index
            max_index = max(max_index, previous)
            rows.append(entries)
            labels.append(_label_sign(label))

    features = np.zeros((len(rows), max_index))
    for i, entries in enumerate(rows):
        for index, value in entries.items():
            features[i, index - 1] = value
    logger.debug("load_libsvm: %s -> %d rows, d=%d", path, len(rows), max_index)
    return LabeledDataset(features, np.array(labels, dtype=int))


def write_libsvm(data, path):
    with open(path, 'w', encoding='utf-8') as handle:
        for row, label in zip(data.features, data.labels):
            entries = ' '.join(
                f"{j + 1}:{value!r}" for j, value in enumerate(row.tolist()) if value != 0.0
            )
            handle.write(f"{'+1' if label > 0 else '-1'} {entries}".rstrip() + '\n')


def _is_numeric_row(row):
    try:
        [float(cell) for cell in row]
    except ValueError:
        return False
    return True


def load_csv(path):
    """
    Read a CSV file into a LabeledDataset.

    A header row is optional; with a header the label column is the one named
    'y', otherwise the last column.
    """
    with open(path, encoding='utf-8', newline='') as handle:
        rows = [row for row in csv.reader(handle) if row]
    if not rows:
        return LabeledDataset(np.zeros((0, 0)), np.zeros(0, dtype=int))

    label_column = -1
    if not _is_numeric_row(rows[0]):
        header = [name.strip() for name in rows[0]]
        if 'y' in header:
            label_column = header.index('y')
        rows = rows[1:]
    if not rows:
        return LabeledDataset(np.zeros((0, 0)), np.zeros(0, dtype=int))
    try:
        table = np.array([[float(cell) for cell in row] for row in rows], dtype=float)
    except ValueError as exc:
        raise PreconditionError(f"{path}: non-numeric cell ({exc})") from None
    if table.ndim != 2 or table.shape[1] < 2:
        raise ShapeError(f"{path}: need at least one feature column and a label column")

    label_column %= table.shape[1]
    labels = np.where(table[:, label_column] > 0, 1, -1)
    features = np.delete(table, label_column, axis=1)
    return LabeledDataset(features, labels)


def load_labeled(path):
    path = Path(path)
    if path.suffix.lower() == '.csv':
        return load_csv(path)
    return load_libsvm(path)
