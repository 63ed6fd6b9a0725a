import math

import numpy as np
from django.test import SimpleTestCase, tag

from smilab.data import ClassPrior, GaussianMixtureSpec, LabeledDataset
from smilab.exceptions import PreconditionError
from smilab.experiments import (
    GaussianSource,
    LabeledSource,
    SweepRow,
    fig1_sweep,
    loglog_slope,
    purl_toy,
)
from smilab.pnsmi import true_smi_quadrature
from smilab.purl import PurlConfig
from smilab.pusmi import EstimatorConfig

FAST = EstimatorConfig(sigma_grid=(1.0,), lambda_grid=(0.1,), folds=2, b_max=30)


class SweepTests(SimpleTestCase):
    def setUp(self):
        self.source = GaussianSource(GaussianMixtureSpec.toy())

    def test_single_point(self):
        truth, rows = fig1_sweep(self.source, 'n_p', [20], 60, trials=3, config=FAST)
        self.assertEqual(truth, true_smi_quadrature(GaussianMixtureSpec.toy()))
        self.assertEqual(len(rows), 1)
        self.assertEqual(rows[0].n, 20)
        self.assertGreaterEqual(rows[0].mse_mean, 0.0)
        self.assertGreaterEqual(rows[0].mse_stderr, 0.0)

    def test_grid_is_sorted_and_unique(self):
        _, rows = fig1_sweep(self.source, 'n_u', [60, 30, 60], 20, trials=2, config=FAST)
        self.assertEqual([row.n for row in rows], [30, 60])

    def test_threads_do_not_change_rows(self):
        one = fig1_sweep(self.source, 'n_p', [20, 40], 60, trials=4, config=FAST, seed=2, threads=1)
        many = fig1_sweep(self.source, 'n_p', [20, 40], 60, trials=4, config=FAST, seed=2, threads=4)
        self.assertEqual(one, many)

    def test_bad_arguments(self):
        with self.assertRaises(PreconditionError):
            fig1_sweep(self.source, 'n_p', [], 60, config=FAST)
        with self.assertRaises(PreconditionError):
            fig1_sweep(self.source, 'n', [20], 60, config=FAST)


class SlopeTests(SimpleTestCase):
    def test_inverse_rate(self):
        rows = [SweepRow(n, 3.0 / n, 0.0) for n in (10, 20, 40, 80)]
        self.assertAlmostEqual(loglog_slope(rows), -1.0)

    def test_needs_positive_errors(self):
        with self.assertRaises(PreconditionError):
            loglog_slope([SweepRow(10, 0.1, 0.0)])
        with self.assertRaises(PreconditionError):
            loglog_slope([SweepRow(10, 0.1, 0.0), SweepRow(20, 0.0, 0.0)])


class LabeledSourceTests(SimpleTestCase):
    def setUp(self):
        self.data = GaussianMixtureSpec.toy(0.3).sample_labeled(600, seed=0)

    def test_pools_partition_and_balance(self):
        source = LabeledSource(self.data, ClassPrior(0.5), oracle_fraction=0.5, config=FAST, seed=1)
        self.assertEqual(source.pool.n, 300)
        n_pos, n_neg = source.oracle.class_counts
        self.assertLessEqual(abs(n_pos - n_neg), 1)
        self.assertEqual(source.describe(), {'pool_size': 300, 'oracle_size': source.oracle.n})

    def test_draw_sizes(self):
        source = LabeledSource(self.data, ClassPrior(0.3), config=FAST, seed=1)
        pu = source.draw(20, 50, seed=3)
        self.assertEqual((pu.n_p, pu.n_u), (20, 50))
        self.assertTrue(math.isfinite(source.truth()))

    def test_single_class_oracle(self):
        data = LabeledDataset(np.zeros((10, 2)), np.ones(10))
        with self.assertRaises(PreconditionError):
            LabeledSource(data, ClassPrior(0.5), config=FAST)

    def test_fraction_range(self):
        with self.assertRaises(PreconditionError):
            LabeledSource(self.data, ClassPrior(0.5), oracle_fraction=1.0)


class ToyTests(SimpleTestCase):
    def test_report_contents(self):
        report = purl_toy(GaussianMixtureSpec.toy(), 60, 120, 25, PurlConfig.toy(epochs=3),
                          estimator=FAST, seed=0)
        self.assertAlmostEqual(float(np.linalg.norm(report.purl_direction)), 1.0)
        self.assertAlmostEqual(float(np.linalg.norm(report.pca_direction)), 1.0)
        self.assertTrue(0.0 <= report.purl_cosine <= 1.0)
        self.assertEqual(len(report.projections), 25)
        self.assertEqual(len(report.history), 4)
        self.assertEqual(set(report.to_dict()['cosines']), {'purl_e1', 'pca_e2'})

    def test_needs_two_dimensions(self):
        spec = GaussianMixtureSpec((0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (1.0, 1.0, 1.0), ClassPrior(0.5))
        with self.assertRaises(PreconditionError):
            purl_toy(spec, 60, 120, 10, PurlConfig.toy(d=3))


@tag('slow')
class ErrorTrendTests(SimpleTestCase):
    def setUp(self):
        self.source = GaussianSource(GaussianMixtureSpec.toy())

    def test_positive_count_sweep(self):
        _, rows = fig1_sweep(self.source, 'n_p', [10, 20, 50, 100, 200], 400, trials=50, threads=4)
        self.assertLess(rows[-1].mse_mean, rows[0].mse_mean)
        slope = loglog_slope(rows)
        self.assertGreaterEqual(slope, -1.6)
        self.assertLessEqual(slope, -0.5)

    def test_unlabeled_count_sweep(self):
        _, rows = fig1_sweep(self.source, 'n_u', [50, 400], 200, trials=50, threads=4)
        self.assertLess(rows[-1].mse_mean, rows[0].mse_mean)
