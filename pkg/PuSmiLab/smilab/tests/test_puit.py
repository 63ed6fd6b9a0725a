from functools import partial

import numpy as np
from django.test import SimpleTestCase, tag
from scipy import stats

from smilab.basis import GaussianBasis
from smilab.data import ClassPrior, GaussianMixtureSpec, PuDataset, sample_gaussian_pu
from smilab.exceptions import DegenerateDataError, PreconditionError
from smilab.puit import (
    TYPE2_HEADER,
    FrozenStatistic,
    PooledStatistic,
    draw_pseudo_labels,
    permutation_p_value,
    permutation_test,
    pooled_hyperparameters,
    type2_experiment,
)
from smilab.pusmi import EstimatorConfig, estimate_fixed

FAST = EstimatorConfig(sigma_grid=(1.0,), lambda_grid=(0.1,), folds=2, b_max=30)
HALF = ClassPrior(0.5)


def toy_data(n_p=40, n_u=80, seed=0):
    return sample_gaussian_pu(GaussianMixtureSpec.toy(), n_p, n_u, seed)


class ScriptedRng:
    """Stand-in generator whose random() replays prepared arrays."""

    def __init__(self, draws):
        self.draws = list(draws)

    def random(self, size):
        return np.asarray(self.draws.pop(0), dtype=float)


class PValueTests(SimpleTestCase):
    def test_rank_formula(self):
        self.assertEqual(permutation_p_value(2.0, [1.0, 2.0, 3.0]), 0.75)
        self.assertEqual(permutation_p_value(9.0, [1.0, 2.0, 3.0]), 0.25)
        self.assertEqual(permutation_p_value(0.0, [1.0, 2.0, 3.0]), 1.0)


class PseudoLabelTests(SimpleTestCase):
    def test_empty_draw_is_redrawn(self):
        rng = ScriptedRng([[0.9, 0.8, 0.7], [0.9, 0.1, 0.7]])
        with self.assertLogs('smilab.puit', level='WARNING'):
            mask = draw_pseudo_labels(rng, 3, 0.5)
        np.testing.assert_array_equal(mask, [False, True, False])

    def test_redraws_are_bounded(self):
        rng = ScriptedRng([[0.9, 0.9]] * 11)
        with self.assertLogs('smilab.puit', level='WARNING'):
            with self.assertRaises(DegenerateDataError):
                draw_pseudo_labels(rng, 2, 0.5)

    def test_frozen_statistic_matches_direct_fit(self):
        data = toy_data()
        basis = GaussianBasis(data.unlabeled[:10], 1.0)
        mask = np.random.default_rng(0).random(data.n_u) < 0.5
        frozen = FrozenStatistic(data.unlabeled, basis, 0.1, HALF)(mask)
        direct = estimate_fixed(PuDataset(data.unlabeled[mask], data.unlabeled), HALF, basis, 0.1)[0]
        self.assertAlmostEqual(frozen, direct.value, places=10)

    def test_pooled_statistic_matches_direct_fit(self):
        data = toy_data()
        pooled = np.vstack([data.positives, data.unlabeled])
        basis = GaussianBasis(pooled[:10], 1.0)
        statistic = PooledStatistic(pooled, data.n_p, basis, 0.1, HALF)
        observed = estimate_fixed(data, HALF, basis, 0.1)[0]
        self.assertAlmostEqual(statistic(np.arange(pooled.shape[0])), observed.value, places=10)
        order = np.random.default_rng(1).permutation(pooled.shape[0])
        split = PuDataset(pooled[order[:data.n_p]], pooled[order[data.n_p:]])
        self.assertAlmostEqual(statistic(order), estimate_fixed(split, HALF, basis, 0.1)[0].value, places=10)

    def test_pooled_hyperparameters_come_from_pooled_rows(self):
        data = toy_data()
        pooled = np.vstack([data.positives, data.unlabeled])
        basis, lam, report = pooled_hyperparameters(pooled, data.n_p, EstimatorConfig(b_max=30), seed=2)
        self.assertEqual(basis.size, 30)
        rows = {tuple(row) for row in pooled}
        self.assertTrue(all(tuple(center) in rows for center in basis.centers))
        self.assertEqual((basis.bandwidth, lam), (report.chosen_sigma, report.chosen_lambda))
        again = pooled_hyperparameters(pooled, data.n_p, EstimatorConfig(b_max=30), seed=2)
        np.testing.assert_array_equal(again[0].centers, basis.centers)
        self.assertEqual(again[1], lam)


class PermutationTestTests(SimpleTestCase):
    def test_result_shape(self):
        result = permutation_test(toy_data(), HALF, b_count=19, config=FAST, seed=1)
        self.assertEqual(len(result.permuted), 19)
        self.assertGreaterEqual(result.p_value, 1 / 20)
        self.assertLessEqual(result.p_value, 1.0)
        self.assertEqual(result.p_value, permutation_p_value(result.observed, result.permuted))
        self.assertEqual(result.prior_used, HALF)

    def test_seeded_runs_repeat(self):
        for scheme in ('relabel', 'pooled'):
            a = permutation_test(toy_data(), HALF, b_count=19, config=FAST, seed=3, scheme=scheme)
            b = permutation_test(toy_data(), HALF, b_count=19, config=FAST, seed=3, scheme=scheme)
            self.assertEqual(a, b)

    def test_threads_do_not_change_result(self):
        a = permutation_test(toy_data(), HALF, b_count=19, config=FAST, seed=4, threads=1)
        b = permutation_test(toy_data(), HALF, b_count=19, config=FAST, seed=4, threads=3)
        self.assertEqual(a.permuted, b.permuted)

    def test_rerun_cross_validation_per_round(self):
        result = permutation_test(
            toy_data(), HALF, b_count=19, config=FAST, seed=5, recv_per_round=True, scheme='pooled',
        )
        self.assertEqual(len(result.permuted), 19)

    def test_dependent_data_is_rejected(self):
        data = toy_data(n_p=100, n_u=200)
        result = permutation_test(data, HALF, b_count=99, config=FAST, seed=0, scheme='pooled')
        self.assertEqual(result.p_value, 0.01)
        self.assertTrue(result.rejects(0.05))

    def test_pooled_is_the_default_scheme(self):
        a = permutation_test(toy_data(), HALF, b_count=19, config=FAST, seed=6)
        b = permutation_test(toy_data(), HALF, b_count=19, config=FAST, seed=6, scheme='pooled')
        self.assertEqual(a, b)

    def test_too_few_rounds(self):
        with self.assertRaises(PreconditionError):
            permutation_test(toy_data(), HALF, b_count=18, config=FAST)

    def test_unknown_scheme(self):
        with self.assertRaises(PreconditionError):
            permutation_test(toy_data(), HALF, b_count=19, config=FAST, scheme='shuffle')


class Type2Tests(SimpleTestCase):
    generator = partial(sample_gaussian_pu, GaussianMixtureSpec.toy())

    def test_level_one_always_rejects(self):
        rows = type2_experiment(self.generator, HALF, [20], [40, 60], level=1.0, trials=3,
                                b_count=19, config=FAST)
        self.assertEqual([(row.n_p, row.n_u) for row in rows], [(20, 40), (20, 60)])
        self.assertTrue(all(row.type2_freq == 0.0 for row in rows))
        self.assertEqual(rows[0].rejection_freq, 1.0)

    def test_level_below_resolution_never_rejects(self):
        rows = type2_experiment(self.generator, HALF, [20, 30], [40], level=1e-6, trials=3,
                                b_count=19, config=FAST)
        self.assertTrue(all(row.type2_freq == 1.0 for row in rows))
        self.assertEqual(len(rows[0].to_row()), len(TYPE2_HEADER))

    def test_grid_and_level_checks(self):
        with self.assertRaises(PreconditionError):
            type2_experiment(self.generator, HALF, [], [40], b_count=19, config=FAST)
        with self.assertRaises(PreconditionError):
            type2_experiment(self.generator, HALF, [20], [40], level=0.0, b_count=19, config=FAST)


@tag('slow')
class CalibrationTests(SimpleTestCase):
    null_generator = partial(sample_gaussian_pu, GaussianMixtureSpec.null())

    def test_power_on_the_toy_spec(self):
        generator = partial(sample_gaussian_pu, GaussianMixtureSpec.toy())
        row, = type2_experiment(generator, HALF, [100], [400], trials=50, b_count=200, threads=4)
        self.assertLessEqual(row.type2_freq, 0.10)

    def test_level_under_independence(self):
        row, = type2_experiment(self.null_generator, HALF, [100], [400], trials=200, b_count=200,
                                seed=11, threads=4)
        self.assertLessEqual(row.rejection_freq, 0.10)

    def test_level_under_independence_with_small_samples(self):
        row, = type2_experiment(self.null_generator, HALF, [50], [100], trials=200, b_count=99,
                                config=FAST, seed=7, threads=4)
        self.assertLessEqual(row.rejection_freq, 0.10)

    def test_relabel_rejects_independent_data_too_often(self):
        row, = type2_experiment(self.null_generator, HALF, [100], [400], trials=100, b_count=99,
                                seed=7, scheme='relabel', threads=4)
        self.assertGreater(row.rejection_freq, 0.25)

    def test_pooled_ranks_are_uniform(self):
        spec = GaussianMixtureSpec.null()
        counts = np.zeros(10)
        for seed in range(500):
            data = sample_gaussian_pu(spec, 50, 100, seed)
            result = permutation_test(data, HALF, b_count=99, config=FAST, seed=seed)
            rank = int(round(result.p_value * 100)) - 1
            counts[rank // 10] += 1
        self.assertGreater(stats.chisquare(counts).pvalue, 0.01)

    def test_type2_falls_with_sample_size(self):
        spec = GaussianMixtureSpec(mean_pos=(-0.3, 0.0), mean_neg=(0.3, 0.0), cov_diag=(0.5, 3.5),
                                   prior=HALF)
        rows = type2_experiment(partial(sample_gaussian_pu, spec), HALF, [10, 25, 50, 100], [400],
                                trials=40, b_count=99, config=FAST, threads=4)
        freqs = [row.type2_freq for row in rows]
        self.assertLess(freqs[-1], freqs[0])
        rho = stats.spearmanr([row.n_p for row in rows], freqs).statistic
        self.assertLess(rho, 0)
