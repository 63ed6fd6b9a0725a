import math

import numpy as np
from django.test import SimpleTestCase, tag
from scipy.integrate import dblquad

from smilab.basis import GaussianBasis, select_centers
from smilab.data import ClassPrior, GaussianMixtureSpec, LabeledDataset, PuDataset
from smilab.exceptions import PreconditionError
from smilab.pnsmi import (
    JointRatioModel,
    cross_validate_pn,
    estimate_smi_pn,
    fit_pn,
    gaussian_expectation,
    population_objective,
    smi_hat_pn,
    smi_integrals,
    true_ratio,
    true_smi_quadrature,
)
from smilab.pusmi import EstimatorConfig, RatioModel, fit_analytic

CONSTANT = GaussianBasis([[0.0, 0.0]], 1e9)


def balanced(n=20, seed=0):
    rng = np.random.default_rng(seed)
    labels = np.array([1, -1] * (n // 2))
    return LabeledDataset(rng.normal(size=(n, 2)) + 0.5 * labels[:, None], labels)


def spec_density(spec, x, mean):
    return math.prod(
        math.exp(-0.5 * (x[k] - mean[k]) ** 2 / spec.cov_diag[k]) / math.sqrt(2 * math.pi * spec.cov_diag[k])
        for k in range(len(x))
    )


class FitPnTests(SimpleTestCase):
    def test_constant_basis_balanced_is_one(self):
        model = fit_pn(balanced(), CONSTANT, 0.0)
        self.assertAlmostEqual(model.alpha_pos[0], 1.0, places=14)
        self.assertAlmostEqual(model.alpha_neg[0], 1.0, places=14)
        self.assertAlmostEqual(smi_hat_pn(model, balanced()), 0.0, places=14)

    def test_zero_model(self):
        model = JointRatioModel(CONSTANT, [0.0], [0.0])
        self.assertEqual(smi_hat_pn(model, balanced()), -0.5)

    def test_huge_ridge_shrinks_to_zero(self):
        model = fit_pn(balanced(), CONSTANT, 1e12)
        self.assertLess(abs(model.alpha_pos[0]) + abs(model.alpha_neg[0]), 1e-11)

    def test_single_class_is_rejected(self):
        data = LabeledDataset(np.zeros((4, 2)), [1, 1, 1, 1])
        with self.assertRaises(PreconditionError):
            fit_pn(data, CONSTANT, 0.1)

    def test_matches_gradient_descent(self):
        data = balanced(30, seed=3)
        basis = GaussianBasis(select_centers(data.features, 6, seed=0), 1.0)
        lam = 0.1
        model = fit_pn(data, basis, lam)
        phi = basis(data.features)
        n = data.n
        for y, alpha in ((1, model.alpha_pos), (-1, model.alpha_neg)):
            n_y = np.count_nonzero(data.labels == y)
            system = n_y / n ** 2 * phi.T @ phi + lam * np.eye(6)
            target = phi[data.labels == y].sum(axis=0) / n
            step = 1.0 / np.linalg.eigvalsh(system).max()
            oracle = np.zeros(6)
            for _ in range(20000):
                oracle = oracle - step * (system @ oracle - target)
            np.testing.assert_allclose(alpha, oracle, atol=1e-6)

    def test_positive_slice_is_a_reweighted_pu_fit(self):
        data = balanced(60, seed=5)
        basis = GaussianBasis(select_centers(data.features, 8, seed=1), 1.2)
        n_pos = data.class_counts[0]
        lam = 0.05
        pn_model = fit_pn(data, basis, lam)
        pu_model = fit_analytic(PuDataset(data.positives, data.features), basis, lam * data.n / n_pos)
        np.testing.assert_allclose(pn_model.alpha_pos, pu_model.beta, rtol=1e-8, atol=1e-12)

    def test_cross_validation_picks_a_grid_cell(self):
        data = balanced(40, seed=4)
        report = cross_validate_pn(data, [0.5, 1.0], [0.01, 0.1], folds=4, seed=0)
        self.assertIn(report.chosen_sigma, (0.5, 1.0))
        self.assertEqual(len(report.cv_table), 4)

    def test_model_dict_round_trip(self):
        model = JointRatioModel(GaussianBasis([[0.0, 1.0]], 0.5), [0.3], [-0.2])
        again = JointRatioModel.from_dict(model.to_dict())
        self.assertEqual(again.alpha_neg[0], -0.2)

    @tag('slow')
    def test_large_labeled_sample_agrees_with_quadrature(self):
        spec = GaussianMixtureSpec.toy(0.5)
        data = spec.sample_labeled(10000, seed=0)
        value = estimate_smi_pn(data, EstimatorConfig(seed=1))[0]
        self.assertLess(abs(value - true_smi_quadrature(spec)), 0.02)

    @tag('slow')
    def test_error_falls_with_sample_size(self):
        spec = GaussianMixtureSpec.toy(0.5)
        truth = true_smi_quadrature(spec)
        errors = []
        for n in (100, 400, 1600):
            values = [
                estimate_smi_pn(spec.sample_labeled(n, seed=seed), EstimatorConfig(seed=seed))[0]
                for seed in range(50)
            ]
            errors.append(float(np.mean((np.asarray(values) - truth) ** 2)))
        self.assertLess(errors[1], errors[0])
        self.assertLess(errors[2], errors[1])


class QuadratureTests(SimpleTestCase):
    def test_equal_means_give_zero(self):
        self.assertLess(abs(true_smi_quadrature(GaussianMixtureSpec.null(0.4))), 1e-10)

    def test_prior_sweep_is_positive_and_symmetric(self):
        for theta in (0.3, 0.5, 0.7):
            spec = GaussianMixtureSpec.toy(theta)
            value = true_smi_quadrature(spec)
            self.assertGreater(value, 0.0)
            swapped = GaussianMixtureSpec(spec.mean_neg, spec.mean_pos, spec.cov_diag, ClassPrior(1 - theta))
            self.assertAlmostEqual(true_smi_quadrature(swapped), value, delta=1e-9)

    def test_separation_increases_smi(self):
        spec = GaussianMixtureSpec.toy(0.5)
        self.assertGreater(true_smi_quadrature(spec.scaled(10.0)), true_smi_quadrature(spec))

    def test_both_integrals_agree_on_random_specs(self):
        rng = np.random.default_rng(0)
        for trial in range(10):
            d = int(rng.integers(1, 4))
            spec = GaussianMixtureSpec(
                rng.normal(size=d), rng.normal(size=d), rng.uniform(0.3, 3.0, d),
                ClassPrior(float(rng.uniform(0.1, 0.9))),
            )
            definition, pu_rewriting = smi_integrals(spec)
            self.assertLessEqual(abs(definition - pu_rewriting), 1e-6 * abs(definition), f"trial {trial}")

    def test_projection_matches_full_two_dimensional_integral(self):
        spec = GaussianMixtureSpec.toy(0.3)
        theta_p = spec.prior.theta_p

        def integrand(x2, x1):
            pos = spec_density(spec, (x1, x2), spec.mean_pos)
            neg = spec_density(spec, (x1, x2), spec.mean_neg)
            p = theta_p * pos + (1 - theta_p) * neg
            if p == 0.0:
                return 0.0
            return 0.5 * (theta_p * (pos / p - 1) ** 2 + (1 - theta_p) * (neg / p - 1) ** 2) * p

        full, _ = dblquad(integrand, -8.0, 8.0, -20.0, 20.0, epsabs=1e-11, epsrel=1e-9)
        self.assertAlmostEqual(true_smi_quadrature(spec), full, delta=1e-6)


class PopulationObjectiveTests(SimpleTestCase):
    def test_gaussian_expectation_second_moment(self):
        value = gaussian_expectation(lambda x: x[:, 0] ** 2, [1.0], [2.0])
        self.assertAlmostEqual(value, 3.0, places=10)

    def test_tensor_rule_is_limited_to_three_dimensions(self):
        with self.assertRaises(PreconditionError):
            gaussian_expectation(lambda x: x[:, 0], np.zeros(4), np.ones(4))

    def test_any_ratio_model_is_a_lower_bound(self):
        spec = GaussianMixtureSpec.toy(0.5)
        truth = true_smi_quadrature(spec)
        ratio = spec.prior.ratio
        rng = np.random.default_rng(5)
        basis = GaussianBasis(rng.normal(size=(5, 2)) * 1.5, 1.2)
        for _ in range(10):
            model = RatioModel(basis, rng.normal(size=5))
            bound = ratio * (-population_objective(spec, model.predict) - 0.5)
            self.assertLessEqual(bound, truth + 1e-6)

    def test_true_ratio_attains_the_bound(self):
        spec = GaussianMixtureSpec.toy(0.5)
        bound = spec.prior.ratio * (-population_objective(spec, true_ratio(spec), order=96) - 0.5)
        self.assertAlmostEqual(bound, true_smi_quadrature(spec), delta=1e-4)
