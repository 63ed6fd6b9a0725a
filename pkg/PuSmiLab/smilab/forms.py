import dataclasses
import os
from pathlib import Path

from django import forms
from django.conf import settings

from .data import ClassPrior, GaussianMixtureSpec
from .mlp import SgdConfig
from .pusmi import EstimatorConfig

EXPERIMENT_KINDS = [
    ('estimate', 'PU-SMI estimate'),
    ('fig1_sweep', 'Squared-error sweep'),
    ('purl_toy', 'Linear PURL vs PCA on the toy spec'),
    ('purl_train', 'PURL training'),
    ('puit', 'PU independence test'),
    ('type2_sweep', 'Type-II error sweep'),
]

FIG1_GRID = list(range(10, 201, 10))

# Applied between the settings defaults and the user's config file.
KIND_DEFAULTS = {
    'estimate': {},
    'fig1_sweep': {'axis': 'n_p', 'n_grid': FIG1_GRID, 'n_u': 400, 'oracle_fraction': 0.5},
    'purl_toy': {'generator': 'toy', 'prior': 0.5, 'n_p': 200, 'n_u': 400, 'n_eval': 400, 'epochs': 200},
    'purl_train': {
        'architecture': 'default', 'epochs': 200, 'patience': 20, 'w_steps': 4,
        'learning_rate': 0.001, 'weight_decay': 0.0005, 'grad_noise_std': 0.01, 'batch_size': 64,
    },
    'puit': {'level': 0.05},
    'type2_sweep': {'n_p_grid': [25, 50, 100], 'n_u_grid': [100, 200, 400], 'level': 0.05},
}

SOURCE_KINDS = {'estimate', 'fig1_sweep', 'purl_train', 'puit', 'type2_sweep'}
SIZED_KINDS = {'estimate', 'purl_train', 'puit', 'purl_toy'}


def settings_defaults():
    smilab = settings.SMILAB
    return {
        'b_max': smilab['B_MAX'],
        'lambda_grid': list(smilab['LAMBDA_GRID']),
        'folds': smilab['FOLDS'],
        'b_count': smilab['PERMUTATIONS'],
        'trials': smilab['TRIALS'],
        'threads': smilab['THREADS'],
        'seed': smilab['SEED'],
    }


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    prior: float
    seed: int
    threads: int
    out: Path = None
    input: Path = None
    generator: str = ''
    generator_spec: dict = None
    sample_prior: float = None
    n_p: int = None
    n_u: int = None
    sigma_grid: tuple = None
    lambda_grid: tuple = ()
    folds: int = 5
    b_max: int = 200
    scale: bool = False
    trials: int = 50
    b_count: int = 1000
    level: float = 0.05
    recv_per_round: bool = False
    scheme: str = 'pooled'
    null: bool = False
    axis: str = 'n_p'
    n_grid: tuple = ()
    oracle_fraction: float = 0.5
    n_p_grid: tuple = ()
    n_u_grid: tuple = ()
    n_eval: int = None
    architecture: str = 'default'
    epochs: int = None
    patience: int = None
    w_steps: int = None
    learning_rate: float = None
    weight_decay: float = None
    grad_noise_std: float = None
    batch_size: int = None
    validation_p: int = 0
    validation_u: int = 0

    @property
    def class_prior(self):
        return ClassPrior(self.prior)

    @property
    def sampling_prior(self):
        """Prior used to draw data; defaults to the estimation prior."""
        return ClassPrior(self.prior if self.sample_prior is None else self.sample_prior)

    def estimator(self, seed=None):
        return EstimatorConfig(
            sigma_grid=self.sigma_grid,
            lambda_grid=self.lambda_grid,
            folds=self.folds,
            b_max=self.b_max,
            seed=self.seed if seed is None else seed,
        )

    def gaussian_spec(self):
        if self.null:
            return GaussianMixtureSpec.null(self.sampling_prior.theta_p)
        if self.generator_spec:
            return GaussianMixtureSpec.from_dict(self.generator_spec, theta_p=self.sampling_prior.theta_p)
        if self.generator == 'null':
            return GaussianMixtureSpec.null(self.sampling_prior.theta_p)
        return GaussianMixtureSpec.toy(self.sampling_prior.theta_p)

    def sgd(self):
        """SgdConfig from the given fields, or None when none were set."""
        values = {
            'learning_rate': self.learning_rate,
            'weight_decay': self.weight_decay,
            'grad_noise_std': self.grad_noise_std,
            'batch_size': self.batch_size,
        }
        values = {key: value for key, value in values.items() if value is not None}
        return SgdConfig(**values) if values else None

    def to_dict(self):
        return {
            field.name: str(value) if isinstance(value, Path) else value
            for field in dataclasses.fields(self)
            for value in [getattr(self, field.name)]
        }


class ExperimentConfigForm(forms.Form):
    kind = forms.ChoiceField(choices=EXPERIMENT_KINDS)
    prior = forms.FloatField()
    sample_prior = forms.FloatField(required=False)
    seed = forms.IntegerField(min_value=0)
    threads = forms.IntegerField(min_value=1)
    out = forms.CharField(required=False)
    input = forms.CharField(required=False)
    generator = forms.ChoiceField(choices=[('', '---'), ('toy', 'toy'), ('null', 'null')], required=False)
    generator_spec = forms.JSONField(required=False)
    n_p = forms.IntegerField(min_value=1, required=False)
    n_u = forms.IntegerField(min_value=1, required=False)

    sigma_grid = forms.JSONField(required=False)
    lambda_grid = forms.JSONField()
    folds = forms.IntegerField(min_value=2)
    b_max = forms.IntegerField(min_value=1)
    scale = forms.BooleanField(required=False)

    trials = forms.IntegerField(min_value=1)
    b_count = forms.IntegerField(min_value=19)
    level = forms.FloatField(required=False)
    recv_per_round = forms.BooleanField(required=False)
    scheme = forms.ChoiceField(choices=[('pooled', 'pooled'), ('relabel', 'relabel')], required=False)
    null = forms.BooleanField(required=False)
    axis = forms.ChoiceField(choices=[('n_p', 'n_p'), ('n_u', 'n_u')], required=False)
    n_grid = forms.JSONField(required=False)
    oracle_fraction = forms.FloatField(required=False)
    n_p_grid = forms.JSONField(required=False)
    n_u_grid = forms.JSONField(required=False)

    n_eval = forms.IntegerField(min_value=1, required=False)
    architecture = forms.ChoiceField(choices=[('default', 'd-60-20-1'), ('text', 'd-30-10-1')], required=False)
    epochs = forms.IntegerField(min_value=0, required=False)
    patience = forms.IntegerField(min_value=1, required=False)
    w_steps = forms.IntegerField(min_value=1, required=False)
    learning_rate = forms.FloatField(min_value=0.0, required=False)
    weight_decay = forms.FloatField(min_value=0.0, required=False)
    grad_noise_std = forms.FloatField(min_value=0.0, required=False)
    batch_size = forms.IntegerField(min_value=2, required=False)
    validation_p = forms.IntegerField(min_value=0, required=False)
    validation_u = forms.IntegerField(min_value=0, required=False)

    def clean_prior(self):
        prior = self.cleaned_data['prior']
        if not 0.0 < prior < 1.0:
            raise forms.ValidationError('The class prior must lie strictly between 0 and 1.')
        return prior

    def clean_sample_prior(self):
        prior = self.cleaned_data.get('sample_prior')
        if prior is not None and not 0.0 < prior < 1.0:
            raise forms.ValidationError('The sampling prior must lie strictly between 0 and 1.')
        return prior

    def clean_level(self):
        level = self.cleaned_data.get('level')
        if level is not None and not 0.0 < level <= 1.0:
            raise forms.ValidationError('The level must lie in (0, 1].')
        return level

    def clean_oracle_fraction(self):
        fraction = self.cleaned_data.get('oracle_fraction')
        if fraction is not None and not 0.0 < fraction < 1.0:
            raise forms.ValidationError('The oracle fraction must lie strictly between 0 and 1.')
        return fraction

    def clean_generator_spec(self):
        spec = self.cleaned_data.get('generator_spec')
        if spec in (None, {}):
            return None
        if not isinstance(spec, dict) or not {'mean_pos', 'mean_neg', 'cov_diag'} <= set(spec):
            raise forms.ValidationError('A generator spec needs mean_pos, mean_neg and cov_diag.')
        return spec

    def _positive_list(self, name, integer=False):
        values = self.cleaned_data.get(name)
        if values is None:
            return None
        if not isinstance(values, list) or not values:
            raise forms.ValidationError('Expected a non-empty list.')
        kind = int if integer else float
        try:
            values = [kind(v) for v in values]
        except (TypeError, ValueError):
            raise forms.ValidationError('Expected a list of numbers.')
        if integer and any(isinstance(v, float) and not v.is_integer() for v in self.cleaned_data[name]):
            raise forms.ValidationError('Expected a list of whole numbers.')
        if any(v <= 0 for v in values):
            raise forms.ValidationError('All entries must be positive.')
        return tuple(values)

    def clean_sigma_grid(self):
        return self._positive_list('sigma_grid')

    def clean_lambda_grid(self):
        return self._positive_list('lambda_grid')

    def clean_n_grid(self):
        return self._positive_list('n_grid', integer=True)

    def clean_n_p_grid(self):
        return self._positive_list('n_p_grid', integer=True)

    def clean_n_u_grid(self):
        return self._positive_list('n_u_grid', integer=True)

    def clean_input(self):
        value = self.cleaned_data.get('input')
        if not value:
            return None
        path = Path(value)
        if not path.is_file():
            raise forms.ValidationError(f'Input file not found: {value}')
        return path

    def clean_out(self):
        value = self.cleaned_data.get('out')
        if not value:
            return None
        path = Path(value)
        try:
            path.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise forms.ValidationError(f'Cannot create output directory {value}: {exc}')
        if not os.access(path, os.W_OK):
            raise forms.ValidationError(f'Output directory is not writable: {value}')
        return path

    def clean(self):
        cleaned_data = super().clean()
        kind = cleaned_data.get('kind')
        has_input = cleaned_data.get('input') is not None
        has_generator = bool(cleaned_data.get('generator') or cleaned_data.get('generator_spec'))

        if kind in SOURCE_KINDS:
            if kind == 'type2_sweep' and cleaned_data.get('null'):
                has_generator = True
            if has_input and has_generator:
                self.add_error('input', 'Give either an input file or a generator, not both.')
            elif not has_input and not has_generator and 'input' not in self.errors:
                self.add_error('input', 'An input file or a generator is required.')
        if kind == 'purl_toy' and has_input:
            self.add_error('input', 'The toy comparison runs on a generator only.')
        if kind == 'type2_sweep' and has_input:
            self.add_error('input', 'The type-II sweep needs a generator.')

        if kind in SIZED_KINDS:
            for name in ('n_p', 'n_u'):
                if cleaned_data.get(name) is None and name not in self.errors:
                    self.add_error(name, 'This field is required for this experiment.')
        if kind == 'fig1_sweep':
            if not cleaned_data.get('n_grid') and 'n_grid' not in self.errors:
                self.add_error('n_grid', 'A non-empty grid is required.')
            fixed = 'n_u' if cleaned_data.get('axis', 'n_p') in ('', 'n_p') else 'n_p'
            if cleaned_data.get(fixed) is None and fixed not in self.errors:
                self.add_error(fixed, 'The fixed sample size is required for this sweep.')
        if kind == 'type2_sweep':
            for name in ('n_p_grid', 'n_u_grid'):
                if not cleaned_data.get(name) and name not in self.errors:
                    self.add_error(name, 'A non-empty grid is required.')
        if kind in ('puit', 'type2_sweep') and cleaned_data.get('level') is None and 'level' not in self.errors:
            self.add_error('level', 'This field is required for this experiment.')
        if kind == 'purl_toy':
            spec = None if self.errors else self._spec_dim(cleaned_data)
            if spec is not None and spec != 2:
                self.add_error('generator_spec', 'The toy comparison needs a 2-D generator.')
        return cleaned_data

    @staticmethod
    def _spec_dim(cleaned_data):
        spec = cleaned_data.get('generator_spec')
        return 2 if not spec else len(spec['mean_pos'])

    def error_text(self):
        return '; '.join(
            f"{field}: {' '.join(messages)}" for field, messages in self.errors.items()
        )

    def to_config(self):
        values = dict(self.cleaned_data)
        values['axis'] = values.get('axis') or 'n_p'
        values['architecture'] = values.get('architecture') or 'default'
        values['scheme'] = values.get('scheme') or 'pooled'
        for name in ('level', 'oracle_fraction'):
            if values.get(name) is None:
                values.pop(name, None)
        for name in ('validation_p', 'validation_u'):
            values[name] = values.get(name) or 0
        for name in ('n_grid', 'n_p_grid', 'n_u_grid'):
            values[name] = values.get(name) or ()
        return ExperimentConfig(**values)
