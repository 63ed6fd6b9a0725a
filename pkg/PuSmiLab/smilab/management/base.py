import json
import logging
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from sklearn.preprocessing import MinMaxScaler

from smilab import __version__
from smilab.data import LabeledDataset, load_labeled, make_pu, sample_gaussian_pu
from smilab.exceptions import ConfigError, SmiLabError
from smilab.forms import KIND_DEFAULTS, ExperimentConfigForm, settings_defaults
from smilab.utils import dumps, write_csv, write_json

logger = logging.getLogger(__name__)

# Flag name on the command line -> config key.
COMMON_FLAGS = ('seed', 'out', 'threads', 'prior', 'input')


class ExperimentCommand(BaseCommand):
    """
    Shared plumbing for the experiment commands.

    Subclasses set `kind`, add their own flags in add_experiment_arguments and
    implement run(config). Library errors become CommandError with exit code
    2 (configuration or precondition) or 3 (numeric failure).
    """

    kind = None
    extra_flags = ()
    writes_by_default = True
    requires_system_checks = []

    def add_arguments(self, parser):
        parser.add_argument('--config', help='JSON file with experiment settings')
        parser.add_argument('--seed', type=int, help='Master seed')
        parser.add_argument('--out', help='Output directory')
        parser.add_argument('--threads', type=int, help='Worker threads for independent trials')
        parser.add_argument('--prior', type=float, help='Class prior theta_P')
        parser.add_argument('--input', help='Labeled data file (LIBSVM or .csv)')
        self.add_experiment_arguments(parser)

    def add_experiment_arguments(self, parser):
        pass

    def handle(self, *args, **options):
        try:
            config = self.load_config(options)
            self.run(config)
        except SmiLabError as exc:
            logger.error("%s failed: %s", self.kind, exc)
            raise CommandError(str(exc), returncode=exc.exit_code)
        except OSError as exc:
            raise CommandError(f"I/O error: {exc}", returncode=2)

    def load_config(self, options):
        data = settings_defaults()
        if self.writes_by_default:
            data['out'] = str(settings.SMILAB['OUTPUT_DIR'])
        data.update(KIND_DEFAULTS[self.kind])
        if options.get('config'):
            data.update(self.read_config_file(options['config']))
        for key in COMMON_FLAGS + tuple(self.extra_flags):
            if options.get(key) is not None:
                data[key] = options[key]
        data['kind'] = self.kind
        form = ExperimentConfigForm(data)
        if not form.is_valid():
            raise ConfigError(form.error_text())
        return form.to_config()

    @staticmethod
    def read_config_file(path):
        try:
            payload = json.loads(Path(path).read_text(encoding='utf-8'))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}")
        if not isinstance(payload, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        return payload

    def run(self, config):
        raise NotImplementedError

    def load_file(self, config):
        """Labeled data from --input, min-max scaled when the config asks for it."""
        data = load_labeled(config.input)
        logger.info("loaded %s: %d rows, %d features", config.input, data.n, data.dim)
        if config.scale:
            data = LabeledDataset(MinMaxScaler().fit_transform(data.features), data.labels)
        return data

    def pu_data(self, config, seed):
        """PU sample of the configured sizes from --input or from the generator."""
        if config.input is not None:
            return make_pu(self.load_file(config), config.n_p, config.n_u, config.sampling_prior, seed)
        return sample_gaussian_pu(config.gaussian_spec(), config.n_p, config.n_u, seed)

    def metadata(self, config):
        return {'config': config.to_dict(), 'version': __version__}

    def emit_json(self, config, name, payload, echo=True):
        """JSON on stdout, plus a file with sidecar when an output directory is set."""
        if echo:
            self.stdout.write(dumps(payload))
        if config.out is not None:
            path = write_json(config.out / name, payload, self.metadata(config))
            self.stderr.write(self.style.SUCCESS(f"Wrote {path}"))

    def emit_csv(self, config, name, header, rows):
        if config.out is None:
            raise ConfigError(f"{self.kind} writes CSV files and needs --out")
        path = write_csv(config.out / name, header, rows, self.metadata(config))
        self.stdout.write(self.style.SUCCESS(f"Wrote {path}"))
        return path
