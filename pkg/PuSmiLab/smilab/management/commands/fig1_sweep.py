from smilab.exceptions import PreconditionError
from smilab.experiments import SWEEP_HEADER, GaussianSource, LabeledSource, fig1_sweep, loglog_slope
from smilab.management.base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Squared error of PU-SMI against the true SMI as nP or nU grows'

    kind = 'fig1_sweep'
    extra_flags = ('axis',)

    def add_experiment_arguments(self, parser):
        parser.add_argument('--axis', choices=['n_p', 'n_u'], help='Sample size to vary')

    def run(self, config):
        if config.input is not None:
            source = LabeledSource(
                self.load_file(config), config.class_prior, config.oracle_fraction,
                config.estimator(), seed=config.seed,
            )
        else:
            source = GaussianSource(config.gaussian_spec())
        fixed = config.n_u if config.axis == 'n_p' else config.n_p
        truth, rows = fig1_sweep(
            source, config.axis, config.n_grid, fixed, trials=config.trials,
            config=config.estimator(), seed=config.seed, threads=config.threads,
        )
        self.emit_csv(config, 'fig1.csv', SWEEP_HEADER, [row.to_row() for row in rows])
        self.stdout.write(f"true SMI {truth:.6g}")
        try:
            self.stdout.write(f"log-log slope {loglog_slope(rows):.3f}")
        except PreconditionError:
            pass
