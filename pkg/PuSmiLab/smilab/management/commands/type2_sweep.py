from functools import partial

from smilab.data import sample_gaussian_pu
from smilab.management.base import ExperimentCommand
from smilab.puit import TYPE2_HEADER, type2_experiment


class Command(ExperimentCommand):
    help = 'Tabulates the type-II error frequency of the independence test over nP x nU'

    kind = 'type2_sweep'
    extra_flags = ('null', 'recv_per_round', 'scheme')

    def add_experiment_arguments(self, parser):
        parser.add_argument(
            '--null', action='store_true', default=None,
            help='Use a generator with equal class means; the table then holds acceptance frequencies under the null',
        )
        parser.add_argument('--recv-per-round', action='store_true', default=None, dest='recv_per_round')
        parser.add_argument('--scheme', choices=('pooled', 'relabel'))

    def run(self, config):
        spec = config.gaussian_spec()
        rows = type2_experiment(
            partial(sample_gaussian_pu, spec), config.class_prior,
            config.n_p_grid, config.n_u_grid, level=config.level, trials=config.trials,
            b_count=config.b_count, config=config.estimator(), seed=config.seed,
            recv_per_round=config.recv_per_round, threads=config.threads,
            scheme=config.scheme,
        )
        self.emit_csv(config, 'type2.csv', TYPE2_HEADER, [row.to_row() for row in rows])
