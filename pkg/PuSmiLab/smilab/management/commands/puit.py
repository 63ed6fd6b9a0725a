from smilab.management.base import ExperimentCommand
from smilab.puit import permutation_test
from smilab.utils import spawn_seeds


class Command(ExperimentCommand):
    help = 'Runs the PU independence test against permuted pseudo-PU sets'

    kind = 'puit'
    extra_flags = ('recv_per_round', 'scheme')
    writes_by_default = False

    def add_experiment_arguments(self, parser):
        parser.add_argument(
            '--recv-per-round', action='store_true', default=None, dest='recv_per_round',
            help='Re-run cross-validation in every permutation round',
        )
        parser.add_argument(
            '--scheme', choices=('pooled', 'relabel'),
            help='How pseudo-PU sets are drawn (default pooled)',
        )

    def run(self, config):
        data_seed, test_seed = spawn_seeds(config.seed, 2)
        data = self.pu_data(config, data_seed)
        result = permutation_test(
            data, config.class_prior, config.b_count, config.estimator(),
            seed=test_seed, recv_per_round=config.recv_per_round, threads=config.threads,
            scheme=config.scheme,
        )
        payload = result.to_dict()
        payload['level'] = config.level
        payload['scheme'] = config.scheme
        payload['rejected'] = result.rejects(config.level)
        self.emit_json(config, 'puit.json', payload)
