from smilab.data import split_validation
from smilab.management.base import ExperimentCommand
from smilab.purl import PurlConfig, train_purl, transform
from smilab.utils import spawn_seeds


class Command(ExperimentCommand):
    help = 'Trains a PURL representation and ratio head on PU data'

    kind = 'purl_train'
    extra_flags = ('architecture',)

    def add_experiment_arguments(self, parser):
        parser.add_argument('--architecture', choices=['default', 'text'], help='d-60-20-1 or d-30-10-1')

    def run(self, config):
        data_seed, split_seed, train_seed = spawn_seeds(config.seed, 3)
        data = self.pu_data(config, data_seed)
        validation = None
        if config.validation_p > 0 and config.validation_u > 0:
            data, validation = split_validation(data, config.validation_p, config.validation_u, split_seed)
        build = PurlConfig.text if config.architecture == 'text' else PurlConfig.default
        sgd = config.sgd()
        purl_config = build(
            data.dim, sgd_w=sgd, sgd_v=sgd, w_steps_per_v_step=config.w_steps,
            epochs=config.epochs, patience=config.patience, validation=validation,
        )
        result = train_purl(data, purl_config, train_seed)
        self.emit_json(config, 'purl_params.json', result, echo=False)
        self.emit_csv(config, 'purl_history.csv', ('iteration', 'train_j', 'validation_j'), result.history_rows())

        m = result.v_spec.output_size
        rows = [('positive',) + tuple(z) for z in transform(result, data.positives)]
        rows += [('unlabeled',) + tuple(z) for z in transform(result, data.unlabeled)]
        self.emit_csv(config, 'purl_transformed.csv', ('set',) + tuple(f'z{i + 1}' for i in range(m)), rows)
