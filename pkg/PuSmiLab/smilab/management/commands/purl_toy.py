from smilab.experiments import PROJECTION_HEADER, purl_toy
from smilab.management.base import ExperimentCommand
from smilab.purl import PurlConfig


class Command(ExperimentCommand):
    help = 'Compares the linear PURL direction with the top PCA direction on a 2-D Gaussian spec'

    kind = 'purl_toy'

    def run(self, config):
        overrides = {'epochs': config.epochs}
        if config.patience is not None:
            overrides['patience'] = config.patience
        if config.w_steps is not None:
            overrides['w_steps_per_v_step'] = config.w_steps
        sgd = config.sgd()
        if sgd is not None:
            overrides.update(sgd_w=sgd, sgd_v=sgd)
        report = purl_toy(
            config.gaussian_spec(), config.n_p, config.n_u, config.n_eval,
            PurlConfig.toy(**overrides), config.estimator(), seed=config.seed,
        )
        self.emit_json(config, 'purl_toy.json', report)
        self.emit_csv(config, 'purl_toy_projections.csv', PROJECTION_HEADER, report.projections)
