from smilab.management.base import ExperimentCommand
from smilab.pusmi import estimate_smi
from smilab.utils import spawn_seeds


class Command(ExperimentCommand):
    help = 'Estimates PU-SMI with cross-validated bandwidth and regularization'

    kind = 'estimate'
    writes_by_default = False

    def run(self, config):
        data_seed, fit_seed = spawn_seeds(config.seed, 2)
        data = self.pu_data(config, data_seed)
        estimate, model, report = estimate_smi(data, config.class_prior, config.estimator(fit_seed))
        self.emit_json(config, 'estimate.json', {
            'estimate': estimate,
            'fit_report': report,
            'dataset': {'n_p': data.n_p, 'n_u': data.n_u, 'dim': data.dim},
            'basis_size': model.basis.size,
        })
