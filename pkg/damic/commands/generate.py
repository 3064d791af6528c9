import numpy as np

from damic import ConfigError, DEFAULT_DATASET_FNAME, message
from damic.commands._command import Command
from damic.data import gen_synthetic, save_dataset, save_dense_csv
from damic.utils import fmtkv


class Generate(Command):

    def run(self):
        if self.cfg.source != 'synthetic':
            raise ConfigError(
                "generate only makes synthetic data (source = {})"
                .format(self.cfg.source))
        spec = self.cfg.synthetic_spec()
        dataset, latent = gen_synthetic(spec)
        self.prepare_output()
        save_dataset(self.output(DEFAULT_DATASET_FNAME), dataset)
        save_dense_csv(self.output('dataset.csv'), dataset)
        np.savetxt(self.output('latent.csv'), latent, delimiter=',', fmt='%.17g')
        with open(self.output('labels.txt'), 'w') as out:
            out.writelines("{}\n".format(int(l)) for l in dataset.labels)
        message(fmtkv("Points", dataset.n))
        message(fmtkv("Dimension", dataset.d))
        message(fmtkv("Clusters", len(spec.means)))
        message("Dataset written to " + self.output(DEFAULT_DATASET_FNAME))
