from collections import OrderedDict

import numpy as np

from damic import DEFAULT_MODEL_FNAME, TrainingError, message, warn
from damic.commands._command import Command
from damic.container import save_model
from damic.export import save_assignments, save_history, write_metrics
from damic.metrics import evaluate
from damic.model import assign_by_reconstruction, hard_assign, infer
from damic.train import fit
from damic.utils import fmtkv


class Train(Command):

    def run(self):
        dataset = self.cfg.load_dataset()
        tcfg = self.cfg.to_train_config()
        self.prepare_output()
        try:
            model, history = fit(dataset.X, tcfg, dataset.labels)
        except TrainingError as e:
            if e.history is not None:
                save_history(self.output('history.csv'), e.history)
                warn("Training diverged; partial history written to " +
                     self.output('history.csv'))
            raise

        save_model(self.output(DEFAULT_MODEL_FNAME), model, tcfg.as_dict())
        save_history(self.output('history.csv'), history)
        inference = infer(model, dataset.X)
        if tcfg.mode == 'pretrain_only':
            labels = history.pseudo_labels
        elif tcfg.mode == 'reconstruction_only':
            labels = assign_by_reconstruction(inference.D)
        else:
            labels = hard_assign(inference.P)
        save_assignments(self.output('assignments.csv'), labels, inference.P,
                         inference.H)
        record = train_record(tcfg, dataset, history, labels)
        write_metrics(self.output('metrics.txt'), record)
        for key, value in record.items():
            message(fmtkv(key, value))


def train_record(tcfg, dataset, history, labels):
    record = OrderedDict()
    record['mode'] = tcfg.mode
    record['seed'] = tcfg.seed
    record['k'] = tcfg.k
    record['n'] = dataset.n
    record['epochs'] = len(history)
    record['stopped_early'] = str(history.stopped_early).lower()
    if history.initial_loss is not None:
        record['initial_loss'] = history.initial_loss
    record['final_loss'] = history.final_loss
    record['active_clusters'] = len(np.unique(labels))
    if dataset.has_labels:
        record.update(evaluate(dataset.labels, labels, tcfg.nmi_average))
    return record
