from collections import OrderedDict

from damic import DEFAULT_MODEL_FNAME, message
from damic.commands._command import Command
from damic.container import save_model
from damic.export import save_assignments, write_metrics
from damic.metrics import evaluate
from damic.model import infer
from damic.train import pretrain


class Pretrain(Command):

    """Pretraining on its own: the saved model can seed later runs."""

    def run(self):
        dataset = self.cfg.load_dataset()
        tcfg = self.cfg.to_train_config()
        self.prepare_output()
        model, pseudo_labels, report = pretrain(dataset.X, tcfg)
        save_model(self.output(DEFAULT_MODEL_FNAME), model, tcfg.as_dict())
        inference = infer(model, dataset.X)
        save_assignments(self.output('assignments.csv'), pseudo_labels,
                         inference.P, inference.H)
        record = pretrain_record(tcfg, report)
        if dataset.has_labels:
            for key, value in evaluate(dataset.labels, pseudo_labels,
                                       tcfg.nmi_average).items():
                record[key] = value
        write_metrics(self.output('metrics.txt'), record)
        message("Pretrained model written to " + self.output(DEFAULT_MODEL_FNAME))


def pretrain_record(tcfg, report):
    record = OrderedDict()
    record['mode'] = 'pretrain'
    record['seed'] = tcfg.seed
    record['k'] = tcfg.k
    record['ae_final_loss'] = float(report.ae_losses[-1])
    record['kmeans_inertia'] = float(report.kmeans.inertia)
    record['empty_shards'] = len(report.empty_shards)
    if report.gate_accuracy is not None:
        record['gate_accuracy'] = report.gate_accuracy
    return record
