from collections import OrderedDict

import numpy as np

from damic import ConfigError, DEFAULT_MODEL_FNAME, message
from damic.commands._command import Command
from damic.container import load_model
from damic.export import save_probe, write_metrics
from damic.metrics import agreement, evaluate
from damic.model import (
    assign_by_reconstruction,
    damic_loss,
    hard_assign,
    infer,
    probe_experts,
)
from damic.utils import fmtkv


class Evaluate(Command):

    """Score the gate's and the experts' clusterings of a labelled dataset.

    Also probes every expert with an all-ones input.
    """

    writes_output = False

    def run(self):
        dataset = self.cfg.load_dataset()
        if not dataset.has_labels:
            raise ConfigError(
                "evaluate needs ground-truth labels; set labels_path "
                "(or has_labels for CSV input)")
        model_path = (self.model or self.cfg.resolve(self.cfg.model_path) or
                      self.output(DEFAULT_MODEL_FNAME))
        model, _ = load_model(model_path)
        message("Loaded {} from {}".format(model, model_path))
        record = evaluation_record(model, dataset, self.cfg.nmi_average)

        self.prepare_output(echo_config=False)
        write_metrics(self.output('evaluation.txt'), record)
        save_probe(self.output('expert_probe.csv'),
                   probe_experts(model, np.ones(model.d)))
        for key, value in record.items():
            message(fmtkv(key, value))


def evaluation_record(model, dataset, average='geometric'):
    """Metrics of both assignment rules and how often they agree."""
    inference = infer(model, dataset.X)
    by_gate = hard_assign(inference.P)
    by_reconstruction = assign_by_reconstruction(inference.D)
    record = OrderedDict()
    for prefix, labels in (('gate', by_gate), ('reconstruction', by_reconstruction)):
        for key, value in evaluate(dataset.labels, labels, average).items():
            record['{}_{}'.format(prefix, key)] = value
    record['agreement'] = agreement(by_gate, by_reconstruction)
    record['mixture_loss'] = damic_loss(inference.P, inference.D) / max(dataset.n, 1)
    return record
