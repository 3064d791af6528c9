# -*- coding: utf-8 -*-
"""
`damic ablation` trains the same dataset four ways for every seed:

    full                    pretraining followed by joint training
    pretrain_only           the k-means labels of the pretrained embedding
    joint_only_random_init  joint training from a random initialization
    kmeans                  k-means on the raw data

Each outcome is stored in a ledger (ledger.db) in the output directory, and
the per-method means are reported as a table.
"""
import click
import numpy as np

from damic import ConfigError, DEFAULT_LEDGER_FNAME, __version__, message
import damic.workspace as workspace
from damic.commands._command import Command
from damic.kmeans import kmeans_fit
from damic.metrics import evaluate
from damic.model import hard_assign, infer
from damic.train import fit, mean_loss, pretrain

METHODS = ('full', 'pretrain_only', 'joint_only_random_init', 'kmeans')


def run_methods(X, tcfg):
    """Yield (method, labels, final loss) for one seed, sharing the pretraining."""
    pretrained = pretrain(X, tcfg)
    model, history = fit(X, tcfg.replace(mode='full'), pretrained=pretrained)
    yield 'full', hard_assign(infer(model, X).P), history.final_loss

    yield 'pretrain_only', pretrained[1], mean_loss(pretrained[0], X)

    model, history = fit(X, tcfg.replace(mode='joint_only_random_init'))
    yield 'joint_only_random_init', hard_assign(infer(model, X).P), history.final_loss

    km = kmeans_fit(X, tcfg.k, tcfg.kmeans_config)
    yield 'kmeans', km.labels, km.inertia / X.shape[0]


def ablation_table(averages, methods=METHODS):
    """One row per method: mean NMI, ARI and ACC and the total empty clusters."""
    lines = ["{:<24}{:>8}{:>8}{:>8}{:>7}".format("method", "NMI", "ARI", "ACC", "empty")]
    for method in methods:
        if method not in averages:
            continue
        nmi, ari, acc, empty, _ = averages[method]
        lines.append("{:<24}{:>8.4f}{:>8.4f}{:>8.4f}{:>7d}".format(
            method, nmi, ari, acc, int(empty)))
    return "\n".join(lines) + "\n"


class Ablation(Command):

    def run(self):
        dataset = self.cfg.load_dataset()
        if not dataset.has_labels:
            raise ConfigError("ablation needs a labelled dataset")
        base = self.cfg.to_train_config()
        self.prepare_output()

        with workspace.connection(self.output(DEFAULT_LEDGER_FNAME)) as ledger:
            ledger.create_tables(__version__)
            ledger.check_version(__version__)
            for seed in self.cfg.ablation_seeds:
                message(click.style("Seed {}".format(seed), fg='green'))
                tcfg = base.replace(seed=seed)
                for method, labels, loss in run_methods(dataset.X, tcfg):
                    scores = evaluate(dataset.labels, labels, base.nmi_average)
                    empty = base.k - len(np.unique(labels))
                    ledger.record(method, seed, scores, empty, loss)
                    message("  {:<24} NMI {:.4f}".format(method, scores['nmi']))
            table = ablation_table(ledger.averages())

        with open(self.output('ablation.txt'), 'w') as out:
            out.write(table)
        message(table)
