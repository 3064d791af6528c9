# -*- coding: utf-8 -*-
"""train.py

Training procedures for the mixture of autoencoders:

- pretrain:  one autoencoder on all data, k-means on its bottleneck, the gate
             trained to predict the k-means labels, and expert i trained on the
             points k-means put in cluster i.
- fit:       pretraining (unless disabled) followed by joint mini-batch training
             of the gate and all experts on the mixture loss.
- fit_reconstruction_only:
             the gate-free variant that trains each point only through its
             best-reconstructing expert.
- kmeans_equivalence_check:
             constant experts with hard routing reproduce Lloyd's algorithm.

All randomness is drawn from numpy Generators seeded with (seed, stream), so a
run is a deterministic function of its configuration.
"""
from collections import namedtuple

import numpy as np

from damic import ConfigError, TrainingError, message, warn
from damic.kmeans import Centroids, KmeansConfig, kmeans_fit, lloyd_step
from damic.metrics import evaluate as evaluate_labels
from damic.model import (
    AutoencoderBank,
    DamicModel,
    GateNetwork,
    assign_by_reconstruction,
    build_model,
    damic_loss,
    hard_assign,
    infer,
    loss_and_grads,
)
from damic.nn import (
    AdamState,
    adam_step,
    backward,
    bce_loss,
    build_autoencoder,
    calibrate_batchnorm,
    encode,
    forward,
    half_sq_distance,
    softmax_cross_entropy,
)
from damic.utils import minibatches, seeded_rng

MODES = ('full', 'pretrain_only', 'joint_only_random_init', 'reconstruction_only')

# Independent random streams per purpose
STREAM_GLOBAL_AE = 1
STREAM_GATE = 2
STREAM_EXPERTS = 3
STREAM_JOINT = 4
STREAM_NOISE = 5
STREAM_RANDOM_INIT = 6

InitReport = namedtuple(
    "InitReport",
    "ae_losses kmeans gate_accuracy empty_shards embedding")

EpochRecord = namedtuple("EpochRecord", "epoch loss active nmi ari acc")


class TrainConfig(object):

    """Hyper-parameters of one training run."""

    defaults = (
        ('k', 4),
        ('epochs', 50),
        ('batch_size', 256),
        ('seed', 0),
        ('patience', 5),
        ('min_rel_improvement', 1e-4),
        ('mode', 'full'),
        ('embedding_dim', 512),
        ('ae_hidden', (1024, 256)),
        ('ae_bottleneck', 0),
        ('gate_hidden', (512,)),
        ('pretrain_hidden', ()),
        ('pretrain_bottleneck', 0),
        ('pretrain_epochs', 50),
        ('gate_epochs', 20),
        ('lr', 1e-3),
        ('joint_lr', 1e-4),
        ('kmeans_restarts', 10),
        ('kmeans_max_iter', 300),
        ('kmeans_tol', 1e-6),
        ('init_noise', 1e-3),
        ('batchnorm', True),
        ('layerwise_pretrain', False),
        ('nmi_average', 'geometric'),
        ('progress', False),
    )

    def __init__(self, **kwargs):
        names = [name for name, _ in self.defaults]
        unknown = set(kwargs) - set(names)
        if unknown:
            raise ConfigError(
                "Unknown training parameter(s): " + ", ".join(sorted(unknown)))
        for name, default in self.defaults:
            setattr(self, name, kwargs.get(name, default))
        self.ae_hidden = tuple(self.ae_hidden)
        self.gate_hidden = tuple(self.gate_hidden)
        self.pretrain_hidden = tuple(self.pretrain_hidden)
        self.validate()

    def validate(self):
        if self.k < 1:
            raise ConfigError("k must be at least 1")
        if self.epochs < 1 or self.pretrain_epochs < 1 or self.gate_epochs < 1:
            raise ConfigError("epoch counts must be at least 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")
        if self.lr <= 0 or self.joint_lr < 0:
            raise ConfigError("lr must be positive and joint_lr non-negative")
        if self.mode not in MODES:
            raise ConfigError(
                "Unknown mode '{}'. Valid choices are {}"
                .format(self.mode, ", ".join(MODES)))
        if self.layerwise_pretrain:
            raise ConfigError(
                "Layer-wise pretraining is reserved but not available; "
                "set layerwise_pretrain = false")
        if self.embedding_dim < 1:
            raise ConfigError("embedding_dim must be at least 1")
        if self.nmi_average not in ('geometric', 'arithmetic'):
            raise ConfigError(
                "nmi_average must be 'geometric' or 'arithmetic'")

    def replace(self, **kwargs):
        values = self.as_dict()
        values.update(kwargs)
        return TrainConfig(**values)

    def as_dict(self):
        return dict((name, getattr(self, name)) for name, _ in self.defaults)

    @property
    def expert_bottleneck(self):
        return self.ae_bottleneck or self.k

    @property
    def joint_phase_lr(self):
        """Pretrained models are fine-tuned at joint_lr; random starts and
        joint_lr = 0 use lr."""
        if self.mode == 'joint_only_random_init' or not self.joint_lr:
            return self.lr
        return self.joint_lr

    @property
    def kmeans_config(self):
        return KmeansConfig(self.kmeans_max_iter, self.kmeans_tol,
                            self.kmeans_restarts, self.seed)

    def rng(self, stream):
        return seeded_rng(self.seed, stream)


class History(object):

    """Per-epoch record of a training run."""

    def __init__(self, mode):
        self.mode = mode
        self.records = []
        self.initial_loss = None
        self.final_loss = None
        self.stopped_early = False
        self.best_epoch = None
        self.diverged = False
        self.pseudo_labels = None
        self.init_report = None

    def append(self, record):
        self.records.append(record)

    @property
    def losses(self):
        return [r.loss for r in self.records]

    def __len__(self):
        return len(self.records)


class EarlyStopping(object):

    """Stop after `patience` epochs without a relative improvement of `min_rel`."""

    def __init__(self, patience, min_rel):
        self.patience = patience
        self.min_rel = min_rel
        self.best = np.inf
        self.wait = 0

    def update(self, loss):
        if loss < self.best - self.min_rel * abs(self.best) or not np.isfinite(self.best):
            self.best = loss
            self.wait = 0
        else:
            self.wait += 1
        return self.wait >= self.patience


def _check_finite(loss, what):
    if not np.isfinite(loss):
        raise TrainingError("Non-finite {} loss".format(what))


def train_autoencoder(net, X, epochs, batch_size, lr, rng, patience, min_rel):
    """Train an autoencoder to reconstruct X under binary cross-entropy.

    :returns: mean loss per epoch
    """
    opt = AdamState(net.parameters(), lr=lr)
    stopper = EarlyStopping(patience, min_rel)
    n = X.shape[0]
    losses = []
    for epoch in range(epochs):
        total = 0.0
        for idx in minibatches(n, batch_size, rng):
            batch = X[idx]
            Y, cache = forward(net, batch, 'train')
            loss, dY = bce_loss(Y, batch)
            _check_finite(loss, "reconstruction")
            _, grads = backward(net, cache, dY)
            adam_step(net.parameters(), grads, opt)
            total += loss * len(idx)
        losses.append(total / n)
        if stopper.update(losses[-1]):
            break
    return losses


def train_gate_classifier(gate, X, labels, epochs, batch_size, lr, rng):
    """Train the gate as a classifier of the given labels.

    :returns: the gate's accuracy on those labels after training
    """
    params = gate.parameters()
    opt = AdamState(params, lr=lr)
    n = X.shape[0]
    for epoch in range(epochs):
        for idx in minibatches(n, batch_size, rng):
            H, logits, _, cache = gate.forward(X[idx], 'train')
            loss, dlogits = softmax_cross_entropy(logits, labels[idx])
            _check_finite(loss, "gate")
            dH, head_grads = gate.head.backward(H, dlogits)
            _, body_grads = backward(gate.body, cache, dH)
            adam_step(params, body_grads + head_grads, opt)
    _, _, P, _ = gate.forward(X, 'eval')
    return float(np.mean(hard_assign(P) == labels))


def _perturbed_copy(net, noise, rng):
    clone = net.copy()
    for p in clone.parameters():
        p += noise * rng.standard_normal(p.shape)
    return clone


def pretrain(X, cfg, seed=None, train_gate=True):
    """Initialize a model from a single autoencoder and k-means pseudo-labels.

    :param seed: overrides cfg.seed
    :param train_gate: skip the gate classifier step when False
    :returns: (model, pseudo_labels, InitReport)
    """
    if seed is not None:
        cfg = cfg.replace(seed=seed)
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    k = cfg.k
    if n < k:
        raise ConfigError("Cannot find {} clusters in {} points".format(k, n))

    pretrain_hidden = cfg.pretrain_hidden or cfg.ae_hidden
    pretrain_bottleneck = cfg.pretrain_bottleneck or k
    rng = cfg.rng(STREAM_GLOBAL_AE)
    global_ae = build_autoencoder(d, pretrain_hidden, pretrain_bottleneck, rng,
                                  cfg.batchnorm)
    message("Pretraining a single autoencoder on {} points...".format(n))
    ae_losses = train_autoencoder(
        global_ae, X, cfg.pretrain_epochs, cfg.batch_size, cfg.lr, rng,
        cfg.patience, cfg.min_rel_improvement)

    embedding = encode(global_ae, X)
    km = kmeans_fit(embedding, k, cfg.kmeans_config)
    pseudo_labels = km.labels
    message("k-means on the bottleneck: inertia {:.6g}, {} empty cluster(s)"
            .format(km.inertia, km.empty_clusters))

    gate_rng = cfg.rng(STREAM_GATE)
    gate = GateNetwork.build(d, cfg.gate_hidden, cfg.embedding_dim, k,
                             gate_rng, cfg.batchnorm)
    gate_accuracy = None
    if train_gate:
        gate_accuracy = train_gate_classifier(
            gate, X, pseudo_labels, cfg.gate_epochs, cfg.batch_size, cfg.lr,
            gate_rng)
        message("Gate accuracy on pseudo-labels: {:.4f}".format(gate_accuracy))

    expert_rng = cfg.rng(STREAM_EXPERTS)
    noise_rng = cfg.rng(STREAM_NOISE)
    same_shape = (tuple(pretrain_hidden) == cfg.ae_hidden and
                  pretrain_bottleneck == cfg.expert_bottleneck)
    experts = []
    empty_shards = []
    for i in range(k):
        shard = X[pseudo_labels == i]
        if len(shard) == 0:
            empty_shards.append(i)
            warn("Cluster {} is empty after k-means; initializing its expert "
                 "from the global autoencoder.".format(i))
            if same_shape:
                clone = _perturbed_copy(global_ae, cfg.init_noise, noise_rng)
                experts.append(calibrate_batchnorm(clone, X))
                continue
            shard = X
        expert = build_autoencoder(d, cfg.ae_hidden, cfg.expert_bottleneck,
                                   expert_rng, cfg.batchnorm)
        train_autoencoder(expert, shard, cfg.pretrain_epochs, cfg.batch_size,
                          cfg.lr, expert_rng, cfg.patience,
                          cfg.min_rel_improvement)
        experts.append(calibrate_batchnorm(expert, shard))

    model = DamicModel(gate, AutoencoderBank(experts))
    report = InitReport(ae_losses, km, gate_accuracy, empty_shards, embedding)
    return model, pseudo_labels, report


def train_step(model, batch, opt_state):
    """One Adam update of every model parameter on the batch mixture loss.

    The gate normalizes with batch statistics; experts keep the statistics of
    the points they were pretrained on.

    :returns: the batch-mean loss before the update
    """
    loss, grads = loss_and_grads(model, batch, 'train', expert_mode='frozen')
    _check_finite(loss, "mixture")
    adam_step(model.parameters(), grads, opt_state)
    return loss


def mean_loss(model, X, chunk=1024):
    """Mean per-sample mixture loss in eval mode."""
    inference = infer(model, X, chunk)
    return damic_loss(inference.P, inference.D) / X.shape[0]


def _epoch_record(epoch, loss, active, labels, pred, average):
    if labels is None:
        return EpochRecord(epoch, loss, active, None, None, None)
    scores = evaluate_labels(labels, pred, average)
    return EpochRecord(epoch, loss, active, scores['nmi'], scores['ari'],
                       scores['acc'])


def _report(record, total):
    line = "Epoch {:>3}/{}: loss {:.6f}, {} active cluster(s)".format(
        record.epoch, total, record.loss, record.active)
    if record.nmi is not None:
        line += ", NMI {:.4f} ARI {:.4f} ACC {:.4f}".format(
            record.nmi, record.ari, record.acc)
    message(line)


def _snapshot(arrays):
    return [a.copy() for a in arrays]


def _restore(arrays, snapshot):
    for a, saved in zip(arrays, snapshot):
        a[...] = saved


def _joint_training(model, X, cfg, history, labels=None):
    opt = AdamState(model.parameters(), lr=cfg.joint_phase_lr)
    rng = cfg.rng(STREAM_JOINT)
    stopper = EarlyStopping(cfg.patience, cfg.min_rel_improvement)
    state = model.parameters() + model.buffers()
    best_loss, best = np.inf, None
    n = X.shape[0]
    history.initial_loss = mean_loss(model, X)
    for epoch in range(1, cfg.epochs + 1):
        total = 0.0
        for idx in minibatches(n, cfg.batch_size, rng, cfg.progress,
                               "Epoch {}".format(epoch)):
            total += train_step(model, X[idx], opt) * len(idx)
        loss = total / n
        if loss < best_loss:
            best_loss, best = loss, _snapshot(state)
            history.best_epoch = epoch
        pred = hard_assign(infer(model, X).P)
        record = _epoch_record(epoch, loss, len(np.unique(pred)), labels, pred,
                               cfg.nmi_average)
        history.append(record)
        _report(record, cfg.epochs)
        if stopper.update(loss):
            history.stopped_early = True
            message("Stopping early: no improvement for {} epochs"
                    .format(cfg.patience))
            break
    if best is not None and history.best_epoch != len(history):
        message("Restoring the parameters of epoch {}".format(history.best_epoch))
        _restore(state, best)
    history.final_loss = mean_loss(model, X)
    return model


def _reconstruction_training(bank, X, cfg, history, labels=None):
    params = bank.parameters()
    opt = AdamState(params, lr=cfg.joint_phase_lr)
    rng = cfg.rng(STREAM_JOINT)
    stopper = EarlyStopping(cfg.patience, cfg.min_rel_improvement)
    n = X.shape[0]
    for epoch in range(1, cfg.epochs + 1):
        total = 0.0
        for idx in minibatches(n, cfg.batch_size, rng, cfg.progress,
                               "Epoch {}".format(epoch)):
            batch = X[idx]
            passes = [forward(e, batch, 'frozen') for e in bank]
            D = np.column_stack([half_sq_distance(batch, Y) for Y, _ in passes])
            winner = assign_by_reconstruction(D)
            loss = float(np.mean(D[np.arange(len(idx)), winner]))
            _check_finite(loss, "reconstruction")
            grads = []
            for i, (expert, (Y, cache)) in enumerate(zip(bank, passes)):
                mask = (winner == i)[:, np.newaxis]
                dY = mask * (Y - batch) / len(idx)
                grads.extend(backward(expert, cache, dY)[1])
            adam_step(params, grads, opt)
            total += loss * len(idx)
        loss = total / n
        pred = assign_by_reconstruction(_bank_errors(bank, X))
        record = _epoch_record(epoch, loss, len(np.unique(pred)), labels, pred,
                               cfg.nmi_average)
        history.append(record)
        _report(record, cfg.epochs)
        if stopper.update(loss):
            history.stopped_early = True
            break
    D = _bank_errors(bank, X)
    history.final_loss = float(np.mean(D.min(axis=1)))
    return assign_by_reconstruction(D)


def _bank_errors(bank, X):
    return np.column_stack(
        [half_sq_distance(X, forward(e, X, 'eval')[0]) for e in bank])


def fit(X, cfg, labels=None, pretrained=None):
    """Train a model according to cfg.mode.

    :param labels: optional ground truth, only used to log per-epoch metrics
    :param pretrained: a (model, pseudo_labels, report) triple from `pretrain`
    to start from instead of pretraining again; it is not modified
    :returns: (model, history)
    """
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] < cfg.k:
        raise ConfigError(
            "Cannot find {} clusters in {} points".format(cfg.k, X.shape[0]))
    history = History(cfg.mode)
    try:
        if cfg.mode == 'joint_only_random_init':
            model = build_model(X.shape[1], cfg.k, cfg.rng(STREAM_RANDOM_INIT),
                                cfg.ae_hidden, cfg.expert_bottleneck,
                                cfg.gate_hidden, cfg.embedding_dim,
                                cfg.batchnorm)
            for expert in model.bank:
                calibrate_batchnorm(expert, X)
        else:
            if pretrained is None:
                pretrained = pretrain(X, cfg)
            model, pseudo_labels, report = pretrained
            model = _clone(model)
            history.pseudo_labels = pseudo_labels
            history.init_report = report

        if cfg.mode == 'pretrain_only':
            history.initial_loss = history.final_loss = mean_loss(model, X)
        elif cfg.mode == 'reconstruction_only':
            _reconstruction_training(model.bank, X, cfg, history, labels)
        else:
            _joint_training(model, X, cfg, history, labels)
    except TrainingError as e:
        history.diverged = True
        raise TrainingError(str(e), history)
    return model, history


def fit_reconstruction_only(X, cfg, labels=None):
    """Train only the experts on sum_t min_i d(x_t, f_i(x_t)).

    Starts from pretraining steps without the gate. Experts that end up with
    no points are reported, not repaired.

    :returns: (bank, labels, history)
    """
    X = np.asarray(X, dtype=np.float64)
    model, pseudo_labels, report = pretrain(X, cfg, train_gate=False)
    history = History('reconstruction_only')
    history.pseudo_labels = pseudo_labels
    history.init_report = report
    try:
        assigned = _reconstruction_training(model.bank, X, cfg, history, labels)
    except TrainingError as e:
        history.diverged = True
        raise TrainingError(str(e), history)
    active = len(np.unique(assigned))
    if active < cfg.k:
        warn("{} of {} experts receive no points".format(cfg.k - active, cfg.k))
    return model.bank, assigned, history


def _clone(model):
    return DamicModel(
        GateNetwork(model.gate.body.copy(), _copy_affine(model.gate.head)),
        AutoencoderBank(e.copy() for e in model.bank))


def _copy_affine(layer):
    return type(layer)(layer.weight.copy(), layer.bias.copy())


class ConstantExpert(object):

    """An 'autoencoder' that reconstructs every input as the same vector."""

    def __init__(self, mu):
        self.mu = np.asarray(mu, dtype=np.float64)

    def reconstruct(self, X):
        return np.broadcast_to(self.mu, X.shape)


def kmeans_equivalence_check(X, C0, steps):
    """Check that constant experts with minimum-error routing are Lloyd's algorithm.

    Alternates routing each point to the expert with the smallest
    reconstruction error and resetting each constant to its cluster mean, and
    compares labels and centroids with `lloyd_step` bit for bit.
    """
    X = np.asarray(X, dtype=np.float64)
    experts = [ConstantExpert(mu) for mu in C0.means]
    C = Centroids(C0.means)
    for _ in range(steps):
        D = np.column_stack(
            [half_sq_distance(X, e.reconstruct(X)) for e in experts])
        labels = assign_by_reconstruction(D)
        means = [e.mu for e in experts]
        for i in range(len(experts)):
            mask = labels == i
            if mask.any():
                means[i] = X[mask].mean(axis=0)
        experts = [ConstantExpert(mu) for mu in means]

        ref_labels, C, _ = lloyd_step(X, C)
        if not np.array_equal(labels, ref_labels):
            return False
        if not np.array_equal(np.vstack(means), C.means):
            return False
    return True
