import os

import numpy as np
import pytest

from damic import ConfigError, TrainingError
from damic.config import RunConfig
from damic.kmeans import Centroids, kmeans_fit
from damic.metrics import agreement, nmi
from damic.model import assign_by_reconstruction, hard_assign, infer
from damic.nn import AdamState
from damic.train import (
    EarlyStopping,
    TrainConfig,
    fit,
    fit_reconstruction_only,
    kmeans_equivalence_check,
    mean_loss,
    pretrain,
    train_step,
)


class TestTrainConfig(object):

    def test_defaults(self):
        cfg = TrainConfig()
        assert cfg.k == 4
        assert cfg.batch_size == 256
        assert cfg.expert_bottleneck == 4

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            TrainConfig(learning_rate=0.1)

    @pytest.mark.parametrize('bad', [
        dict(k=0),
        dict(epochs=0),
        dict(batch_size=0),
        dict(mode='sometimes'),
        dict(nmi_average='harmonic'),
        dict(layerwise_pretrain=True),
        dict(lr=0.0),
        dict(joint_lr=-1e-4),
    ])
    def test_invalid(self, bad):
        with pytest.raises(ConfigError):
            TrainConfig(**bad)

    @pytest.mark.parametrize('changes, expected', [
        (dict(), 1e-4),
        (dict(joint_lr=0.0), 1e-3),
        (dict(mode='joint_only_random_init'), 1e-3),
    ])
    def test_joint_phase_lr(self, changes, expected):
        assert TrainConfig(**changes).joint_phase_lr == expected

    def test_replace(self):
        cfg = TrainConfig(k=3).replace(seed=9)
        assert (cfg.k, cfg.seed) == (3, 9)


def test_early_stopping():
    stopper = EarlyStopping(patience=2, min_rel=0.1)
    assert not stopper.update(10.0)
    assert not stopper.update(9.5)
    assert stopper.update(9.4)


class TestPretrain(object):

    def test_assembles_model(self, blobs, fast_config):
        model, pseudo, report = pretrain(blobs.X, fast_config)
        assert model.k == 2
        assert model.d == blobs.d
        assert pseudo.shape == (blobs.n,)
        assert report.embedding.shape == (blobs.n, 2)
        assert 0.0 <= report.gate_accuracy <= 1.0

    def test_pseudo_labels_find_blobs(self, blobs, fast_config):
        _, pseudo, _ = pretrain(blobs.X, fast_config.replace(pretrain_epochs=20))
        assert nmi(blobs.labels, pseudo) > 0.9

    def test_too_few_points(self, blobs, fast_config):
        with pytest.raises(ConfigError):
            pretrain(blobs.X[:1], fast_config)


class TestFit(object):

    def test_full(self, blobs, fast_config):
        model, history = fit(blobs.X, fast_config, blobs.labels)
        assert 1 <= len(history) <= fast_config.epochs
        assert np.isfinite(history.final_loss)
        assert history.records[0].nmi is not None
        assert history.pseudo_labels is not None

    def test_deterministic(self, blobs, fast_config):
        _, a = fit(blobs.X, fast_config)
        _, b = fit(blobs.X, fast_config)
        assert a.losses == b.losses
        assert a.final_loss == b.final_loss

    def test_pretrain_only_does_not_train(self, blobs, fast_config):
        cfg = fast_config.replace(mode='pretrain_only')
        _, history = fit(blobs.X, cfg)
        assert len(history) == 0
        assert history.initial_loss == history.final_loss

    def test_reuses_pretraining_without_modifying_it(self, blobs, fast_config):
        pretrained = pretrain(blobs.X, fast_config)
        before = [p.copy() for p in pretrained[0].parameters()]
        fit(blobs.X, fast_config, pretrained=pretrained)
        after = pretrained[0].parameters()
        assert all(np.array_equal(a, b) for a, b in zip(before, after))

    def test_joint_step_keeps_expert_statistics(self, blobs, fast_config):
        model, _, _ = pretrain(blobs.X, fast_config)
        experts = [b.copy() for e in model.bank for b in e.buffers()]
        gate = [b.copy() for b in model.gate.body.buffers()]
        train_step(model, blobs.X[:16], AdamState(model.parameters(), lr=1e-4))
        after = [b for e in model.bank for b in e.buffers()]
        assert all(np.array_equal(a, b) for a, b in zip(after, experts))
        assert not all(np.array_equal(a, b)
                       for a, b in zip(model.gate.body.buffers(), gate))

    def test_keeps_best_epoch(self, blobs, fast_config):
        model, history = fit(blobs.X, fast_config.replace(epochs=6, patience=10))
        assert history.best_epoch == int(np.argmin(history.losses)) + 1
        assert history.final_loss == pytest.approx(mean_loss(model, blobs.X))

    def test_random_init_has_no_pseudo_labels(self, blobs, fast_config):
        model, history = fit(blobs.X, fast_config.replace(mode='joint_only_random_init'))
        assert history.pseudo_labels is None
        assert infer(model, blobs.X).P.shape == (blobs.n, 2)

    def test_divergence_carries_history(self, blobs, fast_config):
        cfg = fast_config.replace(mode='joint_only_random_init', lr=1e300)
        with np.errstate(all='ignore'):
            with pytest.raises(TrainingError) as info:
                fit(blobs.X, cfg)
        assert info.value.history is not None
        assert info.value.history.diverged
        assert info.value.exit_code == 4


class TestReconstructionOnly(object):

    def test_labels_follow_best_expert(self, blobs, fast_config):
        bank, labels, history = fit_reconstruction_only(blobs.X, fast_config)
        assert len(bank) == 2
        assert labels.shape == (blobs.n,)
        assert np.isfinite(history.final_loss)

    def test_single_expert_takes_everything(self, blobs, fast_config):
        cfg = fast_config.replace(k=1)
        _, labels, _ = fit_reconstruction_only(blobs.X, cfg)
        assert np.all(labels == 0)

    def test_through_fit(self, blobs, fast_config):
        model, history = fit(blobs.X, fast_config.replace(mode='reconstruction_only'))
        assert history.mode == 'reconstruction_only'
        assert model.k == 2


def test_kmeans_equivalence(rng):
    for _ in range(20):
        n, k = int(rng.integers(6, 15)), int(rng.integers(2, 4))
        X = rng.standard_normal((n, 2))
        C0 = Centroids(X[rng.choice(n, size=k, replace=False)])
        assert kmeans_equivalence_check(X, C0, steps=10)


@pytest.mark.integration
def test_full_training_separates_blobs(blobs, fast_config):
    cfg = fast_config.replace(epochs=30, pretrain_epochs=30, gate_epochs=30)
    model, _ = fit(blobs.X, cfg)
    pred = hard_assign(infer(model, blobs.X).P)
    assert nmi(blobs.labels, pred) > 0.9
    assert len(np.unique(pred)) == 2


@pytest.fixture(scope='module')
def benchmark(testdata_fp):
    cfg = RunConfig.from_file(os.path.join(testdata_fp, 'synthetic.cfg'))
    return cfg.load_dataset(), cfg.to_train_config()


def _gate_and_reconstruction_labels(model, X):
    inference = infer(model, X)
    return hard_assign(inference.P), assign_by_reconstruction(inference.D)


@pytest.mark.integration
def test_gate_learns_pseudo_labels(benchmark):
    dataset, tcfg = benchmark
    _, _, report = pretrain(dataset.X, tcfg)
    assert report.gate_accuracy >= 0.95


@pytest.mark.integration
@pytest.mark.parametrize('mode', ['full', 'joint_only_random_init'])
def test_no_collapse_over_seeds(benchmark, mode):
    dataset, tcfg = benchmark
    for seed in range(10):
        model, _ = fit(dataset.X, tcfg.replace(mode=mode, seed=seed))
        gate, rec = _gate_and_reconstruction_labels(model, dataset.X)
        assert len(np.unique(gate)) == tcfg.k, "seed {}".format(seed)
        if mode == 'full':
            assert agreement(gate, rec) >= 0.95, "seed {}".format(seed)


@pytest.mark.integration
def test_loss_settles(benchmark):
    dataset, tcfg = benchmark
    _, history = fit(dataset.X, tcfg.replace(patience=tcfg.epochs))
    losses = history.losses
    tail = losses[int(0.2 * len(losses)):]
    for before, after in zip(tail, tail[1:]):
        assert after <= before + 0.02 * abs(before)


@pytest.mark.integration
def test_reconstruction_only_starves_experts(benchmark):
    dataset, tcfg = benchmark
    full_nmi, rec_nmi = [], []
    for seed in range(5):
        cfg = tcfg.replace(seed=seed)
        pretrained = pretrain(dataset.X, cfg)
        model, _ = fit(dataset.X, cfg, pretrained=pretrained)
        pred = hard_assign(infer(model, dataset.X).P)
        assert len(np.unique(pred)) == tcfg.k
        full_nmi.append(nmi(dataset.labels, pred))
        _, assigned, _ = fit_reconstruction_only(dataset.X, cfg)
        rec_nmi.append(nmi(dataset.labels, assigned))
    assert np.mean(full_nmi) > np.mean(rec_nmi)


@pytest.mark.integration
def test_mnist_subset(testdata_fp):
    cfg = RunConfig.from_file(os.path.join(testdata_fp, 'mnist.cfg'))
    mnist_dir = os.environ.get('DAMIC_MNIST_DIR')
    if mnist_dir:
        cfg = cfg.replace(
            data_path=os.path.join(mnist_dir, 'train-images-idx3-ubyte.gz'),
            labels_path=os.path.join(mnist_dir, 'train-labels-idx1-ubyte.gz'))
    if not os.path.isfile(cfg.resolve(cfg.data_path)):
        pytest.skip("MNIST files not found; set DAMIC_MNIST_DIR")
    dataset = cfg.load_dataset()
    tcfg = cfg.to_train_config()
    pretrained = pretrain(dataset.X, tcfg)
    model, _ = fit(dataset.X, tcfg, pretrained=pretrained)
    full = nmi(dataset.labels, hard_assign(infer(model, dataset.X).P))
    dae_km = nmi(dataset.labels, pretrained[1])
    km = nmi(dataset.labels, kmeans_fit(dataset.X, tcfg.k, tcfg.kmeans_config).labels)
    assert full >= dae_km + 0.02
    assert full >= km + 0.10
