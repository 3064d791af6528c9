import numpy as np
import pytest

from damic import ShapeError, StateError, TrainingError
from damic.nn import (
    Activation,
    AdamState,
    AffineLayer,
    BatchNormLayer,
    MultiLayerNet,
    adam_step,
    backward,
    bce_loss,
    build_autoencoder,
    build_mlp,
    calibrate_batchnorm,
    elu,
    encode,
    forward,
    grad_check,
    half_sq_distance,
    sigmoid,
    softmax,
    softmax_cross_entropy,
)


def test_elu():
    assert elu(2.0) == 2.0
    assert elu(0.0) == 0.0
    assert elu(-1.0) == pytest.approx(-0.632121, abs=1e-6)


def test_softmax_rows_sum_to_one():
    Z = np.array([[1000.0, 0.0, -1000.0], [1.0, 1.0, 1.0]])
    P = softmax(Z)
    assert np.allclose(P.sum(axis=1), 1.0)
    assert np.allclose(P[1], 1.0 / 3)
    assert np.all(np.isfinite(P))


class TestForward(object):

    def test_identity_layer(self):
        net = MultiLayerNet([AffineLayer(np.eye(3), np.zeros(3)), Activation('identity')])
        X = np.arange(6.0).reshape(2, 3)
        Y, _ = forward(net, X)
        assert np.array_equal(Y, X)

    def test_zero_layer_then_sigmoid(self):
        net = MultiLayerNet([AffineLayer(np.zeros((2, 4)), np.zeros(2)),
                             Activation('sigmoid')])
        Y, _ = forward(net, np.random.default_rng(0).standard_normal((5, 4)))
        assert np.all(Y == 0.5)

    def test_matches_direct_evaluation(self, rng):
        net = build_mlp([4, 3, 2], rng, batchnorm=False)
        X = rng.standard_normal((2, 4))
        W1, b1 = net.layers[0].weight, net.layers[0].bias
        W2, b2 = net.layers[2].weight, net.layers[2].bias
        hidden = X.dot(W1.T) + b1
        hidden = np.where(hidden >= 0, hidden, np.exp(hidden) - 1.0)
        expected = hidden.dot(W2.T) + b2
        Y, _ = forward(net, X)
        assert np.allclose(Y, expected, atol=1e-12)

    def test_dimension_mismatch(self, rng):
        net = build_mlp([4, 3, 2], rng)
        with pytest.raises(ShapeError):
            forward(net, np.zeros((2, 5)))

    def test_softmax_only_last(self):
        with pytest.raises(ShapeError):
            MultiLayerNet([AffineLayer(np.eye(2), np.zeros(2)),
                           Activation('softmax'),
                           AffineLayer(np.eye(2), np.zeros(2))])

    def test_batchnorm_placement(self, rng):
        net = build_mlp([4, 3, 2], rng)
        kinds = [layer.kind for layer in net.layers]
        assert kinds == ['affine', 'batchnorm', 'activation', 'affine', 'activation']

    def test_batchnorm_running_stats(self, rng):
        layer = BatchNormLayer(3)
        X = rng.standard_normal((10, 3)) + 5.0
        layer.forward(X, 'train')
        assert np.allclose(layer.running_mean, 0.1 * X.mean(axis=0))
        before = layer.running_mean.copy()
        layer.forward(X, 'eval')
        assert np.array_equal(layer.running_mean, before)


class TestBackward(object):

    def test_zero_adjoint(self, rng):
        net = build_mlp([4, 3, 2], rng)
        X = rng.standard_normal((6, 4))
        Y, cache = forward(net, X)
        dX, grads = backward(net, cache, np.zeros_like(Y))
        assert np.all(dX == 0)
        assert all(np.all(g == 0) for g in grads)
        assert len(grads) == len(net.parameters())

    def test_foreign_cache(self, rng):
        a = build_mlp([4, 3, 2], rng)
        b = build_mlp([4, 3, 2], rng)
        Y, cache = forward(a, np.zeros((2, 4)))
        with pytest.raises(StateError):
            backward(b, cache, Y)

    def test_eval_cache(self, rng):
        net = build_mlp([4, 3, 2], rng)
        Y, cache = forward(net, np.zeros((2, 4)), 'eval')
        with pytest.raises(StateError):
            backward(net, cache, Y)

    def test_partial_pass_gets_zero_grads(self, rng):
        net = build_autoencoder(6, (4,), 2, rng)
        X = rng.uniform(size=(5, 6))
        H, cache = forward(net, X, 'train', upto=net.encoder_depth)
        _, grads = backward(net, cache, np.ones_like(H))
        assert len(grads) == len(net.parameters())
        assert np.all(grads[-1] == 0)


class TestGradCheck(object):

    def test_linear_quadratic(self, rng):
        net = MultiLayerNet([AffineLayer(rng.standard_normal((2, 3)), rng.standard_normal(2)),
                             Activation('identity')])
        X = rng.standard_normal((4, 3))

        def loss_and_grads():
            Y, cache = forward(net, X)
            return 0.5 * np.sum(Y ** 2), backward(net, cache, Y)[1]

        assert grad_check(loss_and_grads, net.parameters(), floor=1e-6) < 1e-8

    def test_batchnorm_train_mode(self, rng):
        net = build_mlp([3, 4, 2], rng, output_activation='sigmoid')
        X = rng.standard_normal((8, 3))
        T = rng.uniform(size=(8, 2))

        def loss_and_grads():
            Y, cache = forward(net, X, 'train')
            loss, dY = bce_loss(Y, T)
            return loss, backward(net, cache, dY)[1]

        assert grad_check(loss_and_grads, net.parameters(), floor=1e-4) < 1e-5

    def test_deep_net_without_batchnorm(self, rng):
        net = build_mlp([4, 6, 5, 3], rng, output_activation='sigmoid', batchnorm=False)
        X = rng.standard_normal((7, 4))
        T = rng.uniform(size=(7, 3))

        def loss_and_grads():
            Y, cache = forward(net, X, 'train')
            loss, dY = bce_loss(Y, T)
            return loss, backward(net, cache, dY)[1]

        assert grad_check(loss_and_grads, net.parameters(), floor=1e-4) < 1e-6

    def test_detects_corrupted_gradient(self, rng):
        net = build_mlp([3, 4, 2], rng, batchnorm=False)
        X = rng.standard_normal((5, 3))

        def loss_and_grads():
            Y, cache = forward(net, X)
            grads = backward(net, cache, Y)[1]
            return 0.5 * np.sum(Y ** 2), [1.01 * g for g in grads]

        assert grad_check(loss_and_grads, net.parameters(), floor=1e-6) > 1e-3


class TestAdam(object):

    def test_zero_gradient(self, rng):
        params = [rng.standard_normal((2, 3)), rng.standard_normal(3)]
        before = [p.copy() for p in params]
        state = AdamState(params)
        adam_step(params, [np.zeros_like(p) for p in params], state)
        assert all(np.array_equal(p, b) for p, b in zip(params, before))
        assert state.t == 1

    def test_first_step_moves_by_lr(self):
        params = [np.array([1.0, -1.0])]
        state = AdamState(params, lr=0.1)
        adam_step(params, [np.array([3.0, -0.5])], state)
        assert np.allclose(params[0], [0.9, -0.9], atol=1e-6)

    def test_non_finite_gradient(self):
        params = [np.zeros(2)]
        with pytest.raises(TrainingError):
            adam_step(params, [np.array([np.nan, 0.0])], AdamState(params))

    def test_shape_mismatch(self):
        params = [np.zeros(2)]
        with pytest.raises(ShapeError):
            adam_step(params, [np.zeros(3)], AdamState(params))


class TestLosses(object):

    def test_bce_symmetric_point(self):
        loss, _ = bce_loss(np.array([[0.5]]), np.array([[0.5]]))
        assert loss == pytest.approx(np.log(2), abs=1e-6)

    def test_bce_sums_features(self):
        loss, _ = bce_loss(np.array([[0.8, 0.3]]), np.array([[1.0, 0.0]]))
        assert loss == pytest.approx(0.579818, abs=1e-6)

    def test_bce_perfect_fit(self):
        T = np.array([[0.0, 1.0, 1.0]])
        loss, _ = bce_loss(T.copy(), T)
        assert 0 <= loss < 1e-5

    def test_bce_shape_mismatch(self):
        with pytest.raises(ShapeError):
            bce_loss(np.zeros((2, 2)), np.zeros((2, 3)))

    def test_half_sq_distance(self, rng):
        assert half_sq_distance([[1.0, 0.0]], [[0.0, 0.0]])[0] == 0.5
        X = rng.standard_normal((3, 4))
        assert np.all(half_sq_distance(X, X) == 0)
        Y = rng.standard_normal((3, 4))
        expected = [0.5 * sum((X[i, j] - Y[i, j]) ** 2 for j in range(4)) for i in range(3)]
        assert np.allclose(half_sq_distance(X, Y), expected)

    def test_softmax_cross_entropy(self):
        loss, dlogits = softmax_cross_entropy(np.zeros((2, 4)), np.array([0, 3]))
        assert loss == pytest.approx(np.log(4))
        assert np.allclose(dlogits.sum(axis=1), 0.0)


def test_encode_width(rng):
    ae = build_autoencoder(10, (6, 4), 2, rng)
    H = encode(ae, rng.uniform(size=(7, 10)))
    assert H.shape == (7, 2)


def test_sigmoid_scalar():
    assert sigmoid(0.0) == 0.5


class TestCalibrateBatchnorm(object):

    def test_frozen_matches_train_on_same_rows(self, rng):
        net = build_autoencoder(5, (6,), 2, rng)
        X = rng.uniform(size=(30, 5))
        calibrate_batchnorm(net, X)
        frozen, _ = forward(net, X, 'frozen')
        batch, _ = forward(net.copy(), X, 'train')
        assert np.allclose(frozen, batch, atol=1e-10)

    def test_empty_rows_keep_statistics(self, rng):
        net = build_autoencoder(5, (6,), 2, rng)
        before = [b.copy() for b in net.buffers()]
        calibrate_batchnorm(net, np.zeros((0, 5)))
        assert all(np.array_equal(a, b) for a, b in zip(net.buffers(), before))
