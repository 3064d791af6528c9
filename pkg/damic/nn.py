# -*- coding: utf-8 -*-
"""nn.py

A small dense network engine: affine, batch-norm and activation layers,
forward/backward passes, the Adam optimizer, losses and a finite-difference
gradient check.

Nets are plain stacks of layers. `forward` returns the output together with a
cache; `backward` consumes that cache and returns the input adjoint plus one
gradient array per parameter, in the order of `MultiLayerNet.parameters()`.

Forward modes:
  - train:  batch statistics in batch-norm layers, running statistics updated
  - eval:   running statistics only; the cache cannot be back-propagated
  - frozen: running statistics only, but back-propagation is allowed (used
            for experts during joint training, and when gradients are
            checked against finite differences)
"""
import copy

import numpy as np
from scipy.special import expit, logsumexp

from damic import ShapeError, StateError, TrainingError

ACTIVATIONS = ('elu', 'sigmoid', 'softmax', 'identity')
MODES = ('train', 'eval', 'frozen')

ELU_ALPHA = 1.0
BCE_EPS = 1e-7


def elu(x):
    """Exponential linear unit with alpha = 1."""
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x >= 0, x, ELU_ALPHA * np.expm1(np.minimum(x, 0.0)))
    return out[()]


def sigmoid(x):
    return expit(np.asarray(x, dtype=np.float64))[()]


def softmax(Z):
    """Row-wise softmax with max-subtraction; a 1-D input is one row."""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim == 1:
        return softmax(Z[np.newaxis, :])[0]
    shifted = Z - Z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


class AffineLayer(object):

    """Y = X W^T + b, with W stored as (out x in)."""

    kind = 'affine'
    param_names = ('weight', 'bias')
    buffer_names = ()

    def __init__(self, weight, bias):
        self.weight = np.array(weight, dtype=np.float64)
        self.bias = np.array(bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(
                "Affine weight {} and bias {} do not agree"
                .format(self.weight.shape, self.bias.shape))

    @classmethod
    def he_uniform(cls, n_in, n_out, rng):
        """Uniform initialization scaled by fan-in; biases start at zero."""
        limit = np.sqrt(6.0 / n_in)
        weight = rng.uniform(-limit, limit, size=(n_out, n_in))
        return cls(weight, np.zeros(n_out))

    @property
    def n_in(self):
        return self.weight.shape[1]

    @property
    def n_out(self):
        return self.weight.shape[0]

    def params(self):
        return [self.weight, self.bias]

    def buffers(self):
        return []

    def describe(self):
        return {'kind': self.kind, 'in': self.n_in, 'out': self.n_out}

    def forward(self, X, mode):
        return X.dot(self.weight.T) + self.bias, X

    def backward(self, cache, dY):
        X = cache
        return dY.dot(self.weight), [dY.T.dot(X), dY.sum(axis=0)]


class BatchNormLayer(object):

    """Per-feature batch normalization with learned scale and shift."""

    kind = 'batchnorm'
    param_names = ('gamma', 'beta')
    buffer_names = ('running_mean', 'running_var')

    def __init__(self, features, momentum=0.9, epsilon=1e-5):
        if not 0.0 < momentum < 1.0:
            raise ValueError("momentum must lie in (0, 1)")
        self.momentum = momentum
        self.epsilon = epsilon
        self.gamma = np.ones(features)
        self.beta = np.zeros(features)
        self.running_mean = np.zeros(features)
        self.running_var = np.ones(features)

    @property
    def n_in(self):
        return self.gamma.shape[0]

    n_out = n_in

    def params(self):
        return [self.gamma, self.beta]

    def buffers(self):
        return [self.running_mean, self.running_var]

    def describe(self):
        return {'kind': self.kind, 'features': self.n_in,
                'momentum': self.momentum, 'epsilon': self.epsilon}

    def forward(self, X, mode):
        if mode == 'train':
            mean = X.mean(axis=0)
            var = X.var(axis=0)
            self.running_mean *= self.momentum
            self.running_mean += (1.0 - self.momentum) * mean
            self.running_var *= self.momentum
            self.running_var += (1.0 - self.momentum) * var
        else:
            mean, var = self.running_mean, self.running_var
        inv_std = 1.0 / np.sqrt(var + self.epsilon)
        xhat = (X - mean) * inv_std
        return self.gamma * xhat + self.beta, (xhat, inv_std, mode)

    def backward(self, cache, dY):
        xhat, inv_std, mode = cache
        dgamma = np.sum(dY * xhat, axis=0)
        dbeta = dY.sum(axis=0)
        dxhat = dY * self.gamma
        if mode == 'train':
            n = dY.shape[0]
            dX = (inv_std / n) * (
                n * dxhat
                - dxhat.sum(axis=0)
                - xhat * np.sum(dxhat * xhat, axis=0))
        else:
            dX = dxhat * inv_std
        return dX, [dgamma, dbeta]


class Activation(object):

    kind = 'activation'
    param_names = ()
    buffer_names = ()

    def __init__(self, name):
        if name not in ACTIVATIONS:
            raise ValueError(
                "Unknown activation '{}'. Valid choices are {}"
                .format(name, ", ".join(ACTIVATIONS)))
        self.name = name
        self.n_in = self.n_out = None

    def params(self):
        return []

    def buffers(self):
        return []

    def describe(self):
        return {'kind': self.kind, 'name': self.name}

    def forward(self, X, mode):
        if self.name == 'elu':
            Y = elu(X)
        elif self.name == 'sigmoid':
            Y = expit(X)
        elif self.name == 'softmax':
            Y = softmax(X)
        else:
            Y = X
        return Y, (X, Y)

    def backward(self, cache, dY):
        X, Y = cache
        if self.name == 'elu':
            dX = np.where(X >= 0, dY, dY * (Y + ELU_ALPHA))
        elif self.name == 'sigmoid':
            dX = dY * Y * (1.0 - Y)
        elif self.name == 'softmax':
            dX = Y * (dY - np.sum(dY * Y, axis=1, keepdims=True))
        else:
            dX = dY
        return dX, []


class MultiLayerNet(object):

    """An ordered stack of layers.

    :param layers: AffineLayer, BatchNormLayer and Activation objects
    :param encoder_depth: for autoencoders, the number of leading layers that
    produce the bottleneck representation
    """

    def __init__(self, layers, encoder_depth=None):
        self.layers = list(layers)
        self.encoder_depth = encoder_depth
        self._check_chain()

    def _check_chain(self):
        if not self.layers:
            raise ShapeError("A net needs at least one layer")
        width = None
        for i, layer in enumerate(self.layers):
            if isinstance(layer, Activation):
                if layer.name == 'softmax' and i != len(self.layers) - 1:
                    raise ShapeError("softmax is only allowed as the final layer")
                continue
            if width is not None and layer.n_in != width:
                raise ShapeError(
                    "Layer {} expects {} inputs but receives {}"
                    .format(i, layer.n_in, width))
            width = layer.n_out
        if width is None:
            raise ShapeError("A net needs at least one sized layer")

    @property
    def n_in(self):
        return next(l.n_in for l in self.layers if l.n_in is not None)

    @property
    def n_out(self):
        return [l.n_out for l in self.layers if l.n_out is not None][-1]

    def parameters(self):
        return [p for layer in self.layers for p in layer.params()]

    def buffers(self):
        return [b for layer in self.layers for b in layer.buffers()]

    def describe(self):
        return [layer.describe() for layer in self.layers]

    def copy(self):
        return copy.deepcopy(self)

    def forward(self, X, mode='train', upto=None):
        return forward(self, X, mode, upto)

    def backward(self, cache, dY):
        return backward(self, cache, dY)

    def __repr__(self):
        kinds = []
        for layer in self.layers:
            if isinstance(layer, Activation):
                kinds.append(layer.name)
            elif isinstance(layer, AffineLayer):
                kinds.append("affine({}->{})".format(layer.n_in, layer.n_out))
            else:
                kinds.append("bn({})".format(layer.n_in))
        return "MultiLayerNet[" + ", ".join(kinds) + "]"


class NetCache(object):
    """Activation record of one forward pass."""

    def __init__(self, net, mode, layer_caches):
        self.net = net
        self.mode = mode
        self.layer_caches = layer_caches


def build_mlp(sizes, rng, hidden_activation='elu', output_activation='identity',
              batchnorm=True, momentum=0.9, epsilon=1e-5, encoder_depth=None):
    """Build [affine, (batch-norm), activation] blocks for the given widths.

    Batch normalization is placed on hidden blocks only, between the affine
    map and the activation.

    :param sizes: layer widths, input first and output last
    :param rng: a numpy Generator used for weight initialization
    :param encoder_depth: number of hidden blocks that make up the encoder
    """
    if len(sizes) < 2:
        raise ShapeError("An MLP needs at least an input and an output width")
    layers = []
    n_hidden = len(sizes) - 2
    for i in range(len(sizes) - 1):
        layers.append(AffineLayer.he_uniform(sizes[i], sizes[i + 1], rng))
        if i < n_hidden:
            if batchnorm:
                layers.append(BatchNormLayer(sizes[i + 1], momentum, epsilon))
            layers.append(Activation(hidden_activation))
        else:
            layers.append(Activation(output_activation))
    depth = None
    if encoder_depth is not None:
        per_block = 3 if batchnorm else 2
        depth = per_block * encoder_depth
    return MultiLayerNet(layers, encoder_depth=depth)


def build_autoencoder(dim, hidden, bottleneck, rng, batchnorm=True):
    """A mirrored autoencoder dim -> hidden -> bottleneck -> hidden -> dim.

    Hidden layers use ELU, the reconstruction uses a sigmoid.
    """
    hidden = list(hidden)
    sizes = [dim] + hidden + [bottleneck] + hidden[::-1] + [dim]
    return build_mlp(sizes, rng, output_activation='sigmoid',
                     batchnorm=batchnorm, encoder_depth=len(hidden) + 1)


def forward(net, X, mode='train', upto=None):
    """Apply the layers of `net` to the rows of X.

    :param upto: apply only the first `upto` layers
    :returns: (Y, cache)
    """
    if mode not in MODES:
        raise ValueError("mode must be one of {}".format(", ".join(MODES)))
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.n_in:
        raise ShapeError(
            "Input of shape {} does not match net input dimension {}"
            .format(X.shape, net.n_in))
    layers = net.layers if upto is None else net.layers[:upto]
    caches = []
    Y = X
    for layer in layers:
        Y, cache = layer.forward(Y, mode)
        caches.append(cache)
    return Y, NetCache(net, mode, caches)


def backward(net, cache, dY):
    """Back-propagate the adjoint dY through the layers recorded in cache.

    :returns: (dX, grads) with grads aligned to net.parameters()
    """
    if not isinstance(cache, NetCache) or cache.net is not net:
        raise StateError("The cache was not produced by this net")
    if cache.mode == 'eval':
        raise StateError("An eval-mode cache cannot be back-propagated")
    n_layers = len(cache.layer_caches)
    grads = []
    dX = np.asarray(dY, dtype=np.float64)
    for layer, layer_cache in zip(reversed(net.layers[:n_layers]),
                                  reversed(cache.layer_caches)):
        dX, layer_grads = layer.backward(layer_cache, dX)
        grads = layer_grads + grads
    # Layers beyond `upto` receive no gradient
    for layer in net.layers[n_layers:]:
        grads.extend(np.zeros_like(p) for p in layer.params())
    return dX, grads


def calibrate_batchnorm(net, X):
    """Set the running statistics of every batch-norm layer to the exact
    statistics of X as it reaches that layer.

    :returns: net
    """
    Y = np.asarray(X, dtype=np.float64)
    for layer in net.layers:
        if isinstance(layer, BatchNormLayer) and Y.shape[0] > 0:
            layer.running_mean[...] = Y.mean(axis=0)
            layer.running_var[...] = Y.var(axis=0)
        Y, _ = layer.forward(Y, 'frozen')
    return net


def encode(net, X):
    """Bottleneck activations of an autoencoder (eval mode)."""
    if net.encoder_depth is None:
        raise StateError("This net has no encoder section")
    return forward(net, X, 'eval', upto=net.encoder_depth)[0]


class AdamState(object):

    """Moment accumulators for one list of parameter arrays."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon


def adam_step(params, grads, state):
    """Apply one bias-corrected Adam update to `params` in place.

    :returns: (params, state)
    """
    if not (len(params) == len(grads) == len(state.m)):
        raise ShapeError("params, grads and optimizer moments differ in length")
    for p, g, m in zip(params, grads, state.m):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError(
                "Parameter {} and gradient {} shapes disagree"
                .format(p.shape, g.shape))
        if not np.all(np.isfinite(g)):
            raise TrainingError("Non-finite gradient encountered")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** state.t
    correction2 = 1.0 - b2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.epsilon)
    return params, state


def bce_loss(Y, T):
    """Binary cross-entropy, summed over features and averaged over samples.

    :returns: (loss, dY)
    """
    Y = np.asarray(Y, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    if Y.shape != T.shape:
        raise ShapeError(
            "Prediction {} and target {} shapes disagree".format(Y.shape, T.shape))
    n = Y.shape[0] if Y.ndim > 1 else 1
    Yc = np.clip(Y, BCE_EPS, 1.0 - BCE_EPS)
    loss = -np.sum(T * np.log(Yc) + (1.0 - T) * np.log1p(-Yc)) / n
    dY = (Yc - T) / (Yc * (1.0 - Yc)) / n
    return float(loss), dY


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy of integer labels under softmax(logits).

    :returns: (loss, dlogits)
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError("Expected n x k logits and n labels")
    n = logits.shape[0]
    log_p = logits - logsumexp(logits, axis=1, keepdims=True)
    rows = np.arange(n)
    loss = -log_p[rows, labels].sum() / n
    dlogits = np.exp(log_p)
    dlogits[rows, labels] -= 1.0
    return float(loss), dlogits / n


def half_sq_distance(X, Xhat):
    """Per-row half squared Euclidean distance."""
    X = np.asarray(X, dtype=np.float64)
    Xhat = np.asarray(Xhat, dtype=np.float64)
    if X.shape != Xhat.shape:
        raise ShapeError(
            "Shapes {} and {} disagree".format(X.shape, Xhat.shape))
    return 0.5 * np.sum((X - Xhat) ** 2, axis=1)


def grad_check(loss_and_grads, params, h=1e-5, floor=1e-12):
    """Compare analytic gradients with central finite differences.

    :param loss_and_grads: callable returning (loss, grads) at the current
    parameter values, grads aligned with `params`
    :param params: the arrays to perturb (in place, restored afterwards)
    :param floor: lower bound of the relative-error denominator
    :returns: max |analytic - numeric| / max(|analytic|, |numeric|, floor)
    """
    _, analytic = loss_and_grads()
    analytic = [np.array(g, dtype=np.float64) for g in analytic]
    worst = 0.0
    for p, g in zip(params, analytic):
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + h
            plus = loss_and_grads()[0]
            flat[i] = original - h
            minus = loss_and_grads()[0]
            flat[i] = original
            numeric = (plus - minus) / (2.0 * h)
            denom = max(abs(gflat[i]), abs(numeric), floor)
            worst = max(worst, abs(gflat[i] - numeric) / denom)
    return worst
