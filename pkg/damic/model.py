# -*- coding: utf-8 -*-
"""model.py

The mixture of autoencoders:

- GateNetwork:
    A softmax network that maps each point to a distribution over k clusters.
    Its last hidden layer h(x) is the clustering embedding.
- AutoencoderBank:
    k autoencoders ("experts"), one per cluster, each reconstructing the input.
- DamicModel:
    One gate plus one bank; the trained clustering artifact.

The mixture loss for a point is -log sum_i p_i exp(-d_i), where d_i is half
the squared reconstruction error of expert i. Everything here is evaluated in
log space so that very large reconstruction errors stay finite.
"""
from collections import namedtuple

import numpy as np
from scipy.special import logsumexp

from damic import ShapeError
from damic.nn import (
    AffineLayer,
    MultiLayerNet,
    build_autoencoder,
    build_mlp,
    forward,
    backward,
    half_sq_distance,
    softmax,
)

LOG_FLOOR = 1e-30

SoftAssignment = namedtuple("SoftAssignment", "W")
ProbeResult = namedtuple("ProbeResult", "reconstructions posterior errors")
Inference = namedtuple("Inference", "H P D")


class GateNetwork(object):

    """body: x -> h(x); head: h(x) -> k logits, followed by a softmax."""

    def __init__(self, body, head):
        if not isinstance(head, AffineLayer):
            raise ShapeError("The gate head must be an affine layer")
        if body.n_out != head.n_in:
            raise ShapeError(
                "Gate embedding width {} does not match head input {}"
                .format(body.n_out, head.n_in))
        self.body = body
        self.head = head

    @classmethod
    def build(cls, dim, hidden, embedding_dim, k, rng, batchnorm=True):
        full = build_mlp([dim] + list(hidden) + [embedding_dim, k], rng,
                         output_activation='softmax', batchnorm=batchnorm)
        return cls(MultiLayerNet(full.layers[:-2]), full.layers[-2])

    @property
    def k(self):
        return self.head.n_out

    @property
    def embedding_dim(self):
        return self.body.n_out

    def parameters(self):
        return self.body.parameters() + self.head.params()

    def forward(self, X, mode='eval'):
        """:returns: (H, logits, P, body cache)"""
        H, cache = forward(self.body, X, mode)
        logits, _ = self.head.forward(H, mode)
        return H, logits, softmax(logits), cache


class AutoencoderBank(object):

    def __init__(self, experts):
        experts = list(experts)
        if not experts:
            raise ShapeError("The bank needs at least one expert")
        dims = set((e.n_in, e.n_out) for e in experts)
        if len(dims) != 1 or experts[0].n_in != experts[0].n_out:
            raise ShapeError("All experts must map R^d to R^d for one d")
        self.experts = experts

    @property
    def k(self):
        return len(self.experts)

    @property
    def d(self):
        return self.experts[0].n_in

    def parameters(self):
        return [p for e in self.experts for p in e.parameters()]

    def __getitem__(self, i):
        return self.experts[i]

    def __iter__(self):
        return iter(self.experts)

    def __len__(self):
        return len(self.experts)


class DamicModel(object):

    def __init__(self, gate, bank):
        if gate.k != bank.k:
            raise ShapeError(
                "Gate routes to {} clusters but the bank has {} experts"
                .format(gate.k, bank.k))
        if gate.body.n_in != bank.d:
            raise ShapeError("Gate and experts disagree on the input dimension")
        self.gate = gate
        self.bank = bank

    @property
    def k(self):
        return self.bank.k

    @property
    def d(self):
        return self.bank.d

    def parameters(self):
        return self.gate.parameters() + self.bank.parameters()

    def buffers(self):
        """Batch-norm running statistics of the gate and every expert."""
        return self.gate.body.buffers() + [b for e in self.bank for b in e.buffers()]

    def __repr__(self):
        return "DamicModel(k={}, d={}, embedding_dim={})".format(
            self.k, self.d, self.gate.embedding_dim)


def build_model(dim, k, rng, ae_hidden=(1024, 256), ae_bottleneck=None,
                gate_hidden=(512,), embedding_dim=512, batchnorm=True):
    """A randomly initialized model; the bottleneck defaults to k."""
    bottleneck = ae_bottleneck or k
    gate = GateNetwork.build(dim, gate_hidden, embedding_dim, k, rng, batchnorm)
    bank = AutoencoderBank(
        build_autoencoder(dim, ae_hidden, bottleneck, rng, batchnorm)
        for _ in range(k))
    return DamicModel(gate, bank)


def gate_forward(model, X, mode='eval'):
    """:returns: (H, P) embeddings and cluster probabilities"""
    H, _, P, _ = model.gate.forward(X, mode)
    return H, P


def hard_assign(P):
    """Most probable cluster per row; ties go to the lowest index."""
    return np.argmax(np.asarray(P), axis=1)


def reconstruct_all(model, X, mode='eval'):
    """:returns: (list of k reconstructions, n x k matrix of half squared errors)"""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.d:
        raise ShapeError(
            "Input of shape {} does not match model dimension {}"
            .format(X.shape, model.d))
    Xhats = [forward(e, X, mode)[0] for e in model.bank]
    D = np.column_stack([half_sq_distance(X, Xhat) for Xhat in Xhats])
    return Xhats, D


def _log_mixture(P, D):
    P = np.asarray(P, dtype=np.float64)
    D = np.asarray(D, dtype=np.float64)
    if P.shape != D.shape or P.ndim != 2:
        raise ShapeError(
            "P {} and D {} must both be n x k".format(P.shape, D.shape))
    return np.log(np.maximum(P, LOG_FLOOR)) - D


def damic_loss(P, D):
    """-sum_t log sum_i P[t,i] exp(-D[t,i])"""
    return float(-np.sum(logsumexp(_log_mixture(P, D), axis=1)))


def soft_assign(P, D):
    """Posterior responsibilities W[t,i] proportional to P[t,i] exp(-D[t,i])."""
    return SoftAssignment(softmax(_log_mixture(P, D)))


def assign_by_reconstruction(D):
    """Expert with the smallest reconstruction error; ties go to the lowest index."""
    return np.argmin(np.asarray(D), axis=1)


def loss_and_grads(model, X, mode='train', expert_mode=None):
    """Batch-mean mixture loss and its gradient for every model parameter.

    The gate receives (P - W) / n at its logits; expert i receives
    W[:, i] (f_i(x) - x) / n at its output.

    :param expert_mode: forward mode of the experts, `mode` when None. Joint
    training keeps each expert's batch-norm statistics from its own cluster
    by passing 'frozen'.
    :returns: (loss, grads) with grads aligned to model.parameters()
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    H, logits, P, body_cache = model.gate.forward(X, mode)
    passes = [forward(e, X, expert_mode or mode) for e in model.bank]
    D = np.column_stack([half_sq_distance(X, Xhat) for Xhat, _ in passes])
    loss = damic_loss(P, D) / n
    W = soft_assign(P, D).W

    dlogits = (P - W) / n
    dH, head_grads = model.gate.head.backward(H, dlogits)
    _, body_grads = backward(model.gate.body, body_cache, dH)
    grads = body_grads + head_grads
    for i, (expert, (Xhat, cache)) in enumerate(zip(model.bank, passes)):
        dY = W[:, i:i + 1] * (Xhat - X) / n
        grads.extend(backward(expert, cache, dY)[1])
    return loss, grads


def probe_experts(model, x):
    """Feed one vector through every expert and the gate.

    Used to inspect what each expert has specialized in, e.g. by probing with
    an all-ones image.
    """
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    Xhats, D = reconstruct_all(model, x)
    _, P = gate_forward(model, x)
    return ProbeResult(np.vstack(Xhats), P[0], D[0])


def infer(model, X, chunk=1024):
    """Embeddings, cluster probabilities and reconstruction errors in eval mode.

    Rows are processed in chunks; eval mode makes the result independent of
    the chunk size.
    """
    X = np.asarray(X, dtype=np.float64)
    Hs, Ps, Ds = [], [], []
    for start in range(0, X.shape[0], chunk):
        rows = X[start:start + chunk]
        H, P = gate_forward(model, rows)
        Hs.append(H)
        Ps.append(P)
        Ds.append(reconstruct_all(model, rows)[1])
    if not Hs:
        k = model.k
        return Inference(np.zeros((0, model.gate.embedding_dim)),
                         np.zeros((0, k)), np.zeros((0, k)))
    return Inference(np.vstack(Hs), np.vstack(Ps), np.vstack(Ds))
