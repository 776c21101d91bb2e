"""Adam training with separate learning rates for prefilter banks and everything else."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .model import NetworkParams, backward, forward_batch, loss_l1

log = logging.getLogger(__name__)


class TrainingDiverged(FloatingPointError):
    """The loss became NaN or infinite."""


@dataclass
class TrainConfig:
    # the 1:4 prefilter-to-rest ratio of the reference schedule, scaled up for short runs
    lr_prefilter: float = 2.5e-4
    lr_rest: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 4
    steps: int = 2000
    seed: int = 0
    lambda_feat: Sequence[float] = ()  # perceptual terms are not implemented; must stay zero
    leaky_slope: float = 0.2
    log_every: int = 0

    def __post_init__(self):
        if self.lr_prefilter <= 0 or self.lr_rest <= 0:
            raise ValueError("learning rates must be positive")
        if self.batch_size < 1 or self.steps < 0:
            raise ValueError("need batch_size >= 1 and steps >= 0")
        if any(x != 0 for x in self.lambda_feat):
            raise ValueError("feature-matching loss weights are not supported; use zeros")
        if self.leaky_slope != 0.2:
            raise ValueError("the layers are built with a leaky slope of 0.2")


@dataclass
class TrainResult:
    params: NetworkParams
    losses: List[float] = field(default_factory=list)

    def smoothed(self, window: int = 100) -> np.ndarray:
        return smooth(self.losses, window)


def smooth(losses, window: int = 100) -> np.ndarray:
    """Trailing moving average (shorter windows at the start)."""
    x = np.asarray(losses, dtype=np.float64)
    if x.size == 0:
        return x
    c = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, x.size + 1)
    lo = np.maximum(0, idx - window)
    return (c[idx] - c[lo]) / (idx - lo)


class Adam:
    def __init__(self, params: NetworkParams, cfg: TrainConfig):
        self.cfg = cfg
        self.t = 0
        self.m = {k: {n: np.zeros_like(v) for n, v in d.items()} for k, d in params.tensors.items()}
        self.v = {k: {n: np.zeros_like(v) for n, v in d.items()} for k, d in params.tensors.items()}
        kinds = {n.key: n.kind for n in params.graph.nodes}
        self.lr = {k: cfg.lr_prefilter if kinds.get(k) == "prefilter1d" else cfg.lr_rest for k in params.tensors}

    def step(self, params: NetworkParams, grads):
        c = self.cfg
        self.t += 1
        bc1 = 1 - c.beta1 ** self.t
        bc2 = 1 - c.beta2 ** self.t
        for k, d in params.tensors.items():
            lr = self.lr[k] * np.sqrt(bc2) / bc1
            for n, p in d.items():
                g = grads[k][n]
                m = self.m[k][n]
                v = self.v[k][n]
                m *= c.beta1
                m += (1 - c.beta1) * g
                v *= c.beta2
                v += (1 - c.beta2) * g * g
                p -= (lr * m / (np.sqrt(v) + c.eps)).astype(p.dtype)


def train(cfg: TrainConfig, dataset, params: NetworkParams, optimizer: Optional[Adam] = None) -> TrainResult:
    """Minimize the L1 loss over random minibatches of ``dataset``.

    ``dataset`` is any object with ``inputs`` ``(N, S, U)`` and ``labels``
    ``(N, S', U)`` arrays. ``params`` is updated in place and returned.
    """
    inputs = np.asarray(dataset.inputs)
    labels = np.asarray(dataset.labels)
    n = inputs.shape[0]
    if cfg.steps and n == 0:
        raise ValueError("cannot train on an empty dataset")
    rng = np.random.default_rng(cfg.seed)
    opt = optimizer or Adam(params, cfg)
    losses: List[float] = []
    order = np.empty(0, dtype=np.int64)
    for step in range(cfg.steps):
        if order.size < cfg.batch_size:
            order = np.concatenate([order, rng.permutation(n)])
        idx, order = order[:cfg.batch_size], order[cfg.batch_size:]
        loss, grads = backward(params, (inputs[idx], labels[idx]))
        if not np.isfinite(loss):
            raise TrainingDiverged(f"loss became {loss} at step {step}; last finite losses {losses[-5:]}")
        opt.step(params, grads)
        losses.append(loss)
        if cfg.log_every and (step + 1) % cfg.log_every == 0:
            log.info("step %d loss %.5f", step + 1, float(np.mean(losses[-cfg.log_every:])))
    return TrainResult(params, losses)


def evaluate_loss(params: NetworkParams, dataset, batch_size: int = 32) -> float:
    """Mean L1 loss over a dataset in inference mode."""
    inputs = np.asarray(dataset.inputs)
    labels = np.asarray(dataset.labels)
    total = 0.0
    for i in range(0, inputs.shape[0], batch_size):
        pred, _ = forward_batch(params, inputs[i:i + batch_size])
        total += loss_l1(pred, labels[i:i + batch_size]) * pred.shape[0]
    return total / max(1, inputs.shape[0])
