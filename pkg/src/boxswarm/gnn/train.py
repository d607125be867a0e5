"""Mini-batch training of the assignment network."""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from boxswarm.errors import NonFiniteLoss
from boxswarm.gnn import losses
from boxswarm.gnn.graph import stack_graphs
from boxswarm.gnn.model import GnnConfig, backward_batch, forward_batch, scatter_rows


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 60
    batch: int = 50
    lr: float = 0.05
    optimizer: str = "sgd"  # "sgd", "momentum" or "adam"
    momentum: float = 0.9  # heavy-ball coefficient, or Adam's beta1
    beta2: float = 0.999
    schedule: str = "constant"  # "constant" or "cosine" (anneals to 0 over the run)
    alpha: float = losses.ALPHA
    ce_scale: float = 1.0  # multiplies the cross-entropy term
    seed: int = 0

    def __post_init__(self):
        if self.optimizer not in ("sgd", "momentum", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.schedule not in ("constant", "cosine"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.epochs < 1 or self.batch < 1 or not self.lr > 0:
            raise ValueError("epochs, batch and lr must be positive")


# Reference recipe: n_a = 5, n_g = 10, 5000 graphs.
REFERENCE_MODEL = GnnConfig(residual=True)
REFERENCE_TRAINING = TrainConfig(epochs=60, batch=50, lr=3e-3, optimizer="adam", schedule="cosine", ce_scale=50.0)


@dataclass
class TrainResult:
    params: object
    loss_curve: list  # mean training loss per epoch
    seconds: float
    batch_losses: list = field(default_factory=list, repr=False)


def batch_loss_and_grads(params, batch, alpha=losses.ALPHA, ce_scale=1.0):
    """Mean training objective over a :class:`GraphBatch` and its parameter gradients."""
    probs, cache = forward_batch(params, batch.positions, batch.costs)
    A = scatter_rows(probs, batch.candidates, batch.n_goals)
    value, dA = losses.loss_total_grad(A, batch.Y, alpha=alpha, ce_scale=ce_scale)
    n = len(batch)
    dprobs = np.take_along_axis(dA, batch.candidates, axis=-1) / n
    return float(np.sum(value) / n), backward_batch(params, cache, dprobs)


class _Optimizer:
    def __init__(self, cfg, params):
        self.cfg = cfg
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.weights.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.weights.items()}

    def step(self, params, grads, lr):
        cfg = self.cfg
        self.t += 1
        for k, g in grads.items():
            w = params.weights[k]
            if cfg.optimizer == "sgd":
                w -= lr * g
            elif cfg.optimizer == "momentum":
                self.m[k] = cfg.momentum * self.m[k] + g
                w -= lr * self.m[k]
            else:
                self.m[k] = cfg.momentum * self.m[k] + (1 - cfg.momentum) * g
                self.v[k] = cfg.beta2 * self.v[k] + (1 - cfg.beta2) * g * g
                mhat = self.m[k] / (1 - cfg.momentum ** self.t)
                vhat = self.v[k] / (1 - cfg.beta2 ** self.t)
                w -= lr * mhat / (np.sqrt(vhat) + 1e-8)


def train(params, dataset, cfg=TrainConfig(), log=None):
    """Train a copy of ``params`` on a list of labeled graphs.

    Shuffling is driven by ``cfg.seed`` only, so equal inputs give equal
    curves.  Returns a :class:`TrainResult` whose parameters are rounded to
    float32, the precision of the parameter file.
    """
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    params = params.copy()
    data = stack_graphs(dataset)
    rng = np.random.default_rng(cfg.seed)
    opt = _Optimizer(cfg, params)
    n = len(data)
    steps_per_epoch = math.ceil(n / cfg.batch)
    total_steps = cfg.epochs * steps_per_epoch
    curve = []
    batch_losses = []
    start = time.perf_counter()
    step = 0
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        epoch_losses = []
        for b in range(steps_per_epoch):
            idx = perm[b * cfg.batch:(b + 1) * cfg.batch]
            value, grads = batch_loss_and_grads(params, data.take(idx), cfg.alpha, cfg.ce_scale)
            if not (math.isfinite(value) and all(np.isfinite(g).all() for g in grads.values())):
                raise NonFiniteLoss(b, epoch)
            lr = cfg.lr
            if cfg.schedule == "cosine":
                lr = cfg.lr * 0.5 * (1 + math.cos(math.pi * step / total_steps))
            opt.step(params, grads, lr)
            step += 1
            epoch_losses.append(value)
        batch_losses.extend(epoch_losses)
        curve.append(float(np.mean(epoch_losses)))
        if log is not None:
            log(epoch, curve[-1], time.perf_counter() - start)
    return TrainResult(params.to_float32(), curve, time.perf_counter() - start, batch_losses)
