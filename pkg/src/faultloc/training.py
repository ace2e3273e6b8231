"""Mini-batch RMSprop training with checkpointed early stopping."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cnn import loss, loss_and_grad
from .errors import ContractError, DomainError, TrainingError


@dataclass
class TrainConfig:
    lam: float = 1e-3
    learning_rate: float = 1e-3
    rmsprop_decay: float = 0.9
    rmsprop_eps: float = 1e-8
    check_period: int = 1000   # validation loss tracked every this many steps
    patience: int = 4          # stop once the no-improvement counter exceeds this
    batch_size: int = 32
    max_steps: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.lam < 0:
            raise DomainError("lam must be >= 0")
        if not 0 < self.rmsprop_decay < 1:
            raise DomainError("rmsprop_decay must lie in (0, 1)")
        if self.learning_rate <= 0:
            raise DomainError("learning_rate must be > 0")
        if min(self.check_period, self.patience, self.batch_size, self.max_steps) < 1:
            raise DomainError("check_period, patience, batch_size and max_steps must be >= 1")

    def scaled(self, fraction: float) -> "TrainConfig":
        """Copy with ``max_steps`` and ``check_period`` scaled by ``fraction``."""
        from dataclasses import replace
        return replace(self, max_steps=max(1, math.ceil(self.max_steps * fraction)),
                       check_period=max(1, math.ceil(self.check_period * fraction)))


class RMSprop:
    def __init__(self, params, lr, decay=0.9, eps=1e-8):
        self.lr, self.decay, self.eps = lr, decay, eps
        self.sq = [np.zeros_like(p) for p in params]

    def step(self, params, grads):
        out = []
        for k, (p, g) in enumerate(zip(params, grads)):
            self.sq[k] = self.decay * self.sq[k] + (1.0 - self.decay) * g * g
            out.append(p - self.lr * g / (np.sqrt(self.sq[k]) + self.eps))
        return tuple(out)


class EarlyStopping:
    """Tracks the best validation loss; ``counter`` resets on improvement.

    ``update`` returns True when training should stop, i.e. once the number
    of consecutive non-improving checks exceeds ``patience``.
    """

    def __init__(self, patience: int):
        self.patience = patience
        self.best = math.inf
        self.best_step = None
        self.counter = 0

    def update(self, value: float, step: int | None = None) -> bool:
        if value < self.best:
            self.best = value
            self.best_step = step
            self.counter = 0
        else:
            self.counter += 1
        return self.counter > self.patience


@dataclass
class History:
    steps: list = field(default_factory=list)
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_step: int | None = None
    best_val: float = math.inf
    best_train: float = math.inf   # training objective at the returned parameters
    stopped_early: bool = False

    def append(self, step, tr, va):
        self.steps.append(int(step))
        self.train_loss.append(float(tr))
        self.val_loss.append(float(va))

    def to_csv(self, path):
        from .dataset import _atomic_write
        path = Path(path)
        rows = ["step,train_loss,val_loss"]
        rows += [f"{s},{a:.17g},{b:.17g}" for s, a, b in zip(self.steps, self.train_loss, self.val_loss)]
        _atomic_write(path, "\n".join(rows) + "\n")
        return path


def _check(X, y, name):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or len(X) == 0 or len(X) != len(y):
        raise ContractError(f"{name} set must be a nonempty (N, n) array with N labels")
    return X, y


def train(spec, train_set, val_set, config: TrainConfig | None = None, init=None):
    """Fit ``spec`` on ``train_set = (X, y)``; returns ``(params, history)``.

    The validation loss (data term only) is checked every ``check_period``
    steps and after the last step; the parameters of the best check are
    returned.
    """
    cfg = config or TrainConfig()
    Xtr, ytr = _check(*train_set, "training")
    Xva, yva = _check(*val_set, "validation")
    if int(ytr.max()) >= spec.num_classes or int(yva.max()) >= spec.num_classes or ytr.min() < 0:
        raise ContractError("labels outside the classifier's class range")
    params = tuple(init) if init is not None else spec.init([cfg.seed, 0])
    opt = RMSprop(params, cfg.learning_rate, cfg.rmsprop_decay, cfg.rmsprop_eps)
    rng = np.random.default_rng([cfg.seed, 1])
    stopper = EarlyStopping(cfg.patience)
    hist = History()
    best = params
    N = len(Xtr)
    order, pos = rng.permutation(N), 0
    for step in range(1, cfg.max_steps + 1):
        if pos + cfg.batch_size > N:
            order, pos = rng.permutation(N), 0
        batch = order[pos:pos + cfg.batch_size]
        pos += cfg.batch_size
        value, grads = loss_and_grad(spec, params, Xtr[batch], ytr[batch], cfg.lam)
        if not math.isfinite(value):
            raise TrainingError("training loss is not finite", step)
        params = opt.step(params, grads)
        if step % cfg.check_period == 0 or step == cfg.max_steps:
            va = loss(spec, params, Xva, yva, 0.0)
            if not math.isfinite(va):
                raise TrainingError("validation loss is not finite", step)
            tr = loss(spec, params, Xtr, ytr, cfg.lam)
            hist.append(step, tr, va)
            stop = stopper.update(va, step)
            if stopper.counter == 0:
                best = params
                hist.best_step, hist.best_val, hist.best_train = step, va, tr
            if stop:
                hist.stopped_early = True
                break
    return best, hist
