"""Holistic script scoring: convolution, ReLU, average pooling, linear head.

The script filter produces h feature maps per window; averaging over
positions yields a fixed-length script representation that a linear head
maps to a normalized score. Training minimizes sum-of-squared errors with
L2 on the filter and head weights (never on biases or embeddings), and
keeps the parameter snapshot with the best dev MSE.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .corpus import Script
from .embeddings import EmbeddingMatrix, script_token_indices
from .errors import InputError, ParameterError, TrainingError
from .numeric import sgd_update

log = logging.getLogger("lexembed.aa")

INIT_SCALE = 0.05


@dataclass
class AaModel:
    script_filter: np.ndarray  # (h, m * dim)
    filter_bias: np.ndarray    # (h,)
    reg_head: np.ndarray       # (h,)
    head_bias: np.ndarray      # (1,)
    m: int
    h: int
    frozen_embeddings: bool = False

    def copy(self) -> "AaModel":
        return AaModel(self.script_filter.copy(), self.filter_bias.copy(),
                       self.reg_head.copy(), self.head_bias.copy(),
                       self.m, self.h, self.frozen_embeddings)


@dataclass
class AaModelConfig:
    m: int = 3
    h: int = 100
    frozen_embeddings: bool = False


@dataclass
class AaTrainConfig:
    epochs: int = 50
    lr: float = 0.001
    l2: float = 0.0001
    seed: int = 0
    batch_size: int = 8


@dataclass
class EpochRecord:
    epoch: int
    train_mse: float
    dev_mse: float


@dataclass
class AaTrainResult:
    model: AaModel
    embeddings: EmbeddingMatrix
    history: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0


def init_aa_model(m: int, h: int, dim: int, rng, frozen_embeddings: bool = False) -> AaModel:
    if m < 1 or h < 1:
        raise ParameterError(f"m and h must be >= 1, got m={m} h={h}")
    return AaModel(
        script_filter=rng.uniform(-INIT_SCALE, INIT_SCALE, (h, m * dim)),
        filter_bias=rng.uniform(-INIT_SCALE, INIT_SCALE, h),
        reg_head=rng.uniform(-INIT_SCALE, INIT_SCALE, h),
        head_bias=rng.uniform(-INIT_SCALE, INIT_SCALE, 1),
        m=m, h=h, frozen_embeddings=frozen_embeddings,
    )


def _script_indices_checked(model: AaModel, emb: EmbeddingMatrix, script: Script) -> np.ndarray:
    idx = script_token_indices(script, emb.vocab)
    if idx.size < model.m:
        raise InputError(
            f"script {script.id!r} has {idx.size} tokens, shorter than window {model.m}"
        )
    return idx


def aa_forward(
    model: AaModel, emb: EmbeddingMatrix, script: Script
) -> tuple[float, np.ndarray]:
    """Normalized score prediction plus the pooled representation."""
    idx = _script_indices_checked(model, emb, script)
    pred, pooled = kernels.aa_forward(
        emb.matrix, idx, model.script_filter, model.filter_bias,
        model.reg_head, float(model.head_bias[0]),
    )
    return float(pred), pooled


def aa_batch_loss_grads(
    model: AaModel,
    emb: EmbeddingMatrix,
    batch: list[tuple[Script, float]],
    l2: float = 0.0,
) -> tuple[float, dict[str, np.ndarray]]:
    """Batch loss (data term plus L2 penalty) and gradients.

    Embedding gradients are always computed; callers honoring
    ``frozen_embeddings`` simply do not apply them.
    """
    sqerr, loss, grads = _aa_batch(model, emb, batch, l2)
    return loss, grads


def _aa_batch(model, emb, batch, l2):
    if not batch:
        raise ParameterError("empty batch")
    if l2 < 0:
        raise ParameterError(f"l2 must be >= 0, got {l2}")
    dW = np.zeros_like(model.script_filter)
    db = np.zeros_like(model.filter_bias)
    dwreg = np.zeros_like(model.reg_head)
    dbreg = np.zeros(1)
    demb = np.zeros_like(emb.matrix)
    sqerr = 0.0
    for script, gold in batch:
        idx = _script_indices_checked(model, emb, script)
        err, _pred = kernels.aa_grads(
            emb.matrix, idx, model.script_filter, model.filter_bias,
            model.reg_head, float(model.head_bias[0]), float(gold),
            dW, db, dwreg, dbreg, demb,
        )
        sqerr += err
    loss = sqerr
    if l2 > 0.0:
        loss += l2 * (float((model.script_filter ** 2).sum())
                      + float(model.reg_head @ model.reg_head))
        dW += 2.0 * l2 * model.script_filter
        dwreg += 2.0 * l2 * model.reg_head
    grads = {
        "script_filter": dW,
        "filter_bias": db,
        "reg_head": dwreg,
        "head_bias": dbreg,
        "embeddings": demb,
    }
    return sqerr, loss, grads


def train_aa(
    train: list[Script],
    dev: list[Script],
    emb: EmbeddingMatrix,
    model_cfg: AaModelConfig,
    train_cfg: AaTrainConfig,
) -> AaTrainResult:
    """Minibatch SGD with best-dev-MSE model selection (ties: earliest).

    Each step applies the mean batch gradient. The returned snapshot
    contains the model and the embeddings as they were after the best
    epoch (identical to the input embeddings when ``frozen_embeddings``
    is set).
    """
    if not dev:
        raise ParameterError("dev set must be non-empty")
    if train_cfg.epochs < 1 or train_cfg.batch_size < 1:
        raise ParameterError("epochs and batch_size must be >= 1")
    if not train_cfg.lr > 0:
        raise ParameterError(f"learning rate must be > 0, got {train_cfg.lr}")
    if train_cfg.l2 < 0:
        raise ParameterError(f"l2 must be >= 0, got {train_cfg.l2}")
    overlap = {s.id for s in train} & {s.id for s in dev}
    if overlap:
        raise ParameterError(f"train/dev sets share script ids: {sorted(overlap)[:5]}")

    rng = np.random.default_rng(train_cfg.seed)
    emb = emb.copy()
    model = init_aa_model(model_cfg.m, model_cfg.h, emb.dim, rng,
                          model_cfg.frozen_embeddings)
    golds = [s.normalized_score() for s in train]
    for s in train + dev:
        _script_indices_checked(model, emb, s)

    history: list[EpochRecord] = []
    best_mse = np.inf
    best_epoch = 0
    best_model = model.copy()
    best_emb = emb.copy()
    n_train = len(train)
    for epoch in range(train_cfg.epochs):
        perm = rng.permutation(n_train)
        total_sqerr = 0.0
        for bidx, start in enumerate(range(0, n_train, train_cfg.batch_size)):
            batch = [(train[i], golds[i]) for i in perm[start:start + train_cfg.batch_size]]
            sqerr, loss, grads = _aa_batch(model, emb, batch, train_cfg.l2)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch} batch {bidx}")
            step = train_cfg.lr / len(batch)  # mean batch gradient
            sgd_update(model.script_filter, grads["script_filter"], step)
            sgd_update(model.filter_bias, grads["filter_bias"], step)
            sgd_update(model.reg_head, grads["reg_head"], step)
            sgd_update(model.head_bias, grads["head_bias"], step)
            if not model.frozen_embeddings:
                sgd_update(emb.matrix, grads["embeddings"], step)
            total_sqerr += sqerr
        dev_mse = dev_mse_of(model, emb, dev)
        history.append(EpochRecord(epoch, total_sqerr / n_train, dev_mse))
        if dev_mse < best_mse:
            best_mse = dev_mse
            best_epoch = epoch
            best_model = model.copy()
            best_emb = emb.copy()
        log.debug("aa epoch %d train mse %.6f dev mse %.6f",
                  epoch, history[-1].train_mse, dev_mse)
    return AaTrainResult(best_model, best_emb, history, best_epoch)


def dev_mse_of(model: AaModel, emb: EmbeddingMatrix, scripts: list[Script]) -> float:
    """Mean squared error of raw normalized predictions over a script set."""
    total = 0.0
    for s in scripts:
        pred, _ = aa_forward(model, emb, s)
        total += (pred - s.normalized_score()) ** 2
    return total / len(scripts)


def predict(model: AaModel, emb: EmbeddingMatrix, script: Script) -> float:
    """Score on the script's original scale (clamped before rescaling)."""
    pred, _ = aa_forward(model, emb, script)
    pred = min(max(pred, 0.0), 1.0)
    lo, hi = script.score_range
    return lo + pred * (hi - lo)


def predict_corpus(model: AaModel, emb: EmbeddingMatrix, scripts: list[Script]) -> np.ndarray:
    return np.array([predict(model, emb, s) for s in scripts])
