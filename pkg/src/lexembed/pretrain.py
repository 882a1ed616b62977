"""Embedding pre-trainers.

Three models tune the embedding matrix before assessment training:

* the error filter regresses each ngram's gold error score 1/(1 + errors)
  through a sigmoid over a linear filter;
* its corrected-script extension trains on each script together with its
  error-corrected variant (whose ngrams all score 1);
* the ranking model scores real ngrams above randomly corrupted ones (hinge
  with margin 1 over k noisy counterparts) while regressing the script's
  normalized holistic score, weighted ``alpha * ranking + (1-alpha) * score``.

All gradients are hand-derived inside the kernels module and verified by
``numeric.finite_diff_check``. Batch losses are sums over their instances;
SGD steps apply the mean batch gradient. Trainers never mutate their input
embedding: they copy it and return the trained copy.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .corpus import Script, build_corrected_script, extract_ngrams
from .embeddings import EmbeddingMatrix, script_token_indices
from .errors import DimensionError, ParameterError, TrainingError
from .numeric import sgd_update

log = logging.getLogger("lexembed.pretrain")

INIT_SCALE = 0.05
HINGE_MARGIN = 1.0


@dataclass
class EsweModel:
    """Linear error filter over a concatenated ngram plus bias."""

    error_filter: np.ndarray  # (n * dim,)
    bias: np.ndarray          # (1,)
    n: int


@dataclass
class SsweModel:
    """tanh hidden layer with separate ranking and score heads."""

    hidden: np.ndarray       # (H, n * dim)
    hidden_bias: np.ndarray  # (H,)
    rank_head: np.ndarray    # (H,)
    rank_bias: np.ndarray    # (1,)
    score_head: np.ndarray   # (H,)
    score_bias: np.ndarray   # (1,)
    alpha: float
    k_noisy: int
    n: int

    @property
    def hidden_size(self) -> int:
        return self.hidden.shape[0]


# desk-scale defaults per method: the ranking model keeps its larger batch,
# the error-filter trainers need more steps per epoch under mean-gradient SGD
DEFAULT_BATCH = {"eswe": 16, "ecswe": 16, "sswe": 128}


@dataclass
class PretrainConfig:
    method: str  # eswe | ecswe | sswe
    n: int = 3
    epochs: int = 20
    lr: float = 0.01
    batch_size: int | None = None  # None: per-method default
    seed: int = 0
    # ranking-model settings (ignored by the error-filter methods)
    alpha: float = 0.1
    k_noisy: int = 20
    hidden_size: int = 100

    def effective_batch_size(self) -> int:
        if self.batch_size is not None:
            return self.batch_size
        return DEFAULT_BATCH[self.method]

    def validate(self) -> None:
        if self.method not in ("eswe", "ecswe", "sswe"):
            raise ParameterError(f"unknown method {self.method!r}")
        if self.n < 1 or self.epochs < 1 or self.effective_batch_size() < 1:
            raise ParameterError("n, epochs and batch_size must all be >= 1")
        if not self.lr > 0:
            raise ParameterError(f"learning rate must be > 0, got {self.lr}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ParameterError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.k_noisy < 1 or self.hidden_size < 1:
            raise ParameterError("k_noisy and hidden_size must be >= 1")


@dataclass
class PretrainResult:
    embeddings: EmbeddingMatrix
    model: EsweModel | SsweModel
    epoch_losses: list[float] = field(default_factory=list)


# ---------------------------------------------------------------------------
# instance preparation
# ---------------------------------------------------------------------------

def error_score_instances(
    scripts: list[Script], vocab, n: int
) -> tuple[np.ndarray, np.ndarray]:
    """(indices, gold error scores) for every usable ngram window."""
    rows = []
    gold = []
    for s in scripts:
        idx = script_token_indices(s, vocab)
        for g in extract_ngrams(s, n):
            rows.append(idx[g.start:g.start + n])
            gold.append(g.gold_error_score)
    if not rows:
        raise ParameterError(f"no ngrams of size {n} in the corpus")
    return np.array(rows, dtype=np.int64), np.array(gold, dtype=np.float64)


def script_score_instances(
    scripts: list[Script], vocab, n: int
) -> tuple[np.ndarray, np.ndarray]:
    """(indices, normalized script score) for every usable ngram window."""
    rows = []
    gold = []
    for s in scripts:
        idx = script_token_indices(s, vocab)
        norm = s.normalized_score()
        for g in extract_ngrams(s, n):
            rows.append(idx[g.start:g.start + n])
            gold.append(norm)
    if not rows:
        raise ParameterError(f"no ngrams of size {n} in the corpus")
    return np.array(rows, dtype=np.int64), np.array(gold, dtype=np.float64)


# ---------------------------------------------------------------------------
# error filter (shared by the plain and corrected-script variants)
# ---------------------------------------------------------------------------

def eswe_forward(model: EsweModel, emb: EmbeddingMatrix, ngram_indices) -> float:
    """Sigmoid of the filter response for one ngram; always in (0, 1)."""
    idx = np.asarray(ngram_indices, dtype=np.int64)
    v = emb.matrix[idx].reshape(-1)
    if v.size != model.error_filter.size:
        raise DimensionError(
            f"ngram of {idx.size} tokens (dim {emb.dim}) does not fit a "
            f"filter of length {model.error_filter.size}"
        )
    z = float(model.error_filter @ v) + float(model.bias[0])
    return 1.0 / (1.0 + np.exp(-z))


def eswe_scores(model: EsweModel, emb: EmbeddingMatrix, idx: np.ndarray) -> np.ndarray:
    """Vectorized forward over an (N, n) index matrix."""
    v = emb.matrix[idx].reshape(idx.shape[0], -1)
    z = v @ model.error_filter + model.bias[0]
    return 1.0 / (1.0 + np.exp(-z))


def eswe_batch_loss_grads(
    model: EsweModel, emb: EmbeddingMatrix, idx: np.ndarray, gold: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    """Sum-of-squared-errors loss and gradients for a batch of ngrams.

    Embedding gradients come back as a dense matrix; rows of words absent
    from the batch are exactly zero.
    """
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    gold = np.ascontiguousarray(gold, dtype=np.float64)
    if idx.ndim != 2 or idx.shape[0] == 0:
        raise ParameterError("batch must be a non-empty (B, n) index matrix")
    if idx.shape[1] != model.n:
        raise DimensionError(f"batch ngram size {idx.shape[1]} != model n {model.n}")
    loss, dw, db, demb = kernels.eswe_batch(
        emb.matrix, idx, gold, model.error_filter, float(model.bias[0])
    )
    grads = {
        "error_filter": dw,
        "bias": np.array([db]),
        "embeddings": demb,
    }
    return loss, grads


def _train_error_filter(
    scripts: list[Script], emb: EmbeddingMatrix, config: PretrainConfig
) -> PretrainResult:
    rng = np.random.default_rng(config.seed)
    emb = emb.copy()
    nd = config.n * emb.dim
    model = EsweModel(
        error_filter=rng.uniform(-INIT_SCALE, INIT_SCALE, nd),
        bias=rng.uniform(-INIT_SCALE, INIT_SCALE, 1),
        n=config.n,
    )
    idx, gold = error_score_instances(scripts, emb.vocab, config.n)
    n_inst = idx.shape[0]
    batch = config.effective_batch_size()
    losses = []
    for epoch in range(config.epochs):
        perm = rng.permutation(n_inst)
        total = 0.0
        for bidx, start in enumerate(range(0, n_inst, batch)):
            sel = perm[start:start + batch]
            loss, grads = eswe_batch_loss_grads(model, emb, idx[sel], gold[sel])
            if not np.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch} batch {bidx}"
                )
            step = config.lr / sel.size  # mean batch gradient
            sgd_update(model.error_filter, grads["error_filter"], step)
            sgd_update(model.bias, grads["bias"], step)
            sgd_update(emb.matrix, grads["embeddings"], step)
            total += loss
        losses.append(total / n_inst)
        log.debug("%s epoch %d mean loss %.6f", config.method, epoch, losses[-1])
    return PretrainResult(emb, model, losses)


def train_eswe(
    corpus: list[Script], emb: EmbeddingMatrix, config: PretrainConfig
) -> PretrainResult:
    """Train the error filter on the original scripts' ngrams."""
    config.validate()
    if config.method != "eswe":
        raise ParameterError(f"config.method must be 'eswe', got {config.method!r}")
    return _train_error_filter(list(corpus), emb, config)


def train_ecswe(
    corpus: list[Script], emb: EmbeddingMatrix, config: PretrainConfig
) -> PretrainResult:
    """Train the error filter on original plus corrected script variants.

    Corrected variants contribute all-correct ngrams (gold score 1); their
    instances are shuffled together with the originals within each epoch,
    so each script's loss is the sum of both variants' losses.
    """
    config.validate()
    if config.method != "ecswe":
        raise ParameterError(f"config.method must be 'ecswe', got {config.method!r}")
    combined = list(corpus) + [build_corrected_script(s) for s in corpus]
    return _train_error_filter(combined, emb, config)


# ---------------------------------------------------------------------------
# ranking + score model
# ---------------------------------------------------------------------------

def middle_position(n: int) -> int:
    """Zero-based index of the corruption target inside an ngram."""
    return (n + 1) // 2 - 1


def _draw_noisy(orig: np.ndarray, n_choices: int, k: int, rng) -> np.ndarray:
    """Uniform non-reserved replacements, redrawn until != original."""
    draws = 2 + rng.integers(n_choices, size=(orig.size, k))
    bad = draws == orig[:, None]
    while bad.any():
        draws[bad] = 2 + rng.integers(n_choices, size=int(bad.sum()))
        bad = draws == orig[:, None]
    return draws


def sample_noisy(ngram_indices, vocab, k: int, rng) -> np.ndarray:
    """k corrupted copies of one ngram, middle word replaced at random.

    Replacements are uniform over the non-reserved vocabulary and never
    equal the original middle word.
    """
    n_choices = len(vocab) - 2
    if n_choices < 3:
        raise ParameterError(
            f"vocabulary must have >= 3 non-reserved words, has {n_choices}"
        )
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    idx = np.asarray(ngram_indices, dtype=np.int64)
    mid = middle_position(idx.size)
    noisy = np.tile(idx, (k, 1))
    noisy[:, mid] = _draw_noisy(idx[mid:mid + 1], n_choices, k, rng)[0]
    return noisy


def _sample_noisy_batch(idx: np.ndarray, n_choices: int, k: int, rng) -> np.ndarray:
    b, n = idx.shape
    mid = middle_position(n)
    noisy = np.repeat(idx[:, None, :], k, axis=1)
    noisy[:, :, mid] = _draw_noisy(idx[:, mid], n_choices, k, rng)
    return np.ascontiguousarray(noisy)


def sswe_forward(
    model: SsweModel, emb: EmbeddingMatrix, ngram_indices
) -> tuple[float, float]:
    """(rank score, script score) for one ngram; both heads are linear."""
    idx = np.asarray(ngram_indices, dtype=np.int64)
    v = emb.matrix[idx].reshape(-1)
    if v.size != model.hidden.shape[1]:
        raise DimensionError(
            f"ngram of {idx.size} tokens (dim {emb.dim}) does not fit a "
            f"hidden layer of width {model.hidden.shape[1]}"
        )
    h = np.tanh(model.hidden @ v + model.hidden_bias)
    rank = float(model.rank_head @ h) + float(model.rank_bias[0])
    score = float(model.score_head @ h) + float(model.score_bias[0])
    return rank, score


def sswe_batch_loss_grads(
    model: SsweModel,
    emb: EmbeddingMatrix,
    idx: np.ndarray,
    gold: np.ndarray,
    noisy: np.ndarray,
) -> tuple[float, dict[str, np.ndarray]]:
    """Weighted ranking + score loss over a batch with presampled noise.

    ``noisy`` has shape (B, k, n); passing it in keeps the loss a pure
    function of its inputs, which the finite-difference checker requires.
    """
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    noisy = np.ascontiguousarray(noisy, dtype=np.int64)
    gold = np.ascontiguousarray(gold, dtype=np.float64)
    if idx.ndim != 2 or idx.shape[0] == 0:
        raise ParameterError("batch must be a non-empty (B, n) index matrix")
    if idx.shape[1] != model.n:
        raise DimensionError(f"batch ngram size {idx.shape[1]} != model n {model.n}")
    if noisy.shape != (idx.shape[0], noisy.shape[1], idx.shape[1]):
        raise DimensionError(f"noisy shape {noisy.shape} does not match batch {idx.shape}")
    loss, dWh, dbh, dwr, dbr, dws, dbs, demb = kernels.sswe_batch(
        emb.matrix, idx, noisy, gold,
        model.hidden, model.hidden_bias,
        model.rank_head, float(model.rank_bias[0]),
        model.score_head, float(model.score_bias[0]),
        model.alpha,
    )
    grads = {
        "hidden": dWh,
        "hidden_bias": dbh,
        "rank_head": dwr,
        "rank_bias": np.array([dbr]),
        "score_head": dws,
        "score_bias": np.array([dbs]),
        "embeddings": demb,
    }
    return loss, grads


def train_sswe(
    corpus: list[Script], emb: EmbeddingMatrix, config: PretrainConfig
) -> PretrainResult:
    """Train the ranking + score model, drawing fresh noise every epoch."""
    config.validate()
    if config.method != "sswe":
        raise ParameterError(f"config.method must be 'sswe', got {config.method!r}")
    n_choices = len(emb.vocab) - 2
    if n_choices < 3:
        raise ParameterError(
            f"vocabulary must have >= 3 non-reserved words, has {n_choices}"
        )
    rng = np.random.default_rng(config.seed)
    emb = emb.copy()
    nd = config.n * emb.dim
    H = config.hidden_size
    model = SsweModel(
        hidden=rng.uniform(-INIT_SCALE, INIT_SCALE, (H, nd)),
        hidden_bias=rng.uniform(-INIT_SCALE, INIT_SCALE, H),
        rank_head=rng.uniform(-INIT_SCALE, INIT_SCALE, H),
        rank_bias=rng.uniform(-INIT_SCALE, INIT_SCALE, 1),
        score_head=rng.uniform(-INIT_SCALE, INIT_SCALE, H),
        score_bias=rng.uniform(-INIT_SCALE, INIT_SCALE, 1),
        alpha=config.alpha,
        k_noisy=config.k_noisy,
        n=config.n,
    )
    idx, gold = script_score_instances(corpus, emb.vocab, config.n)
    n_inst = idx.shape[0]
    batch = config.effective_batch_size()
    losses = []
    for epoch in range(config.epochs):
        perm = rng.permutation(n_inst)
        total = 0.0
        for bidx, start in enumerate(range(0, n_inst, batch)):
            sel = perm[start:start + batch]
            batch_idx = np.ascontiguousarray(idx[sel])
            noisy = _sample_noisy_batch(batch_idx, n_choices, config.k_noisy, rng)
            loss, grads = sswe_batch_loss_grads(model, emb, batch_idx, gold[sel], noisy)
            if not np.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch} batch {bidx}"
                )
            step = config.lr / sel.size  # mean batch gradient
            sgd_update(model.hidden, grads["hidden"], step)
            sgd_update(model.hidden_bias, grads["hidden_bias"], step)
            sgd_update(model.rank_head, grads["rank_head"], step)
            sgd_update(model.rank_bias, grads["rank_bias"], step)  # identically zero
            sgd_update(model.score_head, grads["score_head"], step)
            sgd_update(model.score_bias, grads["score_bias"], step)
            sgd_update(emb.matrix, grads["embeddings"], step)
            total += loss
        losses.append(total / n_inst)
        log.debug("sswe epoch %d mean loss %.6f", epoch, losses[-1])
    return PretrainResult(emb, model, losses)
