"""Evaluation metrics: correlations and RMSE for scoring, average
precision and errorness mappings for the error-detection analysis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Script, extract_ngrams
from .errors import DimensionError, ParameterError, UndefinedMetricError


@dataclass
class EvalReport:
    """Scoring metrics over a labeled set (rmse on the original scale).

    ``pearson``/``spearman`` are None when undefined (degenerate input).
    """

    pearson: float | None
    spearman: float | None
    rmse: float
    n: int

    def to_dict(self) -> dict:
        return {"pearson": self.pearson, "spearman": self.spearman,
                "rmse": self.rmse, "n": self.n}


@dataclass
class ApReport:
    ap: float
    positives: int
    total: int

    def to_dict(self) -> dict:
        return {"ap": self.ap, "positives": self.positives, "total": self.total}


def _paired(x, y, min_len: int):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DimensionError(f"inputs must be equal-length vectors, got {x.shape} and {y.shape}")
    if x.size < min_len:
        raise ParameterError(f"need at least {min_len} pairs, got {x.size}")
    return x, y


def pearson(x, y) -> float:
    """Product-moment correlation; raises when either side has no variance."""
    x, y = _paired(x, y, 2)
    dx = x - x.mean()
    dy = y - y.mean()
    vx = float(dx @ dx)
    vy = float(dy @ dy)
    if vx == 0.0 or vy == 0.0:
        raise UndefinedMetricError("correlation undefined: zero variance input")
    return float((dx @ dy) / np.sqrt(vx * vy))


def _average_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks; ties share the mean of the ranks they span."""
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.size, dtype=np.float64)
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    """Pearson correlation of average-ranked data."""
    x, y = _paired(x, y, 2)
    return pearson(_average_ranks(x), _average_ranks(y))


def rmse(pred, gold) -> float:
    """Root mean squared difference."""
    pred, gold = _paired(pred, gold, 1)
    diff = pred - gold
    return float(np.sqrt((diff @ diff) / diff.size))


def average_precision(binary_labels, scores) -> ApReport:
    """Non-interpolated AP of the positive (erroneous) class.

    Items are ranked by score descending, ties broken by original index;
    AP is the mean of precision@rank over the positives' ranks.
    """
    labels = np.asarray(binary_labels, dtype=np.int64)
    sc = np.asarray(scores, dtype=np.float64)
    if labels.shape != sc.shape or labels.ndim != 1:
        raise DimensionError(f"labels/scores shape mismatch: {labels.shape} vs {sc.shape}")
    positives = int(labels.sum())
    if positives == 0:
        raise UndefinedMetricError("average precision undefined: no positive items")
    order = np.argsort(-sc, kind="stable")
    hits = 0
    total_prec = 0.0
    for rank, i in enumerate(order, start=1):
        if labels[i] == 1:
            hits += 1
            total_prec += hits / rank
    return ApReport(total_prec / positives, positives, labels.size)


def random_baseline_ap(binary_labels, draws: int = 100, seed: int = 0) -> float:
    """Mean AP of uniformly random scores over ``draws`` seeded draws."""
    labels = np.asarray(binary_labels, dtype=np.int64)
    rng = np.random.default_rng(seed)
    total = 0.0
    for _ in range(draws):
        total += average_precision(labels, rng.random(labels.size)).ap
    return total / draws


def eswe_errorness(model, emb, ngram_indices) -> float:
    """Map the error-filter output to "higher = more erroneous"."""
    from .pretrain import eswe_forward

    return 1.0 - eswe_forward(model, emb, ngram_indices)


def sswe_errorness(model, emb, ngram_indices_list) -> np.ndarray:
    """Errorness of a batch of ngrams from the two ranking-model scores.

    Combines rank and script scores with the model's loss weighting,
    min-max normalizes the combination over the batch, and returns
    ``1 - normalized`` so the error class scores high.
    """
    from .pretrain import sswe_forward

    if len(ngram_indices_list) < 2:
        raise ParameterError("need at least 2 ngrams for min-max normalization")
    combined = np.empty(len(ngram_indices_list))
    for i, idx in enumerate(ngram_indices_list):
        rank_score, script_score = sswe_forward(model, emb, idx)
        combined[i] = model.alpha * rank_score + (1.0 - model.alpha) * script_score
    lo = combined.min()
    hi = combined.max()
    if hi == lo:
        raise UndefinedMetricError("all combined scores identical: min-max mapping undefined")
    return 1.0 - (combined - lo) / (hi - lo)


def binary_ngram_labels(script: Script, n: int) -> list[int]:
    """1 per extracted ngram that contains any flagged token, else 0."""
    return [int(g.gold_error_score < 1.0) for g in extract_ngrams(script, n)]


def evaluate_scores(pred, gold) -> EvalReport:
    """Bundle the three scoring metrics; correlations degrade to None."""
    pred = np.asarray(pred, dtype=np.float64)
    gold = np.asarray(gold, dtype=np.float64)
    try:
        r = pearson(pred, gold)
        rho = spearman(pred, gold)
    except (UndefinedMetricError, ParameterError):
        r = None
        rho = None
    return EvalReport(r, rho, rmse(pred, gold), int(pred.size))
