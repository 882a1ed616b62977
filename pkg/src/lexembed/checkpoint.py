"""Versioned model checkpoints (format tag "lexembed-v1").

A checkpoint is one JSON document holding the resolved run config, the
vocabulary, the embedding matrix as a text block (same layout as the
vector files), and the model's parameter arrays flattened with shape
headers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .aa import AaModel
from .embeddings import EmbeddingMatrix, Vocabulary
from .errors import CompatibilityError, FormatError
from .pretrain import EsweModel, SsweModel

FORMAT_TAG = "lexembed-v1"

KINDS = ("eswe", "ecswe", "sswe", "aa")


@dataclass
class Checkpoint:
    kind: str
    model: EsweModel | SsweModel | AaModel
    embeddings: EmbeddingMatrix
    config: dict


def _array_entry(a: np.ndarray) -> dict:
    return {"shape": list(a.shape), "data": [float(v) for v in a.reshape(-1)]}


def _read_array(entry: dict, name: str) -> np.ndarray:
    try:
        return np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad parameter entry {name!r}: {exc}") from exc


def _embedding_block(emb: EmbeddingMatrix) -> str:
    lines = []
    for i, word in enumerate(emb.vocab.words):
        values = " ".join(f"{v:.17g}" for v in emb.matrix[i])
        lines.append(f"{word} {values}")
    return "\n".join(lines)


def _parse_embedding_block(block: str, vocab_words: list[str], dim: int) -> np.ndarray:
    matrix = np.empty((len(vocab_words), dim))
    lines = block.split("\n")
    if len(lines) != len(vocab_words):
        raise FormatError(
            f"embedding block has {len(lines)} rows, vocab has {len(vocab_words)}"
        )
    for i, line in enumerate(lines):
        parts = line.split(" ")
        if parts[0] != vocab_words[i] or len(parts) != dim + 1:
            raise FormatError(f"embedding block row {i} does not match vocab", line=i + 1)
        matrix[i] = [float(v) for v in parts[1:]]
    return matrix


def save_checkpoint(path, kind: str, model, emb: EmbeddingMatrix, config: dict) -> None:
    if kind not in KINDS:
        raise CompatibilityError(f"unknown checkpoint kind {kind!r}")
    if kind in ("eswe", "ecswe"):
        params = {"error_filter": model.error_filter, "bias": model.bias}
        meta = {"n": model.n}
    elif kind == "sswe":
        params = {
            "hidden": model.hidden, "hidden_bias": model.hidden_bias,
            "rank_head": model.rank_head, "rank_bias": model.rank_bias,
            "score_head": model.score_head, "score_bias": model.score_bias,
        }
        meta = {"n": model.n, "alpha": model.alpha, "k_noisy": model.k_noisy}
    else:
        params = {
            "script_filter": model.script_filter, "filter_bias": model.filter_bias,
            "reg_head": model.reg_head, "head_bias": model.head_bias,
        }
        meta = {"m": model.m, "h": model.h,
                "frozen_embeddings": model.frozen_embeddings}
    doc = {
        "format": FORMAT_TAG,
        "kind": kind,
        "config": config,
        "model": meta,
        "vocab": emb.vocab.words,
        "embedding_dim": emb.dim,
        "embedding_block": _embedding_block(emb),
        "params": {name: _array_entry(a) for name, a in params.items()},
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f)
        f.write("\n")


def load_checkpoint(path) -> Checkpoint:
    with open(path, "r", encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not a checkpoint: {exc.msg}") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_TAG:
        raise FormatError(f"{path}: missing or unknown format tag (expected {FORMAT_TAG!r})")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise CompatibilityError(f"{path}: unknown checkpoint kind {kind!r}")
    try:
        vocab = Vocabulary(doc["vocab"])
        dim = int(doc["embedding_dim"])
        matrix = _parse_embedding_block(doc["embedding_block"], vocab.words, dim)
        emb = EmbeddingMatrix(vocab, matrix)
        params = {name: _read_array(entry, name) for name, entry in doc["params"].items()}
        meta = doc["model"]
        if kind in ("eswe", "ecswe"):
            model = EsweModel(params["error_filter"], params["bias"], int(meta["n"]))
            if model.error_filter.size != int(meta["n"]) * dim:
                raise CompatibilityError(
                    f"{path}: filter length {model.error_filter.size} does not "
                    f"match n*dim = {int(meta['n']) * dim}"
                )
        elif kind == "sswe":
            model = SsweModel(
                params["hidden"], params["hidden_bias"],
                params["rank_head"], params["rank_bias"],
                params["score_head"], params["score_bias"],
                float(meta["alpha"]), int(meta["k_noisy"]), int(meta["n"]),
            )
            if model.hidden.shape[1] != int(meta["n"]) * dim:
                raise CompatibilityError(
                    f"{path}: hidden width {model.hidden.shape[1]} does not "
                    f"match n*dim = {int(meta['n']) * dim}"
                )
        else:
            model = AaModel(
                params["script_filter"], params["filter_bias"],
                params["reg_head"], params["head_bias"],
                int(meta["m"]), int(meta["h"]), bool(meta["frozen_embeddings"]),
            )
            if model.script_filter.shape != (int(meta["h"]), int(meta["m"]) * dim):
                raise CompatibilityError(
                    f"{path}: filter shape {model.script_filter.shape} does not "
                    f"match (h, m*dim) = ({meta['h']}, {int(meta['m']) * dim})"
                )
    except KeyError as exc:
        raise FormatError(f"{path}: missing checkpoint field {exc}") from exc
    return Checkpoint(kind, model, emb, doc.get("config", {}))
