"""Vocabulary and embedding matrix management.

Index 0 is the unknown-word row and index 1 the answer separator; both are
always present. Vectors can be seeded randomly or loaded from
GloVe-compatible text files (``word f1 ... fd`` per line).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .corpus import ANSWER_END, Script
from .errors import FormatError, ParameterError
from .numeric import uniform_init

UNK = "<unk>"
UNK_INDEX = 0
ANSWER_END_INDEX = 1

DEFAULT_DIM = 50
DEFAULT_INIT_SCALE = 0.05


class Vocabulary:
    """Bijective word/index mapping with the two reserved entries."""

    def __init__(self, words: list[str]):
        if words[:2] != [UNK, ANSWER_END]:
            words = [UNK, ANSWER_END] + [w for w in words if w not in (UNK, ANSWER_END)]
        self._words = list(words)
        self._index = {w: i for i, w in enumerate(self._words)}
        if len(self._index) != len(self._words):
            raise ParameterError("vocabulary contains duplicate words")

    def __len__(self) -> int:
        return len(self._words)

    def __contains__(self, word: str) -> bool:
        return word in self._index

    @property
    def words(self) -> list[str]:
        return list(self._words)

    def index(self, word: str) -> int:
        """Index of ``word``, falling back to the unknown-word row."""
        return self._index.get(word, UNK_INDEX)

    def word(self, i: int) -> str:
        return self._words[i]

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self._words == other._words


def build_vocab(corpus: list[Script], min_count: int = 1) -> Vocabulary:
    """Vocabulary from corpus tokens, ordered by frequency then spelling.

    Words seen fewer than ``min_count`` times are left out and resolve to
    the unknown row. The separator never enters the frequency ordering; it
    always sits at its reserved index.
    """
    if min_count < 1:
        raise ParameterError(f"min_count must be >= 1, got {min_count}")
    if not corpus:
        raise ParameterError("empty corpus")
    counts: Counter[str] = Counter()
    for script in corpus:
        for tok in script.tokens:
            if tok.surface not in (UNK, ANSWER_END):
                counts[tok.surface] += 1
    kept = sorted(
        (w for w, c in counts.items() if c >= min_count),
        key=lambda w: (-counts[w], w),
    )
    return Vocabulary([UNK, ANSWER_END] + kept)


@dataclass
class EmbeddingMatrix:
    """Vocabulary-aligned dense vectors, one float64 row per word."""

    vocab: Vocabulary
    matrix: np.ndarray

    def __post_init__(self):
        if self.matrix.ndim != 2 or self.matrix.shape[0] != len(self.vocab):
            raise ParameterError(
                f"matrix shape {self.matrix.shape} does not match vocab size {len(self.vocab)}"
            )

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def copy(self) -> "EmbeddingMatrix":
        return EmbeddingMatrix(self.vocab, self.matrix.copy())


def init_random(vocab: Vocabulary, dim: int = DEFAULT_DIM,
                scale: float = DEFAULT_INIT_SCALE, seed: int = 0) -> EmbeddingMatrix:
    """Seeded uniform rows for every vocabulary entry."""
    return EmbeddingMatrix(vocab, uniform_init(len(vocab), dim, scale, seed))


def load_text_vectors(path, vocab: Vocabulary, seed: int = 0,
                      scale: float = DEFAULT_INIT_SCALE) -> tuple[EmbeddingMatrix, int]:
    """Load GloVe-format text vectors for a vocabulary.

    In-vocab words take their file vectors. Vocab words missing from the
    file get seeded random rows; the unknown row gets the mean of the
    vectors that were loaded. Dimensionality is inferred from the first
    line and enforced afterwards. Returns the embedding and the number of
    vocab words the file did not cover.
    """
    dim = None
    file_vectors: dict[str, np.ndarray] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                raise FormatError(f"{path}: expected 'word floats...'", line=lineno)
            word = parts[0]
            try:
                vec = np.array([float(v) for v in parts[1:]], dtype=np.float64)
            except ValueError as exc:
                raise FormatError(f"{path}: unparsable float", line=lineno) from exc
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise FormatError(
                    f"{path}: expected {dim} values, got {vec.size}", line=lineno
                )
            if word in vocab:
                file_vectors[word] = vec
    if dim is None:
        raise FormatError(f"{path}: empty vector file")

    matrix = uniform_init(len(vocab), dim, scale, seed)
    loaded = []
    misses = 0  # counts uncovered corpus words; the reserved rows are plumbing
    for i, word in enumerate(vocab.words):
        vec = file_vectors.get(word)
        if vec is not None:
            matrix[i] = vec
            loaded.append(vec)
        elif i not in (UNK_INDEX, ANSWER_END_INDEX):
            misses += 1
    if UNK not in file_vectors and loaded:
        matrix[UNK_INDEX] = np.mean(loaded, axis=0)
    return EmbeddingMatrix(vocab, matrix), misses


def save_text_vectors(emb: EmbeddingMatrix, path) -> None:
    """Write vectors in the same text format, one word per line in vocab
    order, with full float64 precision."""
    if len(emb.vocab) == 0 or emb.matrix.size == 0:
        raise ParameterError("refusing to save an empty embedding")
    with open(path, "w", encoding="utf-8") as f:
        for i, word in enumerate(emb.vocab.words):
            values = " ".join(f"{v:.17g}" for v in emb.matrix[i])
            f.write(f"{word} {values}\n")


def lookup_ngram(emb: EmbeddingMatrix, token_indices) -> np.ndarray:
    """Concatenated rows for an ngram; length is ``n * dim``."""
    idx = np.asarray(token_indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= len(emb.vocab)):
        raise IndexError(f"token index out of range 0..{len(emb.vocab) - 1}")
    return emb.matrix[idx].reshape(-1)


def script_token_indices(script: Script, vocab: Vocabulary) -> np.ndarray:
    """Vocabulary indices for every token of a script (UNK fallback)."""
    return np.array([vocab.index(t.surface) for t in script.tokens], dtype=np.int64)
