"""Learner-script corpus handling.

Scripts arrive as plain text with inline error annotations of the form
``<e type="X"><i>wrong words</i><c>correction</c></e>``. Parsing produces
token streams with per-token error flags; those flags drive the gold ngram
error scores and the corrected script variants used in pre-training.

A deterministic synthetic generator stands in for licensed exam corpora:
it emits scripts from a seeded bigram language, plants substitution errors
whose corrections are the original words, and assigns holistic scores that
fall linearly with the planted error rate.
"""

from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, MissingCorrectionWarning, ParameterError, ParseError

ANSWER_END = "answer_end"

_PUNCT = set('.,!?;:"()')

_E_OPEN = re.compile(r'<e(?: type="([^"<>]*)")?>')


def tokenize(text: str) -> list[str]:
    """Whitespace tokenization that peels leading/trailing punctuation.

    The characters ``. , ! ? ; : " ( )`` become separate tokens when they
    open or close a chunk; internal apostrophes and hyphens stay attached.
    Nothing is lowercased.
    """
    out: list[str] = []
    for chunk in text.split():
        lead: list[str] = []
        while chunk and chunk[0] in _PUNCT:
            lead.append(chunk[0])
            chunk = chunk[1:]
        trail: list[str] = []
        while chunk and chunk[-1] in _PUNCT:
            trail.append(chunk[-1])
            chunk = chunk[:-1]
        out.extend(lead)
        if chunk:
            out.append(chunk)
        out.extend(reversed(trail))
    return out


@dataclass
class Token:
    """One surface token with its error flag and optional correction.

    ``correction`` is ``None`` when the token is not an error or the
    annotation gave no correction; an empty list means the correction is a
    deletion. Only the first token of a multi-token error span carries the
    span's correction. ``group`` identifies which annotation instance a
    flagged token belongs to (parse-internal; consecutive spans of distinct
    errors would otherwise merge).
    """

    surface: str
    is_error: bool = False
    correction: list[str] | None = None
    error_type: str | None = None
    group: int | None = None


@dataclass
class Script:
    """One learner submission: tokens, holistic score, and score scale."""

    id: str
    tokens: list[Token]
    gold_score: float
    score_range: tuple[float, float]

    def normalized_score(self) -> float:
        lo, hi = self.score_range
        return (self.gold_score - lo) / (hi - lo)


@dataclass
class NgramInstance:
    """A window of ``n`` tokens with its gold error score 1/(1 + errors)."""

    script_id: str
    start: int
    n: int
    gold_error_score: float


@dataclass
class CorpusStats:
    script_count: int
    token_count: int
    error_token_ratio: float
    score_error_spearman: float  # NaN when scores or ratios are constant


def parse_annotated_script(
    raw: str,
    script_id: str,
    gold_score: float,
    score_range: tuple[float, float],
) -> Script:
    """Parse inline-annotated text into a flagged token stream.

    Tags must be well formed and non-nested. Tokens inside ``<i>`` are
    flagged, with the tokenized ``<c>`` content attached to the first of
    them. An empty ``<i>`` with a non-empty ``<c>`` marks a missing word:
    the token following the tag site is flagged and its correction becomes
    the missing words followed by its own surface, so that the generic
    replacement rule reinserts them.

    Raises ParseError (with a character offset) on malformed or unbalanced
    tags, and ParameterError when the gold score falls outside the range.
    """
    lo, hi = score_range
    if not lo < hi:
        raise ParameterError(f"degenerate score range {score_range}")
    if not lo <= gold_score <= hi:
        raise ParameterError(
            f"gold score {gold_score} outside range {score_range} for {script_id!r}"
        )

    tokens: list[Token] = []
    pending: list[tuple[list[str], str | None]] = []
    group = 0

    def flush_pending_into(tok: Token) -> None:
        nonlocal group
        inserted: list[str] = []
        for ctoks, etype in pending:
            inserted.extend(ctoks)
        if tok.is_error:
            # insertion immediately before another error span: prepend to
            # that span's correction when it has one, else drop with warning
            if tok.correction is None:
                warnings.warn(
                    f"{script_id}: missing-word correction dropped before "
                    f"uncorrected error at {tok.surface!r}",
                    MissingCorrectionWarning,
                )
            else:
                tok.correction = inserted + tok.correction
        else:
            tok.is_error = True
            tok.correction = inserted + [tok.surface]
            tok.error_type = pending[0][1]
            tok.group = group
            group += 1
        pending.clear()

    def emit_plain(text: str) -> None:
        for surf in tokenize(text):
            tok = Token(surf)
            if pending:
                flush_pending_into(tok)
            tokens.append(tok)

    pos = 0
    length = len(raw)
    while pos < length:
        lt = raw.find("<", pos)
        if lt == -1:
            emit_plain(raw[pos:])
            break
        emit_plain(raw[pos:lt])
        m = _E_OPEN.match(raw, lt)
        if m is None:
            raise ParseError("malformed or unbalanced tag", offset=lt)
        etype = m.group(1)
        pos = m.end()
        i_text, pos = _parse_section(raw, pos, "i", script_id)
        c_text, pos = _parse_section(raw, pos, "c", script_id)
        pos = _expect(raw, pos, "</e>")

        i_toks = tokenize(i_text) if i_text is not None else []
        c_toks = tokenize(c_text) if c_text is not None else None
        if i_toks:
            first = True
            for surf in i_toks:
                tok = Token(surf, is_error=True, error_type=etype, group=group)
                if first:
                    tok.correction = c_toks
                    if pending:
                        flush_pending_into(tok)
                    first = False
                tokens.append(tok)
            group += 1
        elif c_toks:
            pending.append((c_toks, etype))
        # empty <i> and empty/missing <c>: annotation carries nothing

    if pending:
        warnings.warn(
            f"{script_id}: missing-word correction at end of script dropped",
            MissingCorrectionWarning,
        )
    if not tokens:
        raise ParseError(f"script {script_id!r} has no tokens", offset=0)
    return Script(script_id, tokens, float(gold_score), (float(lo), float(hi)))


def _skip_ws(raw: str, pos: int) -> int:
    while pos < len(raw) and raw[pos] in " \t\n\r":
        pos += 1
    return pos


def _expect(raw: str, pos: int, literal: str) -> int:
    pos = _skip_ws(raw, pos)
    if not raw.startswith(literal, pos):
        raise ParseError(f"expected {literal!r}", offset=pos)
    return pos + len(literal)


def _parse_section(
    raw: str, pos: int, tag: str, script_id: str
) -> tuple[str | None, int]:
    """Parse an optional ``<i>...</i>`` or ``<c>...</c>`` body."""
    start = _skip_ws(raw, pos)
    if not raw.startswith(f"<{tag}>", start):
        return None, pos
    start += len(tag) + 2
    close = f"</{tag}>"
    lt = raw.find("<", start)
    if lt == -1:
        raise ParseError(f"unterminated <{tag}> in {script_id!r}", offset=start)
    if not raw.startswith(close, lt):
        raise ParseError(f"unexpected tag inside <{tag}>", offset=lt)
    return raw[start:lt], lt + len(close)


def render_annotated(script: Script) -> str:
    """Reconstruct inline-annotated text from a token stream.

    Spacing is normalized to single spaces; re-parsing the result yields a
    Script equal to the input (missing-word errors come back in their
    merged replacement form, which parses identically).
    """
    parts: list[str] = []
    toks = script.tokens
    i = 0
    while i < len(toks):
        t = toks[i]
        if not t.is_error:
            parts.append(t.surface)
            i += 1
            continue
        j = i
        while j < len(toks) and toks[j].is_error and toks[j].group == t.group:
            j += 1
        surfaces = " ".join(tok.surface for tok in toks[i:j])
        attr = f' type="{t.error_type}"' if t.error_type is not None else ""
        if t.correction is None:
            parts.append(f"<e{attr}><i>{surfaces}</i></e>")
        else:
            corr = " ".join(t.correction)
            parts.append(f"<e{attr}><i>{surfaces}</i><c>{corr}</c></e>")
        i = j
    return " ".join(parts)


def build_corrected_script(script: Script) -> Script:
    """Replace every error span with its correction; output has no flags.

    Spans without a correction are kept verbatim (unflagged) and a
    MissingCorrectionWarning is recorded. Deletions shrink the script;
    missing-word errors reinsert their words before the anchor token.
    """
    out: list[Token] = []
    toks = script.tokens
    i = 0
    while i < len(toks):
        t = toks[i]
        if not t.is_error:
            out.append(Token(t.surface))
            i += 1
            continue
        j = i
        while j < len(toks) and toks[j].is_error and toks[j].group == t.group:
            j += 1
        if t.correction is None:
            warnings.warn(
                f"{script.id}: error span {[tok.surface for tok in toks[i:j]]} "
                "has no correction; kept as-is",
                MissingCorrectionWarning,
            )
            out.extend(Token(tok.surface) for tok in toks[i:j])
        else:
            out.extend(Token(surf) for surf in t.correction)
        i = j
    return Script(script.id, out, script.gold_score, script.score_range)


def extract_ngrams(script: Script, n: int) -> list[NgramInstance]:
    """All contiguous n-windows, scored 1/(1 + flagged tokens in window).

    No padding: scripts shorter than ``n`` yield nothing. Windows that
    contain the answer separator are skipped.
    """
    if n < 1:
        raise ParameterError(f"ngram size must be >= 1, got {n}")
    toks = script.tokens
    out: list[NgramInstance] = []
    errs = 0
    seps = 0
    for i, t in enumerate(toks):
        errs += t.is_error
        seps += t.surface == ANSWER_END
        if i >= n:
            errs -= toks[i - n].is_error
            seps -= toks[i - n].surface == ANSWER_END
        if i >= n - 1 and seps == 0:
            out.append(NgramInstance(script.id, i - n + 1, n, 1.0 / (1 + errs)))
    return out


# ---------------------------------------------------------------------------
# synthetic corpus generation
# ---------------------------------------------------------------------------

_ONSETS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r",
           "s", "t", "v", "z", "ch", "st", "br", "pl"]
_VOWELS = ["a", "e", "i", "o", "u"]

ZIPF_EXPONENT = 1.2
SUCCESSORS_PER_WORD = 12


def _synthetic_vocabulary(size: int) -> list[str]:
    syllables = [o + v for o in _ONSETS for v in _VOWELS]
    words: list[str] = []
    for a in syllables:
        for b in syllables:
            words.append(a + b)
            if len(words) == size:
                return words
    k = 0
    while len(words) < size:
        words.append(f"{syllables[k % len(syllables)]}x{k}")
        k += 1
    return words


def generate_synthetic_corpus(
    vocab_size: int,
    script_count: int,
    mean_len: int,
    error_rate_range: tuple[float, float],
    seed: int,
    score_range: tuple[float, float] = (1.0, 40.0),
) -> list[Script]:
    """Deterministic stand-in corpus with score/error anticorrelation.

    Scripts are two answers from a seeded Zipf-weighted bigram language,
    joined by the answer separator. Each script draws an error rate
    uniformly from ``error_rate_range``; flagged tokens are random vocabulary
    substitutions whose correction is the original word. The holistic score
    is ``max - (max-min)*rate`` plus gaussian noise (sigma = 5% of the
    range), clamped to the range.
    """
    if vocab_size < 50:
        raise ParameterError(f"vocab_size must be >= 50, got {vocab_size}")
    if mean_len < 20:
        raise ParameterError(f"mean_len must be >= 20, got {mean_len}")
    if script_count < 1:
        raise ParameterError(f"script_count must be >= 1, got {script_count}")
    rlo, rhi = error_rate_range
    if not (0.0 <= rlo <= rhi <= 0.5):
        raise ParameterError(f"error rate range must satisfy 0 <= lo <= hi <= 0.5, got {error_rate_range}")
    slo, shi = score_range
    if not slo < shi:
        raise ParameterError(f"degenerate score range {score_range}")

    rng = np.random.default_rng(seed)
    words = _synthetic_vocabulary(vocab_size)
    base = 1.0 / np.arange(1, vocab_size + 1) ** ZIPF_EXPONENT
    base /= base.sum()
    start_cum = np.cumsum(base)

    k_succ = min(SUCCESSORS_PER_WORD, vocab_size - 1)
    succ = np.empty((vocab_size, k_succ), dtype=np.int64)
    succ_cum = np.empty((vocab_size, k_succ))
    for w in range(vocab_size):
        chosen = rng.choice(vocab_size, size=k_succ, replace=False, p=base)
        succ[w] = chosen
        wts = base[chosen]
        succ_cum[w] = np.cumsum(wts / wts.sum())

    def draw(cum: np.ndarray) -> int:
        return min(int(np.searchsorted(cum, rng.random(), side="right")), len(cum) - 1)

    scripts: list[Script] = []
    for s in range(script_count):
        rate = rng.uniform(rlo, rhi)
        total = max(20, int(rng.poisson(mean_len)))
        len_a = max(4, int(round(total * rng.uniform(0.35, 0.65))))
        len_b = max(4, total - len_a)
        tokens: list[Token] = []
        group = 0
        for part_idx, part_len in enumerate((len_a, len_b)):
            w = draw(start_cum)
            for _ in range(part_len):
                if rate > 0.0 and rng.random() < rate:
                    c = int(rng.integers(vocab_size - 1))
                    if c >= w:
                        c += 1
                    tokens.append(Token(words[c], is_error=True,
                                        correction=[words[w]],
                                        error_type="S", group=group))
                    group += 1
                else:
                    tokens.append(Token(words[w]))
                w = int(succ[w, draw(succ_cum[w])])
            if part_idx == 0:
                tokens.append(Token(ANSWER_END))
        gold = shi - (shi - slo) * rate + rng.normal(0.0, 0.05 * (shi - slo))
        gold = float(min(max(gold, slo), shi))
        scripts.append(Script(f"syn{seed}-{s:04d}", tokens, gold, (slo, shi)))
    return scripts


def compute_stats(corpus: list[Script]) -> CorpusStats:
    """Corpus-level token/error counts and the score-vs-error-ratio Spearman.

    The Spearman value is NaN when either side has zero variance (e.g. an
    error-free corpus).
    """
    from .errors import UndefinedMetricError
    from .metrics import spearman  # local import: metrics depends on corpus

    if not corpus:
        raise ParameterError("empty corpus")
    total = 0
    flagged = 0
    ratios = []
    golds = []
    for s in corpus:
        n_tok = len(s.tokens)
        n_err = sum(t.is_error for t in s.tokens)
        total += n_tok
        flagged += n_err
        ratios.append(n_err / n_tok if n_tok else 0.0)
        golds.append(s.gold_score)
    if len(corpus) >= 2:
        try:
            rho = spearman(ratios, golds)
        except UndefinedMetricError:
            rho = float("nan")
    else:
        rho = float("nan")
    return CorpusStats(len(corpus), total, flagged / total, rho)


# ---------------------------------------------------------------------------
# JSON-lines corpus files
# ---------------------------------------------------------------------------

def save_corpus(corpus: list[Script], path) -> None:
    """Write one JSON object per script; the annotated text is the payload."""
    with open(path, "w", encoding="utf-8") as f:
        for s in corpus:
            lo, hi = s.score_range
            f.write(json.dumps({
                "id": s.id,
                "score": s.gold_score,
                "score_min": lo,
                "score_max": hi,
                "text": render_annotated(s),
            }) + "\n")


def load_corpus(path) -> list[Script]:
    """Read a JSON-lines corpus; flags are re-derived by parsing each line."""
    scripts: list[Script] = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}: invalid JSON: {exc.msg}", line=lineno) from exc
            missing = {"id", "score", "score_min", "score_max", "text"} - set(obj)
            if missing:
                raise FormatError(f"{path}: missing keys {sorted(missing)}", line=lineno)
            try:
                scripts.append(parse_annotated_script(
                    obj["text"], obj["id"], float(obj["score"]),
                    (float(obj["score_min"]), float(obj["score_max"])),
                ))
            except ParseError as exc:
                raise ParseError(f"{path} line {lineno}: {exc}", offset=exc.offset) from exc
    return scripts
