import json
import math

import numpy as np
import pytest

from lexembed.corpus import (
    ANSWER_END,
    Script,
    Token,
    build_corrected_script,
    compute_stats,
    extract_ngrams,
    generate_synthetic_corpus,
    load_corpus,
    parse_annotated_script,
    render_annotated,
    save_corpus,
    tokenize,
)
from lexembed.errors import (
    FormatError,
    MissingCorrectionWarning,
    ParameterError,
    ParseError,
)

RANGE = (1.0, 40.0)


def parse(text, gold=20.0):
    return parse_annotated_script(text, "t", gold, RANGE)


class TestTokenize:
    def test_trailing_period(self):
        assert tokenize("The box office.") == ["The", "box", "office", "."]

    def test_internal_apostrophe_kept(self):
        assert tokenize("don't stop") == ["don't", "stop"]

    def test_wrapping_punctuation(self):
        assert tokenize("(really?)") == ["(", "really", "?", ")"]

    def test_empty_input(self):
        assert tokenize("") == []
        assert tokenize("   \n\t ") == []

    def test_all_punctuation_chunk(self):
        assert tokenize("...") == [".", ".", "."]

    def test_hyphen_kept(self):
        assert tokenize("well-known fact") == ["well-known", "fact"]


class TestParse:
    def test_replacement_error(self):
        s = parse('The problems started <e type="RT"><i>in</i><c>at</c></e> '
                  "the box office.")
        surfaces = [t.surface for t in s.tokens]
        assert surfaces == ["The", "problems", "started", "in", "the", "box",
                            "office", "."]
        flagged = [t for t in s.tokens if t.is_error]
        assert len(flagged) == 1
        assert flagged[0].surface == "in"
        assert flagged[0].correction == ["at"]
        assert flagged[0].error_type == "RT"

    def test_no_tags_means_no_flags(self):
        s = parse("Nothing wrong here at all.")
        assert all(not t.is_error for t in s.tokens)

    def test_error_at_script_start(self):
        s = parse('<e type="UN"><i>informations</i><c>information</c></e> '
                  "are useful")
        assert s.tokens[0].surface == "informations"
        assert s.tokens[0].is_error
        assert s.tokens[0].correction == ["information"]
        assert not s.tokens[1].is_error

    def test_multi_token_span_flags_all(self):
        s = parse('I <e type="X"><i>very much so</i><c>really</c></e> agree')
        flagged = [t for t in s.tokens if t.is_error]
        assert [t.surface for t in flagged] == ["very", "much", "so"]
        assert flagged[0].correction == ["really"]
        assert flagged[1].correction is None
        assert flagged[2].correction is None

    def test_deletion_has_empty_correction(self):
        s = parse('I like <e type="UD"><i>the</i><c></c></e> music')
        flagged = [t for t in s.tokens if t.is_error][0]
        assert flagged.surface == "the"
        assert flagged.correction == []

    def test_missing_word_flags_following_token(self):
        s = parse('He went <e type="MD"><i></i><c>to</c></e> school')
        assert [t.surface for t in s.tokens] == ["He", "went", "school"]
        anchor = s.tokens[2]
        assert anchor.is_error
        assert anchor.correction == ["to", "school"]

    def test_omitted_correction_is_none(self):
        s = parse('bad <e type="X"><i>werd</i></e> here')
        flagged = [t for t in s.tokens if t.is_error][0]
        assert flagged.correction is None

    def test_two_adjacent_errors_stay_separate(self):
        s = parse('<e type="A"><i>aa bb</i><c>x</c></e>'
                  '<e type="B"><i>cc</i><c>y</c></e> end')
        groups = {t.group for t in s.tokens if t.is_error}
        assert len(groups) == 2
        corrected = build_corrected_script(s)
        assert [t.surface for t in corrected.tokens] == ["x", "y", "end"]

    @pytest.mark.parametrize("bad", [
        "unclosed <e type=\"X\"><i>word</i>",
        "stray close word</e>",
        "nested <e type=\"A\"><i><e type=\"B\"><i>x</i></e></i></e>",
        "just a < sign",
        "<e type=\"X\"><i>unterminated",
        "<e type=\"X\"><c>out</c><i>of order extra</i></e>",
        "<i>bare incorrect</i>",
        "<e type=\"X\"><i>a</i><c>b</c>",
    ])
    def test_malformed_inputs_raise_parse_error(self, bad):
        with pytest.raises(ParseError):
            parse(bad)

    def test_parse_error_carries_offset(self):
        with pytest.raises(ParseError) as err:
            parse("fine text then < broken")
        assert err.value.offset == 15

    def test_score_outside_range_rejected(self):
        with pytest.raises(ParameterError):
            parse("some text", gold=99.0)

    def test_empty_script_rejected(self):
        with pytest.raises(ParseError):
            parse("   ")

    def test_type_attribute_optional(self):
        s = parse("a <e><i>b</i><c>c</c></e> d")
        flagged = [t for t in s.tokens if t.is_error][0]
        assert flagged.error_type is None


class TestRenderRoundTrip:
    @pytest.mark.parametrize("text", [
        'The problems started <e type="RT"><i>in</i><c>at</c></e> the box office.',
        "plain text with no annotations at all",
        'I <e type="X"><i>very much so</i><c>really</c></e> agree',
        'He went <e type="MD"><i></i><c>to</c></e> school today',
        'drop <e type="UD"><i>the</i><c></c></e> it',
        'keep <e type="X"><i>werd</i></e> asis',
        'two answers answer_end second part here',
    ])
    def test_parse_render_parse_identity(self, text):
        s1 = parse(text)
        s2 = parse(render_annotated(s1))
        assert s1 == s2

    def test_jsonl_round_trip(self, tmp_path):
        corpus = generate_synthetic_corpus(60, 8, 30, (0.0, 0.4), seed=5)
        path = tmp_path / "corpus.jsonl"
        save_corpus(corpus, path)
        again = load_corpus(path)
        assert again == corpus

    def test_jsonl_format(self, tmp_path):
        corpus = generate_synthetic_corpus(60, 2, 25, (0.0, 0.2), seed=9)
        path = tmp_path / "c.jsonl"
        save_corpus(corpus, path)
        lines = path.read_text().strip().split("\n")
        assert len(lines) == 2
        obj = json.loads(lines[0])
        assert set(obj) == {"id", "score", "score_min", "score_max", "text"}

    def test_load_bad_json_reports_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"id": "a", "score": 2, "score_min": 1, '
                        '"score_max": 40, "text": "ok fine"}\nnot json\n')
        with pytest.raises(FormatError) as err:
            load_corpus(path)
        assert err.value.line == 2

    def test_load_missing_keys(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"id": "a", "text": "ok"}\n')
        with pytest.raises(FormatError):
            load_corpus(path)


class TestCorrectedScript:
    def test_replacement_applied(self):
        s = parse('The problems started <e type="RT"><i>in</i><c>at</c></e> '
                  "the box office.")
        c = build_corrected_script(s)
        assert [t.surface for t in c.tokens] == [
            "The", "problems", "started", "at", "the", "box", "office", "."]
        assert all(not t.is_error for t in c.tokens)

    def test_error_free_script_is_token_identical(self):
        s = parse("Nothing wrong here.")
        c = build_corrected_script(s)
        assert c.tokens == s.tokens
        assert c.gold_score == s.gold_score

    def test_deletion_shrinks_script(self):
        s = parse('I like <e type="UD"><i>the</i><c></c></e> music')
        c = build_corrected_script(s)
        assert [t.surface for t in c.tokens] == ["I", "like", "music"]
        assert len(c.tokens) == len(s.tokens) - 1

    def test_missing_word_inserted_before_anchor(self):
        s = parse('He went <e type="MD"><i></i><c>to</c></e> school')
        c = build_corrected_script(s)
        assert [t.surface for t in c.tokens] == ["He", "went", "to", "school"]

    def test_span_without_correction_kept_with_warning(self):
        s = parse('bad <e type="X"><i>werd</i></e> here')
        with pytest.warns(MissingCorrectionWarning):
            c = build_corrected_script(s)
        assert [t.surface for t in c.tokens] == ["bad", "werd", "here"]
        assert all(not t.is_error for t in c.tokens)

    def test_output_never_flagged(self):
        corpus = generate_synthetic_corpus(80, 10, 30, (0.1, 0.4), seed=3)
        for s in corpus:
            assert all(not t.is_error for t in build_corrected_script(s).tokens)


def _flag_script(flags, sep_at=None):
    tokens = []
    for i, f in enumerate(flags):
        if sep_at is not None and i == sep_at:
            tokens.append(Token(ANSWER_END))
        tokens.append(Token(f"w{i}", is_error=bool(f), group=i if f else None,
                            correction=["c"] if f else None))
    return Script("s", tokens, 20.0, RANGE)


class TestExtractNgrams:
    def test_no_errors_scores_one(self):
        grams = extract_ngrams(_flag_script([0, 0, 0]), 3)
        assert len(grams) == 1
        assert grams[0].gold_error_score == 1.0

    def test_two_errors_scores_third(self):
        grams = extract_ngrams(_flag_script([1, 0, 1]), 3)
        assert grams[0].gold_error_score == pytest.approx(1 / 3)

    def test_three_errors_scores_quarter(self):
        grams = extract_ngrams(_flag_script([1, 1, 1]), 3)
        assert grams[0].gold_error_score == pytest.approx(1 / 4)

    def test_short_script_yields_nothing(self):
        assert extract_ngrams(_flag_script([0, 0]), 3) == []

    def test_window_count(self):
        grams = extract_ngrams(_flag_script([0] * 10), 4)
        assert len(grams) == 7

    def test_separator_windows_skipped(self):
        s = _flag_script([0, 0, 0, 0], sep_at=2)  # w0 w1 sep w2 w3
        grams = extract_ngrams(s, 2)
        starts = [g.start for g in grams]
        assert starts == [0, 3]

    def test_scores_are_exact_unit_fractions(self):
        rng = np.random.default_rng(11)
        for _ in range(30):
            flags = (rng.random(12) < 0.4).astype(int).tolist()
            for n in (1, 2, 3):
                for g in extract_ngrams(_flag_script(flags), n):
                    window = flags[g.start:g.start + n]
                    assert g.gold_error_score == 1.0 / (1 + sum(window))

    def test_bad_n(self):
        with pytest.raises(ParameterError):
            extract_ngrams(_flag_script([0, 0]), 0)


class TestSyntheticCorpus:
    def test_determinism(self):
        a = generate_synthetic_corpus(60, 10, 25, (0.0, 0.3), seed=4)
        b = generate_synthetic_corpus(60, 10, 25, (0.0, 0.3), seed=4)
        assert a == b

    def test_different_seeds_differ(self):
        a = generate_synthetic_corpus(60, 10, 25, (0.0, 0.3), seed=4)
        b = generate_synthetic_corpus(60, 10, 25, (0.0, 0.3), seed=5)
        assert a != b

    def test_zero_error_range(self):
        corpus = generate_synthetic_corpus(60, 10, 25, (0.0, 0.0), seed=4)
        for s in corpus:
            assert all(not t.is_error for t in s.tokens)
            # gold is max minus the 5%-of-range noise only
            assert s.gold_score > 40.0 - 4 * 0.05 * 39.0

    def test_anticorrelation(self):
        corpus = generate_synthetic_corpus(200, 50, 80, (0.0, 0.3), seed=1)
        stats = compute_stats(corpus)
        assert stats.score_error_spearman <= -0.5

    def test_one_separator_per_script(self):
        corpus = generate_synthetic_corpus(60, 10, 25, (0.0, 0.3), seed=4)
        for s in corpus:
            assert sum(t.surface == ANSWER_END for t in s.tokens) == 1

    def test_corrections_are_single_original_words(self):
        corpus = generate_synthetic_corpus(60, 10, 25, (0.2, 0.4), seed=4)
        for s in corpus:
            for t in s.tokens:
                if t.is_error:
                    assert t.correction is not None and len(t.correction) == 1
                    assert t.correction[0] != t.surface

    @pytest.mark.parametrize("kwargs", [
        dict(vocab_size=10),
        dict(mean_len=5),
        dict(error_rate_range=(0.4, 0.2)),
        dict(error_rate_range=(0.0, 0.9)),
        dict(error_rate_range=(-0.1, 0.2)),
        dict(script_count=0),
    ])
    def test_bad_parameters(self, kwargs):
        base = dict(vocab_size=60, script_count=5, mean_len=25,
                    error_rate_range=(0.0, 0.3), seed=0)
        base.update(kwargs)
        with pytest.raises(ParameterError):
            generate_synthetic_corpus(**base)


class TestComputeStats:
    def test_error_free_ratio_zero(self):
        s = parse("all perfectly fine here")
        stats = compute_stats([s])
        assert stats.error_token_ratio == 0.0
        assert math.isnan(stats.score_error_spearman)

    def test_all_flagged_ratio_one(self):
        s = parse('<e type="X"><i>a b c</i><c>d</c></e>')
        stats = compute_stats([s])
        assert stats.error_token_ratio == 1.0

    def test_empty_corpus_rejected(self):
        with pytest.raises(ParameterError):
            compute_stats([])

    def test_constant_scores_give_nan(self):
        corpus = generate_synthetic_corpus(60, 10, 25, (0.0, 0.0), seed=4)
        for s in corpus:
            s.gold_score = 30.0
        assert math.isnan(compute_stats(corpus).score_error_spearman)


class TestParserFuzz:
    def test_random_corruption_never_crashes(self):
        rng = np.random.default_rng(99)
        base = ('The problems started <e type="RT"><i>in</i><c>at</c></e> the '
                'box office and <e type="UN"><i>informations</i>'
                '<c>information</c></e> flowed <e type="MD"><i></i><c>to</c></e> us.')
        chars = list(base)
        for _ in range(300):
            mutated = chars.copy()
            for _ in range(rng.integers(1, 4)):
                op = rng.integers(3)
                pos = int(rng.integers(len(mutated)))
                if op == 0 and len(mutated) > 1:
                    del mutated[pos]
                elif op == 1:
                    mutated.insert(pos, rng.choice(list('<>/eic"x ')))
                else:
                    mutated[pos] = rng.choice(list('<>/eic"x '))
            try:
                parse("".join(mutated))
            except ParseError:
                pass
