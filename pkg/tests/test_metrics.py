"""Metric oracles: pair bookkeeping, diversity, perplexity, copy detection."""

from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from versekit.corpus import GenerationSpec, format_prompt
from versekit.decode import CandidateStanza, Verse, beam_search
from versekit.lm import train_ngram
from versekit.metrics import (
    copyright_rate,
    copyright_tokens,
    distinct_n,
    evaluate_generations,
    longest_near_match,
    perplexity,
    pooled_distinct_n,
    rhyme_fpr,
    rhyme_pair_sets,
    rhyme_precision,
    structure_adherence,
)
from versekit.phonetics import PronouncingDictionary
from versekit.rhyme import RhymeSchema, rhymes

_DICT = PronouncingDictionary.bundled()
_WORDS = [
    "tell", "hell", "bell", "pain", "rain", "train", "dive", "ride",
    "night", "light", "river", "shiver", "field", "wheel", "day", "way",
    "gold", "old", "!!!", "glorp",
]


def _oracle_rp_fpr(finals, schema) -> tuple[float, float]:
    """Brute-force double loop over verse pairs, independent of the library
    bookkeeping (the rhyme predicate itself is oracled elsewhere)."""
    n = min(len(schema), len(finals))
    required, forbidden = [], []
    for i in range(n):
        for j in range(i + 1, n):
            (required if schema.letters[i] == schema.letters[j] else forbidden).append(
                (i, j)
            )

    def pair(i: int, j: int) -> bool:
        try:
            return rhymes(_DICT, finals[i], finals[j])
        except ValueError:
            return False

    rp = sum(pair(i, j) for i, j in required) / len(required) if required else 1.0
    fpr = sum(pair(i, j) for i, j in forbidden) / len(forbidden) if forbidden else 0.0
    return rp, fpr


def _oracle_longest(gen, ref) -> int:
    """All-windows scan allowing one strictly interior substitution."""
    best = 0
    for i in range(len(gen)):
        for j in range(len(ref)):
            limit = min(len(gen) - i, len(ref) - j)
            for length in range(best + 1, limit + 1):
                diffs = [p for p in range(length) if gen[i + p] != ref[j + p]]
                if not diffs or (len(diffs) == 1 and 0 < diffs[0] < length - 1):
                    best = length
    return best


def _schema_strategy(max_len: int = 6):
    return st.lists(
        st.integers(min_value=0, max_value=3), min_size=1, max_size=max_len
    ).map(
        lambda raw: RhymeSchema(
            tuple(
                "ABCD"[sorted(set(raw[: i + 1]), key=raw.index).index(v)]
                for i, v in enumerate(raw)
            )
        )
    )


class TestRhymePairSets:
    def test_required_and_forbidden_split(self):
        sets = rhyme_pair_sets(RhymeSchema.from_string("A A B"), 3)
        assert sets.required == frozenset({(0, 1)})
        assert sets.forbidden == frozenset({(0, 2), (1, 2)})

    def test_truncates_to_available_positions(self):
        sets = rhyme_pair_sets(RhymeSchema.from_string("A A B"), 2)
        assert sets.required == frozenset({(0, 1)})
        assert sets.forbidden == frozenset()


class TestRhymePrecisionAndFpr:
    def test_known_values(self, dictionary):
        schema = RhymeSchema.from_string("A A B B")
        finals = ["tell", "hell", "dive", "ride"]
        assert rhyme_precision(finals, schema, dictionary) == 1.0
        assert rhyme_fpr(finals, schema, dictionary) == 0.0

    def test_partial_precision(self, dictionary):
        schema = RhymeSchema.from_string("A A A")
        finals = ["tell", "hell", "pain"]
        assert rhyme_precision(finals, schema, dictionary) == pytest.approx(1 / 3)

    def test_vacuous_conventions(self, dictionary):
        assert rhyme_precision(["tell", "pain"], RhymeSchema.from_string("A B"),
                               dictionary) == 1.0
        assert rhyme_fpr(["tell", "hell"], RhymeSchema.from_string("A A"),
                         dictionary) == 0.0

    def test_printed_formula_is_the_complement(self, dictionary):
        schema = RhymeSchema.from_string("A B")
        finals = ["tell", "hell"]  # forbidden pair that rhymes anyway
        prose = rhyme_fpr(finals, schema, dictionary)
        printed = rhyme_fpr(finals, schema, dictionary, printed_formula=True)
        assert prose == 1.0
        assert printed == 0.0

    def test_junk_tokens_never_rhyme(self, dictionary):
        schema = RhymeSchema.from_string("A A")
        assert rhyme_precision(["!!!", "tell"], schema, dictionary) == 0.0

    @settings(max_examples=60)
    @given(
        schema=_schema_strategy(),
        finals=st.lists(st.sampled_from(_WORDS), min_size=1, max_size=6),
    )
    def test_matches_double_loop_oracle(self, schema, finals):
        rp_oracle, fpr_oracle = _oracle_rp_fpr(finals, schema)
        assert rhyme_precision(finals, schema, _DICT) == pytest.approx(rp_oracle)
        assert rhyme_fpr(finals, schema, _DICT) == pytest.approx(fpr_oracle)
        printed = rhyme_fpr(finals, schema, _DICT, printed_formula=True)
        n = min(len(schema), len(finals))
        forbidden = sum(
            1
            for i in range(n)
            for j in range(i + 1, n)
            if schema.letters[i] != schema.letters[j]
        )
        if forbidden:
            assert printed == pytest.approx(1.0 - fpr_oracle)
        else:
            assert printed == 0.0


class TestPerplexity:
    def test_mean_nll_relation(self):
        model = train_ngram([("", "go on go on")], order=2, k=0.1)
        lp, count = model.score_text("", "go on go")
        assert perplexity(model, "", "go on go") == pytest.approx(
            math.exp(-lp / count), abs=1e-12
        )

    def test_empty_target_rejected(self):
        model = train_ngram([("", "go on")], order=1, k=0.1)
        with pytest.raises(ValueError):
            perplexity(model, "", "")


class TestDistinctN:
    @pytest.mark.parametrize(
        ("tokens", "n", "expected"),
        [
            (["a", "b", "a", "b"], 2, 2 / 3),
            (["a", "a", "a", "a"], 1, 1 / 4),
            (["a", "a", "a", "a"], 2, 1 / 3),
            (["a", "b", "c"], 3, 1.0),
            (["a", "b"], 3, 0.0),
        ],
    )
    def test_hand_counts(self, tokens, n, expected):
        assert distinct_n(tokens, n) == pytest.approx(expected)

    def test_n_validated(self):
        with pytest.raises(ValueError):
            distinct_n(["a"], 0)

    def test_pooled_counts_within_items_only(self):
        assert pooled_distinct_n([["a", "b"], ["a", "b"]], 2) == pytest.approx(0.5)
        assert pooled_distinct_n([["a", "b"], ["b", "a"]], 2) == pytest.approx(1.0)
        assert pooled_distinct_n([["a"], ["b"]], 2) == 0.0

    @given(st.lists(st.sampled_from("ab"), min_size=1, max_size=10))
    def test_single_stream_pooling_matches_distinct(self, tokens):
        assert pooled_distinct_n([tokens], 2) == distinct_n(tokens, 2)


class TestCopyright:
    def test_tokenization(self):
        assert copyright_tokens("Tell, the RIVER!") == ["tell", "the", "river"]
        assert copyright_tokens("-- ?? ") == []

    @pytest.mark.parametrize(
        ("gen", "ref", "expected"),
        [
            ("a b c d e", "a b c d e", 5),
            ("a b c d e", "a b x d e", 5),
            ("x b c d e", "a b c d e", 4),
            ("a x c y e", "a b c d e", 3),
            ("a a a", "b b b", 0),
            ("", "a b", 0),
        ],
    )
    def test_hand_cases(self, gen, ref, expected):
        assert longest_near_match(gen.split(), ref.split()) == expected

    def test_substitution_must_be_interior(self):
        # The mismatch sits at a window edge, so the window cannot absorb it.
        assert longest_near_match("a b c".split(), "a b x".split()) == 2
        assert longest_near_match("x b c".split(), "c b c".split()) == 2

    @settings(max_examples=150)
    @given(
        gen=st.lists(st.sampled_from("ab"), max_size=12),
        ref=st.lists(st.sampled_from("ab"), max_size=12),
    )
    def test_matches_window_oracle(self, gen, ref):
        assert longest_near_match(gen, ref) == _oracle_longest(gen, ref)

    def test_threshold_constructions(self):
        base = [f"w{i}" for i in range(21)]
        near = list(base)
        near[10] = "sub"
        rate, reports = copyright_rate([base], [near], threshold=20)
        assert rate == 1.0
        assert reports[0].longest == 21
        assert reports[0].at_risk
        short = base[:19]
        near_short = list(short)
        near_short[9] = "sub"
        rate, reports = copyright_rate([short], [near_short], threshold=20)
        assert rate == 0.0
        assert reports[0].longest == 19
        assert not reports[0].at_risk

    def test_rate_pools_references(self):
        gen = ["a", "b", "c"]
        rate, reports = copyright_rate([gen, ["z"]], [["a", "b", "c"]], threshold=3)
        assert rate == 0.5
        assert reports[0].ratio == 1.0
        assert reports[1].longest == 0

    def test_validation(self):
        with pytest.raises(ValueError):
            copyright_rate([], [["a"]], threshold=20)
        with pytest.raises(ValueError):
            copyright_rate([["a"]], [["a"]], threshold=0)


class TestStructureAdherence:
    def _stanza(self, *finals_per_verse: tuple[str, str]) -> CandidateStanza:
        verses = tuple(
            Verse("A", word, ("x", final)) for word, final in finals_per_verse
        )
        return CandidateStanza(verses=verses, lm_logprob=0.0)

    def test_exact_structure(self):
        spec = GenerationSpec(schema=RhymeSchema.from_string("A A"))
        stanza = self._stanza(("tell", "tell"), ("hell", "hell"))
        assert structure_adherence([stanza], [spec]) == (1.0, 1.0)

    def test_partial_scores(self):
        spec = GenerationSpec(schema=RhymeSchema.from_string("A A"))
        short = self._stanza(("tell", "tell"))
        drifted = self._stanza(("tell", "pain"), ("hell", "hell"))
        accuracy, coverage = structure_adherence([short, drifted], [spec, spec])
        assert accuracy == 0.5
        assert coverage == pytest.approx(2 / 3)

    def test_empty_inputs_are_vacuously_perfect(self):
        assert structure_adherence([], []) == (1.0, 1.0)

    def test_length_mismatch_rejected(self):
        spec = GenerationSpec(schema=RhymeSchema.from_string("A"))
        with pytest.raises(ValueError):
            structure_adherence([], [spec])


class TestEvaluateGenerations:
    def test_full_battery(self, model, dictionary, records):
        specs = [
            GenerationSpec(schema=RhymeSchema.from_string(s), seed=i, max_verse_tokens=6)
            for i, s in enumerate(["A A", "A B B", "A B A B"])
        ]
        stanzas = [beam_search(model, spec, beam_width=2) for spec in specs]
        references = [(format_prompt(spec), stanza.to_target_text())
                      for spec, stanza in zip(specs, stanzas)]
        corpus_tokens = [
            [w for line in record.lines for w in line.lower().split()]
            for record in records[:50]
        ]
        report, rows = evaluate_generations(
            stanzas,
            specs,
            dictionary,
            model=model,
            references=references,
            corpus_tokens=corpus_tokens,
            copyright_threshold=8,
        )
        assert len(rows) == 3
        assert 0.0 <= report.rhyme_precision <= 1.0
        assert 0.0 <= report.rhyme_fpr <= 1.0
        assert report.perplexity is not None and report.perplexity > 0
        assert report.copyright_rate is not None
        assert report.line_count_accuracy == 1.0
        assert report.mauve is None
        for row in rows:
            assert set(row) >= {"rhyme_precision", "rhyme_fpr", "finals", "schema"}

    def test_optional_inputs_are_skipped(self, model, dictionary):
        spec = GenerationSpec(schema=RhymeSchema.from_string("A"), max_verse_tokens=4)
        stanza = beam_search(model, spec, beam_width=1)
        report, _ = evaluate_generations([stanza], [spec], dictionary)
        assert report.perplexity is None
        assert report.copyright_rate is None

    def test_empty_batch_rejected(self, dictionary):
        with pytest.raises(ValueError):
            evaluate_generations([], [], dictionary)
