"""Automatic evaluation: rhyme adherence, fluency, diversity, copying.

All metrics are pure functions.  Schema-based metrics compare the verse
positions the schema pairs up (R) or keeps apart (NR); vacuous sets use
fixed conventions (RP 1.0, FPR 0.0) so aggregation never divides by zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .lm import NGramModel
from .phonetics import ENGLISH_PROFILE, LanguageProfile, PronouncingDictionary, normalize_word
from .rhyme import ConsonantClassTable, DEFAULT_CONSONANT_TABLE, RhymeSchema, rhyme_verdict

if TYPE_CHECKING:
    from .corpus import GenerationSpec
    from .decode import CandidateStanza


@dataclass(frozen=True)
class RhymePairSets:
    """Unordered verse-position pairs the schema requires and forbids."""

    required: frozenset[tuple[int, int]]
    forbidden: frozenset[tuple[int, int]]


def rhyme_pair_sets(schema: RhymeSchema, n_positions: int) -> RhymePairSets:
    """Split all pairs over min(|schema|, n_positions) positions into R/NR."""
    n = min(len(schema), n_positions)
    required = set()
    forbidden = set()
    for i in range(n):
        for j in range(i + 1, n):
            if schema.letters[i] == schema.letters[j]:
                required.add((i, j))
            else:
                forbidden.add((i, j))
    return RhymePairSets(frozenset(required), frozenset(forbidden))


def _pair_rhymes(
    dictionary: PronouncingDictionary,
    word_a: str,
    word_b: str,
    profile: LanguageProfile,
    table: ConsonantClassTable,
) -> bool:
    # tokens that normalize to nothing cannot rhyme with anything
    try:
        return rhyme_verdict(dictionary, word_a, word_b, profile, table).rhymes
    except ValueError:
        return False


def rhyme_precision(
    finals: Sequence[str],
    schema: RhymeSchema,
    dictionary: PronouncingDictionary,
    profile: LanguageProfile = ENGLISH_PROFILE,
    table: ConsonantClassTable = DEFAULT_CONSONANT_TABLE,
) -> float:
    """Fraction of schema-required pairs whose final words rhyme; 1.0 if none."""
    pairs = rhyme_pair_sets(schema, len(finals)).required
    if not pairs:
        return 1.0
    hits = sum(
        _pair_rhymes(dictionary, finals[i], finals[j], profile, table)
        for i, j in pairs
    )
    return hits / len(pairs)


def rhyme_fpr(
    finals: Sequence[str],
    schema: RhymeSchema,
    dictionary: PronouncingDictionary,
    profile: LanguageProfile = ENGLISH_PROFILE,
    table: ConsonantClassTable = DEFAULT_CONSONANT_TABLE,
    *,
    printed_formula: bool = False,
) -> float:
    """Fraction of schema-forbidden pairs that rhyme anyway; 0.0 if none.

    printed_formula flips each pair's contribution to (1 - rhyme), the
    complementary reading; the default follows the metric's name.
    """
    pairs = rhyme_pair_sets(schema, len(finals)).forbidden
    if not pairs:
        return 0.0
    hits = sum(
        _pair_rhymes(dictionary, finals[i], finals[j], profile, table)
        for i, j in pairs
    )
    if printed_formula:
        return (len(pairs) - hits) / len(pairs)
    return hits / len(pairs)


def perplexity(model: NGramModel, prompt: str, target: str) -> float:
    """exp of the mean negative log-likelihood over the target tokens."""
    logprob, count = model.score_text(prompt, target)
    if count == 0:
        raise ValueError("empty target")
    return float(np.exp(-logprob / count))


def distinct_n(tokens: Sequence[str], n: int) -> float:
    """Unique n-grams over total n-grams; 0.0 when fewer than n tokens."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    total = len(tokens) - n + 1
    if total < 1:
        return 0.0
    grams = {tuple(tokens[i : i + n]) for i in range(total)}
    return len(grams) / total


def pooled_distinct_n(streams: Sequence[Sequence[str]], n: int) -> float:
    """distinct-n over a corpus: n-grams pooled within (not across) items."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    total = 0
    grams: set[tuple[str, ...]] = set()
    for tokens in streams:
        count = len(tokens) - n + 1
        for i in range(max(0, count)):
            grams.add(tuple(tokens[i : i + n]))
        total += max(0, count)
    if total == 0:
        return 0.0
    return len(grams) / total


def copyright_tokens(text: str) -> list[str]:
    """Lowercased, punctuation-stripped word tokens for copy matching."""
    tokens = []
    for raw in text.split():
        word = normalize_word(raw)
        if word:
            tokens.append(word)
    return tokens


def _diagonal_best(
    gen: Sequence[str], ref: Sequence[str], gi: int, ri: int, length: int
) -> int:
    """Longest window along one alignment with at most one interior mismatch."""
    best = 0
    prev = 0
    gap = False
    cur = 0
    for t in range(length):
        if gen[gi + t] == ref[ri + t]:
            cur += 1
            continue
        best = max(best, cur)
        if gap and prev > 0 and cur > 0:
            best = max(best, prev + 1 + cur)
        prev = cur
        gap = True
        cur = 0
    best = max(best, cur)
    if gap and prev > 0 and cur > 0:
        best = max(best, prev + 1 + cur)
    return best


def longest_near_match(gen: Sequence[str], ref: Sequence[str]) -> int:
    """Length of the longest shared window allowing one substituted token.

    The mismatch, if any, must be strictly interior to the window, so the
    window always starts and ends on matching tokens.
    """
    n, m = len(gen), len(ref)
    if n == 0 or m == 0:
        return 0
    best = 0
    for d in range(-(n - 1), m):
        gi = max(0, -d)
        ri = gi + d
        length = min(n - gi, m - ri)
        if length > best:
            best = max(best, _diagonal_best(gen, ref, gi, ri, length))
    return best


@dataclass(frozen=True)
class CopyrightReport:
    longest: int
    ratio: float
    at_risk: bool

    def to_json(self) -> dict:
        return {"longest": self.longest, "ratio": self.ratio, "at_risk": self.at_risk}


def copyright_rate(
    generations: Sequence[Sequence[str]],
    corpus: Sequence[Sequence[str]],
    threshold: int = 20,
) -> tuple[float, list[CopyrightReport]]:
    """Fraction of generations with a near-verbatim corpus window >= threshold."""
    if threshold < 1:
        raise ValueError(f"threshold must be >= 1, got {threshold}")
    if not generations:
        raise ValueError("no generations to score")
    reports = []
    for gen in generations:
        longest = 0
        for ref in corpus:
            longest = max(longest, longest_near_match(gen, ref))
        ratio = longest / len(gen) if gen else 0.0
        reports.append(CopyrightReport(longest, ratio, longest >= threshold))
    rate = sum(r.at_risk for r in reports) / len(reports)
    return rate, reports


def structure_adherence(
    stanzas: Sequence["CandidateStanza"], specs: Sequence["GenerationSpec"]
) -> tuple[float, float]:
    """(line-count accuracy, last-word coverage) over paired stanzas/specs.

    Coverage pools every verse: its final token must equal its prepended
    word (compared in normalized form).  Both are vacuously 1.0 on empty
    input.
    """
    if len(stanzas) != len(specs):
        raise ValueError(
            f"paired lists differ in length: {len(stanzas)} vs {len(specs)}"
        )
    if not stanzas:
        return 1.0, 1.0
    exact = sum(
        len(stanza.verses) == len(spec.schema)
        for stanza, spec in zip(stanzas, specs)
    )
    verses = [verse for stanza in stanzas for verse in stanza.verses]
    if verses:
        covered = sum(
            normalize_word(verse.tokens[-1]) == normalize_word(verse.last_word)
            for verse in verses
        )
        coverage = covered / len(verses)
    else:
        coverage = 1.0
    return exact / len(stanzas), coverage


@dataclass(frozen=True)
class MetricReport:
    """Aggregate evaluation over a batch of generations."""

    rhyme_precision: float
    rhyme_fpr: float
    rhyme_fpr_printed: float
    distinct_2: float
    distinct_3: float
    distinct_4: float
    line_count_accuracy: float
    last_word_coverage: float
    perplexity: float | None = None
    copyright_rate: float | None = None
    mauve: float | None = None

    def to_json(self) -> dict:
        return {
            "rhyme_precision": self.rhyme_precision,
            "rhyme_fpr": self.rhyme_fpr,
            "rhyme_fpr_printed": self.rhyme_fpr_printed,
            "perplexity": self.perplexity,
            "distinct_2": self.distinct_2,
            "distinct_3": self.distinct_3,
            "distinct_4": self.distinct_4,
            "copyright_rate": self.copyright_rate,
            "line_count_accuracy": self.line_count_accuracy,
            "last_word_coverage": self.last_word_coverage,
            "mauve": self.mauve,
        }


def evaluate_generations(
    stanzas: Sequence["CandidateStanza"],
    specs: Sequence["GenerationSpec"],
    dictionary: PronouncingDictionary,
    profile: LanguageProfile = ENGLISH_PROFILE,
    table: ConsonantClassTable = DEFAULT_CONSONANT_TABLE,
    *,
    model: NGramModel | None = None,
    references: Sequence[tuple[str, str]] | None = None,
    corpus_tokens: Sequence[Sequence[str]] | None = None,
    copyright_threshold: int = 20,
) -> tuple[MetricReport, list[dict]]:
    """Run the full metric battery; returns the report and per-item rows.

    Perplexity needs both a model and reference (prompt, target) pairs;
    the copyright rate needs the training corpus token lists.  Either is
    skipped (reported as null) when its inputs are absent.
    """
    if not stanzas:
        raise ValueError("no generations to evaluate")
    if len(stanzas) != len(specs):
        raise ValueError(
            f"paired lists differ in length: {len(stanzas)} vs {len(specs)}"
        )
    items: list[dict] = []
    rp_values = []
    fpr_values = []
    fpr_printed_values = []
    for stanza, spec in zip(stanzas, specs):
        finals = [verse.tokens[-1] for verse in stanza.verses]
        rp = rhyme_precision(finals, spec.schema, dictionary, profile, table)
        fpr = rhyme_fpr(finals, spec.schema, dictionary, profile, table)
        fpr_printed = rhyme_fpr(
            finals, spec.schema, dictionary, profile, table, printed_formula=True
        )
        rp_values.append(rp)
        fpr_values.append(fpr)
        fpr_printed_values.append(fpr_printed)
        items.append(
            {
                "schema": str(spec.schema),
                "verse_count": len(stanza.verses),
                "finals": finals,
                "rhyme_precision": rp,
                "rhyme_fpr": fpr,
            }
        )

    streams = [
        [token for verse in stanza.verses for token in verse.tokens]
        for stanza in stanzas
    ]
    line_accuracy, coverage = structure_adherence(stanzas, specs)

    pp_mean: float | None = None
    if model is not None and references:
        pp_values = [perplexity(model, prompt, target) for prompt, target in references]
        pp_mean = float(np.mean(pp_values))

    copy_rate: float | None = None
    if corpus_tokens is not None:
        gen_tokens = [copyright_tokens(stanza.text) for stanza in stanzas]
        copy_rate, copy_reports = copyright_rate(
            gen_tokens, corpus_tokens, copyright_threshold
        )
        for item, report in zip(items, copy_reports):
            item["copyright"] = report.to_json()

    report = MetricReport(
        rhyme_precision=float(np.mean(rp_values)),
        rhyme_fpr=float(np.mean(fpr_values)),
        rhyme_fpr_printed=float(np.mean(fpr_printed_values)),
        distinct_2=pooled_distinct_n(streams, 2),
        distinct_3=pooled_distinct_n(streams, 3),
        distinct_4=pooled_distinct_n(streams, 4),
        line_count_accuracy=line_accuracy,
        last_word_coverage=coverage,
        perplexity=pp_mean,
        copyright_rate=copy_rate,
    )
    return report, items
