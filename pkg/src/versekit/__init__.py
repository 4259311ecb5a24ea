"""Lyrics generation toolkit with rhyme-schema control.

Pipeline: ingest song corpora, induce per-stanza rhyme schemas, build
last-word-first training pairs, train a token generator (built-in n-gram),
decode new stanzas under a schema grammar, and evaluate the output.
"""

from .corpus import (
    GenerationSpec,
    ParagraphRecord,
    SectionType,
    SongDocument,
    build_records,
    format_lwf_target,
    format_plain_target,
    format_prompt,
    parse_lwf_target,
    parse_plain_target,
    parse_prompt,
    parse_sections,
    split_dataset,
)
from .decode import (
    CandidateStanza,
    ConstrainedDecoder,
    DecodeSettings,
    Verse,
    beam_search,
    rerank_score,
    sample_and_rerank,
    sample_stanza,
)
from .lm import (
    NGramModel,
    TokenGenerator,
    Vocabulary,
    tokenize,
    train_from_records,
    train_ngram,
)
from .metrics import (
    MetricReport,
    copyright_rate,
    distinct_n,
    evaluate_generations,
    perplexity,
    rhyme_fpr,
    rhyme_precision,
    structure_adherence,
)
from .phonetics import (
    EndingPhoneticRepresentation,
    LanguageProfile,
    Phoneme,
    PhonemeSequence,
    PronouncingDictionary,
    ending_phonetic_representation,
    grapheme_rhyme_suffix,
    load_language_profiles,
    normalize_word,
)
from .rhyme import (
    ConsonantClassTable,
    RhymeKind,
    RhymeSchema,
    RhymeVerdict,
    annotate_lines,
    induce_schema,
    last_word,
    rhyme_verdict,
    rhymes,
)

__version__ = "0.1.0"

__all__ = [
    "CandidateStanza",
    "ConsonantClassTable",
    "ConstrainedDecoder",
    "DecodeSettings",
    "EndingPhoneticRepresentation",
    "GenerationSpec",
    "LanguageProfile",
    "MetricReport",
    "NGramModel",
    "ParagraphRecord",
    "Phoneme",
    "PhonemeSequence",
    "PronouncingDictionary",
    "RhymeKind",
    "RhymeSchema",
    "RhymeVerdict",
    "SectionType",
    "SongDocument",
    "TokenGenerator",
    "Verse",
    "Vocabulary",
    "annotate_lines",
    "beam_search",
    "build_records",
    "copyright_rate",
    "distinct_n",
    "ending_phonetic_representation",
    "evaluate_generations",
    "format_lwf_target",
    "format_plain_target",
    "format_prompt",
    "grapheme_rhyme_suffix",
    "induce_schema",
    "last_word",
    "load_language_profiles",
    "normalize_word",
    "parse_lwf_target",
    "parse_plain_target",
    "parse_prompt",
    "parse_sections",
    "perplexity",
    "rerank_score",
    "rhyme_fpr",
    "rhyme_precision",
    "rhyme_verdict",
    "rhymes",
    "sample_and_rerank",
    "sample_stanza",
    "split_dataset",
    "structure_adherence",
    "tokenize",
    "train_from_records",
    "train_ngram",
    "__version__",
]
