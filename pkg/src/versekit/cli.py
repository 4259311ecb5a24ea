"""Command-line pipeline: build-dataset, annotate, train-lm, generate, evaluate.

One seed per invocation feeds named substreams, so every subcommand is
deterministic; all file interfaces are JSONL, and `generate` output feeds
`evaluate` directly.  Errors exit nonzero with a single "error: ..." line.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from . import corpus as corpus_mod
from . import decode as decode_mod
from . import metrics as metrics_mod
from .corpus import (
    DEFAULT_MAX_VERSE_TOKENS,
    GenerationSpec,
    ParagraphRecord,
    SongDocument,
    build_records,
    record_row,
    split_dataset,
)
from .lm import NGramModel, train_ngram
from .phonetics import (
    ENGLISH_PROFILE,
    LanguageProfile,
    PronouncingDictionary,
    load_language_profiles,
)
from .rhyme import (
    ConsonantClassTable,
    DEFAULT_CONSONANT_TABLE,
    RhymeSchema,
    induce_schema,
)
from .util import canonical_json, derive_seed, read_jsonl


@dataclass(frozen=True)
class Config:
    """Tool-wide settings; a config file fills these, flags override."""

    dictionary_path: str | None = None
    profiles_path: str | None = None
    consonant_classes_path: str | None = None
    ngram_order: int = 3
    ngram_k: float = 0.01
    ngram_min_count: int = 1
    beam: int = 4
    sample_k: int = 20
    temperature: float = 1.0
    max_verse_tokens: int = DEFAULT_MAX_VERSE_TOKENS
    rhyme_assist: bool = False
    verse_final_match: bool = True
    split_ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0

    def __post_init__(self) -> None:
        if not 1 <= self.ngram_order <= 6:
            raise ValueError(f"ngram order must be in [1, 6], got {self.ngram_order}")
        if self.ngram_k <= 0:
            raise ValueError(f"ngram k must be > 0, got {self.ngram_k}")
        if self.ngram_min_count < 1:
            raise ValueError(f"min count must be >= 1, got {self.ngram_min_count}")
        if self.beam < 1:
            raise ValueError(f"beam must be >= 1, got {self.beam}")
        if self.sample_k < 1:
            raise ValueError(f"sample k must be >= 1, got {self.sample_k}")
        if self.temperature <= 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")
        if self.max_verse_tokens < 1:
            raise ValueError(
                f"max verse tokens must be >= 1, got {self.max_verse_tokens}"
            )
        if len(self.split_ratios) != 3 or abs(sum(self.split_ratios) - 1.0) > 1e-6:
            raise ValueError(f"split ratios must sum to 1, got {self.split_ratios}")
        for name in ("dictionary_path", "profiles_path", "consonant_classes_path"):
            value = getattr(self, name)
            if value is not None and not Path(value).exists():
                raise ValueError(f"{name.replace('_', ' ')} does not exist: {value}")

    @classmethod
    def from_file(cls, path: str | Path) -> "Config":
        parser = configparser.ConfigParser()
        if not parser.read(path, encoding="utf-8"):
            raise ValueError(f"config file not found: {path}")

        def get(section: str, option: str, cast, default):
            if parser.has_option(section, option):
                if cast is bool:
                    return parser.getboolean(section, option)
                return cast(parser.get(section, option))
            return default

        base = cls()
        ratios = base.split_ratios
        if parser.has_option("split", "ratios"):
            parts = parser.get("split", "ratios").replace(",", " ").split()
            ratios = tuple(float(p) for p in parts)
        return cls(
            dictionary_path=get("paths", "dictionary", str, base.dictionary_path),
            profiles_path=get("paths", "profiles", str, base.profiles_path),
            consonant_classes_path=get(
                "paths", "consonant_classes", str, base.consonant_classes_path
            ),
            ngram_order=get("ngram", "order", int, base.ngram_order),
            ngram_k=get("ngram", "k", float, base.ngram_k),
            ngram_min_count=get("ngram", "min_count", int, base.ngram_min_count),
            beam=get("decode", "beam", int, base.beam),
            sample_k=get("decode", "k", int, base.sample_k),
            temperature=get("decode", "temperature", float, base.temperature),
            max_verse_tokens=get(
                "decode", "max_verse_tokens", int, base.max_verse_tokens
            ),
            rhyme_assist=get("decode", "rhyme_assist", bool, base.rhyme_assist),
            verse_final_match=get(
                "decode", "verse_final_match", bool, base.verse_final_match
            ),
            split_ratios=ratios,
            seed=get("seeds", "seed", int, base.seed),
        )


def _load_config(args: argparse.Namespace) -> Config:
    if getattr(args, "config", None):
        return Config.from_file(args.config)
    return Config()


def _resolve(flag_value, config_value):
    return config_value if flag_value is None else flag_value


def _load_dictionary(path: str | None) -> PronouncingDictionary:
    if path is None:
        return PronouncingDictionary.bundled()
    return PronouncingDictionary.load(path)


def _load_profiles(path: str | None) -> dict[str, LanguageProfile]:
    return load_language_profiles(path)


def _load_table(path: str | None) -> ConsonantClassTable:
    if path is None:
        return DEFAULT_CONSONANT_TABLE
    return ConsonantClassTable.from_config(path)


def _read_rows(path: str) -> list[dict]:
    if path == "-":
        return [json.loads(line) for line in sys.stdin if line.strip()]
    return list(read_jsonl(path))


def _open_out(path: str | None):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8"), True


def _cmd_build_dataset(args: argparse.Namespace) -> int:
    config = _load_config(args)
    dictionary = _load_dictionary(_resolve(args.dictionary, config.dictionary_path))
    profiles = _load_profiles(_resolve(args.profiles, config.profiles_path))
    table = _load_table(
        _resolve(args.consonant_classes, config.consonant_classes_path)
    )
    seed = _resolve(args.seed, config.seed)
    songs = [SongDocument.from_json(row) for row in _read_rows(args.input)]
    if not songs:
        raise ValueError(f"no songs in {args.input}")
    multilingual = args.mode == "multilingual"
    records = build_records(
        songs,
        dictionary,
        profiles,
        multilingual=multilingual,
        min_songs=args.min_songs,
        group_size=args.group_size,
        table=table,
        jobs=args.jobs,
    )
    if not records:
        raise ValueError("zero records produced")
    corpus_mod.write_records(args.output, records, include_language=multilingual)
    if args.split:
        ratios = tuple(float(p) for p in args.split.replace(",", " ").split())
        train, dev, test = split_dataset(
            records, ratios, derive_seed(seed, "split")
        )
        stem = Path(args.output)
        for name, part in (("train", train), ("dev", dev), ("test", test)):
            corpus_mod.write_records(
                stem.with_suffix(f".{name}{stem.suffix}"),
                part,
                include_language=multilingual,
            )
    per_language: dict[str, tuple[set, int]] = {}
    for record in records:
        songs_seen, count = per_language.get(record.language, (set(), 0))
        songs_seen.add(record.song_id)
        per_language[record.language] = (songs_seen, count + 1)
    print(f"{'language':<10} {'songs':>8} {'paragraphs':>12}")
    for code in sorted(per_language):
        songs_seen, count = per_language[code]
        print(f"{code:<10} {len(songs_seen):>8} {count:>12}")
    print(f"{'total':<10} {sum(len(s) for s, _ in per_language.values()):>8} "
          f"{len(records):>12}")
    return 0


def _cmd_annotate(args: argparse.Namespace) -> int:
    config = _load_config(args)
    dictionary = _load_dictionary(_resolve(args.dictionary, config.dictionary_path))
    profiles = _load_profiles(_resolve(args.profiles, config.profiles_path))
    table = _load_table(
        _resolve(args.consonant_classes, config.consonant_classes_path)
    )
    profile = profiles.get(args.language, ENGLISH_PROFILE)
    if not profile.dictionary:
        dictionary = PronouncingDictionary({})
    words = [w.strip() for w in args.last_words.split(",") if w.strip()]
    if not words:
        raise ValueError("no last words given")
    schema = induce_schema(dictionary, words, profile, table)
    print(schema)
    return 0


def _pairs_from_rows(rows: Sequence[dict], mode: str) -> list[tuple[str, str]]:
    """(prompt, target) texts from dataset rows, recomputing if needed."""
    target_key = "target_lwf" if mode == "lwf" else "target_plain"
    pairs = []
    for row in rows:
        if "prompt" in row and target_key in row:
            pairs.append((row["prompt"], row[target_key]))
        else:
            rebuilt = record_row(ParagraphRecord.from_json(row))
            pairs.append((rebuilt["prompt"], rebuilt[target_key]))
    return pairs


def _cmd_train_lm(args: argparse.Namespace) -> int:
    config = _load_config(args)
    rows = _read_rows(args.dataset)
    if not rows:
        raise ValueError(f"no records in {args.dataset}")
    pairs = _pairs_from_rows(rows, args.mode)
    model = train_ngram(
        pairs,
        order=_resolve(args.order, config.ngram_order),
        k=_resolve(args.k, config.ngram_k),
        min_count=_resolve(args.min_count, config.ngram_min_count),
        mode=args.mode,
    )
    model.save(args.model_out)
    print(
        f"trained order-{model.order} model: {len(model.vocab)} tokens, "
        f"{sum(len(t) for t in model.counts)} contexts"
    )
    return 0


def _parse_forced(values: Sequence[str]) -> dict[int, str]:
    forced: dict[int, str] = {}
    for item in values:
        if "=" not in item:
            raise ValueError(f"--force-word needs idx=word, got {item!r}")
        index_text, word = item.split("=", 1)
        try:
            index = int(index_text)
        except ValueError as exc:
            raise ValueError(f"--force-word index must be an integer: {item!r}") from exc
        if not word:
            raise ValueError(f"--force-word has an empty word: {item!r}")
        forced[index] = word
    return forced


def _generate_one(
    model: NGramModel,
    spec: GenerationSpec,
    strategy: str,
    k: int,
    beam: int,
    dictionary: PronouncingDictionary,
    profile: LanguageProfile,
    table: ConsonantClassTable,
    settings: decode_mod.DecodeSettings,
) -> decode_mod.CandidateStanza:
    if strategy == "beam":
        return decode_mod.beam_search(
            model, spec, beam, dictionary, profile, table, settings
        )
    best, _ = decode_mod.sample_and_rerank(
        model, spec, k, None, dictionary, profile, table, settings
    )
    return best


def _cmd_generate(args: argparse.Namespace) -> int:
    config = _load_config(args)
    dictionary = _load_dictionary(_resolve(args.dictionary, config.dictionary_path))
    profiles = _load_profiles(_resolve(args.profiles, config.profiles_path))
    table = _load_table(
        _resolve(args.consonant_classes, config.consonant_classes_path)
    )
    model = NGramModel.load(args.model)
    if model.mode != "lwf":
        raise ValueError(
            "generation needs a model trained with --mode lwf; "
            f"this one was trained with --mode {model.mode}"
        )
    seed = _resolve(args.seed, config.seed)
    k = _resolve(args.k, config.sample_k)
    beam = _resolve(args.beam, config.beam)
    settings = decode_mod.DecodeSettings(
        rhyme_assist=(
            config.rhyme_assist if args.rhyme_assist is None else args.rhyme_assist
        ),
        verse_final_match=(
            config.verse_final_match
            if args.verse_final_match is None
            else args.verse_final_match
        ),
        temperature=_resolve(args.temperature, config.temperature),
    )

    specs: list[GenerationSpec]
    if args.batch:
        specs = []
        for index, row in enumerate(_read_rows(args.batch)):
            spec = GenerationSpec.from_json(row.get("spec", row))
            if "seed" not in row.get("spec", row):
                spec = replace(spec, seed=derive_seed(seed, f"batch:{index}"))
            specs.append(spec)
        if not specs:
            raise ValueError(f"no specs in {args.batch}")
    else:
        if not args.schema:
            raise ValueError("--schema is required without --batch")
        specs = [
            GenerationSpec(
                schema=RhymeSchema.from_string(args.schema),
                title=args.title,
                artist=args.artist,
                genre=args.genre,
                emotions=tuple(
                    w.strip() for w in (args.emotions or "").split(",") if w.strip()
                ),
                topics=tuple(
                    w.strip() for w in (args.topics or "").split(",") if w.strip()
                ),
                language=args.lang,
                forced_last_words=_parse_forced(args.force_word or []),
                max_verse_tokens=_resolve(
                    args.max_verse_tokens, config.max_verse_tokens
                ),
                seed=seed,
            )
        ]

    profile = profiles.get(specs[0].language or "en", ENGLISH_PROFILE)
    if not profile.dictionary:
        dictionary = PronouncingDictionary({})
    out, owned = _open_out(args.out)
    try:
        for spec in specs:
            stanza = _generate_one(
                model, spec, args.strategy, k, beam, dictionary, profile, table, settings
            )
            if args.pretty:
                out.write(f"# schema {spec.schema}\n{stanza.text}\n\n")
            else:
                row = {
                    "spec": spec.to_json(),
                    "stanza": stanza.to_json(),
                    "strategy": args.strategy,
                }
                out.write(canonical_json(row) + "\n")
    finally:
        if owned:
            out.close()
    return 0


def _render_table(report: metrics_mod.MetricReport) -> str:
    def fmt(value: float | None, digits: int = 3) -> str:
        return "-" if value is None else f"{value:.{digits}f}"

    headers = ["RP", "R.FP", "PPL", "D-2", "D-3", "D-4", "(c)", "Lines", "Cover"]
    values = [
        fmt(report.rhyme_precision),
        fmt(report.rhyme_fpr),
        fmt(report.perplexity, 2),
        fmt(report.distinct_2),
        fmt(report.distinct_3),
        fmt(report.distinct_4),
        fmt(report.copyright_rate),
        fmt(report.line_count_accuracy),
        fmt(report.last_word_coverage),
    ]
    widths = [max(len(h), len(v)) for h, v in zip(headers, values)]
    header_line = "  ".join(h.ljust(w) for h, w in zip(headers, widths))
    value_line = "  ".join(v.ljust(w) for v, w in zip(values, widths))
    return f"{header_line}\n{value_line}"


def _cmd_evaluate(args: argparse.Namespace) -> int:
    config = _load_config(args)
    dictionary = _load_dictionary(_resolve(args.dictionary, config.dictionary_path))
    profiles = _load_profiles(_resolve(args.profiles, config.profiles_path))
    table = _load_table(
        _resolve(args.consonant_classes, config.consonant_classes_path)
    )
    gen_rows = _read_rows(args.generations)
    if not gen_rows:
        raise ValueError(f"no generations in {args.generations}")
    stanzas = []
    specs = []
    for row in gen_rows:
        if "stanza" not in row or "spec" not in row:
            raise ValueError("generation rows need 'spec' and 'stanza' fields")
        stanzas.append(decode_mod.CandidateStanza.from_json(row["stanza"]))
        specs.append(GenerationSpec.from_json(row["spec"]))
    profile = profiles.get(specs[0].language or "en", ENGLISH_PROFILE)
    if not profile.dictionary:
        dictionary = PronouncingDictionary({})

    model = NGramModel.load(args.model) if args.model else None
    references = None
    if model is not None:
        ref_rows = _read_rows(args.references)
        references = _pairs_from_rows(
            ref_rows, "lwf" if model.mode == "lwf" else "plain"
        )
        if not references:
            raise ValueError(f"no references in {args.references}")

    corpus_tokens = []
    for row in _read_rows(args.dataset):
        lines = row.get("lines")
        if lines is None:
            raise ValueError("dataset rows need a 'lines' field")
        corpus_tokens.append(metrics_mod.copyright_tokens(" ".join(lines)))

    report, items = metrics_mod.evaluate_generations(
        stanzas,
        specs,
        dictionary,
        profile,
        table,
        model=model,
        references=references,
        corpus_tokens=corpus_tokens,
        copyright_threshold=args.copyright_threshold,
    )
    payload = {"report": report.to_json(), "items": items}
    if args.report_out:
        with open(args.report_out, "w", encoding="utf-8") as handle:
            json.dump(payload, handle, indent=2, sort_keys=True)
            handle.write("\n")
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(_render_table(report))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="versekit",
        description="Rhyme-schema lyrics toolkit: datasets, models, "
        "constrained generation, evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="INI config file; flags override it")
        p.add_argument("--dictionary", help="pronouncing dictionary path")
        p.add_argument("--profiles", help="language profiles INI path")
        p.add_argument("--consonant-classes", help="consonant class table INI path")

    p = sub.add_parser("build-dataset", help="songs JSONL -> paragraph records JSONL")
    p.add_argument("input", help="songs JSONL ('-' for stdin)")
    p.add_argument("output", help="records JSONL path")
    p.add_argument("--mode", choices=("en", "multilingual"), default="en")
    p.add_argument("--group-size", type=int, default=corpus_mod.DEFAULT_GROUP_SIZE,
                   help="lines per stanza for headerless lyrics")
    p.add_argument("--min-songs", type=int, default=corpus_mod.LANGUAGE_MIN_SONGS,
                   help="multilingual mode drops languages below this song count")
    p.add_argument("--split", metavar="R,R,R",
                   help="also write .train/.dev/.test files with these ratios")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    add_common(p)
    p.set_defaults(func=_cmd_build_dataset)

    p = sub.add_parser("annotate", help="induce a rhyme schema from last words")
    p.add_argument("--last-words", required=True,
                   help='comma-separated words, e.g. "river,dive,ride"')
    p.add_argument("--language", default="en")
    add_common(p)
    p.set_defaults(func=_cmd_annotate)

    p = sub.add_parser("train-lm", help="train the n-gram model on a dataset")
    p.add_argument("dataset", help="records JSONL ('-' for stdin)")
    p.add_argument("model_out", help="model JSON path")
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--k", type=float, default=None)
    p.add_argument("--min-count", type=int, default=None)
    p.add_argument("--mode", choices=("lwf", "plain"), default="lwf")
    p.add_argument("--config")
    p.set_defaults(func=_cmd_train_lm)

    p = sub.add_parser("generate", help="generate stanzas under a rhyme schema")
    p.add_argument("model", help="model JSON path")
    p.add_argument("--schema", help='rhyme schema, e.g. "A B B"')
    p.add_argument("--title")
    p.add_argument("--artist")
    p.add_argument("--genre")
    p.add_argument("--emotions", help="comma-separated")
    p.add_argument("--topics", help="comma-separated")
    p.add_argument("--lang")
    p.add_argument("--strategy", choices=("beam", "sample-rerank"),
                   default="sample-rerank")
    p.add_argument("--k", type=int, default=None, help="samples for reranking")
    p.add_argument("--beam", type=int, default=None, help="beam width")
    p.add_argument("--force-word", action="append", metavar="IDX=WORD",
                   help="force a verse's last word; repeatable")
    p.add_argument("--temperature", type=float, default=None)
    p.add_argument("--max-verse-tokens", type=int, default=None)
    p.add_argument("--rhyme-assist", action=argparse.BooleanOptionalAction,
                   default=None)
    p.add_argument("--verse-final-match", action=argparse.BooleanOptionalAction,
                   default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--batch", help="JSONL of generation specs")
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--pretty", action="store_true",
                   help="human-readable verses instead of JSONL")
    add_common(p)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("evaluate", help="score generations against references")
    p.add_argument("generations", help="generate output JSONL ('-' for stdin)")
    p.add_argument("references", help="reference records JSONL (for perplexity)")
    p.add_argument("dataset", help="training records JSONL (for copyright)")
    p.add_argument("--copyright-threshold", type=int, default=20)
    p.add_argument("--model", help="model JSON for perplexity")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--report-out", help="also write the JSON report here")
    add_common(p)
    p.set_defaults(func=_cmd_evaluate)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 0
    except (ValueError, OSError, KeyError) as exc:
        message = " ".join(str(exc).split())
        print(f"error: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
