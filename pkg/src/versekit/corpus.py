"""Corpus ingestion and dataset construction.

Raw songs come in as JSONL documents with metadata and full lyric text.
They are cut into stanza-level paragraph records (via bracketed section
headers when present, fixed-size line groups otherwise), annotated with an
induced rhyme schema, and serialized as prompt/target training pairs.

Wire formats are exact and round-trip:

  prompt   <bos><title> The River <artist> Bruce Springsteen <emotions> sad
           <rhyming_schema> A B B <eos>            (single spaces, no breaks)
  target   <rhyme_A> river <sep> We'd go down to the river <eol> ... <eos>
"""

from __future__ import annotations

import enum
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .phonetics import (
    ENGLISH_PROFILE,
    LanguageProfile,
    PronouncingDictionary,
)
from .rhyme import (
    ConsonantClassTable,
    DEFAULT_CONSONANT_TABLE,
    RhymeSchema,
    induce_schema,
    last_word,
)
from .util import hash_fraction, read_jsonl, write_jsonl

logger = logging.getLogger(__name__)

LANGUAGE_MIN_SONGS = 3000
DEFAULT_GROUP_SIZE = 6
DEFAULT_SPLIT_RATIOS = (0.8, 0.1, 0.1)
DEFAULT_MAX_VERSE_TOKENS = 16


class SectionType(str, enum.Enum):
    CHORUS = "chorus"
    VERSE = "verse"
    BRIDGE = "bridge"
    PRECHORUS = "prechorus"
    INTRO = "intro"
    OUTRO = "outro"
    OTHER = "other"


@dataclass(frozen=True)
class SongDocument:
    """One raw song: identity, metadata, and full lyric text."""

    song_id: str
    lyrics: str
    title: str = ""
    artist: str = ""
    genre: str = ""
    language: str = "en"
    emotions: tuple[str, ...] = ()
    topics: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.song_id:
            raise ValueError("song_id must be non-empty")

    @classmethod
    def from_json(cls, row: Mapping) -> "SongDocument":
        missing = [key for key in ("song_id", "lyrics") if key not in row]
        if missing:
            raise ValueError(f"song row missing keys: {', '.join(missing)}")
        return cls(
            song_id=str(row["song_id"]),
            lyrics=str(row["lyrics"]),
            title=str(row.get("title", "")),
            artist=str(row.get("artist", "")),
            genre=str(row.get("genre", "")),
            language=str(row.get("language", "en")),
            emotions=tuple(row.get("emotions", ())),
            topics=tuple(row.get("topics", ())),
        )

    def to_json(self) -> dict:
        return {
            "song_id": self.song_id,
            "lyrics": self.lyrics,
            "title": self.title,
            "artist": self.artist,
            "genre": self.genre,
            "language": self.language,
            "emotions": list(self.emotions),
            "topics": list(self.topics),
        }


_HEADER_RE = re.compile(r"^\[([^\[\]]*)\]$")

_SECTION_PREFIXES = (
    ("prechorus", SectionType.PRECHORUS),
    ("chorus", SectionType.CHORUS),
    ("verse", SectionType.VERSE),
    ("bridge", SectionType.BRIDGE),
    ("intro", SectionType.INTRO),
    ("outro", SectionType.OUTRO),
)


def classify_section_header(header: str) -> SectionType:
    """Map header text (inside the brackets) to a section type.

    The part before any ':' is matched by case-insensitive prefix after
    dropping spaces and hyphens, so "Pre-Chorus 2" hits prechorus.
    """
    label = header.split(":", 1)[0]
    label = re.sub(r"[\s\-_]+", "", label).lower()
    for prefix, section_type in _SECTION_PREFIXES:
        if label.startswith(prefix):
            return section_type
    return SectionType.OTHER


def has_section_headers(lyrics: str) -> bool:
    return any(_HEADER_RE.match(line.strip()) for line in lyrics.splitlines())


def parse_sections(song: SongDocument) -> list[tuple[SectionType, list[str]]]:
    """Split lyrics into (type, lines) sections on bracketed headers.

    Blank lines are dropped, empty sections are skipped, and lyrics with no
    headers come back as a single section of type other.
    """
    sections: list[tuple[SectionType, list[str]]] = []
    current_type = SectionType.OTHER
    current_lines: list[str] = []
    saw_header = False

    def flush() -> None:
        if current_lines:
            sections.append((current_type, list(current_lines)))

    for raw in song.lyrics.splitlines():
        line = raw.strip()
        if not line:
            continue
        match = _HEADER_RE.match(line)
        if match is not None:
            flush()
            current_type = classify_section_header(match.group(1))
            current_lines = []
            saw_header = True
        else:
            current_lines.append(line)
    flush()
    if not saw_header and sections:
        return [(SectionType.OTHER, sections[0][1])]
    return sections


def chunk_unsectioned(
    lines: Sequence[str], group_size: int = DEFAULT_GROUP_SIZE
) -> list[list[str]]:
    """Group headerless lyrics into fixed-size stanzas.

    A short final group survives only when it has at least two lines.
    """
    if group_size < 1:
        raise ValueError(f"group_size must be >= 1, got {group_size}")
    groups = [list(lines[i : i + group_size]) for i in range(0, len(lines), group_size)]
    if groups and len(groups[-1]) < group_size and len(groups[-1]) < 2:
        groups.pop()
    return groups


@dataclass(frozen=True)
class ParagraphRecord:
    """One stanza with its induced schema and copied song metadata."""

    song_id: str
    section_type: SectionType
    section_index: int
    lines: tuple[str, ...]
    last_words: tuple[str, ...]
    schema: RhymeSchema
    previous_lines: tuple[str, ...] = ()
    title: str = ""
    artist: str = ""
    genre: str = ""
    language: str = "en"
    emotions: tuple[str, ...] = ()
    topics: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.lines:
            raise ValueError("record has no lines")
        if not (len(self.lines) == len(self.last_words) == len(self.schema)):
            raise ValueError(
                f"record shape mismatch: {len(self.lines)} lines, "
                f"{len(self.last_words)} last words, {len(self.schema)} letters"
            )
        if self.section_index == 0 and self.previous_lines:
            raise ValueError("first section cannot have previous lines")

    def to_json(self) -> dict:
        return {
            "song_id": self.song_id,
            "section_type": self.section_type.value,
            "section_index": self.section_index,
            "lines": list(self.lines),
            "last_words": list(self.last_words),
            "schema": str(self.schema),
            "previous_lines": list(self.previous_lines),
            "title": self.title,
            "artist": self.artist,
            "genre": self.genre,
            "language": self.language,
            "emotions": list(self.emotions),
            "topics": list(self.topics),
        }

    @classmethod
    def from_json(cls, row: Mapping) -> "ParagraphRecord":
        missing = [
            key
            for key in ("song_id", "section_type", "section_index", "lines",
                        "last_words", "schema")
            if key not in row
        ]
        if missing:
            raise ValueError(f"record row missing keys: {', '.join(missing)}")
        return cls(
            song_id=str(row["song_id"]),
            section_type=SectionType(row["section_type"]),
            section_index=int(row["section_index"]),
            lines=tuple(row["lines"]),
            last_words=tuple(row["last_words"]),
            schema=RhymeSchema.from_string(str(row["schema"])),
            previous_lines=tuple(row.get("previous_lines", ())),
            title=str(row.get("title", "")),
            artist=str(row.get("artist", "")),
            genre=str(row.get("genre", "")),
            language=str(row.get("language", "en")),
            emotions=tuple(row.get("emotions", ())),
            topics=tuple(row.get("topics", ())),
        )


_EMPTY_DICTIONARY = PronouncingDictionary({})


def _song_records(
    song: SongDocument,
    dictionary: PronouncingDictionary,
    profiles: Mapping[str, LanguageProfile],
    group_size: int,
    table: ConsonantClassTable,
) -> list[ParagraphRecord]:
    profile = profiles.get(song.language, ENGLISH_PROFILE)
    lookup = dictionary if profile.dictionary else _EMPTY_DICTIONARY
    if has_section_headers(song.lyrics):
        sections = parse_sections(song)
    else:
        lines = [line.strip() for line in song.lyrics.splitlines() if line.strip()]
        sections = [
            (SectionType.OTHER, group)
            for group in chunk_unsectioned(lines, group_size)
        ]
    records: list[ParagraphRecord] = []
    previous: tuple[str, ...] = ()
    for index, (section_type, raw_lines) in enumerate(sections):
        lines = tuple(" ".join(line.split()) for line in raw_lines)
        try:
            words = tuple(last_word(line) for line in lines)
            schema = induce_schema(lookup, words, profile, table)
        except ValueError as exc:
            logger.warning("skipping %s section %d: %s", song.song_id, index, exc)
            previous = lines
            continue
        records.append(
            ParagraphRecord(
                song_id=song.song_id,
                section_type=section_type,
                section_index=index,
                lines=lines,
                last_words=words,
                schema=schema,
                previous_lines=previous if index > 0 else (),
                title=song.title,
                artist=song.artist,
                genre=song.genre,
                language=song.language,
                emotions=song.emotions,
                topics=song.topics,
            )
        )
        previous = lines
    return records


def filter_languages(
    songs: Sequence[SongDocument], min_songs: int = LANGUAGE_MIN_SONGS
) -> list[SongDocument]:
    """Drop songs whose language has too few songs to learn from."""
    counts: dict[str, int] = {}
    for song in songs:
        counts[song.language] = counts.get(song.language, 0) + 1
    kept = [song for song in songs if counts[song.language] >= min_songs]
    dropped = sorted(code for code, n in counts.items() if n < min_songs)
    if dropped:
        logger.info("dropping languages below %d songs: %s", min_songs, dropped)
    return kept


def build_records(
    songs: Sequence[SongDocument],
    dictionary: PronouncingDictionary,
    profiles: Mapping[str, LanguageProfile] | None = None,
    *,
    multilingual: bool = False,
    min_songs: int = LANGUAGE_MIN_SONGS,
    group_size: int = DEFAULT_GROUP_SIZE,
    table: ConsonantClassTable = DEFAULT_CONSONANT_TABLE,
    jobs: int = 1,
) -> list[ParagraphRecord]:
    """Turn raw songs into schema-annotated paragraph records.

    Songs that fail to parse are logged and skipped, never fatal.  Order of
    output follows input song order regardless of the jobs count.
    """
    if profiles is None:
        profiles = {ENGLISH_PROFILE.code: ENGLISH_PROFILE}
    if multilingual:
        songs = filter_languages(songs, min_songs)

    def process(song: SongDocument) -> list[ParagraphRecord]:
        try:
            return _song_records(song, dictionary, profiles, group_size, table)
        except Exception as exc:
            logger.warning("skipping song %s: %s", song.song_id, exc)
            return []

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            per_song = list(pool.map(process, songs))
    else:
        per_song = [process(song) for song in songs]
    return [record for records in per_song for record in records]


@dataclass(frozen=True)
class GenerationSpec:
    """Everything a constrained generation request needs.

    forced_last_words maps zero-based verse indexes to words that must end
    those verses; other verses pick their own line-final word.
    """

    schema: RhymeSchema
    title: str | None = None
    artist: str | None = None
    genre: str | None = None
    emotions: tuple[str, ...] = ()
    topics: tuple[str, ...] = ()
    language: str | None = None
    previous_lines: tuple[str, ...] = ()
    forced_last_words: Mapping[int, str] = field(default_factory=dict)
    max_verse_tokens: int = DEFAULT_MAX_VERSE_TOKENS
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_verse_tokens < 1:
            raise ValueError(f"max_verse_tokens must be >= 1, got {self.max_verse_tokens}")
        for index, word in self.forced_last_words.items():
            if not 0 <= index < len(self.schema):
                raise ValueError(f"forced last word index {index} outside schema")
            if not word or not word.split():
                raise ValueError(f"forced last word for verse {index} is empty")

    def to_json(self) -> dict:
        return {
            "schema": str(self.schema),
            "title": self.title,
            "artist": self.artist,
            "genre": self.genre,
            "emotions": list(self.emotions),
            "topics": list(self.topics),
            "language": self.language,
            "previous_lines": list(self.previous_lines),
            "forced_last_words": {str(k): v for k, v in self.forced_last_words.items()},
            "max_verse_tokens": self.max_verse_tokens,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, row: Mapping) -> "GenerationSpec":
        if "schema" not in row:
            raise ValueError("generation spec missing schema")
        return cls(
            schema=RhymeSchema.from_string(str(row["schema"])),
            title=row.get("title") or None,
            artist=row.get("artist") or None,
            genre=row.get("genre") or None,
            emotions=tuple(row.get("emotions", ())),
            topics=tuple(row.get("topics", ())),
            language=row.get("language") or None,
            previous_lines=tuple(row.get("previous_lines", ())),
            forced_last_words={
                int(k): str(v) for k, v in dict(row.get("forced_last_words", {})).items()
            },
            max_verse_tokens=int(row.get("max_verse_tokens", DEFAULT_MAX_VERSE_TOKENS)),
            seed=int(row.get("seed", 0)),
        )

    @classmethod
    def from_record(
        cls, record: ParagraphRecord, *, include_language: bool = False
    ) -> "GenerationSpec":
        return cls(
            schema=record.schema,
            title=record.title or None,
            artist=record.artist or None,
            genre=record.genre or None,
            emotions=record.emotions,
            topics=record.topics,
            language=record.language if include_language else None,
            previous_lines=record.previous_lines,
        )


_EOL_JOIN = " <eol> "


def _clean_value(value: str) -> str:
    return " ".join(value.split())


def _clean_list_value(values: Sequence[str]) -> str:
    tokens: list[str] = []
    for value in values:
        tokens.extend(value.replace(",", " ").split())
    return " ".join(tokens)


def format_prompt(spec: GenerationSpec) -> str:
    """Render the exact conditioning string for a generation request.

    Fields appear in fixed order, each as "<tag> value "; absent or empty
    fields are omitted entirely; the schema field is always last.
    """
    parts = ["<bos>"]
    fields = (
        ("title", _clean_value(spec.title or "")),
        ("artist", _clean_value(spec.artist or "")),
        ("genre", _clean_list_value([spec.genre] if spec.genre else [])),
        ("emotions", _clean_list_value(spec.emotions)),
        ("topics", _clean_list_value(spec.topics)),
        ("lang", _clean_value(spec.language or "")),
        ("context", _EOL_JOIN.join(_clean_value(l) for l in spec.previous_lines if _clean_value(l))),
    )
    for tag, value in fields:
        if value:
            parts.append(f"<{tag}> {value} ")
    parts.append(f"<rhyming_schema> {spec.schema} <eos>")
    return "".join(parts)


_PROMPT_TAGS = ("title", "artist", "genre", "emotions", "topics", "lang", "context")
_PROMPT_SPLIT_RE = re.compile(
    r"<(bos|eos|title|artist|genre|emotions|topics|lang|context|rhyming_schema)>"
)


def parse_prompt(text: str) -> GenerationSpec:
    """Inverse of format_prompt; rejects malformed or misordered prompts."""
    parts = _PROMPT_SPLIT_RE.split(text)
    if len(parts) < 3 or parts[0].strip():
        raise ValueError("prompt must start with <bos>")
    tags = parts[1::2]
    values = parts[2::2]
    if tags[0] != "bos" or values[0].strip():
        raise ValueError("prompt must start with <bos>")
    if tags[-1] != "eos" or values[-1].strip():
        raise ValueError("prompt must end with <eos>")
    body = list(zip(tags[1:-1], values[1:-1]))
    if not body or body[-1][0] != "rhyming_schema":
        raise ValueError("prompt missing <rhyming_schema> field")
    schema = RhymeSchema.from_string(body[-1][1].strip())
    found: dict[str, str] = {}
    order = -1
    for tag, value in body[:-1]:
        if tag not in _PROMPT_TAGS:
            raise ValueError(f"unexpected prompt field <{tag}>")
        position = _PROMPT_TAGS.index(tag)
        if position <= order:
            raise ValueError(f"prompt field <{tag}> duplicated or out of order")
        order = position
        if not value.strip():
            raise ValueError(f"prompt field <{tag}> is empty")
        found[tag] = value.strip()
    previous = tuple(
        part.strip() for part in found.get("context", "").split(_EOL_JOIN.strip())
        if part.strip()
    ) if "context" in found else ()
    return GenerationSpec(
        schema=schema,
        title=found.get("title"),
        artist=found.get("artist"),
        genre=found.get("genre"),
        emotions=tuple(found["emotions"].split()) if "emotions" in found else (),
        topics=tuple(found["topics"].split()) if "topics" in found else (),
        language=found.get("lang"),
        previous_lines=previous,
    )


def format_lwf_target(
    lines: Sequence[str], last_words: Sequence[str], schema: RhymeSchema
) -> str:
    """Render the last-word-first target string for one stanza."""
    if not (len(lines) == len(last_words) == len(schema)):
        raise ValueError("lines, last words, and schema must have equal length")
    parts = []
    for letter, word, line in zip(schema.letters, last_words, lines):
        parts.append(f"<rhyme_{letter}> {word} <sep> {_clean_value(line)} <eol> ")
    return "".join(parts) + "<eos>"


def format_plain_target(lines: Sequence[str]) -> str:
    """Render the plain (no last-word prefix) target string."""
    if not lines:
        raise ValueError("no lines to format")
    return "".join(f"{_clean_value(line)} <eol> " for line in lines) + "<eos>"


_LWF_VERSE_RE = re.compile(r"<rhyme_([A-Z]+)> (\S+) <sep> (.*?) <eol> ")


def parse_lwf_target(text: str) -> tuple[tuple[str, ...], tuple[str, ...], RhymeSchema]:
    """Inverse of format_lwf_target: (lines, last_words, schema)."""
    pos = 0
    letters: list[str] = []
    words: list[str] = []
    lines: list[str] = []
    while True:
        match = _LWF_VERSE_RE.match(text, pos)
        if match is None:
            break
        letters.append(match.group(1))
        words.append(match.group(2))
        lines.append(match.group(3))
        pos = match.end()
    if text[pos:] != "<eos>" or not letters:
        raise ValueError(f"malformed last-word-first target near offset {pos}")
    return tuple(lines), tuple(words), RhymeSchema(tuple(letters))


def parse_plain_target(text: str) -> tuple[str, ...]:
    """Inverse of format_plain_target."""
    if not text.endswith("<eos>"):
        raise ValueError("plain target must end with <eos>")
    body = text[: -len("<eos>")]
    parts = body.split("<eol>")
    if parts and not parts[-1].strip():
        parts = parts[:-1]
    lines = tuple(part.strip() for part in parts)
    if not lines or any(not line for line in lines):
        raise ValueError("malformed plain target")
    return lines


def split_dataset(
    records: Sequence[ParagraphRecord],
    ratios: tuple[float, float, float] = DEFAULT_SPLIT_RATIOS,
    seed: int = 0,
) -> tuple[list[ParagraphRecord], list[ParagraphRecord], list[ParagraphRecord]]:
    """Hash songs into train/dev/test so no song straddles two splits."""
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ValueError(f"ratios must be three non-negative numbers, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-6:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    train: list[ParagraphRecord] = []
    dev: list[ParagraphRecord] = []
    test: list[ParagraphRecord] = []
    for record in records:
        fraction = hash_fraction(seed, record.song_id)
        if fraction < ratios[0]:
            train.append(record)
        elif fraction < ratios[0] + ratios[1]:
            dev.append(record)
        else:
            test.append(record)
    return train, dev, test


def read_songs(path: str | Path) -> list[SongDocument]:
    return [SongDocument.from_json(row) for row in read_jsonl(path)]


def write_songs(path: str | Path, songs: Iterable[SongDocument]) -> int:
    return write_jsonl(path, (song.to_json() for song in songs))


def record_row(record: ParagraphRecord, *, include_language: bool = False) -> dict:
    """Serialize a record plus its derived prompt and target strings."""
    spec = GenerationSpec.from_record(record, include_language=include_language)
    row = record.to_json()
    row["prompt"] = format_prompt(spec)
    row["target_lwf"] = format_lwf_target(record.lines, record.last_words, record.schema)
    row["target_plain"] = format_plain_target(record.lines)
    return row


def write_records(
    path: str | Path,
    records: Iterable[ParagraphRecord],
    *,
    include_language: bool = False,
) -> int:
    return write_jsonl(
        path, (record_row(r, include_language=include_language) for r in records)
    )


def read_records(path: str | Path) -> list[ParagraphRecord]:
    return [ParagraphRecord.from_json(row) for row in read_jsonl(path)]
